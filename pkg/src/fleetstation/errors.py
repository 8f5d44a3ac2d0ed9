"""Exception types shared across the package."""


class FleetStationError(Exception):
    """Base class for all package-specific errors."""


class OutOfBounds(FleetStationError):
    pass


class UnknownRobot(FleetStationError):
    pass


class PoseOutsideGrid(FleetStationError):
    pass


class DegenerateInput(FleetStationError):
    pass


class MissingTransform(FleetStationError):
    pass


class NoPath(FleetStationError):
    pass


class GoalInObstacle(FleetStationError):
    pass


class BandSevered(FleetStationError):
    pass


class UnknownTag(FleetStationError):
    pass


class InvalidTask(FleetStationError):
    pass


class InvalidLabel(FleetStationError):
    pass


class MalformedMessage(FleetStationError):
    pass


class TeleopDenied(FleetStationError):
    pass


class NotClaimed(FleetStationError):
    pass


class ParseError(FleetStationError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self):
        base = super().__str__()
        if self.line is not None:
            return f"line {self.line}, col {self.column}: {base}"
        return base


class ValidationError(FleetStationError):
    pass


class Timeout(FleetStationError):
    pass


class PortInUse(FleetStationError):
    pass
