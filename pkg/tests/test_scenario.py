import numpy as np
import pytest

from fleetstation.errors import ParseError, ValidationError
from fleetstation.geometry import Pose2D
from fleetstation.scenario import (
    Scenario,
    load_scenario_text,
    save_scenario,
)

BASIC = """format_version 1
name box
resolution 0.05
seed 7
param lidar_beams 90.0
map
########
#......#
#......#
########
endmap
robot r1 0.2 0.1 0.0
tag 1 0.3 0.15 3.14
"""


def test_load_basic():
    s = load_scenario_text(BASIC)
    assert s.name == "box"
    assert s.resolution == 0.05
    assert s.seed == 7
    assert s.params == {"lidar_beams": 90.0}
    assert s.occupied.shape == (4, 8)
    # text top row is the highest y row
    assert s.occupied[3].all() and s.occupied[0].all()
    assert not s.occupied[1, 1] and s.occupied[1, 0]
    assert s.robots == [("r1", Pose2D(0.2, 0.1, 0.0))]
    assert s.tags == [(1, Pose2D(0.3, 0.15, 3.14))]


def test_round_trip_byte_identical():
    s = load_scenario_text(BASIC)
    canonical = save_scenario(s)
    assert save_scenario(load_scenario_text(canonical)) == canonical


def test_comments_and_blank_lines_ignored():
    text = "// scenario\n\n" + BASIC
    s = load_scenario_text(text)
    assert s.name == "box"


def test_missing_endmap():
    with pytest.raises(ParseError):
        load_scenario_text(BASIC.replace("endmap\n", ""))


def test_unknown_directive_reports_line():
    text = BASIC + "frobnicate 1\n"
    with pytest.raises(ParseError) as e:
        load_scenario_text(text)
    assert e.value.line == len(BASIC.splitlines()) + 1


def test_bad_number():
    with pytest.raises(ParseError):
        load_scenario_text(BASIC.replace("0.05", "zero"))


def test_non_rectangular_map():
    with pytest.raises(ParseError):
        load_scenario_text(BASIC.replace("#......#\n#......#", "#......#\n#.....#"))


def test_invalid_map_char():
    with pytest.raises(ParseError):
        load_scenario_text(BASIC.replace("#......#", "#..x...#", 1))


def test_spawn_in_wall_rejected():
    with pytest.raises(ValidationError):
        load_scenario_text(BASIC.replace("robot r1 0.2 0.1", "robot r1 0.01 0.01"))


def test_duplicate_ids_rejected():
    with pytest.raises(ValidationError):
        load_scenario_text(BASIC + "robot r1 0.3 0.1 0.0\n")
    with pytest.raises(ValidationError):
        load_scenario_text(BASIC + "tag 1 0.2 0.1 0.0\n")


def test_validate_direct():
    occ = np.zeros((4, 4), dtype=bool)
    s = Scenario("t", 0.1, occ, [("r1", Pose2D(1.0, 1.0, 0.0))], [])
    with pytest.raises(ValidationError):
        s.validate()  # spawn outside the 0.4 m map
