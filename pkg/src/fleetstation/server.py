"""TCP front door for the operator gateway.

Each connection is one operator session speaking length-delimited UTF-8
JSON: a 4-byte big-endian byte count followed by one flat object with a
``type`` field. The simulation advances in real time on a background
thread; outbound stream frames are flushed to every session each tick.
"""
from __future__ import annotations

import errno
import json
import socket
import struct
import threading
import time

from .errors import PortInUse
from .geometry import Twist2D
from .runner import System
from .scenario import Scenario

DEFAULT_PORT = 8765


def send_message(sock: socket.socket, message: dict):
    data = json.dumps(message).encode("utf-8")
    sock.sendall(struct.pack(">I", len(data)) + data)


def recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def recv_message(sock: socket.socket) -> dict | None:
    header = recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    body = recv_exact(sock, length)
    if body is None:
        return None
    return json.loads(body.decode("utf-8"))


class GatewayServer:
    """Owns the listening socket, the session sockets, and the sim clock."""

    def __init__(self, system: System, port: int = DEFAULT_PORT, host: str = "127.0.0.1",
                 realtime: bool = True):
        self.system = system
        self.realtime = realtime
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._listener.bind((host, port))
        except OSError as e:
            self._listener.close()
            if e.errno == errno.EADDRINUSE:
                raise PortInUse(f"port {port} is already in use") from e
            raise
        self._listener.listen()
        self.port = self._listener.getsockname()[1]
        self._lock = threading.Lock()
        self._sockets: dict[str, socket.socket] = {}  # sid -> socket
        self._inbound: list[tuple[str, dict]] = []
        self._running = False
        self._threads: list[threading.Thread] = []

    def start(self):
        self._running = True
        accept = threading.Thread(target=self._accept_loop, daemon=True)
        ticker = threading.Thread(target=self._tick_loop, daemon=True)
        self._threads = [accept, ticker]
        accept.start()
        ticker.start()
        return self

    def stop(self):
        self._running = False
        # dead-man: never leave a robot moving on shutdown
        with self._lock:
            for rid in self.system.robot_ids:
                self.system.world.set_command(rid, Twist2D.ZERO)
            for sock in self._sockets.values():
                try:
                    sock.close()
                except OSError:
                    pass
            self._sockets.clear()
        self._listener.close()

    # -- threads -----------------------------------------------------------

    def _accept_loop(self):
        while self._running:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            with self._lock:
                sid = self.system.gateway.connect()
                self._sockets[sid] = sock
            reader = threading.Thread(target=self._read_loop, args=(sid, sock), daemon=True)
            reader.start()

    def _read_loop(self, sid: str, sock: socket.socket):
        while self._running:
            try:
                msg = recv_message(sock)
            except OSError:
                msg = None
            if msg is None:
                break
            with self._lock:
                self._inbound.append((sid, msg))
        with self._lock:
            if sid in self._sockets:
                self._sockets.pop(sid).close()
                self.system.gateway.disconnect(sid)

    def _tick_loop(self):
        dt = self.system.world.dt
        while self._running:
            start = time.monotonic()
            with self._lock:
                pending, self._inbound = self._inbound, []
                replies = [
                    (sid, self.system.gateway.handle_message(sid, msg))
                    for sid, msg in pending
                ]
                self.system.step()
                tick = self.system.world.tick
                outbound = [
                    (sid, self.system.gateway.collect_outbound(sid, tick))
                    for sid in list(self._sockets)
                ]
                sockets = dict(self._sockets)
            for sid, reply in replies:
                self._send(sockets.get(sid), reply)
            for sid, frames in outbound:
                for frame in frames:
                    self._send(sockets.get(sid), frame)
            if self.realtime:
                time.sleep(max(0.0, dt - (time.monotonic() - start)))

    def _send(self, sock, message):
        if sock is None or message is None:
            return
        try:
            send_message(sock, message)
        except OSError:
            pass


def serve(scenario: Scenario, port: int = DEFAULT_PORT, realtime: bool = True) -> GatewayServer:
    """Build a live system for the scenario and start accepting operators."""
    server = GatewayServer(System(scenario), port, realtime=realtime)
    return server.start()
