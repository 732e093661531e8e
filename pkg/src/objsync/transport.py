"""Socket transport: a request/response server for a dataframe and the
matching client side, plus an in-process transport for tests.

One frame in, one frame out, per request; connections are reused across
requests.  All graph effects of concurrent requests are serialized by the
per-graph writer lock inside the dataframe.
"""

from __future__ import annotations

import socket
import socketserver
import threading
from typing import Mapping

from .dataframe import Dataframe, RemoteHandle, Transport
from .errors import MalformedFrame, ObjSyncError, TransportError
from . import wire


def _parse_address(address: str) -> tuple[str, int]:
    if address.startswith("got://"):
        return wire.parse_got_url(address)
    host, _, port = address.rpartition(":")
    if not host:
        raise TransportError(f"address {address!r} is not host:port or a got:// url")
    return host, int(port)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        while True:
            try:
                frame = wire.read_frame(self.request)
            except (EOFError, ConnectionError, OSError):
                return
            try:
                message = wire.decode(frame, self.server.dataframe.registry)
                response = self.server.dataframe.handle_message(message)
            except (MalformedFrame, ObjSyncError):
                return  # a bad or unresolvable frame aborts the connection
            try:
                self.request.sendall(wire.encode(response))
            except OSError:
                return


class DataframeServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, dataframe: Dataframe, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _Handler)
        self.dataframe = dataframe
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self.server_address[1]

    @property
    def address(self) -> str:
        return f"{self.server_address[0]}:{self.server_address[1]}"

    def start(self) -> "DataframeServer":
        self._thread.start()
        return self

    def close(self) -> None:
        self.shutdown()
        self.server_close()


def serve(dataframe: Dataframe, host: str = "127.0.0.1", port: int = 0) -> DataframeServer:
    """Bind and start answering push and fetch requests for this dataframe."""
    return DataframeServer(dataframe, host, port).start()


class TCPTransport:
    """Client side: framed request/response over reused sockets."""

    def __init__(self, timeout: float = 30.0):
        self.timeout = timeout
        self._conns: dict[str, socket.socket] = {}
        self._lock = threading.Lock()

    def _connect(self, address: str) -> socket.socket:
        host, port = _parse_address(address)
        sock = socket.create_connection((host, port), timeout=self.timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return sock

    def __call__(self, handle: RemoteHandle, frame: bytes) -> bytes:
        return self.request(handle.address, frame)

    def request(self, address: str, frame: bytes) -> bytes:
        with self._lock:
            for attempt in (0, 1):
                sock = self._conns.get(address)
                try:
                    if sock is None:
                        sock = self._connect(address)
                        self._conns[address] = sock
                    sock.sendall(frame)
                    return wire.read_frame(sock)
                except (OSError, EOFError) as exc:
                    self._conns.pop(address, None)
                    if sock is not None:
                        try:
                            sock.close()
                        except OSError:
                            pass
                    if attempt:
                        raise TransportError(f"request to {address} failed: {exc}") from exc

    def close(self) -> None:
        with self._lock:
            for sock in self._conns.values():
                try:
                    sock.close()
                except OSError:
                    pass
            self._conns.clear()


def direct_transport(nodes: Mapping[str, Dataframe]) -> Transport:
    """In-process transport routing frames by node name; used by tests."""

    def request(handle: RemoteHandle, frame: bytes) -> bytes:
        target = nodes.get(handle.address)
        if target is None:
            raise TransportError(f"no node at {handle.address!r}")
        message = wire.decode(frame, target.registry)
        return wire.encode(target.handle_message(message))

    return request
