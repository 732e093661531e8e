"""Framed wire protocol for push/fetch exchanges between dataframes.

A frame is a 4-byte big-endian length prefix followed by a canonical JSON
body: keys sorted, no extra whitespace, ASCII only.  Two semantically equal
messages therefore encode to identical bytes, which the golden-file tests
rely on.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Optional

from .errors import MalformedFrame
from .model import Delta, TypeRegistry, delta_from_canonical, delta_to_canonical

FETCH_REQ = "FETCH_REQ"
FETCH_RESP = "FETCH_RESP"
PUSH_REQ = "PUSH_REQ"
PUSH_RESP = "PUSH_RESP"
_KINDS = (FETCH_REQ, FETCH_RESP, PUSH_REQ, PUSH_RESP)

STATUS_OK = "OK"
STATUS_UNKNOWN_VERSION = "UNKNOWN_VERSION"

MAX_FRAME = 64 * 1024 * 1024


@dataclass(frozen=True)
class TypePayload:
    """Per-type slice of a message: a version span and at most one squashed delta."""

    type_name: str
    start_version: str
    end_version: Optional[str] = None
    delta: Optional[Delta] = None


@dataclass(frozen=True)
class Message:
    kind: str
    sender: str
    payloads: tuple[TypePayload, ...] = ()
    status: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(
            self, "payloads", tuple(sorted(self.payloads, key=lambda p: p.type_name))
        )

    def payload_for(self, type_name: str) -> Optional[TypePayload]:
        for p in self.payloads:
            if p.type_name == type_name:
                return p
        return None


def _payload_to_json(p: TypePayload) -> dict:
    return {
        "type_name": p.type_name,
        "start_version": p.start_version,
        "end_version": p.end_version,
        "delta": None if p.delta is None else delta_to_canonical(p.delta),
    }


def encode(msg: Message) -> bytes:
    body = json.dumps(
        {
            "kind": msg.kind,
            "sender": msg.sender,
            "status": msg.status,
            "payloads": [_payload_to_json(p) for p in msg.payloads],
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
        allow_nan=False,
    ).encode("ascii")
    return struct.pack(">I", len(body)) + body


def decode(frame: bytes, registry: TypeRegistry) -> Message:
    if len(frame) < 4:
        raise MalformedFrame("frame shorter than the length prefix")
    (length,) = struct.unpack(">I", frame[:4])
    body = frame[4:]
    if length != len(body):
        raise MalformedFrame(f"length prefix says {length}, body has {len(body)} bytes")
    return decode_body(body, registry)


def decode_body(body: bytes, registry: TypeRegistry) -> Message:
    try:
        data = json.loads(body.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFrame(f"bad message body: {exc}") from None
    if not isinstance(data, dict):
        raise MalformedFrame("message body is not an object")
    kind = data.get("kind")
    if kind not in _KINDS:
        raise MalformedFrame(f"unknown message kind: {kind!r}")
    sender = data.get("sender")
    if not isinstance(sender, str):
        raise MalformedFrame("missing sender")
    status = data.get("status")
    if status not in (None, STATUS_OK, STATUS_UNKNOWN_VERSION):
        raise MalformedFrame(f"unknown status: {status!r}")
    payloads = []
    raw_payloads = data.get("payloads")
    if not isinstance(raw_payloads, list):
        raise MalformedFrame("missing payloads")
    for raw in raw_payloads:
        try:
            type_name = raw["type_name"]
            start = raw["start_version"]
            end = raw.get("end_version")
            raw_delta = raw.get("delta")
        except (TypeError, KeyError) as exc:
            raise MalformedFrame(f"bad payload: {exc!r}") from None
        if type_name not in registry:
            raise MalformedFrame(f"unregistered type: {type_name!r}")
        if not isinstance(start, str) or not (end is None or isinstance(end, str)):
            raise MalformedFrame("versions must be strings")
        delta = None
        if raw_delta is not None:
            try:
                delta = delta_from_canonical(raw_delta, registry)
            except Exception as exc:
                raise MalformedFrame(f"bad delta for {type_name}: {exc}") from None
        payloads.append(TypePayload(type_name, start, end, delta))
    return Message(kind=kind, sender=sender, payloads=tuple(payloads), status=status)


def read_frame(reader) -> bytes:
    """Read one complete frame from a socket-like object (``recv(n)``)."""
    header = _read_exact(reader, 4)
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME:
        raise MalformedFrame(f"frame of {length} bytes exceeds the limit")
    return header + _read_exact(reader, length)


def _read_exact(reader, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = reader.recv(remaining)
        if not chunk:
            raise EOFError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def parse_got_url(url: str, default_port: int = 8700) -> tuple[str, int]:
    """Parse got://host[:port][/name] into (host, port)."""
    if not url.startswith("got://"):
        raise ValueError(f"not a got:// url: {url!r}")
    rest = url[len("got://"):]
    hostport = rest.split("/", 1)[0]
    if ":" in hostport:
        host, _, port = hostport.partition(":")
        return host, int(port)
    return hostport, default_port
