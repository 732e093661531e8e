import random
import struct
from pathlib import Path

import pytest

from objsync.errors import MalformedFrame
from objsync.model import Delta, ObjectDelta, ObjectId
from objsync import wire
from objsync.workload import game_registry

from conftest import random_delta

GOLDEN = Path(__file__).parent / "golden"

V1 = "a3f2" + "0" * 28
V2 = "b7c1" + "0" * 28


def golden_messages():
    ship = ObjectId("Ship", 7)
    delta = Delta({ship: ObjectDelta("mod", {"velocity": -75.0, "y": 412.5})})
    full = Delta(
        {
            ship: ObjectDelta(
                "new",
                {
                    "oid": 7,
                    "player_id": "bot0",
                    "x": 100.0,
                    "y": 800.0,
                    "trips": 0,
                    "velocity": -60.0,
                    "state": 1,
                },
            )
        }
    )
    return {
        "push_req.bin": wire.Message(
            kind=wire.PUSH_REQ,
            sender="bot0",
            payloads=(wire.TypePayload("Ship", V1, V2, delta),),
        ),
        "push_resp.bin": wire.Message(
            kind=wire.PUSH_RESP,
            sender="physics",
            status=wire.STATUS_OK,
            payloads=(wire.TypePayload("Ship", V1, V2),),
        ),
        "fetch_req.bin": wire.Message(
            kind=wire.FETCH_REQ,
            sender="viewer0",
            payloads=(wire.TypePayload("Asteroid", "0" * 32), wire.TypePayload("Ship", V1)),
        ),
        "fetch_resp.bin": wire.Message(
            kind=wire.FETCH_RESP,
            sender="physics",
            status=wire.STATUS_OK,
            payloads=(wire.TypePayload("Ship", V1, V2, full),),
        ),
    }


def random_message(rng, registry):
    kind = rng.choice([wire.FETCH_REQ, wire.FETCH_RESP, wire.PUSH_REQ, wire.PUSH_RESP])
    payloads = []
    for type_name in rng.sample(["Thing", "Pair"], rng.randint(0, 2)):
        start = f"{rng.getrandbits(128):032x}"
        if kind == wire.FETCH_REQ:
            payloads.append(wire.TypePayload(type_name, start))
        else:
            end = f"{rng.getrandbits(128):032x}"
            delta = random_delta(rng) if kind in (wire.PUSH_REQ, wire.FETCH_RESP) else None
            payloads.append(wire.TypePayload(type_name, start, end, delta))
    status = None
    if kind in (wire.FETCH_RESP, wire.PUSH_RESP):
        status = rng.choice([wire.STATUS_OK, wire.STATUS_UNKNOWN_VERSION])
    return wire.Message(
        kind=kind, sender=rng.choice(["a", "b", "c"]), payloads=tuple(payloads), status=status
    )


def test_encode_decode_round_trip_random(registry):
    rng = random.Random(51)
    for _ in range(300):
        msg = random_message(rng, registry)
        assert wire.decode(wire.encode(msg), registry) == msg


def test_equal_messages_encode_identically():
    reg = game_registry()
    ship = ObjectId("Ship", 7)
    asteroid = ObjectId("Asteroid", 3)
    d = Delta(
        {
            ship: ObjectDelta("mod", {"y": 1.0, "x": 2.0}),
            asteroid: ObjectDelta("mod", {"x": 5.0}),
        }
    )
    d_shuffled = Delta(
        {
            asteroid: ObjectDelta("mod", {"x": 5.0}),
            ship: ObjectDelta("mod", {"x": 2.0, "y": 1.0}),
        }
    )
    m1 = wire.Message(
        wire.PUSH_REQ,
        "n",
        payloads=(
            wire.TypePayload("Ship", V1, V2, d),
            wire.TypePayload("Asteroid", V1, V2, d),
        ),
    )
    m2 = wire.Message(
        wire.PUSH_REQ,
        "n",
        payloads=(
            wire.TypePayload("Asteroid", V1, V2, d_shuffled),
            wire.TypePayload("Ship", V1, V2, d_shuffled),
        ),
    )
    assert wire.encode(m1) == wire.encode(m2)


def test_golden_frames_byte_exact():
    reg = game_registry()
    for name, msg in golden_messages().items():
        frozen = (GOLDEN / name).read_bytes()
        assert wire.encode(msg) == frozen, f"{name} drifted from the frozen bytes"
        assert wire.decode(frozen, reg) == msg


def test_frame_has_length_prefix():
    msg = wire.Message(wire.FETCH_REQ, "n")
    frame = wire.encode(msg)
    (length,) = struct.unpack(">I", frame[:4])
    assert length == len(frame) - 4


def test_truncated_frame_rejected(registry):
    frame = wire.encode(wire.Message(wire.FETCH_REQ, "n"))
    with pytest.raises(MalformedFrame):
        wire.decode(frame[:-3], registry)
    with pytest.raises(MalformedFrame):
        wire.decode(frame[:2], registry)


def test_unknown_kind_rejected(registry):
    body = b'{"kind":"NOPE","payloads":[],"sender":"x","status":null}'
    with pytest.raises(MalformedFrame):
        wire.decode(struct.pack(">I", len(body)) + body, registry)


def test_unregistered_type_rejected(registry):
    body = (
        b'{"kind":"FETCH_REQ","payloads":[{"delta":null,"end_version":null,'
        b'"start_version":"00","type_name":"Ghost"}],"sender":"x","status":null}'
    )
    with pytest.raises(MalformedFrame):
        wire.decode(struct.pack(">I", len(body)) + body, registry)


def test_bad_json_rejected(registry):
    body = b"{nope"
    with pytest.raises(MalformedFrame):
        wire.decode(struct.pack(">I", len(body)) + body, registry)


def test_read_frame_rejects_oversize_claim():
    class FakeSock:
        def __init__(self, data):
            self.data = data

        def recv(self, n):
            out, self.data = self.data[:n], self.data[n:]
            return out

    huge = struct.pack(">I", wire.MAX_FRAME + 1)
    with pytest.raises(MalformedFrame):
        wire.read_frame(FakeSock(huge))


def test_got_url_parsing():
    assert wire.parse_got_url("got://host.example:9000/race") == ("host.example", 9000)
    assert wire.parse_got_url("got://host.example/race") == ("host.example", 8700)
    assert wire.parse_got_url("got://10.0.0.1:81") == ("10.0.0.1", 81)
    with pytest.raises(ValueError):
        wire.parse_got_url("http://nope")
