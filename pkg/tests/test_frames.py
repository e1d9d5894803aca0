import io
import json
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlharness.busline.frames import (
    MAX_FRAME_SIZE,
    EncodingError,
    IncompleteFrameError,
    ProtocolError,
    decode_frame,
    encode_frame,
    valid_name,
)

json_scalars = st.none() | st.booleans() | st.integers(-(2**53), 2**53) | st.floats(
    allow_nan=False, allow_infinity=False
) | st.text(max_size=20)
json_values = st.recursive(
    json_scalars,
    lambda inner: st.lists(inner, max_size=5) | st.dictionaries(st.text(max_size=8), inner, max_size=5),
    max_leaves=20,
)
json_objects = st.dictionaries(st.text(max_size=10), json_values, max_size=8)


def test_ping_frame_bytes():
    assert encode_frame({"op": "PING"}) == b"\x00\x00\x00\x0d" + b'{"op":"PING"}'


def test_empty_object_frame():
    assert encode_frame({}) == b"\x00\x00\x00\x02{}"


def test_oversize_body_rejected_at_limit():
    limit = 2**24
    # {"a":"..."} has 8 bytes of overhead
    body = {"a": "x" * (limit + 1 - 8)}
    assert len(json.dumps(body, separators=(",", ":"))) == limit + 1
    with pytest.raises(EncodingError):
        encode_frame(body, max_size=limit)
    ok = {"a": "x" * (limit - 8)}
    assert len(encode_frame(ok, max_size=limit)) == limit + 4


def test_default_limit_is_16_mib():
    assert MAX_FRAME_SIZE == 16 * 1024 * 1024


@settings(max_examples=1000, deadline=None)
@given(json_objects)
def test_round_trip_identity(body):
    assert decode_frame(io.BytesIO(encode_frame(body))) == body


def test_back_to_back_frames_decode_in_order():
    stream = io.BytesIO(b"".join(encode_frame({"op": "EVENT", "seq": i}) for i in range(50)))
    assert [decode_frame(stream)["seq"] for _ in range(50)] == list(range(50))
    with pytest.raises(IncompleteFrameError) as err:
        decode_frame(stream)
    assert err.value.received == 0


def test_three_byte_stream_is_incomplete():
    with pytest.raises(IncompleteFrameError) as err:
        decode_frame(io.BytesIO(b"\x00\x00\x00"))
    assert err.value.received == 3


def test_truncated_body_is_incomplete():
    data = encode_frame({"op": "PING"})[:-2]
    with pytest.raises(IncompleteFrameError):
        decode_frame(io.BytesIO(data))


def test_malformed_json_is_protocol_error():
    with pytest.raises(ProtocolError):
        decode_frame(io.BytesIO(struct.pack(">I", 5) + b'{"op"'))


def test_invalid_utf8_is_protocol_error():
    with pytest.raises(ProtocolError):
        decode_frame(io.BytesIO(struct.pack(">I", 2) + b"\xff\xfe"))


def test_non_object_body_is_protocol_error():
    with pytest.raises(ProtocolError):
        decode_frame(io.BytesIO(struct.pack(">I", 2) + b"[]"))


def test_declared_oversize_length_is_protocol_error():
    with pytest.raises(ProtocolError):
        decode_frame(io.BytesIO(struct.pack(">I", 2**31)), max_size=1024)


def test_unencodable_values_rejected():
    with pytest.raises(EncodingError):
        encode_frame({"x": float("nan")})
    with pytest.raises(EncodingError):
        encode_frame({"x": object()})
    with pytest.raises(EncodingError):
        encode_frame(["not", "an", "object"])


@pytest.mark.parametrize("name,ok", [
    ("supervisor", True),
    ("robotino_0", True),
    ("ns/robot", True),
    ("", False),
    ("has space", False),
    ("dash-name", False),
    ("x" * 128, True),
    ("x" * 129, False),
    (42, False),
])
def test_node_name_charset(name, ok):
    assert valid_name(name) is ok
