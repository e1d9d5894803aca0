"""Length-prefixed JSON framing.

Format: 4-byte big-endian length header followed by that many bytes of a
UTF-8 encoded JSON object.
"""

from __future__ import annotations

import json
import re
import struct
from typing import Any, BinaryIO

HEADER = struct.Struct(">I")
MAX_FRAME_SIZE = 16 * 1024 * 1024

OPS = frozenset(
    {
        "REGISTER",
        "REGISTERED",
        "LOOKUP",
        "LOOKUP_REPLY",
        "LIST",
        "LIST_REPLY",
        "CALL",
        "REPLY",
        "SUBSCRIBE",
        "SUBSCRIBED",
        "PUBLISH",
        "EVENT",
        "PING",
        "PONG",
        "ERROR",
        "BYE",
    }
)

_NAME_RE = re.compile(r"[A-Za-z0-9_/]+")
MAX_NAME_BYTES = 128


class FrameError(Exception):
    """Base class for framing failures."""


class EncodingError(FrameError):
    pass


class IncompleteFrameError(FrameError):
    """The stream ended before a whole frame was read.

    ``received == 0`` means the stream ended cleanly on a frame boundary.
    """

    def __init__(self, received: int, expected: int):
        self.received = received
        self.expected = expected
        super().__init__(f"incomplete frame: got {received} of {expected} bytes")


class ProtocolError(FrameError):
    """The peer sent bytes that are not a valid frame; close the connection."""


def valid_name(name: Any) -> bool:
    return (
        isinstance(name, str)
        and _NAME_RE.fullmatch(name) is not None
        and len(name.encode("utf-8")) <= MAX_NAME_BYTES
    )


def encode_frame(body: dict, max_size: int = MAX_FRAME_SIZE) -> bytes:
    if not isinstance(body, dict):
        raise EncodingError(f"frame body must be a JSON object, got {type(body).__name__}")
    try:
        raw = json.dumps(body, separators=(",", ":"), ensure_ascii=False, allow_nan=False).encode(
            "utf-8"
        )
    except (TypeError, ValueError) as exc:
        raise EncodingError(str(exc)) from exc
    if len(raw) > max_size:
        raise EncodingError(f"frame body of {len(raw)} bytes exceeds limit of {max_size}")
    return HEADER.pack(len(raw)) + raw


def _read_exact(stream: BinaryIO, n: int, already: int, expected: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise IncompleteFrameError(already + len(buf), expected)
        buf += chunk
    return bytes(buf)


def decode_body(raw: bytes) -> dict:
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ProtocolError(f"malformed frame body: {exc}") from exc
    if not isinstance(body, dict):
        raise ProtocolError("frame body is not a JSON object")
    return body


def decode_frame(stream: BinaryIO, max_size: int = MAX_FRAME_SIZE) -> dict:
    header = _read_exact(stream, HEADER.size, 0, HEADER.size)
    (length,) = HEADER.unpack(header)
    if length > max_size:
        raise ProtocolError(f"declared frame length {length} exceeds limit of {max_size}")
    raw = _read_exact(stream, length, HEADER.size, HEADER.size + length)
    return decode_body(raw)
