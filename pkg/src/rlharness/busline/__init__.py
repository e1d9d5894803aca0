"""Broker-based node network: framing, broker, and client endpoint."""

from .broker import DEFAULT_LIVENESS_SECS, Broker, parse_address
from .client import BusClient, Subscription
from .frames import (
    MAX_FRAME_SIZE,
    EncodingError,
    FrameError,
    IncompleteFrameError,
    ProtocolError,
    decode_frame,
    encode_frame,
    valid_name,
)

__all__ = [
    "Broker",
    "BusClient",
    "Subscription",
    "parse_address",
    "encode_frame",
    "decode_frame",
    "valid_name",
    "FrameError",
    "EncodingError",
    "IncompleteFrameError",
    "ProtocolError",
    "MAX_FRAME_SIZE",
    "DEFAULT_LIVENESS_SECS",
]
