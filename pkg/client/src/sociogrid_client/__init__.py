"""Client SDK for the sociogrid episode server (wire protocol only)."""

from .client import (
    PROTOCOL_VERSION,
    ClientError,
    ClientObservation,
    HandshakeError,
    IllegalActionError,
    SeatRefusedError,
    Session,
    SessionOver,
    StepResult,
    VersionMismatchError,
    WireError,
    connect,
    default_action,
    template_of,
)

__all__ = [
    "PROTOCOL_VERSION",
    "ClientError",
    "ClientObservation",
    "HandshakeError",
    "IllegalActionError",
    "SeatRefusedError",
    "Session",
    "SessionOver",
    "StepResult",
    "VersionMismatchError",
    "WireError",
    "connect",
    "default_action",
    "template_of",
]
