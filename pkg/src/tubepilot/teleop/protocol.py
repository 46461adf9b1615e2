"""Wire protocol for the teleoperation bridge.

Text-framed JSON over a websocket. Every message is an object with a
"type" tag and a "seq" number; sequence numbers increase monotonically
in each direction independently, with the server side dense (no gaps).
Schema changes bump PROTOCOL_VERSION.

Client -> server:
    {"type": "control", "seq": n, "dx": f, "dz": f, "dtheta": f}
    {"type": "record",  "seq": n, "cmd": "start|stop|save|discard"[, "seed": i]}
    {"type": "reset",   "seq": n[, "seed": i]}

Server -> client:
    {"type": "hello",   "seq": n, "protocol", "session", "seed", "dt",
                        "filter": {...}, "limits": {...}, "time_limit"}
    {"type": "state",   "seq": n, "tick", "t", "pose", "forces",
                        "frame": <png b64>, "side": <png b64>,
                        "outcome": {"status", "reason"}, "recording"}
    {"type": "verdict", "seq": n, "mode", "accept", "reasons": [...]}
    {"type": "saved",   "seq": n, "path"}
    {"type": "error",   "seq": n, "message"}
"""
import json
import math

PROTOCOL_VERSION = 1
RECORD_CMDS = ("start", "stop", "save", "discard")


class ProtocolError(ValueError):
    """Malformed client message; the session survives it."""


def _require(cond: bool, msg: str):
    if not cond:
        raise ProtocolError(msg)


def _int_field(msg, key, minimum=None):
    v = msg.get(key)
    _require(isinstance(v, int) and not isinstance(v, bool),
             f"{key} must be an integer")
    if minimum is not None:
        _require(v >= minimum, f"{key} must be >= {minimum}")
    return v


def parse_client_message(text) -> dict:
    try:
        msg = json.loads(text)
    except (TypeError, ValueError):
        raise ProtocolError("message is not valid JSON")
    _require(isinstance(msg, dict), "message must be a JSON object")
    kind = msg.get("type")
    _require(kind in ("control", "record", "reset"),
             f"unknown message type {kind!r}")
    _int_field(msg, "seq", minimum=0)
    if kind == "control":
        for key in ("dx", "dz", "dtheta"):
            v = msg.get(key)
            _require(isinstance(v, (int, float)) and not isinstance(v, bool)
                     and math.isfinite(v), f"{key} must be a finite number")
    elif kind == "record":
        _require(msg.get("cmd") in RECORD_CMDS,
                 f"record cmd must be one of {RECORD_CMDS}")
        if "seed" in msg:
            _int_field(msg, "seed", minimum=0)
    else:
        if "seed" in msg:
            _int_field(msg, "seed", minimum=0)
    return msg


def encode(msg: dict) -> str:
    return json.dumps(msg, separators=(",", ":"))
