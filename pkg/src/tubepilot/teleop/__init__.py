from .protocol import (PROTOCOL_VERSION, ProtocolError, encode,
                       parse_client_message)
from .session import Session, png_b64
from .server import BridgeServer

__all__ = [
    "BridgeServer", "PROTOCOL_VERSION", "ProtocolError", "Session",
    "encode", "parse_client_message", "png_b64",
]
