from .messages import (
    client_message_adapter,
    decode_client_line,
    encode,
    server_message_adapter,
)
from .transports import EngineHub, ndjson_session, serve_stdio, serve_tcp
from .app import create_app, find_frontend_dist

__all__ = [
    "client_message_adapter",
    "create_app",
    "decode_client_line",
    "encode",
    "EngineHub",
    "find_frontend_dist",
    "ndjson_session",
    "server_message_adapter",
    "serve_stdio",
    "serve_tcp",
]
