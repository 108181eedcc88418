"""Wire message schemas and canonical encoding.

One JSON object per line (NDJSON) or per WebSocket text frame. The
pydantic models are the schema of record for both directions; tests
validate every emitted message against them. Inbound traffic is decoded
leniently here (parse + object check only) because the engine owns the
semantic verdicts and their protocol_error wording.

Encoding is canonical (sorted keys, no spaces) so a transcript of the
same run is byte-identical across processes and platforms.
"""

from __future__ import annotations

import json
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# -- client -> server ----------------------------------------------------------


class InsertAfterEdit(_Strict):
    op: Literal["insert_after"]
    anchor: int
    text: str


class RemoveEdit(_Strict):
    op: Literal["remove"]
    id: int


class ReplaceEdit(_Strict):
    op: Literal["replace"]
    id: int
    text: str


WireEdit = Annotated[
    Union[InsertAfterEdit, RemoveEdit, ReplaceEdit], Field(discriminator="op")
]


class FullTextMsg(_Strict):
    type: Literal["full_text"]
    new_version: int
    text: str


class UpdateMsg(_Strict):
    type: Literal["update"]
    old_version: int
    new_version: int
    edits: List[WireEdit]


class PerspectiveMsg(_Strict):
    type: Literal["perspective"]
    version: int
    spans: List[int]


class QueryParams(_Strict):
    depth: int = 8


class QueryMsg(_Strict):
    type: Literal["query"]
    query_id: int
    agent: Literal["hammer"]
    span: int
    params: QueryParams = QueryParams()


class CancelQueryMsg(_Strict):
    type: Literal["cancel_query"]
    query_id: int


class ShutdownMsg(_Strict):
    type: Literal["shutdown"]


ClientMessage = Annotated[
    Union[
        FullTextMsg,
        UpdateMsg,
        PerspectiveMsg,
        QueryMsg,
        CancelQueryMsg,
        ShutdownMsg,
    ],
    Field(discriminator="type"),
]

client_message_adapter: TypeAdapter = TypeAdapter(ClientMessage)


# -- server -> client -----------------------------------------------------------


class SpanInfo(_Strict):
    id: int
    text: str


class AssignedMsg(_Strict):
    type: Literal["assigned"]
    version: int
    spans: List[SpanInfo]


class StatusText(_Strict):
    severity: str
    text: str
    offset: int


class StatusMsg(_Strict):
    type: Literal["status"]
    version: int
    span: int
    state: Literal["pending", "running", "finished", "failed", "cancelled"]
    messages: List[StatusText]


class QueryResultMsg(_Strict):
    type: Literal["query_result"]
    query_id: int
    status: Literal["ok", "failed", "cancelled"]
    suggestion: str


class ProgressMsg(_Strict):
    type: Literal["progress"]
    version: int
    state: Literal["quiescent"]


class ProtocolErrorMsg(_Strict):
    type: Literal["protocol_error"]
    reason: str


ServerMessage = Annotated[
    Union[AssignedMsg, StatusMsg, QueryResultMsg, ProgressMsg, ProtocolErrorMsg],
    Field(discriminator="type"),
]

server_message_adapter: TypeAdapter = TypeAdapter(ServerMessage)


# -- line codec --------------------------------------------------------------------


def encode(message: dict) -> str:
    """Canonical single-line JSON; the golden-transcript byte format."""
    return json.dumps(message, sort_keys=True, separators=(",", ":"))


def decode_client_line(line: str) -> Tuple[Optional[dict], Optional[str]]:
    """Parse one inbound line. Returns (message, None) or (None, reason).

    Only structural hopelessness is rejected here; field-level problems go
    to the engine, which answers with its own protocol_error wording.
    """
    try:
        value = json.loads(line)
    except ValueError:
        return None, "invalid json"
    if not isinstance(value, dict):
        return None, "message must be a json object"
    return value, None
