"""Structured message envelopes, sessions, and tool dispatch.

Four message kinds (query, response, action, feedback) travel as canonical
JSON: sorted keys, no insignificant whitespace, plain integer formatting.
Identical envelopes therefore encode to identical bytes, and golden files
stay stable. Dispatch routes query envelopes to registered tool services
and appends both sides of the exchange to the session log.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

KINDS = ("query", "response", "action", "feedback")
DEFAULT_MAX_PAYLOAD = 1 << 20
MAX_PAYLOAD_ENV = "DAYCHAIN_MAX_PAYLOAD_BYTES"


class ProtocolError(Exception):
    """Protocol failure with a stable machine-readable code."""

    def __init__(self, code: str, message: str, offset: Optional[int] = None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.offset = offset


class ToolError(Exception):
    """Raised by tool services; surfaces as an Error status, not a transport failure."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.detail = message


@dataclass(frozen=True)
class Status:
    ok: bool
    code: Optional[str] = None
    message: Optional[str] = None

    @classmethod
    def okay(cls) -> "Status":
        return cls(ok=True)

    @classmethod
    def error(cls, code: str, message: str = "") -> "Status":
        return cls(ok=False, code=code, message=message)


@dataclass(frozen=True)
class McpEnvelope:
    """Wire-level message. Immutable after construction; safe to share."""

    id: str
    session_id: str
    kind: str
    ref_id: Optional[str] = None
    tool: Optional[str] = None
    payload: dict = field(default_factory=dict)
    status: Optional[Status] = None
    timestamp: float = 0.0
    metadata: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ProtocolError("invalid-kind", f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind in ("response", "feedback") and not self.ref_id:
            raise ProtocolError("missing-ref-id", f"{self.kind} envelopes must reference a message")
        if self.kind in ("query", "action") and not self.tool:
            raise ProtocolError("schema-violation", f"{self.kind} envelopes must name a tool")
        if self.kind == "feedback" and self.tool is not None:
            raise ProtocolError("schema-violation", "feedback envelopes carry no tool field")
        if self.status is not None and self.kind not in ("response", "feedback"):
            raise ProtocolError("schema-violation", "status is only valid on response/feedback")
        if not isinstance(self.payload, dict) or not isinstance(self.metadata, dict):
            raise ProtocolError("schema-violation", "payload and metadata must be objects")


def max_payload_bytes() -> int:
    raw = os.environ.get(MAX_PAYLOAD_ENV)
    if raw is None:
        return DEFAULT_MAX_PAYLOAD
    try:
        return int(raw)
    except ValueError:
        return DEFAULT_MAX_PAYLOAD


def canonical_json(obj) -> str:
    """Canonical JSON text: sorted keys, compact separators, no NaN."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def encode_message(env: McpEnvelope) -> bytes:
    """Serialize a valid envelope to canonical JSON bytes (UTF-8)."""
    env.validate()
    doc = {
        "id": env.id,
        "session_id": env.session_id,
        "ref_id": env.ref_id,
        "kind": env.kind,
        "tool": env.tool,
        "payload": env.payload,
        "status": None
        if env.status is None
        else {"ok": env.status.ok, "code": env.status.code, "message": env.status.message},
        "timestamp": env.timestamp,
        "metadata": env.metadata,
    }
    return canonical_json(doc).encode("utf-8")


_REQUIRED_FIELDS = {"id", "session_id", "ref_id", "kind", "tool", "payload", "status", "timestamp", "metadata"}


def decode_message(data: bytes | str) -> McpEnvelope:
    """Parse canonical JSON bytes back into an envelope.

    Raises ProtocolError with code malformed-json (carrying a byte offset),
    unknown-kind, or schema-violation.
    """
    if isinstance(data, bytes):
        if len(data) > max_payload_bytes():
            raise ProtocolError("schema-violation", f"payload exceeds {max_payload_bytes()} bytes")
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError("malformed-json", "input is not UTF-8", offset=exc.start) from exc
    else:
        text = data
        if len(text.encode("utf-8")) > max_payload_bytes():
            raise ProtocolError("schema-violation", f"payload exceeds {max_payload_bytes()} bytes")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError("malformed-json", exc.msg, offset=exc.pos) from exc
    if not isinstance(doc, dict):
        raise ProtocolError("schema-violation", "top-level value must be an object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ProtocolError("unknown-kind", f"unknown kind {kind!r}")
    unknown = set(doc) - _REQUIRED_FIELDS
    if unknown:
        raise ProtocolError("schema-violation", f"unexpected fields: {sorted(unknown)}")
    missing = {"id", "session_id", "kind"} - set(doc)
    if missing:
        raise ProtocolError("schema-violation", f"missing fields: {sorted(missing)}")
    raw_status = doc.get("status")
    status = None
    if raw_status is not None:
        if not isinstance(raw_status, dict) or "ok" not in raw_status:
            raise ProtocolError("schema-violation", "status must be an object with 'ok'")
        status = Status(ok=bool(raw_status["ok"]), code=raw_status.get("code"), message=raw_status.get("message"))
    env = McpEnvelope(
        id=str(doc["id"]),
        session_id=str(doc["session_id"]),
        ref_id=doc.get("ref_id"),
        kind=kind,
        tool=doc.get("tool"),
        payload=doc.get("payload") or {},
        status=status,
        timestamp=float(doc.get("timestamp", 0.0)),
        metadata=doc.get("metadata") or {},
    )
    try:
        env.validate()
    except ProtocolError:
        raise
    return env


class Session:
    """Append-only message log with per-session context. Single writer."""

    def __init__(self, session_id: str):
        self.session_id = session_id
        self.log: list[McpEnvelope] = []
        self.context: dict = {}
        self._ids: set[str] = set()

    def __len__(self) -> int:
        return len(self.log)

    def has_message(self, message_id: str) -> bool:
        return message_id in self._ids

    def append(self, env: McpEnvelope) -> "Session":
        if env.session_id != self.session_id:
            raise ProtocolError(
                "session-mismatch", f"envelope session {env.session_id!r} != {self.session_id!r}"
            )
        if env.id in self._ids:
            raise ProtocolError("duplicate-id", f"message id {env.id!r} already logged")
        env.validate()
        if env.ref_id is not None and env.ref_id not in self._ids:
            raise ProtocolError("missing-ref-id", f"ref_id {env.ref_id!r} not found in session")
        self.log.append(env)
        self._ids.add(env.id)
        return self


def session_append(session: Session, env: McpEnvelope) -> Session:
    """Functional alias for Session.append."""
    return session.append(env)


class ToolService:
    """Base class for tool services reachable through dispatch.

    Subclasses set ``name`` and implement ``handle``; they must be safe for
    concurrent use by many sessions (the built-in services are read-only or
    keyed by persona).
    """

    name = "tool"

    def handle(self, payload: dict, session: Session) -> dict:
        raise NotImplementedError


class ToolRegistry:
    """Name -> service map used by dispatch."""

    def __init__(self, services: Optional[list[ToolService]] = None):
        self._services: dict[str, ToolService] = {}
        for svc in services or []:
            self.register(svc)

    def register(self, service: ToolService) -> None:
        self._services[service.name] = service

    def get(self, name: str) -> Optional[ToolService]:
        return self._services.get(name)

    def names(self) -> list[str]:
        return sorted(self._services)


def dispatch(
    session: Session,
    query: McpEnvelope,
    registry: ToolRegistry,
    clock: Optional[Callable[[], float]] = None,
) -> McpEnvelope:
    """Route a query envelope to its tool service and log the exchange.

    Unknown tools and tool-internal failures come back as Error-status
    responses; only protocol misuse (wrong kind, bad session) raises.
    """
    if query.kind != "query":
        raise ProtocolError("wrong-kind", f"dispatch requires a query envelope, got {query.kind!r}")
    session.append(query)
    now = clock() if clock is not None else query.timestamp
    service = registry.get(query.tool or "")
    if service is None:
        status = Status.error("unknown_tool", f"no tool service named {query.tool!r}")
        result: dict = {}
    else:
        try:
            result = service.handle(query.payload, session)
            status = Status.okay()
        except ToolError as exc:
            status, result = Status.error(exc.code, exc.detail), {}
        except Exception as exc:  # tool bugs surface as status, not transport failure
            status, result = Status.error("tool_failure", str(exc)), {}
    response = McpEnvelope(
        id=f"{query.id}:r",
        session_id=session.session_id,
        ref_id=query.id,
        kind="response",
        tool=query.tool,
        payload=result,
        status=status,
        timestamp=now,
    )
    session.append(response)
    return response


def acknowledge_action(
    session: Session,
    action: McpEnvelope,
    registry: ToolRegistry,
    clock: Optional[Callable[[], float]] = None,
) -> McpEnvelope:
    """Execute an action envelope and reply with synchronous feedback.

    Feedback is modeled as the synchronous reply carrying the operation's
    execution result.
    """
    if action.kind != "action":
        raise ProtocolError("wrong-kind", f"expected an action envelope, got {action.kind!r}")
    session.append(action)
    now = clock() if clock is not None else action.timestamp
    service = registry.get(action.tool or "")
    if service is None:
        status, result = Status.error("unknown_tool", f"no tool service named {action.tool!r}"), {}
    else:
        try:
            result = service.handle(action.payload, session)
            status = Status.okay()
        except ToolError as exc:
            status, result = Status.error(exc.code, exc.detail), {}
        except Exception as exc:
            status, result = Status.error("tool_failure", str(exc)), {}
    feedback = McpEnvelope(
        id=f"{action.id}:f",
        session_id=session.session_id,
        ref_id=action.id,
        kind="feedback",
        payload=result,
        status=status,
        timestamp=now,
    )
    session.append(feedback)
    return feedback
