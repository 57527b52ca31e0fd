"""Service mode: newline-delimited canonical-JSON envelopes over stdio/TCP.

Each input line is one envelope. Queries are dispatched to the tool
registry inside the session named by the envelope; actions receive
synchronous feedback. Lines that fail to decode are answered with an
error-status response envelope on a transport session (the input id is
unknown, so the reply references "unknown").
"""

from __future__ import annotations

import socketserver
import sys
from typing import Optional

from daychain.protocol import (
    McpEnvelope,
    ProtocolError,
    Session,
    Status,
    ToolRegistry,
    acknowledge_action,
    decode_message,
    dispatch,
    encode_message,
)


class EnvelopeServer:
    """Line-oriented envelope handler shared by stdio and TCP frontends."""

    def __init__(self, registry: ToolRegistry):
        self.registry = registry
        self.sessions: dict[str, Session] = {}
        self._err_n = 0

    def session_for(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            self.sessions[session_id] = Session(session_id)
        return self.sessions[session_id]

    def _error_reply(self, code: str, message: str, ref_id: str = "unknown", session_id: str = "transport") -> bytes:
        self._err_n += 1
        reply = McpEnvelope(
            id=f"transport:e{self._err_n:05d}",
            session_id=session_id,
            ref_id=ref_id or "unknown",
            kind="response",
            payload={},
            status=Status.error(code, message),
        )
        return encode_message(reply)

    def handle_line(self, line: bytes) -> bytes:
        line = line.strip()
        if not line:
            return b""
        try:
            env = decode_message(line)
        except ProtocolError as exc:
            return self._error_reply(exc.code, str(exc))
        session = self.session_for(env.session_id)
        try:
            if env.kind == "query":
                reply = dispatch(session, env, self.registry)
            elif env.kind == "action":
                reply = acknowledge_action(session, env, self.registry)
            else:
                return self._error_reply("wrong-kind", f"cannot serve {env.kind} envelopes", env.id, env.session_id)
        except ProtocolError as exc:
            return self._error_reply(exc.code, str(exc), env.id, env.session_id)
        return encode_message(reply)


def serve_stdio(registry: ToolRegistry, stdin=None, stdout=None) -> None:
    server = EnvelopeServer(registry)
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    for line in stdin:
        reply = server.handle_line(line)
        if reply:
            stdout.write(reply + b"\n")
            stdout.flush()


class _TCPHandler(socketserver.StreamRequestHandler):
    def handle(self):
        server: EnvelopeServer = self.server.envelope_server  # type: ignore[attr-defined]
        for line in self.rfile:
            reply = server.handle_line(line)
            if reply:
                self.wfile.write(reply + b"\n")
                self.wfile.flush()


class TcpEnvelopeServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr: tuple, registry: ToolRegistry):
        super().__init__(addr, _TCPHandler)
        self.envelope_server = EnvelopeServer(registry)


def serve(registry: ToolRegistry, listen: str) -> Optional[TcpEnvelopeServer]:
    """`listen` is "stdio" or "host:port". TCP mode returns the server."""
    if listen == "stdio" or listen == "-":
        serve_stdio(registry)
        return None
    host, _, port = listen.rpartition(":")
    server = TcpEnvelopeServer((host or "127.0.0.1", int(port)), registry)
    server.serve_forever()
    return server
