import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daychain.protocol import (
    McpEnvelope,
    ProtocolError,
    Session,
    Status,
    ToolError,
    ToolRegistry,
    ToolService,
    acknowledge_action,
    decode_message,
    dispatch,
    encode_message,
    session_append,
)


class EchoTool(ToolService):
    name = "echo"

    def handle(self, payload, session):
        return {"echo": payload}


class BoomTool(ToolService):
    name = "boom"

    def handle(self, payload, session):
        raise ToolError("boom_code", "it broke")


def make_query(n=1, tool="echo", payload=None, session_id="s1"):
    return McpEnvelope(
        id=f"q{n}", session_id=session_id, kind="query", tool=tool, payload=payload or {}, timestamp=1.5
    )


def test_minimal_query_encoding_contains_kind():
    env = McpEnvelope(id="a", session_id="s", kind="query", tool="temporal", payload={})
    text = encode_message(env).decode()
    assert '"kind":"query"' in text
    assert '"tool":"temporal"' in text


def test_encoding_is_canonical_and_deterministic():
    env = make_query(payload={"b": 1, "a": [1.5, "x"], "c": {"z": True, "y": None}})
    one = encode_message(env)
    two = encode_message(env)
    assert one == two
    assert b" " not in one.replace(b'"x"', b"")  # no insignificant whitespace
    doc = json.loads(one)
    assert list(doc) == sorted(doc)


def test_missing_ref_id_on_response_rejected():
    env = McpEnvelope(id="r1", session_id="s", kind="response", tool="echo", status=Status.okay())
    with pytest.raises(ProtocolError) as err:
        encode_message(env)
    assert err.value.code == "missing-ref-id"


def test_ref_id_rule_across_all_four_kinds():
    # Enumerate the kinds against the ref-id rule: only response/feedback
    # require a reference.
    for kind in ("query", "action"):
        encode_message(McpEnvelope(id="x", session_id="s", kind=kind, tool="t"))
    for kind in ("response", "feedback"):
        tool = "t" if kind == "response" else None
        with pytest.raises(ProtocolError):
            encode_message(McpEnvelope(id="x", session_id="s", kind=kind, tool=tool))
        encode_message(McpEnvelope(id="x", session_id="s", kind=kind, tool=tool, ref_id="q0"))


def test_invalid_kind_rejected():
    with pytest.raises(ProtocolError) as err:
        encode_message(McpEnvelope(id="x", session_id="s", kind="telemetry"))
    assert err.value.code == "invalid-kind"


def test_decode_unknown_kind():
    with pytest.raises(ProtocolError) as err:
        decode_message(b'{"id":"a","session_id":"s","kind":"telemetry"}')
    assert err.value.code == "unknown-kind"


def test_decode_truncations_fail_cleanly_with_offset():
    data = encode_message(make_query(payload={"x": [1, 2, 3], "y": "text"}))
    for cut in range(1, len(data)):
        truncated = data[:cut]
        try:
            decode_message(truncated)
        except ProtocolError as exc:
            assert exc.code in ("malformed-json", "schema-violation", "unknown-kind")
            if exc.code == "malformed-json":
                assert exc.offset is not None and 0 <= exc.offset <= cut
        else:
            # A truncation may still parse as a shorter valid document only
            # if it is valid JSON; it must then fail schema checks above.
            pytest.fail(f"truncation at {cut} decoded successfully")


def test_payload_size_limit(monkeypatch):
    monkeypatch.setenv("DAYCHAIN_MAX_PAYLOAD_BYTES", "64")
    big = encode_message(make_query(payload={"blob": "x" * 200}))
    with pytest.raises(ProtocolError) as err:
        decode_message(big)
    assert err.value.code == "schema-violation"


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-1000, 1000) | st.floats(allow_nan=False, allow_infinity=False, width=32) | st.text(max_size=8),
    lambda children: st.lists(children, max_size=3) | st.dictionaries(st.text(max_size=6), children, max_size=3),
    max_leaves=8,
)

envelopes = st.builds(
    McpEnvelope,
    id=st.text(min_size=1, max_size=12),
    session_id=st.text(min_size=1, max_size=8),
    kind=st.just("query"),
    tool=st.text(min_size=1, max_size=8),
    ref_id=st.none() | st.text(min_size=1, max_size=8),
    payload=st.dictionaries(st.text(max_size=6), json_values, max_size=4),
    timestamp=st.floats(0, 2e9, allow_nan=False),
    metadata=st.dictionaries(st.text(max_size=6), st.text(max_size=8), max_size=3),
)


@given(envelopes)
@settings(max_examples=150, deadline=None)
def test_roundtrip_identity(env):
    assert decode_message(encode_message(env)) == env


@given(envelopes, envelopes)
@settings(max_examples=150, deadline=None)
def test_canonical_encoding_injective(a, b):
    if encode_message(a) == encode_message(b):
        assert a == b


def test_session_append_and_duplicates():
    s = Session("s1")
    session_append(s, make_query(1))
    assert len(s) == 1
    with pytest.raises(ProtocolError) as err:
        session_append(s, make_query(1))
    assert err.value.code == "duplicate-id"
    with pytest.raises(ProtocolError) as err:
        session_append(s, make_query(2, session_id="other"))
    assert err.value.code == "session-mismatch"


def test_session_log_order_preserved():
    s = Session("s1")
    for i in range(1000):
        session_append(s, make_query(i))
    assert [env.id for env in s.log] == [f"q{i}" for i in range(1000)]


def test_dispatch_appends_query_and_response():
    s = Session("s1")
    registry = ToolRegistry([EchoTool()])
    resp = dispatch(s, make_query(payload={"hello": 1}), registry)
    assert resp.kind == "response"
    assert resp.ref_id == "q1"
    assert resp.status.ok
    assert resp.payload == {"echo": {"hello": 1}}
    assert len(s) == 2
    # exactly one response referencing the query
    refs = [e for e in s.log if e.kind == "response" and e.ref_id == "q1"]
    assert len(refs) == 1


def test_dispatch_unknown_tool_is_error_status_not_exception():
    s = Session("s1")
    resp = dispatch(s, make_query(tool="nonexistent"), ToolRegistry([EchoTool()]))
    assert not resp.status.ok
    assert resp.status.code == "unknown_tool"


def test_dispatch_tool_error_becomes_status():
    s = Session("s1")
    resp = dispatch(s, make_query(tool="boom"), ToolRegistry([BoomTool()]))
    assert not resp.status.ok
    assert resp.status.code == "boom_code"


def test_dispatch_rejects_non_query():
    s = Session("s1")
    action = McpEnvelope(id="a1", session_id="s1", kind="action", tool="echo")
    with pytest.raises(ProtocolError) as err:
        dispatch(s, action, ToolRegistry([EchoTool()]))
    assert err.value.code == "wrong-kind"


def test_action_feedback_cycle():
    s = Session("s1")
    action = McpEnvelope(id="a1", session_id="s1", kind="action", tool="echo", payload={"set": 1})
    fb = acknowledge_action(s, action, ToolRegistry([EchoTool()]))
    assert fb.kind == "feedback"
    assert fb.ref_id == "a1"
    assert fb.tool is None
    assert fb.status.ok


def test_dispatch_replay_determinism():
    def run():
        s = Session("s1")
        registry = ToolRegistry([EchoTool()])
        out = []
        for i in range(5):
            out.append(encode_message(dispatch(s, make_query(i, payload={"i": i}), registry)))
        return out

    assert run() == run()
