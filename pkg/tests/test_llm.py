from __future__ import annotations

import json

import pytest

from kgqa.errors import EndpointError, ReplyParseError, TemplateError
from kgqa.llm import (
    ChatEndpoint,
    EndpointConfig,
    RecordingEndpoint,
    RemoteScorer,
    ReplayEndpoint,
    TEMPLATE_SLOTS,
    load_template,
    parse_entity_score,
    parse_tagged_scores,
    prompt_digest,
    render_prompt,
    template_placeholders,
)
from kgqa.model import Plan, Triple


# ---------------------------------------------------------------------------
# templates

def test_every_template_round_trips_slots():
    for kind, slots in TEMPLATE_SLOTS.items():
        template = load_template(kind)
        assert template_placeholders(template.body) == slots


def test_render_relation_template_substitutes_budget():
    rendered = render_prompt(
        load_template("relation-scoring"),
        {"question": "q?", "topic_entity": "NATO", "relation": "a; b", "budget": 3},
    )
    assert "**Budget**:\n\n3" in rendered
    assert "{budget}" not in rendered
    assert "q?" in rendered and "a; b" in rendered


def test_render_missing_slot_names_it():
    template = load_template("relation-scoring")
    with pytest.raises(TemplateError) as exc_info:
        render_prompt(template, {"topic_entity": "x", "relation": "r", "budget": 1})
    assert str(exc_info.value) == "missing slot: question"


def test_render_unexpected_slot_rejected():
    template = load_template("answer-prediction")
    with pytest.raises(TemplateError):
        render_prompt(template, {"question": "q", "reasoning_paths": "p", "bogus": "x"})


def test_render_deterministic_bytes():
    template = load_template("entity-scoring")
    slots = {"question": "q?", "plan": "a, b", "candidate": "m.1", "context": "m.1 -> r -> t"}
    assert render_prompt(template, slots) == render_prompt(template, slots)


def test_entity_template_shows_brace_output_format():
    rendered = render_prompt(
        load_template("entity-scoring"),
        {"question": "q", "plan": "p", "candidate": "m.99", "context": "ctx"},
    )
    assert "{{Candidate Entity:m.99,Score:xxx}}" in rendered


# ---------------------------------------------------------------------------
# tagged-score grammar

def test_parse_tagged_two_entries():
    reply = (
        "<count>2</count><choice>r1</choice><score>0.9</score>"
        "<count>1</count><choice>r2</choice><score>0.4</score>"
    )
    parsed = parse_tagged_scores(reply, budget=5)
    assert [(e.choice, e.score) for e in parsed.entries] == [("r1", 0.9), ("r2", 0.4)]
    assert parsed.entries[0].remaining_count == 2


def test_parse_tagged_truncates_at_budget():
    reply = "".join(f"<choice>r{i}</choice><score>0.{i}</score>" for i in range(1, 4))
    parsed = parse_tagged_scores(reply, budget=2)
    assert len(parsed.entries) == 2


def test_parse_tagged_clamps_scores():
    parsed = parse_tagged_scores("<choice>r</choice><score>1.7</score>", 1)
    assert parsed.entries[0].score == 1.0
    parsed = parse_tagged_scores("<choice>r</choice><score>-2</score>", 1)
    assert parsed.entries[0].score == 0.0


def test_parse_tagged_drops_malformed_score_entry():
    reply = (
        "<choice>bad</choice><score>high</score>"
        "<choice>good</choice><score>0.5</score>"
    )
    parsed = parse_tagged_scores(reply, 5)
    assert [e.choice for e in parsed.entries] == ["good"]


def test_parse_tagged_tolerates_missing_reason_and_score():
    reply = "<count>1</count><choice>r1</choice>"
    parsed = parse_tagged_scores(reply, 3)
    assert parsed.entries[0].choice == "r1"
    assert parsed.entries[0].score is None
    assert parsed.entries[0].reason is None


def test_parse_tagged_zero_entries_raises():
    with pytest.raises(ReplyParseError):
        parse_tagged_scores("nothing structured here", 3)
    with pytest.raises(ValueError):
        parse_tagged_scores("<choice>r</choice>", 0)


def test_parse_tagged_interleaved_prose_and_reasons():
    reply = """Sure! Here are my picks:
    <count> 2 </count>
    <choice> organization.headquarters </choice>
    <reason> mentions the headquarters
    directly </reason>
    <score> 0.93 </score>
    some rambling between entries
    <count> 1 </count>
    <choice> organizations_founded </choice>
    <score> 0.10 </score>
    """
    parsed = parse_tagged_scores(reply, 5)
    assert [e.choice for e in parsed.entries] == [
        "organization.headquarters",
        "organizations_founded",
    ]
    assert "directly" in parsed.entries[0].reason


# ---------------------------------------------------------------------------
# brace grammar

def test_parse_entity_score_appendix_format():
    assert parse_entity_score("{Candidate Entity:m.0g9lr08,Score:0.93}") == pytest.approx(0.93)


def test_parse_entity_score_bare_and_zero():
    assert parse_entity_score("Score: 0") == 0.0
    assert parse_entity_score("I think Score: .75 fits") == pytest.approx(0.75)


def test_parse_entity_score_clamps():
    assert parse_entity_score("{Candidate Entity:x,Score:1.7}") == 1.0
    assert parse_entity_score("Score: -0.3") == 0.0


def test_parse_entity_score_error_paths():
    with pytest.raises(ReplyParseError):
        parse_entity_score("no idea")
    with pytest.raises(ReplyParseError):
        parse_entity_score("")


def test_parse_entity_score_prefers_brace_block():
    reply = "Score: 0.1 is wrong; final {Candidate Entity:m.1,Score:0.8}"
    assert parse_entity_score(reply) == pytest.approx(0.8)


# ---------------------------------------------------------------------------
# endpoint transport

class FakeResponse:
    def __init__(self, status_code: int, payload=None, text: str = ""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("no body")
        return self._payload


def endpoint_config(**kwargs) -> EndpointConfig:
    defaults = dict(base_url="http://test.local/v1", model="m", retries=2, backoff_base=0.0)
    defaults.update(kwargs)
    return EndpointConfig(**defaults)


def test_chat_complete_returns_reply(monkeypatch):
    calls = []

    def fake_post(url, json=None, headers=None, timeout=None):
        calls.append((url, json))
        return FakeResponse(200, {"choices": [{"message": {"content": "hello"}}]})

    monkeypatch.setattr("kgqa.llm.requests.post", fake_post)
    endpoint = ChatEndpoint(endpoint_config(seed=11))
    assert endpoint.complete("hi") == "hello"
    url, payload = calls[0]
    assert url == "http://test.local/v1/chat/completions"
    assert payload["messages"] == [{"role": "user", "content": "hi"}]
    assert payload["temperature"] == 0
    assert payload["seed"] == 11


def test_chat_complete_retries_then_fails(monkeypatch):
    attempts = []

    def fake_post(url, json=None, headers=None, timeout=None):
        attempts.append(1)
        return FakeResponse(500, text="boom")

    monkeypatch.setattr("kgqa.llm.requests.post", fake_post)
    endpoint = ChatEndpoint(endpoint_config(retries=2))
    with pytest.raises(EndpointError):
        endpoint.complete("hi")
    assert len(attempts) == 3


def test_chat_complete_writes_trace(monkeypatch, tmp_path):
    def fake_post(url, json=None, headers=None, timeout=None):
        return FakeResponse(200, {"choices": [{"message": {"content": "ok"}}]})

    monkeypatch.setattr("kgqa.llm.requests.post", fake_post)
    trace = tmp_path / "trace.jsonl"
    endpoint = ChatEndpoint(endpoint_config(trace_path=str(trace)))
    endpoint.complete("one")
    endpoint.complete("two")
    lines = [json.loads(line) for line in trace.read_text().splitlines()]
    assert len(lines) == 2
    assert lines[0]["prompt_sha256"] == prompt_digest("one")
    assert lines[0]["latency_ms"] >= 0
    assert lines[0]["status"] == 200


def test_chat_complete_sends_api_key_from_env(monkeypatch):
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen.update(headers)
        return FakeResponse(200, {"choices": [{"message": {"content": "ok"}}]})

    monkeypatch.setattr("kgqa.llm.requests.post", fake_post)
    monkeypatch.setenv("EPERM_API_KEY", "sekrit")
    ChatEndpoint(endpoint_config()).complete("x")
    assert seen["Authorization"] == "Bearer sekrit"


def test_replay_and_recording_endpoints(tmp_path):
    class Echo:
        def complete(self, prompt):
            return prompt.upper()

    record_file = tmp_path / "record.jsonl"
    recorder = RecordingEndpoint(Echo(), record_file)
    assert recorder.complete("abc") == "ABC"
    replay = ReplayEndpoint(record_file)
    assert replay.complete("abc") == "ABC"
    with pytest.raises(EndpointError):
        replay.complete("never seen")


# ---------------------------------------------------------------------------
# remote scorer

def test_remote_scorer_relations(tmp_path):
    prompt = render_prompt(
        load_template("relation-scoring"),
        {
            "question": "q?",
            "topic_entity": "NATO",
            "relation": "organization.headquarters; organizations_founded",
            "budget": 2,
        },
    )
    reply = (
        "<count>2</count><choice>organization.headquarters</choice><score>0.9</score>"
        "<count>1</count><choice>made.up.relation</choice><score>0.8</score>"
    )
    endpoint = ReplayEndpoint.from_replies({prompt: reply}, tmp_path / "fx.jsonl")
    scored = RemoteScorer(endpoint).score_relations(
        "q?", "NATO", ["organization.headquarters", "organizations_founded"], 2
    )
    # unknown choices are discarded; known ones keep their clamped scores
    assert scored == [("organization.headquarters", 0.9)]


def test_remote_scorer_relations_unparseable_raises(tmp_path):
    prompt = render_prompt(
        load_template("relation-scoring"),
        {"question": "q?", "topic_entity": "t", "relation": "a; b", "budget": 1},
    )
    endpoint = ReplayEndpoint.from_replies({prompt: "gibberish"}, tmp_path / "fx.jsonl")
    with pytest.raises(EndpointError):
        RemoteScorer(endpoint, parse_retries=1).score_relations("q?", "t", ["a", "b"], 1)


def test_remote_scorer_entities_with_fallback(tmp_path):
    plan = Plan(("r.one",))
    context = [Triple("m.1", "r.one", "t")]
    good_prompt = render_prompt(
        load_template("entity-scoring"),
        {"question": "q?", "plan": "r.one", "candidate": "m.1", "context": "m.1 -> r.one -> t"},
    )
    bad_prompt = render_prompt(
        load_template("entity-scoring"),
        {"question": "q?", "plan": "r.one", "candidate": "m.2", "context": ""},
    )
    endpoint = ReplayEndpoint.from_replies(
        {good_prompt: "{Candidate Entity:m.1,Score:0.66}", bad_prompt: "shrug"},
        tmp_path / "fx.jsonl",
    )
    scorer = RemoteScorer(endpoint, parse_retries=0)
    assert scorer.score_entities("q?", plan, "m.1", context).score == pytest.approx(0.66)
    # parse failure falls back to 0.0 instead of raising
    assert scorer.score_entities("q?", plan, "m.2", []).score == 0.0
