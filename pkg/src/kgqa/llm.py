"""Prompt templates, structured-reply parsers and the chat endpoint client.

The three prompt templates ship as text files under ``kgqa/prompts`` and are
rendered with named ``{slot}`` placeholders.  Two reply grammars are parsed:
the XML-ish ``<count>/<choice>/<reason>/<score>`` form used for relation
selection, and the ``{Candidate Entity:...,Score:...}`` brace form used for
entity scoring.  Parsers are pure and never abort the process: they return
values or raise :class:`ReplyParseError` for the caller to handle.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from functools import lru_cache
from importlib.resources import files
from pathlib import Path
from typing import Mapping, NamedTuple, Protocol, Sequence

import requests

from .errors import EndpointError, ReplyParseError, TemplateError
from .model import Plan, ScoredCandidate, Triple
from .scoring import rank_candidates

logger = logging.getLogger(__name__)

TEMPLATE_SLOTS: dict[str, frozenset[str]] = {
    "relation-scoring": frozenset({"question", "topic_entity", "relation", "budget"}),
    "entity-scoring": frozenset({"question", "plan", "candidate", "context"}),
    "answer-prediction": frozenset({"question", "reasoning_paths"}),
}
_TEMPLATE_FILES = {
    "relation-scoring": "relation_scoring.txt",
    "entity-scoring": "entity_scoring.txt",
    "answer-prediction": "answer_prediction.txt",
}

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


@dataclass(frozen=True)
class PromptTemplate:
    kind: str
    body: str
    slots: frozenset[str]


def template_placeholders(body: str) -> frozenset[str]:
    return frozenset(m.group(1) for m in _PLACEHOLDER.finditer(body))


@lru_cache(maxsize=None)
def load_template(kind: str) -> PromptTemplate:
    """Load a bundled template and check its placeholder/slot round trip."""
    if kind not in TEMPLATE_SLOTS:
        raise TemplateError(f"unknown template kind: {kind!r}")
    body = (files("kgqa") / "prompts" / _TEMPLATE_FILES[kind]).read_text(encoding="utf-8")
    slots = TEMPLATE_SLOTS[kind]
    found = template_placeholders(body)
    if found != slots:
        raise TemplateError(
            f"template {kind!r} placeholders {sorted(found)} do not match "
            f"declared slots {sorted(slots)}"
        )
    return PromptTemplate(kind=kind, body=body, slots=slots)


def render_prompt(template: PromptTemplate, slots: Mapping[str, object]) -> str:
    """Byte-deterministic rendering; every placeholder must be filled."""
    missing = sorted(template.slots - set(slots))
    if missing:
        raise TemplateError(f"missing slot: {missing[0]}")
    unexpected = sorted(set(slots) - template.slots)
    if unexpected:
        raise TemplateError(f"unexpected slot: {unexpected[0]}")
    return _PLACEHOLDER.sub(lambda m: str(slots[m.group(1)]), template.body)


# ---------------------------------------------------------------------------
# Reply grammars

class TaggedEntry(NamedTuple):
    choice: str
    reason: str | None
    score: float | None
    remaining_count: int | None


@dataclass(frozen=True)
class TaggedScoreReply:
    entries: tuple[TaggedEntry, ...]


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))


_TAG = re.compile(r"<\s*(count|choice|reason|score)\s*>(.*?)</\s*\1\s*>", re.S | re.I)
_DROPPED = object()  # sentinel: entry invalidated by malformed score text


def parse_tagged_scores(reply: str, budget: int) -> TaggedScoreReply:
    """Extract ordered (choice, reason, score, count) tuples from a reply.

    Missing ``<reason>`` or ``<score>`` tags are tolerated (score becomes
    ``None``); an entry whose score text fails to parse is dropped; output
    never exceeds ``budget`` entries.  Raises :class:`ReplyParseError` when
    nothing parseable remains.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    entries: list[TaggedEntry] = []
    choice: str | None = None
    reason: str | None = None
    score: object = None
    pending_count: int | None = None

    def flush() -> None:
        nonlocal choice, reason, score
        if choice is not None and score is not _DROPPED:
            entries.append(
                TaggedEntry(choice, reason, score, pending_count)  # type: ignore[arg-type]
            )
        choice, reason, score = None, None, None

    for match in _TAG.finditer(reply):
        tag = match.group(1).lower()
        text = match.group(2).strip()
        if tag == "count":
            if choice is not None:
                flush()
            try:
                pending_count = int(text)
            except ValueError:
                pending_count = None
        elif tag == "choice":
            if choice is not None:
                flush()
            choice = text or None
        elif tag == "reason":
            if choice is not None and reason is None:
                reason = text
        elif tag == "score":
            if choice is None or score not in (None, _DROPPED):
                continue
            try:
                score = _clamp(float(text))
            except ValueError:
                score = _DROPPED
    flush()

    if not entries:
        raise ReplyParseError("no parseable <choice> entries in reply")
    return TaggedScoreReply(entries=tuple(entries[:budget]))


_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_BRACE_SCORE = re.compile(
    r"\{[^{}]*Candidate\s*Entity[^{}]*?Score\s*[:：]\s*(" + _NUMBER + r")[^{}]*\}",
    re.I | re.S,
)
_BARE_SCORE = re.compile(r"Score\s*[:：]\s*(" + _NUMBER + r")", re.I)


def parse_entity_score(reply: str) -> float:
    """Extract the numeric Score field from an entity-scoring reply, clamped
    to [0, 1].  Raises :class:`ReplyParseError` when no score is present."""
    match = _BRACE_SCORE.search(reply) or _BARE_SCORE.search(reply)
    if not match:
        raise ReplyParseError("no Score field in reply")
    try:
        return _clamp(float(match.group(1)))
    except ValueError as exc:  # pragma: no cover - regex admits only numbers
        raise ReplyParseError(f"bad score text: {match.group(1)!r}") from exc


# ---------------------------------------------------------------------------
# Endpoint transport

def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class EndpointConfig:
    """Connection settings for a chat-completion-style HTTP endpoint.

    The API key is read from the environment variable named by
    ``api_key_env``; when unset, no Authorization header is sent (local
    endpoints typically need none).
    """

    base_url: str
    model: str
    timeout: float = 30.0
    retries: int = 2
    concurrency: int = 4
    seed: int | None = None
    trace_path: str | None = None
    api_key_env: str = "EPERM_API_KEY"
    backoff_base: float = 0.5


class CompletionEndpoint(Protocol):
    def complete(self, prompt: str) -> str: ...


class ChatEndpoint:
    """HTTP client with bounded concurrency, retries and optional tracing."""

    def __init__(self, config: EndpointConfig):
        self.config = config
        self._semaphore = threading.Semaphore(config.concurrency)
        self._trace_lock = threading.Lock()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _trace(self, prompt: str, latency_ms: float, status: object, attempt: int) -> None:
        if not self.config.trace_path:
            return
        line = json.dumps(
            {
                "prompt_sha256": prompt_digest(prompt),
                "latency_ms": round(latency_ms, 3),
                "status": status,
                "attempt": attempt,
            }
        )
        with self._trace_lock:
            with open(self.config.trace_path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")

    def complete(self, prompt: str) -> str:
        """Send one user turn and return the reply text.

        Retries with exponential backoff; after ``retries`` extra attempts
        the last failure is raised as :class:`EndpointError`.
        """
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        payload: dict[str, object] = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        if self.config.seed is not None:
            payload["seed"] = self.config.seed

        attempts = self.config.retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            started = time.monotonic()
            status: object = "error"
            try:
                with self._semaphore:
                    response = requests.post(
                        url, json=payload, headers=self._headers(), timeout=self.config.timeout
                    )
                status = response.status_code
                if response.status_code // 100 != 2:
                    raise EndpointError(
                        f"endpoint returned HTTP {response.status_code}: {response.text[:200]}"
                    )
                body = response.json()
                return str(body["choices"][0]["message"]["content"])
            except (requests.RequestException, EndpointError, KeyError, ValueError) as exc:
                last_error = exc
                if attempt < attempts - 1:
                    time.sleep(self.config.backoff_base * (2**attempt))
            finally:
                self._trace(prompt, (time.monotonic() - started) * 1000.0, status, attempt)
        raise EndpointError(f"chat completion failed after {attempts} attempts: {last_error}")


class ReplayEndpoint:
    """Offline endpoint replaying recorded replies keyed by prompt hash."""

    def __init__(self, fixture_path: str | Path):
        self._replies: dict[str, str] = {}
        for line in Path(fixture_path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                row = json.loads(line)
                self._replies[row["prompt_sha256"]] = row["reply"]

    @classmethod
    def from_replies(cls, replies: Mapping[str, str], path: str | Path) -> "ReplayEndpoint":
        """Write a fixture mapping prompt text -> reply, then load it."""
        with Path(path).open("w", encoding="utf-8") as handle:
            for prompt, reply in replies.items():
                handle.write(
                    json.dumps({"prompt_sha256": prompt_digest(prompt), "reply": reply}) + "\n"
                )
        return cls(path)

    def complete(self, prompt: str) -> str:
        digest = prompt_digest(prompt)
        if digest not in self._replies:
            raise EndpointError(f"no recorded reply for prompt {digest[:12]}…")
        return self._replies[digest]


class RecordingEndpoint:
    """Wraps a live endpoint and appends (prompt hash, reply) pairs to a file."""

    def __init__(self, inner: CompletionEndpoint, path: str | Path):
        self._inner = inner
        self._path = Path(path)

    def complete(self, prompt: str) -> str:
        reply = self._inner.complete(prompt)
        with self._path.open("a", encoding="utf-8") as handle:
            handle.write(
                json.dumps({"prompt_sha256": prompt_digest(prompt), "reply": reply}) + "\n"
            )
        return reply


# ---------------------------------------------------------------------------
# Remote scorer backend

def format_context(context: Sequence[Triple]) -> str:
    return "\n".join(f"{h} -> {r} -> {t}" for h, r, t in context)


class RemoteScorer:
    """ScorerBackend that delegates to a chat endpoint via the bundled prompts.

    Relation scoring re-asks the endpoint up to ``parse_retries`` times when a
    reply parses to nothing, then fails; entity scoring falls back to 0.0
    with a logged warning, keeping the pipeline total.  Scores are clamped to
    [0, 1] regardless of what the model returns.
    """

    def __init__(self, endpoint: CompletionEndpoint, parse_retries: int = 2):
        self.endpoint = endpoint
        self.parse_retries = parse_retries

    def score_relations(
        self,
        question: str,
        topic_entity: str,
        candidates: Sequence[str],
        budget: int,
    ) -> list[ScoredCandidate]:
        if not candidates:
            raise ValueError("candidates must be non-empty")
        if budget < 1:
            raise ValueError(f"budget must be >= 1, got {budget}")
        unique = sorted(set(candidates))
        prompt = render_prompt(
            load_template("relation-scoring"),
            {
                "question": question,
                "topic_entity": topic_entity,
                "relation": "; ".join(unique),
                "budget": budget,
            },
        )
        last_error: Exception | None = None
        for _ in range(self.parse_retries + 1):
            reply = self.endpoint.complete(prompt)
            try:
                parsed = parse_tagged_scores(reply, budget)
            except ReplyParseError as exc:
                last_error = exc
                continue
            known = set(unique)
            scored: dict[str, float] = {}
            for entry in parsed.entries:
                label = entry.choice.strip()
                if label in known and label not in scored:
                    scored[label] = entry.score if entry.score is not None else 0.0
            if scored:
                return rank_candidates(
                    [ScoredCandidate(label, score) for label, score in scored.items()], budget
                )
            last_error = ReplyParseError("reply named no known relation")
        raise EndpointError(
            f"relation scoring failed after {self.parse_retries + 1} attempts: {last_error}"
        )

    def score_entities(
        self,
        question: str,
        plan: Plan | Sequence[str] | None,
        candidate: str,
        context: Sequence[Triple],
    ) -> ScoredCandidate:
        relations: Sequence[str]
        if plan is None:
            relations = ()
        elif isinstance(plan, Plan):
            relations = plan.relations
        else:
            relations = tuple(plan)
        prompt = render_prompt(
            load_template("entity-scoring"),
            {
                "question": question,
                "plan": ", ".join(relations),
                "candidate": candidate,
                "context": format_context(context),
            },
        )
        last_error: Exception | None = None
        for _ in range(self.parse_retries + 1):
            reply = self.endpoint.complete(prompt)
            try:
                return ScoredCandidate(candidate, parse_entity_score(reply))
            except ReplyParseError as exc:
                last_error = exc
        logger.warning(
            "entity score parse failed for %r after %d attempts (%s); defaulting to 0.0",
            candidate,
            self.parse_retries + 1,
            last_error,
        )
        return ScoredCandidate(candidate, 0.0)
