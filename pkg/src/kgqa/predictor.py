"""Turn scored evidence paths into ranked answers.

Two strategies: a deterministic aggregation over path terminals, and a
remote strategy that renders the reasoning prompt, asks a chat endpoint and
parses its free-form answer list.  The remote strategy falls back to the
deterministic one when the reply is unusable.
"""
from __future__ import annotations

import logging
import re
from typing import Mapping, Sequence

from .llm import CompletionEndpoint, load_template, render_prompt
from .model import EvidencePath, Prediction

logger = logging.getLogger(__name__)

GROUPERS = {"max": max, "sum": sum}


def predict_aggregate(
    question: str, paths: Sequence[EvidencePath], group: str = "max"
) -> Prediction:
    """Rank the terminal entities of the input paths.

    Each entity's confidence is the max (or, configurably, sum) of the
    aggregate scores of the paths reaching it; ranking is confidence
    descending, entity ascending.  No paths means no answers.
    """
    if group not in GROUPERS:
        raise ValueError(f"group must be one of {sorted(GROUPERS)}, got {group!r}")
    combine = GROUPERS[group]
    by_terminal: dict[str, list[float]] = {}
    for path in paths:
        by_terminal.setdefault(path.terminal, []).append(path.aggregate_score)
    ranked = sorted(
        ((entity, float(combine(scores))) for entity, scores in by_terminal.items()),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return Prediction(answers=tuple(ranked), strategy="aggregate", trace=tuple(paths))


def format_reasoning_paths(paths: Sequence[EvidencePath]) -> str:
    return "\n".join(f"{p.arrow_chain()} Score:{p.aggregate_score:.6g}" for p in paths)


def build_reasoning_prompt(question: str, paths: Sequence[EvidencePath]) -> str:
    """The exact prompt the remote predictor sends; also reused verbatim by
    the reasoning-dataset emitter."""
    return render_prompt(
        load_template("answer-prediction"),
        {"question": question, "reasoning_paths": format_reasoning_paths(paths)},
    )


_ANSWER_PHRASE = re.compile(r"the\s+answers?\s+(?:is|are)\s*[:\-]?", re.I)


def parse_answer_reply(reply: str) -> list[str]:
    """Tolerant answer-list grammar: optional "The answer is" lead-in, then
    comma/semicolon/newline-separated entries."""
    text = reply.strip()
    if not text:
        return []
    matches = list(_ANSWER_PHRASE.finditer(text))
    if matches:
        text = text[matches[-1].end():]
    pieces = re.split(r"[,;\n]+", text)
    out: list[str] = []
    for piece in pieces:
        cleaned = piece.strip().strip(".").strip().strip("\"'`").strip()
        if cleaned and cleaned not in out:
            out.append(cleaned)
    return out


def predict_remote(
    question: str,
    paths: Sequence[EvidencePath],
    endpoint: CompletionEndpoint,
    labels: Mapping[str, str] | None = None,
    group: str = "max",
) -> Prediction:
    """Ask the endpoint to reason over the rendered paths.

    Parsed answers are resolved against the path terminals by id or label
    (case-insensitive) and given rank-derived confidences (1/rank).  An
    unparseable or unresolvable reply falls back to the aggregate strategy
    with a logged warning; endpoint transport errors propagate.
    """
    if not paths:
        return Prediction(answers=(), strategy="remote", trace=())
    reply = endpoint.complete(build_reasoning_prompt(question, paths))

    terminals: dict[str, str] = {}
    for path in paths:
        terminal = path.terminal
        terminals.setdefault(terminal.lower(), terminal)
        if labels and terminal in labels:
            terminals.setdefault(labels[terminal].lower(), terminal)

    resolved: list[str] = []
    for piece in parse_answer_reply(reply):
        entity = terminals.get(piece.lower())
        if entity and entity not in resolved:
            resolved.append(entity)
    if not resolved:
        logger.warning("unusable predictor reply %r; falling back to aggregate", reply[:80])
        fallback = predict_aggregate(question, paths, group=group)
        return Prediction(answers=fallback.answers, strategy="remote", trace=tuple(paths))

    answers = tuple((entity, 1.0 / rank) for rank, entity in enumerate(resolved, start=1))
    return Prediction(answers=answers, strategy="remote", trace=tuple(paths))
