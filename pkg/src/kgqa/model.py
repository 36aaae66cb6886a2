"""Core value types shared across the pipeline stages."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple


class Triple(NamedTuple):
    """A directed labelled edge of the knowledge graph."""

    head: str
    relation: str
    tail: str


class ScoredCandidate(NamedTuple):
    """An entity id or relation label plus a relevance score in [0, 1]."""

    item: str
    score: float


@dataclass(frozen=True)
class Plan:
    """An entity-free walk specification: an ordered relation sequence.

    ``weight`` is assigned by whichever generator produced the plan and is
    used both for ranking plans and, optionally, for folding into evidence
    path scores.
    """

    relations: tuple[str, ...]
    weight: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "relations", tuple(self.relations))
        if not all(isinstance(r, str) and r for r in self.relations):
            raise ValueError("plan relations must be non-empty strings")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"plan weight must be in [0, 1], got {self.weight}")

    def __len__(self) -> int:
        return len(self.relations)


class PathStep(NamedTuple):
    source: str
    relation: str
    target: str
    hop_score: float


@dataclass(frozen=True)
class EvidencePath:
    """A plan grounded with concrete entities, one scored step per hop."""

    steps: tuple[PathStep, ...]
    aggregate_score: float
    origin_plan: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(PathStep(*s) for s in self.steps))
        if not self.steps:
            raise ValueError("an evidence path needs at least one step")
        for left, right in zip(self.steps, self.steps[1:]):
            if left.target != right.source:
                raise ValueError(f"broken chain: {left.target!r} -> {right.source!r}")

    @property
    def chain(self) -> tuple[str, ...]:
        return (self.steps[0].source,) + tuple(s.target for s in self.steps)

    @property
    def relations(self) -> tuple[str, ...]:
        return tuple(s.relation for s in self.steps)

    @property
    def hop_scores(self) -> tuple[float, ...]:
        return tuple(s.hop_score for s in self.steps)

    @property
    def terminal(self) -> str:
        return self.steps[-1].target

    def arrow_chain(self) -> str:
        """Render the path as ``e0 -> rel -> e1 -> rel -> e2``."""
        parts = [self.steps[0].source]
        for step in self.steps:
            parts.append(f"-> {step.relation} -> {step.target}")
        return " ".join(parts)


@dataclass(frozen=True)
class QaExample:
    """One dataset row: question text, topic entities and gold answers."""

    id: str
    question: str
    topic_entities: tuple[str, ...]
    answers: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "topic_entities", tuple(self.topic_entities))
        object.__setattr__(self, "answers", tuple(self.answers))
        if not self.topic_entities or not all(self.topic_entities):
            raise ValueError(f"example {self.id!r}: topic_entities must be non-empty ids")


@dataclass(frozen=True)
class Prediction:
    """Ranked answers with confidences plus the evidence behind them."""

    answers: tuple[tuple[str, float], ...]
    strategy: str
    trace: tuple[EvidencePath, ...] = ()

    @property
    def top1(self) -> str | None:
        return self.answers[0][0] if self.answers else None
