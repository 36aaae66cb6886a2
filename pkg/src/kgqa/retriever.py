"""Question-relevant subgraph retrieval by iterative top-K relation expansion.

Starting from the topic entities, each iteration scores the relations
incident to every frontier entity, keeps the top K per entity, pulls in the
matching triples and advances the frontier to the newly reached entities.
Frontiers are deduplicated globally: an entity is expanded at most once,
which both bounds work on cyclic graphs and makes the retrieved subgraph
monotone in K.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from .errors import DataError, UnknownEntityError
from .model import ScoredCandidate, Triple
from .scoring import ScorerBackend
from .store import TripleStore, base_relation, is_inverse


@dataclass(frozen=True)
class RetrievalConfig:
    """Beam parameters: relations kept per entity (k), iteration depth,
    and a safety cap on frontier size."""

    k: int = 3
    depth: int = 2
    max_frontier: int = 200

    def __post_init__(self) -> None:
        for name in ("k", "depth", "max_frontier"):
            value = getattr(self, name)
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")


class FrontierRecord(NamedTuple):
    """One frontier-entity expansion: which relations were chosen, with scores."""

    iteration: int
    entity: str
    chosen: tuple[ScoredCandidate, ...]


class Subgraph:
    """An immutable slice of a parent store, indexed like a store.

    Carries the topic entities it was grown from, the per-iteration
    expansion history, and labels for its member entities.
    """

    def __init__(
        self,
        triples: Iterable[Triple],
        topics: Iterable[str],
        frontier_history: Iterable[FrontierRecord] = (),
        labels: Mapping[str, str] | None = None,
    ):
        self._store = TripleStore(triples, labels)
        self.topics = tuple(sorted(set(topics)))
        self.frontier_history = tuple(frontier_history)

    @property
    def triples(self) -> frozenset[Triple]:
        return self._store.triples

    @property
    def entities(self) -> frozenset[str]:
        return self._store.entities

    @property
    def labels(self) -> Mapping[str, str]:
        return self._store.labels

    def __len__(self) -> int:
        return len(self._store)

    def has_entity(self, entity: str) -> bool:
        return self._store.has_entity(entity)

    def search_adjacent(self, entity: str, relation: str) -> tuple[str, ...]:
        return self._store.search_adjacent(entity, relation)

    def relations_of(self, entity: str) -> tuple[str, ...]:
        return self._store.relations_of(entity)

    def incident(self, entity: str) -> tuple[Triple, ...]:
        return self._store.incident(entity)

    def label_of(self, entity: str) -> str | None:
        return self._store.label_of(entity)

    def sink_entities(self) -> tuple[str, ...]:
        """Entities with no outgoing raw edge inside the subgraph."""
        heads = {h for h, _, _ in self.triples}
        return tuple(sorted(self.entities - heads))

    def to_json(self, question: str | None = None) -> dict:
        return {
            "question": question,
            "topics": list(self.topics),
            "triples": sorted([h, r, t] for h, r, t in self.triples),
            "labels": {e: lab for e, lab in sorted(self.labels.items())},
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Subgraph":
        try:
            triples = [Triple(*row) for row in obj["triples"]]
            return cls(triples, obj["topics"], labels=obj.get("labels") or {})
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed subgraph object: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "Subgraph":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot load subgraph from {path}: {exc}") from exc
        return cls.from_json(obj)


def _raw_triples(store: TripleStore, entity: str, relation: str, tails: Iterable[str]) -> list[Triple]:
    # Inverse traversal still records the underlying raw triple.
    if is_inverse(relation):
        return [Triple(t, base_relation(relation), entity) for t in tails]
    return [Triple(entity, relation, t) for t in tails]


def retrieve_subgraph(
    store: TripleStore,
    question: str,
    topics: Iterable[str],
    config: RetrievalConfig,
    backend: ScorerBackend,
) -> Subgraph:
    """Grow a question-relevant subgraph outward from the topic entities.

    Raises :class:`UnknownEntityError` naming any topic absent from the
    store.  Scorer failures propagate.
    """
    topic_list = sorted(set(topics))
    if not topic_list:
        raise ValueError("topics must be non-empty")
    missing = [t for t in topic_list if not store.has_entity(t)]
    if missing:
        raise UnknownEntityError(*missing)

    collected: set[Triple] = set()
    history: list[FrontierRecord] = []
    seen: set[str] = set(topic_list)
    frontier: list[str] = list(topic_list)

    for iteration in range(1, config.depth + 1):
        if not frontier:
            break
        tail_scores: dict[str, float] = {}
        for entity in frontier:
            relations = store.relations_of(entity)
            if not relations:
                history.append(FrontierRecord(iteration, entity, ()))
                continue
            chosen = backend.score_relations(question, entity, relations, config.k)
            history.append(FrontierRecord(iteration, entity, tuple(chosen)))
            for label, score in chosen:
                tails = store.search_adjacent(entity, label)
                collected.update(_raw_triples(store, entity, label, tails))
                for tail in tails:
                    if tail not in seen:
                        tail_scores[tail] = max(tail_scores.get(tail, 0.0), score)
        ranked = sorted(tail_scores.items(), key=lambda kv: (-kv[1], kv[0]))
        frontier = [entity for entity, _ in ranked[: config.max_frontier]]
        seen.update(frontier)

    member_labels = {
        e: lab
        for e, lab in store.labels.items()
        if e in {x for h, _, t in collected for x in (h, t)} | set(topic_list)
    }
    return Subgraph(sorted(collected), topic_list, history, member_labels)
