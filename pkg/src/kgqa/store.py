"""In-memory knowledge-graph store: loading, indexing and walk execution.

Triples are indexed in both directions at load time.  Traversal against the
direction of an edge uses the relation label suffixed with ``^-1``, so every
downstream operation is a plain forward walk.  Stores are immutable after
construction and safe to share across worker threads.

All returned sequences are sorted; nothing here depends on hash order.
"""
from __future__ import annotations

import json
import re
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Protocol, Sequence

from .errors import DataError, ParseError
from .model import Plan, QaExample, Triple

INVERSE_MARKER = "^-1"


def is_inverse(relation: str) -> bool:
    return relation.endswith(INVERSE_MARKER)


def invert(relation: str) -> str:
    """Flip the traversal direction of a relation label."""
    if is_inverse(relation):
        return relation[: -len(INVERSE_MARKER)]
    return relation + INVERSE_MARKER


def base_relation(relation: str) -> str:
    """The label with any inverse marker stripped."""
    return relation[: -len(INVERSE_MARKER)] if is_inverse(relation) else relation


class GraphView(Protocol):
    """Read-only adjacency interface shared by TripleStore and Subgraph."""

    @property
    def entities(self) -> frozenset[str]: ...

    def has_entity(self, entity: str) -> bool: ...

    def search_adjacent(self, entity: str, relation: str) -> tuple[str, ...]: ...

    def relations_of(self, entity: str) -> tuple[str, ...]: ...


class TripleStore:
    """Immutable indexed set of triples with bidirectional adjacency.

    ``labels`` is optional side data mapping entity ids to human-readable
    strings; answers elsewhere match on id or label.  Intermediate hub nodes
    without labels (``m.04300hm``-style ids) are ordinary entities.
    """

    def __init__(self, triples: Iterable[Triple], labels: Mapping[str, str] | None = None):
        triple_set = {Triple(*t) for t in triples}
        for h, r, t in triple_set:
            if not (h and r and t):
                raise DataError(f"triple fields must be non-empty: {(h, r, t)!r}")
            if is_inverse(r):
                raise DataError(f"stored relations must be raw (no {INVERSE_MARKER}): {r!r}")
        self._triples = frozenset(triple_set)

        fwd: dict[tuple[str, str], set[str]] = defaultdict(set)
        rev: dict[tuple[str, str], set[str]] = defaultdict(set)
        rels: dict[str, set[str]] = defaultdict(set)
        incident: dict[str, set[Triple]] = defaultdict(set)
        entities: set[str] = set()
        for triple in triple_set:
            h, r, t = triple
            fwd[(h, r)].add(t)
            rev[(t, r)].add(h)
            rels[h].add(r)
            rels[t].add(invert(r))
            incident[h].add(triple)
            incident[t].add(triple)
            entities.update((h, t))

        self._fwd = {key: tuple(sorted(vals)) for key, vals in fwd.items()}
        self._rev = {key: tuple(sorted(vals)) for key, vals in rev.items()}
        self._rels = {e: tuple(sorted(vals)) for e, vals in rels.items()}
        self._incident = {e: tuple(sorted(vals)) for e, vals in incident.items()}
        self._entities = frozenset(entities)
        self._labels = dict(labels or {})
        self._label_index: dict[str, tuple[str, ...]] = {}
        by_label: dict[str, set[str]] = defaultdict(set)
        for entity, label in self._labels.items():
            by_label[label.lower()].add(entity)
        self._label_index = {lab: tuple(sorted(ids)) for lab, ids in by_label.items()}

    @classmethod
    def from_triples(
        cls, triples: Iterable[tuple[str, str, str]], labels: Mapping[str, str] | None = None
    ) -> "TripleStore":
        return cls((Triple(*t) for t in triples), labels)

    @property
    def triples(self) -> frozenset[Triple]:
        return self._triples

    @property
    def entities(self) -> frozenset[str]:
        return self._entities

    @property
    def labels(self) -> Mapping[str, str]:
        return self._labels

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(sorted(self._triples))

    def has_entity(self, entity: str) -> bool:
        return entity in self._entities

    def search_adjacent(self, entity: str, relation: str) -> tuple[str, ...]:
        """All neighbours of ``entity`` along ``relation``.

        Inverse-marked relations walk edges backwards.  Unknown entity or
        relation yields an empty tuple; this is a total function.
        """
        if is_inverse(relation):
            return self._rev.get((entity, base_relation(relation)), ())
        return self._fwd.get((entity, relation), ())

    def relations_of(self, entity: str) -> tuple[str, ...]:
        """Sorted relation labels incident to ``entity``, inverse forms included."""
        return self._rels.get(entity, ())

    def incident(self, entity: str) -> tuple[Triple, ...]:
        """All raw triples touching ``entity`` as head or tail."""
        return self._incident.get(entity, ())

    def relation_vocabulary(self) -> frozenset[str]:
        """All raw relation labels plus their inverse forms."""
        raw = {r for _, r, _ in self._triples}
        return frozenset(raw | {invert(r) for r in raw})

    def label_of(self, entity: str) -> str | None:
        return self._labels.get(entity)

    def resolve(self, name: str) -> tuple[str, ...]:
        """Entity ids matching ``name`` by exact id or case-insensitive label."""
        ids = set(self._label_index.get(name.lower(), ()))
        if name in self._entities:
            ids.add(name)
        return tuple(sorted(ids))


# ---------------------------------------------------------------------------
# Loading

_NT_LINE = re.compile(
    r"^<([^>]+)>\s+<([^>]+)>\s+"
    r'(?:<([^>]+)>|"((?:[^"\\]|\\.)*)"(?:@[A-Za-z0-9-]+|\^\^<[^>]+>)?)'
    r"\s*\.$"
)
_NT_ESCAPES = {"\\\\": "\\", '\\"': '"', "\\n": "\n", "\\t": "\t", "\\r": "\r"}


def _unescape_literal(text: str) -> str:
    for seq, char in _NT_ESCAPES.items():
        text = text.replace(seq, char)
    return text


def load_triples(path: str | Path, fmt: str = "tsv", labels: Mapping[str, str] | None = None) -> TripleStore:
    """Load and index a triple file.

    ``tsv``: one triple per line, exactly three TAB-separated fields.
    ``ntriples``: ``<s> <p> <o> .`` lines; blank lines and ``#`` comments are
    skipped, literal objects are unquoted.  Duplicate triples collapse (set
    semantics).  Malformed lines raise :class:`ParseError` with the line
    number; a file yielding no triples raises :class:`DataError`.
    """
    path = Path(path)
    if fmt not in ("tsv", "ntriples"):
        raise DataError(f"unknown triple format: {fmt!r}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    triples: list[Triple] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if fmt == "tsv":
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(path, line_no, f"expected 3 TAB-separated fields, got {len(fields)}")
            head, relation, tail = (f.strip() for f in fields)
            if not head or not relation or not tail:
                raise ParseError(path, line_no, "empty field in triple")
            triples.append(Triple(head, relation, tail))
        else:
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            match = _NT_LINE.match(stripped)
            if not match:
                raise ParseError(path, line_no, "not a valid N-Triples statement")
            head, relation = match.group(1), match.group(2)
            tail = match.group(3) if match.group(3) is not None else _unescape_literal(match.group(4))
            if not head or not relation or not tail:
                raise ParseError(path, line_no, "empty term in triple")
            triples.append(Triple(head, relation, tail))

    if not triples:
        raise DataError(f"{path}: no triples found")
    return TripleStore(triples, labels)


def load_labels(path: str | Path) -> dict[str, str]:
    """Read an ``entity-id TAB label`` file into a mapping."""
    path = Path(path)
    labels: dict[str, str] = {}
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0].strip() or not fields[1].strip():
            raise ParseError(path, line_no, "expected 'entity-id<TAB>label'")
        labels[fields[0].strip()] = fields[1].strip()
    return labels


def load_dataset(path: str | Path) -> list[QaExample]:
    """Read a JSONL dataset of question rows.

    Each line must carry ``id``, ``question``, ``topic_entities`` (non-empty
    array) and ``answers`` (array).  Unknown keys are ignored.
    """
    path = Path(path)
    examples: list[QaExample] = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(path, line_no, f"invalid JSON: {exc}") from exc
        try:
            example = QaExample(
                id=str(row["id"]),
                question=str(row["question"]),
                topic_entities=tuple(str(t) for t in row["topic_entities"]),
                answers=tuple(str(a) for a in row.get("answers", [])),
            )
        except KeyError as exc:
            raise ParseError(path, line_no, f"missing key {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ParseError(path, line_no, str(exc)) from exc
        examples.append(example)
    if not examples:
        raise DataError(f"{path}: no examples found")
    return examples


# ---------------------------------------------------------------------------
# Walk execution

def execute_plan(graph: GraphView, start: Iterable[str], plan: Plan | Sequence[str]) -> set[str]:
    """Entities reachable from ``start`` by following the plan's relations in order.

    The empty plan returns the start set unchanged; a walk that dies returns
    the empty set.  Total function: unknown entities or relations simply
    contribute nothing.
    """
    relations = plan.relations if isinstance(plan, Plan) else tuple(plan)
    frontier = set(start)
    for relation in relations:
        if not frontier:
            return set()
        frontier = {t for e in frontier for t in graph.search_adjacent(e, relation)}
    return frontier


def enumerate_plans(
    graph: GraphView,
    start: Iterable[str],
    targets: Iterable[str],
    max_len: int,
) -> list[Plan]:
    """All distinct relation sequences of length 1..max_len connecting
    ``start`` to ``targets`` by at least one walk.

    Sequences may use inverse-marked relations.  Output is deduplicated and
    deterministically ordered by (length, lexicographic).  Intended for
    desk-scale graphs; the candidate tree grows with relation branching.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    start_set = frozenset(start)
    target_set = frozenset(targets)
    found: list[tuple[str, ...]] = []
    frontier: dict[tuple[str, ...], frozenset[str]] = {(): start_set}
    for _ in range(max_len):
        grown: dict[tuple[str, ...], frozenset[str]] = {}
        for sequence, reached in frontier.items():
            labels = sorted({r for e in reached for r in graph.relations_of(e)})
            for relation in labels:
                nxt = frozenset(
                    t for e in reached for t in graph.search_adjacent(e, relation)
                )
                if not nxt:
                    continue
                extended = sequence + (relation,)
                grown[extended] = nxt
                if nxt & target_set:
                    found.append(extended)
        frontier = grown
        if not frontier:
            break
    found.sort(key=lambda seq: (len(seq), seq))
    return [Plan(relations=seq) for seq in found]
