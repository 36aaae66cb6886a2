"""Label candidate plans against gold answers and emit instruction datasets.

A plan is labelled by its coverage: the share of the entities it retrieves
that are gold answers.  Plans at or above the threshold are "valid" and feed
the plan-finding dataset; the reasoning dataset pairs the exact prompt the
remote predictor would send with the gold answers.  Both datasets are plain
JSONL with ``prompt``/``completion`` fields, ready for standard
instruction-tuning toolchains.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import DataError
from .model import EvidencePath, Plan, QaExample
from .predictor import build_reasoning_prompt
from .store import TripleStore, enumerate_plans, execute_plan

FIND_TASK = "find"
REASON_TASK = "reason"

FIND_PROMPT = """Instruction:

Propose relation chains that lead from the question's topic entities to its answer in a knowledge graph. List the relations of each chain in walk order, separated by commas, and report each chain inside the XML format below, counting the budget down inside <count> tags:

<count> [remaining budget] </count>
<choice> first.relation, second.relation </choice>
<score> confidence 0.0-1.0 for this chain </score>

Question:

{question}
"""


@dataclass(frozen=True)
class LabeledPlan:
    """A candidate plan with its answer-coverage ratio and validity flag."""

    plan: Plan
    coverage: float
    valid: bool


@dataclass(frozen=True)
class InstructionRecord:
    task: str
    prompt: str
    completion: str
    source_qid: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "task": self.task,
                "prompt": self.prompt,
                "completion": self.completion,
                "source_qid": self.source_qid,
            }
        )


@dataclass(frozen=True)
class EmitStats:
    written: int
    skipped: int


def _matches_gold(store: TripleStore, entity: str, gold: Sequence[str]) -> bool:
    label = (store.label_of(entity) or "").lower()
    for answer in gold:
        if entity == answer or (label and label == answer.lower()):
            return True
    return False


def label_plans(
    store: TripleStore,
    example: QaExample,
    candidates: Sequence[Plan],
    t: float,
) -> list[LabeledPlan]:
    """Coverage-label each candidate plan; order is preserved.

    coverage = |retrieved entities matching gold| / |retrieved entities|,
    and 0 when the plan retrieves nothing.  ``valid`` means coverage >= t.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    labelled: list[LabeledPlan] = []
    for plan in candidates:
        retrieved = execute_plan(store, example.topic_entities, plan)
        if retrieved:
            matched = sum(1 for e in retrieved if _matches_gold(store, e, example.answers))
            coverage = matched / len(retrieved)
        else:
            coverage = 0.0
        labelled.append(LabeledPlan(plan=plan, coverage=coverage, valid=coverage >= t))
    return labelled


def serialize_plans(labelled: Sequence[LabeledPlan]) -> str:
    """Render valid plans in the tagged format the plan parser understands."""
    valid = [lp for lp in labelled if lp.valid]
    valid.sort(key=lambda lp: (-lp.coverage, lp.plan.relations))
    lines: list[str] = []
    for position, lp in enumerate(valid):
        lines.append(f"<count> {len(valid) - position} </count>")
        lines.append(f"<choice> {', '.join(lp.plan.relations)} </choice>")
        lines.append(f"<score> {lp.coverage:.4f} </score>")
    return "\n".join(lines)


def _gold_entity_ids(store: TripleStore, example: QaExample) -> frozenset[str]:
    ids: set[str] = set()
    for answer in example.answers:
        ids.update(store.resolve(answer))
    return frozenset(ids)


def emit_find_dataset(
    examples: Sequence[QaExample],
    store: TripleStore,
    t: float,
    max_len: int,
    out: str | Path,
) -> EmitStats:
    """One record per example whose candidate pool contains valid plans.

    Candidates come from enumerating store walks between the example's
    topics and its gold answers; examples with no valid plan are skipped and
    counted.  Output is byte-deterministic for identical inputs.
    """
    written = 0
    skipped = 0
    try:
        handle = Path(out).open("w", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc}") from exc
    with handle:
        for example in examples:
            targets = _gold_entity_ids(store, example)
            candidates = (
                enumerate_plans(store, example.topic_entities, targets, max_len)
                if targets
                else []
            )
            labelled = label_plans(store, example, candidates, t)
            completion = serialize_plans(labelled)
            if not completion:
                skipped += 1
                continue
            record = InstructionRecord(
                task=FIND_TASK,
                prompt=FIND_PROMPT.format(question=example.question),
                completion=completion,
                source_qid=example.id,
            )
            handle.write(record.to_json() + "\n")
            written += 1
    return EmitStats(written=written, skipped=skipped)


def emit_reason_dataset(
    examples: Sequence[QaExample],
    paths_per_example: Sequence[Sequence[EvidencePath]],
    out: str | Path,
) -> EmitStats:
    """One record per example with evidence paths.

    The prompt is byte-identical to what the remote predictor would send for
    the same paths; the completion lists the gold answers.
    """
    if len(examples) != len(paths_per_example):
        raise ValueError("examples and paths_per_example must align")
    written = 0
    skipped = 0
    try:
        handle = Path(out).open("w", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc}") from exc
    with handle:
        for example, paths in zip(examples, paths_per_example):
            if not paths:
                skipped += 1
                continue
            record = InstructionRecord(
                task=REASON_TASK,
                prompt=build_reasoning_prompt(example.question, list(paths)),
                completion="The answer is " + ", ".join(dict.fromkeys(example.answers)),
                source_qid=example.id,
            )
            handle.write(record.to_json() + "\n")
            written += 1
    return EmitStats(written=written, skipped=skipped)
