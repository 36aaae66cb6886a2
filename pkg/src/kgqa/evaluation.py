"""Run the full pipeline over a dataset and score it.

Per-question metrics: Hits@1 (is the rank-1 prediction a gold answer) and
set F1 of predicted vs gold answers, with precision and recall.  Report
metrics are macro-averages.  Answers match on exact id or case-insensitive
label.  Per-question pipeline failures are recorded as wrong-with-reason,
never fatal.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import KgqaError
from .llm import CompletionEndpoint
from .model import EvidencePath, Plan, Prediction, QaExample
from .pathfinder import FinderConfig, find_evidence_paths
from .plangen import PlanSource, generate_plans
from .predictor import predict_aggregate, predict_remote
from .retriever import RetrievalConfig, Subgraph, retrieve_subgraph
from .scoring import ScorerBackend
from .store import TripleStore


def answers_match(predicted: str, gold: str, labels: Mapping[str, str] | None = None) -> bool:
    """Exact on id, case-insensitive on label."""
    if predicted == gold:
        return True
    if labels:
        label = labels.get(predicted)
        if label and label.lower() == gold.lower():
            return True
    return False


@dataclass(frozen=True)
class QuestionResult:
    qid: str
    predicted: tuple[str, ...]
    gold: tuple[str, ...]
    hit: bool
    precision: float
    recall: float
    f1: float
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "qid": self.qid,
            "predicted": list(self.predicted),
            "gold": list(self.gold),
            "hit": self.hit,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "error": self.error,
        }


def question_metrics(
    predicted: Sequence[str],
    gold: Sequence[str],
    labels: Mapping[str, str] | None = None,
) -> tuple[bool, float, float, float]:
    """(hit, precision, recall, f1) for one question.

    Both sets empty is vacuously perfect (1.0 across the board); an empty
    prediction against non-empty gold scores zero, and vice versa.
    """
    pred = list(dict.fromkeys(predicted))
    gold_set = list(dict.fromkeys(gold))
    if not pred and not gold_set:
        return False, 1.0, 1.0, 1.0
    if not pred or not gold_set:
        return False, 0.0, 0.0, 0.0
    matched_pred = sum(1 for p in pred if any(answers_match(p, g, labels) for g in gold_set))
    matched_gold = sum(1 for g in gold_set if any(answers_match(p, g, labels) for p in pred))
    precision = matched_pred / len(pred)
    recall = matched_gold / len(gold_set)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    hit = any(answers_match(pred[0], g, labels) for g in gold_set)
    return hit, precision, recall, f1


@dataclass
class EvalReport:
    hits_at_1: float
    f1: float
    precision: float
    recall: float
    per_question: tuple[QuestionResult, ...]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "metrics": {
                "hits_at_1": self.hits_at_1,
                "f1": self.f1,
                "precision": self.precision,
                "recall": self.recall,
                "questions": len(self.per_question),
            },
            "per_question": [q.to_dict() for q in self.per_question],
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        lines = [
            f"{'questions':>12}  {len(self.per_question)}",
            f"{'hits@1':>12}  {self.hits_at_1:.4f}",
            f"{'f1':>12}  {self.f1:.4f}",
            f"{'precision':>12}  {self.precision:.4f}",
            f"{'recall':>12}  {self.recall:.4f}",
        ]
        return "\n".join(lines)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def build_report(results: Sequence[QuestionResult], config: Mapping | None = None) -> EvalReport:
    return EvalReport(
        hits_at_1=_mean([1.0 if r.hit else 0.0 for r in results]),
        f1=_mean([r.f1 for r in results]),
        precision=_mean([r.precision for r in results]),
        recall=_mean([r.recall for r in results]),
        per_question=tuple(results),
        config=dict(config or {}),
    )


@dataclass
class PipelineOutput:
    prediction: Prediction
    paths: list[EvidencePath]
    plans: list[Plan]
    subgraph: Subgraph | None


@dataclass
class Pipeline:
    """The retrieve -> plan -> find -> predict composition, ready to run
    either one ad-hoc question or a whole dataset."""

    store: TripleStore
    backend: ScorerBackend
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    finder: FinderConfig = field(default_factory=FinderConfig)
    plan_source: PlanSource | None = None
    predictor_strategy: str = "aggregate"
    predictor_group: str = "max"
    endpoint: CompletionEndpoint | None = None
    finder_enabled: bool = True

    def _source(self) -> PlanSource:
        return self.plan_source or PlanSource.heuristic(max_len=self.retrieval.depth)

    def run_question(self, question: str, topics: Sequence[str], qid: str | None = None) -> PipelineOutput:
        subgraph = retrieve_subgraph(self.store, question, topics, self.retrieval, self.backend)
        plans = generate_plans(self._source(), question, subgraph, self.finder.s, qid=qid)
        paths: list[EvidencePath] = []
        if self.finder_enabled and plans:
            paths = find_evidence_paths(
                subgraph, question, subgraph.topics, plans, self.finder, self.backend
            )
        prediction = self.predict(question, paths)
        return PipelineOutput(prediction=prediction, paths=paths, plans=plans, subgraph=subgraph)

    def predict(self, question: str, paths: Sequence[EvidencePath]) -> Prediction:
        if self.predictor_strategy == "remote":
            if self.endpoint is None:
                raise KgqaError("remote predictor strategy requires an endpoint")
            return predict_remote(
                question, list(paths), self.endpoint, labels=self.store.labels,
                group=self.predictor_group,
            )
        return predict_aggregate(question, list(paths), group=self.predictor_group)

    def _evaluate_one(self, example: QaExample) -> QuestionResult:
        try:
            output = self.run_question(example.question, example.topic_entities, qid=example.id)
            predicted = tuple(entity for entity, _ in output.prediction.answers)
            error = None
        except KgqaError as exc:
            predicted = ()
            error = str(exc)
        hit, precision, recall, f1 = question_metrics(predicted, example.answers, self.store.labels)
        return QuestionResult(
            qid=example.id,
            predicted=predicted,
            gold=example.answers,
            hit=hit,
            precision=precision,
            recall=recall,
            f1=f1,
            error=error,
        )

    def evaluate(
        self,
        examples: Sequence[QaExample],
        workers: int = 1,
        config_snapshot: Mapping | None = None,
    ) -> EvalReport:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(self._evaluate_one, examples))
        else:
            results = [self._evaluate_one(example) for example in examples]
        return build_report(results, config_snapshot)

    def sweep(
        self,
        examples: Sequence[QaExample],
        s_values: Sequence[int],
        top_s_values: Sequence[int],
        workers: int = 1,
        config_snapshot: Mapping | None = None,
    ) -> "SweepResult":
        """One evaluation per (s, S) cell of the grid."""
        if not s_values or not top_s_values:
            raise ValueError("sweep value lists must be non-empty")
        rows: list[SweepRow] = []
        base_finder = self.finder
        try:
            for s in s_values:
                for top_s in top_s_values:
                    self.finder = FinderConfig(
                        s=s,
                        top_s=top_s,
                        use_plan_weight=base_finder.use_plan_weight,
                        context_cap=base_finder.context_cap,
                    )
                    snapshot = dict(config_snapshot or {})
                    snapshot.update({"finder.s": s, "finder.top_s": top_s})
                    rows.append(SweepRow(s=s, top_s=top_s, report=self.evaluate(examples, workers, snapshot)))
        finally:
            self.finder = base_finder
        return SweepResult(rows=tuple(rows))


@dataclass(frozen=True)
class SweepRow:
    s: int
    top_s: int
    report: EvalReport


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["s", "S", "hits_at_1", "f1", "precision", "recall"])
        for row in self.rows:
            writer.writerow(
                [
                    row.s,
                    row.top_s,
                    f"{row.report.hits_at_1:.6f}",
                    f"{row.report.f1:.6f}",
                    f"{row.report.precision:.6f}",
                    f"{row.report.recall:.6f}",
                ]
            )
        return buffer.getvalue()

    def table(self) -> str:
        lines = [f"{'s':>4} {'S':>4} {'hits@1':>8} {'f1':>8} {'prec':>8} {'recall':>8}"]
        for row in self.rows:
            lines.append(
                f"{row.s:>4} {row.top_s:>4} {row.report.hits_at_1:>8.4f} "
                f"{row.report.f1:>8.4f} {row.report.precision:>8.4f} {row.report.recall:>8.4f}"
            )
        return "\n".join(lines)
