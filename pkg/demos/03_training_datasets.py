"""Label plans by answer coverage and emit the two instruction datasets.

The find dataset teaches a generator to propose faithful plans (those whose
retrieved entities are mostly gold answers); the reason dataset pairs the
predictor's exact prompt with the gold answers.
"""
import json
import tempfile
from pathlib import Path

from kgqa import FinderConfig, LexicalScorer, Plan, find_evidence_paths, label_plans
from kgqa.fixtures import load_nato_store, nato_question
from kgqa.retriever import Subgraph
from kgqa.training import emit_find_dataset, emit_reason_dataset

store = load_nato_store()
example = nato_question()

candidates = [
    Plan(("organization.headquarters", "mailing_address.citytown")),
    Plan(("organizations_founded", "administrative_divisions")),
    Plan(("organizations_founded",)),
]
print("coverage labelling (threshold t = 0.5):")
for labelled in label_plans(store, example, candidates, t=0.5):
    flag = "valid" if labelled.valid else "invalid"
    print(f"   {flag:7s} coverage={labelled.coverage:.2f}  {list(labelled.plan.relations)}")

out_dir = Path(tempfile.mkdtemp(prefix="kgqa-train-"))
find_stats = emit_find_dataset([example], store, t=0.5, max_len=2, out=out_dir / "find.jsonl")
print(f"\nfind dataset: {find_stats.written} written, {find_stats.skipped} skipped")
record = json.loads((out_dir / "find.jsonl").read_text().splitlines()[0])
print("   completion:")
for line in record["completion"].splitlines():
    print("     ", line)

subgraph = Subgraph(store.triples, example.topic_entities, labels=store.labels)
paths = find_evidence_paths(
    subgraph, example.question, example.topic_entities,
    [Plan(("organization.headquarters", "mailing_address.citytown"), weight=1.0)],
    FinderConfig(), LexicalScorer(),
)
reason_stats = emit_reason_dataset([example], [paths], out_dir / "reason.jsonl")
print(f"\nreason dataset: {reason_stats.written} written, {reason_stats.skipped} skipped")
record = json.loads((out_dir / "reason.jsonl").read_text().splitlines()[0])
print("   completion:", record["completion"])
print(f"\nfiles under {out_dir}")
