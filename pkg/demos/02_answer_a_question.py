"""Answer one question end to end, stage by stage.

Retrieval keeps the top-K question-relevant relations per entity, the plan
generator proposes weighted relation chains, the path finder grounds them
with per-hop scores, and the predictor ranks the path terminals.
"""
from kgqa import (
    FinderConfig,
    LexicalScorer,
    PlanSource,
    RetrievalConfig,
    find_evidence_paths,
    generate_plans,
    predict_aggregate,
    retrieve_subgraph,
)
from kgqa.fixtures import load_nato_store, nato_question

store = load_nato_store()
example = nato_question()
backend = LexicalScorer()
print("question:", example.question)
print("topics:  ", list(example.topic_entities), "\n")

subgraph = retrieve_subgraph(
    store, example.question, example.topic_entities, RetrievalConfig(k=2, depth=2), backend
)
print(f"stage 1 — retrieved subgraph: {len(subgraph)} triples")
for record in subgraph.frontier_history:
    chosen = ", ".join(f"{label} ({score:.2f})" for label, score in record.chosen)
    print(f"   iter {record.iteration}: {record.entity} -> {chosen or '(dead end)'}")

plans = generate_plans(PlanSource.heuristic(max_len=2), example.question, subgraph, s=6)
print(f"\nstage 2 — {len(plans)} weighted plans:")
for plan in plans:
    print(f"   w={plan.weight:.4f}  {list(plan.relations)}")

paths = find_evidence_paths(
    subgraph, example.question, subgraph.topics, plans, FinderConfig(top_s=3), backend
)
print(f"\nstage 3 — {len(paths)} evidence paths:")
for path in paths:
    hops = " * ".join(f"{s:.3f}" for s in path.hop_scores)
    print(f"   {path.arrow_chain()}   hops [{hops}]  score={path.aggregate_score:.6f}")

prediction = predict_aggregate(example.question, paths)
print("\nstage 4 — ranked answers:")
for rank, (entity, confidence) in enumerate(prediction.answers, start=1):
    print(f"   {rank}. {entity}  ({confidence:.6f})")
print("\ngold answers:", list(example.answers))
