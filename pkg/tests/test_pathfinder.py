from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgqa.model import EvidencePath, PathStep, Plan
from kgqa.pathfinder import (
    FinderConfig,
    aggregate_score,
    build_context,
    find_evidence_paths,
    induce_path_tree,
    read_paths_file,
    write_paths_file,
)
from kgqa.retriever import Subgraph
from kgqa.scoring import ConstantScorer, LexicalScorer
from kgqa.store import execute_plan

from _synth import random_store, random_walk_plan, walk_chains_oracle

NATO_QUESTION = "Where are the NATO headquarters located?"
HQ_PLAN = Plan(("organization.headquarters", "mailing_address.citytown"), weight=1.0)


def subgraph_of(store, topics) -> Subgraph:
    return Subgraph(store.triples, topics, labels=store.labels)


# ---------------------------------------------------------------------------
# aggregate_score

def test_aggregate_score_examples():
    assert aggregate_score([0.9, 0.8]) == pytest.approx(0.72, abs=1e-9)
    assert aggregate_score([]) == 1.0
    assert aggregate_score([0.5, 0.5], plan_weight=0.6, include_plan_weight=True) == pytest.approx(
        0.15, abs=1e-9
    )
    assert aggregate_score([0.5, 0.5], plan_weight=0.6) == pytest.approx(0.25, abs=1e-9)


def test_aggregate_score_rejects_out_of_range():
    with pytest.raises(ValueError):
        aggregate_score([1.2])
    with pytest.raises(ValueError):
        aggregate_score([0.5], plan_weight=-0.1)


@settings(max_examples=100, deadline=None)
@given(
    scores=st.lists(st.floats(min_value=0.0, max_value=1.0), max_size=6),
    weight=st.floats(min_value=0.0, max_value=1.0),
    flag=st.booleans(),
)
def test_aggregate_score_bounded_by_min(scores, weight, flag):
    value = aggregate_score(scores, weight, flag)
    assert 0.0 <= value <= 1.0
    if scores:
        assert value <= min(scores) + 1e-12


# ---------------------------------------------------------------------------
# induce_path_tree

def test_path_tree_layers_on_fixture(nato_subgraph):
    layers = induce_path_tree(nato_subgraph, "NATO", HQ_PLAN)
    assert layers == [{"NATO"}, {"m.04300hm"}, {"Brussels"}]


def test_path_tree_zero_length_plan(nato_subgraph):
    assert induce_path_tree(nato_subgraph, "NATO", ()) == [{"NATO"}]


def test_path_tree_equals_execute_plan_prefixes():
    for seed in range(10):
        rng = random.Random(seed)
        store = random_store(rng, n_entities=15, n_triples=35)
        topic, plan = random_walk_plan(rng, store, 3)
        subgraph = subgraph_of(store, [topic])
        layers = induce_path_tree(subgraph, topic, plan)
        for i in range(len(plan.relations) + 1):
            assert layers[i] == execute_plan(store, {topic}, plan.relations[:i])


# ---------------------------------------------------------------------------
# find_evidence_paths

def test_fixture_path_scores_frozen(nato_subgraph, lexical):
    # Hop 1 (m.04300hm): context carries {nato, headquarters} of the 6
    # question tokens -> 1/3.  Hop 2 (Brussels): the plan's relation text
    # carries {headquarters} -> 1/6.  Aggregate = product (weight 1.0).
    paths = find_evidence_paths(
        nato_subgraph, NATO_QUESTION, ["NATO"], [HQ_PLAN], FinderConfig(top_s=3), lexical
    )
    assert len(paths) == 1
    path = paths[0]
    assert path.chain == ("NATO", "m.04300hm", "Brussels")
    assert path.relations == HQ_PLAN.relations
    assert path.hop_scores[0] == pytest.approx(1 / 3)
    assert path.hop_scores[1] == pytest.approx(1 / 6)
    assert path.aggregate_score == pytest.approx(1 / 18)


def test_dead_plan_contributes_nothing(nato_subgraph, lexical):
    plans = [Plan(("mailing_address.citytown",), weight=1.0)]
    assert find_evidence_paths(
        nato_subgraph, NATO_QUESTION, ["NATO"], plans, FinderConfig(), lexical
    ) == []


def test_validates_preconditions(nato_subgraph, lexical):
    with pytest.raises(ValueError):
        find_evidence_paths(nato_subgraph, "q", [], [HQ_PLAN], FinderConfig(), lexical)
    with pytest.raises(ValueError):
        find_evidence_paths(nato_subgraph, "q", ["NATO"], [], FinderConfig(), lexical)


def test_unbounded_uniform_find_matches_walk_enumeration():
    for seed in range(10):
        rng = random.Random(700 + seed)
        store = random_store(rng, n_entities=40, n_relations=5, n_triples=70)
        topic, plan = random_walk_plan(rng, store, 3)
        subgraph = subgraph_of(store, [topic])
        paths = find_evidence_paths(
            subgraph,
            "ignored",
            [topic],
            [plan],
            FinderConfig(top_s=None, use_plan_weight=False),
            ConstantScorer(),
        )
        expected = walk_chains_oracle(store.triples, {topic}, plan.relations)
        assert {p.chain for p in paths} == expected


def branching_subgraph() -> Subgraph:
    # topic -> m1..m5 -> leaf; entity names steer lexical hop scores.
    triples = [("topic", "linksto", f"branch_{name}") for name in "abcde"]
    triples += [(f"branch_{name}", "points", f"leaf_{name}") for name in "abcde"]
    return Subgraph.from_json({"topics": ["topic"], "triples": triples, "labels": {}})


def test_width_bound_keeps_exactly_top_s():
    subgraph = branching_subgraph()
    question = "find branch a b?"  # tokens: find/branch/a/b -> a,b outrank c,d,e
    plan = Plan(("linksto", "points"), weight=1.0)
    paths = find_evidence_paths(
        subgraph, question, ["topic"], [plan], FinderConfig(top_s=2, use_plan_weight=False),
        LexicalScorer(),
    )
    hop1 = {p.chain[1] for p in paths}
    assert hop1 == {"branch_a", "branch_b"}
    assert len({p.chain[2] for p in paths}) <= 2


def test_s_monotone_path_sets():
    subgraph = branching_subgraph()
    question = "find branch a b c?"
    plan = Plan(("linksto", "points"), weight=1.0)
    previous: set = set()
    for top_s in (1, 2, 3, 4, 5):
        paths = find_evidence_paths(
            subgraph, question, ["topic"], [plan],
            FinderConfig(top_s=top_s, use_plan_weight=False), LexicalScorer(),
        )
        chains = {p.chain for p in paths}
        assert previous <= chains
        previous = chains


def test_plan_count_monotone_chain_union():
    store = random_store(random.Random(31), n_entities=20, n_triples=50)
    rng = random.Random(32)
    topic, _ = random_walk_plan(rng, store, 1)
    subgraph = subgraph_of(store, [topic])
    plans = []
    seen_relations = set()
    while len(plans) < 5:
        _, plan = random_walk_plan(rng, store, 2)
        if plan.relations not in seen_relations:
            seen_relations.add(plan.relations)
            plans.append(Plan(plan.relations, weight=1.0 - 0.1 * len(plans)))
    previous: set = set()
    for s in (1, 2, 3, 4, 5):
        paths = find_evidence_paths(
            subgraph, "q", [topic], plans, FinderConfig(s=s, top_s=None), ConstantScorer()
        )
        chains = {p.chain for p in paths}
        assert previous <= chains
        previous = chains


def test_prefix_conformance_and_truncation_to_s():
    rng = random.Random(77)
    store = random_store(rng, n_entities=18, n_triples=45)
    topic, plan_a = random_walk_plan(rng, store, 2)
    _, plan_b = random_walk_plan(rng, store, 2)
    plans = [Plan(plan_a.relations, weight=0.3), Plan(plan_b.relations, weight=0.9)]
    subgraph = subgraph_of(store, [topic])
    paths = find_evidence_paths(
        subgraph, "q", [topic], plans, FinderConfig(s=1, top_s=None), ConstantScorer()
    )
    # only the heavier plan (index 1) is consumed
    for path in paths:
        assert path.origin_plan == 1
        assert path.relations == plan_b.relations


def test_duplicate_grounding_keeps_best_score():
    subgraph = Subgraph.from_json(
        {"topics": ["a"], "triples": [["a", "r", "b"]], "labels": {}}
    )
    plans = [Plan(("r",), weight=0.2), Plan(("r",), weight=0.8)]
    paths = find_evidence_paths(
        subgraph, "q", ["a"], plans, FinderConfig(use_plan_weight=True), ConstantScorer()
    )
    assert len(paths) == 1
    assert paths[0].aggregate_score == pytest.approx(0.8)
    assert paths[0].origin_plan == 1


def test_output_sorted_by_score_then_chain():
    subgraph = branching_subgraph()
    plan = Plan(("linksto",), weight=1.0)
    paths = find_evidence_paths(
        subgraph, "branch c?", ["topic"], [plan], FinderConfig(top_s=None), LexicalScorer()
    )
    keys = [(-p.aggregate_score, p.arrow_chain()) for p in paths]
    assert keys == sorted(keys)


def test_build_context_caps_by_relevance():
    triples = [("hub", f"rel{i}", f"t{i}") for i in range(30)]
    triples.append(("hub", "special", "golden answer"))
    subgraph = Subgraph.from_json({"topics": ["hub"], "triples": triples, "labels": {}})
    context = build_context(subgraph, "golden answer?", "hub", cap=5)
    assert len(context) == 5
    assert any(t.tail == "golden answer" for t in context)


def test_paths_file_round_trip(tmp_path, nato_subgraph, lexical):
    paths = find_evidence_paths(
        nato_subgraph, NATO_QUESTION, ["NATO"], [HQ_PLAN], FinderConfig(), lexical
    )
    target = tmp_path / "paths.jsonl"
    assert write_paths_file(paths, target) == len(paths)
    assert read_paths_file(target) == paths


def test_config_validation():
    with pytest.raises(ValueError):
        FinderConfig(s=0)
    with pytest.raises(ValueError):
        FinderConfig(top_s=0)
    with pytest.raises(ValueError):
        FinderConfig(context_cap=0)
    assert FinderConfig(top_s=None).top_s is None


def test_evidence_path_invariants():
    step = PathStep("a", "r", "b", 0.5)
    with pytest.raises(ValueError):
        EvidencePath(steps=(), aggregate_score=1.0)
    with pytest.raises(ValueError):
        EvidencePath(steps=(step, PathStep("c", "r", "d", 0.5)), aggregate_score=0.25)
    path = EvidencePath(steps=(step, PathStep("b", "q", "c", 0.2)), aggregate_score=0.1)
    assert path.terminal == "c"
    assert path.arrow_chain() == "a -> r -> b -> q -> c"
