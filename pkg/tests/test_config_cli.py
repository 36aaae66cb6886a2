from __future__ import annotations

import json

import pytest

from kgqa import fixtures
from kgqa.cli import main
from kgqa.config import build_config
from kgqa.errors import ConfigError


def nato_flags() -> list[str]:
    return [
        "--data.triples", str(fixtures.nato_triples_path()),
        "--data.labels", str(fixtures.nato_labels_path()),
        "--retriever.k", "2",
        "--retriever.depth", "2",
    ]


def nato_dataset_flags() -> list[str]:
    return nato_flags() + ["--data.dataset", str(fixtures.nato_dataset_path())]


NATO_QUESTION = "Where are the NATO headquarters located?"


# ---------------------------------------------------------------------------
# config

def test_defaults_and_file_and_overrides(tmp_path):
    config_file = tmp_path / "run.ini"
    config_file.write_text("[retriever]\nk = 5\n\n[finder]\nuse_plan_weight = false\n")
    cfg = build_config(config_file, {"retriever.depth": "4"})
    assert cfg.get_int("retriever.k") == 5
    assert cfg.get_int("retriever.depth") == 4
    assert cfg.get_bool("finder.use_plan_weight") is False
    assert cfg.get_int("finder.s") == 6  # untouched default


def test_unknown_key_rejected(tmp_path):
    config_file = tmp_path / "run.ini"
    config_file.write_text("[retriever]\nkay = 5\n")
    with pytest.raises(ConfigError):
        build_config(config_file)
    with pytest.raises(ConfigError):
        build_config(None, {"retriever.kay": "5"})
    config_file.write_text("[mystery]\nk = 5\n")
    with pytest.raises(ConfigError):
        build_config(config_file)


def test_bad_values_rejected():
    with pytest.raises(ConfigError):
        build_config(None, {"retriever.k": "zero"})
    with pytest.raises(ConfigError):
        build_config(None, {"retriever.k": "0"})
    with pytest.raises(ConfigError):
        build_config(None, {"train.t": "1.5"})
    with pytest.raises(ConfigError):
        build_config(None, {"run.backend": "psychic"})
    with pytest.raises(ConfigError):
        build_config(None, {"run.backend": "remote"})  # needs endpoint.base_url
    with pytest.raises(ConfigError):
        build_config(None, {"plans.source": "file"})  # needs plans.file


def test_missing_config_file_rejected(tmp_path):
    with pytest.raises(ConfigError):
        build_config(tmp_path / "nope.ini")


def test_no_filter_flag_maps_to_unbounded_top_s():
    cfg = build_config(None, {"finder.no_filter": "true"})
    assert cfg.finder_config().top_s is None
    cfg = build_config(None, {"finder.no_filter": "false"})
    assert cfg.finder_config().top_s == 3


def test_snapshot_is_sorted_flat_view():
    snapshot = build_config(None).snapshot()
    assert list(snapshot) == sorted(snapshot)
    assert snapshot["retriever.k"] == 3


# ---------------------------------------------------------------------------
# CLI

def test_cmd_answer_fixture_rank_one_brussels(capsys):
    code = main(["answer", NATO_QUESTION, "--topics", "NATO", *nato_flags()])
    assert code == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("1. Brussels")


def test_cmd_answer_explain_one_line_per_path(capsys):
    code = main(["answer", NATO_QUESTION, "--topics", "NATO", "--explain", *nato_flags()])
    assert code == 0
    out = capsys.readouterr().out
    explain_lines = [line for line in out.splitlines() if "score=" in line]
    assert len(explain_lines) == 2  # Brussels and Oslo paths
    for line in explain_lines:
        assert line.rstrip().split("score=")[-1]  # trailing score present


def test_cmd_answer_unknown_topic_exits_2(capsys):
    code = main(["answer", NATO_QUESTION, "--topics", "Atlantis", *nato_flags()])
    assert code == 2
    assert "Atlantis" in capsys.readouterr().err


def test_cmd_answer_missing_question_is_usage_error(capsys):
    assert main(["answer", "--topics", "NATO", *nato_flags()]) == 1


def test_cmd_answer_requires_triples(capsys):
    assert main(["answer", "q", "--topics", "a"]) == 1
    assert "data.triples" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["answer", "q", "--nonsense"]) == 1


def test_cmd_eval_fixture(tmp_path, capsys):
    report_file = tmp_path / "report.json"
    code = main(["eval", *nato_dataset_flags(), "--out", str(report_file)])
    assert code == 0
    report = json.loads(report_file.read_text())
    assert report["metrics"]["hits_at_1"] == 1.0
    assert report["config"]["retriever.k"] == 2


def test_cmd_eval_determinism(tmp_path):
    out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["eval", *nato_dataset_flags(), "--out", str(out_a)]) == 0
    assert main(["eval", *nato_dataset_flags(), "--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_cmd_sweep_csv(tmp_path, capsys):
    csv_file = tmp_path / "grid.csv"
    code = main(
        ["sweep", *nato_dataset_flags(), "--s-values", "1,2", "--S-values", "2,3",
         "--out", str(csv_file)]
    )
    assert code == 0
    lines = csv_file.read_text().strip().splitlines()
    assert lines[0] == "s,S,hits_at_1,f1,precision,recall"
    assert len(lines) == 5


def test_cmd_sweep_bad_values_usage_error(capsys):
    assert main(["sweep", *nato_dataset_flags(), "--s-values", "x", "--S-values", "1"]) == 1


def test_cmd_emit_train_counts(tmp_path, capsys):
    code = main(["emit-train", *nato_dataset_flags(), "--out-dir", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "find: 1 written, 0 skipped" in out
    assert "reason: 1 written, 0 skipped" in out
    assert (tmp_path / "find.jsonl").exists()
    assert (tmp_path / "reason.jsonl").exists()


def test_staged_pipeline_matches_answer(tmp_path, capsys):
    subgraph_file = tmp_path / "subgraph.json"
    plans_file = tmp_path / "plans.jsonl"
    paths_file = tmp_path / "paths.jsonl"

    assert main(["retrieve", "--question", NATO_QUESTION, "--topics", "NATO",
                 "--out", str(subgraph_file), *nato_flags()]) == 0
    assert main(["plans", "--subgraph", str(subgraph_file),
                 "--out", str(plans_file), *nato_flags()]) == 0
    assert main(["paths", "--subgraph", str(subgraph_file), "--plans", str(plans_file),
                 "--out", str(paths_file), *nato_flags()]) == 0
    capsys.readouterr()

    assert main(["answer", "--paths", str(paths_file), *nato_flags()]) == 0
    staged = capsys.readouterr().out

    assert main(["answer", NATO_QUESTION, "--topics", "NATO", *nato_flags()]) == 0
    direct = capsys.readouterr().out
    assert staged == direct
    assert staged.splitlines()[0].startswith("1. Brussels")


def test_cmd_paths_missing_qid_is_data_error(tmp_path, capsys):
    subgraph_file = tmp_path / "subgraph.json"
    plans_file = tmp_path / "plans.jsonl"
    assert main(["retrieve", "--question", NATO_QUESTION, "--topics", "NATO",
                 "--out", str(subgraph_file), *nato_flags()]) == 0
    assert main(["plans", "--subgraph", str(subgraph_file), "--qid", "other",
                 "--out", str(plans_file), *nato_flags()]) == 0
    code = main(["paths", "--subgraph", str(subgraph_file), "--plans", str(plans_file),
                 "--qid", "missing", "--out", str(tmp_path / "p.jsonl"), *nato_flags()])
    assert code == 2


def test_endpoint_failure_exits_3(capsys, monkeypatch):
    import kgqa.llm as llm_module

    def refuse(*args, **kwargs):
        raise llm_module.requests.ConnectionError("nope")

    monkeypatch.setattr(llm_module.requests, "post", refuse)
    code = main(
        ["answer", NATO_QUESTION, "--topics", "NATO", *nato_flags(),
         "--backend", "remote",
         "--endpoint.base_url", "http://localhost:1/v1",
         "--endpoint.model", "m",
         "--endpoint.retries", "0"]
    )
    assert code == 3


def test_seed_workers_backend_aliases():
    cfg = build_config(None, {})
    assert cfg.get_int("run.seed") == 0
    code_cfg = build_config(None, {"run.seed": "7", "run.workers": "2"})
    assert code_cfg.get_int("run.seed") == 7
    assert code_cfg.get_int("run.workers") == 2
