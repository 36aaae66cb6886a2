"""Command-line entry point exposing every pipeline stage.

Subcommands: answer, retrieve, plans, paths, emit-train, eval, sweep.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 endpoint error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import SCHEMA, RunConfig, build_config
from .errors import ConfigError, DataError, EndpointError, KgqaError
from .evaluation import Pipeline
from .llm import ChatEndpoint, EndpointConfig, RemoteScorer
from .pathfinder import read_paths_file, write_paths_file
from .plangen import PlanSource, generate_plans, write_plan_file
from .predictor import predict_aggregate
from .retriever import Subgraph
from .store import TripleStore, load_dataset, load_labels, load_triples
from .training import emit_find_dataset, emit_reason_dataset


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; this CLI reserves 2 for data errors.
    def error(self, message: str):  # type: ignore[override]
        raise _UsageError(message)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides (dotted names, see --config)")
    for section, keys in SCHEMA.items():
        for key, spec in keys.items():
            group.add_argument(
                f"--{section}.{key}",
                dest=f"cfg::{section}.{key}",
                metavar="VALUE",
                help=spec.help or argparse.SUPPRESS,
            )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgqa", description="Knowledge-graph question answering pipeline")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="path to a sectioned key=value config file")
    common.add_argument("--seed", type=int, help="alias for run.seed")
    common.add_argument("--workers", type=int, help="alias for run.workers")
    common.add_argument("--backend", choices=("lexical", "remote"), help="alias for run.backend")
    common.add_argument("--explain", action="store_true", help="print evidence paths")
    _add_config_flags(common)

    sub = parser.add_subparsers(dest="command", required=True)

    p_answer = sub.add_parser("answer", parents=[common], help="answer one question end to end")
    p_answer.add_argument("question", nargs="?", help="question text")
    p_answer.add_argument("--topics", help="comma-separated topic entity ids")
    p_answer.add_argument("--paths", help="skip the pipeline and predict from a paths JSONL file")

    p_retrieve = sub.add_parser("retrieve", parents=[common], help="write a question-relevant subgraph")
    p_retrieve.add_argument("--question", required=True)
    p_retrieve.add_argument("--topics", required=True)
    p_retrieve.add_argument("--out", required=True)

    p_plans = sub.add_parser("plans", parents=[common], help="write weighted plans for a question")
    p_plans.add_argument("--subgraph", required=True, help="file produced by `retrieve`")
    p_plans.add_argument("--question", help="defaults to the question stored in the subgraph file")
    p_plans.add_argument("--qid", default="adhoc")
    p_plans.add_argument("--out", required=True)

    p_paths = sub.add_parser("paths", parents=[common], help="ground plans as evidence paths")
    p_paths.add_argument("--subgraph", required=True)
    p_paths.add_argument("--plans", required=True, help="file produced by `plans`")
    p_paths.add_argument("--question", help="defaults to the question stored in the subgraph file")
    p_paths.add_argument("--qid", default="adhoc")
    p_paths.add_argument("--out", required=True)

    p_train = sub.add_parser("emit-train", parents=[common], help="emit instruction-tuning datasets")
    p_train.add_argument("--out-dir", required=True)

    p_eval = sub.add_parser("eval", parents=[common], help="evaluate over the configured dataset")
    p_eval.add_argument("--out", help="write the full report JSON here")

    p_sweep = sub.add_parser("sweep", parents=[common], help="grid-evaluate s and S")
    p_sweep.add_argument("--s-values", required=True, help="comma-separated values for finder.s")
    p_sweep.add_argument("--S-values", required=True, dest="top_s_values",
                         help="comma-separated values for finder.top_s")
    p_sweep.add_argument("--out", help="write the grid CSV here")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        name.split("::", 1)[1]: value
        for name, value in vars(args).items()
        if name.startswith("cfg::") and value is not None
    }
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.workers is not None:
        overrides["run.workers"] = str(args.workers)
    if args.backend is not None:
        overrides["run.backend"] = args.backend
    return build_config(args.config, overrides)


def _load_store(cfg: RunConfig) -> TripleStore:
    triples_path = cfg.get_str("data.triples")
    if not triples_path:
        raise ConfigError("data.triples is required")
    labels = load_labels(cfg.get_str("data.labels")) if cfg.get_str("data.labels") else None
    return load_triples(triples_path, cfg.get_str("data.format"), labels)


def _endpoint(cfg: RunConfig) -> ChatEndpoint:
    return ChatEndpoint(
        EndpointConfig(
            base_url=cfg.get_str("endpoint.base_url"),
            model=cfg.get_str("endpoint.model"),
            timeout=cfg.get_float("endpoint.timeout"),
            retries=cfg.get_int("endpoint.retries"),
            concurrency=cfg.get_int("endpoint.concurrency"),
            seed=cfg.values.get("endpoint.seed"),  # type: ignore[arg-type]
            trace_path=cfg.get_str("endpoint.trace") or None,
        )
    )


def _backend(cfg: RunConfig):
    from .scoring import LexicalScorer

    if cfg.get_str("run.backend") == "remote":
        return RemoteScorer(_endpoint(cfg), parse_retries=cfg.get_int("endpoint.retries"))
    return LexicalScorer()


def _plan_source(cfg: RunConfig, store: TripleStore) -> PlanSource:
    kind = cfg.get_str("plans.source")
    if kind == "file":
        return PlanSource.from_file(cfg.get_str("plans.file"))
    if kind == "remote":
        return PlanSource.remote(
            _endpoint(cfg),
            store.relation_vocabulary(),
            max_len=cfg.get_int("plans.max_len"),
            parse_retries=cfg.get_int("endpoint.retries"),
        )
    return PlanSource.heuristic(max_len=cfg.get_int("plans.max_len"))


def _pipeline(cfg: RunConfig, store: TripleStore) -> Pipeline:
    strategy = cfg.get_str("predictor.strategy")
    return Pipeline(
        store=store,
        backend=_backend(cfg),
        retrieval=cfg.retrieval_config(),
        finder=cfg.finder_config(),
        plan_source=_plan_source(cfg, store),
        predictor_strategy=strategy,
        predictor_group=cfg.get_str("predictor.group"),
        endpoint=_endpoint(cfg) if strategy == "remote" else None,
        finder_enabled=cfg.get_bool("finder.enabled"),
    )


def _topics(raw: str | None) -> list[str]:
    topics = [t.strip() for t in (raw or "").split(",") if t.strip()]
    if not topics:
        raise ConfigError("--topics is required (comma-separated entity ids)")
    return topics


def _print_prediction(prediction, explain: bool) -> None:
    if not prediction.answers:
        print("(no answers)")
    for rank, (entity, confidence) in enumerate(prediction.answers, start=1):
        print(f"{rank}. {entity} ({confidence:.6g})")
    if explain:
        print()
        for path in prediction.trace:
            hops = path.steps[0].source
            for step in path.steps:
                hops += f" -[{step.relation} {step.hop_score:.3f}]-> {step.target}"
            print(f"{hops}  score={path.aggregate_score:.6g}")


def _cmd_answer(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.paths:
        paths = read_paths_file(args.paths)
        prediction = predict_aggregate(args.question or "", paths, cfg.get_str("predictor.group"))
        _print_prediction(prediction, args.explain)
        return 0
    if not args.question:
        raise _UsageError("a question is required unless --paths is given")
    store = _load_store(cfg)
    pipeline = _pipeline(cfg, store)
    output = pipeline.run_question(args.question, _topics(args.topics))
    _print_prediction(output.prediction, args.explain)
    return 0


def _cmd_retrieve(args: argparse.Namespace, cfg: RunConfig) -> int:
    store = _load_store(cfg)
    pipeline = _pipeline(cfg, store)
    from .retriever import retrieve_subgraph

    subgraph = retrieve_subgraph(
        store, args.question, _topics(args.topics), cfg.retrieval_config(), pipeline.backend
    )
    Path(args.out).write_text(
        json.dumps(subgraph.to_json(args.question), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {len(subgraph)} triples to {args.out}")
    return 0


def _question_for(args: argparse.Namespace, subgraph_file: str) -> str:
    if args.question:
        return args.question
    obj = json.loads(Path(subgraph_file).read_text(encoding="utf-8"))
    question = obj.get("question")
    if not question:
        raise DataError(f"{subgraph_file} stores no question; pass --question")
    return question


def _cmd_plans(args: argparse.Namespace, cfg: RunConfig) -> int:
    subgraph = Subgraph.load(args.subgraph)
    question = _question_for(args, args.subgraph)
    if cfg.get_str("plans.source") == "file" or cfg.get_str("plans.source") == "remote":
        store = _load_store(cfg)
        source = _plan_source(cfg, store)
    else:
        source = PlanSource.heuristic(max_len=cfg.get_int("plans.max_len"))
    plans = generate_plans(source, question, subgraph, cfg.get_int("finder.s"), qid=args.qid)
    write_plan_file({args.qid: plans}, args.out)
    print(f"wrote {len(plans)} plans to {args.out}")
    return 0


def _cmd_paths(args: argparse.Namespace, cfg: RunConfig) -> int:
    from .pathfinder import find_evidence_paths
    from .plangen import load_plan_file

    subgraph = Subgraph.load(args.subgraph)
    question = _question_for(args, args.subgraph)
    plans_by_id = load_plan_file(args.plans)
    if args.qid not in plans_by_id:
        raise DataError(f"plan file has no entry for question id {args.qid!r}")
    plans = list(plans_by_id[args.qid])
    if not plans:
        write_paths_file([], args.out)
        print(f"wrote 0 paths to {args.out}")
        return 0
    backend = _backend(cfg)
    paths = find_evidence_paths(
        subgraph, question, subgraph.topics, plans, cfg.finder_config(), backend
    )
    write_paths_file(paths, args.out)
    print(f"wrote {len(paths)} paths to {args.out}")
    return 0


def _cmd_emit_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    store = _load_store(cfg)
    dataset_path = cfg.get_str("data.dataset")
    if not dataset_path:
        raise ConfigError("data.dataset is required for emit-train")
    examples = load_dataset(dataset_path)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    find_stats = emit_find_dataset(
        examples, store, cfg.get_float("train.t"), cfg.get_int("train.max_plan_len"),
        out_dir / "find.jsonl",
    )
    pipeline = _pipeline(cfg, store)
    paths_per_example = []
    for example in examples:
        try:
            output = pipeline.run_question(example.question, example.topic_entities, qid=example.id)
            paths_per_example.append(output.paths)
        except KgqaError:
            paths_per_example.append([])
    reason_stats = emit_reason_dataset(examples, paths_per_example, out_dir / "reason.jsonl")

    print(f"find: {find_stats.written} written, {find_stats.skipped} skipped")
    print(f"reason: {reason_stats.written} written, {reason_stats.skipped} skipped")
    return 0


def _cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> int:
    store = _load_store(cfg)
    dataset_path = cfg.get_str("data.dataset")
    if not dataset_path:
        raise ConfigError("data.dataset is required for eval")
    examples = load_dataset(dataset_path)
    pipeline = _pipeline(cfg, store)
    report = pipeline.evaluate(examples, cfg.get_int("run.workers"), cfg.snapshot())
    print(report.table())
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
        print(f"report written to {args.out}")
    return 0


def _int_list(raw: str, flag: str) -> list[int]:
    try:
        values = [int(v.strip()) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise _UsageError(f"{flag} expects comma-separated integers: {exc}")
    if not values:
        raise _UsageError(f"{flag} must list at least one value")
    return values


def _cmd_sweep(args: argparse.Namespace, cfg: RunConfig) -> int:
    store = _load_store(cfg)
    dataset_path = cfg.get_str("data.dataset")
    if not dataset_path:
        raise ConfigError("data.dataset is required for sweep")
    examples = load_dataset(dataset_path)
    pipeline = _pipeline(cfg, store)
    result = pipeline.sweep(
        examples,
        _int_list(args.s_values, "--s-values"),
        _int_list(args.top_s_values, "--S-values"),
        cfg.get_int("run.workers"),
        cfg.snapshot(),
    )
    print(result.table())
    if args.out:
        Path(args.out).write_text(result.to_csv(), encoding="utf-8")
        print(f"csv written to {args.out}")
    return 0


_COMMANDS = {
    "answer": _cmd_answer,
    "retrieve": _cmd_retrieve,
    "plans": _cmd_plans,
    "paths": _cmd_paths,
    "emit-train": _cmd_emit_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config_from_args(args)
        return _COMMANDS[args.command](args, cfg)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except EndpointError as exc:
        print(f"endpoint error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except KgqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
