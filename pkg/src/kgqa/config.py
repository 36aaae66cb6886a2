"""Run configuration: a flat sectioned key-value file plus dotted overrides.

The file format is INI (``[section]`` headers, ``key = value`` lines).
Every key can be overridden on the command line by a flag of the same
dotted name, e.g. ``--retriever.k 4``.  Unknown sections or keys are
rejected; values are validated before any work starts.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import ConfigError
from .pathfinder import FinderConfig
from .retriever import RetrievalConfig

_UNSET = ""


@dataclass(frozen=True)
class KeySpec:
    kind: str  # int | float | bool | str | optional-int
    default: object
    choices: tuple[str, ...] = ()
    help: str = ""


SCHEMA: dict[str, dict[str, KeySpec]] = {
    "data": {
        "triples": KeySpec("str", _UNSET, help="path to the triple file"),
        "labels": KeySpec("str", _UNSET, help="path to the entity-label TSV"),
        "dataset": KeySpec("str", _UNSET, help="path to the QA dataset JSONL"),
        "format": KeySpec("str", "tsv", choices=("tsv", "ntriples"), help="triple file format"),
    },
    "run": {
        "seed": KeySpec("int", 0, help="seed for any randomised component"),
        "workers": KeySpec("int", 1, help="concurrent per-question workers"),
        "backend": KeySpec("str", "lexical", choices=("lexical", "remote"), help="scorer backend"),
    },
    "retriever": {
        "k": KeySpec("int", 3, help="relations kept per entity per hop"),
        "depth": KeySpec("int", 2, help="expansion iterations"),
        "max_frontier": KeySpec("int", 200, help="cap on frontier entities"),
    },
    "finder": {
        "s": KeySpec("int", 6, help="plans consumed per question"),
        "top_s": KeySpec("int", 3, help="entities kept per hop"),
        "use_plan_weight": KeySpec("bool", True, help="fold plan weight into path scores"),
        "context_cap": KeySpec("int", 20, help="max context triples per entity score"),
        "enabled": KeySpec("bool", True, help="set false to skip path finding entirely"),
        "no_filter": KeySpec("bool", False, help="set true to disable per-hop filtering"),
    },
    "predictor": {
        "strategy": KeySpec("str", "aggregate", choices=("aggregate", "remote")),
        "group": KeySpec("str", "max", choices=("max", "sum")),
    },
    "plans": {
        "source": KeySpec("str", "kg-heuristic", choices=("kg-heuristic", "file", "remote")),
        "file": KeySpec("str", _UNSET, help="plan file for the file source"),
        "max_len": KeySpec("int", 2, help="max plan length for the kg-heuristic source"),
    },
    "train": {
        "t": KeySpec("float", 0.5, help="coverage threshold for valid plans"),
        "max_plan_len": KeySpec("int", 2, help="plan enumeration depth for labelling"),
    },
    "endpoint": {
        "base_url": KeySpec("str", _UNSET),
        "model": KeySpec("str", _UNSET),
        "timeout": KeySpec("float", 30.0),
        "retries": KeySpec("int", 2),
        "concurrency": KeySpec("int", 4),
        "seed": KeySpec("optional-int", None),
        "trace": KeySpec("str", _UNSET, help="JSONL trace file for endpoint calls"),
    },
}


def _coerce(section: str, key: str, raw: str, spec: KeySpec) -> object:
    dotted = f"{section}.{key}"
    text = raw.strip()
    try:
        if spec.kind == "int":
            value: object = int(text)
        elif spec.kind == "optional-int":
            value = int(text) if text else None
        elif spec.kind == "float":
            value = float(text)
        elif spec.kind == "bool":
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                value = True
            elif lowered in ("0", "false", "no", "off"):
                value = False
            else:
                raise ValueError(f"not a boolean: {text!r}")
        else:
            value = text
    except ValueError as exc:
        raise ConfigError(f"{dotted}: {exc}") from exc
    if spec.choices and value not in spec.choices:
        raise ConfigError(f"{dotted}: must be one of {spec.choices}, got {value!r}")
    return value


@dataclass
class RunConfig:
    values: dict[str, object] = field(default_factory=dict)

    def __getitem__(self, dotted: str) -> object:
        return self.values[dotted]

    def get_str(self, dotted: str) -> str:
        return str(self.values[dotted])

    def get_int(self, dotted: str) -> int:
        return int(self.values[dotted])  # type: ignore[arg-type]

    def get_float(self, dotted: str) -> float:
        return float(self.values[dotted])  # type: ignore[arg-type]

    def get_bool(self, dotted: str) -> bool:
        return bool(self.values[dotted])

    def retrieval_config(self) -> RetrievalConfig:
        try:
            return RetrievalConfig(
                k=self.get_int("retriever.k"),
                depth=self.get_int("retriever.depth"),
                max_frontier=self.get_int("retriever.max_frontier"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def finder_config(self) -> FinderConfig:
        try:
            return FinderConfig(
                s=self.get_int("finder.s"),
                top_s=None if self.get_bool("finder.no_filter") else self.get_int("finder.top_s"),
                use_plan_weight=self.get_bool("finder.use_plan_weight"),
                context_cap=self.get_int("finder.context_cap"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def snapshot(self) -> dict[str, object]:
        """Flat dotted-key view for embedding into reports."""
        return dict(sorted(self.values.items()))


def build_config(
    path: str | Path | None = None,
    overrides: Mapping[str, str] | None = None,
) -> RunConfig:
    """Defaults, then the config file, then dotted command-line overrides."""
    values: dict[str, object] = {
        f"{section}.{key}": spec.default
        for section, keys in SCHEMA.items()
        for key, spec in keys.items()
    }

    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            read = parser.read(str(path), encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")
                values[f"{section}.{key}"] = _coerce(section, key, raw, SCHEMA[section][key])

    for dotted, raw in (overrides or {}).items():
        if raw is None:
            continue
        section, _, key = dotted.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config key {dotted}")
        values[dotted] = _coerce(section, key, raw, SCHEMA[section][key])

    _validate(values)
    return RunConfig(values=values)


def _validate(values: Mapping[str, object]) -> None:
    positive = [
        "run.workers",
        "retriever.k",
        "retriever.depth",
        "retriever.max_frontier",
        "finder.s",
        "finder.top_s",
        "finder.context_cap",
        "plans.max_len",
        "train.max_plan_len",
    ]
    for dotted in positive:
        if values[dotted] < 1:  # type: ignore[operator]
            raise ConfigError(f"{dotted} must be >= 1, got {values[dotted]}")
    t = values["train.t"]
    if not 0.0 <= t <= 1.0:  # type: ignore[operator]
        raise ConfigError(f"train.t must be in [0, 1], got {t}")
    if values["run.backend"] == "remote" and not values["endpoint.base_url"]:
        raise ConfigError("run.backend=remote requires endpoint.base_url")
    if values["predictor.strategy"] == "remote" and not values["endpoint.base_url"]:
        raise ConfigError("predictor.strategy=remote requires endpoint.base_url")
    if values["plans.source"] == "remote" and not values["endpoint.base_url"]:
        raise ConfigError("plans.source=remote requires endpoint.base_url")
    if values["plans.source"] == "file" and not values["plans.file"]:
        raise ConfigError("plans.source=file requires plans.file")
