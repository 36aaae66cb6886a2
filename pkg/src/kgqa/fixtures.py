"""Bundled miniature knowledge graph for docs, demos and tests.

Four triples around NATO: a two-hop chain to Brussels through an unlabelled
address node, and a two-hop chain to Oslo through Norway.  One bundled
question ("Where are the NATO headquarters located?") exercises the whole
pipeline in well under a second.
"""
from __future__ import annotations

from importlib.resources import files
from pathlib import Path

from .model import QaExample
from .store import TripleStore, load_dataset, load_labels, load_triples


def _data_path(name: str) -> Path:
    return Path(str(files("kgqa") / "data" / "nato" / name))


def nato_triples_path() -> Path:
    return _data_path("triples.tsv")


def nato_labels_path() -> Path:
    return _data_path("labels.tsv")


def nato_dataset_path() -> Path:
    return _data_path("questions.jsonl")


def load_nato_store() -> TripleStore:
    return load_triples(nato_triples_path(), "tsv", load_labels(nato_labels_path()))


def load_nato_dataset() -> list[QaExample]:
    return load_dataset(nato_dataset_path())


def nato_question() -> QaExample:
    return load_nato_dataset()[0]
