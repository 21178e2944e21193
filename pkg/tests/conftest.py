from __future__ import annotations

import json
from pathlib import Path

import pytest

from fctod.db import load_databases
from fctod.ingest import convert, ingest
from fctod.prompts import TemplateSet, load_action_catalog
from fctod.registry import default_registry

FIXTURES = Path(__file__).parent / "fixtures"
RAW_CORPUS = FIXTURES / "raw_corpus"
GOLDEN = FIXTURES / "golden"


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def db(registry):
    return load_databases(RAW_CORPUS, registry)


@pytest.fixture(scope="session")
def raw_splits():
    return ingest(RAW_CORPUS)


@pytest.fixture(scope="session")
def converted(raw_splits, registry, db):
    return {
        name: [convert(raw, registry, db) for raw in getattr(raw_splits, name)]
        for name in ("train", "dev", "test")
    }


@pytest.fixture(scope="session")
def templates():
    return TemplateSet.bundled()


@pytest.fixture(scope="session")
def action_catalog():
    return load_action_catalog()


@pytest.fixture(scope="session")
def malformed_fixtures():
    return json.loads((FIXTURES / "malformed_completions.json").read_text(encoding="utf-8"))


def golden_text(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")


def golden_json(name: str):
    return json.loads(golden_text(name))
