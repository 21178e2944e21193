from __future__ import annotations

from pathlib import Path

import pytest

from fctod_trainer.data import Tokenizer, load_manifest, load_samples

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def exported_samples():
    return load_samples(FIXTURES / "train.jsonl")


@pytest.fixture(scope="session")
def manifest():
    return load_manifest(FIXTURES / "manifest.json")


@pytest.fixture(scope="session")
def tokenizer(exported_samples):
    return Tokenizer.fit(exported_samples)


def tiny_sample(index: int = 0) -> dict:
    return {
        "id": f"D{index:03d}",
        "messages": [
            {"role": "system", "content": "assistant with functions", "loss": 0},
            {"role": "user", "content": f"find me option {index} in the centre", "loss": 0},
            {"role": "domain", "content": "restaurant", "loss": 1},
            {"role": "function",
             "content": '{"name": "restaurant", "argument": {"area": "centre"}}', "loss": 1},
            {"role": "observation", "content": "Found 2 matching entities.", "loss": 0},
            {"role": "assistant",
             "content": f"Action: Recommend\nResponse: try venue {index} .", "loss": 1},
        ],
    }
