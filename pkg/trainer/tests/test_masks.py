from __future__ import annotations

import json

import pytest

from conftest import tiny_sample
from fctod_trainer.data import DataError, Tokenizer, load_manifest, load_samples, words
from fctod_trainer.masks import build_token_masks, encode_sample, supervised_token_count


@pytest.fixture
def sample():
    return tiny_sample()


@pytest.fixture
def tok(sample):
    return Tokenizer.fit([sample])


def test_all_weight_zero_sample_gives_all_zero_mask(tok):
    unsupervised = {
        "id": "Z",
        "messages": [
            {"role": "system", "content": "assistant with functions", "loss": 0},
            {"role": "user", "content": "find me option 1", "loss": 0},
            {"role": "observation", "content": "Found 2 matching entities.", "loss": 0},
        ],
    }
    assert set(build_token_masks(unsupervised, tok)) == {0}


def test_single_assistant_message_mask_covers_exactly_its_tokens(tok):
    content = "Action: Recommend\nResponse: try venue 0 ."
    sample = {
        "id": "S",
        "messages": [
            {"role": "system", "content": "assistant with functions", "loss": 0},
            {"role": "assistant", "content": content, "loss": 1},
        ],
    }
    mask = build_token_masks(sample, tok)
    # offsets derived from segment token counts: header(1) content(n) end(1)
    system_tokens = len(words("assistant with functions"))
    content_tokens = len(words(content))
    start = 1 + system_tokens + 1 + 1  # system header+content+end, assistant header
    expected = [0] * start + [1] * content_tokens + [0]
    assert mask == expected
    assert sum(mask) == content_tokens


def test_mask_sum_equals_weight_one_content_token_counts(sample, tok):
    expected = sum(
        len(words(m["content"])) for m in sample["messages"] if m["loss"] == 1
    )
    assert supervised_token_count(sample, tok) == expected


def test_scaffolding_tokens_are_never_supervised(sample, tok):
    ids, roles = encode_sample(sample, tok)
    header_ids = {tok.vocab[f"<|{r}|>"] for r in
                  ("system", "user", "domain", "function", "observation", "assistant")}
    header_ids.add(tok.vocab["<|end|>"])
    for token_id, role in zip(ids, roles):
        if token_id in header_ids:
            assert role is None


def test_encode_is_deterministic(sample, tok):
    assert encode_sample(sample, tok) == encode_sample(sample, tok)


def test_mask_roles_follow_message_roles(sample, tok):
    _, roles = encode_sample(sample, tok)
    assert {"domain", "function", "assistant"} == {r for r in roles if r is not None}


def test_placeholders_tokenize_atomically():
    assert words("call [value_phone] now") == ["call", "[value_phone]", "now"]
    assert words("<|assistant|> hi") == ["<|assistant|>", "hi"]


# export-file loading


def test_load_samples_round_trip(exported_samples):
    assert len(exported_samples) == 10
    for sample in exported_samples:
        roles = [m["role"] for m in sample["messages"]]
        assert roles[0] == "system"
        assert set(m["loss"] for m in sample["messages"]) <= {0, 1}


def test_load_samples_rejects_unknown_role(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"id": "x", "messages": [{"role": "narrator", "content": "", "loss": 0}]}) + "\n")
    with pytest.raises(DataError, match="unknown role"):
        load_samples(bad)


def test_load_samples_rejects_bad_loss(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"id": "x", "messages": [{"role": "user", "content": "", "loss": 2}]}) + "\n")
    with pytest.raises(DataError, match="loss"):
        load_samples(bad)


def test_load_samples_rejects_empty_file(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(DataError, match="no samples"):
        load_samples(empty)


def test_manifest_requires_training_fields(tmp_path, manifest):
    assert manifest["lora_rank"] == 32 and manifest["lora_alpha"] == 16
    partial = tmp_path / "manifest.json"
    partial.write_text(json.dumps({"lora_rank": 32}))
    with pytest.raises(DataError, match="missing fields"):
        load_manifest(partial)
