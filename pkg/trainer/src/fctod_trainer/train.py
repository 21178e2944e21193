"""Loss-masked adapter training loop.

The composite objective sums the three per-role losses (domain selection,
function-call generation, response generation). Each per-role loss is that
role's summed next-token cross entropy divided by the total supervised token
count, so the composite equals the overall masked mean exactly and the
additivity check is directly testable.

Smoke mode (tiny model, a handful of samples, tens of steps) runs on CPU in
seconds; full-size fine-tuning uses the same loop with a bigger base model.
"""

from __future__ import annotations

import argparse
import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import torch
from torch import nn

from .data import DataError, Tokenizer, load_manifest, load_samples
from .masks import encode_sample
from .model import (
    TinyCausalLM,
    adapter_parameters,
    adapter_state_dict,
    apply_low_rank_adapters,
)

ROLE_TO_LOSS = {"domain": "fs", "function": "fc", "assistant": "rg"}


@dataclass
class TrainerConfig:
    """Mirrors the export manifest defaults; overridable per run."""

    lora_rank: int = 32
    lora_alpha: int = 16
    target_modules: tuple[str, ...] = ("q_proj", "v_proj")
    epochs: int = 4
    learning_rate: float = 3e-4
    batch_size: int = 8
    context_limit: int = 4096
    role_loss_weights: dict = field(
        default_factory=lambda: {"domain": 1.0, "function": 1.0, "assistant": 1.0}
    )
    base_model: str = "tiny-causal-lm"
    d_model: int = 64
    n_heads: int = 2
    n_layers: int = 2
    out_dir: str = "adapter_out"
    seed: int = 0
    max_steps: Optional[int] = None
    eval_every: int = 10

    @classmethod
    def from_manifest(cls, manifest: dict, **overrides) -> "TrainerConfig":
        kwargs = {
            "lora_rank": manifest["lora_rank"],
            "lora_alpha": manifest["lora_alpha"],
            "target_modules": tuple(manifest["target_modules"]),
            "epochs": manifest["epochs"],
            "learning_rate": manifest["learning_rate"],
            "batch_size": manifest["batch_size"],
            "context_limit": manifest["context_limit"],
            "role_loss_weights": dict(manifest.get("role_loss_weights", {})) or None,
        }
        if kwargs["role_loss_weights"] is None:
            kwargs.pop("role_loss_weights")
        kwargs.update(overrides)
        return cls(**kwargs)


@dataclass
class TrainResult:
    steps: int
    checkpoints: list  # [(step, masked loss), ...]
    final_losses: dict  # {"total", "fs", "fc", "rg"}
    adapter_path: str
    log_path: str


def _encode_dataset(samples, tokenizer, context_limit):
    encoded = []
    for sample in samples:
        ids, roles = encode_sample(sample, tokenizer)
        encoded.append((ids[:context_limit], roles[:context_limit]))
    return encoded


def _batchify(encoded, batch_size, pad_id, rng):
    order = list(range(len(encoded)))
    rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = [encoded[i] for i in order[start : start + batch_size]]
        length = max(len(ids) for ids, _ in chunk)
        ids = torch.full((len(chunk), length), pad_id, dtype=torch.long)
        roles = [[None] * length for _ in chunk]
        for row, (sample_ids, sample_roles) in enumerate(chunk):
            ids[row, : len(sample_ids)] = torch.tensor(sample_ids, dtype=torch.long)
            roles[row][: len(sample_roles)] = sample_roles
        yield ids, roles


def compute_masked_losses(
    model: nn.Module,
    ids: torch.Tensor,
    roles: list,
    role_weights: Optional[dict] = None,
) -> dict:
    """Composite loss plus per-role components on one batch.

    Targets are the supervised tokens (positions whose mask role is set);
    the model predicts token t from positions < t. Per-role losses share the
    total supervised count as denominator, so total = fs + fc + rg exactly.
    """
    role_weights = role_weights or {}
    logits = model(ids)
    token_losses = nn.functional.cross_entropy(
        logits[:, :-1].reshape(-1, logits.size(-1)),
        ids[:, 1:].reshape(-1),
        reduction="none",
    ).view(ids.size(0), -1)

    sums = {"fs": ids.new_zeros((), dtype=torch.float32),
            "fc": ids.new_zeros((), dtype=torch.float32),
            "rg": ids.new_zeros((), dtype=torch.float32)}
    supervised = 0
    for row, row_roles in enumerate(roles):
        for position in range(1, ids.size(1)):
            role = row_roles[position]
            if role is None:
                continue
            loss_name = ROLE_TO_LOSS[role]
            weight = float(role_weights.get(role, 1.0))
            sums[loss_name] = sums[loss_name] + weight * token_losses[row, position - 1]
            supervised += 1
    if supervised == 0:
        return {"total": None, "fs": None, "fc": None, "rg": None, "tokens": 0}
    parts = {name: value / supervised for name, value in sums.items()}
    total = parts["fs"] + parts["fc"] + parts["rg"]
    return {"total": total, "tokens": supervised, **parts}


def evaluate_dataset(model, encoded, batch_size, pad_id, role_weights=None) -> dict:
    model.eval()
    totals = {"fs": 0.0, "fc": 0.0, "rg": 0.0}
    tokens = 0
    with torch.no_grad():
        rng = random.Random(0)  # fixed order for evaluation
        order = list(range(len(encoded)))
        for start in range(0, len(order), batch_size):
            chunk = [encoded[i] for i in order[start : start + batch_size]]
            length = max(len(ids) for ids, _ in chunk)
            ids = torch.full((len(chunk), length), pad_id, dtype=torch.long)
            roles = [[None] * length for _ in chunk]
            for row, (sample_ids, sample_roles) in enumerate(chunk):
                ids[row, : len(sample_ids)] = torch.tensor(sample_ids, dtype=torch.long)
                roles[row][: len(sample_roles)] = sample_roles
            result = compute_masked_losses(model, ids, roles, role_weights)
            if result["tokens"]:
                for name in totals:
                    totals[name] += float(result[name]) * result["tokens"]
                tokens += result["tokens"]
    model.train()
    if tokens == 0:
        raise DataError("no supervised tokens in dataset")
    losses = {name: value / tokens for name, value in totals.items()}
    losses["total"] = losses["fs"] + losses["fc"] + losses["rg"]
    losses["tokens"] = tokens
    return losses


def train(config: TrainerConfig, samples: list[dict], manifest: Optional[dict] = None) -> TrainResult:
    """Fit adapters on the exported samples; returns checkpoints and paths."""
    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)

    tokenizer = Tokenizer.fit(samples)
    encoded = _encode_dataset(samples, tokenizer, config.context_limit)
    if all(all(role is None for role in roles) for _, roles in encoded):
        raise DataError("no supervised tokens in dataset")

    model = TinyCausalLM(
        vocab_size=len(tokenizer),
        d_model=config.d_model,
        n_heads=config.n_heads,
        n_layers=config.n_layers,
        max_len=config.context_limit,
    )
    wrapped = apply_low_rank_adapters(
        model, list(config.target_modules), config.lora_rank, config.lora_alpha
    )
    optimizer = torch.optim.Adam(adapter_parameters(model), lr=config.learning_rate)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "loss_log.jsonl"
    checkpoints: list[tuple[int, float]] = []

    with log_path.open("w", encoding="utf-8") as log:
        header = {
            "event": "start",
            "config": {**asdict(config), "target_modules": list(config.target_modules)},
            "manifest": manifest or {},
            "adapted_modules": wrapped,
            "samples": len(samples),
            "vocab": len(tokenizer),
        }
        log.write(json.dumps(header) + "\n")

        initial = evaluate_dataset(model, encoded, config.batch_size, tokenizer.pad_id,
                                   config.role_loss_weights)
        checkpoints.append((0, initial["total"]))
        log.write(json.dumps({"event": "checkpoint", "step": 0, **{k: float(v) for k, v in initial.items()}}) + "\n")

        step = 0
        done = False
        epoch = 0
        # max_steps (smoke mode) overrides the epoch budget
        while not done and (config.max_steps is not None or epoch < config.epochs):
            epoch += 1
            for ids, roles in _batchify(encoded, config.batch_size, tokenizer.pad_id, rng):
                result = compute_masked_losses(model, ids, roles, config.role_loss_weights)
                if result["tokens"] == 0:
                    continue
                optimizer.zero_grad()
                result["total"].backward()
                optimizer.step()
                step += 1
                log.write(
                    json.dumps(
                        {
                            "event": "step",
                            "step": step,
                            "loss": float(result["total"].detach()),
                            "loss_fs": float(result["fs"].detach()),
                            "loss_fc": float(result["fc"].detach()),
                            "loss_rg": float(result["rg"].detach()),
                            "tokens": result["tokens"],
                        }
                    )
                    + "\n"
                )
                if step % config.eval_every == 0:
                    snapshot = evaluate_dataset(model, encoded, config.batch_size,
                                                tokenizer.pad_id, config.role_loss_weights)
                    checkpoints.append((step, snapshot["total"]))
                    log.write(json.dumps({"event": "checkpoint", "step": step,
                                          **{k: float(v) for k, v in snapshot.items()}}) + "\n")
                if config.max_steps is not None and step >= config.max_steps:
                    done = True
                    break

        final = evaluate_dataset(model, encoded, config.batch_size, tokenizer.pad_id,
                                 config.role_loss_weights)
        if not checkpoints or checkpoints[-1][0] != step:
            checkpoints.append((step, final["total"]))
            log.write(json.dumps({"event": "checkpoint", "step": step,
                                  **{k: float(v) for k, v in final.items()}}) + "\n")

    adapter_path = out_dir / "adapter.pt"
    torch.save(
        {
            "state_dict": adapter_state_dict(model),
            "config": {**asdict(config), "target_modules": list(config.target_modules)},
            "vocab": tokenizer.vocab,
        },
        adapter_path,
    )
    return TrainResult(
        steps=step,
        checkpoints=checkpoints,
        final_losses={k: float(v) for k, v in final.items() if k != "tokens"},
        adapter_path=str(adapter_path),
        log_path=str(log_path),
    )


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Adapter fine-tuning over six-role chat exports")
    parser.add_argument("data", help="exported JSONL file")
    parser.add_argument("--manifest", help="manifest.json path (defaults next to the data file)")
    parser.add_argument("--out", default="adapter_out")
    parser.add_argument("--smoke", action="store_true",
                        help="tiny overfit run: 10 samples, capped steps")
    parser.add_argument("--max-steps", type=int, default=None)
    parser.add_argument("--learning-rate", type=float, default=None)
    args = parser.parse_args(argv)

    data_path = Path(args.data)
    manifest_path = Path(args.manifest) if args.manifest else data_path.parent / "manifest.json"
    manifest = load_manifest(manifest_path)
    samples = load_samples(data_path)

    overrides: dict = {"out_dir": args.out}
    if args.smoke:
        # keep the manifest context limit: head-truncating below the system
        # record would strip every supervised token
        samples = samples[:10]
        overrides.update(max_steps=args.max_steps or 30, learning_rate=args.learning_rate or 1e-2,
                         eval_every=10)
    else:
        if args.max_steps is not None:
            overrides["max_steps"] = args.max_steps
        if args.learning_rate is not None:
            overrides["learning_rate"] = args.learning_rate

    config = TrainerConfig.from_manifest(manifest, **overrides)
    result = train(config, samples, manifest)
    print(f"steps={result.steps} final_loss={result.final_losses['total']:.4f} "
          f"adapter={result.adapter_path}")
    for step, loss in result.checkpoints:
        print(f"checkpoint step={step} loss={loss:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
