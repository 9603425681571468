"""Training loop: LoRA fine-tuning on a masked prompt-completion export."""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import torch

from .config import TrainConfig
from .data import EncodedRecord, collate, encode_dataset, read_export
from .lora import inject_lora, save_adapter, trainable_parameters
from .model import load_base

logger = logging.getLogger(__name__)

LOSS_CSV = "loss_curve.csv"
MANIFEST = "run_manifest.json"


@dataclass
class TrainResult:
    adapter_dir: Path
    loss_curve: list[float]
    loss_token_count: int
    records_used: int
    records_skipped: int

    @property
    def initial_loss(self) -> float:
        return self.loss_curve[0]

    @property
    def final_loss(self) -> float:
        return self.loss_curve[-1]


def _batches(encoded: list[EncodedRecord], batch_size: int, rng: random.Random | None = None):
    order = list(range(len(encoded)))
    if rng is not None:
        rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        yield [encoded[i] for i in order[start : start + batch_size]]


def evaluate_mean_loss(model, encoded: list[EncodedRecord], batch_size: int, pad_token_id: int) -> float:
    """Token-weighted mean loss over the dataset, without parameter updates."""
    was_training = model.training
    model.eval()
    weighted = 0.0
    tokens = 0
    with torch.no_grad():
        for batch in _batches(encoded, batch_size):
            tensors = collate(batch, pad_token_id)
            loss = model(**tensors).loss
            batch_tokens = sum(item.loss_token_count for item in batch)
            weighted += float(loss) * batch_tokens
            tokens += batch_tokens
    if was_training:
        model.train()
    return weighted / tokens


def train(export_file: str | Path, cfg: TrainConfig) -> TrainResult:
    """Fine-tune LoRA adapters on the export and write the artifacts.

    Loss is computed on completion tokens only, excluding masked observation
    spans when cfg.mask_observations is set. Writes the adapter directory,
    a per-epoch mean-loss CSV, and a run manifest echoing the effective
    hyperparameters.
    """
    records = read_export(export_file)
    if not records:
        raise ValueError(f"{export_file}: export is empty")

    model, tokenizer, effective_8bit = load_base(cfg.base_model, cfg.quantize_8bit)
    encoded, skipped = encode_dataset(records, tokenizer, cfg.mask_observations, cfg.max_length)
    if not encoded:
        raise ValueError("no trainable records after encoding")
    loss_token_count = sum(item.loss_token_count for item in encoded)

    torch.manual_seed(cfg.seed)
    inject_lora(model, cfg.lora)
    params = trainable_parameters(model)
    optimizer = torch.optim.AdamW(params, lr=cfg.learning_rate)
    rng = random.Random(cfg.seed)

    # Epoch-0 row: mean loss before any update, so one training epoch already
    # yields an initial-vs-final comparison.
    loss_curve: list[float] = [
        evaluate_mean_loss(model, encoded, cfg.batch_size, tokenizer.pad_token_id)
    ]
    logger.info("initial mean loss %.4f", loss_curve[0])

    model.train()
    for epoch in range(cfg.epochs):
        weighted_loss = 0.0
        tokens_seen = 0
        for batch in _batches(encoded, cfg.batch_size, rng):
            tensors = collate(batch, tokenizer.pad_token_id)
            out = model(**tensors)
            optimizer.zero_grad()
            out.loss.backward()
            optimizer.step()
            batch_tokens = sum(item.loss_token_count for item in batch)
            weighted_loss += float(out.loss.detach()) * batch_tokens
            tokens_seen += batch_tokens
        epoch_loss = weighted_loss / tokens_seen
        loss_curve.append(epoch_loss)
        logger.info("epoch %d/%d mean loss %.4f", epoch + 1, cfg.epochs, epoch_loss)

    adapter_dir = save_adapter(model, cfg.lora, str(cfg.base_model), cfg.adapter_out)
    with (adapter_dir / LOSS_CSV).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_loss"])
        for i, value in enumerate(loss_curve):  # epoch 0 is the pre-training loss
            writer.writerow([i, f"{value:.6f}"])
    manifest = {
        "base_model": str(cfg.base_model),
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "quantize_8bit_requested": cfg.quantize_8bit,
        "quantize_8bit_effective": effective_8bit,
        "mask_observations": cfg.mask_observations,
        "max_length": cfg.max_length,
        "seed": cfg.seed,
        "lora": {
            "r": cfg.lora.r,
            "alpha": cfg.lora.alpha,
            "dropout": cfg.lora.dropout,
            "target_modules": list(cfg.lora.target_modules),
        },
        "records_used": len(encoded),
        "records_skipped": skipped,
        "loss_token_count": loss_token_count,
        "final_loss": loss_curve[-1],
    }
    (adapter_dir / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    return TrainResult(
        adapter_dir=adapter_dir,
        loss_curve=loss_curve,
        loss_token_count=loss_token_count,
        records_used=len(encoded),
        records_skipped=skipped,
    )
