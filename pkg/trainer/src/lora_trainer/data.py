"""Prompt-completion export loading and loss-mask construction.

Records are {"prompt", "completion", "mask_spans": [[start, end), ...]} with
span offsets into the completion covering the tool-observation texts. Loss is
taken on completion tokens only; when observation masking is on, any token
whose character span overlaps a mask span is excluded too (partial overlaps
count, so no observation fragment is ever trained on).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import torch

logger = logging.getLogger(__name__)

IGNORE_INDEX = -100


@dataclass(frozen=True)
class ExportRecord:
    prompt: str
    completion: str
    mask_spans: tuple[tuple[int, int], ...]


def read_export(path: str | Path) -> list[ExportRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            try:
                records.append(
                    ExportRecord(
                        prompt=data["prompt"],
                        completion=data["completion"],
                        mask_spans=tuple((int(s), int(e)) for s, e in data.get("mask_spans", [])),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {i + 1}: bad export record ({exc})") from None
    return records


def _spans_valid(record: ExportRecord) -> bool:
    previous_end = 0
    for start, end in record.mask_spans:
        if not (0 <= start < end <= len(record.completion)):
            return False
        if start < previous_end:
            return False
        previous_end = end
    return True


@dataclass
class EncodedRecord:
    input_ids: torch.Tensor
    labels: torch.Tensor

    @property
    def loss_token_count(self) -> int:
        return int((self.labels != IGNORE_INDEX).sum())


def encode_record(
    record: ExportRecord,
    tokenizer,
    mask_observations: bool = True,
    max_length: int = 1024,
) -> EncodedRecord | None:
    """Tokenize prompt+completion and build the label mask.

    Prompt tokens (and any token straddling the prompt boundary) never
    contribute to the loss. Returns None for records whose mask spans do not
    align with the completion; the caller logs and skips them.
    """
    if not _spans_valid(record):
        logger.warning("skipping record: mask spans misaligned with completion")
        return None
    full_text = record.prompt + record.completion
    encoded = tokenizer(
        full_text,
        return_offsets_mapping=True,
        truncation=True,
        max_length=max_length,
        add_special_tokens=False,
    )
    input_ids = encoded["input_ids"]
    offsets = encoded["offset_mapping"]
    prompt_chars = len(record.prompt)
    absolute_spans = [(prompt_chars + s, prompt_chars + e) for s, e in record.mask_spans]

    labels = []
    for token_id, (start, end) in zip(input_ids, offsets):
        if start < prompt_chars:  # prompt or boundary-straddling token
            labels.append(IGNORE_INDEX)
            continue
        if mask_observations and any(start < se and ss < end for ss, se in absolute_spans):
            labels.append(IGNORE_INDEX)
            continue
        labels.append(token_id)

    if all(label == IGNORE_INDEX for label in labels):
        logger.warning("skipping record: no loss-contributing tokens after masking")
        return None
    return EncodedRecord(
        input_ids=torch.tensor(input_ids, dtype=torch.long),
        labels=torch.tensor(labels, dtype=torch.long),
    )


def encode_dataset(
    records: list[ExportRecord],
    tokenizer,
    mask_observations: bool = True,
    max_length: int = 1024,
) -> tuple[list[EncodedRecord], int]:
    """Encode all records; returns (encoded, skipped_count)."""
    encoded = []
    skipped = 0
    for record in records:
        enc = encode_record(record, tokenizer, mask_observations, max_length)
        if enc is None:
            skipped += 1
        else:
            encoded.append(enc)
    return encoded, skipped


def collate(batch: list[EncodedRecord], pad_token_id: int) -> dict[str, torch.Tensor]:
    width = max(len(item.input_ids) for item in batch)
    input_ids = torch.full((len(batch), width), pad_token_id, dtype=torch.long)
    labels = torch.full((len(batch), width), IGNORE_INDEX, dtype=torch.long)
    attention_mask = torch.zeros((len(batch), width), dtype=torch.long)
    for i, item in enumerate(batch):
        n = len(item.input_ids)
        input_ids[i, :n] = item.input_ids
        labels[i, :n] = item.labels
        attention_mask[i, :n] = 1
    return {"input_ids": input_ids, "labels": labels, "attention_mask": attention_mask}
