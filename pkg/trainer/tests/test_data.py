from __future__ import annotations

import json

import pytest
import torch

from lora_trainer.data import (
    IGNORE_INDEX,
    ExportRecord,
    collate,
    encode_dataset,
    encode_record,
    read_export,
)
from lora_trainer.model import load_base

from .conftest import toy_records, write_export


@pytest.fixture(scope="module")
def tokenizer(tiny_base):
    _, tok, _ = load_base(tiny_base)
    return tok


def _record(**kwargs) -> ExportRecord:
    defaults = dict(
        prompt="Question: what?\n",
        completion="Thought: t\nAction: search[q]\nObservation: SECRET DATA\nThought: done\nAction: finish[x]",
    )
    defaults["mask_spans"] = (
        (
            defaults["completion"].index("SECRET"),
            defaults["completion"].index("SECRET") + len("SECRET DATA"),
        ),
    )
    defaults.update(kwargs)
    return ExportRecord(**defaults)


class TestReadExport:
    def test_reads_records(self, toy_export):
        records = read_export(toy_export)
        assert len(records) == 20
        assert all(r.mask_spans for r in records)

    def test_bad_record_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"prompt": "p"}\n', encoding="utf-8")
        with pytest.raises(ValueError, match="line 1"):
            read_export(path)


class TestEncoding:
    def test_prompt_tokens_never_contribute(self, tokenizer):
        record = _record()
        encoded = encode_record(record, tokenizer)
        offsets = tokenizer(
            record.prompt + record.completion, return_offsets_mapping=True, add_special_tokens=False
        )["offset_mapping"]
        for label, (start, _end) in zip(encoded.labels.tolist(), offsets):
            if start < len(record.prompt):
                assert label == IGNORE_INDEX

    def test_loss_tokens_disjoint_from_mask_spans(self, tokenizer):
        record = _record()
        encoded = encode_record(record, tokenizer)
        full = record.prompt + record.completion
        offsets = tokenizer(full, return_offsets_mapping=True, add_special_tokens=False)["offset_mapping"]
        span_ranges = [
            (len(record.prompt) + s, len(record.prompt) + e) for s, e in record.mask_spans
        ]
        for label, (start, end) in zip(encoded.labels.tolist(), offsets):
            if label == IGNORE_INDEX:
                continue
            for span_start, span_end in span_ranges:
                assert not (start < span_end and span_start < end), (
                    f"loss token [{start},{end}) overlaps masked span [{span_start},{span_end})"
                )

    def test_partial_overlap_is_masked(self, tokenizer):
        record = _record()
        full = record.prompt + record.completion
        offsets = tokenizer(full, return_offsets_mapping=True, add_special_tokens=False)["offset_mapping"]
        span_start = len(record.prompt) + record.mask_spans[0][0]
        # Shift the span start into the middle of whichever token covers it,
        # forcing a partial overlap; that token must still be masked.
        covering = next((s, e) for s, e in offsets if s <= span_start < e)
        shifted = ExportRecord(
            prompt=record.prompt,
            completion=record.completion,
            mask_spans=((covering[1] - len(record.prompt) - 1, record.mask_spans[0][1]),),
        )
        encoded = encode_record(shifted, tokenizer)
        index = offsets.index(covering)
        assert encoded.labels.tolist()[index] == IGNORE_INDEX

    def test_unmasked_has_strictly_more_loss_tokens(self, tokenizer):
        record = _record()
        masked = encode_record(record, tokenizer, mask_observations=True)
        unmasked = encode_record(record, tokenizer, mask_observations=False)
        assert unmasked.loss_token_count > masked.loss_token_count

    def test_out_of_bounds_span_skips_record(self, tokenizer, caplog):
        record = _record(mask_spans=((0, 10_000),))
        assert encode_record(record, tokenizer) is None

    def test_overlapping_spans_skip_record(self, tokenizer):
        record = _record(mask_spans=((0, 10), (5, 15)))
        assert encode_record(record, tokenizer) is None

    def test_fully_masked_record_skipped(self, tokenizer):
        record = ExportRecord(prompt="p: ", completion="xyz", mask_spans=((0, 3),))
        assert encode_record(record, tokenizer) is None

    def test_dataset_encoding_counts_skips(self, tokenizer, tmp_path):
        records = [_record(), _record(mask_spans=((0, 10_000),))]
        encoded, skipped = encode_dataset(records, tokenizer)
        assert len(encoded) == 1
        assert skipped == 1


class TestCollate:
    def test_padding_shapes_and_masks(self, tokenizer):
        records = [
            _record(),
            _record(completion="Thought: s\nAction: finish[y]", mask_spans=()),
        ]
        encoded = [encode_record(r, tokenizer) for r in records]
        batch = collate(encoded, tokenizer.pad_token_id)
        n, width = batch["input_ids"].shape
        assert n == 2
        assert width == max(len(e.input_ids) for e in encoded)
        lengths = [len(e.input_ids) for e in encoded]
        for i, length in enumerate(lengths):
            assert batch["attention_mask"][i, :length].all()
            assert not batch["attention_mask"][i, length:].any()
            assert (batch["input_ids"][i, length:] == tokenizer.pad_token_id).all()
            assert (batch["labels"][i, length:] == IGNORE_INDEX).all()
        assert torch.equal(batch["labels"][0, : lengths[0]], encoded[0].labels)
