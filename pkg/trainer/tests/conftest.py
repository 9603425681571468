from __future__ import annotations

import json

import pytest

from lora_trainer import create_tiny_base


def toy_records(n: int = 20) -> list[dict]:
    """ReAct-style prompt-completion records with observation mask spans."""
    records = []
    for i in range(n):
        question = f"What is item {i}?"
        prompt = f"Answer the question with search.\n\nQuestion: {question}\n"
        completion = (
            f"Thought: I should search this.\nAction: search[{question}]\n"
            f"Observation: ITEM-{i} data\nThought: I found it.\nAction: finish[item {i}]"
        )
        start = completion.index(f"ITEM-{i}")
        end = start + len(f"ITEM-{i} data")
        records.append({"prompt": prompt, "completion": completion, "mask_spans": [[start, end]]})
    return records


def write_export(path, records) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


@pytest.fixture(scope="session")
def toy_export(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "export.jsonl"
    write_export(path, toy_records())
    return path


@pytest.fixture(scope="session")
def tiny_base(tmp_path_factory, toy_export):
    """A small warm-started base model; warm enough to know the trajectory
    format, far from converged so LoRA epochs still move the loss."""
    records = toy_records()
    corpus = [r["prompt"] + r["completion"] for r in records]
    out = tmp_path_factory.mktemp("model") / "base"
    return create_tiny_base(corpus, out, seed=1, pretrain_epochs=20)
