"""Base model and tokenizer loading, plus tiny-model initialization for
offline smoke runs."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable

import torch

logger = logging.getLogger(__name__)


def load_base(base_model: str | Path, quantize_8bit: bool = False):
    """Load a causal LM + tokenizer from a local directory or hub id.

    Returns (model, tokenizer, effective_8bit). Int8 loading needs a CUDA
    backend; on CPU-only installs the flag degrades to fp32 with a warning so
    training still runs.
    """
    from transformers import AutoModelForCausalLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(str(base_model))
    effective_8bit = False
    if quantize_8bit and torch.cuda.is_available():
        try:
            model = AutoModelForCausalLM.from_pretrained(str(base_model), load_in_8bit=True)
            effective_8bit = True
        except Exception as exc:  # bitsandbytes missing or unsupported
            logger.warning("int8 load failed (%s); falling back to fp32", exc)
            model = AutoModelForCausalLM.from_pretrained(str(base_model))
    else:
        if quantize_8bit:
            logger.warning("int8 quantization requested but no CUDA backend; using fp32")
        model = AutoModelForCausalLM.from_pretrained(str(base_model))
    if tokenizer.pad_token_id is None:
        tokenizer.pad_token = tokenizer.eos_token
    model.generation_config.pad_token_id = tokenizer.pad_token_id
    return model, tokenizer, effective_8bit


def create_tiny_base(
    corpus: Iterable[str],
    out_dir: str | Path,
    vocab_size: int = 512,
    hidden_size: int = 128,
    num_layers: int = 2,
    num_heads: int = 4,
    max_positions: int = 2048,
    seed: int = 0,
    pretrain_epochs: int = 0,
    pretrain_lr: float = 3e-3,
) -> Path:
    """Build a small Llama-style base model whose BPE tokenizer is trained on
    the given corpus; saved as a standard model directory loadable by
    load_base. Used for offline smoke training and serving tests.

    LoRA adaptation presumes a base with meaningful features, so
    pretrain_epochs > 0 runs a quick full-parameter causal-LM pass over the
    corpus before saving; with 0 the weights stay random.
    """
    from tokenizers import Tokenizer, decoders, models, pre_tokenizers, trainers
    from transformers import LlamaConfig, LlamaForCausalLM, PreTrainedTokenizerFast

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = list(corpus)

    tok = Tokenizer(models.BPE(unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=vocab_size, special_tokens=["<unk>", "<pad>", "</s>"]
    )
    tok.train_from_iterator(corpus, trainer)
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="<unk>", pad_token="<pad>", eos_token="</s>"
    )

    torch.manual_seed(seed)
    config = LlamaConfig(
        vocab_size=len(tokenizer),
        hidden_size=hidden_size,
        intermediate_size=hidden_size * 2,
        num_hidden_layers=num_layers,
        num_attention_heads=num_heads,
        num_key_value_heads=num_heads,
        max_position_embeddings=max_positions,
        pad_token_id=tokenizer.pad_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    model = LlamaForCausalLM(config)
    if pretrain_epochs > 0:
        _pretrain(model, tokenizer, corpus, pretrain_epochs, pretrain_lr)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    logger.info(
        "tiny base model written to %s (%d params)", out_dir, sum(p.numel() for p in model.parameters())
    )
    return out_dir


def _pretrain(model, tokenizer, corpus: list[str], epochs: int, lr: float) -> None:
    texts = [text + tokenizer.eos_token for text in corpus]
    encoded = tokenizer(texts, padding=True, return_tensors="pt", add_special_tokens=False)
    input_ids = encoded["input_ids"]
    attention_mask = encoded["attention_mask"]
    labels = input_ids.masked_fill(attention_mask == 0, -100)
    optimizer = torch.optim.AdamW(model.parameters(), lr=lr)
    model.train()
    last_loss = 0.0
    for epoch in range(epochs):
        out = model(input_ids=input_ids, attention_mask=attention_mask, labels=labels)
        optimizer.zero_grad()
        out.loss.backward()
        optimizer.step()
        last_loss = float(out.loss.detach())
    logger.info("warm-started base: %d epochs, last loss %.4f", epochs, last_loss)
    model.eval()
