"""CLI: initialize a tiny base model, train LoRA adapters, serve the result."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import LoraParams, TrainConfig
from .model import create_tiny_base
from .server import DEFAULT_TEMPERATURE, serve
from .train import train


def _read_corpus(path: Path) -> list[str]:
    texts = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                texts.append(line)
                continue
            if isinstance(record, dict):
                texts.append(record.get("prompt", "") + record.get("completion", ""))
            else:
                texts.append(str(record))
    return texts


def cmd_init_base(args: argparse.Namespace) -> int:
    corpus = _read_corpus(Path(args.corpus))
    if not corpus:
        print("error: empty corpus", file=sys.stderr)
        return 2
    out = create_tiny_base(
        corpus,
        args.out,
        vocab_size=args.vocab_size,
        hidden_size=args.hidden_size,
        num_layers=args.layers,
        seed=args.seed,
        pretrain_epochs=args.pretrain_epochs,
    )
    print(f"tiny base model -> {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = TrainConfig(
        base_model=args.base_model,
        adapter_out=Path(args.adapter_out),
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        quantize_8bit=not args.no_8bit,
        mask_observations=not args.no_mask,
        max_length=args.max_length,
        seed=args.seed,
        lora=LoraParams(r=args.lora_r, alpha=args.lora_alpha, dropout=args.lora_dropout),
    )
    result = train(args.export, cfg)
    print(
        f"trained {result.records_used} records ({result.records_skipped} skipped), "
        f"loss {result.initial_loss:.4f} -> {result.final_loss:.4f}, "
        f"adapter -> {result.adapter_dir}"
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    serve(
        args.base_model,
        args.adapter,
        host=args.host,
        port=args.port,
        default_temperature=args.temperature,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lora-train", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-base", help="initialize a tiny offline base model from a corpus")
    p.add_argument("--corpus", required=True, help="text or JSONL file to train the tokenizer on")
    p.add_argument("--out", required=True)
    p.add_argument("--vocab-size", type=int, default=512)
    p.add_argument("--hidden-size", type=int, default=128)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--pretrain-epochs", type=int, default=30,
        help="quick full-model warm-start over the corpus (0 keeps random weights)",
    )
    p.set_defaults(func=cmd_init_base)

    p = sub.add_parser("train", help="LoRA-train on a prompt-completion export")
    p.add_argument("--export", required=True, help="prompt-completion JSONL with mask_spans")
    p.add_argument("--base-model", required=True)
    p.add_argument("--adapter-out", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--learning-rate", type=float, default=3e-4)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--max-length", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-mask", action="store_true", help="train on observation tokens too (ablation)")
    p.add_argument("--no-8bit", action="store_true", help="skip int8 quantization")
    p.add_argument("--lora-r", type=int, default=16)
    p.add_argument("--lora-alpha", type=int, default=32)
    p.add_argument("--lora-dropout", type=float, default=0.05)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="serve a chat-completion endpoint")
    p.add_argument("--base-model", required=True)
    p.add_argument("--adapter", help="adapter directory from `train`")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
