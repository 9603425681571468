"""Low-rank adaptation layers: injection into a causal LM, adapter save/load."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import torch
from torch import nn

from .config import LoraParams

logger = logging.getLogger(__name__)

ADAPTER_WEIGHTS = "adapter_state.pt"
ADAPTER_CONFIG = "adapter_config.json"


class LoRALinear(nn.Module):
    """A frozen linear layer plus a trainable low-rank update.

    forward(x) = base(x) + (alpha / r) * B(A(dropout(x)))
    with A zero-mean-initialized and B zero-initialized, so an untrained
    adapter is an exact no-op.
    """

    def __init__(self, base: nn.Linear, params: LoraParams):
        super().__init__()
        self.base = base
        self.base.weight.requires_grad_(False)
        if self.base.bias is not None:
            self.base.bias.requires_grad_(False)
        self.lora_a = nn.Linear(base.in_features, params.r, bias=False)
        self.lora_b = nn.Linear(params.r, base.out_features, bias=False)
        nn.init.normal_(self.lora_a.weight, std=1.0 / params.r)
        nn.init.zeros_(self.lora_b.weight)
        self.dropout = nn.Dropout(params.dropout)
        self.scaling = params.alpha / params.r

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scaling * self.lora_b(self.lora_a(self.dropout(x)))


def inject_lora(model: nn.Module, params: LoraParams) -> list[str]:
    """Replace every targeted nn.Linear with a LoRA-wrapped layer.

    Freezes all original parameters; only lora_a/lora_b remain trainable.
    Returns the qualified names of the wrapped modules.
    """
    for p in model.parameters():
        p.requires_grad_(False)
    wrapped: list[str] = []
    for name, module in list(model.named_modules()):
        for child_name, child in list(module.named_children()):
            if child_name in params.target_modules and isinstance(child, nn.Linear):
                setattr(module, child_name, LoRALinear(child, params))
                wrapped.append(f"{name}.{child_name}" if name else child_name)
    if not wrapped:
        raise ValueError(
            f"no target modules {params.target_modules} found; is this a supported architecture?"
        )
    return wrapped


def trainable_parameters(model: nn.Module):
    return [p for p in model.parameters() if p.requires_grad]


def lora_state_dict(model: nn.Module) -> dict[str, torch.Tensor]:
    return {
        name: tensor
        for name, tensor in model.state_dict().items()
        if "lora_a" in name or "lora_b" in name
    }


def save_adapter(model: nn.Module, params: LoraParams, base_model: str, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(lora_state_dict(model), out_dir / ADAPTER_WEIGHTS)
    (out_dir / ADAPTER_CONFIG).write_text(
        json.dumps(
            {
                "base_model": base_model,
                "r": params.r,
                "alpha": params.alpha,
                "dropout": params.dropout,
                "target_modules": list(params.target_modules),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return out_dir


def load_adapter(model: nn.Module, adapter_dir: str | Path, base_model: str) -> nn.Module:
    """Inject LoRA layers into a fresh base model and load trained weights.

    The adapter records which base model it was trained against; a mismatch
    is a startup error rather than silently wrong generations.
    """
    adapter_dir = Path(adapter_dir)
    config = json.loads((adapter_dir / ADAPTER_CONFIG).read_text(encoding="utf-8"))
    if config["base_model"] != base_model:
        raise ValueError(
            f"adapter was trained for base model {config['base_model']!r}, got {base_model!r}"
        )
    params = LoraParams(
        r=config["r"],
        alpha=config["alpha"],
        dropout=config["dropout"],
        target_modules=tuple(config["target_modules"]),
    )
    inject_lora(model, params)
    state = torch.load(adapter_dir / ADAPTER_WEIGHTS, map_location="cpu", weights_only=True)
    missing, unexpected = model.load_state_dict(state, strict=False)
    if unexpected:
        raise ValueError(f"adapter/base mismatch: unexpected tensors {unexpected[:3]}...")
    loaded_lora = {k for k in state}
    expected_lora = {k for k in lora_state_dict(model)}
    if loaded_lora != expected_lora:
        raise ValueError("adapter/base mismatch: adapter tensors do not cover the injected layers")
    return model
