"""Training configuration."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_TARGET_MODULES = ("q_proj", "k_proj", "v_proj", "o_proj")


@dataclass
class LoraParams:
    # Conventional defaults; not claimed from any reference setup.
    r: int = 16
    alpha: int = 32
    dropout: float = 0.05
    target_modules: tuple[str, ...] = DEFAULT_TARGET_MODULES

    def __post_init__(self) -> None:
        if self.r < 1:
            raise ValueError("lora rank must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("lora dropout must lie in [0, 1)")


@dataclass
class TrainConfig:
    base_model: str
    adapter_out: Path
    epochs: int = 30
    learning_rate: float = 3e-4
    batch_size: int = 16
    quantize_8bit: bool = True
    mask_observations: bool = True
    max_length: int = 1024
    seed: int = 0
    lora: LoraParams = field(default_factory=LoraParams)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.adapter_out = Path(self.adapter_out)
