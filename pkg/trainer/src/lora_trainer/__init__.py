"""LoRA fine-tuning on masked prompt-completion exports, plus a
chat-completion serving endpoint for the trained model."""

from .config import LoraParams, TrainConfig
from .data import EncodedRecord, ExportRecord, collate, encode_dataset, encode_record, read_export
from .lora import LoRALinear, inject_lora, load_adapter, save_adapter
from .model import create_tiny_base, load_base
from .server import GenerationBackend, build_backend, create_app, serve
from .train import TrainResult, train

__version__ = "0.1.0"
