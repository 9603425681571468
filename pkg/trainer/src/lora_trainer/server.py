"""Chat-completion endpoint over a (LoRA-adapted) causal LM.

Exposes the POST /v1/chat/completions subset the evaluator consumes:
{model, messages, temperature, stop, max_tokens} in; assistant message +
token usage out. Generation is stateless per request; temperature 0 decodes
greedily, so identical requests give identical outputs.
"""

from __future__ import annotations

import threading
import time
import uuid
from pathlib import Path

import torch
from fastapi import FastAPI
from pydantic import BaseModel, Field

from .lora import load_adapter
from .model import load_base

DEFAULT_TEMPERATURE = 0.6
DEFAULT_MAX_TOKENS = 256


class ChatMessage(BaseModel):
    role: str
    content: str


class ChatRequest(BaseModel):
    model: str | None = None
    messages: list[ChatMessage]
    temperature: float | None = None
    stop: list[str] | str | None = None
    max_tokens: int | None = None
    seed: int | None = None


class ChatChoiceMessage(BaseModel):
    role: str = "assistant"
    content: str


class ChatChoice(BaseModel):
    index: int = 0
    message: ChatChoiceMessage
    finish_reason: str = "stop"


class ChatUsage(BaseModel):
    prompt_tokens: int
    completion_tokens: int
    total_tokens: int


class ChatResponse(BaseModel):
    id: str = Field(default_factory=lambda: f"chatcmpl-{uuid.uuid4().hex[:12]}")
    object: str = "chat.completion"
    created: int = Field(default_factory=lambda: int(time.time()))
    model: str = "local"
    choices: list[ChatChoice]
    usage: ChatUsage


def truncate_at_stop(text: str, stops: list[str]) -> str:
    cut = len(text)
    for stop in stops:
        if not stop:
            continue
        idx = text.find(stop)
        if idx != -1:
            cut = min(cut, idx)
    return text[:cut]


class GenerationBackend:
    """Wraps the model for single-request-at-a-time generation (CPU-safe)."""

    def __init__(self, model, tokenizer, model_name: str, default_temperature: float = DEFAULT_TEMPERATURE):
        self.model = model
        self.tokenizer = tokenizer
        self.model_name = model_name
        self.default_temperature = default_temperature
        self._lock = threading.Lock()
        self.model.eval()

    def generate(self, req: ChatRequest) -> ChatResponse:
        prompt = "\n".join(m.content for m in req.messages)
        temperature = req.temperature if req.temperature is not None else self.default_temperature
        max_new = req.max_tokens or DEFAULT_MAX_TOKENS
        stops = [req.stop] if isinstance(req.stop, str) else list(req.stop or [])

        encoded = self.tokenizer(prompt, return_tensors="pt", add_special_tokens=False)
        with self._lock:
            if req.seed is not None:
                torch.manual_seed(req.seed)
            with torch.no_grad():
                kwargs = dict(
                    input_ids=encoded["input_ids"],
                    attention_mask=encoded["attention_mask"],
                    max_new_tokens=max_new,
                    pad_token_id=self.tokenizer.pad_token_id,
                )
                if temperature > 0:
                    kwargs.update(do_sample=True, temperature=temperature, top_p=1.0)
                else:
                    kwargs.update(do_sample=False)
                output = self.model.generate(**kwargs)
        prompt_len = encoded["input_ids"].shape[1]
        completion_ids = output[0][prompt_len:]
        text = self.tokenizer.decode(completion_ids, skip_special_tokens=True)
        text = truncate_at_stop(text, stops)
        return ChatResponse(
            model=req.model or self.model_name,
            choices=[ChatChoice(message=ChatChoiceMessage(content=text))],
            usage=ChatUsage(
                prompt_tokens=int(prompt_len),
                completion_tokens=int(len(completion_ids)),
                total_tokens=int(prompt_len + len(completion_ids)),
            ),
        )


def create_app(backend: GenerationBackend) -> FastAPI:
    app = FastAPI(title="lora-trainer serving endpoint")

    @app.post("/v1/chat/completions", response_model=ChatResponse)
    def chat_completions(req: ChatRequest) -> ChatResponse:
        return backend.generate(req)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "model": backend.model_name}

    return app


def build_backend(
    base_model: str | Path,
    adapter_dir: str | Path | None = None,
    default_temperature: float = DEFAULT_TEMPERATURE,
) -> GenerationBackend:
    """Load the base model, apply an adapter if given, and wrap for serving."""
    model, tokenizer, _ = load_base(base_model)
    name = Path(str(base_model)).name
    if adapter_dir is not None:
        load_adapter(model, adapter_dir, str(base_model))
        name = f"{name}+{Path(str(adapter_dir)).name}"
    return GenerationBackend(model, tokenizer, name, default_temperature)


def serve(
    base_model: str | Path,
    adapter_dir: str | Path | None,
    host: str = "127.0.0.1",
    port: int = 8000,
    default_temperature: float = DEFAULT_TEMPERATURE,
) -> None:
    import uvicorn

    backend = build_backend(base_model, adapter_dir, default_temperature)
    uvicorn.run(create_app(backend), host=host, port=port)
