from __future__ import annotations

import re

import pytest
from fastapi.testclient import TestClient

from lora_trainer.config import TrainConfig
from lora_trainer.server import DEFAULT_TEMPERATURE, build_backend, create_app
from lora_trainer.train import train

# The tool-use action grammar of the wire format the evaluator parses.
ACTION_LINE = re.compile(r"^\s*(search|finish)\s*\[.*\]\s*$", re.IGNORECASE)

PROMPT = "Answer the question with search.\n\nQuestion: What is item 7?\n"


@pytest.fixture(scope="module")
def client(tiny_base, toy_export, tmp_path_factory):
    adapter = tmp_path_factory.mktemp("serve") / "adapter"
    train(
        toy_export,
        TrainConfig(
            base_model=str(tiny_base),
            adapter_out=adapter,
            epochs=20,
            batch_size=4,
            quantize_8bit=False,
            seed=3,
        ),
    )
    backend = build_backend(str(tiny_base), adapter)
    return TestClient(create_app(backend))


def _chat(client, **kwargs):
    payload = {"messages": [{"role": "user", "content": PROMPT}], "max_tokens": 60}
    payload.update(kwargs)
    response = client.post("/v1/chat/completions", json=payload)
    assert response.status_code == 200
    return response.json()


class TestEndpoint:
    def test_response_shape(self, client):
        data = _chat(client, temperature=0.0)
        assert data["object"] == "chat.completion"
        assert data["choices"][0]["message"]["role"] == "assistant"
        usage = data["usage"]
        assert usage["prompt_tokens"] > 0
        assert usage["completion_tokens"] > 0
        assert usage["total_tokens"] == usage["prompt_tokens"] + usage["completion_tokens"]

    def test_stop_sequence_honored(self, client):
        unstopped = _chat(client, temperature=0.0)["choices"][0]["message"]["content"]
        assert "Observation" in unstopped  # the overfit model reproduces tool output
        stopped = _chat(client, temperature=0.0, stop=["Observation"])["choices"][0]["message"]["content"]
        assert "Observation" not in stopped
        assert unstopped.startswith(stopped)

    def test_default_temperature_is_0_6(self, client, tiny_base, toy_export):
        assert DEFAULT_TEMPERATURE == 0.6
        backend = build_backend(str(tiny_base))
        assert backend.default_temperature == 0.6

    def test_temperature_zero_is_deterministic(self, client):
        first = _chat(client, temperature=0.0)["choices"][0]["message"]["content"]
        second = _chat(client, temperature=0.0)["choices"][0]["message"]["content"]
        assert first == second

    def test_seeded_sampling_is_reproducible(self, client):
        # Omitted temperature exercises the 0.6 default sampling path.
        first = _chat(client, seed=11)["choices"][0]["message"]["content"]
        second = _chat(client, seed=11)["choices"][0]["message"]["content"]
        assert first == second

    def test_sampled_output_parses_as_action_smoke(self, client):
        hits = 0
        for seed in range(5):
            content = _chat(client, stop=["Observation"], seed=seed)["choices"][0]["message"]["content"]
            for line in content.split("\n"):
                _, found, action_part = line.partition("Action:")
                if found and ACTION_LINE.match(action_part):
                    hits += 1
                    break
        assert hits >= 1, "no parseable action in 5 sampled generations"

    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"


def test_adapter_base_mismatch_is_startup_error(tiny_base, toy_export, tmp_path):
    import shutil

    adapter = tmp_path / "adapter"
    train(
        toy_export,
        TrainConfig(
            base_model=str(tiny_base), adapter_out=adapter, epochs=1, batch_size=4, quantize_8bit=False
        ),
    )
    other_base = tmp_path / "other_base"
    shutil.copytree(tiny_base, other_base)
    with pytest.raises(ValueError, match="trained for base model"):
        build_backend(str(other_base), adapter)
