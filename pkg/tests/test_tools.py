from __future__ import annotations

import json
import logging

import pytest

from trajlab.errors import ConfigurationError
from trajlab.tools import (
    NONE_OBSERVATION,
    ObservationPool,
    PerturbMode,
    PerturbationConfig,
    PerturbedTool,
    ScriptedTool,
    SerpApiClient,
    extract_answer,
    perturb,
)


class TestExtraction:
    def test_answer_box_answer_beats_everything(self):
        payload = {
            "answer_box": {"answer": "X", "snippet": "S"},
            "organic_results": [{"snippet": "Y"}],
        }
        assert extract_answer(payload) == "X"

    def test_answer_box_snippet_second(self):
        payload = {
            "answer_box": {"snippet": "S", "snippet_highlighted_words": ["w1", "w2"]},
            "organic_results": [{"snippet": "Y"}],
        }
        assert extract_answer(payload) == "S"

    def test_highlighted_words_joined_third(self):
        payload = {
            "answer_box": {"snippet_highlighted_words": ["w1", "w2"]},
            "organic_results": [{"snippet": "Y"}],
        }
        assert extract_answer(payload) == "w1, w2"

    def test_first_organic_snippet_last(self):
        assert extract_answer({"organic_results": [{"snippet": "Y"}, {"snippet": "Z"}]}) == "Y"

    def test_empty_payload_gives_none(self):
        assert extract_answer({}) == "None"

    @pytest.mark.parametrize(
        "payload",
        [
            None,
            [],
            "text",
            {"answer_box": "not a dict"},
            {"answer_box": {"answer": ""}},
            {"answer_box": {"answer": 42}},
            {"organic_results": []},
            {"organic_results": [{"no_snippet": 1}]},
            {"organic_results": "bad"},
            {"answer_box": {"snippet_highlighted_words": [1, 2]}},
        ],
    )
    def test_malformed_payloads_are_total(self, payload):
        assert extract_answer(payload) == "None"


class FakeSession:
    """Queue of (status, json_payload | exception) responses."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def get(self, url, params=None, timeout=None):
        self.requests.append((url, dict(params or {})))
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        status, payload = item

        class Resp:
            status_code = status

            def json(self):
                return payload

        return Resp()


class TestSerpApiClient:
    def test_repeated_query_hits_cache_once(self):
        session = FakeSession([(200, {"answer_box": {"answer": "42"}})])
        client = SerpApiClient(api_key="k", session=session)
        assert client.search("the question") == "42"
        assert client.search("the question") == "42"
        assert len(session.requests) == 1
        assert session.requests[0][1]["q"] == "the question"
        assert session.requests[0][1]["engine"] == "google"

    def test_empty_query_rejected(self):
        client = SerpApiClient(api_key="k", session=FakeSession([]))
        with pytest.raises(ValueError):
            client.search("   ")

    def test_universe_diameter_payload(self):
        session = FakeSession([(200, {"answer_box": {"answer": "93 billion light-years"}})])
        client = SerpApiClient(api_key="k", session=session)
        assert client.search("what is the diameter of the universe") == "93 billion light-years"

    def test_transport_failure_becomes_none(self, monkeypatch, caplog):
        import requests

        monkeypatch.setattr("trajlab.tools.time.sleep", lambda s: None)
        session = FakeSession([requests.ConnectionError("boom")] * 3)
        client = SerpApiClient(api_key="k", session=session, max_attempts=3)
        with caplog.at_level(logging.WARNING):
            assert client.search("q") == NONE_OBSERVATION
        assert any("search failed" in r.message for r in caplog.records)

    def test_retry_then_success(self, monkeypatch):
        monkeypatch.setattr("trajlab.tools.time.sleep", lambda s: None)
        session = FakeSession([(500, {}), (200, {"answer_box": {"answer": "ok"}})])
        client = SerpApiClient(api_key="k", session=session, max_attempts=3)
        assert client.search("q") == "ok"

    def test_observations_feed_pool(self):
        pool = ObservationPool()
        session = FakeSession([(200, {"answer_box": {"answer": "obs"}})])
        client = SerpApiClient(api_key="k", session=session, pool=pool)
        client.search("q")
        client.search("q")  # cached; pooled once
        assert len(pool) == 1

    def test_missing_key_is_configuration_error(self, monkeypatch):
        monkeypatch.delenv("SERPAPI_KEY", raising=False)
        with pytest.raises(ConfigurationError):
            SerpApiClient()


class TestObservationPool:
    def test_sample_returns_member(self):
        import random

        pool = ObservationPool()
        pool.append("a")
        pool.append("b")
        assert pool.sample(random.Random(0)) in ("a", "b")

    def test_empty_pool_sample_errors(self):
        import random

        with pytest.raises(ConfigurationError):
            ObservationPool().sample(random.Random(0))

    def test_persistence_round_trip(self, tmp_path):
        path = tmp_path / "obs_pool.jsonl"
        pool = ObservationPool(path)
        pool.append("first")
        pool.append("second")
        lines = [json.loads(l) for l in path.read_text().splitlines()]
        assert lines == [{"obs": "first"}, {"obs": "second"}]
        reloaded = ObservationPool(path)
        assert len(reloaded) == 2


class CountingTool:
    def __init__(self, observation="real observation"):
        self.observation = observation
        self.calls = 0

    def search(self, query):
        self.calls += 1
        return self.observation


class TestPerturbation:
    def test_off_mode_is_identity(self):
        inner = CountingTool()
        wrapped = perturb(inner, PerturbationConfig(mode=PerturbMode.OFF))
        assert wrapped is inner

    def test_probability_zero_is_passthrough(self):
        inner = CountingTool()
        wrapped = perturb(inner, PerturbationConfig(mode=PerturbMode.NONE, probability=0.0, seed=1))
        observations = [wrapped.search("q") for _ in range(200)]
        assert observations == ["real observation"] * 200
        assert inner.calls == 200

    def test_probability_one_replaces_everything(self):
        inner = CountingTool()
        wrapped = perturb(inner, PerturbationConfig(mode=PerturbMode.NONE, probability=1.0, seed=1))
        observations = [wrapped.search("q") for _ in range(50)]
        assert observations == [NONE_OBSERVATION] * 50
        assert inner.calls == 0

    def test_none_mode_replacement_fraction(self):
        inner = CountingTool()
        wrapped = perturb(inner, PerturbationConfig(mode=PerturbMode.NONE, probability=0.5, seed=20240901))
        n = 10_000
        replaced = sum(1 for _ in range(n) if wrapped.search("q") == NONE_OBSERVATION)
        assert 0.48 <= replaced / n <= 0.52

    def test_same_seed_reproduces_decisions_bit_exactly(self):
        cfg = PerturbationConfig(mode=PerturbMode.NONE, probability=0.5, seed=7)
        a = perturb(CountingTool(), cfg)
        b = perturb(CountingTool(), cfg)
        seq_a = [a.search("q") for _ in range(500)]
        seq_b = [b.search("q") for _ in range(500)]
        assert seq_a == seq_b

    def test_random_mode_samples_from_pool(self):
        pool = ObservationPool()
        for obs in ("alpha", "beta", "gamma"):
            pool.append(obs)
        inner = CountingTool()
        wrapped = perturb(
            inner, PerturbationConfig(mode=PerturbMode.RANDOM, probability=1.0, seed=3), pool
        )
        observations = {wrapped.search("q") for _ in range(100)}
        assert observations <= {"alpha", "beta", "gamma"}
        assert len(observations) > 1

    def test_random_mode_requires_seeded_pool(self):
        with pytest.raises(ConfigurationError):
            PerturbedTool(CountingTool(), PerturbationConfig(mode=PerturbMode.RANDOM), ObservationPool())

    def test_invalid_probability_rejected(self):
        with pytest.raises(ValueError):
            PerturbationConfig(mode=PerturbMode.NONE, probability=1.5)

    def test_perturb_defaults_to_inner_tool_pool(self):
        inner = ScriptedTool({"q": "obs"})
        inner.search("q")
        wrapped = perturb(inner, PerturbationConfig(mode=PerturbMode.RANDOM, probability=1.0, seed=0))
        assert wrapped.search("anything") == "obs"


class TestScriptedTool:
    def test_payload_fixture_goes_through_extraction(self):
        tool = ScriptedTool({"q": {"answer_box": {"answer": "93 billion light-years"}}})
        assert tool.search("q") == "93 billion light-years"

    def test_unknown_query_fails_loudly(self):
        with pytest.raises(LookupError):
            ScriptedTool({}).search("mystery")
