from __future__ import annotations

import json

import pytest

from trajlab.agent import Finish, ParseFailure, Round, Trajectory, parse_rounds
from trajlab.curation import (
    CurationPlan,
    ExportFormat,
    PlanEntry,
    PlanFilters,
    apply_review,
    chat_messages_record,
    cot_to_react,
    dedup,
    export,
    filter_successful,
    load_review_sidecar,
    mix,
    mix_counts,
    pool_by_tags,
    prompt_completion_record,
    review,
    rounds_from_chat_record,
    zero_shot_prompt,
)
from trajlab.errors import CurationError, ExportError
from trajlab.lm import TokenUsage
from trajlab.prompts import get_prompt_set
from trajlab.qa import Method, Task

from .conftest import make_trajectory


def make_cot_trajectory(
    qid="cot1",
    question="Q?",
    thought="Because X, the answer is Y.",
    answer="Y",
    task=Task.HOTPOTQA,
):
    return Trajectory(
        question_id=qid,
        question=question,
        task=task,
        method=Method.COT,
        rounds=[Round(thought=thought, action=Finish(answer))],
        final_answer=answer,
        reward=1,
        truncated=False,
        usage=TokenUsage(10, 10),
    )


class TestFilterSuccessful:
    def test_reward_zero_excluded(self):
        kept = filter_successful([make_trajectory(reward=1), make_trajectory(qid="z", reward=0)])
        assert [t.question_id for t in kept] == ["t1"]

    def test_truncated_excluded(self):
        kept = filter_successful([make_trajectory(qid="tr", truncated=True)])
        assert kept == []

    def test_500_of_600(self):
        trajs = [
            make_trajectory(qid=f"t{i}", reward=1 if i < 500 else 0, answer="A" if i < 500 else "B")
            for i in range(600)
        ]
        assert len(filter_successful(trajs)) == 500

    def test_rounds_over_limit_dropped(self):
        trajs = [make_trajectory(qid="short", n_rounds=2), make_trajectory(qid="long", n_rounds=6)]
        kept = filter_successful(trajs, PlanFilters(max_rounds=3))
        assert [t.question_id for t in kept] == ["short"]

    def test_idempotent_and_subset(self):
        trajs = [make_trajectory(qid=f"t{i}", reward=i % 2) for i in range(10)]
        once = filter_successful(trajs)
        assert filter_successful(once) == once
        assert all(t in trajs for t in once)


class TestCotToReact:
    def test_milhouse_exemplar_converts(self):
        exemplar = get_prompt_set("hotpotqa-cot").exemplars[1]
        traj = make_cot_trajectory(
            question=exemplar.question, thought=exemplar.thought, answer=exemplar.answer
        )
        converted = cot_to_react(traj)
        assert len(converted.rounds) == 1
        assert converted.rounds[0].action == Finish("Richard Nixon")
        assert converted.rounds[0].thought == exemplar.thought
        assert converted.method is Method.COT_AS_REACT
        assert converted.reward == 1
        converted.validate()

    @pytest.mark.parametrize("index", range(6))
    def test_every_cot_exemplar_converts_verbatim(self, index):
        exemplar = get_prompt_set("hotpotqa-cot").exemplars[index]
        traj = make_cot_trajectory(
            qid=f"cot{index}", question=exemplar.question, thought=exemplar.thought, answer=exemplar.answer
        )
        converted = cot_to_react(traj)
        assert converted.rounds[0].action == Finish(exemplar.answer)

    def test_empty_thought_allowed(self):
        converted = cot_to_react(make_cot_trajectory(thought=""))
        assert converted.rounds[0].thought == ""

    def test_missing_answer_is_conversion_error(self):
        traj = make_cot_trajectory()
        broken = Trajectory(
            question_id=traj.question_id,
            question=traj.question,
            task=traj.task,
            method=Method.COT,
            rounds=[],
            final_answer=None,
            reward=0,
            truncated=False,
        )
        with pytest.raises(CurationError):
            cot_to_react(broken)

    def test_non_cot_input_rejected(self):
        with pytest.raises(CurationError):
            cot_to_react(make_trajectory(method=Method.REACT))

    def test_round_trip_through_renderer(self):
        from trajlab.agent import render_rounds

        converted = cot_to_react(make_cot_trajectory())
        assert parse_rounds(render_rounds(converted.rounds)) == converted.rounds


def _pools(react=600, cot=250, reflexion=60, task=Task.HOTPOTQA):
    pools = {}
    if react:
        pools[(task, Method.REACT)] = [
            make_trajectory(qid=f"{task.value}-r{i}", task=task, method=Method.REACT) for i in range(react)
        ]
    if cot:
        pools[(task, Method.COT)] = [
            cot_to_react(
                make_cot_trajectory(qid=f"{task.value}-c{i}", question=f"CoT {task.value} {i}?", task=task)
            )
            for i in range(cot)
        ]
    if reflexion:
        pools[(task, Method.REFLEXION)] = [
            make_trajectory(qid=f"{task.value}-f{i}", task=task, method=Method.REFLEXION, n_rounds=7)
            for i in range(reflexion)
        ]
    return pools


class TestMix:
    def test_multi_method_plan_counts(self):
        plan = CurationPlan(
            entries=[
                PlanEntry(Task.HOTPOTQA, Method.REACT, 500),
                PlanEntry(Task.HOTPOTQA, Method.COT, 187),
                PlanEntry(Task.HOTPOTQA, Method.REFLEXION, 47),
            ],
            seed=13,
        )
        mixed = mix(_pools(), plan)
        assert len(mixed) == 734
        counts = mix_counts(mixed)
        assert counts[(Task.HOTPOTQA, Method.REACT)] == 500
        assert counts[(Task.HOTPOTQA, Method.COT)] == 187
        assert counts[(Task.HOTPOTQA, Method.REFLEXION)] == 47

    def test_multi_task_plan_total(self):
        pools = {}
        pools.update(_pools(react=600, cot=300, reflexion=0, task=Task.HOTPOTQA))
        pools.update(_pools(react=500, cot=500, reflexion=0, task=Task.STRATEGYQA))
        pools.update(_pools(react=500, cot=500, reflexion=0, task=Task.MMLU))
        plan = CurationPlan(
            entries=[
                PlanEntry(Task.HOTPOTQA, Method.REACT, 500),
                PlanEntry(Task.HOTPOTQA, Method.COT, 277),
                PlanEntry(Task.STRATEGYQA, Method.REACT, 388),
                PlanEntry(Task.STRATEGYQA, Method.COT, 380),
                PlanEntry(Task.MMLU, Method.REACT, 456),
                PlanEntry(Task.MMLU, Method.COT, 469),
            ],
            seed=13,
        )
        mixed = mix(pools, plan)
        assert len(mixed) == 2470
        counts = mix_counts(mixed)
        assert counts[(Task.STRATEGYQA, Method.COT)] == 380
        assert counts[(Task.MMLU, Method.REACT)] == 456

    def test_zero_count_entry_contributes_nothing(self):
        plan = CurationPlan(
            entries=[
                PlanEntry(Task.HOTPOTQA, Method.REACT, 5),
                PlanEntry(Task.HOTPOTQA, Method.COT, 0),
            ],
            seed=1,
        )
        mixed = mix(_pools(react=10, cot=10, reflexion=0), plan)
        assert len(mixed) == 5
        assert all(t.method is Method.REACT for t in mixed)

    def test_shortfall_names_entry_and_amount(self):
        plan = CurationPlan(entries=[PlanEntry(Task.HOTPOTQA, Method.REFLEXION, 100)], seed=1)
        with pytest.raises(CurationError, match=r"Reflexion.*has 60.*wants 100.*short 40"):
            mix(_pools(), plan)

    def test_seeded_mix_is_deterministic(self):
        plan = CurationPlan(entries=[PlanEntry(Task.HOTPOTQA, Method.REACT, 50)], seed=99)
        pools = _pools(react=100, cot=0, reflexion=0)
        a = [t.question_id for t in mix(pools, plan)]
        b = [t.question_id for t in mix(pools, plan)]
        assert a == b

    def test_nested_sampling_across_counts(self):
        pools = _pools(react=300, cot=0, reflexion=0)
        small = mix(pools, CurationPlan(entries=[PlanEntry(Task.HOTPOTQA, Method.REACT, 100)], seed=7))
        large = mix(pools, CurationPlan(entries=[PlanEntry(Task.HOTPOTQA, Method.REACT, 200)], seed=7))
        assert {t.question_id for t in small} <= {t.question_id for t in large}

    def test_cot_as_react_counts_under_cot(self):
        plan = CurationPlan(entries=[PlanEntry(Task.HOTPOTQA, Method.COT, 3)], seed=1)
        mixed = mix(_pools(react=0, cot=5, reflexion=0), plan)
        assert len(mixed) == 3
        assert all(t.method is Method.COT_AS_REACT for t in mixed)

    def test_mislabeled_pool_rejected(self):
        plan = CurationPlan(entries=[PlanEntry(Task.MMLU, Method.REACT, 1)], seed=1)
        mislabeled = {(Task.MMLU, Method.REACT): [make_trajectory(task=Task.HOTPOTQA)]}
        with pytest.raises(CurationError, match="pooled under"):
            mix(mislabeled, plan)

    def test_duplicate_plan_entries_rejected(self):
        with pytest.raises(ValueError):
            CurationPlan(
                entries=[
                    PlanEntry(Task.HOTPOTQA, Method.COT, 1),
                    PlanEntry(Task.HOTPOTQA, Method.COT_AS_REACT, 1),
                ]
            )

    def test_plan_json_round_trip(self, tmp_path):
        plan = CurationPlan(
            entries=[PlanEntry(Task.HOTPOTQA, Method.REACT, 500)],
            filters=PlanFilters(require_reward_1=True, max_rounds=11),
            seed=3,
        )
        path = tmp_path / "plan.json"
        plan.to_json(path)
        loaded = CurationPlan.from_json(path)
        assert loaded.entries == plan.entries
        assert loaded.filters == plan.filters
        assert loaded.seed == plan.seed


def test_dedup_drops_exact_duplicates():
    a = make_trajectory(qid="a")
    b = make_trajectory(qid="a")  # same content
    c = make_trajectory(qid="c", question="Different?")
    assert dedup([a, b, c]) == [a, c]


def test_pool_by_tags_groups_base_methods():
    trajs = [
        make_trajectory(qid="r", method=Method.REACT),
        cot_to_react(make_cot_trajectory(qid="c")),
    ]
    pools = pool_by_tags(trajs)
    assert set(pools) == {(Task.HOTPOTQA, Method.REACT), (Task.HOTPOTQA, Method.COT)}


class TestChatExport:
    def test_three_round_trajectory_yields_seven_messages(self):
        record = chat_messages_record(make_trajectory(n_rounds=3))
        roles = [m["role"] for m in record["messages"]]
        assert roles == ["system", "user", "assistant", "user", "assistant", "user", "assistant"]
        assert len(record["messages"]) == 7

    def test_cot_as_react_yields_three_messages(self):
        record = chat_messages_record(cot_to_react(make_cot_trajectory()))
        assert [m["role"] for m in record["messages"]] == ["system", "user", "assistant"]

    @pytest.mark.parametrize("n_rounds", [1, 2, 3, 5, 11])
    def test_message_count_is_2k_plus_1(self, n_rounds):
        record = chat_messages_record(make_trajectory(n_rounds=n_rounds))
        assert len(record["messages"]) == 2 * n_rounds + 1

    def test_round_trip_reconstructs_rounds_verbatim(self):
        traj = make_trajectory(n_rounds=4)
        question, rounds = rounds_from_chat_record(chat_messages_record(traj))
        assert question == traj.question
        assert rounds == traj.rounds

    def test_multiline_thought_survives_chat_round_trip(self):
        traj = make_trajectory(n_rounds=2)
        traj.rounds[0] = Round(
            thought="first line\nsecond line",
            action=traj.rounds[0].action,
            observation=traj.rounds[0].observation,
        )
        question, rounds = rounds_from_chat_record(chat_messages_record(traj))
        assert rounds == traj.rounds

    def test_observations_live_in_user_messages(self):
        traj = make_trajectory(n_rounds=3)
        record = chat_messages_record(traj)
        user_observations = [
            m["content"] for m in record["messages"][2:] if m["role"] == "user"
        ]
        assert user_observations == [
            f"Observation: {r.observation}" for r in traj.rounds if r.observation is not None
        ]

    def test_no_reward_string_in_any_message(self):
        record = chat_messages_record(make_trajectory(n_rounds=3))
        assert all("Episode finished" not in m["content"] for m in record["messages"])

    def test_parse_failure_rounds_block_export(self):
        traj = make_trajectory(n_rounds=2)
        traj.rounds[0] = Round(thought="t", action=ParseFailure("junk"), observation="obs")
        with pytest.raises(ExportError):
            chat_messages_record(traj)


class TestPromptCompletionExport:
    def test_mask_spans_extract_exactly_the_observations(self):
        traj = make_trajectory(n_rounds=4)
        record = prompt_completion_record(traj)
        completion = record["completion"]
        extracted = [completion[s:e] for s, e in record["mask_spans"]]
        assert extracted == [r.observation for r in traj.rounds if r.observation is not None]

    def test_spans_disjoint_sorted_in_bounds(self):
        record = prompt_completion_record(make_trajectory(n_rounds=5))
        spans = record["mask_spans"]
        assert spans == sorted(spans)
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 <= s2
        for s, e in spans:
            assert 0 <= s < e <= len(record["completion"])

    def test_masking_flag_off_empties_spans(self):
        record = prompt_completion_record(make_trajectory(n_rounds=3), mask_observations=False)
        assert record["mask_spans"] == []

    def test_prompt_is_zero_shot_context(self):
        traj = make_trajectory(n_rounds=2)
        record = prompt_completion_record(traj)
        assert record["prompt"] == zero_shot_prompt(traj.question)
        assert record["prompt"].endswith(f"Question: {traj.question}\n")

    def test_completion_reparses_to_rounds(self):
        traj = make_trajectory(n_rounds=3)
        record = prompt_completion_record(traj)
        assert parse_rounds(record["completion"]) == traj.rounds


class TestExportFile:
    def test_chat_export_writes_jsonl(self, tmp_path):
        trajs = [make_trajectory(qid=f"t{i}") for i in range(3)]
        path = tmp_path / "train.jsonl"
        count = export(trajs, path, fmt=ExportFormat.CHAT_MESSAGES)
        assert count == 3
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 3
        assert all("messages" in json.loads(line) for line in lines)

    def test_prompt_completion_export(self, tmp_path):
        path = tmp_path / "train_pc.jsonl"
        export([make_trajectory()], path, fmt=ExportFormat.PROMPT_COMPLETION)
        record = json.loads(path.read_text().splitlines()[0])
        assert set(record) == {"prompt", "completion", "mask_spans"}

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ExportError):
            export([make_trajectory()], tmp_path / "x.jsonl", fmt="parquet")


class TestReview:
    def _trajs(self, n=4):
        return [make_trajectory(qid=f"t{i}") for i in range(n)]

    def test_reject_all_yields_empty_set(self, tmp_path):
        trajs = self._trajs()
        sidecar = tmp_path / "reviews.jsonl"
        decisions = review(trajs, sidecar, input_fn=lambda _: "r", output_fn=lambda _: None)
        assert len(decisions) == 4
        assert apply_review(trajs, decisions) == []

    def test_resume_starts_after_recorded_decisions(self, tmp_path):
        trajs = self._trajs()
        sidecar = tmp_path / "reviews.jsonl"
        prompts_seen = []

        def scripted_input(prompt):
            prompts_seen.append(prompt)
            return "a"

        shown = []
        review(trajs[:2], sidecar, input_fn=scripted_input, output_fn=shown.append)
        assert len(load_review_sidecar(sidecar)) == 2

        shown.clear()
        review(trajs, sidecar, input_fn=scripted_input, output_fn=shown.append)
        assert any("trajectory 3/4" in line for line in shown)
        assert all("trajectory 1/4" not in line for line in shown)
        assert len(load_review_sidecar(sidecar)) == 4

    def test_quit_preserves_progress(self, tmp_path):
        trajs = self._trajs()
        sidecar = tmp_path / "reviews.jsonl"
        answers = iter(["a", "q"])
        review(trajs, sidecar, input_fn=lambda _: next(answers), output_fn=lambda _: None)
        decisions = load_review_sidecar(sidecar)
        assert len(decisions) == 1
        assert decisions[0].decision == "accept"

    def test_edit_updates_answer_and_reward(self, tmp_path):
        trajs = [make_trajectory(reward=0, answer="wrong")]
        sidecar = tmp_path / "reviews.jsonl"
        answers = iter(["e", "corrected"])
        decisions = review(trajs, sidecar, input_fn=lambda _: next(answers), output_fn=lambda _: None)
        curated = apply_review(trajs, decisions)
        assert curated[0].final_answer == "corrected"
        assert curated[0].reward == 1
        assert curated[0].rounds[-1].action == Finish("corrected")

    def test_replaying_sidecar_is_deterministic(self, tmp_path):
        trajs = self._trajs()
        sidecar = tmp_path / "reviews.jsonl"
        answers = iter(["a", "r", "a", "r"])
        review(trajs, sidecar, input_fn=lambda _: next(answers), output_fn=lambda _: None)
        decisions = load_review_sidecar(sidecar)
        assert apply_review(trajs, decisions) == apply_review(trajs, decisions)
        assert [t.question_id for t in apply_review(trajs, decisions)] == ["t0", "t2"]
