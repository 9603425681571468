"""Turns raw trajectories into fine-tuning datasets: success filtering,
CoT-to-ReAct conversion, seeded method/task mixing, export to training
formats, and interactive human review.

Both export formats unify everything in the ReAct trajectory shape. In chat
exports, observations live in user-role messages so provider-side training
weights only assistant turns; in prompt-completion exports, an explicit span
mask marks the observation substrings for the local trainer.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .agent import Finish, ParseFailure, Round, Trajectory, parse_action, render_rounds
from .errors import CurationError, ExportError
from .prompts import REACT_INSTRUCTIONS
from .qa import Method, Task


@dataclass(frozen=True)
class PlanEntry:
    task: Task
    method: Method
    count: int

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError("plan counts must be non-negative")

    @property
    def key(self) -> tuple[Task, Method]:
        return (self.task, self.method.base())


@dataclass(frozen=True)
class PlanFilters:
    require_reward_1: bool = True
    max_rounds: int | None = None


@dataclass
class CurationPlan:
    """Per-(task, method) trajectory counts and filters defining a mix."""

    entries: list[PlanEntry]
    filters: PlanFilters = field(default_factory=PlanFilters)
    seed: int = 0

    def __post_init__(self) -> None:
        keys = [e.key for e in self.entries]
        if len(keys) != len(set(keys)):
            raise ValueError("plan entries must be unique per (task, method)")

    @property
    def total(self) -> int:
        return sum(e.count for e in self.entries)

    @classmethod
    def from_json(cls, path: str | Path) -> "CurationPlan":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = [
            PlanEntry(Task(e["task"]), Method(e["method"]), int(e["count"]))
            for e in data["entries"]
        ]
        filters_data = data.get("filters", {})
        filters = PlanFilters(
            require_reward_1=bool(filters_data.get("require_reward_1", True)),
            max_rounds=filters_data.get("max_rounds"),
        )
        return cls(entries=entries, filters=filters, seed=int(data.get("seed", 0)))

    def to_json(self, path: str | Path) -> None:
        data = {
            "entries": [
                {"task": e.task.value, "method": e.method.value, "count": e.count}
                for e in self.entries
            ],
            "filters": {
                "require_reward_1": self.filters.require_reward_1,
                "max_rounds": self.filters.max_rounds,
            },
            "seed": self.seed,
        }
        Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def filter_successful(trajs: Iterable[Trajectory], filters: PlanFilters = PlanFilters()) -> list[Trajectory]:
    """Keep curate-worthy trajectories: rewarded, untruncated, within budget.

    Output is a subset of the input and the operation is idempotent.
    """
    kept = []
    for traj in trajs:
        if traj.truncated:
            continue
        if filters.require_reward_1 and traj.reward != 1:
            continue
        if filters.max_rounds is not None and len(traj.rounds) > filters.max_rounds:
            continue
        kept.append(traj)
    return kept


def cot_to_react(traj: Trajectory) -> Trajectory:
    """Reformat a chain-of-thought trajectory as a one-round ReAct trajectory.

    The CoT reasoning becomes the round's thought and the action returns the
    answer; the method tag becomes CoT-as-ReAct and the reward is preserved.
    """
    if traj.method.base() is not Method.COT:
        raise CurationError(f"{traj.question_id}: cot_to_react expects a CoT trajectory")
    answer = traj.final_answer
    if answer is None:
        for r in traj.rounds:
            if isinstance(r.action, Finish):
                answer = r.action.answer
                break
    if answer is None:
        raise CurationError(f"{traj.question_id}: CoT trajectory has no answer to convert")
    thought = traj.rounds[0].thought if traj.rounds else ""
    converted = replace(
        traj,
        method=Method.COT_AS_REACT,
        rounds=[Round(thought=thought, action=Finish(answer))],
        final_answer=answer,
        truncated=False,
    )
    return converted


def dedup(trajs: Sequence[Trajectory]) -> list[Trajectory]:
    """Drop exact-duplicate (question, rendered rounds) pairs, keeping order."""
    seen: set[tuple[str, str]] = set()
    out = []
    for traj in trajs:
        key = (traj.question, render_rounds(traj.rounds))
        if key in seen:
            continue
        seen.add(key)
        out.append(traj)
    return out


def pool_by_tags(trajs: Iterable[Trajectory]) -> dict[tuple[Task, Method], list[Trajectory]]:
    """Group trajectories by (task, base method) for plan mixing."""
    pools: dict[tuple[Task, Method], list[Trajectory]] = {}
    for traj in trajs:
        pools.setdefault((traj.task, traj.method.base()), []).append(traj)
    return pools


def _entry_rng(seed: int, entry: PlanEntry) -> random.Random:
    return random.Random(f"{seed}:{entry.task.value}:{entry.method.base().value}")


def mix(pools: dict[tuple[Task, Method], list[Trajectory]], plan: CurationPlan) -> list[Trajectory]:
    """Draw exactly plan.entries counts from the pools and shuffle the result.

    Per entry: the deduplicated pool is shuffled with an entry-specific seed
    and the first `count` trajectories are taken, so plans that differ only
    in counts draw nested samples. The combined output is shuffled with the
    plan seed. Shortfalls name the entry and the missing amount.
    """
    normalized: dict[tuple[Task, Method], list[Trajectory]] = {}
    for (task, method), pool in pools.items():
        for traj in pool:
            if (traj.task, traj.method.base()) != (task, method.base()):
                raise CurationError(
                    f"{traj.question_id} is tagged ({traj.task.value}, {traj.method.value}) "
                    f"but pooled under ({task.value}, {method.value})"
                )
        normalized.setdefault((task, method.base()), []).extend(pool)

    mixed: list[Trajectory] = []
    for entry in plan.entries:
        pool = dedup(normalized.get(entry.key, []))
        if len(pool) < entry.count:
            raise CurationError(
                f"pool ({entry.task.value}, {entry.method.base().value}) has {len(pool)} "
                f"trajectories, plan wants {entry.count} (short {entry.count - len(pool)})"
            )
        shuffled = list(pool)
        _entry_rng(plan.seed, entry).shuffle(shuffled)
        mixed.extend(shuffled[: entry.count])
    random.Random(f"{plan.seed}:shuffle").shuffle(mixed)
    return mixed


def mix_counts(trajs: Iterable[Trajectory]) -> dict[tuple[Task, Method], int]:
    counts: dict[tuple[Task, Method], int] = {}
    for traj in trajs:
        key = (traj.task, traj.method.base())
        counts[key] = counts.get(key, 0) + 1
    return counts


def _check_exportable(traj: Trajectory) -> None:
    for i, r in enumerate(traj.rounds):
        if isinstance(r.action, ParseFailure):
            raise ExportError(
                f"{traj.question_id}: round {i + 1} carries an unparsed action; clean before export"
            )


def chat_messages_record(traj: Trajectory) -> dict:
    """One chat-format training record.

    Layout: system instructions, the question as a user turn, then per round
    an assistant turn "Thought: ...\\nAction: ..." and, for non-final rounds,
    the observation as a user turn. A K-round trajectory yields 2K+1
    messages. The final round never carries an observation, so no reward
    string leaks into training targets.
    """
    _check_exportable(traj)
    messages = [
        {"role": "system", "content": REACT_INSTRUCTIONS},
        {"role": "user", "content": f"Question: {traj.question}"},
    ]
    for r in traj.rounds:
        messages.append(
            {"role": "assistant", "content": f"Thought: {r.thought}\nAction: {r.rendered_action()}"}
        )
        if r.observation is not None:
            messages.append({"role": "user", "content": f"Observation: {r.observation}"})
    return {"messages": messages}


def rounds_from_chat_record(record: dict) -> tuple[str, list[Round]]:
    """Reconstruct (question, rounds) from a chat-format record (the inverse
    of chat_messages_record, used for export integrity checks)."""
    question: str | None = None
    rounds: list[Round] = []
    pending: tuple[str, str] | None = None  # (thought, action_raw)

    def flush(observation: str | None) -> None:
        nonlocal pending
        if pending is None:
            return
        thought, raw = pending
        rounds.append(Round(thought=thought, action=parse_action(raw), observation=observation, action_raw=raw))
        pending = None

    for msg in record["messages"]:
        role, content = msg["role"], msg["content"]
        if role == "system":
            continue
        if role == "user" and question is None:
            if not content.startswith("Question: "):
                raise ValueError("first user message must carry the question")
            question = content[len("Question: "):]
        elif role == "assistant":
            flush(None)
            thought_part, sep, action_part = content.partition("\nAction: ")
            if not sep:
                raise ValueError("assistant message must carry a Thought/Action pair")
            if not thought_part.startswith("Thought: "):
                raise ValueError("assistant message must start with 'Thought: '")
            pending = (thought_part[len("Thought: "):], action_part)
        elif role == "user":
            if not content.startswith("Observation: "):
                raise ValueError("observation message must start with 'Observation: '")
            flush(content[len("Observation: "):])
    flush(None)
    if question is None:
        raise ValueError("record has no question message")
    return question, rounds


def zero_shot_prompt(question: str) -> str:
    """The zero-shot inference context a fine-tuned model is trained against."""
    return f"{REACT_INSTRUCTIONS}\n\nQuestion: {question}\n"


def prompt_completion_record(traj: Trajectory, mask_observations: bool = True) -> dict:
    """One prompt-completion training record with observation mask spans.

    The prompt is the zero-shot rendered context; the completion is the full
    round text. mask_spans are [start, end) character offsets into the
    completion covering exactly the observation texts; pass
    mask_observations=False for the unmasked ablation.
    """
    _check_exportable(traj)
    parts: list[str] = []
    spans: list[list[int]] = []
    offset = 0

    def push(text: str) -> None:
        nonlocal offset
        parts.append(text)
        offset += len(text)

    for i, r in enumerate(traj.rounds):
        if i > 0:
            push("\n")
        push(f"Thought: {r.thought}\nAction: {r.rendered_action()}")
        if r.observation is not None:
            push("\nObservation: ")
            spans.append([offset, offset + len(r.observation)])
            push(r.observation)
    record = {
        "prompt": zero_shot_prompt(traj.question),
        "completion": "".join(parts),
        "mask_spans": spans if mask_observations else [],
    }
    return record


class ExportFormat:
    CHAT_MESSAGES = "chat"
    PROMPT_COMPLETION = "prompt-completion"


def export(
    trajs: Sequence[Trajectory],
    path: str | Path,
    fmt: str = ExportFormat.CHAT_MESSAGES,
    mask_observations: bool = True,
) -> int:
    """Write curated trajectories to a training-format JSONL file."""
    if fmt == ExportFormat.CHAT_MESSAGES:
        records = (chat_messages_record(t) for t in trajs)
    elif fmt == ExportFormat.PROMPT_COMPLETION:
        records = (prompt_completion_record(t, mask_observations) for t in trajs)
    else:
        raise ExportError(f"unknown export format {fmt!r}")
    count = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count


@dataclass(frozen=True)
class ReviewDecision:
    index: int
    question_id: str
    decision: str  # accept | reject | edit
    answer: str | None = None


def load_review_sidecar(path: str | Path) -> list[ReviewDecision]:
    decisions = []
    path = Path(path)
    if path.exists():
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                data = json.loads(line)
                decisions.append(
                    ReviewDecision(
                        index=int(data["index"]),
                        question_id=data["question_id"],
                        decision=data["decision"],
                        answer=data.get("answer"),
                    )
                )
    return decisions


def review(
    trajs: Sequence[Trajectory],
    sidecar_path: str | Path,
    input_fn: Callable[[str], str] | None = None,
    output_fn: Callable[[str], None] = print,
) -> list[ReviewDecision]:
    """Interactive accept/reject/edit pass over trajectories.

    Decisions append to a sidecar JSONL keyed by position, so a rerun
    resumes after the last recorded decision; quitting preserves progress.
    """
    if input_fn is None:
        input_fn = input
    decisions = load_review_sidecar(sidecar_path)
    start = len(decisions)
    with Path(sidecar_path).open("a", encoding="utf-8") as fh:
        for i in range(start, len(trajs)):
            traj = trajs[i]
            output_fn(f"--- trajectory {i + 1}/{len(trajs)} [{traj.question_id}] "
                      f"reward={traj.reward} method={traj.method.value}")
            output_fn(f"Question: {traj.question}")
            output_fn(render_rounds(traj.rounds))
            output_fn(f"final answer: {traj.final_answer!r}")
            while True:
                key = input_fn("[a]ccept / [r]eject / [e]dit answer / [q]uit: ").strip().lower()
                if key in ("a", "r", "e", "q"):
                    break
                output_fn("unrecognized key")
            if key == "q":
                break
            if key == "e":
                answer = input_fn("corrected answer: ")
                decision = ReviewDecision(i, traj.question_id, "edit", answer)
            else:
                decision = ReviewDecision(i, traj.question_id, "accept" if key == "a" else "reject")
            fh.write(
                json.dumps(
                    {
                        "index": decision.index,
                        "question_id": decision.question_id,
                        "decision": decision.decision,
                        "answer": decision.answer,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            fh.flush()
            decisions.append(decision)
    return decisions


def apply_review(trajs: Sequence[Trajectory], decisions: Sequence[ReviewDecision]) -> list[Trajectory]:
    """Apply recorded review decisions; replaying a sidecar is deterministic.

    Edited answers replace the final answer and Finish payload; the human
    validated them, so the reward becomes 1. Undecided trajectories are
    excluded.
    """
    by_index = {d.index: d for d in decisions}
    curated = []
    for i, traj in enumerate(trajs):
        decision = by_index.get(i)
        if decision is None or decision.decision == "reject":
            continue
        if decision.question_id != traj.question_id:
            raise CurationError(
                f"review sidecar mismatch at {i}: {decision.question_id} != {traj.question_id}"
            )
        if decision.decision == "edit" and decision.answer is not None:
            rounds = list(traj.rounds)
            if rounds and isinstance(rounds[-1].action, Finish):
                last = rounds[-1]
                rounds[-1] = Round(
                    thought=last.thought,
                    action=Finish(decision.answer),
                    observation=last.observation,
                    is_reflection=last.is_reflection,
                )
            curated.append(replace(traj, rounds=rounds, final_answer=decision.answer, reward=1))
        else:
            curated.append(traj)
    return curated
