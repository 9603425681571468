"""Episode state machine: action parsing, context rendering, and
thought-action-observation round execution for IO / CoT / ReAct / Reflexion.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Iterable, Sequence, Union

from . import prompts
from .errors import EpisodeError, ToolError, TransportError
from .lm import GenerationRequest, LanguageModelClient, TokenUsage
from .metrics import item_em
from .qa import Method, QAItem, Task

if TYPE_CHECKING:
    from .prompts import PromptSet
    from .tools import Tool

# Corrective observation injected when the LM emits an unparseable action.
INVALID_ACTION_OBSERVATION = "Invalid action. Valid actions are search[question] or finish[answer]."

# Instruction appended to the context before a reflection round, prompting the
# agent to pivot its strategy mid-trajectory.
REFLECTION_INSTRUCTION = (
    "Reflection: The approach so far has not produced the answer. Reconsider the strategy "
    "and state a revised plan."
)

DEFAULT_MAX_ROUNDS = 11
DEFAULT_REFLECTION_ROUNDS = frozenset({6, 10})


@dataclass(frozen=True)
class Search:
    query: str

    def __post_init__(self) -> None:
        if not self.query.strip():
            raise ValueError("search query must be non-empty after trimming")

    def render(self) -> str:
        return f"search[{self.query}]"


@dataclass(frozen=True)
class Finish:
    answer: str

    def render(self) -> str:
        return f"finish[{self.answer}]"


@dataclass(frozen=True)
class ParseFailure:
    """An action line that matched neither search[...] nor finish[...]."""

    raw: str

    def render(self) -> str:
        return self.raw


Action = Union[Search, Finish]
ActionOrFailure = Union[Search, Finish, ParseFailure]

# Keyword is case-insensitive; bracket content runs to the last ']' on the
# line (queries may themselves contain '?' and commas, never nested brackets).
_ACTION_RE = re.compile(r"^(search|finish)\s*\[(.*)\]$", re.IGNORECASE)


def parse_action(raw: str) -> ActionOrFailure:
    """Parse one LM action line into Search/Finish, or ParseFailure.

    ParseFailure is a value, not an exception: the episode loop converts it
    into a corrective observation and carries on.
    """
    match = _ACTION_RE.match(raw.strip())
    if not match:
        return ParseFailure(raw)
    keyword = match.group(1).lower()
    payload = match.group(2)
    if keyword == "search":
        if not payload.strip():
            return ParseFailure(raw)
        return Search(payload)
    return Finish(payload)


@dataclass(frozen=True)
class Round:
    """One thought-action-observation round.

    observation is None only when the action is Finish or the round is the
    final round of a truncated episode. action_raw preserves the LM's
    original action line; as provenance metadata it is excluded from
    equality.
    """

    thought: str
    action: ActionOrFailure
    observation: str | None = None
    is_reflection: bool = False
    action_raw: str | None = field(default=None, compare=False)

    def rendered_action(self) -> str:
        if self.action_raw is not None:
            return self.action_raw
        return self.action.render()


@dataclass
class Trajectory:
    question_id: str
    question: str
    task: Task
    method: Method
    rounds: list[Round]
    final_answer: str | None
    reward: int
    truncated: bool
    usage: TokenUsage = field(default_factory=TokenUsage)
    wall_time_s: float = 0.0

    def validate(self, max_rounds: int | None = None) -> None:
        """Raise ValueError on any violated trajectory invariant."""
        if not self.rounds:
            raise ValueError("trajectory must have at least one round")
        if max_rounds is not None and len(self.rounds) > max_rounds:
            raise ValueError(f"{len(self.rounds)} rounds exceeds limit {max_rounds}")
        finishes = [i for i, r in enumerate(self.rounds) if isinstance(r.action, Finish)]
        if self.truncated == bool(finishes):
            raise ValueError("truncated must hold exactly when no Finish action occurs")
        if self.reward not in (0, 1):
            raise ValueError("reward must be 0 or 1")
        if self.reward == 1 and self.final_answer is None:
            raise ValueError("reward 1 requires a final answer")
        if self.truncated and self.reward != 0:
            raise ValueError("truncated trajectories have reward 0")
        if self.method in (Method.COT, Method.COT_AS_REACT, Method.IO):
            if len(self.rounds) != 1 or not isinstance(self.rounds[0].action, Finish):
                raise ValueError(f"{self.method.value} trajectories are one Finish round")
        last = len(self.rounds) - 1
        for i, r in enumerate(self.rounds):
            ends_episode = isinstance(r.action, Finish) or (i == last and self.truncated)
            if ends_episode != (r.observation is None):
                raise ValueError(f"round {i + 1}: observation must be absent iff the episode ends there")

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "task": self.task.value,
            "method": self.method.value,
            "rounds": [
                {
                    "thought": r.thought,
                    "action_raw": r.rendered_action(),
                    "action": _action_to_dict(r.action),
                    "observation": r.observation,
                    "is_reflection": r.is_reflection,
                }
                for r in self.rounds
            ],
            "final_answer": self.final_answer,
            "reward": self.reward,
            "truncated": self.truncated,
            "usage": self.usage.to_dict(),
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        rounds = [
            Round(
                thought=r["thought"],
                action=_action_from_dict(r["action"]),
                observation=r.get("observation"),
                is_reflection=bool(r.get("is_reflection", False)),
                action_raw=r.get("action_raw"),
            )
            for r in data["rounds"]
        ]
        return cls(
            question_id=data["question_id"],
            question=data["question"],
            task=Task(data["task"]),
            method=Method(data["method"]),
            rounds=rounds,
            final_answer=data.get("final_answer"),
            reward=int(data["reward"]),
            truncated=bool(data["truncated"]),
            usage=TokenUsage.from_dict(data.get("usage", {})),
            wall_time_s=float(data.get("wall_time_s", 0.0)),
        )


def _action_to_dict(action: ActionOrFailure) -> dict:
    if isinstance(action, Search):
        return {"type": "search", "payload": action.query}
    if isinstance(action, Finish):
        return {"type": "finish", "payload": action.answer}
    return {"type": "invalid", "payload": action.raw}


def _action_from_dict(data: dict) -> ActionOrFailure:
    kind = data["type"]
    if kind == "search":
        return Search(data["payload"])
    if kind == "finish":
        return Finish(data["payload"])
    if kind == "invalid":
        return ParseFailure(data["payload"])
    raise ValueError(f"unknown action type {kind!r}")


def write_trajectories(path: str | Path, trajs: Iterable[Trajectory], append: bool = False) -> int:
    """Write trajectories as JSONL (one per line); returns the count written."""
    mode = "a" if append else "w"
    count = 0
    with Path(path).open(mode, encoding="utf-8") as fh:
        for traj in trajs:
            fh.write(json.dumps(traj.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_trajectories(path: str | Path) -> list[Trajectory]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(Trajectory.from_dict(json.loads(line)))
    return out


def _default_stop(method: Method) -> tuple[str, ...]:
    # ReAct-style generation must stop before hallucinating tool output; the
    # single-shot formats stop before drifting into a next exemplar question.
    if method.base() in (Method.REACT, Method.REFLEXION):
        return ("Observation",)
    return ("Question",)


@dataclass
class EpisodeConfig:
    """How to run one episode.

    reflection_rounds defaults to {6, 10} for Reflexion and must stay empty
    for every other method; an empty set under Reflexion means the model is
    expected to self-trigger reflections (fine-tuned mode).
    """

    method: Method
    prompt_set_id: str
    max_rounds: int = DEFAULT_MAX_ROUNDS
    reflection_rounds: frozenset[int] | None = None
    stop_sequences: tuple[str, ...] | None = None
    temperature: float = 0.0
    max_tokens: int = 512
    zero_shot: bool = False

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.reflection_rounds is None:
            self.reflection_rounds = (
                DEFAULT_REFLECTION_ROUNDS if self.method is Method.REFLEXION else frozenset()
            )
        else:
            self.reflection_rounds = frozenset(self.reflection_rounds)
        if self.reflection_rounds and self.method is not Method.REFLEXION:
            raise ValueError("reflection_rounds is only meaningful for the Reflexion method")
        if any(r < 1 or r > self.max_rounds for r in self.reflection_rounds):
            raise ValueError("reflection_rounds must lie within [1, max_rounds]")
        if self.stop_sequences is None:
            self.stop_sequences = _default_stop(self.method)
        else:
            self.stop_sequences = tuple(self.stop_sequences)
        if not self.stop_sequences:
            raise ValueError("episode generation requires at least one stop sequence")


def render_rounds(rounds: Sequence[Round]) -> str:
    """Render rounds as Thought/Action/Observation lines."""
    lines: list[str] = []
    for r in rounds:
        lines.append(f"Thought: {r.thought}")
        lines.append(f"Action: {r.rendered_action()}")
        if r.observation is not None:
            lines.append(f"Observation: {r.observation}")
    return "\n".join(lines)


def render_context(
    cfg: EpisodeConfig,
    prompt_set: "PromptSet",
    question: str,
    partial: Sequence[Round] = (),
) -> str:
    """Render the LM context: instructions, exemplars (unless zero-shot),
    the question, then any completed rounds. Pure: identical inputs yield
    identical bytes. Ends with a newline, awaiting the next thought.
    """
    for r in partial:
        if r.observation is None:
            raise ValueError("partial rounds must all carry observations")
    if cfg.zero_shot:
        blocks = [prompt_set.instructions]
    else:
        head = prompt_set.instructions
        if prompt_set.examples_intro and prompt_set.exemplars:
            head = f"{head}\n{prompt_set.examples_intro}"
        blocks = [head, *prompt_set.render_exemplars()]
    question_block = f"Question: {question}"
    rounds_text = render_rounds(partial)
    if rounds_text:
        question_block = f"{question_block}\n{rounds_text}"
    blocks.append(question_block)
    return "\n\n".join(blocks) + "\n"


_LABEL_PREFIXES = ("Thought:", "Action:", "Observation:")


def _strip_label(line: str, label: str) -> str:
    rest = line[len(label):]
    return rest[1:] if rest.startswith(" ") else rest


def parse_rounds(text: str) -> list[Round]:
    """Reparse rendered round text (the inverse of render_rounds).

    Lines that start no new label continue the previous field, so multi-line
    thoughts and observations survive the round trip.
    """
    rounds: list[Round] = []
    current: dict | None = None
    fld: str | None = None

    def flush() -> None:
        nonlocal current
        if current is None:
            return
        raw = current.get("action", "")
        rounds.append(
            Round(
                thought=current.get("thought", ""),
                action=parse_action(raw),
                observation=current.get("observation"),
                action_raw=raw,
            )
        )
        current = None

    # Split on "\n" only (the renderer's join); splitlines() would also split
    # on exotic separators inside field text and break the round trip.
    for line in text.split("\n"):
        if line.startswith("Thought:"):
            flush()
            current = {"thought": _strip_label(line, "Thought:")}
            fld = "thought"
        elif line.startswith("Action:") and current is not None:
            current["action"] = _strip_label(line, "Action:")
            fld = "action"
        elif line.startswith("Observation:") and current is not None:
            current["observation"] = _strip_label(line, "Observation:")
            fld = "observation"
        elif current is not None and fld is not None:
            current[fld] = current[fld] + "\n" + line
        # Text before the first Thought label is not round content; skip it.
    flush()
    return rounds


def parse_episode_text(text: str) -> tuple[str, list[Round]]:
    """Split rendered episode text into (question, rounds).

    Expects a 'Question:' line; the question runs until the first 'Thought:'
    line (multi-choice questions span several lines).
    """
    if text.endswith("\n"):  # rendered contexts end with a terminator newline
        text = text[:-1]
    lines = text.split("\n")
    q_start = next((i for i, ln in enumerate(lines) if ln.startswith("Question:")), None)
    if q_start is None:
        raise ValueError("no 'Question:' line found")
    question_lines = [_strip_label(lines[q_start], "Question:")]
    i = q_start + 1
    while i < len(lines) and not lines[i].startswith("Thought:"):
        question_lines.append(lines[i])
        i += 1
    return "\n".join(question_lines), parse_rounds("\n".join(lines[i:]))


_GEN_ACTION_RE = re.compile(r"^\s*Action\s*:\s*(.*)$", re.IGNORECASE)
_GEN_ANSWER_RE = re.compile(r"^\s*Answer\s*:\s*(.*)$", re.IGNORECASE)
_GEN_THOUGHT_RE = re.compile(r"^\s*Thought\s*:\s*(.*)$", re.IGNORECASE)


def _extract_thought(lines: Sequence[str]) -> str:
    if not lines:
        return ""
    first = _GEN_THOUGHT_RE.match(lines[0])
    head = first.group(1) if first else lines[0]
    return "\n".join([head, *lines[1:]]).strip()


def split_react_generation(text: str) -> tuple[str, ActionOrFailure, str]:
    """Split one LM completion into (thought, action, raw action line).

    Lenient on label casing/spacing since this consumes raw model output.
    A completion without an Action line parses as a failure carrying the
    whole text.
    """
    lines = text.splitlines()
    for i, line in enumerate(lines):
        match = _GEN_ACTION_RE.match(line)
        if match:
            raw = match.group(1).strip()
            return _extract_thought(lines[:i]), parse_action(raw), raw
    stripped = text.strip()
    return _extract_thought(lines), ParseFailure(stripped), stripped


def split_answer_generation(text: str) -> tuple[str, str | None]:
    """Split a CoT/IO completion into (thought, answer).

    Accepts the exemplar 'Answer:' format as well as an explicit
    finish[...] action; returns answer None when neither is present.
    """
    lines = text.splitlines()
    for i, line in enumerate(lines):
        match = _GEN_ANSWER_RE.match(line)
        if match:
            return _extract_thought(lines[:i]), match.group(1).strip()
    for i, line in enumerate(lines):
        match = _GEN_ACTION_RE.match(line)
        if match:
            action = parse_action(match.group(1).strip())
            if isinstance(action, Finish):
                return _extract_thought(lines[:i]), action.answer
    return text.strip(), None


def run_episode(
    cfg: EpisodeConfig,
    item: QAItem,
    lm: LanguageModelClient,
    tool: "Tool | None" = None,
    clock: Callable[[], float] = time.monotonic,
) -> Trajectory:
    """Run one question-answering episode and return its trajectory.

    The loop renders the context, asks the LM for the next thought+action,
    executes Search actions against the tool, and stops on Finish or after
    cfg.max_rounds (truncation). Parse failures become corrective
    observations; tool failures become the literal observation "None".
    Reward is exact match of the final answer against the item's golds.
    """
    prompt_set = prompts.get_prompt_set(cfg.prompt_set_id)
    start = clock()
    usage = TokenUsage()

    def generate(context: str) -> tuple[str, TokenUsage]:
        req = GenerationRequest(
            prompt=context,
            temperature=cfg.temperature,
            max_tokens=cfg.max_tokens,
            stop=cfg.stop_sequences,
        )
        try:
            return lm.generate(req)
        except TransportError as exc:
            raise EpisodeError(f"LM transport failure for {item.question_id}: {exc}") from exc

    rounds: list[Round] = []
    final_answer: str | None = None
    truncated = False

    if cfg.method.base() in (Method.COT, Method.IO):
        context = render_context(cfg, prompt_set, item.question)
        text, call_usage = generate(context)
        usage += call_usage
        thought, answer = split_answer_generation(text)
        final_answer = answer if answer is not None else ""
        rounds.append(Round(thought=thought, action=Finish(final_answer)))
    else:
        for idx in range(1, cfg.max_rounds + 1):
            context = render_context(cfg, prompt_set, item.question, rounds)
            is_reflection = idx in cfg.reflection_rounds
            if is_reflection:
                context += REFLECTION_INSTRUCTION + "\n"
            text, call_usage = generate(context)
            usage += call_usage
            thought, action, raw = split_react_generation(text)
            if isinstance(action, Finish):
                final_answer = action.answer
                rounds.append(Round(thought, action, None, is_reflection, raw))
                break
            if idx == cfg.max_rounds:
                # Budget exhausted: record the round unexecuted and stop.
                rounds.append(Round(thought, action, None, is_reflection, raw))
                truncated = True
                break
            if isinstance(action, Search):
                if tool is None:
                    raise EpisodeError(f"{item.question_id}: search action but no tool wired")
                try:
                    observation = tool.search(action.query)
                except ToolError:
                    observation = "None"
            else:
                observation = INVALID_ACTION_OBSERVATION
            rounds.append(Round(thought, action, observation, is_reflection, raw))

    reward = 0
    if final_answer is not None and not truncated:
        reward = item_em(final_answer, item)

    traj = Trajectory(
        question_id=item.question_id,
        question=item.question,
        task=item.task,
        method=cfg.method,
        rounds=rounds,
        final_answer=final_answer,
        reward=reward,
        truncated=truncated,
        usage=usage,
        wall_time_s=clock() - start,
    )
    traj.validate(cfg.max_rounds)
    return traj


def retag(traj: Trajectory, method: Method) -> Trajectory:
    """Copy a trajectory under a different method tag."""
    return replace(traj, method=method, rounds=list(traj.rounds))
