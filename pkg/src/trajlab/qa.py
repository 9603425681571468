"""Task/method tags and QA dataset items."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Task(str, Enum):
    HOTPOTQA = "HotpotQA"
    BAMBOOGLE = "Bamboogle"
    STRATEGYQA = "StrategyQA"
    MMLU = "MMLU"


class Method(str, Enum):
    IO = "IO"
    COT = "CoT"
    REACT = "ReAct"
    REFLEXION = "Reflexion"
    # Tag applied to converted chain-of-thought trajectories; counts as COT
    # for plan/mix bookkeeping (see Method.base).
    COT_AS_REACT = "CoT-as-ReAct"

    def base(self) -> "Method":
        """Collapse derived tags onto the generating method."""
        return Method.COT if self is Method.COT_AS_REACT else self


class AnswerStyle(str, Enum):
    SPAN = "Span"
    YESNO = "YesNo"
    MULTICHOICE = "MultiChoice"


@dataclass(frozen=True)
class QAItem:
    """One dataset question with its gold answer(s).

    choices is present iff answer_style is MULTICHOICE, in which case the
    gold answer is a single choice letter.
    """

    question_id: str
    task: Task
    question: str
    gold_answers: tuple[str, ...]
    answer_style: AnswerStyle = AnswerStyle.SPAN
    choices: tuple[tuple[str, str], ...] | None = None

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise ValueError(f"{self.question_id}: empty question")
        if not self.gold_answers:
            raise ValueError(f"{self.question_id}: no gold answers")
        if (self.answer_style is AnswerStyle.MULTICHOICE) != (self.choices is not None):
            raise ValueError(
                f"{self.question_id}: choices must be present iff answer_style is MultiChoice"
            )
        if self.answer_style is AnswerStyle.YESNO:
            for gold in self.gold_answers:
                if gold.strip().lower() not in ("yes", "no"):
                    raise ValueError(f"{self.question_id}: yes/no gold must normalize to yes or no")


@dataclass(frozen=True)
class SplitSpec:
    """Which slice of a dataset to load; same spec always yields the same sample."""

    task: Task
    split: str = "dev"
    sample_size: int | None = None  # None means the full split
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sample_size is not None and self.sample_size < 0:
            raise ValueError("sample_size must be non-negative")
