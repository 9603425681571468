"""Loaders, seeded samplers, and answer typing for the four QA tasks.

On-disk formats are the public distribution formats:

- HotpotQA: JSON array of objects with _id / question / answer
- StrategyQA: JSON array of objects with qid / question / answer (boolean)
- MMLU: headerless CSV rows question, A, B, C, D, answer-letter
- Bamboogle: two-column CSV (question, answer), optional header row
"""

from __future__ import annotations

import csv
import hashlib
import json
import random
from pathlib import Path

from .errors import DatasetError
from .qa import AnswerStyle, QAItem, SplitSpec, Task

_CHOICE_LETTERS = ("A", "B", "C", "D")


def _content_id(prefix: str, question: str) -> str:
    digest = hashlib.sha1(question.encode("utf-8")).hexdigest()[:12]
    return f"{prefix}-{digest}"


def _load_hotpotqa(path: Path) -> list[QAItem]:
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise DatasetError(f"{path}: expected a JSON array of questions")
    items = []
    for i, row in enumerate(data):
        try:
            question = row["question"]
            answer = row["answer"]
            qid = row.get("_id") or _content_id("hotpotqa", question)
        except (TypeError, KeyError) as exc:
            raise DatasetError(f"{path}: entry {i} missing field {exc}") from None
        if str(answer).strip().lower() in ("yes", "no"):
            items.append(
                QAItem(
                    question_id=str(qid),
                    task=Task.HOTPOTQA,
                    question=str(question),
                    gold_answers=(str(answer).strip().lower(),),
                    answer_style=AnswerStyle.YESNO,
                )
            )
        else:
            items.append(
                QAItem(
                    question_id=str(qid),
                    task=Task.HOTPOTQA,
                    question=str(question),
                    gold_answers=(str(answer),),
                )
            )
    return items


def _load_strategyqa(path: Path) -> list[QAItem]:
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise DatasetError(f"{path}: expected a JSON array of questions")
    items = []
    for i, row in enumerate(data):
        try:
            question = str(row["question"])
            answer = row["answer"]
            qid = str(row.get("qid") or _content_id("strategyqa", question))
        except (TypeError, KeyError) as exc:
            raise DatasetError(f"{path}: entry {i} missing field {exc}") from None
        if not isinstance(answer, bool):
            raise DatasetError(f"{path}: entry {i}: answer must be a boolean")
        items.append(
            QAItem(
                question_id=qid,
                task=Task.STRATEGYQA,
                # The prompt exemplars phrase these as explicit yes/no questions.
                question=f"Yes or no: {question}",
                gold_answers=("yes" if answer else "no",),
                answer_style=AnswerStyle.YESNO,
            )
        )
    return items


def render_multichoice(question: str, choices: list[tuple[str, str]]) -> str:
    lines = [f"Single choice: {question}"]
    lines.extend(f"{letter}. {text}" for letter, text in choices)
    return "\n".join(lines)


def _load_mmlu(path: Path) -> list[QAItem]:
    items = []
    with path.open(encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            if len(row) != 6:
                raise DatasetError(f"{path}: line {i + 1}: expected 6 columns, got {len(row)}")
            question, *options, answer = row
            answer = answer.strip().upper()
            if answer not in _CHOICE_LETTERS:
                raise DatasetError(f"{path}: line {i + 1}: answer must be one of A-D, got {answer!r}")
            choices = tuple(zip(_CHOICE_LETTERS, options))
            items.append(
                QAItem(
                    question_id=_content_id("mmlu", question),
                    task=Task.MMLU,
                    question=render_multichoice(question, list(choices)),
                    gold_answers=(answer,),
                    answer_style=AnswerStyle.MULTICHOICE,
                    choices=choices,
                )
            )
    return items


def _load_bamboogle(path: Path) -> list[QAItem]:
    items = []
    with path.open(encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise DatasetError(f"{path}: line {i + 1}: expected question,answer columns")
            question, answer = row[0], row[1]
            if i == 0 and question.strip().lower() == "question":
                continue  # header row
            items.append(
                QAItem(
                    question_id=_content_id("bamboogle", question),
                    task=Task.BAMBOOGLE,
                    question=question,
                    gold_answers=(answer,),
                )
            )
    return items


_LOADERS = {
    Task.HOTPOTQA: _load_hotpotqa,
    Task.STRATEGYQA: _load_strategyqa,
    Task.MMLU: _load_mmlu,
    Task.BAMBOOGLE: _load_bamboogle,
}


def load(spec: SplitSpec, path: str | Path) -> list[QAItem]:
    """Load a dataset file and apply the split spec's seeded sampling.

    Items are canonically sorted by question_id before sampling, so the
    sample depends only on (seed, file contents), not on file ordering.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    items = _LOADERS[spec.task](path)
    items.sort(key=lambda item: item.question_id)
    if spec.sample_size is None:
        return items
    if spec.sample_size > len(items):
        raise DatasetError(
            f"sample_size {spec.sample_size} exceeds split size {len(items)} for {spec.task.value}"
        )
    rng = random.Random(spec.seed)
    return rng.sample(items, spec.sample_size)


class DatasetRegistry:
    """Task -> split -> file path mapping, loadable from a JSON config."""

    def __init__(self, entries: dict[Task, dict[str, Path]]):
        self.entries = entries

    @classmethod
    def from_json(cls, path: str | Path) -> "DatasetRegistry":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        base = Path(path).parent
        entries: dict[Task, dict[str, Path]] = {}
        for task_name, cfg in data.items():
            splits = cfg.get("splits", {})
            entries[Task(task_name)] = {
                split: (base / p if not Path(p).is_absolute() else Path(p))
                for split, p in splits.items()
            }
        return cls(entries)

    def path_for(self, task: Task, split: str) -> Path:
        try:
            return self.entries[task][split]
        except KeyError:
            raise DatasetError(f"no registered path for {task.value}/{split}") from None

    def load(self, spec: SplitSpec) -> list[QAItem]:
        return load(spec, self.path_for(spec.task, spec.split))
