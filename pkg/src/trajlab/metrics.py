"""QA metrics: answer normalization, EM/F1, standard errors, turn statistics,
and random/oracle method-choice bounds."""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

from .qa import AnswerStyle, QAItem

if TYPE_CHECKING:
    from .agent import Trajectory

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize(answer: str) -> str:
    """Normalize an answer string for comparison.

    Lowercase, strip punctuation, drop the articles a/an/the as whole words,
    and collapse whitespace.
    """
    text = answer.lower().translate(_PUNCT_TABLE)
    text = _ARTICLES_RE.sub(" ", text)
    return " ".join(text.split())


def em(pred: str, golds: Sequence[str]) -> int:
    """Exact match: 1 iff the normalized prediction equals any normalized gold."""
    if not golds:
        raise ValueError("golds must be non-empty")
    norm_pred = normalize(pred)
    return int(any(norm_pred == normalize(g) for g in golds))


def _f1_single(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(pred_tokens)
    recall = num_same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def f1(pred: str, golds: Sequence[str]) -> float:
    """Token-level F1 (max over golds) on whitespace tokens of normalized strings."""
    if not golds:
        raise ValueError("golds must be non-empty")
    pred_tokens = normalize(pred).split()
    return max(_f1_single(pred_tokens, normalize(g).split()) for g in golds)


_CHOICE_PREFIX_RE = re.compile(r"^\s*\(?([A-Za-z])[\.\):]\s*(.*)$", re.DOTALL)


def reduce_multichoice(pred: str, choices: Sequence[tuple[str, str]]) -> str:
    """Reduce a multi-choice prediction to its choice letter when possible.

    Models trained on bare-letter answers may still echo choice text
    ("A. a galaxy"); reduce such predictions to the letter so EM compares
    letters. Predictions that match no listed choice pass through unchanged.
    """
    stripped = pred.strip()
    by_letter = {letter.upper(): text for letter, text in choices}
    if len(stripped) == 1 and stripped.upper() in by_letter:
        return stripped.upper()
    match = _CHOICE_PREFIX_RE.match(stripped)
    if match and match.group(1).upper() in by_letter:
        letter, rest = match.group(1).upper(), match.group(2)
        if not rest.strip() or normalize(rest) == normalize(by_letter[letter]):
            return letter
        # Letter-shaped but inconsistent with the listed text: leave as-is.
        return pred
    norm_pred = normalize(stripped)
    for letter, text in choices:
        if norm_pred and norm_pred == normalize(text):
            return letter.upper()
    return pred


def item_em(pred: str, item: QAItem) -> int:
    """EM against a QAItem, applying the multi-choice letter reduction."""
    if item.answer_style is AnswerStyle.MULTICHOICE and item.choices:
        pred = reduce_multichoice(pred, item.choices)
    return em(pred, item.gold_answers)


def item_f1(pred: str, item: QAItem) -> float:
    """F1 against a QAItem, applying the multi-choice letter reduction."""
    if item.answer_style is AnswerStyle.MULTICHOICE and item.choices:
        pred = reduce_multichoice(pred, item.choices)
    return f1(pred, item.gold_answers)


def standard_error(em_percent: float, n: int) -> float:
    """Binomial standard error of an EM percentage over n questions.

    100 * sqrt(p * (1 - p) / n) with p = em/100, rounded to 2 decimals.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= em_percent <= 100.0:
        raise ValueError("em must be a percentage in [0, 100]")
    p = em_percent / 100.0
    return round(100.0 * math.sqrt(p * (1.0 - p) / n), 2)


def _round_counts(trajs: Sequence["Trajectory | int"]) -> list[int]:
    return [t if isinstance(t, int) else len(t.rounds) for t in trajs]


def turn_stats(trajs: Sequence["Trajectory | int"]) -> tuple[float, float]:
    """Mean and population standard deviation of round counts.

    Accepts trajectories or bare round counts.
    """
    counts = _round_counts(trajs)
    if not counts:
        raise ValueError("turn_stats needs a non-empty list")
    mu = sum(counts) / len(counts)
    sigma = math.sqrt(sum((c - mu) ** 2 for c in counts) / len(counts))
    return mu, sigma


def turn_histogram(trajs: Sequence["Trajectory | int"]) -> dict[int, int]:
    """Round-count histogram, for turn-distribution plots."""
    counts = _round_counts(trajs)
    if not counts:
        raise ValueError("turn_histogram needs a non-empty list")
    return dict(sorted(Counter(counts).items()))


@dataclass(frozen=True)
class ResultMatrix:
    """Per-question, per-method binary success matrix.

    rows[i][j] is 1 iff method j answered question i correctly.
    """

    question_ids: tuple[str, ...]
    methods: tuple[str, ...]
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.rows or not self.methods:
            raise ValueError("matrix must be non-empty")
        if len(self.rows) != len(self.question_ids):
            raise ValueError("one row per question id required")
        for row in self.rows:
            if len(row) != len(self.methods):
                raise ValueError("ragged matrix")
            if any(cell not in (0, 1) for cell in row):
                raise ValueError("matrix entries must be 0 or 1")

    def per_method_ems(self) -> list[float]:
        n = len(self.rows)
        return [100.0 * sum(row[j] for row in self.rows) / n for j in range(len(self.methods))]


def method_choice_bounds(matrix: ResultMatrix) -> tuple[float, float]:
    """(random_em, oracle_em) percentages for a success matrix.

    random_em is the expected EM when one method is chosen uniformly per
    question (equivalently the mean of per-method EMs); oracle_em assumes
    the best method is always chosen (mean of per-question row maxima).
    """
    n_q = len(matrix.rows)
    n_m = len(matrix.methods)
    total = sum(sum(row) for row in matrix.rows)
    random_em = 100.0 * total / (n_q * n_m)
    oracle_em = 100.0 * sum(max(row) for row in matrix.rows) / n_q
    return random_em, oracle_em


def random_choice_em(per_method_ems: Iterable[float]) -> float:
    """Expected EM of a uniformly random method choice, from per-method EMs."""
    ems = list(per_method_ems)
    if not ems:
        raise ValueError("need at least one per-method EM")
    return math.fsum(ems) / len(ems)


@dataclass
class MetricReport:
    """Aggregate evaluation report; em/f1/sigma_m are percentages."""

    em: float
    f1: float
    n: int
    sigma_m: float
    turn_mu: float
    turn_sigma: float
    cost_per_trial: float | None = None
    time_per_trial: float | None = None

    def to_dict(self) -> dict:
        return {
            "em": self.em,
            "f1": self.f1,
            "n": self.n,
            "sigma_m": self.sigma_m,
            "turn_mu": self.turn_mu,
            "turn_sigma": self.turn_sigma,
            "cost_per_trial": self.cost_per_trial,
            "time_per_trial": self.time_per_trial,
        }
