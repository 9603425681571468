"""Experiment runners and reporting: batched episode evaluation, robustness
sweeps, data-scaling sweeps, method-choice analysis, and report emission."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .agent import EpisodeConfig, Trajectory, run_episode
from .curation import CurationPlan, PlanEntry, dedup, export, mix_counts
from .errors import CurationError
from .lm import LanguageModelClient, PriceTable, TokenUsage, cost_of
from .metrics import (
    MetricReport,
    ResultMatrix,
    item_em,
    item_f1,
    method_choice_bounds,
    standard_error,
    turn_histogram,
    turn_stats,
)
from .qa import QAItem
from .tools import ObservationPool, PerturbMode, PerturbationConfig, Tool, perturb

logger = logging.getLogger(__name__)


def evaluate_episode(traj: Trajectory, item: QAItem) -> dict:
    """Per-item record for one completed episode."""
    prediction = traj.final_answer if traj.final_answer is not None else ""
    return {
        "question_id": item.question_id,
        "prediction": prediction,
        "gold": list(item.gold_answers),
        "em": item_em(prediction, item) if not traj.truncated else 0,
        "f1": item_f1(prediction, item) if not traj.truncated else 0.0,
        "rounds": len(traj.rounds),
        "truncated": traj.truncated,
        "usage": traj.usage.to_dict(),
        "wall_time_s": traj.wall_time_s,
        "error": None,
    }


def error_record(item: QAItem, error: Exception) -> dict:
    return {
        "question_id": item.question_id,
        "prediction": "",
        "gold": list(item.gold_answers),
        "em": 0,
        "f1": 0.0,
        "rounds": 0,
        "truncated": False,
        "usage": TokenUsage().to_dict(),
        "wall_time_s": 0.0,
        "error": f"{type(error).__name__}: {error}",
    }


def aggregate_report(
    records: Sequence[dict],
    model: str | None = None,
    fine_tuned: bool = False,
    prices: PriceTable | None = None,
) -> MetricReport:
    """Fold per-item records into a MetricReport.

    Errored items count as EM/F1 zero but are excluded from turn statistics
    (they ran no rounds). Aggregation is a pure function of the records, so
    reports are reproducible offline from the record file.
    """
    if not records:
        raise ValueError("no records to aggregate")
    n = len(records)
    em_pct = 100.0 * sum(r["em"] for r in records) / n
    f1_pct = 100.0 * sum(r["f1"] for r in records) / n
    round_counts = [r["rounds"] for r in records if not r.get("error")]
    turn_mu, turn_sigma = turn_stats(round_counts) if round_counts else (0.0, 0.0)
    cost = None
    if prices is not None and model is not None:
        per_item = [
            cost_of(TokenUsage.from_dict(r["usage"]), model, fine_tuned, prices) for r in records
        ]
        cost = sum(per_item) / n
    return MetricReport(
        em=em_pct,
        f1=f1_pct,
        n=n,
        sigma_m=standard_error(em_pct, n),
        turn_mu=turn_mu,
        turn_sigma=turn_sigma,
        cost_per_trial=cost,
        time_per_trial=sum(r["wall_time_s"] for r in records) / n,
    )


def run_eval(
    cfg: EpisodeConfig,
    items: Sequence[QAItem],
    lm: LanguageModelClient,
    tool: Tool | None = None,
    concurrency: int = 1,
    records_path: str | Path | None = None,
    trajectories_path: str | Path | None = None,
    model: str | None = None,
    fine_tuned: bool = False,
    prices: PriceTable | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> tuple[MetricReport, list[dict]]:
    """Run episodes over items with bounded concurrency and aggregate.

    Per-item failures are recorded with an error flag and EM 0; they never
    abort the batch. Records (and optionally raw trajectories) are written
    as JSONL in item order.
    """

    def one(item: QAItem) -> tuple[dict, Trajectory | None]:
        try:
            traj = run_episode(cfg, item, lm, tool, clock=clock)
            return evaluate_episode(traj, item), traj
        except Exception as exc:  # noqa: BLE001 - survive any per-item failure
            logger.warning("episode failed for %s: %s", item.question_id, exc)
            return error_record(item, exc), None

    if concurrency <= 1:
        results = [one(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as executor:
            results = list(executor.map(one, items))

    records = [record for record, _ in results]
    if records_path is not None:
        with Path(records_path).open("w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    if trajectories_path is not None:
        from .agent import write_trajectories

        write_trajectories(trajectories_path, [t for _, t in results if t is not None])
    report = aggregate_report(records, model=model, fine_tuned=fine_tuned, prices=prices)
    return report, records


ROBUSTNESS_CONDITIONS = ("Normal", "None", "Random")


def robustness_sweep(
    cfg: EpisodeConfig,
    items: Sequence[QAItem],
    make_lm: Callable[[], LanguageModelClient],
    tool: Tool,
    pool: ObservationPool,
    probability: float = 0.5,
    seed: int = 0,
    concurrency: int = 1,
    out_dir: str | Path | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> dict[str, MetricReport]:
    """Evaluate under normal, "None", and random-observation conditions.

    The normal pass runs first so its observations seed the pool the random
    pass draws from, mirroring a pool gathered from previous experiments.
    make_lm must return a fresh client per condition (scripted queues are
    consumed).
    """
    reports: dict[str, MetricReport] = {}
    for condition in ROBUSTNESS_CONDITIONS:
        if condition == "Normal":
            wrapped: Tool = tool
        else:
            mode = PerturbMode.NONE if condition == "None" else PerturbMode.RANDOM
            wrapped = perturb(tool, PerturbationConfig(mode=mode, probability=probability, seed=seed), pool)
        records_path = Path(out_dir) / f"records_{condition.lower()}.jsonl" if out_dir else None
        report, _ = run_eval(
            cfg, items, make_lm(), wrapped,
            concurrency=concurrency, records_path=records_path, clock=clock,
        )
        reports[condition] = report
    return reports


def scaling_sweep(
    pool: Sequence[Trajectory],
    sizes: Sequence[int],
    seed: int,
    out_dir: str | Path,
    fmt: str = "chat",
) -> list[dict]:
    """Emit one curation plan + export file per requested data size.

    Sampling is nested: with one seed, the size-100 set is a prefix of the
    size-200 set, so scaling comparisons vary only in data quantity.
    """
    if not sizes:
        raise ValueError("sizes must be non-empty")
    if any(n < 1 for n in sizes):
        raise ValueError("sizes must be positive")
    unique_pool = dedup(list(pool))
    if max(sizes) > len(unique_pool):
        raise CurationError(
            f"pool has {len(unique_pool)} unique trajectories, sweep wants {max(sizes)}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    shuffled = list(unique_pool)
    import random as _random

    _random.Random(f"{seed}:scaling").shuffle(shuffled)
    rows = []
    for n in sizes:
        selected = shuffled[:n]
        counts = mix_counts(selected)
        plan = CurationPlan(
            entries=[PlanEntry(task, method, count) for (task, method), count in sorted(counts.items())],
            seed=seed,
        )
        plan_path = out_dir / f"plan_{n}.json"
        plan.to_json(plan_path)
        export_path = out_dir / f"export_{n}.jsonl"
        export(selected, export_path, fmt=fmt)
        rows.append({"size": n, "plan": str(plan_path), "export": str(export_path)})
    return rows


def matrix_from_record_files(
    paths: Sequence[str | Path], methods: Sequence[str] | None = None
) -> ResultMatrix:
    """Build a success matrix from per-method record files.

    Rows cover the question ids all files share; column order follows the
    file order.
    """
    if not paths:
        raise ValueError("need at least one record file")
    if methods is None:
        methods = [Path(p).stem for p in paths]
    if len(methods) != len(paths):
        raise ValueError("one method name per record file required")
    per_method: list[dict[str, int]] = []
    for path in paths:
        ems: dict[str, int] = {}
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                ems[record["question_id"]] = int(record["em"])
        per_method.append(ems)
    shared = set(per_method[0])
    for ems in per_method[1:]:
        shared &= set(ems)
    if not shared:
        raise ValueError("record files share no question ids")
    question_ids = tuple(sorted(shared))
    rows = tuple(tuple(ems[qid] for ems in per_method) for qid in question_ids)
    return ResultMatrix(question_ids=question_ids, methods=tuple(methods), rows=rows)


def method_choice_report(matrix: ResultMatrix) -> dict:
    random_em, oracle_em = method_choice_bounds(matrix)
    return {
        "methods": list(matrix.methods),
        "per_method_em": {m: round(e, 1) for m, e in zip(matrix.methods, matrix.per_method_ems())},
        "n_questions": len(matrix.rows),
        "random_choice_em": round(random_em, 1),
        "oracle_choice_em": round(oracle_em, 1),
    }


def _fmt(value, digits=1) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def render_markdown_report(rows: dict[str, MetricReport]) -> str:
    """Markdown table over named report rows (EM, sigma, turns, cost, time)."""
    header = "| run | EM | σ_M | F1 | n | #Turns μ | #Turns σ | $/trial | s/trial |"
    rule = "|---|---|---|---|---|---|---|---|---|"
    lines = [header, rule]
    for name, r in rows.items():
        lines.append(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |".format(
                name,
                _fmt(r.em), _fmt(r.sigma_m, 2), _fmt(r.f1), r.n,
                _fmt(r.turn_mu), _fmt(r.turn_sigma),
                _fmt(r.cost_per_trial, 6), _fmt(r.time_per_trial, 2),
            )
        )
    return "\n".join(lines) + "\n"


def write_report(rows: dict[str, MetricReport], out_dir: str | Path, stem: str = "report") -> tuple[Path, Path]:
    """Write the markdown and machine-readable JSON report files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    md_path = out_dir / f"{stem}.md"
    json_path = out_dir / f"{stem}.json"
    md_path.write_text(render_markdown_report(rows), encoding="utf-8")
    json_path.write_text(
        json.dumps({name: r.to_dict() for name, r in rows.items()}, indent=2) + "\n",
        encoding="utf-8",
    )
    return md_path, json_path


def write_turn_histogram_csv(records_or_counts: Iterable[dict | int], path: str | Path) -> Path:
    """Turn-distribution CSV (rounds, trajectories) for histogram plots."""
    counts = [
        r if isinstance(r, int) else r["rounds"]
        for r in records_or_counts
        if isinstance(r, int) or not r.get("error")
    ]
    histogram = turn_histogram(counts)
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rounds", "trajectories"])
        for rounds, freq in histogram.items():
            writer.writerow([rounds, freq])
    return path
