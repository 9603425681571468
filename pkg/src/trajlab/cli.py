"""Operator CLI: generate | curate | review | export | finetune | evaluate |
analyze | report.

Every subcommand reads and writes inside the configured run directory, so a
run's trajectories, observation pool, exports, and reports stay together and
auditable. All randomness flows from the config seed; with scripted backends
a rerun reproduces artifacts byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from filelock import FileLock, Timeout

from . import curation, evaluation, prompts
from .agent import EpisodeConfig, read_trajectories, run_episode, write_trajectories
from .datasets import DatasetRegistry, load as load_dataset
from .errors import ConfigurationError, EpisodeError, TrajlabError
from .lm import (
    DEFAULT_PRICES,
    FineTuneClient,
    FineTuneStatus,
    OpenAIChatClient,
    PriceTable,
    RateLimiter,
    ScriptedLM,
    TokenUsage,
)
from .qa import Method, SplitSpec, Task
from .tools import (
    ObservationPool,
    PerturbMode,
    PerturbationConfig,
    ScriptedTool,
    SerpApiClient,
    perturb,
)

POOL_FILENAME = "obs_pool.jsonl"
TRAJECTORIES_FILENAME = "trajectories.jsonl"
CURATED_FILENAME = "curated.jsonl"
REVIEW_SIDECAR_FILENAME = "reviews.jsonl"


class RunConfig:
    """Validated view over the JSON config file."""

    def __init__(self, data: dict, base_dir: Path, overrides: argparse.Namespace | None = None):
        self.data = data
        self.base_dir = base_dir
        self.overrides = overrides

    @classmethod
    def load(cls, path: str | Path, overrides: argparse.Namespace | None = None) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls(data, path.parent.resolve(), overrides)

    def require(self, *keys: str) -> None:
        """Check required dotted keys, reporting every missing one at once."""
        missing = []
        for key in keys:
            node = self.data
            for part in key.split("."):
                if not isinstance(node, dict) or part not in node:
                    missing.append(key)
                    break
                node = node[part]
        if missing:
            raise ConfigurationError(f"config missing required keys: {', '.join(sorted(missing))}")

    def get(self, key: str, default=None):
        node = self.data
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def path(self, key: str, default=None) -> Path | None:
        value = self.get(key, default)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def run_dir(self) -> Path:
        if self.overrides is not None and getattr(self.overrides, "run_dir", None):
            return Path(self.overrides.run_dir)
        self.require("run_dir")
        return self.path("run_dir")  # type: ignore[return-value]

    @property
    def seed(self) -> int:
        if self.overrides is not None and getattr(self.overrides, "seed", None) is not None:
            return self.overrides.seed
        return int(self.get("seed", 0))

    @property
    def concurrency(self) -> int:
        if self.overrides is not None and getattr(self.overrides, "concurrency", None) is not None:
            return self.overrides.concurrency
        return int(self.get("concurrency", 1))


def _locked_run_dir(cfg: RunConfig) -> FileLock:
    run_dir = cfg.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(run_dir / ".lock"))
    try:
        lock.acquire(timeout=1)
    except Timeout:
        raise ConfigurationError(f"run_dir {run_dir} is in use by another process") from None
    return lock


def _episode_config(cfg: RunConfig) -> EpisodeConfig:
    cfg.require("task", "episode.method")
    task = Task(cfg.get("task"))
    method = Method(cfg.get("episode.method"))
    prompt_set_id = cfg.get("episode.prompt_set") or prompts.default_prompt_set_id(task, method)
    zero_shot = bool(cfg.get("episode.zero_shot", False))
    if cfg.overrides is not None and getattr(cfg.overrides, "zero_shot", False):
        zero_shot = True
    reflection = cfg.get("episode.reflection_rounds")
    stop = cfg.get("episode.stop")
    return EpisodeConfig(
        method=method,
        prompt_set_id=prompt_set_id,
        max_rounds=int(cfg.get("episode.max_rounds", 11)),
        reflection_rounds=frozenset(reflection) if reflection is not None else None,
        stop_sequences=tuple(stop) if stop is not None else None,
        temperature=float(cfg.get("episode.temperature", 0.0)),
        max_tokens=int(cfg.get("episode.max_tokens", 512)),
        zero_shot=zero_shot,
    )


def _load_items(cfg: RunConfig, limit: int | None):
    cfg.require("task", "dataset")
    task = Task(cfg.get("task"))
    sample_size = cfg.get("dataset.sample_size")
    spec = SplitSpec(
        task=task,
        split=cfg.get("dataset.split", "dev"),
        sample_size=int(sample_size) if sample_size is not None else None,
        seed=cfg.seed,
    )
    registry_path = cfg.path("dataset.registry")
    if registry_path is not None:
        items = DatasetRegistry.from_json(registry_path).load(spec)
    else:
        cfg.require("dataset.path")
        items = load_dataset(spec, cfg.path("dataset.path"))
    if limit is not None:
        items = items[:limit]
    return items


def _scripted_lm(cfg: RunConfig) -> ScriptedLM:
    responses_path = cfg.path("lm.responses")
    if responses_path is None:
        raise ConfigurationError("scripted lm requires lm.responses (a JSON file of completions)")
    data = json.loads(responses_path.read_text(encoding="utf-8"))
    responses = []
    for entry in data:
        if isinstance(entry, str):
            responses.append(entry)
        else:
            responses.append(
                (
                    entry["text"],
                    TokenUsage(int(entry.get("prompt_tokens", 0)), int(entry.get("completion_tokens", 0))),
                )
            )
    return ScriptedLM(responses)


def _build_lm(cfg: RunConfig):
    cfg.require("lm.type")
    lm_type = cfg.get("lm.type")
    if lm_type == "scripted":
        return _scripted_lm(cfg), True
    if lm_type == "openai":
        cfg.require("lm.model")
        rate = cfg.get("lm.rate_per_sec")
        limiter = RateLimiter(float(rate)) if rate else None
        return (
            OpenAIChatClient(
                model=cfg.get("lm.model"),
                base_url=cfg.get("lm.base_url"),
                rate_limiter=limiter,
            ),
            False,
        )
    raise ConfigurationError(f"unknown lm.type {lm_type!r} (expected openai or scripted)")


def _build_tool(cfg: RunConfig, pool: ObservationPool, perturb_override: str | None = None):
    cfg.require("tool.type")
    tool_type = cfg.get("tool.type")
    if tool_type == "scripted":
        fixtures_path = cfg.path("tool.fixtures")
        if fixtures_path is None:
            raise ConfigurationError("scripted tool requires tool.fixtures (a JSON query->observation map)")
        fixtures = json.loads(fixtures_path.read_text(encoding="utf-8"))
        tool = ScriptedTool(fixtures, pool=pool)
    elif tool_type == "serpapi":
        tool = SerpApiClient(pool=pool)
    else:
        raise ConfigurationError(f"unknown tool.type {tool_type!r} (expected serpapi or scripted)")

    mode_name = perturb_override or cfg.get("perturb.mode", "off")
    perturbation = PerturbationConfig(
        mode=PerturbMode(mode_name),
        probability=float(cfg.get("perturb.probability", 0.5)),
        seed=int(cfg.get("perturb.seed", cfg.seed)),
    )
    return perturb(tool, perturbation, pool)


def _prices(cfg: RunConfig) -> PriceTable:
    prices_path = cfg.path("prices")
    return PriceTable.from_json(prices_path) if prices_path is not None else DEFAULT_PRICES


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config, args)
    cfg.require("run_dir", "task", "dataset", "episode.method", "lm.type", "tool.type")
    lock = _locked_run_dir(cfg)
    try:
        run_dir = cfg.run_dir
        items = _load_items(cfg, args.limit)
        episode_cfg = _episode_config(cfg)
        lm, deterministic = _build_lm(cfg)
        pool = ObservationPool(run_dir / POOL_FILENAME)
        tool = _build_tool(cfg, pool, args.perturb)
        clock = (lambda: 0.0) if deterministic else time.monotonic

        traj_path = run_dir / TRAJECTORIES_FILENAME
        done_ids = {t.question_id for t in read_trajectories(traj_path)} if traj_path.exists() else set()
        pending = [item for item in items if item.question_id not in done_ids]

        # Episode errors are recorded, never raised mid-batch; the item stays
        # absent from the trajectory log, so a rerun retries it.
        def one(item):
            try:
                return run_episode(episode_cfg, item, lm, tool, clock=clock)
            except EpisodeError as exc:
                return (item.question_id, str(exc))

        if cfg.concurrency <= 1:
            results = [one(item) for item in pending]
        else:
            with ThreadPoolExecutor(max_workers=cfg.concurrency) as executor:
                results = list(executor.map(one, pending))
        generated = [r for r in results if not isinstance(r, tuple)]
        failures = [r for r in results if isinstance(r, tuple)]
        write_trajectories(traj_path, generated, append=traj_path.exists())
        if failures:
            with (run_dir / "generate_errors.jsonl").open("a", encoding="utf-8") as fh:
                for question_id, message in failures:
                    fh.write(json.dumps({"question_id": question_id, "error": message}) + "\n")
        summary = f"{len(generated)} trajectories generated ({len(done_ids)} already present)"
        if failures:
            summary += f", {len(failures)} episode errors recorded"
        print(f"{summary} -> {traj_path}")
        return 0
    finally:
        lock.release()


def _method_summary(trajs) -> str:
    counts: dict[Method, int] = {}
    for traj in trajs:
        key = traj.method.base()
        counts[key] = counts.get(key, 0) + 1
    order = [Method.REACT, Method.COT, Method.REFLEXION, Method.IO]
    parts = [f"{counts[m]} {m.value}" for m in order if counts.get(m)]
    return f"{len(trajs)} trajectories ({' / '.join(parts)})"


def cmd_curate(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config, args)
    cfg.require("run_dir", "curation.plan")
    run_dir = cfg.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    plan = curation.CurationPlan.from_json(cfg.path("curation.plan"))

    input_paths = cfg.get("curation.inputs")
    if input_paths:
        paths = [Path(p) if Path(p).is_absolute() else cfg.base_dir / p for p in input_paths]
    else:
        paths = [run_dir / TRAJECTORIES_FILENAME]
    trajs = []
    for path in paths:
        trajs.extend(read_trajectories(path))

    trajs = curation.filter_successful(trajs, plan.filters)
    trajs = [curation.cot_to_react(t) if t.method is Method.COT else t for t in trajs]
    mixed = curation.mix(curation.pool_by_tags(trajs), plan)
    out_path = run_dir / CURATED_FILENAME
    write_trajectories(out_path, mixed)
    print(f"{_method_summary(mixed)} -> {out_path}")
    return 0


def cmd_review(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config, args)
    cfg.require("run_dir")
    run_dir = cfg.run_dir
    trajs = read_trajectories(run_dir / CURATED_FILENAME)
    decisions = curation.review(trajs, run_dir / REVIEW_SIDECAR_FILENAME)
    curated = curation.apply_review(trajs, decisions)
    out_path = run_dir / "reviewed.jsonl"
    write_trajectories(out_path, curated)
    print(f"{len(decisions)} decisions recorded; {len(curated)} trajectories kept -> {out_path}")
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config, args)
    cfg.require("run_dir")
    run_dir = cfg.run_dir
    source = cfg.path("export.source") or run_dir / CURATED_FILENAME
    trajs = read_trajectories(source)
    fmt = args.format or cfg.get("export.format", curation.ExportFormat.CHAT_MESSAGES)
    mask = cfg.get("export.mask_observations", True) and not args.no_mask
    exports_dir = run_dir / "exports"
    exports_dir.mkdir(parents=True, exist_ok=True)
    suffix = "chat" if fmt == curation.ExportFormat.CHAT_MESSAGES else "prompt_completion"
    out_path = exports_dir / f"train_{suffix}.jsonl"
    count = curation.export(trajs, out_path, fmt=fmt, mask_observations=mask)
    print(f"{count} records exported ({fmt}) -> {out_path}")
    return 0


def cmd_finetune(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config, args)
    cfg.require("run_dir", "finetune.base_model")
    run_dir = cfg.run_dir
    export_file = cfg.path("finetune.export_file") or run_dir / "exports" / "train_chat.jsonl"
    epochs = int(cfg.get("finetune.epochs", 3))
    client = FineTuneClient(base_url=cfg.get("lm.base_url"))
    job = client.submit_finetune(export_file, cfg.get("finetune.base_model"), epochs)
    while not args.no_wait and not job.status.terminal:
        time.sleep(float(cfg.get("finetune.poll_interval_s", 5.0)))
        job = client.poll(job)
    job_path = run_dir / "finetune_job.json"
    job_path.write_text(
        json.dumps(
            {
                "job_id": job.job_id,
                "status": job.status.value,
                "training_file_ref": job.training_file_ref,
                "base_model": job.base_model,
                "epochs": job.epochs,
                "fine_tuned_model": job.fine_tuned_model,
                "message": job.message,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"fine-tune job {job.job_id or '(rejected)'} status={job.status.value} -> {job_path}")
    return 0 if job.status is not FineTuneStatus.FAILED else 1


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config, args)
    cfg.require("run_dir", "task", "dataset", "episode.method", "lm.type", "tool.type")
    lock = _locked_run_dir(cfg)
    try:
        run_dir = cfg.run_dir
        items = _load_items(cfg, args.limit)
        episode_cfg = _episode_config(cfg)
        lm, deterministic = _build_lm(cfg)
        pool = ObservationPool(run_dir / POOL_FILENAME)
        tool = _build_tool(cfg, pool, args.perturb)
        clock = (lambda: 0.0) if deterministic else time.monotonic

        records_path = run_dir / "eval_records.jsonl"
        model = cfg.get("lm.model")
        prices = _prices(cfg)
        if model not in prices.models:
            prices = None  # unpriced backends (e.g. scripted) report no cost

        # Resume: items already in the record file are not re-run.
        existing: dict[str, dict] = {}
        if records_path.exists():
            with records_path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        record = json.loads(line)
                        existing[record["question_id"]] = record
        pending = [item for item in items if item.question_id not in existing]
        if pending:
            _, new_records = evaluation.run_eval(
                episode_cfg,
                pending,
                lm,
                tool,
                concurrency=cfg.concurrency,
                trajectories_path=run_dir / "eval_trajectories.jsonl",
                clock=clock,
            )
            existing.update({record["question_id"]: record for record in new_records})
        records = [existing[item.question_id] for item in items if item.question_id in existing]
        with records_path.open("w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        report = evaluation.aggregate_report(
            records, model=model, fine_tuned=bool(cfg.get("lm.fine_tuned", False)), prices=prices
        )
        evaluation.write_report({cfg.get("lm.model", "run"): report}, run_dir, stem="eval_report")
        evaluation.write_turn_histogram_csv(records, run_dir / "turn_histogram.csv")
        print(
            f"EM {report.em:.1f} (σ_M {report.sigma_m:.2f}) F1 {report.f1:.1f} over n={report.n}"
            f" -> {records_path}"
        )
        return 0
    finally:
        lock.release()


def cmd_analyze(args: argparse.Namespace) -> int:
    matrix = evaluation.matrix_from_record_files(args.matrices, args.methods)
    result = evaluation.method_choice_report(matrix)
    for method, em_value in result["per_method_em"].items():
        print(f"{method}: {em_value}")
    print(f"Random method choice: {result['random_choice_em']}")
    print(f"Oracle method choice: {result['oracle_choice_em']}")
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
        print(f"-> {args.out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config, args)
    cfg.require("run_dir")
    run_dir = cfg.run_dir
    report_json = run_dir / "eval_report.json"
    if not report_json.exists():
        raise ConfigurationError(f"no eval_report.json in {run_dir}; run evaluate first")
    from .metrics import MetricReport

    data = json.loads(report_json.read_text(encoding="utf-8"))
    rows = {name: MetricReport(**values) for name, values in data.items()}
    md_path, json_path = evaluation.write_report(rows, run_dir, stem="report")
    print(evaluation.render_markdown_report(rows), end="")
    print(f"-> {md_path}, {json_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
        if config_required:
            p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--run-dir", help="override run_dir from the config")
        p.add_argument("--seed", type=int, help="override seed from the config")

    p = sub.add_parser("generate", help="run episodes over a dataset split and log trajectories")
    add_common(p)
    p.add_argument("--limit", type=int, help="only the first N items")
    p.add_argument("--concurrency", type=int)
    p.add_argument("--perturb", choices=[m.value for m in PerturbMode], help="observation perturbation mode")
    p.add_argument("--zero-shot", action="store_true", help="render contexts without few-shot exemplars")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("curate", help="filter, convert, and mix trajectories per the curation plan")
    add_common(p)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("review", help="interactive accept/reject/edit pass over curated trajectories")
    add_common(p)
    p.set_defaults(func=cmd_review)

    p = sub.add_parser("export", help="write curated trajectories in a training format")
    add_common(p)
    p.add_argument("--format", choices=[curation.ExportFormat.CHAT_MESSAGES, curation.ExportFormat.PROMPT_COMPLETION])
    p.add_argument("--no-mask", action="store_true", help="disable observation masking (ablation)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("finetune", help="submit the export to the provider fine-tuning API")
    add_common(p)
    p.add_argument("--no-wait", action="store_true", help="do not poll until the job is terminal")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="evaluate an agent over a dataset split")
    add_common(p)
    p.add_argument("--limit", type=int)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--perturb", choices=[m.value for m in PerturbMode])
    p.add_argument("--zero-shot", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="method-choice bounds from per-method record files")
    p.add_argument("--matrices", nargs="+", required=True, help="per-method eval record JSONL files")
    p.add_argument("--methods", nargs="+", help="method names (defaults to file stems)")
    p.add_argument("--out", help="write the analysis JSON here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="render markdown/JSON tables for a run")
    add_common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrajlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
