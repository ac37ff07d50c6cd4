#!/usr/bin/env python3
"""upir-lab campaign agent.

Fans independent seeds out over a process pool. Every seed writes its own
output file atomically; a single-threaded reducer then merges the per-seed
results into ``summary.csv`` ordered by seed, so the merged output does not
depend on completion order.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, Iterator, NamedTuple, TypeVar

from upir_lab import __version__
from upir_lab.adversary import AttackRun, attack_until_identified
from upir_lab.errors import ParameterError
from upir_lab.incidence import Configuration, as_configuration, read_cfg
from upir_lab.protocol import Protocol, QueryModel, init_community, run, trace_to_jsonl

TRAJECTORY_HEADER = ["version", "seed", "observation_index", "candidate_count"]
SUMMARY_HEADER = ["seed", "steps_used", "terminal_confusion", "owner_identified"]

T = TypeVar("T")


class SeedSummary(NamedTuple):
    seed: int
    steps_used: int
    terminal_confusion: int | None
    owner_identified: bool


def campaign_workers() -> int | None:
    """Pool size from ``CAMPAIGN_WORKERS``; unset or 0 means one per CPU."""
    raw = os.getenv("CAMPAIGN_WORKERS", "0")
    try:
        workers = int(raw)
    except ValueError:
        workers = -1
    if workers < 0:
        raise ParameterError(f"CAMPAIGN_WORKERS must be a non-negative integer (got {raw!r})")
    return workers or None


def parse_seed_range(text: str) -> list[int]:
    """Parse ``a..b`` (inclusive) or a single seed."""
    first, sep, last = text.partition("..")
    try:
        start = int(first)
        stop = int(last) if sep else start
    except ValueError as exc:
        raise ParameterError(f"seed range must look like a..b (got {text!r})") from exc
    if stop < start:
        raise ParameterError(f"empty seed range {text!r}")
    return list(range(start, stop + 1))


def trajectory_rows(attack: AttackRun, seed: int) -> Iterator[list[object]]:
    for index, report in enumerate(attack.trajectory, start=1):
        yield [__version__, seed, index, report.confusion_achieved]


def summary_row(summary: SeedSummary) -> list[object]:
    confusion = "" if summary.terminal_confusion is None else summary.terminal_confusion
    return [summary.seed, summary.steps_used, confusion, int(summary.owner_identified)]


def write_lines_atomic(path: Path, lines: Iterable[str]) -> None:
    temporary_path = f"{path}.tmp"
    with open(temporary_path, "w", encoding="utf-8", newline="\n") as handle:
        for line in lines:
            handle.write(line + "\n")
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(temporary_path, path)


def write_csv_atomic(path: Path, header: list[str], rows: Iterable[list[object]]) -> None:
    temporary_path = f"{path}.tmp"
    with open(temporary_path, "w", newline="") as csv_file:
        writer = csv.writer(csv_file, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        csv_file.flush()
        os.fsync(csv_file.fileno())
    os.replace(temporary_path, path)


def _attack_seed(
    seed: int,
    *,
    config: Configuration,
    protocol: Protocol,
    owner: int,
    output_dir: str,
    max_steps: int,
    self_submission: str | float | None,
    patience: int | None,
) -> SeedSummary:
    attack = attack_until_identified(
        config,
        protocol,
        owner,
        max_steps,
        seed,
        self_submission=self_submission,
        patience=patience,
    )
    write_csv_atomic(
        Path(output_dir) / f"seed-{seed}.csv",
        TRAJECTORY_HEADER,
        trajectory_rows(attack, seed),
    )
    final = attack.final
    return SeedSummary(
        seed,
        attack.steps_used,
        final.confusion_achieved if final else None,
        attack.identified,
    )


def _simulate_seed(
    seed: int,
    *,
    config: Configuration,
    protocol: Protocol,
    model: QueryModel,
    output_dir: str,
    steps: int,
    self_submission: str | float | None,
) -> int:
    trace = run(init_community(config, model, seed), protocol, steps, self_submission)
    write_lines_atomic(Path(output_dir) / f"trace-{seed}.jsonl", trace_to_jsonl(trace))
    return seed


def _fan_out(task: Callable[[int], T], seeds: list[int], workers: int | None) -> list[T]:
    if not seeds:
        raise ParameterError("seed list must not be empty")
    if workers == 1:
        return [task(seed) for seed in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, seeds))


def run_campaign(
    config: Configuration,
    protocol: Protocol,
    owner: int,
    seeds: list[int],
    output_dir: str | os.PathLike[str],
    *,
    max_steps: int = 500,
    self_submission: str | float | None = None,
    patience: int | None = None,
    workers: int | None = None,
) -> list[SeedSummary]:
    """Attack ``owner`` once per seed and merge the outcomes into ``summary.csv``."""
    protocol = Protocol(protocol)
    os.makedirs(output_dir, exist_ok=True)
    logging.info(
        "Attack campaign on user %d over %d seeds (%s)", owner, len(seeds), protocol.value
    )
    task = partial(
        _attack_seed,
        config=config,
        protocol=protocol,
        owner=owner,
        output_dir=str(output_dir),
        max_steps=max_steps,
        self_submission=self_submission,
        patience=patience,
    )
    summaries = _fan_out(task, seeds, workers)
    summaries.sort(key=lambda summary: summary.seed)
    write_csv_atomic(
        Path(output_dir) / "summary.csv",
        SUMMARY_HEADER,
        (summary_row(summary) for summary in summaries),
    )
    identified = sum(summary.owner_identified for summary in summaries)
    logging.info("Owner identified in %d of %d seeds", identified, len(summaries))
    return summaries


def run_simulation_campaign(
    config: Configuration,
    protocol: Protocol,
    model: QueryModel,
    seeds: list[int],
    output_dir: str | os.PathLike[str],
    *,
    steps: int,
    self_submission: str | float | None = None,
    workers: int | None = None,
) -> list[Path]:
    """Write one JSON-lines trace per seed and return the paths in seed order."""
    protocol = Protocol(protocol)
    if steps < 1:
        raise ParameterError(f"steps must be at least 1 (got {steps})")
    os.makedirs(output_dir, exist_ok=True)
    task = partial(
        _simulate_seed,
        config=config,
        protocol=protocol,
        model=model,
        output_dir=str(output_dir),
        steps=steps,
        self_submission=self_submission,
    )
    done = _fan_out(task, seeds, workers)
    return [Path(output_dir) / f"trace-{seed}.jsonl" for seed in sorted(done)]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Run a multi-seed attack campaign")
    parser.add_argument("--cfg", required=True, help="Configuration in cfg format")
    parser.add_argument("--protocol", choices=["upir1", "upir2"], required=True)
    parser.add_argument("--owner", type=int, required=True, help="Heavy repeater point")
    parser.add_argument("--seeds", required=True, help="Seed range a..b")
    parser.add_argument("--output-dir", required=True, help="Directory for CSV output")
    parser.add_argument("--max-steps", type=int, default=500)
    parser.add_argument("--self-submission", default="auto")
    parser.add_argument("--patience", type=int)
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Process pool size (default: CAMPAIGN_WORKERS or CPU count)",
    )
    try:
        args = parser.parse_args(argv)
        if args.workers is None:
            try:
                args.workers = campaign_workers()
            except ParameterError as exc:
                parser.error(str(exc))
        elif args.workers <= 0:
            parser.error("--workers must be greater than zero")
        level = os.getenv("LOG_LEVEL", "INFO").upper()
        if not isinstance(logging.getLevelName(level), int):
            parser.error(f"LOG_LEVEL must be a logging level name (got {level!r})")
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=level, format="%(asctime)s %(message)s")
    try:
        config = as_configuration(read_cfg(args.cfg))
        run_campaign(
            config,
            Protocol(args.protocol),
            args.owner,
            parse_seed_range(args.seeds),
            args.output_dir,
            max_steps=args.max_steps,
            self_submission=args.self_submission,
            patience=args.patience,
            workers=args.workers,
        )
    except (ValueError, IndexError, OSError) as exc:
        logging.error("Campaign agent error: %s", exc)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
