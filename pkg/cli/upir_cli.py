"""Command line front end for upir-lab.

Builds configurations, analyzes their neighborhood anonymity, simulates the
P2P UPIR protocols and runs the curious-server attacks. Nested reports are
printed as JSON, flat distributions as CSV and traces as JSON lines, so every
subcommand can be scripted. Exit codes: ``0`` success, ``1`` usage, ``2``
validation error, ``3`` runtime error.
"""

import argparse
import csv
import json
import logging
import os
import sys
from collections import Counter
from dataclasses import asdict
from typing import Any, Callable, TextIO

from upir_lab import __version__
from upir_lab.adversary import attack_until_identified, intersection_attack
from upir_lab.anonymity import (
    AnonymityPartition,
    Mode,
    anonymity_partition,
    check_characterization,
    is_transversal_design,
    is_triangle_free,
    pentagonal_report,
)
from upir_lab.constructions import (
    affine_plane,
    cycle,
    example_36,
    extend_to_closed_anonymous,
    fano_plane,
    max_points,
    pappus,
    pentagon,
    transversal_design,
)
from upir_lab.errors import AnonymityLevelError, ParameterError
from upir_lab.incidence import (
    Configuration,
    GroupedConfiguration,
    as_configuration,
    deficiency,
    format_cfg,
    read_cfg,
)
from upir_lab.protocol import (
    Protocol,
    QueryModel,
    SimulationTrace,
    init_community,
    run,
    trace_from_jsonl,
    trace_to_jsonl,
)
from workers.campaign_agent import (
    SUMMARY_HEADER,
    TRAJECTORY_HEADER,
    campaign_workers,
    parse_seed_range,
    run_campaign,
    run_simulation_campaign,
    summary_row,
    trajectory_rows,
)

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

Groups = tuple[tuple[int, ...], ...]
Built = tuple[Configuration, Groups | None, Groups | None]


def _int_params(name: str, params: list[str], count: int) -> list[int]:
    if len(params) != count:
        raise ParameterError(f"{name} takes {count} integer parameter(s), got {len(params)}")
    try:
        return [int(value) for value in params]
    except ValueError as exc:
        raise ParameterError(f"{name} parameters must be integers: {' '.join(params)}") from exc


def _build_affine(params: list[str]) -> Built:
    (q,) = _int_params("affine", params, 1)
    config, labeling = affine_plane(q)
    return config, None, labeling.classes


def _build_td(params: list[str]) -> Built:
    k, n = _int_params("td", params, 2)
    design = transversal_design(k, n)
    return design.config, design.groups, None


def _build_cycle(params: list[str]) -> Built:
    (v,) = _int_params("cycle", params, 1)
    return cycle(v), None, None


def _fixed(builder: Callable[[], Configuration]) -> Callable[[list[str]], Built]:
    def build(params: list[str]) -> Built:
        _int_params(builder.__name__, params, 0)
        return builder(), None, None

    return build


def _build_extend_closed(params: list[str]) -> Built:
    if len(params) != 1:
        raise ParameterError("extend-closed takes the path of a cfg file")
    config = load_configuration(params[0])
    partition = anonymity_partition(config, Mode.OPEN)
    extended = extend_to_closed_anonymous(GroupedConfiguration(config, partition.parts))
    return extended, partition.parts, None


CONSTRUCTIONS: dict[str, Callable[[list[str]], Built]] = {
    "affine": _build_affine,
    "td": _build_td,
    "fano": _fixed(fano_plane),
    "pappus": _fixed(pappus),
    "cycle": _build_cycle,
    "pentagon": _fixed(pentagon),
    "example36": _fixed(example_36),
    "extend-closed": _build_extend_closed,
}


def load_configuration(path: str) -> Configuration:
    return as_configuration(read_cfg(path))


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    with open(output, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def construct(
    name: str,
    params: list[str],
    output: str | None = None,
    sidecar: str | None = None,
) -> int:
    """Write a canonical ``cfg`` file for a named construction.

    Parameters
    ----------
    name : str
        Key of :data:`CONSTRUCTIONS`.
    params : list[str]
        Constructor parameters, e.g. ``["3", "3"]`` for ``td``.
    output : str | None, optional
        Destination file; stdout when omitted.
    sidecar : str | None, optional
        JSON file receiving the groups and parallel classes, when known.

    Returns
    -------
    int
        Status code, ``0`` on success.
    """

    config, groups, classes = CONSTRUCTIONS[name](params)
    _emit(format_cfg(config.structure.canonical()), output)
    if sidecar is not None:
        with open(sidecar, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(
                {
                    "groups": None if groups is None else [list(g) for g in groups],
                    "parallel_classes": None if classes is None else [list(c) for c in classes],
                },
                handle,
                sort_keys=True,
            )
            handle.write("\n")
    return 0


def _partition_dict(partition: AnonymityPartition) -> dict[str, Any]:
    return {"level": partition.level, "parts": [list(part) for part in partition.parts]}


def analysis_report(config: Configuration) -> dict[str, Any]:
    """Everything ``analyze`` knows about a configuration, JSON ready."""
    pentagonal = pentagonal_report(config)
    transversal = is_transversal_design(config)
    try:
        characterization: dict[str, Any] | None = asdict(check_characterization(config))
    except AnonymityLevelError:
        characterization = None
    return {
        "v": config.v,
        "b": config.b,
        "r": config.r,
        "k": config.k,
        "deficiency": deficiency(config),
        "open": _partition_dict(anonymity_partition(config, Mode.OPEN)),
        "closed": _partition_dict(anonymity_partition(config, Mode.CLOSED)),
        "triangle_free": is_triangle_free(config),
        "pentagonal": {
            "is_pentagonal": pentagonal.is_pentagonal,
            "opposite_line": list(pentagonal.opposite_line),
            "opposite_line_pairs": [list(pair) for pair in pentagonal.opposite_line_pairs],
        },
        "transversal": (
            None
            if transversal is None
            else {"n": transversal.config.r, "groups": [list(g) for g in transversal.groups]}
        ),
        "characterization": characterization,
        "version": __version__,
    }


def analyze(cfg_path: str) -> int:
    """Print the anonymity analysis of a ``cfg`` file as JSON."""
    report = analysis_report(load_configuration(cfg_path))
    print(json.dumps(report, sort_keys=True))
    return 0


def _load_model(source: str | None) -> QueryModel | None:
    if source is None:
        return None
    if source.startswith("@"):
        with open(source[1:], encoding="utf-8") as handle:
            return QueryModel.from_dict(json.load(handle))
    return QueryModel.from_dict(json.loads(source))


def _self_submission(value: str) -> str | float:
    if value in ("auto", "naive"):
        return value
    try:
        return float(value)
    except ValueError as exc:
        raise ParameterError(
            f"self-submission must be auto, naive or a float (got {value!r})"
        ) from exc


def write_summary(trace: SimulationTrace, stream: TextIO) -> None:
    """Per-owner proxy counts as CSV rows ``owner,proxy,count``."""
    owner_of = {record.serial: record.owner for record in trace.truth_log}
    counts = Counter(
        (owner_of[record.serial], record.proxy) for record in trace.server_log
    )
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["owner", "proxy", "count"])
    for (owner, proxy), count in sorted(counts.items()):
        writer.writerow([owner, proxy, count])


def simulate(
    cfg_path: str,
    protocol: str,
    steps: int,
    seed: int = 0,
    self_submission: str = "auto",
    model: str | None = None,
    summary: bool = False,
    seeds: str | None = None,
    output_dir: str | None = None,
) -> int:
    """Run a simulation and print its trace or proxy summary.

    With ``seeds`` (``a..b``) one trace per seed is written to ``output_dir``
    and the file paths are printed in seed order.
    """

    config = load_configuration(cfg_path)
    query_model = _load_model(model)
    policy = _self_submission(self_submission)
    if seeds is not None:
        if output_dir is None:
            raise ParameterError("--seeds needs --output-dir")
        paths = run_simulation_campaign(
            config,
            Protocol(protocol),
            query_model or QueryModel(),
            parse_seed_range(seeds),
            output_dir,
            steps=steps,
            self_submission=policy,
            workers=campaign_workers(),
        )
        for path in paths:
            print(path)
        return 0

    trace = run(init_community(config, query_model, seed), Protocol(protocol), steps, policy)
    if summary:
        write_summary(trace, sys.stdout)
    else:
        for line in trace_to_jsonl(trace):
            sys.stdout.write(line + "\n")
    return 0


def attack_trace(
    cfg_path: str,
    trace_path: str,
    query_id: str,
    mode: str,
    colluders: str | None = None,
) -> int:
    """Run the intersection attack against one query of a recorded trace."""
    config = load_configuration(cfg_path)
    with open(trace_path, encoding="utf-8") as handle:
        trace = trace_from_jsonl(handle)
    allowed = None
    if colluders is not None:
        try:
            allowed = [int(p) for p in colluders.split(",") if p.strip()]
        except ValueError as exc:
            raise ParameterError(f"colluders must be comma separated points: {colluders}") from exc
    report = intersection_attack(config, trace, query_id, Mode(mode), allowed)
    print(
        json.dumps(
            {**report.to_dict(), "seed": trace.params.seed, "version": __version__},
            sort_keys=True,
        )
    )
    return 0


def attack_live(
    cfg_path: str,
    protocol: str,
    owner: int,
    max_steps: int = 500,
    seed: int = 0,
    self_submission: str = "auto",
    patience: int | None = None,
    seeds: str | None = None,
    output_dir: str | None = None,
) -> int:
    """Attack a simulated heavy repeater and print the shrink trajectory as CSV."""
    config = load_configuration(cfg_path)
    policy = _self_submission(self_submission)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    if seeds is not None:
        if output_dir is None:
            raise ParameterError("--seeds needs --output-dir")
        summaries = run_campaign(
            config,
            Protocol(protocol),
            owner,
            parse_seed_range(seeds),
            output_dir,
            max_steps=max_steps,
            self_submission=policy,
            patience=patience,
            workers=campaign_workers(),
        )
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(summary_row(summary) for summary in summaries)
        return 0

    attack = attack_until_identified(
        config,
        Protocol(protocol),
        owner,
        max_steps,
        seed,
        self_submission=policy,
        patience=patience,
    )
    writer.writerow(TRAJECTORY_HEADER)
    writer.writerows(trajectory_rows(attack, seed))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="upir-lab CLI")
    parser.add_argument("--version", action="version", version=f"upir-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    construct_p = sub.add_parser("construct", help="Write a canonical cfg file")
    construct_p.add_argument("name", choices=sorted(CONSTRUCTIONS), help="Construction")
    construct_p.add_argument("params", nargs="*", help="Construction parameters")
    construct_p.add_argument("--output", help="Write the cfg here instead of stdout")
    construct_p.add_argument("--sidecar", help="Write groups and parallel classes as JSON")

    analyze_p = sub.add_parser("analyze", help="Report anonymity properties as JSON")
    analyze_p.add_argument("cfg", help="Configuration in cfg format")

    simulate_p = sub.add_parser("simulate", help="Simulate the protocol")
    simulate_p.add_argument("--cfg", required=True, help="Configuration in cfg format")
    simulate_p.add_argument("--protocol", choices=["upir1", "upir2"], required=True)
    simulate_p.add_argument(
        "--self-submission", default="auto", help="auto, naive or a probability"
    )
    simulate_p.add_argument("--steps", type=int, required=True, help="Global steps")
    simulate_p.add_argument("--seed", type=int, default=0)
    simulate_p.add_argument("--model", help="Query model as JSON or @file")
    simulate_p.add_argument(
        "--summary", action="store_true", help="Print owner,proxy,count CSV"
    )
    simulate_p.add_argument("--seeds", help="Seed range a..b, one trace per seed")
    simulate_p.add_argument("--output-dir", help="Directory for per-seed traces")

    attack_p = sub.add_parser("attack", help="Run the intersection attack")
    attack_p.add_argument("--cfg", required=True, help="Configuration in cfg format")
    attack_p.add_argument("--live", action="store_true", help="Attack a live simulation")
    attack_p.add_argument("--trace", help="JSON-lines trace written by simulate")
    attack_p.add_argument("--query", help="Query ID to attack")
    attack_p.add_argument("--mode", choices=["open", "closed"])
    attack_p.add_argument("--colluders", help="Comma separated proxies seen by the server")
    attack_p.add_argument("--protocol", choices=["upir1", "upir2"])
    attack_p.add_argument("--owner", type=int, help="Heavy repeater point")
    attack_p.add_argument("--max-steps", type=int, default=500)
    attack_p.add_argument("--seed", type=int, default=0)
    attack_p.add_argument("--self-submission", default="auto")
    attack_p.add_argument("--patience", type=int)
    attack_p.add_argument("--seeds", help="Seed range a..b for a campaign")
    attack_p.add_argument("--output-dir", help="Directory for per-seed CSV files")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "construct":
        return construct(args.name, args.params, args.output, args.sidecar)
    if args.command == "analyze":
        return analyze(args.cfg)
    if args.command == "simulate":
        return simulate(
            args.cfg,
            args.protocol,
            args.steps,
            args.seed,
            args.self_submission,
            args.model,
            args.summary,
            args.seeds,
            args.output_dir,
        )
    if args.live:
        return attack_live(
            args.cfg,
            args.protocol,
            args.owner,
            args.max_steps,
            args.seed,
            args.self_submission,
            args.patience,
            args.seeds,
            args.output_dir,
        )
    return attack_trace(args.cfg, args.trace, args.query, args.mode, args.colluders)


def main(argv: list[str] | None = None) -> int:
    """Entry point for the CLI.

    Parameters
    ----------
    argv : list[str] | None, optional
        Argument list to parse instead of ``sys.argv``.

    Returns
    -------
    int
        Exit status code.
    """

    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "attack":
            if args.live and (args.protocol is None or args.owner is None):
                parser.error("attack --live needs --protocol and --owner")
            if not args.live and None in (args.trace, args.query, args.mode):
                parser.error("attack needs --trace, --query and --mode (or --live)")
        level = os.getenv("LOG_LEVEL", "WARNING").upper()
        if not isinstance(logging.getLevelName(level), int):
            parser.error(f"LOG_LEVEL must be a logging level name (got {level!r})")
        try:
            max_points()
            campaign_workers()
        except ParameterError as exc:
            parser.error(str(exc))
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    logging.basicConfig(level=level, format="%(asctime)s %(message)s")

    try:
        return _dispatch(args)
    except IndexError as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (LookupError, OSError, RuntimeError) as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
