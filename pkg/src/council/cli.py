"""Command line front end.

Four subcommands: ``run`` executes a task file under one configuration,
``ablation`` sweeps one axis of that configuration across seeds, ``oracle``
checks a Game of 24 task file for solvability, and ``memory`` saves, loads,
or inspects persisted success-memory files.

Configuration layering is deliberately simple. A JSON config file supplies
defaults and command line flags override individual keys; every scalar key
of the run configuration has a flag twin. Structured keys (the council list,
environment parameters) live in the file. When neither source names a
council, a standard scripted council for the chosen environment is filled
in so quick runs need no config file at all.

Exit status reflects completion: a run whose tasks all fail still exits 0,
while unreadable files, invalid configuration, or malformed task lines exit
nonzero with a diagnostic naming the offending key or line.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ROUTING_STRATEGIES, VALUE_MODES, RunConfig, config_from_dict
from .embedding import TrigramEmbedder
from .envs.game24 import game24_oracle
from .envs.synth import DEFAULT_FAMILIES
from .errors import BackendConfigError
from .harness import (
    ABLATION_AXES,
    ablation_table,
    dump_json,
    load_memory,
    read_tasks,
    run,
    run_ablation,
    save_memory,
)

# Maps each flag destination to its key path inside the config dict. Flags
# stay None unless given, so only explicit flags override file values.
_FLAG_PATHS: dict[str, tuple[str, ...]] = {
    "seed": ("seed",),
    "env": ("env", "name"),
    "tasks": ("tasks_path",),
    "out_dir": ("out_dir",),
    "warmup_tasks": ("warmup_tasks",),
    "workers": ("workers",),
    "embedding_dim": ("embedding_dim",),
    "routing_strategy": ("planner", "routing_strategy"),
    "routing_temperature": ("planner", "routing_temperature"),
    "value_mode": ("planner", "value_mode"),
    "success_threshold": ("planner", "success_threshold"),
    "exploration": ("planner", "exploration"),
    "aggregator": ("planner", "aggregator"),
    "iterations": ("planner", "budget", "iterations"),
    "expansion_width": ("planner", "budget", "expansion_width"),
    "max_depth": ("planner", "budget", "max_depth"),
    "memory_capacity": ("memory", "capacity"),
    "memory_cold_start": ("memory", "cold_start"),
    "memory_shared": ("memory", "shared"),
    "memory_load": ("memory", "load_path"),
    "memory_save": ("memory", "save_path"),
}


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file supplying defaults")
    parser.add_argument("--seed", type=int, help="run seed (required here or in the file)")
    parser.add_argument("--env", help="environment name: game24 or synth")
    parser.add_argument("--tasks", help="JSONL task file")
    parser.add_argument("--out-dir", help="directory for metrics and trace files")
    parser.add_argument("--warmup-tasks", type=int, help="leading tasks excluded from scored aggregates")
    parser.add_argument("--workers", type=int, help="parallel tasks; needs --memory-shared false")
    parser.add_argument("--embedding-dim", type=int, help="hashed trigram embedding width")
    parser.add_argument("--routing-strategy", choices=ROUTING_STRATEGIES)
    parser.add_argument("--routing-temperature", type=float, help="softmax temperature for routing")
    parser.add_argument("--value-mode", choices=VALUE_MODES)
    parser.add_argument("--success-threshold", type=float, help="reward at which search stops early")
    parser.add_argument("--exploration", type=float, help="UCT exploration constant")
    parser.add_argument("--aggregator", help="expert id that merges proposals under collaborative routing")
    parser.add_argument("--iterations", type=int, help="search iterations per task")
    parser.add_argument("--expansion-width", type=int, help="children proposed per expansion")
    parser.add_argument("--max-depth", type=int, help="depth cap per trajectory")
    parser.add_argument("--memory-capacity", type=int, help="segments kept per expert profile")
    parser.add_argument("--memory-cold-start", type=float, help="utility prior for unused segments")
    parser.add_argument("--memory-shared", type=_parse_bool, metavar="BOOL",
                        help="share one memory across tasks (true) or isolate per task (false)")
    parser.add_argument("--memory-load", help="memory file to preload profiles from")
    parser.add_argument("--memory-save", help="memory file to write after the run")


def _set_path(data: dict, path: tuple[str, ...], value) -> None:
    for key in path[:-1]:
        data = data.setdefault(key, {})
    data[path[-1]] = value


def _default_council(env_name: str, env_params: dict) -> list[dict]:
    """The standard scripted council for a bundled environment."""
    if env_name == "game24":
        return [{"expert_id": "solver", "params": {"role": "game24-oracle"}}]
    if env_name == "synth":
        families = env_params.get("families", list(DEFAULT_FAMILIES))
        return [
            {
                "expert_id": f"{family}-specialist",
                "params": {"role": "synth-specialist", "family": family},
            }
            for family in families
        ]
    return []


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Layer config file and flags into a validated run configuration."""
    data: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            try:
                data = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ValueError(f"config file {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValueError(f"config file {args.config} must contain a JSON object")
    for dest, path in _FLAG_PATHS.items():
        value = getattr(args, dest)
        if value is not None:
            _set_path(data, path, value)
    if not data.get("council"):
        env = data.get("env", {})
        council = _default_council(env.get("name", "game24"), env.get("params", {}))
        if council:
            data["council"] = council
    return config_from_dict(data)


def cmd_run(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    output = run(config)
    print(dump_json(output.summary))
    if output.out_dir is not None:
        print(f"wrote {output.out_dir / 'metrics.jsonl'}")
        print(f"wrote {output.out_dir / 'trace.jsonl'}")
    return 0


def cmd_ablation(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    seeds = args.seeds if args.seeds else [config.seed]
    report = run_ablation(config, args.axis, seeds)
    print(ablation_table(report))
    print(f"wrote {Path(config.out_dir) / 'ablation.json'}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    tasks = read_tasks(args.tasks)
    rows: list[dict] = []
    solvable_count = 0
    for task in tasks:
        if task.environment != "game24":
            raise ValueError(
                f"oracle: task {task.task_id!r} has environment {task.environment!r}, "
                "only game24 tasks can be checked"
            )
        payload = task.payload
        if not isinstance(payload, list) or not all(
            isinstance(x, (int, float)) for x in payload
        ):
            raise ValueError(f"oracle: task {task.task_id!r} payload must be a list of numbers")
        solvable, witness = game24_oracle(payload)
        solvable_count += int(solvable)
        rows.append({"task_id": task.task_id, "solvable": solvable, "witness": witness})
        if solvable:
            print(f"{task.task_id}: solvable via {' ; '.join(witness)}")
        else:
            print(f"{task.task_id}: unsolvable")
    print(f"{solvable_count}/{len(tasks)} tasks solvable")
    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(dump_json(row) + "\n")
        print(f"wrote {out_path}")
    return 0


def _memory_summary(profiles: dict) -> list[str]:
    lines = []
    total = 0
    for expert_id in sorted(profiles):
        profile = profiles[expert_id]
        segments = profile.segments()
        total += len(segments)
        utilities = [profile.utility(segment) for segment in segments]
        mean_utility = sum(utilities) / len(utilities) if utilities else None
        entries = sum(len(segment.ledger) for segment in segments)
        utility_text = "n/a" if mean_utility is None else f"{mean_utility:.3f}"
        lines.append(
            f"{expert_id}: {len(segments)} segments, "
            f"mean utility {utility_text}, {entries} ledger entries"
        )
    lines.append(f"total: {total} segments across {len(profiles)} experts")
    return lines


def cmd_memory(args: argparse.Namespace) -> int:
    embedder = TrigramEmbedder(args.embedding_dim)
    if args.action == "load":
        profiles = load_memory(args.path, embedder=embedder)
        count = sum(len(profile.segments()) for profile in profiles.values())
        print(f"loaded {count} segments from {args.path}")
        return 0
    if args.action == "inspect":
        profiles = load_memory(args.path, embedder=embedder)
        for line in _memory_summary(profiles):
            print(line)
        return 0
    # save: canonical round-trip of an existing file to a new path
    if not args.dest:
        raise ValueError("memory save needs a destination path")
    profiles = load_memory(args.path, embedder=embedder)
    count = save_memory(args.dest, profiles)
    print(f"wrote {count} segments to {args.dest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="council",
        description="Expert-council planner: runs, ablations, oracles, memory files.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="execute a task file under one configuration")
    _add_run_flags(run_parser)
    run_parser.set_defaults(handler=cmd_run)

    ablation_parser = commands.add_parser("ablation", help="sweep one configuration axis")
    _add_run_flags(ablation_parser)
    ablation_parser.add_argument("--axis", required=True, choices=ABLATION_AXES)
    ablation_parser.add_argument(
        "--seeds", type=int, nargs="+", help="seeds to average over (default: the run seed)"
    )
    ablation_parser.set_defaults(handler=cmd_ablation)

    oracle_parser = commands.add_parser(
        "oracle", help="check a Game of 24 task file for solvability"
    )
    oracle_parser.add_argument("tasks", help="JSONL task file")
    oracle_parser.add_argument("--out", help="write per-task verdicts to this JSONL file")
    oracle_parser.set_defaults(handler=cmd_oracle)

    memory_parser = commands.add_parser(
        "memory", help="save, load, or inspect a success-memory file"
    )
    memory_parser.add_argument("action", choices=("save", "load", "inspect"))
    memory_parser.add_argument("path", help="memory file to read")
    memory_parser.add_argument("dest", nargs="?", help="destination path (save only)")
    memory_parser.add_argument("--embedding-dim", type=int, default=256,
                               help="embedding width used when rebuilding profiles")
    memory_parser.set_defaults(handler=cmd_memory)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, BackendConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
