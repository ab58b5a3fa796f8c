"""Experiment harness: task files, deterministic runs, ablation sweeps.

A run maps a task file through the planner and writes two artifacts into the
output directory: ``metrics.jsonl`` (one row per task, then one summary line)
and ``trace.jsonl`` (per-iteration search events). All output is generated
with sorted keys and no timestamps, so a rerun with the same seed produces
byte-identical files.
"""

from __future__ import annotations

import copy
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Callable

from .config import (
    ROUTING_STRATEGIES,
    VALUE_MODES,
    EnvSpec,
    ExpertSpec,
    PlannerConfig,
    RunConfig,
)
from .embedding import Embedder, TrigramEmbedder
from .envs import build_environment
from .envs.base import Environment, TaskSpec
from .envs.synth import SynthConfig
from .errors import BackendConfigError
from .experts import (
    ConstantEvaluatorExpert,
    Council,
    Expert,
    Game24OracleExpert,
    LLMExpert,
    RandomExpert,
    SynthSpecialistExpert,
    TableExpert,
)
from .gateway import HTTPBackend
from .mcts import search
from .memory import DEFAULT_COLD_START, profile_records, restore_profiles
from .seeding import derived_seed

METRICS_FILENAME = "metrics.jsonl"
TRACE_FILENAME = "trace.jsonl"


def dump_json(obj) -> str:
    """Canonical one-line JSON: sorted keys, compact, strict floats."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


# ---------------------------------------------------------------------------
# Task files
# ---------------------------------------------------------------------------


def read_tasks(path: str | Path) -> list[TaskSpec]:
    """Load a JSONL task file; a bad line is reported by its line number."""
    tasks: list[TaskSpec] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"tasks file {path}: line {lineno}: not valid JSON") from exc
            if not isinstance(data, dict):
                raise ValueError(f"tasks file {path}: line {lineno}: expected an object")
            for key in ("task_id", "environment", "payload"):
                if key not in data:
                    raise ValueError(f"tasks file {path}: line {lineno}: missing key '{key}'")
            tasks.append(
                TaskSpec(
                    task_id=str(data["task_id"]),
                    environment=str(data["environment"]),
                    payload=data["payload"],
                )
            )
    return tasks


def write_tasks(path: str | Path, tasks: list[TaskSpec]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for task in tasks:
            handle.write(
                dump_json(
                    {
                        "task_id": task.task_id,
                        "environment": task.environment,
                        "payload": task.payload,
                    }
                )
                + "\n"
            )


# ---------------------------------------------------------------------------
# Memory persistence
# ---------------------------------------------------------------------------

_MEMORY_KEYS = ("expert_id", "segment_id", "prefix_steps", "created_at", "ledger")


def save_memory(path: str | Path, profiles: dict) -> int:
    """Write every stored segment as one JSON line; returns the line count."""
    records = profile_records(profiles)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(dump_json(record) + "\n")
    return len(records)


def load_memory(
    path: str | Path,
    embedder: Embedder | None = None,
    capacity: int = 512,
    cold_start: float = DEFAULT_COLD_START,
) -> dict:
    """Rebuild profiles from a memory file; a bad line is reported by number."""
    records: list[dict] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"memory file {path}: line {lineno}: not valid JSON") from exc
            if not isinstance(data, dict):
                raise ValueError(f"memory file {path}: line {lineno}: expected an object")
            for key in _MEMORY_KEYS:
                if key not in data:
                    raise ValueError(f"memory file {path}: line {lineno}: missing key '{key}'")
            records.append(data)
    return restore_profiles(records, embedder=embedder, capacity=capacity, cold_start=cold_start)


# ---------------------------------------------------------------------------
# Council construction
# ---------------------------------------------------------------------------


def _synth_config_from_env(env_spec: EnvSpec) -> SynthConfig:
    params = dict(env_spec.params)
    kwargs = {
        key: params[key]
        for key in ("families", "depth", "budget", "vocab_size")
        if key in params
    }
    if "families" in kwargs:
        kwargs["families"] = tuple(kwargs["families"])
    return SynthConfig(**kwargs)


def build_expert(spec: ExpertSpec, env_spec: EnvSpec, run_seed: int) -> Expert:
    """Instantiate one expert from its configuration entry.

    Scripted experts are seeded from (run seed, expert id) so a council is
    reproducible as a unit. Credentials for llm-backed experts stay in the
    environment variable named by ``credential_env``; only the variable's
    name is ever stored or logged.
    """
    params = dict(spec.params)
    if spec.kind == "scripted":
        role = params.pop("role", None)
        if role == "game24-oracle":
            return Game24OracleExpert(spec.expert_id, display_name=spec.display_name)
        if role == "synth-specialist":
            return SynthSpecialistExpert(
                spec.expert_id,
                family=params["family"],
                config=_synth_config_from_env(env_spec),
                seed=derived_seed(run_seed, "expert", spec.expert_id),
                eval_noise=float(params.get("eval_noise", 0.0)),
                display_name=spec.display_name,
            )
        if role == "random":
            return RandomExpert(
                spec.expert_id,
                pool=list(params["pool"]),
                seed=derived_seed(run_seed, "expert", spec.expert_id),
                display_name=spec.display_name,
            )
        if role == "table":
            return TableExpert(
                spec.expert_id,
                table=dict(params["table"]),
                score=float(params.get("score", 0.5)),
                display_name=spec.display_name,
            )
        if role == "constant":
            return ConstantEvaluatorExpert(
                spec.expert_id,
                score=float(params.get("score", 0.5)),
                actions=list(params.get("actions", [])),
                display_name=spec.display_name,
            )
        raise ValueError(f"expert {spec.expert_id}: unknown scripted role {role!r}")
    # llm-backed
    for key in ("endpoint", "model", "credential_env"):
        if key not in params:
            raise BackendConfigError(f"expert {spec.expert_id}: missing backend key '{key}'")
    backend = HTTPBackend(
        backend_id=params.get("backend_id", spec.expert_id),
        endpoint=params["endpoint"],
        model=params["model"],
        credential_env=params["credential_env"],
        concurrency=int(params.get("concurrency", 4)),
    )
    return LLMExpert(
        spec.expert_id,
        backend=backend,
        act_temperature=float(params.get("act_temperature", 0.7)),
        eval_temperature=float(params.get("eval_temperature", 0.0)),
        max_tokens=int(params.get("max_tokens", 256)),
        timeout=float(params.get("timeout", 60.0)),
        display_name=spec.display_name,
    )


def build_council(config: RunConfig, profiles: dict | None = None) -> Council:
    if not config.council:
        raise ValueError("config key 'council': at least one expert is required")
    experts = [build_expert(spec, config.env, config.seed) for spec in config.council]
    return Council(
        experts,
        profiles=profiles,
        embedder=TrigramEmbedder(config.embedding_dim),
        capacity=config.memory.capacity,
        cold_start=config.memory.cold_start,
    )


def _backend_usage(councils: list[Council]) -> dict:
    usage: dict[str, dict] = {}
    seen: set[int] = set()
    for council in councils:
        for expert in council.experts:
            backend = getattr(expert, "backend", None)
            if backend is None or id(backend) in seen:
                continue
            seen.add(id(backend))
            usage[backend.backend_id] = {
                "requests": backend.usage.requests,
                "input_chars": backend.usage.input_chars,
                "output_chars": backend.usage.output_chars,
            }
    return usage


# ---------------------------------------------------------------------------
# Core run loop
# ---------------------------------------------------------------------------


@dataclass
class RunOutput:
    rows: list[dict]
    summary: dict
    out_dir: Path | None = None
    trace_rows: list[dict] = field(default_factory=list)


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def summarize(rows: list[dict], warmup_tasks: int, backend_usage: dict | None = None) -> dict:
    """Aggregate metric rows. Scored aggregates exclude the warm-up block so
    comparisons across runs are not diluted by the cold-memory phase."""
    scored = [row for row in rows if not row["warmup"]]
    successes = [row for row in rows if row["success"]]
    scored_successes = [row for row in scored if row["success"]]
    return {
        "tasks": len(rows),
        "warmup_tasks": warmup_tasks,
        "successes": len(successes),
        "success_rate": (len(successes) / len(rows)) if rows else None,
        "scored_tasks": len(scored),
        "scored_successes": len(scored_successes),
        "scored_success_rate": (len(scored_successes) / len(scored)) if scored else None,
        "mean_reward": _mean([row["reward"] for row in rows]),
        "mean_iterations": _mean([row["iterations_used"] for row in rows]),
        "mean_nodes_expanded": _mean([row["nodes_expanded"] for row in rows]),
        "mean_success_depth": _mean([row["depth"] for row in successes]),
        "nodes_per_success": _mean([row["nodes_expanded"] for row in scored_successes]),
        "backend_usage": backend_usage or {},
    }


def _run_one(
    index: int,
    task: TaskSpec,
    env: Environment,
    council: Council,
    planner: PlannerConfig,
    seed: int,
    warmup_tasks: int,
    collect_traces: bool,
) -> tuple[dict, list[dict]]:
    rng = Random(derived_seed(seed, "task", index, task.task_id))
    episode_id = f"{task.task_id}|{index}"
    trace: list[dict] | None = [] if collect_traces else None
    result = search(task, env, council, planner, rng, episode_id=episode_id, trace=trace)
    row = {
        "index": index,
        "task_id": task.task_id,
        "episode_id": episode_id,
        "warmup": index < warmup_tasks,
        "success": result.success,
        "reward": result.reward,
        "iterations_used": result.iterations_used,
        "nodes_expanded": result.nodes_expanded,
        "max_depth_reached": result.max_depth_reached,
        "depth": result.best_trajectory.depth,
        "per_step_expert": list(result.episode.per_step_expert),
    }
    trace_rows = [
        {"index": index, "task_id": task.task_id, "episode_id": episode_id, **event}
        for event in (trace or [])
    ]
    return row, trace_rows


def run_tasks(
    tasks: list[TaskSpec],
    env: Environment,
    planner: PlannerConfig,
    seed: int,
    council: Council | None = None,
    council_factory: Callable[[], Council] | None = None,
    warmup_tasks: int = 0,
    out_dir: str | Path | None = None,
    collect_traces: bool = True,
    workers: int = 1,
) -> RunOutput:
    """Run the planner over a task list and aggregate the results.

    A shared ``council`` carries its memory across tasks and forces
    sequential execution. A ``council_factory`` builds an isolated council
    per task, which is what makes ``workers > 1`` sound; rows and traces are
    emitted in task order either way.
    """
    if (council is None) == (council_factory is None):
        raise ValueError("provide exactly one of council or council_factory")
    if workers > 1 and council is not None:
        raise ValueError("a shared council cannot run with workers > 1")

    councils_seen: list[Council] = []
    results: list[tuple[dict, list[dict]]] = []
    if council is not None:
        councils_seen.append(council)
        for index, task in enumerate(tasks):
            results.append(
                _run_one(index, task, env, council, planner, seed, warmup_tasks, collect_traces)
            )
    else:

        def job(pair: tuple[int, TaskSpec]) -> tuple[dict, list[dict]]:
            index, task = pair
            fresh = council_factory()
            councils_seen.append(fresh)
            return _run_one(
                index, task, env, fresh, planner, seed, warmup_tasks, collect_traces
            )

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(job, enumerate(tasks)))
        else:
            results = [job(pair) for pair in enumerate(tasks)]

    rows = [row for row, _ in results]
    trace_rows = [event for _, events in results for event in events]
    summary = summarize(rows, warmup_tasks, _backend_usage(councils_seen))

    output = RunOutput(rows=rows, summary=summary, trace_rows=trace_rows)
    if out_dir is not None:
        output.out_dir = write_run_files(out_dir, rows, summary, trace_rows)
    return output


def write_run_files(
    out_dir: str | Path, rows: list[dict], summary: dict, trace_rows: list[dict]
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / METRICS_FILENAME, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(dump_json(row) + "\n")
        handle.write(dump_json({"summary": summary}) + "\n")
    with open(out_dir / TRACE_FILENAME, "w", encoding="utf-8") as handle:
        for event in trace_rows:
            handle.write(dump_json(event) + "\n")
    return out_dir


def run(config: RunConfig, tasks: list[TaskSpec] | None = None) -> RunOutput:
    """File-driven entry point used by the command line."""
    if tasks is None:
        if config.tasks_path is None:
            raise ValueError("config key 'tasks_path': required when no tasks are passed")
        tasks = read_tasks(config.tasks_path)
    env = build_environment(config.env.name, config.env.params)

    embedder = TrigramEmbedder(config.embedding_dim)
    loaded_profiles: dict | None = None
    if config.memory.load_path is not None:
        loaded_profiles = load_memory(
            config.memory.load_path,
            embedder=embedder,
            capacity=config.memory.capacity,
            cold_start=config.memory.cold_start,
        )

    shared_council: Council | None = None
    factory: Callable[[], Council] | None = None
    if config.memory.shared:
        shared_council = build_council(config, profiles=loaded_profiles)
    else:
        experts = [build_expert(spec, config.env, config.seed) for spec in config.council]
        # Profiles hold locks, so per-task copies go through the record form.
        base_records = profile_records(loaded_profiles) if loaded_profiles else None

        def factory() -> Council:
            profiles = None
            if base_records:
                profiles = restore_profiles(
                    base_records,
                    embedder=embedder,
                    capacity=config.memory.capacity,
                    cold_start=config.memory.cold_start,
                )
            return Council(
                experts,
                profiles=profiles,
                embedder=embedder,
                capacity=config.memory.capacity,
                cold_start=config.memory.cold_start,
            )

    output = run_tasks(
        tasks,
        env,
        config.planner,
        config.seed,
        council=shared_council,
        council_factory=factory,
        warmup_tasks=config.warmup_tasks,
        out_dir=config.out_dir,
        workers=config.workers,
    )
    if config.memory.save_path is not None and shared_council is not None:
        save_memory(config.memory.save_path, shared_council.profiles)
    return output


# ---------------------------------------------------------------------------
# Ablations
# ---------------------------------------------------------------------------

ABLATION_AXES = ("routing", "value-signal", "council-size")


def _council_subsets(count: int) -> list[tuple[int, ...]]:
    """Index groups for the council-size axis: singles, pairs, full set."""
    groups: list[tuple[int, ...]] = [(i,) for i in range(count)]
    if count > 2:
        groups.extend((i, j) for i in range(count) for j in range(i + 1, count))
    if count > 1:
        groups.append(tuple(range(count)))
    return groups


def ablation_variants(config: RunConfig, axis: str) -> list[tuple[str, RunConfig]]:
    """Enumerate the configs an ablation axis sweeps over."""
    variants: list[tuple[str, RunConfig]] = []
    if axis == "routing":
        for strategy in ROUTING_STRATEGIES:
            variant = copy.deepcopy(config)
            variant.planner.routing_strategy = strategy
            variants.append((strategy, variant))
    elif axis == "value-signal":
        for mode in VALUE_MODES:
            variant = copy.deepcopy(config)
            variant.planner.value_mode = mode
            variants.append((mode, variant))
    elif axis == "council-size":
        for group in _council_subsets(len(config.council)):
            variant = copy.deepcopy(config)
            variant.council = [variant.council[i] for i in group]
            name = "+".join(config.council[i].expert_id for i in group)
            variants.append((name, variant))
    else:
        raise ValueError(f"unknown ablation axis: {axis}; expected one of {ABLATION_AXES}")
    return variants


def run_ablation(
    config: RunConfig,
    axis: str,
    seeds: list[int],
    tasks: list[TaskSpec] | None = None,
) -> dict:
    """Run every variant of an axis across seeds; write and return a report.

    Per-variant aggregates are means over seeds of the scored success rate
    and of expanded nodes per successful task.
    """
    base_out = Path(config.out_dir)
    rows: list[dict] = []
    for name, variant in ablation_variants(config, axis):
        for seed in seeds:
            run_config = copy.deepcopy(variant)
            run_config.seed = seed
            run_config.out_dir = str(base_out / f"{axis}-{name}-s{seed}")
            output = run(run_config, tasks=tasks)
            rows.append(
                {
                    "variant": name,
                    "seed": seed,
                    "scored_success_rate": output.summary["scored_success_rate"],
                    "success_rate": output.summary["success_rate"],
                    "nodes_per_success": output.summary["nodes_per_success"],
                    "mean_nodes_expanded": output.summary["mean_nodes_expanded"],
                }
            )
    variants_seen = list(dict.fromkeys(row["variant"] for row in rows))
    aggregates = {}
    for name in variants_seen:
        mine = [row for row in rows if row["variant"] == name]
        rates = [row["scored_success_rate"] for row in mine if row["scored_success_rate"] is not None]
        nodes = [row["nodes_per_success"] for row in mine if row["nodes_per_success"] is not None]
        aggregates[name] = {
            "mean_scored_success_rate": _mean(rates),
            "mean_nodes_per_success": _mean(nodes),
            "seeds": len(mine),
        }
    report = {"axis": axis, "seeds": seeds, "rows": rows, "aggregates": aggregates}
    base_out.mkdir(parents=True, exist_ok=True)
    with open(base_out / "ablation.json", "w", encoding="utf-8") as handle:
        handle.write(dump_json(report) + "\n")
    return report


def ablation_table(report: dict) -> str:
    """Fixed-width text table of per-variant aggregates."""
    width = max([len("variant")] + [len(name) for name in report["aggregates"]])
    lines = [f"axis: {report['axis']}  seeds: {len(report['seeds'])}"]
    header = f"{'variant':<{width}} {'success':>8} {'nodes/success':>14}"
    lines.append(header)
    lines.append("-" * len(header))
    for name, agg in report["aggregates"].items():
        rate = agg["mean_scored_success_rate"]
        nodes = agg["mean_nodes_per_success"]
        rate_text = "n/a" if rate is None else f"{rate:.3f}"
        nodes_text = "n/a" if nodes is None else f"{nodes:.1f}"
        lines.append(f"{name:<{width}} {rate_text:>8} {nodes_text:>14}")
    return "\n".join(lines)
