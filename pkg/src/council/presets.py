"""Canned experiment setups shared by the scripts and the acceptance suite.

Each preset bundles a task list, an environment, a planner configuration and
a council builder. Councils are rebuilt per run seed so repeated executions
never leak memory between runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .config import PlannerConfig, SearchBudget
from .embedding import TrigramEmbedder
from .envs.base import Environment, TaskSpec
from .envs.game24 import Game24Env, make_game24_tasks
from .envs.synth import SynthConfig, SynthEnv, make_synth_tasks
from .experts import Council, Game24OracleExpert, SynthSpecialistExpert
from .harness import RunOutput, run_tasks
from .seeding import derived_seed

SYNTH_TASK_COUNT = 300
SYNTH_WARMUP = 100


@dataclass
class Preset:
    """Everything needed to execute one run at a given seed."""

    tasks: list[TaskSpec]
    env: Environment
    planner: PlannerConfig
    council_builder: Callable[[int], Council]
    warmup_tasks: int = 0


def execute(
    preset: Preset,
    seed: int,
    out_dir: str | None = None,
    collect_traces: bool = True,
) -> RunOutput:
    return run_tasks(
        preset.tasks,
        preset.env,
        preset.planner,
        seed,
        council=preset.council_builder(seed),
        warmup_tasks=preset.warmup_tasks,
        out_dir=out_dir,
        collect_traces=collect_traces,
    )


def game24_solver_preset(task_count: int = 100, task_seed: int = 11) -> Preset:
    """Solvable 24-game tasks under the exact-solver expert."""
    planner = PlannerConfig(
        budget=SearchBudget(iterations=10, expansion_width=4, max_depth=12)
    )

    def builder(seed: int) -> Council:
        return Council([Game24OracleExpert("solver")], embedder=TrigramEmbedder())

    return Preset(
        tasks=make_game24_tasks(task_count, seed=task_seed),
        env=Game24Env(),
        planner=planner,
        council_builder=builder,
    )


# Wider hash space than the 256 default: family separation rests on rare
# cross-family n-grams, and collisions would reintroduce them.
SYNTH_EMBED_DIM = 1024


def _synth_council_builder(
    config: SynthConfig, eval_noise: float
) -> Callable[[int], Council]:
    def builder(seed: int) -> Council:
        experts = [
            SynthSpecialistExpert(
                f"{family}-specialist",
                family=family,
                config=config,
                seed=derived_seed(seed, "expert", family),
                eval_noise=eval_noise,
            )
            for family in config.families
        ]
        return Council(experts, embedder=TrigramEmbedder(SYNTH_EMBED_DIM))

    return builder


def _synth_planner(strategy: str, value_mode: str) -> PlannerConfig:
    # The iteration budget is deliberately tight. Round-robin cycling solves
    # these tasks by brute force once each specialist gets enough turns, so a
    # small budget is what makes routing quality visible at all.
    return PlannerConfig(
        budget=SearchBudget(iterations=12, expansion_width=2, max_depth=9),
        routing_strategy=strategy,
        routing_temperature=0.15,
        value_mode=value_mode,
    )


def synth_routing_preset(
    strategy: str,
    task_count: int = SYNTH_TASK_COUNT,
    warmup_tasks: int = SYNTH_WARMUP,
    task_seed: int = 29,
    eval_noise: float = 0.0,
) -> Preset:
    """Routing-strategy comparison on the family-specialization environment."""
    config = SynthConfig()
    planner = _synth_planner(strategy, "full")
    return Preset(
        tasks=make_synth_tasks(task_count, seed=task_seed, config=config),
        env=SynthEnv(config),
        planner=planner,
        council_builder=_synth_council_builder(config, eval_noise),
        warmup_tasks=warmup_tasks,
    )


def synth_value_preset(
    value_mode: str,
    task_count: int = SYNTH_TASK_COUNT,
    warmup_tasks: int = SYNTH_WARMUP,
    task_seed: int = 43,
    eval_noise: float = 0.2,
) -> Preset:
    """Value-signal comparison: noisy evaluators, memory warmed in-run.

    Routing is pinned to round-robin so every variant sees the identical
    expert schedule; differences between runs then isolate the value signals
    instead of compounding with routing luck.
    """
    config = SynthConfig()
    planner = _synth_planner("round-robin", value_mode)
    return Preset(
        tasks=make_synth_tasks(task_count, seed=task_seed, config=config),
        env=SynthEnv(config),
        planner=planner,
        council_builder=_synth_council_builder(config, eval_noise),
        warmup_tasks=warmup_tasks,
    )
