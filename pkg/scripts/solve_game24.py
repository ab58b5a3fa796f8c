"""Run the exact-solver council over a batch of Game of 24 tasks.

Every sampled task is solvable, so this doubles as a planner health check:
the success rate should sit at or near 1.0 under the default budget.
"""

from __future__ import annotations

import argparse

from council.harness import dump_json
from council.presets import execute, game24_solver_preset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tasks", type=int, default=100, help="number of tasks to sample")
    parser.add_argument("--task-seed", type=int, default=11, help="seed for task sampling")
    parser.add_argument("--out-dir", default=None, help="write metrics and traces here")
    args = parser.parse_args()

    preset = game24_solver_preset(task_count=args.tasks, task_seed=args.task_seed)
    output = execute(preset, args.seed, out_dir=args.out_dir)
    print(dump_json(output.summary))


if __name__ == "__main__":
    main()
