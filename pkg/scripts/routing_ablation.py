"""Compare routing strategies on the family-specialization environment.

Each strategy sees the identical task list and council; only the routing
decision differs. Success rates are computed over the post-warmup block,
after routing has had a chance to learn which expert owns which family.
"""

from __future__ import annotations

import argparse

from council.config import ROUTING_STRATEGIES
from council.presets import SYNTH_TASK_COUNT, SYNTH_WARMUP, execute, synth_routing_preset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0])
    parser.add_argument("--tasks", type=int, default=SYNTH_TASK_COUNT)
    parser.add_argument("--warmup", type=int, default=SYNTH_WARMUP)
    parser.add_argument(
        "--strategies", nargs="+", default=list(ROUTING_STRATEGIES),
        choices=ROUTING_STRATEGIES,
    )
    args = parser.parse_args()

    print(f"{'strategy':<14} {'success':>8} {'nodes/success':>14}")
    for strategy in args.strategies:
        rates = []
        nodes = []
        for seed in args.seeds:
            preset = synth_routing_preset(
                strategy, task_count=args.tasks, warmup_tasks=args.warmup
            )
            summary = execute(preset, seed, collect_traces=False).summary
            rates.append(summary["scored_success_rate"])
            nodes.append(summary["nodes_per_success"])
        rate = sum(rates) / len(rates)
        usable = [n for n in nodes if n is not None]
        nodes_text = f"{sum(usable) / len(usable):.1f}" if usable else "n/a"
        print(f"{strategy:<14} {rate:>8.3f} {nodes_text:>14}")


if __name__ == "__main__":
    main()
