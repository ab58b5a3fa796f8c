"""Compare value-signal modes on the family-specialization environment.

Routing is pinned to round-robin inside the preset so every mode runs the
same expert schedule; differences in success rate then come from the value
estimates steering the search, not from routing luck.
"""

from __future__ import annotations

import argparse

from council.config import VALUE_MODES
from council.presets import SYNTH_TASK_COUNT, SYNTH_WARMUP, execute, synth_value_preset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0])
    parser.add_argument("--tasks", type=int, default=SYNTH_TASK_COUNT)
    parser.add_argument("--warmup", type=int, default=SYNTH_WARMUP)
    parser.add_argument("--modes", nargs="+", default=list(VALUE_MODES), choices=VALUE_MODES)
    args = parser.parse_args()

    print(f"{'mode':<10} {'success':>8} {'nodes/success':>14}")
    for mode in args.modes:
        rates = []
        nodes = []
        for seed in args.seeds:
            preset = synth_value_preset(mode, task_count=args.tasks, warmup_tasks=args.warmup)
            summary = execute(preset, seed, collect_traces=False).summary
            rates.append(summary["scored_success_rate"])
            nodes.append(summary["nodes_per_success"])
        rate = sum(rates) / len(rates)
        usable = [n for n in nodes if n is not None]
        nodes_text = f"{sum(usable) / len(usable):.1f}" if usable else "n/a"
        print(f"{mode:<10} {rate:>8.3f} {nodes_text:>14}")


if __name__ == "__main__":
    main()
