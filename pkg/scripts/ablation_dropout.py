#!/usr/bin/env python3
"""Dropout-rate ablation: export the same round-1 dataset at several dropout
rates and report the realized per-section drop statistics and how many
samples end up with a fully hint-free student context."""

import argparse
import json
import tempfile
from pathlib import Path

from agentcoach.gateway import Gateway
from agentcoach.hints import HintRegistry
from agentcoach.model import ModelTag
from agentcoach.ops.rounds import RoundPlan, run_round
from agentcoach.runtime import AgentRuntime
from agentcoach.scripted import behavior_from_solutions
from agentcoach.store import RunStore
from agentcoach.world import (
    DEFAULT_TEMPLATES,
    generate_world,
    instantiate_tasks_with_solutions,
)

GROUPS = ("flights", "coffee", "yelp", "graph", "agenda-lite")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--rates", type=float, nargs="+",
                        default=[0.0, 0.5, 0.9, 1.0])
    parser.add_argument("--out", type=Path, default=None,
                        help="run directory root (default: temp dir)")
    args = parser.parse_args()

    world = generate_world(7)
    tasks, solutions = instantiate_tasks_with_solutions(
        DEFAULT_TEMPLATES, world, 1, seed=3
    )
    registry = HintRegistry()
    registry.new_initial("Narrow the data with data_filter first.", GROUPS)
    registry.new_initial("Answer with the literal text you observed.", GROUPS)
    gateway = Gateway()
    gateway.register_scripted("teacher", behavior_from_solutions(tasks, solutions))
    runtime = AgentRuntime(gateway, world, registry)
    teacher = ModelTag("teacher", 0, "scripted", "inline")

    root = args.out or Path(tempfile.mkdtemp(prefix="dropout-ablation-"))
    rows = []
    for p in args.rates:
        store = RunStore(root / f"p{p:g}")
        plan = RoundPlan(round_index=1, model_tag_in=teacher,
                         rollouts_per_task=1, dropout_p=p, seed=args.seed)
        run_round(plan, tasks, runtime, store)
        train = store.dataset_dir("round-1-kl") / "train.jsonl"
        kept = dropped = hint_free = total = 0
        for line in train.read_text().splitlines():
            mask = json.loads(line)["dropout"]["mask"]
            kept += sum(mask)
            dropped += len(mask) - sum(mask)
            hint_free += not any(mask)
            total += 1
        rate = dropped / (kept + dropped) if kept + dropped else 0.0
        rows.append((p, total, rate, hint_free))

    print(f"{'p':>5} {'samples':>8} {'realized drop':>14} {'hint-free ctx':>14}")
    for p, total, rate, hint_free in rows:
        print(f"{p:>5g} {total:>8} {rate:>14.3f} {hint_free:>14}")
    print(f"artifacts under {root}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
