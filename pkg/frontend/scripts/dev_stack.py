"""Build a scripted coaching run and serve the REST API for console work.

Produces a run directory with: a generated world/task set, a scripted
teacher that makes a known mistake (calls the undocumented `data_fetch`
tool) on the first few tasks, a completed round 1 with its model tag
registered, and hint-free round-2 rollouts ready for filtering. No
corrective hint is bound — that is the coach's job in the console.

Usage:
    python3 scripts/dev_stack.py --dir /tmp/devrun --port 8900 --serve
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from agentcoach.gateway import CompletionParams
from agentcoach.runtime import PromptProfile
from agentcoach.ops.cli import main as coach_cli
from agentcoach.ops.config import CoachConfig, load_tasks
from agentcoach.ops.rounds import register_model_tag
from agentcoach.scripted import HintOverride, MistakeSpec, behavior_from_solutions
from agentcoach.store import RunStore

MISTAKE_OBS = "unknown tool 'data_fetch'"


def build_run(root: Path, mistakes: int = 2, seed: int = 7) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    world = root / "world.json"
    tasks_path = root / "tasks.json"
    solutions_path = root / "solutions.json"
    rc = coach_cli(["world", "gen", "--out", str(world), "--seed", str(seed)])
    rc |= coach_cli(["tasks", "gen", "--world", str(world), "--out",
                     str(tasks_path), "--solutions-out", str(solutions_path),
                     "--seed", "3"])
    if rc:
        raise SystemExit("artifact generation failed")

    tasks = load_tasks(tasks_path)
    solutions = {
        k: [tuple(c) for c in v]
        for k, v in json.loads(solutions_path.read_text()).items()
    }
    chosen = tasks[:mistakes]
    behavior = behavior_from_solutions(
        tasks, solutions,
        mistakes=[
            MistakeSpec(task_id=t.task_id, step_number=1,
                        monologue="I will fetch everything in one call.",
                        code='data_fetch("all")', resume=True)
            for t in chosen
        ],
        hint_overrides=[
            HintOverride(task_id=t.task_id, step_number=1,
                         hint_snippet="no data_fetch tool",
                         monologue=solutions[t.task_id][0][0],
                         code=solutions[t.task_id][0][1])
            for t in chosen
        ],
    )
    behavior.save(root / "behavior.json")

    (root / "filters.json").write_text(json.dumps({
        "filters": [{
            "filter_id": "unknown-tool",
            "kind": "rule",
            "description": "agent called an undocumented tool",
            "rule": [{"kind": "contains", "target": "observation",
                      "value": MISTAKE_OBS}],
        }]
    }, indent=1))
    config_path = root / "config.json"
    config_path.write_text(json.dumps({
        "run_dir": "run",
        "world": "world.json",
        "tasks": "tasks.json",
        "hints": "hints.json",
        "filters": "filters.json",
        "models": {
            "teacher": {"name": "teacher", "round_index": 0,
                        "backend_kind": "scripted",
                        "endpoint_or_script": "behavior.json"},
        },
    }, indent=1))

    cfg = CoachConfig.load(config_path)
    cfg.registry.new_initial("Narrow the data with data_filter first.",
                             [t.group for t in tasks])
    cfg.registry.save(root / "hints.json")

    if coach_cli(["round", "run", "--config", str(config_path), "--round", "1",
                  "--model", "teacher", "--rollouts", "1"]):
        raise SystemExit("round 1 failed")
    store = RunStore(root / "run")
    register_model_tag(store, 1, "student-r1")

    # hint-free round-2 rollouts, ready for the console's filter pass
    cfg = CoachConfig.load(config_path)
    runtime = cfg.build_runtime()
    hint_free = PromptProfile(hint_profile=None)
    for task in cfg.tasks:
        store.append(runtime.run_trajectory(
            task, cfg.model("teacher"), hint_free, seed=20_000,
            trajectory_id=f"r2-hf-{task.task_id}-0",
            params=CompletionParams(),
        ))
    return config_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dir", type=Path, required=True)
    parser.add_argument("--port", type=int, default=8900)
    parser.add_argument("--mistakes", type=int, default=2)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--serve", action="store_true",
                        help="serve the REST API after building the run")
    args = parser.parse_args(argv)

    config_path = build_run(args.dir, mistakes=args.mistakes, seed=args.seed)
    print(f"dev stack ready: {config_path}", flush=True)
    if args.serve:
        import uvicorn

        from agentcoach.ops.service import create_app

        app = create_app(CoachConfig.load(config_path))
        uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
