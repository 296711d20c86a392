"""Command-line entry point.

Subcommands: `world gen`, `tasks gen`, `scripted gen`, `agent run`,
`round run`, `review run`, `dataset build`, `eval run`, `serve`.
Every subcommand accepts --seed, --config, and --run-dir; --json switches
output to one machine-readable JSON document on stdout. Errors exit with
status 1 and a single `error: ...` line on stderr; a round blocked on the
trainer handoff exits with status 3.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..distill import harvest_round1, split_and_export
from ..evalbench import TrialResult, summarize
from ..gateway import CompletionParams
from ..review import run_filters
from ..runtime import PromptProfile
from ..scripted import behavior_from_solutions
from ..world import (
    DEFAULT_TEMPLATES,
    World,
    generate_world,
    instantiate_tasks_with_solutions,
)
from .config import CoachConfig, ConfigError, load_tasks, save_tasks
from .rounds import (
    AwaitingTrainerError,
    RoundPlan,
    awaiting_model_tag,
    run_round,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_AWAITING_TRAINER = 3


def _emit(args, payload: dict, human: str = "") -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human or json.dumps(payload, indent=1, sort_keys=True))


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--run-dir", type=Path, default=None)
    p.add_argument("--json", action="store_true")


def _load_config(args) -> CoachConfig:
    if args.config is None:
        raise ConfigError("this subcommand requires --config")
    cfg = CoachConfig.load(args.config)
    if args.run_dir is not None:
        cfg.run_dir = args.run_dir
    return cfg


def _cmd_world_gen(args) -> int:
    world = generate_world(args.seed)
    world.save(args.out)
    _emit(args, {"out": str(args.out), "seed": args.seed},
          f"world written to {args.out}")
    return EXIT_OK


def _cmd_tasks_gen(args) -> int:
    world = World.load(args.world)
    tasks, solutions = instantiate_tasks_with_solutions(
        DEFAULT_TEMPLATES, world, args.n_per_template, seed=args.seed
    )
    save_tasks(tasks, args.out)
    if args.solutions_out:
        Path(args.solutions_out).write_text(
            json.dumps({k: v for k, v in sorted(solutions.items())}, indent=1)
        )
    _emit(args, {"tasks": len(tasks), "out": str(args.out)},
          f"{len(tasks)} tasks written to {args.out}")
    return EXIT_OK


def _cmd_scripted_gen(args) -> int:
    tasks = load_tasks(args.tasks)
    solutions = {
        k: [tuple(c) for c in v]
        for k, v in json.loads(Path(args.solutions).read_text()).items()
    }
    behavior = behavior_from_solutions(tasks, solutions)
    behavior.save(args.out)
    _emit(args, {"rules": len(behavior.rules), "out": str(args.out)},
          f"{len(behavior.rules)} rules written to {args.out}")
    return EXIT_OK


def _profile_for(cfg: CoachConfig, runtime, task, kind: str) -> PromptProfile:
    if kind == "hints":
        return PromptProfile(hint_profile=runtime.registry.select_initial_hints(task))
    return PromptProfile(hint_profile=None)


def _cmd_agent_run(args) -> int:
    cfg = _load_config(args)
    runtime = cfg.build_runtime()
    store = cfg.build_store()
    task = next((t for t in cfg.tasks if t.task_id == args.task_id), None)
    if task is None:
        raise ConfigError(f"unknown task id {args.task_id!r}")
    model = cfg.model(args.model)
    profile = _profile_for(cfg, runtime, task, args.profile)
    trajectory = runtime.run_trajectory(
        task, model, profile, args.seed, f"cli-{task.task_id}-{args.seed}"
    )
    store.append(trajectory)
    _emit(args, trajectory.to_json(),
          f"{trajectory.trajectory_id}: {trajectory.outcome.kind} "
          f"success={trajectory.success}")
    return EXIT_OK


def _cmd_round_run(args) -> int:
    cfg = _load_config(args)
    runtime = cfg.build_runtime()
    store = cfg.build_store()
    model = cfg.model(args.model)
    judge = cfg.model(cfg.judge_model) if (args.round >= 2 and cfg.judge_model) else None
    plan = RoundPlan(
        round_index=args.round,
        model_tag_in=model,
        rollouts_per_task=args.rollouts,
        m_per_state=args.m,
        mode=args.mode,
        seed=args.seed,
        filters=tuple(cfg.filters) if args.round >= 2 else (),
        judge_model=judge,
    )
    try:
        result = run_round(plan, cfg.tasks, runtime, store)
    except AwaitingTrainerError as e:
        print(f"awaiting model_tag_out: {e}", file=sys.stderr)
        return EXIT_AWAITING_TRAINER
    cfg.save_hints()
    _emit(args, result.manifest.to_json(),
          f"round {args.round}: {result.manifest.counts}")
    if awaiting_model_tag(store, args.round) and args.wait_trainer:
        print("awaiting model_tag_out", file=sys.stderr)
        return EXIT_AWAITING_TRAINER
    return EXIT_OK


def _cmd_review_run(args) -> int:
    cfg = _load_config(args)
    runtime = cfg.build_runtime()
    store = cfg.build_store()
    tasks_by_id = {t.task_id: t for t in cfg.tasks}
    prefix = f"r{args.round}-hf-"
    trajectories = [
        t for t in store.trajectories() if t.trajectory_id.startswith(prefix)
    ]
    judge = cfg.model(cfg.judge_model) if cfg.judge_model else None
    findings = run_filters(
        cfg.filters, trajectories, tasks_by_id, args.round,
        gateway=runtime.gateway, judge_model=judge,
    )
    for f in findings:
        store.append(f)
    _emit(args, {"findings": [f.to_json() for f in findings]},
          f"{len(findings)} finding(s) over {len(trajectories)} trajectories")
    return EXIT_OK


def _cmd_dataset_build(args) -> int:
    cfg = _load_config(args)
    runtime = cfg.build_runtime()
    store = cfg.build_store()
    tasks_by_id = {t.task_id: t for t in cfg.tasks}
    prefix = f"r{args.round}-"
    trajectories = [
        t for t in store.trajectories()
        if t.trajectory_id.startswith(prefix) and t.task_id in tasks_by_id
    ]
    if not trajectories:
        raise ConfigError(f"no stored trajectories for round {args.round}")
    model = cfg.model(args.model)
    profile = PromptProfile(
        hint_profile=runtime.registry.select_initial_hints(cfg.tasks[0])
    )
    samples = harvest_round1(
        trajectories, tasks_by_id, runtime, profile, model, round_index=args.round
    )
    dataset_id = f"round-{args.round}-{args.mode}"
    manifest = split_and_export(
        samples, args.val_fraction, args.mode, dataset_id,
        store.dataset_dir(dataset_id), tasks_by_id, seed=args.seed,
    )
    _emit(args, manifest.to_json(), f"dataset {dataset_id}: {manifest.split_sizes}")
    return EXIT_OK


def _cmd_eval_run(args) -> int:
    cfg = _load_config(args)
    runtime = cfg.build_runtime()
    model = cfg.model(args.model)
    tasks = [t for t in cfg.tasks if t.split == args.split]
    if not tasks:
        raise ConfigError(f"no tasks in split {args.split!r}")
    seeds = [args.seed + k for k in range(args.trials)]
    reports = {}
    for label in args.compare or [args.profile]:
        profiles = {
            t.task_id: _profile_for(cfg, runtime, t, label) for t in tasks
        }
        trials = []
        for trial, seed in enumerate(seeds):
            successes, usage, aborted = {}, {}, {}
            for task in tasks:
                tid = f"eval-{label}-t{trial}-{task.task_id}"
                trajectory = runtime.run_trajectory(
                    task, model, profiles[task.task_id], seed, tid,
                    CompletionParams(),
                )
                successes[task.task_id] = bool(trajectory.success)
                usage[task.task_id] = runtime.gateway.ledger.trajectory_totals(tid)
                aborted[task.task_id] = trajectory.outcome.kind == "aborted"
            trials.append(TrialResult(model.name, label, seed, successes, usage, aborted))
        report = summarize(trials, tasks, config_echo={"profile": label,
                                                       "trials": args.trials})
        reports[label] = report
    if args.json:
        print(json.dumps({k: r.to_json() for k, r in reports.items()}, sort_keys=True))
    else:
        for label, report in reports.items():
            print(f"[{label}]")
            print(report.to_markdown())
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = _load_config(args)
    app = create_app(cfg)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentcoach")
    top = parser.add_subparsers(dest="domain", required=True)

    world = top.add_parser("world").add_subparsers(dest="verb", required=True)
    p = world.add_parser("gen")
    _common(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_world_gen)

    tasks = top.add_parser("tasks").add_subparsers(dest="verb", required=True)
    p = tasks.add_parser("gen")
    _common(p)
    p.add_argument("--world", type=Path, required=True)
    p.add_argument("--n-per-template", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--solutions-out", type=Path, default=None)
    p.set_defaults(func=_cmd_tasks_gen)

    scripted = top.add_parser("scripted").add_subparsers(dest="verb", required=True)
    p = scripted.add_parser("gen")
    _common(p)
    p.add_argument("--tasks", type=Path, required=True)
    p.add_argument("--solutions", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_scripted_gen)

    agent = top.add_parser("agent").add_subparsers(dest="verb", required=True)
    p = agent.add_parser("run")
    _common(p)
    p.add_argument("--task-id", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--profile", choices=("none", "hints"), default="hints")
    p.set_defaults(func=_cmd_agent_run)

    rnd = top.add_parser("round").add_subparsers(dest="verb", required=True)
    p = rnd.add_parser("run")
    _common(p)
    p.add_argument("--round", type=int, required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--rollouts", type=int, default=3)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--mode", choices=("kl", "cross-entropy"), default="kl")
    p.add_argument("--wait-trainer", action="store_true")
    p.set_defaults(func=_cmd_round_run)

    review = top.add_parser("review").add_subparsers(dest="verb", required=True)
    p = review.add_parser("run")
    _common(p)
    p.add_argument("--round", type=int, required=True)
    p.set_defaults(func=_cmd_review_run)

    dataset = top.add_parser("dataset").add_subparsers(dest="verb", required=True)
    p = dataset.add_parser("build")
    _common(p)
    p.add_argument("--round", type=int, required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=("kl", "cross-entropy"), default="kl")
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.set_defaults(func=_cmd_dataset_build)

    ev = top.add_parser("eval").add_subparsers(dest="verb", required=True)
    p = ev.add_parser("run")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--split", default="test")
    p.add_argument("--profile", choices=("none", "hints"), default="none")
    p.add_argument("--compare", nargs="*", default=None)
    p.set_defaults(func=_cmd_eval_run)

    p = top.add_parser("serve")
    _common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AwaitingTrainerError as e:
        print(f"awaiting model_tag_out: {e}", file=sys.stderr)
        return EXIT_AWAITING_TRAINER
    except (ConfigError, ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
