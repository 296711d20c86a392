"""Command-line entry point for the trainer.

    coach-trainer train --dataset DIR --mode kl --epochs 2 --out DIR
    coach-trainer register --service URL --round 1 --name TAG
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch

from .data import DatasetError, Tokenizer, load_dataset
from .model import ModelConfig, TinyLM
from .registry import RegistryError, register_model_tag
from .train import AdapterSpec, TrainPlan, merge_and_finish, train


def _cmd_train(args: argparse.Namespace) -> int:
    try:
        ds = load_dataset(args.dataset)
    except DatasetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    tokenizer = Tokenizer.from_dataset(ds)
    cfg = ModelConfig(vocab_size=len(tokenizer), max_len=args.max_len)
    teacher = TinyLM(cfg)
    if args.teacher_weights:
        teacher.load_state_dict(torch.load(args.teacher_weights, weights_only=True))
    plan = TrainPlan(
        dataset_dir=Path(args.dataset), mode=args.mode, epochs=args.epochs,
        lr=args.lr, warmup_steps=args.warmup_steps, batch_size=args.batch_size,
        seed=args.seed, adapter=AdapterSpec(rank=args.rank),
    )
    try:
        result = train(plan, ds, teacher, tokenizer)
    except DatasetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    merged = merge_and_finish(result)
    torch.save(merged.state_dict(), out / "model.pt")
    result.save_metrics(out / "metrics.json")
    print(json.dumps({
        "steps": result.steps,
        "final_train_loss": result.loss_per_step[-1] if result.loss_per_step else None,
        "val_loss_per_epoch": result.val_loss_per_epoch,
        "out": str(out),
    }, indent=1))
    return 0


def _cmd_register(args: argparse.Namespace) -> int:
    try:
        manifest = register_model_tag(
            args.service, args.round, args.name, author=args.author
        )
    except RegistryError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(manifest, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coach-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a LoRA student on an exported dataset")
    p.add_argument("--dataset", required=True, help="dataset directory (manifest + JSONL)")
    p.add_argument("--out", required=True, help="output directory for weights and metrics")
    p.add_argument("--mode", choices=("kl", "cross-entropy"), default="kl")
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--warmup-steps", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank", type=int, default=8)
    p.add_argument("--max-len", type=int, default=512)
    p.add_argument("--teacher-weights", help="optional teacher state_dict (.pt)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("register", help="register a trained model tag for a round")
    p.add_argument("--service", required=True, help="coaching service base URL")
    p.add_argument("--round", type=int, required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--author", default="coach-trainer")
    p.set_defaults(func=_cmd_register)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
