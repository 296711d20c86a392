"""Training loop: forward-KL context distillation or cross-entropy over
action tokens only, with per-epoch dropout materialization and a linear
warm-up schedule."""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import torch
from torch import nn

from .data import (
    Dataset,
    DatasetError,
    Sample,
    Tokenizer,
    check_action_alignment,
    render_ids,
    student_context_for_epoch,
)
from .model import ModelConfig, TinyLM, apply_lora, merge_lora


@dataclass
class AdapterSpec:
    rank: int = 8
    target: str = "all-linear"
    precision: str = "fp32"

    def validate(self) -> None:
        if self.rank <= 0:
            raise ValueError("adapter rank must be > 0")


@dataclass
class TrainPlan:
    dataset_dir: Path
    mode: str = "kl"  # kl | cross-entropy
    epochs: int = 2
    lr: float = 1e-5
    warmup_steps: int = 30
    batch_size: int = 8
    seed: int = 0
    adapter: AdapterSpec = field(default_factory=AdapterSpec)

    def validate(self, ds: Dataset) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.mode not in ("kl", "cross-entropy"):
            raise ValueError(f"unknown mode {self.mode!r}")
        self.adapter.validate()
        if self.mode == "kl":
            for s in ds.train + ds.val:
                if s.teacher_messages is None:
                    raise DatasetError(
                        f"KL mode requires teacher_messages in every sample; "
                        f"{s.sample_id} has none"
                    )
        if self.mode == "cross-entropy":
            for s in ds.train + ds.val:
                if s.source_success is not True:
                    raise DatasetError(
                        f"cross-entropy training requires success-sourced "
                        f"samples; {s.sample_id} has "
                        f"source_success={s.source_success}"
                    )


@dataclass
class TrainResult:
    student: nn.Module
    teacher: nn.Module
    tokenizer: Tokenizer
    loss_per_step: list[float]
    val_loss_per_epoch: list[float]
    steps: int

    def metrics_json(self) -> dict:
        return {
            "steps": self.steps,
            "loss_per_step": self.loss_per_step,
            "val_loss_per_epoch": self.val_loss_per_epoch,
        }

    def save_metrics(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.metrics_json(), indent=1))


def _pad_batch(rows: list[tuple[list[int], int]], pad_id: int,
               device) -> tuple[torch.Tensor, torch.Tensor]:
    """Returns (ids, supervised) where supervised marks target positions:
    supervised[b, t] is true when ids[b, t+1] is an action token (the loss
    reads logits at t against the target at t+1)."""
    width = max(len(ids) for ids, _ in rows)
    ids = torch.full((len(rows), width), pad_id, dtype=torch.long, device=device)
    supervised = torch.zeros((len(rows), width - 1), dtype=torch.bool, device=device)
    for b, (row, action_start) in enumerate(rows):
        ids[b, : len(row)] = torch.tensor(row, dtype=torch.long, device=device)
        supervised[b, action_start - 1: len(row) - 1] = True
    return ids, supervised


def kl_action_loss(teacher_logits: torch.Tensor, student_logits: torch.Tensor,
                   teacher_mask: torch.Tensor, student_mask: torch.Tensor) -> torch.Tensor:
    """Forward KL(teacher || student), averaged over supervised positions.

    Teacher and student sequences differ in context length; the masks select
    the same action tokens from each side (counts must agree)."""
    t_sel = teacher_logits[:, :-1][teacher_mask]
    s_sel = student_logits[:, :-1][student_mask]
    if t_sel.shape != s_sel.shape:
        raise DatasetError("teacher/student supervised position counts differ")
    t_logp = torch.log_softmax(t_sel, dim=-1)
    s_logp = torch.log_softmax(s_sel, dim=-1)
    return (t_logp.exp() * (t_logp - s_logp)).sum(-1).mean()


def ce_action_loss(logits: torch.Tensor, ids: torch.Tensor,
                   supervised: torch.Tensor) -> torch.Tensor:
    targets = ids[:, 1:][supervised]
    sel = logits[:, :-1][supervised]
    return nn.functional.cross_entropy(sel, targets)


def _lr_at(step: int, plan: TrainPlan) -> float:
    if plan.warmup_steps and step < plan.warmup_steps:
        return plan.lr * (step + 1) / plan.warmup_steps
    return plan.lr


def _batches(n: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(n, generator=generator).tolist()
    for i in range(0, n, batch_size):
        yield order[i: i + batch_size]


def _forward_rows(model, tokenizer, rows, device):
    ids, supervised = _pad_batch(rows, tokenizer.stoi["<pad>"], device)
    return model(ids), ids, supervised


def batch_loss(plan: TrainPlan, teacher: nn.Module, student: nn.Module,
               tokenizer: Tokenizer, samples: list[Sample], epoch: int,
               device="cpu") -> torch.Tensor:
    """One batch's loss; KL mode runs the frozen teacher on teacher contexts
    and the student on the epoch's materialized student contexts."""
    student_rows = []
    teacher_rows = []
    for s in samples:
        context = student_context_for_epoch(s, epoch)
        check_action_alignment(tokenizer, s, context)
        student_rows.append(render_ids(tokenizer, context, s.action_text))
        if plan.mode == "kl":
            teacher_rows.append(
                render_ids(tokenizer, s.teacher_messages, s.action_text)
            )
    s_logits, s_ids, s_mask = _forward_rows(student, tokenizer, student_rows, device)
    if plan.mode == "cross-entropy":
        return ce_action_loss(s_logits, s_ids, s_mask)
    with torch.no_grad():
        t_logits, _, t_mask = _forward_rows(teacher, tokenizer, teacher_rows, device)
    return kl_action_loss(t_logits, s_logits, t_mask, s_mask)


def train(plan: TrainPlan, ds: Dataset, teacher: nn.Module,
          tokenizer: Tokenizer, device: str = "cpu") -> TrainResult:
    """Adds a fresh LoRA adapter to a copy of the teacher weights and trains
    it; the teacher stays frozen throughout."""
    plan.validate(ds)
    torch.manual_seed(plan.seed)
    teacher = teacher.to(device).eval()
    for p in teacher.parameters():
        p.requires_grad_(False)

    student = TinyLM(teacher.cfg).to(device)
    student.load_state_dict(teacher.state_dict())
    adapter_params = apply_lora(student, plan.adapter.rank)
    optim = torch.optim.AdamW(adapter_params, lr=plan.lr)

    generator = torch.Generator().manual_seed(plan.seed)
    loss_per_step: list[float] = []
    val_loss_per_epoch: list[float] = []
    step = 0
    for epoch in range(plan.epochs):
        student.train()
        for idx in _batches(len(ds.train), plan.batch_size, generator):
            batch = [ds.train[i] for i in idx]
            lr = _lr_at(step, plan)
            for group in optim.param_groups:
                group["lr"] = lr
            loss = batch_loss(plan, teacher, student, tokenizer, batch, epoch,
                              device)
            optim.zero_grad()
            loss.backward()
            optim.step()
            loss_per_step.append(float(loss.item()))
            step += 1
        val_loss_per_epoch.append(
            evaluate_loss(plan, teacher, student, tokenizer, ds.val or ds.train,
                          epoch, device)
        )
    return TrainResult(
        student=student, teacher=teacher, tokenizer=tokenizer,
        loss_per_step=loss_per_step, val_loss_per_epoch=val_loss_per_epoch,
        steps=step,
    )


def evaluate_loss(plan: TrainPlan, teacher, student, tokenizer,
                  samples: list[Sample], epoch: int, device="cpu") -> float:
    student.eval()
    losses = []
    with torch.no_grad():
        for i in range(0, len(samples), plan.batch_size):
            batch = samples[i: i + plan.batch_size]
            losses.append(float(batch_loss(
                plan, teacher, student, tokenizer, batch, epoch, device
            ).item()))
    return statistics.mean(losses) if losses else 0.0


def merge_and_finish(result: TrainResult) -> nn.Module:
    """Merge the adapter into the student weights; the returned module is a
    plain TinyLM ready to register as the round's model_tag_out."""
    return merge_lora(result.student)


# -- argmax agreement / task accuracy probes ----------------------------------


def argmax_agreement(teacher: nn.Module, student: nn.Module,
                     tokenizer: Tokenizer, samples: list[Sample],
                     epoch: int = 0, device="cpu") -> float:
    """Fraction of supervised action positions where the hint-free student's
    argmax equals the hint-conditioned teacher's argmax."""
    agree = total = 0
    with torch.no_grad():
        for s in samples:
            t_row = render_ids(tokenizer, s.teacher_messages, s.action_text)
            s_row = render_ids(
                tokenizer, student_context_for_epoch(s, epoch), s.action_text
            )
            t_logits, _, t_mask = _forward_rows(teacher, tokenizer, [t_row], device)
            s_logits, _, s_mask = _forward_rows(student, tokenizer, [s_row], device)
            t_arg = t_logits[:, :-1][t_mask].argmax(-1)
            s_arg = s_logits[:, :-1][s_mask].argmax(-1)
            agree += int((t_arg == s_arg).sum().item())
            total += int(t_arg.numel())
    return agree / total if total else 0.0


def action_token_accuracy(model: nn.Module, tokenizer: Tokenizer,
                          samples: list[Sample], epoch: int = 0,
                          device="cpu") -> float:
    """Teacher-forced accuracy of the model's argmax against the true action
    tokens, over hint-free student contexts."""
    correct = total = 0
    with torch.no_grad():
        for s in samples:
            row = render_ids(
                tokenizer, student_context_for_epoch(s, epoch), s.action_text
            )
            logits, ids, mask = _forward_rows(model, tokenizer, [row], device)
            pred = logits[:, :-1][mask].argmax(-1)
            gold = ids[:, 1:][mask]
            correct += int((pred == gold).sum().item())
            total += int(gold.numel())
    return correct / total if total else 0.0
