"""Dataset loading against the exported JSONL + manifest contract.

The trainer consumes only the exporter's on-disk format: `train.jsonl`,
`val.jsonl`, and `manifest.json` in one dataset directory. Teacher contexts
are present in KL mode only; student contexts for non-corrective samples are
re-materialized per epoch from the documented dropout seed stream
sha256("{seed}:{epoch}:{sample_id}").
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

HINT_SEPARATOR = "\n-------\n"
_GUIDELINES_RE = re.compile(r"<guidelines>\n(.*?)\n</guidelines>", re.DOTALL)

PAD, UNK, SEP, ACT, EOS = "<pad>", "<unk>", "<sep>", "<act>", "<eos>"
_WORD_RE = re.compile(r"\w+|[^\w\s]")


class DatasetError(ValueError):
    pass


@dataclass
class Sample:
    sample_id: str
    task_id: str
    student_messages: list[dict]
    action_text: str
    dropout_mask: list[bool]
    dropout_seed: int
    dropout_p: float
    hint_ids: list[str]
    corrective: bool
    source_success: Optional[bool]
    weight: float = 1.0
    teacher_messages: Optional[list[dict]] = None


@dataclass
class Dataset:
    manifest: dict
    train: list[Sample]
    val: list[Sample]

    @property
    def mode(self) -> str:
        return self.manifest["mode"]


def _parse_sample(d: dict, dropout_p: float) -> Sample:
    return Sample(
        sample_id=d["sample_id"],
        task_id=d["task_id"],
        student_messages=d["student_messages"],
        action_text=d["action_text"],
        dropout_mask=d["dropout"]["mask"],
        dropout_seed=d["dropout"]["seed"],
        dropout_p=dropout_p,
        hint_ids=d["hint_ids"],
        corrective=d["corrective"],
        source_success=d.get("source_success"),
        weight=d.get("weight", 1.0),
        teacher_messages=d.get("teacher_messages"),
    )


def load_dataset(dataset_dir: str | Path) -> Dataset:
    root = Path(dataset_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"no manifest.json under {root}")
    manifest = json.loads(manifest_path.read_text())
    splits: dict[str, list[Sample]] = {}
    for name in ("train", "val"):
        samples = []
        path = root / f"{name}.jsonl"
        if path.exists():
            for line in path.read_text().splitlines():
                if line.strip():
                    samples.append(
                        _parse_sample(json.loads(line), manifest["dropout_p"])
                    )
        splits[name] = samples
    ds = Dataset(manifest=manifest, train=splits["train"], val=splits["val"])
    _validate(ds)
    return ds


def _validate(ds: Dataset) -> None:
    for s in ds.train + ds.val:
        if ds.mode == "kl" and s.teacher_messages is None:
            raise DatasetError(f"KL mode requires teacher_messages; {s.sample_id} has none")
        if ds.mode == "cross-entropy" and s.source_success is not True:
            raise DatasetError(
                f"cross-entropy training requires success-sourced samples; "
                f"{s.sample_id} has source_success={s.source_success}"
            )
        context = s.teacher_messages if s.teacher_messages else s.student_messages
        if context and context[-1]["role"] == "assistant":
            raise DatasetError(
                f"{s.sample_id}: context ends in an assistant message; the "
                f"action does not start at a message boundary"
            )


# -- per-epoch dropout materialization ----------------------------------------


def dropout_mask_for(sample_id: str, p: float, seed: int, n_sections: int,
                     epoch: int) -> list[bool]:
    """The exporter's documented seed stream, re-drawn per epoch."""
    digest = hashlib.sha256(f"{seed}:{epoch}:{sample_id}".encode()).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    return [rng.random() >= p for _ in range(n_sections)]


def drop_sections(messages: list[dict], mask: list[bool]) -> list[dict]:
    first = messages[0]
    m = _GUIDELINES_RE.search(first["content"])
    if m is None:
        if any(not kept for kept in mask):
            raise DatasetError("no guidelines block to drop sections from")
        return [dict(msg) for msg in messages]
    sections = m.group(1).split(HINT_SEPARATOR)
    if len(sections) != len(mask):
        raise DatasetError(f"mask length {len(mask)} != section count {len(sections)}")
    before, after = first["content"][: m.start()], first["content"][m.end():]
    kept = [s for s, keep in zip(sections, mask) if keep]
    if kept:
        content = (
            before + "<guidelines>\n" + HINT_SEPARATOR.join(kept)
            + "\n</guidelines>" + after
        )
    else:
        content = before.rstrip("\n") + ("\n\n" + after.lstrip("\n") if after.strip() else "")
        if not before.strip():
            content = after.lstrip("\n")
    return [{"role": first["role"], "content": content}] + [dict(m) for m in messages[1:]]


def student_context_for_epoch(sample: Sample, epoch: int) -> list[dict]:
    """Corrective samples are fixed (the hint is always hidden); initial-hint
    samples re-draw the section mask for this epoch from teacher_messages."""
    if sample.corrective or not sample.hint_ids:
        return sample.student_messages
    if sample.teacher_messages is None:
        return sample.student_messages  # CE export: epoch-0 materialization only
    mask = dropout_mask_for(
        sample.sample_id, sample.dropout_p, sample.dropout_seed,
        len(sample.hint_ids), epoch,
    )
    return drop_sections(sample.teacher_messages, mask)


# -- tokenizer -----------------------------------------------------------------


class Tokenizer:
    """Word-level tokenizer with a vocabulary built from the dataset."""

    def __init__(self, vocab: list[str]):
        self.itos = [PAD, UNK, SEP, ACT, EOS] + [
            t for t in vocab if t not in (PAD, UNK, SEP, ACT, EOS)
        ]
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    @classmethod
    def from_dataset(cls, ds: Dataset) -> "Tokenizer":
        seen: dict[str, None] = {}
        for s in ds.train + ds.val:
            for msgs in (s.teacher_messages or [], s.student_messages):
                for m in msgs:
                    for tok in _WORD_RE.findall(m["content"]):
                        seen.setdefault(tok)
            for tok in _WORD_RE.findall(s.action_text):
                seen.setdefault(tok)
        return cls(sorted(seen))

    def encode(self, text: str) -> list[int]:
        unk = self.stoi[UNK]
        return [self.stoi.get(t, unk) for t in _WORD_RE.findall(text)]

    def encode_messages(self, messages: list[dict]) -> list[int]:
        sep = self.stoi[SEP]
        ids: list[int] = []
        for m in messages:
            ids.extend(self.encode(m["content"]))
            ids.append(sep)
        return ids


def render_ids(tokenizer: Tokenizer, messages: list[dict],
               action_text: str) -> tuple[list[int], int]:
    """Token ids for context + <act> + action + <eos>, and the index of the
    first action token. Supervised positions are the action span."""
    context = tokenizer.encode_messages(messages) + [tokenizer.stoi[ACT]]
    action = tokenizer.encode(action_text) + [tokenizer.stoi[EOS]]
    return context + action, len(context)


def check_action_alignment(tokenizer: Tokenizer, sample: Sample,
                           student_messages: list[dict]) -> None:
    """Hard failure (naming the sample) if the teacher and student views
    tokenize the action differently."""
    if sample.teacher_messages is None:
        return
    t_ids, t_start = render_ids(tokenizer, sample.teacher_messages, sample.action_text)
    s_ids, s_start = render_ids(tokenizer, student_messages, sample.action_text)
    if t_ids[t_start:] != s_ids[s_start:]:
        raise DatasetError(
            f"{sample.sample_id}: action tokens differ between teacher and "
            f"student contexts"
        )
