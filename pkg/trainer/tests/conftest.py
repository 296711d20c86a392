"""Shared fixtures: a toy hint-internalization dataset in the exported
JSONL + manifest format.

Each task's hint states a key-to-value mapping ("k3 maps gamma"); the action
must state the value. Teacher contexts carry the hint in a <guidelines>
block; with dropout p=1.0 the materialized student contexts are hint-free
every epoch, so matching the teacher requires internalizing the mapping."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from coachtrainer.data import drop_sections

KEYS = [f"k{i}" for i in range(8)]
VALUES = ["alpha", "bravo", "carol", "delta", "echo", "fox", "golf", "hotel"]
MAPPING = dict(zip(KEYS, VALUES))


def teacher_messages_for(key: str) -> list[dict]:
    hint = f"{key} maps {MAPPING[key]}"
    return [
        {
            "role": "user",
            "content": (
                f"<guidelines>\n{hint}\n</guidelines>\n"
                f"give the value of {key}"
            ),
        }
    ]


def toy_row(key: str, repeat: int, *, mode: str = "kl", seed: int = 7,
            corrective: bool = False, source_success: bool = True,
            include_teacher: bool = True) -> dict:
    teacher = teacher_messages_for(key)
    row = {
        "sample_id": f"toy-{key}-{repeat:03d}",
        "round_index": 1,
        "task_id": f"task-{key}",
        "state": f"s-{key}",
        "student_messages": drop_sections(teacher, [False]),
        "action_text": f"value is {MAPPING[key]}",
        "dropout": {"mask": [False], "seed": seed, "policy": "redraw-per-epoch"},
        "hint_ids": [] if corrective else ["init-0001"],
        "weight": 1.0,
        "source_success": source_success,
        "corrective": corrective,
        "mode": mode,
    }
    if include_teacher:
        row["teacher_messages"] = teacher
    return row


def write_dataset(root: Path, train_rows: list[dict], val_rows: list[dict],
                  *, mode: str = "kl", dropout_p: float = 1.0,
                  seed: int = 7) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "dataset_id": "toy-internalization",
        "mode": mode,
        "dropout_p": dropout_p,
        "dropout_policy": "redraw-per-epoch",
        "seed": seed,
        "counts": {"train": len(train_rows), "val": len(val_rows)},
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    for name, rows in (("train", train_rows), ("val", val_rows)):
        (root / f"{name}.jsonl").write_text(
            "".join(json.dumps(r) + "\n" for r in rows)
        )
    return root


@pytest.fixture
def toy_dataset_dir(tmp_path: Path) -> Path:
    train = [toy_row(k, r) for k in KEYS for r in range(12)]
    val = [toy_row(k, 99) for k in KEYS]
    return write_dataset(tmp_path / "toy", train, val)
