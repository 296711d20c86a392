"""Dataset loading, validation, per-epoch dropout, and tokenization."""

from __future__ import annotations

import json

import pytest

import coachtrainer.data as data
from coachtrainer.data import (
    DatasetError,
    Tokenizer,
    check_action_alignment,
    dropout_mask_for,
    load_dataset,
    render_ids,
    student_context_for_epoch,
)
from conftest import KEYS, MAPPING, toy_row, write_dataset


def test_load_toy_dataset(toy_dataset_dir):
    ds = load_dataset(toy_dataset_dir)
    assert ds.mode == "kl"
    assert len(ds.train) == 8 * 12
    assert len(ds.val) == 8
    sample = ds.train[0]
    assert sample.teacher_messages is not None
    assert "<guidelines>" in sample.teacher_messages[0]["content"]
    assert "<guidelines>" not in sample.student_messages[0]["content"]


def test_missing_manifest_rejected(tmp_path):
    with pytest.raises(DatasetError, match="manifest"):
        load_dataset(tmp_path)


def test_kl_mode_requires_teacher_messages(tmp_path):
    rows = [toy_row("k0", 0, include_teacher=False)]
    root = write_dataset(tmp_path / "d", rows, [])
    with pytest.raises(DatasetError, match="toy-k0-000"):
        load_dataset(root)


def test_cross_entropy_refuses_failure_sourced_sample(tmp_path):
    rows = [
        toy_row("k0", 0, mode="cross-entropy"),
        toy_row("k1", 0, mode="cross-entropy", source_success=False),
    ]
    root = write_dataset(tmp_path / "d", rows, [], mode="cross-entropy")
    with pytest.raises(DatasetError, match="toy-k1-000"):
        load_dataset(root)


def test_context_ending_in_assistant_message_rejected(tmp_path):
    row = toy_row("k0", 0)
    row["teacher_messages"] = row["teacher_messages"] + [
        {"role": "assistant", "content": "partial"}
    ]
    root = write_dataset(tmp_path / "d", [row], [])
    with pytest.raises(DatasetError, match="assistant"):
        load_dataset(root)


def test_epoch_masks_differ_across_epochs():
    ids = [f"s-{i}" for i in range(50)]
    e0 = [dropout_mask_for(s, 0.5, 7, 4, epoch=0) for s in ids]
    e1 = [dropout_mask_for(s, 0.5, 7, 4, epoch=1) for s in ids]
    assert e0 != e1
    # same epoch is a pure function of (seed, epoch, sample_id)
    assert e0 == [dropout_mask_for(s, 0.5, 7, 4, epoch=0) for s in ids]


def test_p_zero_reproduces_identical_contexts_across_epochs(tmp_path):
    rows = [toy_row(k, 0) for k in KEYS]
    root = write_dataset(tmp_path / "d", rows, [], dropout_p=0.0)
    ds = load_dataset(root)
    for sample in ds.train:
        contexts = [student_context_for_epoch(sample, e) for e in range(4)]
        assert all(c == contexts[0] for c in contexts)
        # with p=0 every section is kept: the hint is present every epoch
        assert "<guidelines>" in contexts[0][0]["content"]


def test_p_one_hides_hint_every_epoch(toy_dataset_dir):
    ds = load_dataset(toy_dataset_dir)
    for sample in ds.train[:10]:
        for epoch in range(4):
            content = student_context_for_epoch(sample, epoch)[0]["content"]
            assert "<guidelines>" not in content
            assert "maps" not in content


def test_corrective_sample_context_is_fixed(tmp_path):
    row = toy_row("k0", 0, corrective=True)
    root = write_dataset(tmp_path / "d", [row], [], dropout_p=0.5)
    ds = load_dataset(root)
    sample = ds.train[0]
    for epoch in range(4):
        assert student_context_for_epoch(sample, epoch) == sample.student_messages


def test_tokenizer_roundtrip_and_specials(toy_dataset_dir):
    ds = load_dataset(toy_dataset_dir)
    tok = Tokenizer.from_dataset(ds)
    assert tok.itos[:5] == ["<pad>", "<unk>", "<sep>", "<act>", "<eos>"]
    for value in MAPPING.values():
        assert value in tok.stoi
    assert tok.encode("zzz-unseen") == [tok.stoi["<unk>"]] * 3  # zzz, -, unseen


def test_render_ids_marks_action_start(toy_dataset_dir):
    ds = load_dataset(toy_dataset_dir)
    tok = Tokenizer.from_dataset(ds)
    sample = ds.train[0]
    ids, start = render_ids(tok, sample.teacher_messages, sample.action_text)
    assert ids[start - 1] == tok.stoi["<act>"]
    assert ids[-1] == tok.stoi["<eos>"]
    assert ids[start:-1] == tok.encode(sample.action_text)


def test_action_alignment_holds_on_toy_dataset(toy_dataset_dir):
    ds = load_dataset(toy_dataset_dir)
    tok = Tokenizer.from_dataset(ds)
    for sample in ds.train:
        check_action_alignment(tok, sample, sample.student_messages)


def test_action_alignment_mismatch_names_sample(toy_dataset_dir, monkeypatch):
    """Simulate a tokenizer that merges across the context/action boundary."""
    ds = load_dataset(toy_dataset_dir)
    tok = Tokenizer.from_dataset(ds)
    sample = ds.train[0]
    real = data.render_ids

    def merging(tokenizer, messages, action_text):
        ids, start = real(tokenizer, messages, action_text)
        if "<guidelines>" in messages[0]["content"]:
            return ids[:start] + ids[start + 1:], start  # drop one action token
        return ids, start

    monkeypatch.setattr(data, "render_ids", merging)
    with pytest.raises(DatasetError, match=sample.sample_id):
        check_action_alignment(tok, sample, sample.student_messages)


def test_dropout_rate_is_approximately_p():
    draws = [
        dropout_mask_for(f"s-{i}", 0.9, 3, 1, epoch=0)[0] for i in range(5000)
    ]
    kept = sum(draws) / len(draws)
    assert abs(kept - 0.1) < 0.02
