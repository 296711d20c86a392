"""Registry of hint sections and the binding logic that maps tasks (initial
hints, per group) and flagged states (corrective hints, per filter) to the
guidance text a teacher prompt gets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .model import StateRef, Task, now

HINT_SEPARATOR = "\n-------\n"


class HintError(ValueError):
    pass


@dataclass(frozen=True)
class HintSection:
    hint_id: str
    text: str
    kind: str  # initial | corrective
    round_introduced: int
    groups: tuple[str, ...] = ()       # initial binding
    filter_id: Optional[str] = None    # corrective binding
    author: str = "coach"
    created_at: float = 0.0

    def validate(self) -> None:
        if not self.text:
            raise HintError(f"hint {self.hint_id}: text must be non-empty")
        if self.kind == "initial" and not self.groups:
            raise HintError(f"hint {self.hint_id}: initial hint needs >= 1 group")
        if self.kind == "corrective" and not self.filter_id:
            raise HintError(f"hint {self.hint_id}: corrective hint needs a filter")
        if self.kind not in ("initial", "corrective"):
            raise HintError(f"hint {self.hint_id}: unknown kind {self.kind!r}")

    def to_json(self) -> dict:
        return {
            "hint_id": self.hint_id,
            "text": self.text,
            "kind": self.kind,
            "round_introduced": self.round_introduced,
            "groups": list(self.groups),
            "filter_id": self.filter_id,
            "author": self.author,
            "created_at": self.created_at,
        }

    @classmethod
    def from_json(cls, d: dict) -> "HintSection":
        return cls(
            hint_id=d["hint_id"],
            text=d["text"],
            kind=d["kind"],
            round_introduced=d["round_introduced"],
            groups=tuple(d.get("groups", [])),
            filter_id=d.get("filter_id"),
            author=d.get("author", "coach"),
            created_at=d.get("created_at", 0.0),
        )


@dataclass(frozen=True)
class HintProfile:
    profile_id: str
    hint_ids: tuple[str, ...]

    def render(self, registry: "HintRegistry") -> str:
        sections = [registry.get(h).text for h in self.hint_ids]
        return HINT_SEPARATOR.join(sections)


def parse_profile_text(rendered: str) -> list[str]:
    """Recover section texts from a rendered guidelines block."""
    return rendered.split(HINT_SEPARATOR) if rendered else []


class HintRegistry:
    """Insertion-ordered; hints are immutable once registered."""

    def __init__(self) -> None:
        self._hints: dict[str, HintSection] = {}
        self._counter = 0

    def add(self, hint: HintSection) -> HintSection:
        hint.validate()
        if hint.hint_id in self._hints:
            raise HintError(f"duplicate hint id {hint.hint_id}")
        if hint.kind == "corrective":
            for other in self._hints.values():
                if (
                    other.kind == "corrective"
                    and other.filter_id == hint.filter_id
                    and other.round_introduced == hint.round_introduced
                ):
                    raise HintError(
                        f"filter {hint.filter_id!r} already has a corrective hint "
                        f"in round {hint.round_introduced}"
                    )
        self._hints[hint.hint_id] = hint
        return hint

    def new_initial(self, text: str, groups: tuple[str, ...], round_introduced: int = 1,
                    author: str = "coach") -> HintSection:
        return self.add(
            HintSection(
                hint_id=self._next_id("init"),
                text=text,
                kind="initial",
                round_introduced=round_introduced,
                groups=groups,
                author=author,
                created_at=now(),
            )
        )

    def bind_corrective_hint(self, filter_id: str, text: str, round_index: int,
                             author: str = "coach") -> HintSection:
        return self.add(
            HintSection(
                hint_id=self._next_id("corr"),
                text=text,
                kind="corrective",
                round_introduced=round_index,
                filter_id=filter_id,
                author=author,
                created_at=now(),
            )
        )

    def _next_id(self, prefix: str) -> str:
        self._counter += 1
        return f"{prefix}-{self._counter:04d}"

    def get(self, hint_id: str) -> HintSection:
        if hint_id not in self._hints:
            raise HintError(f"unknown hint id {hint_id}")
        return self._hints[hint_id]

    def all(self) -> list[HintSection]:
        return list(self._hints.values())

    def select_initial_hints(self, task: Task) -> HintProfile:
        """All initial hints bound to the task's group, in insertion order."""
        ids = tuple(
            h.hint_id for h in self._hints.values()
            if h.kind == "initial" and task.group in h.groups
        )
        return HintProfile(profile_id=f"initial:{task.group}", hint_ids=ids)

    def corrective_for_filter(self, filter_id: str, round_index: int) -> HintSection:
        """Latest-round corrective hint for a filter, at or before round_index."""
        best: Optional[HintSection] = None
        for h in self._hints.values():
            if h.kind != "corrective" or h.filter_id != filter_id:
                continue
            if h.round_introduced <= round_index and (
                best is None or h.round_introduced > best.round_introduced
            ):
                best = h
        if best is None:
            raise HintError(f"no corrective hint bound to filter {filter_id!r}")
        return best

    def resolve_hint(
        self,
        state: StateRef,
        round_index: int,
        attribution: dict[StateRef, str],
    ) -> HintSection:
        """h_i(s): the hint of the filter attributed to the flagged state."""
        if state not in attribution:
            raise HintError(f"state {state} is not in the flagged set")
        return self.corrective_for_filter(attribution[state], round_index)

    # -- persistence ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(
                {"counter": self._counter,
                 "hints": [h.to_json() for h in self._hints.values()]},
                indent=1,
            )
        )

    @classmethod
    def load(cls, path: str | Path) -> "HintRegistry":
        d = json.loads(Path(path).read_text())
        reg = cls()
        for h in d["hints"]:
            reg._hints[h["hint_id"]] = HintSection.from_json(h)
        reg._counter = d.get("counter", len(reg._hints))
        return reg

    def export_listing(self) -> str:
        """Human-review text export: one section per hint with separators."""
        blocks = []
        for h in self._hints.values():
            binding = (
                f"groups: {', '.join(h.groups)}" if h.kind == "initial"
                else f"filter: {h.filter_id}"
            )
            blocks.append(f"[{h.hint_id} | {h.kind} | round {h.round_introduced} | "
                          f"{binding}]\n{h.text}")
        return HINT_SEPARATOR.join(blocks)
