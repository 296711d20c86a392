"""Hint registry: binding rules, selection, supersession, persistence."""

import pytest

from agentcoach.hints import (
    HINT_SEPARATOR,
    HintError,
    HintRegistry,
    HintSection,
    parse_profile_text,
)
from agentcoach.model import StateRef, Task


def _task(group="flights"):
    return Task("t1", group, "tpl", "d", "a", "train", ("complete_task",))


class TestRegistry:
    def test_initial_hint_selection_in_insertion_order(self):
        reg = HintRegistry()
        a = reg.new_initial("first", ("flights",))
        reg.new_initial("coffee only", ("coffee",))
        b = reg.new_initial("second", ("flights", "coffee"))
        profile = reg.select_initial_hints(_task("flights"))
        assert profile.hint_ids == (a.hint_id, b.hint_id)
        assert profile.profile_id == "initial:flights"

    def test_render_uses_separator(self):
        reg = HintRegistry()
        reg.new_initial("one", ("g",))
        reg.new_initial("two", ("g",))
        rendered = reg.select_initial_hints(_task("g")).render(reg)
        assert rendered == "one" + HINT_SEPARATOR + "two"
        assert parse_profile_text(rendered) == ["one", "two"]

    def test_one_corrective_per_filter_per_round(self):
        reg = HintRegistry()
        reg.bind_corrective_hint("flt-a", "fix it", 2)
        with pytest.raises(HintError, match="already has a corrective hint"):
            reg.bind_corrective_hint("flt-a", "another", 2)

    def test_rebind_in_later_round_supersedes(self):
        reg = HintRegistry()
        old = reg.bind_corrective_hint("flt-a", "v1", 2)
        new = reg.bind_corrective_hint("flt-a", "v2", 3)
        assert reg.corrective_for_filter("flt-a", 2) == old
        assert reg.corrective_for_filter("flt-a", 3) == new
        assert reg.corrective_for_filter("flt-a", 9) == new

    def test_corrective_not_yet_introduced_raises(self):
        reg = HintRegistry()
        reg.bind_corrective_hint("flt-a", "v1", 3)
        with pytest.raises(HintError):
            reg.corrective_for_filter("flt-a", 2)

    def test_resolve_hint_uses_attribution(self):
        reg = HintRegistry()
        h = reg.bind_corrective_hint("flt-a", "fix", 2)
        state = StateRef("traj", 1)
        assert reg.resolve_hint(state, 2, {state: "flt-a"}) == h
        with pytest.raises(HintError, match="not in the flagged set"):
            reg.resolve_hint(StateRef("other", 1), 2, {state: "flt-a"})

    def test_validation(self):
        with pytest.raises(HintError, match="non-empty"):
            HintSection("h", "", "initial", 1, groups=("g",)).validate()
        with pytest.raises(HintError, match="group"):
            HintSection("h", "text", "initial", 1).validate()
        with pytest.raises(HintError, match="filter"):
            HintSection("h", "text", "corrective", 2).validate()

    def test_duplicate_id_rejected(self):
        reg = HintRegistry()
        h = reg.new_initial("x", ("g",))
        with pytest.raises(HintError, match="duplicate"):
            reg.add(h)

    def test_save_load_roundtrip(self, tmp_path):
        reg = HintRegistry()
        reg.new_initial("a", ("g",))
        reg.bind_corrective_hint("flt", "b", 2)
        path = tmp_path / "hints.json"
        reg.save(path)
        loaded = HintRegistry.load(path)
        assert [h.to_json() for h in loaded.all()] == [h.to_json() for h in reg.all()]
        # counter continues, no id collisions after reload
        loaded.new_initial("c", ("g",))
        assert len({h.hint_id for h in loaded.all()}) == 3

    def test_export_listing_contains_bindings(self):
        reg = HintRegistry()
        reg.new_initial("alpha", ("flights",))
        reg.bind_corrective_hint("flt", "beta", 2)
        listing = reg.export_listing()
        assert "groups: flights" in listing
        assert "filter: flt" in listing
        assert HINT_SEPARATOR in listing
