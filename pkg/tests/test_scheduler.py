import pytest
from hypothesis import given, strategies as st

from warpshare.errors import ConfigError
from warpshare.scheduler import (Policy, SchedulerUnit, WarpClass, WarpView, pick,
                                 warp_class)

O, U, N = WarpClass.OWNER, WarpClass.UNSHARED, WarpClass.NONOWNER


def _views(rows):
    """rows: iterable of (id, ready, cls)."""
    return [WarpView(i, r, c) for i, r, c in rows]


def test_owf_priority_example():
    unit = SchedulerUnit(Policy.OWF)
    assert pick(unit, _views([(5, True, O), (2, True, U), (0, True, N)])) == 5


def test_owf_all_unshared_is_oldest_first():
    unit = SchedulerUnit(Policy.OWF)
    assert pick(unit, _views([(7, True, U), (3, True, U), (9, False, U)])) == 3


def test_lrr_skips_not_ready():
    unit = SchedulerUnit(Policy.LRR, rr_cursor=0)
    assert pick(unit, _views([(0, True, U), (1, False, U), (2, True, U)])) == 2
    assert unit.rr_cursor == 2
    # wraps around
    assert pick(unit, _views([(0, True, U), (1, False, U), (2, True, U)])) == 0


def test_gto_falls_back_to_oldest():
    unit = SchedulerUnit(Policy.GTO, greedy_warp=3)
    assert pick(unit, _views([(1, True, U), (3, False, U), (4, True, U)])) == 1
    assert unit.greedy_warp == 1


def test_warp_class():
    assert warp_class(None, None, "A") is U
    assert warp_class("B", "A", "A") is O
    assert warp_class("B", "B", "A") is N
    assert warp_class("B", None, "A") is N


def test_policy_parse():
    assert Policy.parse("OWF") is Policy.OWF
    assert Policy.parse(Policy.GTO) is Policy.GTO
    with pytest.raises(ConfigError):
        Policy.parse("cawa")


def _reference_gto(views_seq):
    """Step-by-step replay of greedy-then-oldest."""
    greedy, out = None, []
    for views in views_seq:
        ready = sorted(v.dynamic_warp_id for v in views if v.ready)
        if greedy in ready:
            out.append(greedy)
        elif ready:
            greedy = ready[0]
            out.append(greedy)
        else:
            out.append(None)
    return out


view_sets = st.lists(
    st.tuples(st.booleans(), st.sampled_from(list(WarpClass))), min_size=0, max_size=8,
).map(lambda xs: [WarpView(i, r, c) for i, (r, c) in enumerate(xs)])
sequences = st.integers(1, 8).flatmap(lambda n: st.lists(
    st.lists(st.tuples(st.booleans(), st.sampled_from(list(WarpClass))),
             min_size=n, max_size=n).map(lambda xs: [WarpView(i, r, c) for i, (r, c) in
                                                     enumerate(xs)]),
    min_size=1, max_size=30))


@given(view_sets)
def test_owf_never_prefers_non_owner(views):
    choice = pick(SchedulerUnit(Policy.OWF), views)
    by_id = {v.dynamic_warp_id: v for v in views}
    if choice is None:
        return
    best = min(v.cls for v in views if v.ready)
    assert by_id[choice].cls is best
    if by_id[choice].cls is N:
        assert not any(v.ready and v.cls is not N for v in views)


@given(st.sampled_from(list(Policy)), view_sets)
def test_none_iff_nothing_ready(policy, views):
    choice = pick(SchedulerUnit(policy), views)
    assert (choice is None) == (not any(v.ready for v in views))
    if choice is not None:
        assert next(v for v in views if v.dynamic_warp_id == choice).ready


@given(sequences, st.integers(0, 7))
def test_lrr_starvation_free(seq, target):
    n = len(seq[0])
    target %= n
    unit = SchedulerUnit(Policy.LRR)
    waited = 0
    for views in seq:
        views = [WarpView(v.dynamic_warp_id, v.ready or v.dynamic_warp_id == target, v.cls)
                 for v in views]
        if pick(unit, views) == target:
            waited = 0
        else:
            waited += 1
            assert waited < n


@given(sequences)
def test_gto_matches_reference_replay(seq):
    unit = SchedulerUnit(Policy.GTO)
    assert [pick(unit, v) for v in seq] == _reference_gto(seq)


@given(sequences)
def test_gto_sticks_while_ready(seq):
    unit = SchedulerUnit(Policy.GTO)
    prev = None
    for views in seq:
        choice = pick(unit, views)
        if prev is not None and any(v.ready and v.dynamic_warp_id == prev for v in views):
            assert choice == prev
        prev = choice


@given(st.sampled_from(list(Policy)), sequences)
def test_deterministic(policy, seq):
    a, b = SchedulerUnit(policy), SchedulerUnit(policy)
    assert [pick(a, v) for v in seq] == [pick(b, v) for v in seq]


def test_pick_sorts_views():
    unit = SchedulerUnit(Policy.LRR)
    assert pick(unit, _views([(4, True, U), (1, True, U)])) == 1
