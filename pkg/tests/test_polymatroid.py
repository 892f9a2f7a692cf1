from fractions import Fraction as F
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyclinch.polymatroid import (
    ContractViolation,
    EnumerationError,
    GroundSet,
    SubmodularOracle,
    contract_rank,
    greedy_max,
    guard,
    intersection_max,
    is_tight,
    membership,
    reduce_by_caps,
    remnant_rank,
    remnant_rank_simple,
    remnant_table,
    submasks,
    supermasks,
    verify_oracle,
)
from polyclinch.rational import INF


def rank(ground, cap=1, unit=1):
    return SubmodularOracle.from_sets(ground, lambda s: min(len(s) * F(unit), F(cap)))


def coverage(ground, covers, weights):
    """Weighted coverage function: a polymatroid for any nonnegative weights."""

    def fn(s):
        covered = set().union(*(covers[e] for e in s)) if s else set()
        return sum((weights[c] for c in covered), F(0))

    return SubmodularOracle.from_sets(ground, fn)


@st.composite
def polymatroids(draw, max_n=4):
    n = draw(st.integers(1, max_n))
    ground = GroundSet([f"e{k}" for k in range(n)])
    items = range(4)
    weights = {c: F(draw(st.integers(0, 4)), 2) for c in items}
    covers = {e: set(draw(st.sets(st.sampled_from(items)))) for e in ground}
    cap = F(draw(st.integers(0, 8)), 2)
    cov = coverage(ground, covers, weights)
    return SubmodularOracle(ground, lambda m: min(cov.value(m), cap))


def feasible_point(draw, f):
    """A point of P(f) built by greedy with random caps, then shrunk."""
    order = list(f.ground)
    caps = {e: F(draw(st.integers(0, 8)), 4) for e in order}
    y = greedy_max(f, draw(st.permutations(order)), caps)
    return {e: v * F(draw(st.integers(0, 4)), 4) if draw(st.booleans()) else v for e, v in y.items()}


# --- ground sets and the guard -------------------------------------------------


def test_ground_set_masks_round_trip():
    g = GroundSet(["a", "b", "c"])
    assert g.mask({"a", "c"}) == 0b101
    assert g.subset(0b110) == frozenset({"b", "c"})
    assert g.ordered(0b111) == ("a", "b", "c")
    with pytest.raises(ContractViolation):
        g.mask({"z"})


def test_submask_and_supermask_enumeration():
    assert sorted(submasks(0b101)) == [0, 1, 4, 5]
    assert sorted(supermasks(0b001, 0b111)) == [1, 3, 5, 7]


def test_guard_env_override(monkeypatch):
    monkeypatch.setenv("CLINCH_MAX_GROUND", "3")
    with pytest.raises(EnumerationError):
        guard(4)
    guard(3)
    monkeypatch.setenv("CLINCH_MAX_GROUND", "99")
    with pytest.raises(EnumerationError):
        guard(21)


# --- verify_oracle -------------------------------------------------------------


def test_uniform_rank_is_polymatroid():
    rep = verify_oracle(rank(GroundSet("abc"), cap=2))
    assert rep.ok and rep.monotone and rep.submodular


def test_square_is_not_submodular():
    g = GroundSet(["a", "b"])
    rep = verify_oracle(SubmodularOracle.from_sets(g, lambda s: len(s) ** 2))
    assert not rep.submodular and rep.monotone
    assert rep.witnesses["submodular"] == {"S": ("a",), "T": ("b",)}


def test_rank_one_capacity_passes():
    assert verify_oracle(rank(GroundSet(["e1", "e2"]))).ok


def test_nonzero_empty_fails_normalization():
    g = GroundSet(["a"])
    rep = verify_oracle(SubmodularOracle.from_table(g, [1, 1]))
    assert not rep.normalized and not rep.ok


def test_verify_oracle_matches_global_axioms():
    # brute force over all pairs (S, T) on random 3-element tables
    import random

    rng = random.Random(3)
    g = GroundSet("abc")
    for _ in range(200):
        table = [F(0)] + [F(rng.randint(0, 4)) for _ in range(7)]
        f = SubmodularOracle.from_table(g, table)
        mono = all(table[s] <= table[t] for s in range(8) for t in range(8) if s & t == s)
        sub = all(table[s] + table[t] >= table[s | t] + table[s & t] for s in range(8) for t in range(8))
        rep = verify_oracle(f)
        assert rep.monotone == mono and rep.submodular == sub


# --- membership / greedy -------------------------------------------------------


def test_membership_examples():
    g = GroundSet(["e1", "e2"])
    f = rank(g)
    assert membership(f, {})
    assert not membership(f, {"e1": F(1, 2), "e2": F(3, 4)})
    assert membership(f, {"e1": F(1, 2), "e2": F(1, 2)})


def test_greedy_examples():
    g = GroundSet(["e1", "e2"])
    f = rank(g)
    assert greedy_max(f, ["e1", "e2"]) == {"e1": 1, "e2": 0}
    assert greedy_max(f, ["e1", "e2"], {"e1": F(1, 3), "e2": INF}) == {"e1": F(1, 3), "e2": F(2, 3)}


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_membership_agrees_with_greedy_feasibility(data):
    f = data.draw(polymatroids())
    x = {e: F(data.draw(st.integers(0, 6)), 4) for e in f.ground}
    # x is feasible iff greedy capped at x reaches x everywhere
    y = greedy_max(f, list(f.ground), x)
    assert membership(f, x) == (y == x)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_greedy_total_equals_reduced_rank(data):
    f = data.draw(polymatroids())
    caps = {e: data.draw(st.sampled_from([INF, F(0), F(1, 2), F(1), F(3, 2)])) for e in f.ground}
    order = data.draw(st.permutations(list(f.ground)))
    y = greedy_max(f, order, caps)
    assert sum(y.values(), F(0)) == reduce_by_caps(f, caps).value(f.ground.full)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_greedy_is_feasible_and_maximal(data):
    f = data.draw(polymatroids())
    caps = {e: data.draw(st.sampled_from([INF, F(1, 2), F(1)])) for e in f.ground}
    y = greedy_max(f, data.draw(st.permutations(list(f.ground))), caps)
    assert membership(f, y)
    bump = F(1, 1024)
    for e in f.ground:
        up = dict(y, **{e: y[e] + bump})
        assert not membership(f, up) or (caps[e] is not INF and up[e] > caps[e])


# --- contract / reduce / remnant ----------------------------------------------


def test_contract_rank_examples():
    g = GroundSet(["e1", "e2"])
    f = rank(g)
    assert contract_rank(f, {}, {"e1"}) == 1
    assert contract_rank(f, {"e1": F(1, 4)}, {"e2"}) == F(3, 4)
    x = {"e1": F(1, 4), "e2": F(1, 4)}
    assert contract_rank(f, x, g.full) == f(g.full) - F(1, 2)
    with pytest.raises(ContractViolation):
        contract_rank(f, {"e1": 2}, set())


def test_reduce_by_caps_examples():
    g = GroundSet([1, 2])
    f = rank(g)
    assert reduce_by_caps(f, {1: INF, 2: INF}).table() == f.table()
    assert reduce_by_caps(f, {1: 0, 2: 0}).table() == [0, 0, 0, 0]
    gd = reduce_by_caps(f, {1: F(1, 5), 2: INF})
    assert gd({1}) == F(1, 5) and gd({1, 2}) == 1


def test_remnant_rank_examples():
    g = GroundSet([1, 2])
    f = rank(g)
    d = {1: F(1, 5), 2: INF}
    assert remnant_rank(f, {}, d, {1, 2}) == 1
    assert remnant_rank(f, {}, d, {1}) == F(1, 5)
    assert remnant_rank(f, {}, d, {2}) == 1
    # the clinch total of buyer 2 at this state
    assert remnant_rank(f, {}, d, {1, 2}) - remnant_rank(f, {}, d, {1}) == F(4, 5)
    assert remnant_rank(f, {}, {1: INF, 2: INF}, {1, 2}) == 1
    assert remnant_rank(f, {}, {1: 0, 2: 0}, {1, 2}) == 0
    assert remnant_rank_simple(f, {}, d, {1}) == F(1, 5)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_remnant_table_matches_enumeration(data):
    f = data.draw(polymatroids())
    x = feasible_point(data.draw, f)
    d = {e: data.draw(st.sampled_from([INF, F(0), F(1, 4), F(1)])) for e in f.ground}
    xv, dv = f.ground.vector(x), f.ground.vector(d)
    full_tab = remnant_table(f.table(), xv, dv)
    simple_tab = remnant_table(f.table(), xv, dv, simple=True)
    for m in range(f.ground.full + 1):
        assert full_tab[m] == remnant_rank(f, x, d, m)
        assert simple_tab[m] == remnant_rank_simple(f, x, d, m)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_reduced_and_remnant_oracles_are_polymatroids(data):
    f = data.draw(polymatroids())
    d = {e: data.draw(st.sampled_from([INF, F(0), F(1, 4), F(1)])) for e in f.ground}
    assert verify_oracle(reduce_by_caps(f, d)).ok
    x = feasible_point(data.draw, f)
    remnant = SubmodularOracle(f.ground, lambda m: remnant_rank(f, x, d, m))
    assert verify_oracle(remnant).ok
    assert contract_rank(f, x, 0) >= 0


# --- tight sets and intersection ----------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_tight_sets_closed_under_union_and_intersection(data):
    f = data.draw(polymatroids())
    x = feasible_point(data.draw, f)
    tight = [m for m in range(f.ground.full + 1) if is_tight(f, x, m)]
    tight_set = set(tight)
    for s in tight:
        for t in tight:
            assert s | t in tight_set and s & t in tight_set


def test_intersection_max_examples():
    g = GroundSet(["e1", "e2"])
    f = rank(g)
    assert intersection_max(f, f, g.full) == 1
    assert intersection_max(f, f, 0) == 0


def _grid_intersection(f1, f2, mask, step):
    """Largest y(F) over the step-grid points of P(f1) ∩ P(f2) supported on F."""
    elems = [e for i, e in enumerate(f1.ground) if mask >> i & 1]
    top = int(max(f1.value(f1.ground.full), 0) / step)
    best = F(0)
    for ticks in product(range(top + 1), repeat=len(elems)):
        y = {e: t * step for e, t in zip(elems, ticks)}
        total = sum(y.values(), F(0))
        if total > best and membership(f1, y) and membership(f2, y):
            best = total
    return best


@settings(max_examples=15, deadline=None)
@given(st.data())
def test_intersection_max_against_grid(data):
    f1 = data.draw(polymatroids(max_n=2))
    covers = {e: {data.draw(st.integers(0, 1))} for e in f1.ground}
    f2 = coverage(f1.ground, covers, {0: F(1, 2), 1: F(3, 4)})
    full = f1.ground.full
    exact = intersection_max(f1, f2, full)
    grid = _grid_intersection(f1, f2, full, F(1, 4))
    # all values are quarter-integral here, so the grid reaches the optimum
    assert grid == exact
