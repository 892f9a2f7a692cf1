from fractions import Fraction as F
from itertools import permutations

import pytest
from oracles import grid_check, rank_two_suite

from polyclinch.generate import random_suite
from polyclinch.market import Buyer, MarketInstance, preprocess
from polyclinch.optimum import (
    demand_caps,
    is_feasible,
    liquid_welfare,
    optimal_greedy,
    optimal_lw_allocation,
    optimal_recursive,
    priority_order,
    social_welfare,
    two_sided_liquid_welfare,
    two_sided_social_welfare,
)
from polyclinch.polymatroid import greedy_max, reduce_by_caps
from polyclinch.rational import INF
from polyclinch.scenarios import sample_market, tight_lw_market, tight_lw_values, unit_seller

SUITE = random_suite(60, 21) + random_suite(40, 22, capacity="rank", allow_zero=True)


def test_tight_market_optimum():
    pm = preprocess(tight_lw_market(1, 3, F(1, 2)))
    opt = optimal_lw_allocation(pm)
    assert opt.x_star == (F(2, 3), F(1, 3), 0)
    assert opt.lw_opt == 2 == tight_lw_values(1, 3, F(1, 2))["lw_opt"]
    assert opt.order == (1, 0, 2)


def test_single_unbudgeted_buyer_takes_everything():
    inst = MarketInstance((Buyer("a", F(1), F(1), INF),), (unit_seller("s", F(1, 100)),), (("a", "s"),), F(1, 100))
    assert optimal_lw_allocation(preprocess(inst)).x_star[0] == 1


@pytest.mark.parametrize("k", [2, 5, 100])
def test_sample_market_optimum(k):
    pm = preprocess(sample_market(k, F(1, 1000), F(1, 1000), F(1, 500)))
    opt = optimal_lw_allocation(pm)
    assert opt.x_star[1] == F(1, k) and opt.x_star[0] == 1 - F(1, k)
    # the seller's reserve contributes nothing: all goods go to real buyers
    assert opt.lw_opt == 2 - F(1, k)


def test_metrics_basics():
    pm = preprocess(tight_lw_market(1, 3, F(1, 2)))
    assert liquid_welfare(pm, [0, 0, 0]) == 0 == social_welfare(pm, [0, 0, 0])
    assert liquid_welfare(pm, [0, 1, 0]) == 1 and social_welfare(pm, [0, 1, 0]) == 3
    inst = pm.instance
    assert two_sided_liquid_welfare(inst, {"2": F(1)}, {}) == 1
    assert two_sided_social_welfare(inst, {}, {"s": F(1)}) == 1


def test_sample_market_social_welfare():
    pm = preprocess(sample_market(2, F(1, 100), F(1, 100), F(1, 50)))
    assert social_welfare(pm, [0, 1, 0]) == 2


def test_priority_tie_breaks():
    inst = MarketInstance(
        (Buyer("a", F(1), F(1), F(1)), Buyer("b", F(1), F(1), F(1))),
        (unit_seller("s", F(1, 2)),),
        (("a", "s"), ("b", "s")),
        F(1, 2),
    )
    pm = preprocess(inst)
    assert priority_order(pm) == (0, 1, 2)
    assert priority_order(pm, "higher") == (1, 0, 2)
    lower, higher = optimal_lw_allocation(pm), optimal_lw_allocation(pm, ties="higher")
    assert lower.x_star == (1, 0, 0) and higher.x_star == (0, 1, 0)
    assert lower.lw_opt == higher.lw_opt
    with pytest.raises(ValueError):
        priority_order(pm, "random")


@pytest.mark.parametrize("inst", SUITE[:50])
def test_routes_agree_and_invariants(inst):
    pm = preprocess(inst)
    x, _, _ = optimal_recursive(pm)
    assert optimal_greedy(pm) == x
    caps = demand_caps(pm)
    assert all(c is INF or xi <= c for xi, c in zip(x, caps))
    assert sum(x, F(0)) == pm.f.value(pm.edge_ground.full)
    assert is_feasible(pm, x)


@pytest.mark.parametrize("inst", [i for i in SUITE if len(i.buyers) <= 3][:40])
def test_optimum_beats_every_vertex(inst):
    # vertices of the demand-capped polymatroid are the greedy points of all orders
    pm = preprocess(inst)
    opt = optimal_lw_allocation(pm)
    reduced = reduce_by_caps(pm.g, demand_caps(pm))
    ids = [b.id for b in pm.buyers]
    for order in permutations(ids):
        y = greedy_max(reduced, order)
        assert liquid_welfare(pm, [y[i] for i in ids]) <= opt.lw_opt


@pytest.mark.parametrize("inst", rank_two_suite(6, 3))
def test_grid_search_oracle(inst):
    opt = optimal_lw_allocation(preprocess(inst))
    grid, floor = grid_check(inst, opt.lw_opt)
    assert floor <= grid <= opt.lw_opt


def test_social_welfare_dominates_liquid_welfare():
    for inst in SUITE[:20]:
        pm = preprocess(inst)
        x = optimal_lw_allocation(pm).x_star
        assert social_welfare(pm, x) >= liquid_welfare(pm, x)
