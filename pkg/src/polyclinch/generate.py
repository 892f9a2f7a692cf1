"""Seeded random markets for the randomized suites."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .market import Buyer, MarketInstance, RankCapacity, Seller, TableCapacity, efficiency_bound

WEIGHTS = (Fraction(1, 2), Fraction(1), Fraction(3, 2))


@dataclass(frozen=True)
class GenParams:
    buyers: int = 3
    sellers: int = 2
    epsilon: Fraction = Fraction(1, 2)
    max_ticks: int = 5  # valuations are drawn from {1..max_ticks} * epsilon
    capacity: str = "table"  # "table" or "rank"
    edge_prob: float = 0.6
    allow_zero: bool = False
    samples: bool = False


def _values(rng: random.Random, count: int, params: GenParams) -> list:
    """Grid valuations, redrawn until the efficiency condition on epsilon holds."""
    eps = params.epsilon
    while True:
        vals = [rng.randint(1, params.max_ticks) * eps for _ in range(count)]
        bound = efficiency_bound(vals)
        if bound is None or eps <= bound:
            return vals


def _table_capacity(rng: random.Random, incident: tuple, zero: bool) -> TableCapacity:
    if zero:
        return TableCapacity.from_function(incident, lambda s: 0)
    cap = Fraction(rng.randint(1, 3))
    covers = {b: [w for w in WEIGHTS if rng.random() < 0.6] or [rng.choice(WEIGHTS)] for b in incident}

    def value(subset):
        covered = set()
        for b in subset:
            covered.update(covers[b])
        return min(cap, sum(covered, Fraction(0)))

    return TableCapacity.from_function(incident, value)


def generate_instance(params: GenParams, seed: int) -> MarketInstance:
    rng = random.Random(seed)
    eps = params.epsilon
    vals = _values(rng, params.buyers + params.sellers, params)
    buyers = []
    for k in range(params.buyers):
        v = vals[k]
        budget = rng.randint(1, 4 * params.max_ticks) * eps / 2
        buyers.append(Buyer(f"b{k + 1}", v, v, budget))
    edges = []
    for s in range(params.sellers):
        adjacent = [k for k in range(params.buyers) if rng.random() < params.edge_prob]
        if not adjacent and params.buyers:
            adjacent = [rng.randrange(params.buyers)]
        edges.extend((f"b{k + 1}", f"s{s + 1}") for k in adjacent)
    edges.sort(key=lambda e: (int(e[0][1:]), int(e[1][1:])))
    sellers = []
    for s in range(params.sellers):
        sid = f"s{s + 1}"
        incident = tuple(b for b, t in edges if t == sid)
        zero = params.allow_zero and rng.random() < 0.25
        if params.capacity == "rank":
            cap = RankCapacity(Fraction(0) if zero else rng.choice(WEIGHTS[:2]), Fraction(rng.randint(1, 2)))
        elif params.capacity == "table":
            cap = _table_capacity(rng, incident, zero)
        else:
            raise ValueError(f"unknown capacity kind {params.capacity!r}")
        rho = vals[params.buyers + s]
        sample = rng.randint(1, params.max_ticks) * eps if params.samples else None
        sellers.append(Seller(sid, rho, rho, cap, sample))
    return MarketInstance(tuple(buyers), tuple(sellers), tuple(edges), eps)


def random_suite(count: int, seed: int, **overrides) -> list:
    """``count`` instances with between 1 and 4 buyers and 1 and 3 sellers."""
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        params = GenParams(buyers=rng.randint(1, 4), sellers=rng.randint(1, 3), **overrides)
        out.append(generate_instance(params, rng.randrange(2**32)))
    return out
