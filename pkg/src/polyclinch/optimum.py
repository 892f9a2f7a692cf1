"""Optimal liquid welfare benchmark and welfare metrics.

The optimum hands goods out greedily in descending valuation order (lower
index first on ties), each buyer receiving the smaller of its budget-saturating
amount ``B/v`` and what the supply still allows.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .market import PreprocessedMarket
from .polymatroid import ContractViolation, greedy_max, reduce_by_caps, submasks, subset_sums
from .rational import INF


@dataclass(frozen=True)
class OptAllocation:
    x_star: tuple  # per preprocessed buyer
    priority: tuple  # priority[i] = bitmask of H_i
    order: tuple  # buyer indices in processing order
    lw_opt: Fraction


def demand_caps(pm: PreprocessedMarket) -> list:
    """``B_i / v_i`` per buyer (INF for unbounded budgets)."""
    return [b.budget / b.valuation if b.budget is not INF else INF for b in pm.buyers]


def priority_order(pm: PreprocessedMarket, ties: str = "lower") -> tuple:
    """Buyers by descending valuation; equal valuations go lower index first (or higher with ``ties="higher"``)."""
    if ties not in ("lower", "higher"):
        raise ValueError(f"ties must be 'lower' or 'higher', not {ties!r}")
    sign = 1 if ties == "lower" else -1
    return tuple(sorted(range(pm.n), key=lambda i: (-pm.buyers[i].valuation, sign * i)))


def optimal_recursive(pm: PreprocessedMarket, ties: str = "lower") -> tuple:
    """The recursive formula, with the inner minimum by enumeration over ``H_i``."""
    caps = demand_caps(pm)
    order = priority_order(pm, ties)
    x = [Fraction(0)] * pm.n
    priority = [0] * pm.n
    prefix = 0
    for i in order:
        priority[i] = prefix
        sums = subset_sums([x[k] if prefix >> k & 1 else Fraction(0) for k in range(pm.n)])
        bit = 1 << i
        room = min(pm.gtab[h | bit] - sums[h] for h in submasks(prefix))
        x[i] = room if caps[i] is INF else min(caps[i], room)
        prefix |= bit
    return tuple(x), tuple(priority), order


def optimal_greedy(pm: PreprocessedMarket, ties: str = "lower") -> tuple:
    """Same allocation via greedy maximisation over the demand-capped polymatroid."""
    caps = demand_caps(pm)
    reduced = reduce_by_caps(pm.g, caps)
    order = priority_order(pm, ties)
    y = greedy_max(reduced, [pm.buyers[i].id for i in order])
    return tuple(y[b.id] for b in pm.buyers)


def optimal_lw_allocation(pm: PreprocessedMarket, cross_check: bool = True, ties: str = "lower") -> OptAllocation:
    """Optimal liquid-welfare allocation of the preprocessed market.

    ``ties`` only matters for equal valuations: it changes which optimum is
    returned, never its value. The auction itself favours the buyer that drops
    last, which is the higher index under round-robin clocks.
    """
    x, priority, order = optimal_recursive(pm, ties)
    if cross_check:
        other = optimal_greedy(pm, ties)
        if other != x:
            raise ContractViolation(f"recursive and greedy optima disagree: {x} vs {other}")
    return OptAllocation(x, priority, order, liquid_welfare(pm, x))


def liquid_welfare(pm: PreprocessedMarket, x) -> Fraction:
    """``sum min(v_i x_i, B_i)`` over the preprocessed buyers."""
    total = Fraction(0)
    for b, xi in zip(pm.buyers, x):
        value = b.valuation * xi
        total += value if b.budget is INF else min(value, b.budget)
    return total


def social_welfare(pm: PreprocessedMarket, x) -> Fraction:
    return sum((b.valuation * xi for b, xi in zip(pm.buyers, x)), Fraction(0))


def two_sided_liquid_welfare(instance, buyer_goods, seller_retained) -> Fraction:
    """Raw-allocation form: real buyers' capped value plus sellers' retained value."""
    total = Fraction(0)
    for b in instance.buyers:
        value = b.valuation * buyer_goods.get(b.id, Fraction(0))
        total += value if b.budget is INF else min(value, b.budget)
    for s in instance.sellers:
        total += s.valuation * seller_retained.get(s.id, Fraction(0))
    return total


def two_sided_social_welfare(instance, buyer_goods, seller_retained) -> Fraction:
    total = sum((b.valuation * buyer_goods.get(b.id, Fraction(0)) for b in instance.buyers), Fraction(0))
    return total + sum((s.valuation * seller_retained.get(s.id, Fraction(0)) for s in instance.sellers), Fraction(0))


def is_feasible(pm: PreprocessedMarket, x) -> bool:
    """True iff the buyer totals ``x`` are realisable, i.e. ``x ∈ P(g)``."""
    sums = subset_sums(list(x))
    return all(sums[m] <= pm.gtab[m] for m in range(pm.full + 1))

