"""Pinned small markets whose outcomes are known in closed form."""

from __future__ import annotations

from fractions import Fraction

from .market import Buyer, MarketInstance, RankCapacity, Seller, efficiency_bound
from .rational import INF


def unit_seller(sid: str, valuation, bid=None, sample=None) -> Seller:
    """A seller owning a single unit, unconstrained across its edges."""
    valuation = Fraction(valuation)
    return Seller(
        sid,
        valuation,
        valuation if bid is None else Fraction(bid),
        RankCapacity(Fraction(1), Fraction(1)),
        None if sample is None else Fraction(sample),
    )


def tight_lw_market(v_min=1, v_max=3, epsilon=None) -> MarketInstance:
    """Two buyers and a one-unit seller where the auction loses half the liquid welfare.

    Buyer ``1`` values the good at ``v_min + epsilon`` with no budget limit;
    buyer ``2`` values it at ``v_max`` with budget ``v_min``; the seller's
    reserve is ``v_min``. With ``epsilon`` at its largest admissible value the
    auction's liquid welfare is exactly half the optimum.
    """
    v_min, v_max = Fraction(v_min), Fraction(v_max)
    eps = efficiency_bound([v_min, v_max]) if epsilon is None else Fraction(epsilon)
    buyers = (
        Buyer("1", v_min + eps, v_min + eps, INF),
        Buyer("2", v_max, v_max, v_min),
    )
    return MarketInstance(buyers, (unit_seller("s", v_min),), (("1", "s"), ("2", "s")), eps)


def tight_lw_values(v_min=1, v_max=3, epsilon=None) -> dict:
    """Closed-form liquid welfare of the auction and of the optimum for :func:`tight_lw_market`."""
    v_min, v_max = Fraction(v_min), Fraction(v_max)
    eps = efficiency_bound([v_min, v_max]) if epsilon is None else Fraction(epsilon)
    return {"lw_pca": v_min, "lw_opt": v_min + (v_min + eps) * (1 - v_min / v_max)}


def sample_market(k, delta, valuation, sample, epsilon=None) -> MarketInstance:
    """One-unit seller facing an unbudgeted low-value buyer and a budgeted high-value buyer.

    Buyer ``1`` values the good at 1 with no budget limit, buyer ``2`` at ``k``
    with budget 1. The seller bids its valuation truthfully.
    """
    k, delta = Fraction(k), Fraction(delta)
    eps = delta if epsilon is None else Fraction(epsilon)
    buyers = (Buyer("1", Fraction(1), Fraction(1), INF), Buyer("2", k, k, Fraction(1)))
    seller = unit_seller("s", valuation, sample=sample)
    return MarketInstance(buyers, (seller,), (("1", "s"), ("2", "s")), eps)


def sample_pair(k, delta) -> tuple:
    """Market plus the two seller-value vectors ``(delta,)`` and ``(2*delta,)``."""
    delta = Fraction(delta)
    return sample_market(k, delta, delta, 2 * delta), {"s": delta}, {"s": 2 * delta}


def sample_pair_values(k, delta) -> dict:
    """Closed-form sums over both orderings of the sample pair."""
    k, delta = Fraction(k), Fraction(delta)
    return {
        "lw_sum": 1 + 2 * delta,
        "sw_sum": k + 2 * delta,
        "opt_sum": 2 * (2 - 1 / k),
    }
