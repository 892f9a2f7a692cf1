"""Single-sample mechanism for markets with strategic sellers.

Each seller takes part only if its sample is at least its bid. The clinching
auction then runs on the participating sellers with the samples standing in for
the sellers' reserve prices, and each participating seller is paid its sample
per unit sold.

Welfare guarantees for this mechanism are statements about expectations over
seller valuations and samples. They follow from a pairwise inequality: for any
two value vectors ``a`` and ``b`` the mechanism run on ``(a, b)`` plus the run
on ``(b, a)`` achieves a constant fraction of ``OPT(a) + OPT(b)``.
:func:`pairwise_eval` checks that inequality exactly and
:func:`estimate_expectations` estimates the expectations by Monte Carlo.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .auction import Allocation, run_pca
from .market import MarketInstance, preprocess
from .optimum import liquid_welfare, optimal_lw_allocation, social_welfare, two_sided_liquid_welfare, two_sided_social_welfare
from .rational import format_rat, is_multiple


@dataclass(frozen=True)
class SampleProfile:
    """Seller valuations and samples, keyed by seller id."""

    values: Mapping
    samples: Mapping

    def apply(self, instance: MarketInstance) -> MarketInstance:
        """Sellers bid truthfully: valuation and bid both become the profile value."""
        out = instance
        for s in instance.sellers:
            rho = Fraction(self.values[s.id])
            out = out.replace_seller(s.id, valuation=rho, bid=rho, sample=Fraction(self.samples[s.id]))
        return out


@dataclass(frozen=True)
class MechanismOutcome:
    allocation: Allocation
    kept: tuple  # seller ids that took part
    lw: Fraction
    sw: Fraction


def run_mechanism(instance: MarketInstance, profile: SampleProfile | None = None) -> MechanismOutcome:
    if profile is not None:
        instance = profile.apply(instance)
    for s in instance.sellers:
        if s.sample is None:
            raise ValueError(f"seller {s.id!r} has no sample")
    kept = tuple(s.id for s in instance.sellers if s.sample >= s.bid)
    sub = instance.restrict_sellers(kept)
    pm = preprocess(sub, "samples")
    inner, _ = run_pca(pm)
    w_f = {}
    for b, s in instance.edges:
        w_f[(b, s)] = inner.w_f.get((b, s), Fraction(0))
    p_f = dict(inner.p_f)
    r_f = {}
    goods = {b.id: inner.goods[b.id] for b in instance.buyers}
    x_pre = []
    for s in instance.sellers:
        sold = sum((a for (b, t), a in w_f.items() if t == s.id), Fraction(0))
        r_f[s.id] = s.sample * sold if s.id in kept else Fraction(0)
        goods[s.id] = instance.supply(s.id) - sold
    x_pre = tuple(goods[b.id] for b in instance.buyers) + tuple(goods[s.id] for s in instance.sellers)
    alloc = Allocation(w_f, p_f, r_f, goods, x_pre)
    lw = two_sided_liquid_welfare(instance, goods, goods)
    sw = two_sided_social_welfare(instance, goods, goods)
    return MechanismOutcome(alloc, kept, lw, sw)


def with_seller_values(instance: MarketInstance, values: Mapping) -> MarketInstance:
    out = instance
    for s in instance.sellers:
        rho = Fraction(values[s.id])
        out = out.replace_seller(s.id, valuation=rho, bid=rho)
    return out


def optimal_lw(instance: MarketInstance, values: Mapping | None = None) -> Fraction:
    if values is not None:
        instance = with_seller_values(instance, values)
    return optimal_lw_allocation(preprocess(instance)).lw_opt


def pca_welfare(instance: MarketInstance, values: Mapping, sellers) -> tuple:
    """``(LW, SW)`` of the clinching auction on the submarket of ``sellers`` with truthful reserves."""
    sub = with_seller_values(instance, values).restrict_sellers(sellers)
    pm = preprocess(sub)
    alloc, _ = run_pca(pm)
    return liquid_welfare(pm, alloc.x_pre), social_welfare(pm, alloc.x_pre)


@dataclass
class PairReport:
    lw_ab: Fraction
    lw_ba: Fraction
    sw_ab: Fraction
    sw_ba: Fraction
    opt_a: Fraction
    opt_b: Fraction
    decomposition: dict = field(default_factory=dict)

    @property
    def lw_sum(self) -> Fraction:
        return self.lw_ab + self.lw_ba

    @property
    def sw_sum(self) -> Fraction:
        return self.sw_ab + self.sw_ba

    @property
    def opt_sum(self) -> Fraction:
        return self.opt_a + self.opt_b

    @property
    def lw_bound(self) -> bool:
        return 4 * self.lw_sum >= self.opt_sum

    @property
    def sw_bound(self) -> bool:
        return 2 * self.sw_sum >= self.opt_sum

    def to_dict(self) -> dict:
        dec = {k: (format_rat(v) if isinstance(v, Fraction) else v) for k, v in self.decomposition.items()}
        return {
            "lw_sum": format_rat(self.lw_sum),
            "sw_sum": format_rat(self.sw_sum),
            "opt_sum": format_rat(self.opt_sum),
            "lw_ab": format_rat(self.lw_ab),
            "lw_ba": format_rat(self.lw_ba),
            "sw_ab": format_rat(self.sw_ab),
            "sw_ba": format_rat(self.sw_ba),
            "opt_a": format_rat(self.opt_a),
            "opt_b": format_rat(self.opt_b),
            "lw_bound": self.lw_bound,
            "sw_bound": self.sw_bound,
            "decomposition": dec,
        }


def pairwise_eval(instance: MarketInstance, rho_a: Mapping, rho_b: Mapping) -> PairReport:
    """Both orderings of the mechanism on ``(rho_a, rho_b)`` and the split into two submarkets.

    ``M_a`` holds the sellers with ``rho_a >= rho_b`` and ``M_b`` those with
    ``rho_a <= rho_b`` (ties belong to both). The run on ``(rho_a, rho_b)``
    keeps exactly ``M_b`` and trades like the plain auction on ``M_b`` with
    reserves ``rho_b``; the decomposition records that identity and the two
    inequalities that bound the mechanism by the submarket auctions and the
    submarket optima by the full optima.
    """
    ab = run_mechanism(instance, SampleProfile(rho_a, rho_b))
    ba = run_mechanism(instance, SampleProfile(rho_b, rho_a))
    opt_a = optimal_lw(instance, rho_a)
    opt_b = optimal_lw(instance, rho_b)
    sellers = [s.id for s in instance.sellers]
    m_a = tuple(j for j in sellers if rho_a[j] >= rho_b[j])
    m_b = tuple(j for j in sellers if rho_a[j] <= rho_b[j])
    pca_a, _ = pca_welfare(instance, rho_a, m_a)
    pca_b, _ = pca_welfare(instance, rho_b, m_b)
    opt_sub_a = optimal_lw(with_seller_values(instance, rho_a).restrict_sellers(m_a))
    opt_sub_b = optimal_lw(with_seller_values(instance, rho_b).restrict_sellers(m_b))
    buyers = [b.id for b in instance.buyers]
    identity = True
    for outcome, kept_expected, values in ((ab, m_b, rho_b), (ba, m_a, rho_a)):
        sub = with_seller_values(instance, values).restrict_sellers(kept_expected)
        plain, _ = run_pca(preprocess(sub))
        same = tuple(outcome.kept) == kept_expected and all(
            outcome.allocation.goods[b] == plain.goods[b] and outcome.allocation.p_f[b] == plain.p_f[b]
            for b in buyers
        )
        identity = identity and same
    report = PairReport(ab.lw, ba.lw, ab.sw, ba.sw, opt_a, opt_b)
    report.decomposition = {
        "M_a": list(m_a),
        "M_b": list(m_b),
        "lw_pca_a": pca_a,
        "lw_pca_b": pca_b,
        "lw_opt_a_sub": opt_sub_a,
        "lw_opt_b_sub": opt_sub_b,
        "buyer_identity": identity,
        "relation_pca": report.lw_sum >= pca_a + pca_b,
        "relation_optimal": 2 * (opt_sub_a + opt_sub_b) >= opt_a + opt_b,
    }
    return report


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class DistributionSpec:
    """Per-seller discrete distributions: seller id -> ((value, weight), ...)."""

    support: Mapping

    @classmethod
    def uniform(cls, grids: Mapping) -> "DistributionSpec":
        return cls({sid: tuple((Fraction(v), 1) for v in values) for sid, values in grids.items()})

    def check(self, instance: MarketInstance) -> None:
        for s in instance.sellers:
            if s.id not in self.support or not self.support[s.id]:
                raise ValueError(f"no distribution for seller {s.id!r}")
            for value, weight in self.support[s.id]:
                if not value > 0:
                    raise ValueError(f"support of {s.id!r} must be positive")
                if not is_multiple(value, instance.epsilon):
                    raise ValueError(f"support point {value} of {s.id!r} is off the epsilon grid")
                if weight <= 0:
                    raise ValueError(f"weights of {s.id!r} must be positive")

    def draw(self, rng: random.Random, seller_ids) -> dict:
        out = {}
        for sid in seller_ids:
            values, weights = zip(*self.support[sid])
            out[sid] = rng.choices(values, weights=weights)[0]
        return out


def _stderr(values, mean: float) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return math.sqrt(var / n)


def estimate_expectations(
    instance: MarketInstance,
    dist: DistributionSpec,
    trials: int,
    seed: int,
    keep_trials: bool = False,
) -> dict:
    """Monte Carlo means of the mechanism's LW and SW and of the optimal LW.

    Every trial draws ``rho_a`` then ``rho_b`` (sellers in instance order) and
    averages the two orderings of :func:`pairwise_eval`; by symmetry of the two
    draws this is an unbiased estimate of each expectation. Ratio standard
    errors use the delta method.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    dist.check(instance)
    rng = random.Random(seed)
    ids = [s.id for s in instance.sellers]
    cache = {}
    lw, sw, opt, per_trial = [], [], [], []
    for _ in range(trials):
        a = dist.draw(rng, ids)
        b = dist.draw(rng, ids)
        key = (tuple(a[j] for j in ids), tuple(b[j] for j in ids))
        if key not in cache:
            cache[key] = pairwise_eval(instance, a, b)
        rep = cache[key]
        lw.append(rep.lw_sum / 2)
        sw.append(rep.sw_sum / 2)
        opt.append(rep.opt_sum / 2)
        if keep_trials:
            per_trial.append(
                {"rho_a": [format_rat(a[j]) for j in ids], "rho_b": [format_rat(b[j]) for j in ids], **rep.to_dict()}
            )
    mean_lw = sum(lw, Fraction(0)) / trials
    mean_sw = sum(sw, Fraction(0)) / trials
    mean_opt = sum(opt, Fraction(0)) / trials
    ratio_lw = mean_lw / mean_opt if mean_opt else None
    ratio_sw = mean_sw / mean_opt if mean_opt else None

    def ratio_stderr(num, ratio):
        if ratio is None:
            return 0.0
        resid = [float(u - ratio * o) for u, o in zip(num, opt)]
        return _stderr(resid, 0.0) / float(mean_opt) if trials > 1 else 0.0

    report = {
        "trials": trials,
        "seed": seed,
        "mean_lw_mech": format_rat(mean_lw),
        "mean_sw_mech": format_rat(mean_sw),
        "mean_lw_opt": format_rat(mean_opt),
        "ratio_lw": None if ratio_lw is None else format_rat(ratio_lw),
        "ratio_sw": None if ratio_sw is None else format_rat(ratio_sw),
        "stderr_lw": ratio_stderr(lw, ratio_lw),
        "stderr_sw": ratio_stderr(sw, ratio_sw),
        "stderr_mean_lw_mech": _stderr([float(v) for v in lw], float(mean_lw)),
        "stderr_mean_sw_mech": _stderr([float(v) for v in sw], float(mean_sw)),
        "stderr_mean_lw_opt": _stderr([float(v) for v in opt], float(mean_opt)),
    }
    if keep_trials:
        report["per_trial"] = per_trial
    return report
