"""Executable checks of the auction's guarantees.

Every check is a pure function of the preprocessed market, the recorded trace,
the final allocation and the optimal benchmark. Failing checks carry a witness
(state index, subset, buyer, exact values) that can be replayed from the trace.

Checks that only hold for truthful bidding, or only under the efficiency
condition on epsilon, are reported as skipped when their premise fails.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .auction import (
    ClinchEvent,
    DemandEvent,
    EdgeRank,
    JumpEvent,
    PriceEvent,
    TraceLog,
    finalize,
    run_pca,
)
from .market import MarketInstance, PreprocessedMarket, efficiency_bound, preprocess
from .optimum import OptAllocation, demand_caps, liquid_welfare, optimal_lw_allocation, social_welfare
from .polymatroid import bits, remnant_table
from .rational import INF, format_rat, is_multiple

FULL_ENUMERATION = 10
SAMPLED_SUBSETS = 64


def _jsonable(value):
    if isinstance(value, Fraction) or value is INF:
        return format_rat(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


@dataclass
class CheckResult:
    status: str  # "pass", "fail" or "skipped"
    witness: dict | None = None
    note: str = ""


@dataclass
class CheckReport:
    checks: dict = field(default_factory=dict)

    def record(self, name: str, ok: bool, witness: dict | None = None, note: str = "") -> bool:
        """Record a result; the first failure of a name is kept."""
        prev = self.checks.get(name)
        if prev is not None and prev.status == "fail":
            return ok
        if ok:
            if prev is None:
                self.checks[name] = CheckResult("pass", None, note)
        else:
            self.checks[name] = CheckResult("fail", witness or {}, note)
        return ok

    def skip(self, name: str, reason: str) -> None:
        if name not in self.checks:
            self.checks[name] = CheckResult("skipped", None, reason)

    def merge(self, other: "CheckReport", prefix: str = "") -> None:
        for name, res in other.checks.items():
            self.checks[prefix + name] = res

    @property
    def failures(self) -> dict:
        return {k: v for k, v in self.checks.items() if v.status == "fail"}

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def exit_code(self) -> int:
        if self.failures:
            return 1
        if any(v.status == "skipped" for v in self.checks.values()):
            return 2
        return 0

    def to_dict(self) -> dict:
        out = {}
        for name, res in self.checks.items():
            entry = {"status": res.status}
            if res.note:
                entry["note"] = res.note
            if res.witness is not None:
                entry["witness"] = _jsonable(res.witness)
            out[name] = entry
        return {"ok": self.ok, "exit_code": self.exit_code, "checks": out}


# ---------------------------------------------------------------------------
# helpers


def is_truthful(pm: PreprocessedMarket) -> bool:
    return all(b.bid == b.valuation for b in pm.buyers)


def epsilon_gate(pm: PreprocessedMarket) -> bool:
    """``eps <= v_min**2 / (v_max - v_min)`` over all (real and virtual) valuations."""
    bound = efficiency_bound([b.valuation for b in pm.buyers])
    return bound is None or pm.epsilon <= bound


def subset_family(n: int, seed: int = 0) -> list:
    """All subsets for small ``n``, else a fixed sample plus singletons, the empty set and everything."""
    full = (1 << n) - 1
    if n <= FULL_ENUMERATION:
        return list(range(full + 1))
    rng = random.Random(seed)
    fam = {0, full}
    fam.update(1 << i for i in range(n))
    fam.update(full ^ (1 << i) for i in range(n))
    while len(fam) < SAMPLED_SUBSETS + 2 * n + 2:
        fam.add(rng.randrange(full + 1))
    return sorted(fam)


def _sum(values, mask: int) -> Fraction:
    return sum((values[i] for i in bits(mask)), Fraction(0))


def _names(pm: PreprocessedMarket, mask: int) -> list:
    return [pm.buyers[i].id for i in bits(mask)]


def _supply_ok(pm: PreprocessedMarket, w) -> tuple:
    for j in range(pm.m):
        local = pm.local[j]
        for lm in range(1 << len(local)):
            used = sum((w[local[p]] for p in range(len(local)) if lm >> p & 1), Fraction(0))
            if used > pm.ftab[j][lm]:
                return False, {"seller": pm.sellers[j].id, "edges": [pm.edge_ids[local[p]] for p in bits(lm)]}
    return True, None


def _settled(entries, k: int) -> bool:
    """State ``k`` (0 = initial) is not between an update and its demand refresh."""
    if k == 0:
        return True
    event = entries[k - 1][0]
    return not isinstance(event, (ClinchEvent, PriceEvent))


# ---------------------------------------------------------------------------
# trace checks


def check_trace(pm: PreprocessedMarket, trace: TraceLog, allocation, opt: OptAllocation) -> CheckReport:
    trace.check_integrity(pm)
    rep = CheckReport()
    n, full = pm.n, pm.full
    fam = subset_family(n)
    truthful = is_truthful(pm)
    gate = epsilon_gate(pm)
    eps = pm.epsilon
    final = trace.final
    xf, pf = final.x, final.p
    vals = [b.valuation for b in pm.buyers]
    # Among equal valuations the auction favours the buyer that drops last,
    # i.e. the higher index; per-buyer comparisons use the optimum with that
    # tie-break. Both optima have the same value.
    aligned = optimal_lw_allocation(pm, ties="higher")
    xs = aligned.x_star
    rep.record("benchmark_tie_value", aligned.lw_opt == opt.lw_opt,
               {"given": opt.lw_opt, "drop_order": aligned.lw_opt})
    benchmarks = (opt.x_star,) if opt.x_star == xs else (opt.x_star, xs)
    states = list(trace.states())
    entries = trace.entries

    rep.record(
        "allocation_matches_trace",
        finalize(pm, final) == allocation,
        {"note": "allocation differs from the finalized trace"},
    )

    starts = {0}
    for k, (event, _) in enumerate(entries, start=1):
        if isinstance(event, JumpEvent) or (isinstance(event, DemandEvent) and event.cause == "price"):
            starts.add(k)

    tables = {}

    def table(k: int, simple: bool = False):
        key = (k, simple)
        if key not in tables:
            s = states[k]
            tables[key] = remnant_table(pm.gtab, s.x, s.demands, simple=simple)
        return tables[key]

    # --- per-state invariants ----------------------------------------------
    for k, s in enumerate(states):
        where = {"state": k, "iteration": s.iteration}
        rep.record("sbb", sum(s.p, Fraction(0)) == sum(s.r, Fraction(0)),
                   dict(where, payments=sum(s.p, Fraction(0)), revenues=sum(s.r, Fraction(0))))
        for i, b in enumerate(pm.buyers):
            if b.budget is not INF and s.p[i] > b.budget:
                rep.record("budget", False, dict(where, buyer=b.id, payment=s.p[i], budget=b.budget))
                break
        else:
            rep.record("budget", True)
        ok, wit = _supply_ok(pm, s.w)
        rep.record("supply_feasible", ok, dict(where, **(wit or {})))
        xsum_ok = all(s.x[i] == _sum(s.w, sum(1 << e for e in pm.buyer_edges[i])) for i in range(n))
        rep.record("aggregate_goods", xsum_ok, where)
        if not _settled(entries, k):
            continue
        for i, b in enumerate(pm.buyers):
            expected = _demand(b, s.p[i], s.clock(i))
            if s.demands[i] != expected:
                rep.record("demand_formula", False, dict(where, buyer=b.id, demand=s.demands[i], expected=expected))
                break
        else:
            rep.record("demand_formula", True)
        g1, g2 = table(k), table(k, True)
        for S in fam:
            if g1[S] != g2[S]:
                rep.record("remnant_simple_form", False, dict(where, subset=_names(pm, S), contracted=g1[S], simple=g2[S]))
                break
        else:
            rep.record("remnant_simple_form", True)
        rep.record("remaining_supply", g1[full] == pm.gtab[full] - _sum(s.x, full),
                   dict(where, remnant=g1[full], expected=pm.gtab[full] - _sum(s.x, full)))
        X = s.active()
        expected = pm.gtab[full] - _sum(s.x, X) - _sum(xf, full ^ X)
        rep.record("remaining_supply_active", g1[X] == expected, dict(where, active=_names(pm, X), remnant=g1[X], expected=expected))
        if truthful:
            for S in fam:
                if S & ~X:
                    continue
                gap = max(_sum(target, S) for target in benchmarks) - _sum(s.x, S)
                if g1[S] < gap:
                    rep.record("remnant_covers_optimum", False, dict(where, subset=_names(pm, S), remnant=g1[S], gap=gap))
                    break
            else:
                rep.record("remnant_covers_optimum", True)
    if not truthful:
        rep.skip("remnant_covers_optimum", "bids differ from valuations")

    # --- iteration-level invariants -------------------------------------------
    start_list = sorted(starts)
    for pos, k in enumerate(start_list):
        s = states[k]
        nxt = start_list[pos + 1] if pos + 1 < len(start_list) else len(states)
        xi = [Fraction(0)] * n
        for e in range(k, nxt - 1):
            event = entries[e][0]
            if isinstance(event, ClinchEvent):
                xi[event.buyer] += event.total
            if isinstance(event, PriceEvent):
                break
        g1 = table(k)
        where = {"state": k, "iteration": s.iteration}
        bad = None
        for T in fam:
            for i in bits(T):
                S = T ^ (1 << i)
                if xi[i] > g1[T] - g1[S]:
                    bad = dict(where, S=_names(pm, S), T=_names(pm, T), clinched=xi[i], bound=g1[T] - g1[S])
                    break
            if bad:
                break
        if bad is None:
            for S in fam:
                gap = g1[full] - g1[S]
                if _sum(xi, full ^ S) > gap:
                    bad = dict(where, S=_names(pm, S), T=_names(pm, full), clinched=_sum(xi, full ^ S), bound=gap)
                    break
        rep.record("clinch_within_marginal", bad is None, bad)

        if truthful:
            X = s.active()
            Y = sum(1 << i for i in bits(X) if xf[i] <= xs[i])
            real_active = X & pm.real_mask
            if not real_active:
                continue
            ctilde = min(s.clock(i) for i in bits(real_active))
            lhs = sum((pf[i] - s.p[i] for i in bits(X & ~Y)), Fraction(0))
            rhs = sum(((vals[i] - eps) * (xs[i] - xf[i]) for i in bits(Y)), Fraction(0))
            rhs += ctilde * (g1[X] - _sum(xs, Y) + _sum(s.x, Y))
            rep.record("payment_bound", lhs >= rhs, dict(where, lhs=lhs, rhs=rhs, active=_names(pm, X), Y=_names(pm, Y)))
    if not truthful:
        rep.skip("payment_bound", "bids differ from valuations")

    # --- per-clinch invariants ------------------------------------------------
    for k, (event, post) in enumerate(entries, start=1):
        if not isinstance(event, ClinchEvent):
            continue
        pre_k = k - 1
        pre = states[pre_k]
        i = event.buyer
        bit = 1 << i
        where = {"state": k, "iteration": pre.iteration, "buyer": pm.buyers[i].id}
        g_pre = table(pre_k)
        total = g_pre[full] - g_pre[full ^ bit]
        rep.record("clinch_total", event.total == total, dict(where, split=event.total, total=total))
        ok, wit = _supply_ok(pm, post.w)
        rep.record("clinch_feasible", ok, dict(where, **(wit or {})))
        rep.record("clinch_below_bid", event.price < pm.buyers[i].bid, dict(where, price=event.price, bid=pm.buyers[i].bid))
        settled_k = k + 1 if k < len(entries) and isinstance(entries[k][0], DemandEvent) else k
        settled = states[settled_k]
        g_post = remnant_table(pm.gtab, settled.x, settled.demands)
        bad = None
        for S in fam:
            if S & bit:
                continue
            if g_post[S] != g_pre[S]:
                bad = dict(where, subset=_names(pm, S), before=g_pre[S], after=g_post[S])
                break
        if bad is None:
            r_pre = EdgeRank(pm, pre.w, pre.demands)
            r_post = EdgeRank(pm, settled.w, settled.demands)
            for S in fam:
                if S & bit:
                    continue
                local = pm.cover[S]
                if r_pre(local) != r_post(local):
                    bad = dict(where, subset=_names(pm, S), edge_rank_before=r_pre(local), edge_rank_after=r_post(local))
                    break
        rep.record("clinch_leaves_others", bad is None, bad)
        if i < pm.n_real:
            for e, amount in event.amounts:
                j = pm.edges[e][1]
                vb = pm.n_real + j
                seller_bid = pm.buyers[vb].bid
                ok = seller_bid <= event.price <= pm.buyers[i].bid and pre.clock(vb) >= seller_bid
                rep.record("direct_trade_prices", ok,
                           dict(where, seller=pm.sellers[j].id, price=event.price, seller_bid=seller_bid,
                                reserve_clock=pre.clock(vb)))
    for name in ("clinch_total", "clinch_feasible", "clinch_below_bid", "clinch_leaves_others", "direct_trade_prices"):
        rep.record(name, True, note="no clinches" if name not in rep.checks else "")

    # --- final allocation ---------------------------------------------------------
    rep.record("final_tight", _sum(xf, full) == pm.gtab[full], {"allocated": _sum(xf, full), "supply": pm.gtab[full]})
    rep.record("terminated", final.active() == 0, {"active": _names(pm, final.active())})
    if truthful:
        for i in pm.real:
            if vals[i] * xf[i] < pf[i]:
                rep.record("buyer_ir", False, {"buyer": pm.buyers[i].id, "value": vals[i] * xf[i], "payment": pf[i]})
                break
        else:
            rep.record("buyer_ir", True)
        for j, s in enumerate(pm.sellers):
            sold = _sum(final.w, sum(1 << e for e in pm.local[j][:-1]))
            revenue = allocation.r_f[s.id]
            if revenue < pm.buyers[pm.n_real + j].valuation * sold:
                rep.record("seller_ir", False, {"seller": s.id, "revenue": revenue, "sold": sold})
                break
        else:
            rep.record("seller_ir", True)
        caps = demand_caps(pm)
        for i in range(n):
            if xf[i] > xs[i] and xs[i] != caps[i]:
                rep.record("overallocation_only_budget_capped", False,
                           {"buyer": pm.buyers[i].id, "x_final": xf[i], "x_opt": xs[i], "cap": caps[i]})
                break
        else:
            rep.record("overallocation_only_budget_capped", True)
        for i in pm.virtual:
            if xf[i] > xs[i]:
                rep.record("virtual_not_overallocated", False, {"buyer": pm.buyers[i].id, "x_final": xf[i], "x_opt": xs[i]})
                break
        else:
            rep.record("virtual_not_overallocated", True)
        _check_chain(pm, trace, states, rep)
    else:
        for name in ("buyer_ir", "seller_ir", "overallocation_only_budget_capped", "virtual_not_overallocated", "tight_chain"):
            rep.skip(name, "bids differ from valuations")

    if truthful and gate:
        vmin = min(vals)
        for i in range(n):
            if xf[i] > xs[i] and (vmin + eps) * xs[i] - eps * xf[i] < 0:
                rep.record("overallocation_margin", False, {"buyer": pm.buyers[i].id, "x_final": xf[i], "x_opt": xs[i]})
                break
        else:
            rep.record("overallocation_margin", True)
        over = [i for i in range(n) if xf[i] > xs[i]]
        under = [i for i in range(n) if xf[i] <= xs[i]]
        lhs = sum((pf[i] for i in over), Fraction(0)) + sum((vals[i] * xf[i] for i in under), Fraction(0))
        rhs = sum((vals[i] * xs[i] for i in under), Fraction(0))
        rep.record("payment_covers_shortfall", lhs >= rhs, {"lhs": lhs, "rhs": rhs})
        _check_probe(pm, states, start_list, rep)
    else:
        reason = "bids differ from valuations" if not truthful else "epsilon exceeds v_min^2/(v_max-v_min)"
        for name in ("overallocation_margin", "payment_covers_shortfall", "probe_state"):
            rep.skip(name, reason)
    return rep


def _demand(buyer, payment, clock):
    if clock >= buyer.bid:
        return Fraction(0)
    if clock == 0 or buyer.budget is INF:
        return INF
    return (buyer.budget - payment) / clock


def _check_chain(pm: PreprocessedMarket, trace: TraceLog, states, rep: CheckReport) -> None:
    """Buyers that drop out on a price step, in reverse order, give a chain of tight sets."""
    final = trace.final
    drops = []  # (buyer, active set just before the drop)
    for k, (event, _) in enumerate(trace.entries, start=1):
        if isinstance(event, DemandEvent) and event.cause == "price":
            before = states[k - 2]  # state before the PriceEvent
            i = event.buyer
            if before.active() >> i & 1 and event.demand == 0 and states[k].clock(i) >= pm.buyers[i].bid:
                drops.append((i, before.active()))
    drops.reverse()
    vals = [b.valuation for b in pm.buyers]
    prev = 0
    for k, (i, X) in enumerate(drops, start=1):
        where = {"k": k, "dropped": pm.buyers[i].id, "X": _names(pm, X)}
        if not (prev & ~X == 0 and X != prev):
            rep.record("tight_chain", False, dict(where, reason="not strictly increasing"))
            return
        if _sum(final.x, X) != pm.gtab[X]:
            rep.record("tight_chain", False, dict(where, reason="not tight", allocated=_sum(final.x, X), supply=pm.gtab[X]))
            return
        if not (X >> i & 1) or prev >> i & 1:
            rep.record("tight_chain", False, dict(where, reason="dropped buyer outside the new layer"))
            return
        for l in bits(X & ~prev & ~(1 << i)):
            b = pm.buyers[l]
            if vals[l] < vals[i] or b.budget is INF or final.p[l] != b.budget:
                rep.record("tight_chain", False, dict(where, reason="layer member neither exhausted nor higher valued", buyer=b.id))
                return
        prev = X
    rep.record("tight_chain", prev == pm.full, {"reason": "chain does not end at all buyers", "top": _names(pm, prev)})


def _check_probe(pm, states, start_list, rep: CheckReport) -> None:
    """At the first iteration where every real clock has reached the lowest reserve value."""
    if pm.m == 0:
        rep.record("probe_state", True, note="no sellers")
        return
    target = min(pm.buyers[i].valuation for i in pm.virtual)
    for k in start_list:
        s = states[k]
        if all(s.clock(i) >= target for i in pm.real):
            real = pm.real_mask
            ok = _sum(s.x, real) == 0 and _sum(s.p, real) == 0
            rep.record("probe_state", ok, {"state": k, "x_real": _sum(s.x, real), "p_real": _sum(s.p, real)})
            return
    rep.record("probe_state", True, note="probe iteration not reached")


# ---------------------------------------------------------------------------
# efficiency


def welfare(pm: PreprocessedMarket, allocation) -> tuple:
    return liquid_welfare(pm, allocation.x_pre), social_welfare(pm, allocation.x_pre)


def check_efficiency(pm: PreprocessedMarket, allocation, opt: OptAllocation) -> CheckReport:
    rep = CheckReport()
    lw, sw = welfare(pm, allocation)
    values = {"lw_pca": lw, "sw_pca": sw, "lw_opt": opt.lw_opt}
    if not is_truthful(pm):
        rep.skip("lw_half_of_optimum", "bids differ from valuations")
        rep.skip("sw_above_lw_optimum", "bids differ from valuations")
        return rep
    if epsilon_gate(pm):
        rep.record("lw_half_of_optimum", 2 * lw >= opt.lw_opt, values)
    else:
        rep.skip("lw_half_of_optimum", "epsilon exceeds v_min^2/(v_max-v_min)")
    rep.record("sw_above_lw_optimum", sw >= opt.lw_opt, values)
    return rep


# ---------------------------------------------------------------------------
# incentive compatibility


def deviation_grid(instance: MarketInstance, step: Fraction) -> list:
    if not step > 0 or not is_multiple(step, instance.epsilon):
        raise ValueError(f"grid step {step} must be a positive multiple of epsilon {instance.epsilon}")
    top = 2 * max([b.valuation for b in instance.buyers] + [s.valuation for s in instance.sellers])
    out = []
    v = step
    while v <= top:
        out.append(v)
        v += step
    return out


def check_dsic(instance: MarketInstance, grid_step, mechanism: str = "pca") -> CheckReport:
    """Truthful bidding is never beaten by a unilateral deviation on the grid."""
    from .single_sample import run_mechanism

    rep = CheckReport()
    grid = deviation_grid(instance, Fraction(grid_step))
    if mechanism == "pca":
        def utility(inst, who):
            alloc, _ = run_pca(preprocess(inst))
            if who[0] == "buyer":
                b = inst.buyer(who[1])
                return b.valuation * alloc.goods[b.id] - alloc.p_f[b.id]
            raise ValueError("only buyers deviate under the plain auction")
        roles = [("buyer", b.id) for b in instance.buyers]
    elif mechanism == "single_sample":
        def utility(inst, who):
            alloc = run_mechanism(inst).allocation
            if who[0] == "buyer":
                b = inst.buyer(who[1])
                return b.valuation * alloc.goods[b.id] - alloc.p_f[b.id]
            s = inst.seller(who[1])
            return alloc.r_f[s.id] - s.valuation * alloc.sold(s.id)
        roles = [("buyer", b.id) for b in instance.buyers] + [("seller", s.id) for s in instance.sellers]
    else:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    truthful = instance
    for b in instance.buyers:
        truthful = truthful.replace_buyer(b.id, bid=b.valuation)
    for s in instance.sellers:
        truthful = truthful.replace_seller(s.id, bid=s.valuation)
    name = f"dsic_{mechanism}"
    for role, pid in roles:
        base = utility(truthful, (role, pid))
        for bid in grid:
            if role == "buyer":
                deviated = truthful.replace_buyer(pid, bid=bid)
            else:
                deviated = truthful.replace_seller(pid, bid=bid)
            u = utility(deviated, (role, pid))
            if not rep.record(name, u <= base, {"role": role, "id": pid, "bid": bid, "truthful_utility": base, "deviated_utility": u}):
                return rep
    rep.record(name, True)
    return rep


# ---------------------------------------------------------------------------
# pinned examples


def run_and_check(instance: MarketInstance, seller_values: str = "bids") -> tuple:
    pm = preprocess(instance, seller_values)
    alloc, trace = run_pca(pm)
    opt = optimal_lw_allocation(pm)
    rep = check_trace(pm, trace, alloc, opt)
    rep.merge(check_efficiency(pm, alloc, opt))
    return pm, alloc, trace, opt, rep


def reproduce_examples() -> CheckReport:
    from .scenarios import sample_pair, sample_pair_values, tight_lw_market, tight_lw_values
    from .single_sample import SampleProfile, pairwise_eval, run_mechanism

    rep = CheckReport()
    inst = tight_lw_market(1, 3)
    pm, alloc, trace, opt, trace_rep = run_and_check(inst)
    lw, _ = welfare(pm, alloc)
    want = tight_lw_values(1, 3)
    rep.record("tight_lw.lw_pca", lw == want["lw_pca"], {"got": lw, "expected": want["lw_pca"]})
    rep.record("tight_lw.lw_opt", opt.lw_opt == want["lw_opt"], {"got": opt.lw_opt, "expected": want["lw_opt"]})
    rep.record("tight_lw.half", 2 * lw == opt.lw_opt, {"lw_pca": lw, "lw_opt": opt.lw_opt})
    rep.record("tight_lw.winner", alloc.goods["2"] == 1 and alloc.p_f["2"] == 1,
               {"goods": alloc.goods["2"], "payment": alloc.p_f["2"]})
    rep.record("tight_lw.trace_checks", trace_rep.ok, {"failures": sorted(trace_rep.failures)})

    for k, delta in ((100, Fraction(1, 1000)), (2, Fraction(1, 100))):
        tag = f"sample_k{k}"
        inst, a, b = sample_pair(k, delta)
        pair = pairwise_eval(inst, a, b)
        want = sample_pair_values(k, delta)
        rep.record(f"{tag}.lw_sum", pair.lw_sum == want["lw_sum"], {"got": pair.lw_sum, "expected": want["lw_sum"]})
        rep.record(f"{tag}.opt_sum", pair.opt_sum == want["opt_sum"], {"got": pair.opt_sum, "expected": want["opt_sum"]})
        rep.record(f"{tag}.sw_sum", pair.sw_sum == want["sw_sum"], {"got": pair.sw_sum, "expected": want["sw_sum"]})
        rep.record(f"{tag}.lw_quarter", pair.lw_bound, {"lw_sum": pair.lw_sum, "opt_sum": pair.opt_sum})
        rep.record(f"{tag}.sw_half", pair.sw_bound, {"sw_sum": pair.sw_sum, "opt_sum": pair.opt_sum})
        rep.record(f"{tag}.decomposition",
                   pair.decomposition["relation_pca"] and pair.decomposition["relation_optimal"]
                   and pair.decomposition["buyer_identity"], dict(pair.decomposition))
        kept = run_mechanism(inst, SampleProfile(a, b))
        out = kept.allocation
        rep.record(f"{tag}.kept_case",
                   kept.kept == ("s",) and out.goods["2"] == 1 and kept.lw == 1 and kept.sw == k and out.r_f["s"] == 2 * delta,
                   {"kept": list(kept.kept), "goods_2": out.goods["2"], "lw": kept.lw, "sw": kept.sw, "revenue": out.r_f["s"]})
        dropped = run_mechanism(inst, SampleProfile(b, a))
        rep.record(f"{tag}.excluded_case",
                   dropped.kept == () and dropped.lw == 2 * delta and dropped.sw == 2 * delta,
                   {"kept": list(dropped.kept), "lw": dropped.lw, "sw": dropped.sw})
    return rep
