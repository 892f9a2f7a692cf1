"""Ascending-clock clinching auction for two-sided markets with polymatroid supply.

Every buyer (real or virtual) has a price clock that rises in steps of
``epsilon``, one buyer at a time in round-robin order. Before each step every
buyer with positive demand clinches the largest amount of goods it can take
without shrinking what the other buyers can still obtain. Virtual buyers stand
in for the sellers' reserve: what they clinch is cancelled at the end and
their payments are deducted from the seller's revenue.

The run is recorded as a :class:`TraceLog` of events with post-event state
snapshots; the verification harness works from that record.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .market import PreprocessedMarket
from .polymatroid import remnant_table, submasks, superset_min
from .rational import INF, ExtRat, format_rat


class ClinchError(RuntimeError):
    """An internal consistency check of the engine failed."""


class TraceIntegrityError(ValueError):
    """Replaying a trace does not reproduce its recorded final state."""


# ---------------------------------------------------------------------------
# state and events


@dataclass(frozen=True)
class AuctionState:
    ticks: tuple  # clock of buyer i is ticks[i] * epsilon
    demands: tuple
    w: tuple  # per edge of the preprocessed market
    x: tuple  # per buyer, x_i = w(E_i)
    p: tuple  # per buyer
    r: tuple  # per seller
    cursor: int  # 0-based index of the next buyer whose clock moves
    iteration: int
    epsilon: Fraction

    @property
    def clocks(self) -> tuple:
        return tuple(t * self.epsilon for t in self.ticks)

    def clock(self, i: int) -> Fraction:
        return self.ticks[i] * self.epsilon

    def active(self) -> int:
        """Bitmask of buyers with positive demand."""
        mask = 0
        for i, d in enumerate(self.demands):
            if d is INF or d > 0:
                mask |= 1 << i
        return mask

    def to_dict(self) -> dict:
        return {
            "clocks": [format_rat(c) for c in self.clocks],
            "demands": [format_rat(d) for d in self.demands],
            "w": [format_rat(v) for v in self.w],
            "x": [format_rat(v) for v in self.x],
            "p": [format_rat(v) for v in self.p],
            "r": [format_rat(v) for v in self.r],
            "cursor": self.cursor,
            "iteration": self.iteration,
        }

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class ClinchEvent:
    buyer: int
    amounts: tuple  # ((edge index, amount), ...) with positive amounts
    price: Fraction
    kind = "clinch"

    @property
    def total(self) -> Fraction:
        return sum((a for _, a in self.amounts), Fraction(0))


@dataclass(frozen=True)
class PriceEvent:
    buyer: int
    clock: Fraction
    kind = "price"


@dataclass(frozen=True)
class DemandEvent:
    buyer: int
    demand: ExtRat
    cause: str  # "clinch" or "price"; a price-caused update ends the iteration
    cursor: int
    kind = "demand"


@dataclass(frozen=True)
class JumpEvent:
    """Several clinch-free iterations collapsed into one state change."""

    iterations: int
    ticks: tuple
    demands: tuple
    cursor: int
    kind = "jump"


def apply_event(pm: PreprocessedMarket, state: AuctionState, event) -> AuctionState:
    if isinstance(event, ClinchEvent):
        w = list(state.w)
        r = list(state.r)
        total = Fraction(0)
        for k, amount in event.amounts:
            w[k] += amount
            r[pm.edges[k][1]] += event.price * amount
            total += amount
        x = list(state.x)
        p = list(state.p)
        x[event.buyer] += total
        p[event.buyer] += event.price * total
        return replace(state, w=tuple(w), x=tuple(x), p=tuple(p), r=tuple(r))
    if isinstance(event, PriceEvent):
        tick = event.clock / state.epsilon
        if tick.denominator != 1:
            raise TraceIntegrityError(f"clock {event.clock} is off the epsilon grid")
        ticks = list(state.ticks)
        ticks[event.buyer] = int(tick)
        return replace(state, ticks=tuple(ticks))
    if isinstance(event, DemandEvent):
        d = list(state.demands)
        d[event.buyer] = event.demand
        if event.cause == "price":
            return replace(state, demands=tuple(d), cursor=event.cursor, iteration=state.iteration + 1)
        return replace(state, demands=tuple(d))
    if isinstance(event, JumpEvent):
        return replace(
            state,
            ticks=event.ticks,
            demands=event.demands,
            cursor=event.cursor,
            iteration=state.iteration + event.iterations,
        )
    raise TypeError(f"unknown event {event!r}")


@dataclass
class TraceLog:
    initial: AuctionState
    entries: list = field(default_factory=list)  # [(event, post-event state)]

    @property
    def final(self) -> AuctionState:
        return self.entries[-1][1] if self.entries else self.initial

    def states(self):
        yield self.initial
        for _, s in self.entries:
            yield s

    def iteration_starts(self):
        """States at the start of each recorded iteration (before its clinch round)."""
        yield self.initial
        for event, s in self.entries:
            if isinstance(event, JumpEvent) or (isinstance(event, DemandEvent) and event.cause == "price"):
                yield s

    def clinches(self):
        """``(pre-state, event, post-state)`` for every clinch."""
        prev = self.initial
        for event, s in self.entries:
            if isinstance(event, ClinchEvent):
                yield prev, event, s
            prev = s

    def replay(self, pm: PreprocessedMarket) -> AuctionState:
        state = self.initial
        for event, _ in self.entries:
            state = apply_event(pm, state, event)
        return state

    def check_integrity(self, pm: PreprocessedMarket) -> None:
        if self.replay(pm) != self.final:
            raise TraceIntegrityError("replaying the events does not reproduce the recorded final state")

    def to_jsonl(self, pm: PreprocessedMarket) -> str:
        lines = []
        seq = 0
        for event, state in self.entries:
            base = {"kind": event.kind}
            if isinstance(event, ClinchEvent):
                for k, amount in event.amounts:
                    buyer, seller = pm.edge_ids[k]
                    rec = dict(base, buyer=buyer, edge=[buyer, seller], amount=format_rat(amount), clock=format_rat(event.price))
                    rec.update(seq=seq, snapshot_digest=state.digest())
                    lines.append(rec)
                    seq += 1
                continue
            if isinstance(event, PriceEvent):
                rec = dict(base, buyer=pm.buyers[event.buyer].id, clock=format_rat(event.clock))
            elif isinstance(event, DemandEvent):
                rec = dict(base, buyer=pm.buyers[event.buyer].id, amount=format_rat(event.demand), cause=event.cause)
            else:
                rec = dict(base, buyer=None, iterations=event.iterations)
            rec.update(seq=seq, snapshot_digest=state.digest())
            lines.append(rec)
            seq += 1
        ordered = []
        for rec in lines:
            head = {k: rec.pop(k) for k in ("seq", "kind", "buyer") if k in rec}
            digest = rec.pop("snapshot_digest")
            ordered.append(json.dumps({**head, **rec, "snapshot_digest": digest}))
        return "\n".join(ordered) + ("\n" if ordered else "")


# ---------------------------------------------------------------------------
# allocation


@dataclass(frozen=True)
class Allocation:
    """Final outcome: real trades, payments, seller revenues and goods held."""

    w_f: dict  # (buyer id, seller id) -> amount, real edges only
    p_f: dict  # real buyer id -> payment
    r_f: dict  # seller id -> revenue
    goods: dict  # buyer id -> goods received; seller id -> goods retained
    x_pre: tuple  # per preprocessed buyer (virtual entries = retained goods)

    def sold(self, seller_id: str) -> Fraction:
        return sum((a for (b, s), a in self.w_f.items() if s == seller_id), Fraction(0))

    def to_dict(self) -> dict:
        return {
            "trades": [[b, s, format_rat(a)] for (b, s), a in self.w_f.items()],
            "payments": {k: format_rat(v) for k, v in self.p_f.items()},
            "revenues": {k: format_rat(v) for k, v in self.r_f.items()},
            "goods": {k: format_rat(v) for k, v in self.goods.items()},
        }


def finalize(pm: PreprocessedMarket, state: AuctionState) -> Allocation:
    w_f = {}
    for k, (i, j) in enumerate(pm.edges):
        if i < pm.n_real:
            w_f[pm.edge_ids[k]] = state.w[k]
    p_f = {pm.buyers[i].id: state.p[i] for i in pm.real}
    r_f = {}
    goods = {pm.buyers[i].id: state.x[i] for i in pm.real}
    for j, s in enumerate(pm.sellers):
        r_f[s.id] = state.r[j] - state.p[pm.n_real + j]
        sold = sum((state.w[k] for k in pm.local[j][:-1]), Fraction(0))
        goods[s.id] = pm.supply(j) - sold
    return Allocation(w_f, p_f, r_f, goods, state.x)


# ---------------------------------------------------------------------------
# engine


def next_demand(buyer, payment: Fraction, clock: Fraction) -> ExtRat:
    """Demand at the given clock: 0 once the clock reaches the bid, else ``(B - p) / c``."""
    if clock >= buyer.bid:
        return Fraction(0)
    if clock == 0 or buyer.budget is INF:
        return INF
    return (buyer.budget - payment) / clock


class _Engine:
    def __init__(self, pm: PreprocessedMarket, fast_forward: bool = True):
        self.pm = pm
        self.eps = pm.epsilon
        self.fast_forward = fast_forward
        n = pm.n
        self.bid_ticks = []
        for b in pm.buyers:
            t = b.bid / self.eps
            if t.denominator != 1:
                raise ClinchError(f"bid of {b.id} is not a multiple of epsilon")
            self.bid_ticks.append(int(t))
        self.state = AuctionState(
            ticks=(0,) * n,
            demands=(INF,) * n,
            w=(Fraction(0),) * len(pm.edges),
            x=(Fraction(0),) * n,
            p=(Fraction(0),) * n,
            r=(Fraction(0),) * pm.m,
            cursor=0,
            iteration=0,
            epsilon=self.eps,
        )
        self.trace = TraceLog(self.state)
        vmin = min((pm.buyers[i].valuation for i in pm.virtual), default=None)
        self.probe_ticks = None if vmin is None else vmin / self.eps

    def emit(self, event) -> None:
        self.state = apply_event(self.pm, self.state, event)
        self.trace.entries.append((event, self.state))

    # --- clinching -------------------------------------------------------

    def remnant(self) -> list:
        s = self.state
        return remnant_table(self.pm.gtab, s.x, s.demands)

    def clinch_round(self) -> bool:
        pm = self.pm
        clinched = False
        table = None
        for i in range(pm.n):
            d = self.state.demands[i]
            if d is not INF and d == 0:
                continue
            if table is None:
                table = self.remnant()
            total = table[pm.full] - table[pm.full ^ (1 << i)]
            if total < 0:
                raise ClinchError(f"negative clinch total for {pm.buyers[i].id}")
            if total == 0:
                continue
            amounts = self.split(i, total)
            price = self.state.clock(i)
            self.emit(ClinchEvent(i, amounts, price))
            self.check_supply()
            buyer = pm.buyers[i]
            self.emit(DemandEvent(i, next_demand(buyer, self.state.p[i], price), "clinch", self.state.cursor))
            clinched = True
            table = None
        return clinched

    def split(self, i: int, total: Fraction) -> tuple:
        """Per-edge clinch of buyer ``i``, greedy over its sellers in ascending order."""
        rank = EdgeRank(self.pm, self.state.w, self.state.demands)
        pm = self.pm
        others = [pm.cover[pm.full ^ (1 << i)][j] for j in range(pm.m)]
        base = rank(others)
        amounts = []
        acc = list(others)
        for k in pm.buyer_edges[i]:
            j, pos = pm.local_pos[k]
            acc[j] |= 1 << pos
            value = rank(acc)
            if value > base:
                amounts.append((k, value - base))
            base = value
        got = sum((a for _, a in amounts), Fraction(0))
        if got != total:
            raise ClinchError(
                f"edge split for {pm.buyers[i].id} sums to {got}, aggregated total is {total}"
            )
        return tuple(amounts)

    def check_supply(self) -> None:
        pm = self.pm
        w = self.state.w
        for j in range(pm.m):
            local = pm.local[j]
            vals = [w[k] for k in local]
            tab = pm.ftab[j]
            for lm in range(1 << len(local)):
                used = sum((vals[p] for p in range(len(local)) if lm >> p & 1), Fraction(0))
                if used > tab[lm]:
                    raise ClinchError(f"transactions exceed the supply of seller {pm.sellers[j].id}")

    # --- clocks ----------------------------------------------------------

    def step_clock(self) -> None:
        pm = self.pm
        l = self.state.cursor
        clock = (self.state.ticks[l] + 1) * self.eps
        self.emit(PriceEvent(l, clock))
        self.emit(DemandEvent(l, next_demand(pm.buyers[l], self.state.p[l], clock), "price", (l + 1) % pm.n))

    def probe_passed(self) -> bool:
        if self.probe_ticks is None:
            return True
        return all(self.state.ticks[i] >= self.probe_ticks for i in self.pm.real)

    def jump_to_end(self) -> None:
        """Run the remaining clinch-free iterations, collapsing the gaps between drops."""
        pm = self.pm
        n = pm.n
        while self.state.active():
            s = self.state
            drops = []
            for i in range(n):
                if s.active() >> i & 1:
                    remaining = self.bid_ticks[i] - s.ticks[i]
                    offset = (i - s.cursor) % n + (remaining - 1) * n
                    drops.append((offset, i))
            offset, i = min(drops)
            if offset > 0:
                ticks = list(s.ticks)
                demands = list(s.demands)
                for l in range(n):
                    steps = (offset - (l - s.cursor) % n + n - 1) // n if offset > (l - s.cursor) % n else 0
                    if steps:
                        ticks[l] += steps
                        demands[l] = next_demand(pm.buyers[l], s.p[l], ticks[l] * self.eps)
                self.emit(JumpEvent(offset, tuple(ticks), tuple(demands), (s.cursor + offset) % n))
            if self.state.cursor != i:
                raise ClinchError("fast-forward lost track of the round-robin cursor")
            self.step_clock()

    def run(self) -> TraceLog:
        pm = self.pm
        limit = (max(self.bid_ticks, default=0) + 1) * pm.n + pm.n
        dirty = True
        while self.state.active():
            if self.state.iteration > limit:
                raise ClinchError("auction did not terminate within the iteration guard")
            if dirty:
                dirty = self.clinch_round()
            if self.fast_forward and not dirty and self.probe_passed() and self.remnant()[pm.full] == 0:
                self.jump_to_end()
                break
            before = self.state.demands[self.state.cursor]
            self.step_clock()
            after = self.state.demands[(self.state.cursor - 1) % pm.n]
            if before != after:
                dirty = True
        return self.trace


class EdgeRank:
    """Rank function of the remnant supply polytope on edges.

    For a set ``A`` of edges (given as per-seller local masks) this is
    ``min over buyer sets T`` of ``sum_j fw_j(A_j minus T's edges) + d(T)`` where
    ``fw_j`` is seller ``j``'s capacity contracted by the current transactions.
    """

    def __init__(self, pm: PreprocessedMarket, w, demands):
        self.pm = pm
        self.fw = []
        for j in range(pm.m):
            local = pm.local[j]
            size = len(local)
            vals = [w[k] for k in local]
            table = []
            for lm in range(1 << size):
                used = sum((vals[p] for p in range(size) if lm >> p & 1), Fraction(0))
                table.append(pm.ftab[j][lm] - used)
            self.fw.append(superset_min(table, size))
        self.finite = 0
        for i, d in enumerate(demands):
            if d is not INF:
                self.finite |= 1 << i
        self.demands = demands

    def __call__(self, local_masks) -> Fraction:
        pm = self.pm
        best = None
        for t in submasks(self.finite):
            cover = pm.cover[t]
            value = Fraction(0)
            for j in range(pm.m):
                value += self.fw[j][local_masks[j] & ~cover[j]]
            for i in range(pm.n):
                if t >> i & 1:
                    value += self.demands[i]
            if best is None or value < best:
                best = value
        return best


def run_pca(pm: PreprocessedMarket, fast_forward: bool = True) -> tuple:
    """Run the auction; returns ``(Allocation, TraceLog)``."""
    trace = _Engine(pm, fast_forward).run()
    return finalize(pm, trace.final), trace
