"""Two-sided market instances, their JSON format, validation and preprocessing.

A market has real buyers with per-unit valuations, bids and budgets, and
sellers whose goods are constrained by a polymatroid over their incident edges.
Preprocessing adds one virtual buyer per seller: the virtual buyer bids the
seller's price (or its sample), has an unbounded budget, and any goods it ends
up with are the seller's unsold goods.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import ceil
from typing import Iterable, Mapping

from .polymatroid import GroundSet, SubmodularOracle, bits, guard, verify_oracle
from .rational import INF, ExtRat, format_rat, is_multiple, parse_rat, rat_gcd


class InstanceError(ValueError):
    """Malformed instance document; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class ConfigurationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# seller capacities
#
# A capacity maps a set of incident buyer ids (the seller's edges) to the
# amount the seller can supply through those edges.


@dataclass(frozen=True)
class RankCapacity:
    """``min(|F| * unit, cap)``."""

    unit: Fraction
    cap: Fraction
    kind = "rank"

    def value(self, buyers: frozenset) -> Fraction:
        return min(len(buyers) * self.unit, self.cap)

    def to_json(self, incident) -> dict:
        return {"kind": "rank", "unit": format_rat(self.unit), "cap": format_rat(self.cap)}


@dataclass(frozen=True)
class AdditiveCapacity:
    """Sum of per-edge caps, keyed by buyer id."""

    caps: tuple  # ((buyer_id, Fraction), ...)
    kind = "additive"

    def value(self, buyers: frozenset) -> Fraction:
        return sum((c for b, c in self.caps if b in buyers), Fraction(0))

    def to_json(self, incident) -> dict:
        return {"kind": "additive", "caps": {b: format_rat(c) for b, c in self.caps}}


@dataclass(frozen=True)
class TableCapacity:
    """Explicit value for every subset of the seller's incident buyers."""

    table: tuple  # ((frozenset(buyer ids), Fraction), ...)
    kind = "table"

    def __post_init__(self):
        object.__setattr__(self, "_lookup", dict(self.table))

    def value(self, buyers: frozenset) -> Fraction:
        try:
            return self._lookup[frozenset(buyers)]
        except KeyError:
            raise InstanceError("capacity", f"table has no entry for {sorted(buyers)}") from None

    def to_json(self, incident) -> dict:
        order = {b: k for k, b in enumerate(incident)}
        rows = sorted(self.table, key=lambda kv: (sum(1 << order.get(b, 0) for b in kv[0]), sorted(kv[0])))
        return {
            "kind": "table",
            "table": [[sorted(s, key=lambda b: order.get(b, 0)), format_rat(v)] for s, v in rows],
        }

    @classmethod
    def from_function(cls, incident, fn) -> "TableCapacity":
        ground = GroundSet(incident)
        return cls(tuple((ground.subset(m), Fraction(fn(ground.subset(m)))) for m in range(ground.full + 1)))


Capacity = RankCapacity | AdditiveCapacity | TableCapacity


# ---------------------------------------------------------------------------
# participants and instances


@dataclass(frozen=True)
class Buyer:
    id: str
    valuation: Fraction
    bid: Fraction
    budget: ExtRat


@dataclass(frozen=True)
class Seller:
    id: str
    valuation: Fraction
    bid: Fraction
    capacity: Capacity
    sample: Fraction | None = None


@dataclass(frozen=True)
class MarketInstance:
    buyers: tuple
    sellers: tuple
    edges: tuple  # ((buyer_id, seller_id), ...)
    epsilon: Fraction

    def buyer(self, buyer_id: str) -> Buyer:
        for b in self.buyers:
            if b.id == buyer_id:
                return b
        raise KeyError(buyer_id)

    def seller(self, sid: str) -> Seller:
        for s in self.sellers:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def incident(self, sid: str) -> tuple:
        """Buyer ids adjacent to seller ``sid``, in buyer order."""
        adjacent = {b for b, s in self.edges if s == sid}
        return tuple(b.id for b in self.buyers if b.id in adjacent)

    def capacity_oracle(self, sid: str) -> SubmodularOracle:
        seller = self.seller(sid)
        return SubmodularOracle.from_sets(GroundSet(self.incident(sid)), seller.capacity.value, name=f"f[{sid}]")

    def supply(self, sid: str) -> Fraction:
        return self.seller(sid).capacity.value(frozenset(self.incident(sid)))

    def replace_buyer(self, buyer_id: str, **changes) -> "MarketInstance":
        return replace(self, buyers=tuple(replace(b, **changes) if b.id == buyer_id else b for b in self.buyers))

    def replace_seller(self, seller_id: str, **changes) -> "MarketInstance":
        return replace(self, sellers=tuple(replace(s, **changes) if s.id == seller_id else s for s in self.sellers))

    def restrict_sellers(self, keep: Iterable[str]) -> "MarketInstance":
        """Submarket on the given sellers; all buyers stay, edges to dropped sellers go."""
        keep = set(keep)
        return replace(
            self,
            sellers=tuple(s for s in self.sellers if s.id in keep),
            edges=tuple(e for e in self.edges if e[1] in keep),
        )


# ---------------------------------------------------------------------------
# JSON format


def _rat(value, path: str, allow_inf: bool = False) -> ExtRat:
    if not isinstance(value, (str, int)) or isinstance(value, bool):
        raise InstanceError(path, f"expected a rational string, got {value!r}")
    try:
        r = parse_rat(str(value))
    except ValueError as exc:
        raise InstanceError(path, str(exc)) from None
    if r is INF and not allow_inf:
        raise InstanceError(path, "infinity is not allowed here")
    return r


def _field(obj: Mapping, key: str, path: str):
    if not isinstance(obj, Mapping):
        raise InstanceError(path, "expected an object")
    if key not in obj:
        raise InstanceError(f"{path}.{key}", "missing field")
    return obj[key]


def _ident(value, path: str) -> str:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise InstanceError(path, f"ids must be strings, got {value!r}")
    return str(value)


def _capacity(doc, path: str, incident: tuple) -> Capacity:
    kind = _field(doc, "kind", path)
    if kind == "rank":
        return RankCapacity(_rat(_field(doc, "unit", path), f"{path}.unit"), _rat(_field(doc, "cap", path), f"{path}.cap"))
    if kind == "additive":
        caps = _field(doc, "caps", path)
        if not isinstance(caps, Mapping):
            raise InstanceError(f"{path}.caps", "expected an object keyed by buyer id")
        extra = set(caps) - set(incident)
        if extra:
            raise InstanceError(f"{path}.caps", f"buyers without an edge to this seller: {sorted(extra)}")
        return AdditiveCapacity(tuple((b, _rat(caps.get(b, "0"), f"{path}.caps.{b}")) for b in incident))
    if kind == "table":
        rows = _field(doc, "table", path)
        if not isinstance(rows, list):
            raise InstanceError(f"{path}.table", "expected a list of [subset, value] rows")
        table = {}
        for k, row in enumerate(rows):
            rpath = f"{path}.table[{k}]"
            if not (isinstance(row, list) and len(row) == 2 and isinstance(row[0], list)):
                raise InstanceError(rpath, "expected [[buyer ids...], value]")
            subset = frozenset(_ident(b, rpath) for b in row[0])
            if not subset <= set(incident):
                raise InstanceError(rpath, f"buyers without an edge to this seller: {sorted(subset - set(incident))}")
            if subset in table:
                raise InstanceError(rpath, "duplicate subset")
            table[subset] = _rat(row[1], f"{rpath}[1]")
        ground = GroundSet(incident)
        for m in range(ground.full + 1):
            if ground.subset(m) not in table:
                raise InstanceError(f"{path}.table", f"missing subset {list(ground.ordered(m))}")
        return TableCapacity(tuple((ground.subset(m), table[ground.subset(m)]) for m in range(ground.full + 1)))
    raise InstanceError(f"{path}.kind", f"unknown capacity kind {kind!r}")


def instance_from_dict(doc) -> MarketInstance:
    if not isinstance(doc, Mapping):
        raise InstanceError("$", "expected a JSON object")
    buyers = []
    for k, b in enumerate(_field(doc, "buyers", "$")):
        path = f"$.buyers[{k}]"
        buyers.append(
            Buyer(
                id=_ident(_field(b, "id", path), f"{path}.id"),
                valuation=_rat(_field(b, "valuation", path), f"{path}.valuation"),
                bid=_rat(b.get("bid", b.get("valuation")), f"{path}.bid"),
                budget=_rat(_field(b, "budget", path), f"{path}.budget", allow_inf=True),
            )
        )
    raw_edges = _field(doc, "edges", "$")
    if not isinstance(raw_edges, list):
        raise InstanceError("$.edges", "expected a list of [buyer, seller] pairs")
    edges = []
    for k, e in enumerate(raw_edges):
        if not (isinstance(e, list) and len(e) == 2):
            raise InstanceError(f"$.edges[{k}]", "expected [buyer, seller]")
        edges.append((_ident(e[0], f"$.edges[{k}][0]"), _ident(e[1], f"$.edges[{k}][1]")))
    buyer_ids = [b.id for b in buyers]
    sellers = []
    for k, s in enumerate(_field(doc, "sellers", "$")):
        path = f"$.sellers[{k}]"
        sid = _ident(_field(s, "id", path), f"{path}.id")
        adjacent = {b for b, t in edges if t == sid}
        incident = tuple(b for b in buyer_ids if b in adjacent)
        sample = s.get("sample") if isinstance(s, Mapping) else None
        sellers.append(
            Seller(
                id=sid,
                valuation=_rat(_field(s, "valuation", path), f"{path}.valuation"),
                bid=_rat(s.get("bid", s.get("valuation")), f"{path}.bid"),
                capacity=_capacity(_field(s, "capacity", path), f"{path}.capacity", incident),
                sample=None if sample is None else _rat(sample, f"{path}.sample"),
            )
        )
    eps = doc.get("epsilon")
    inst = MarketInstance(tuple(buyers), tuple(sellers), tuple(edges), Fraction(0))
    if eps is None:
        return replace(inst, epsilon=default_epsilon(inst))
    return replace(inst, epsilon=_rat(eps, "$.epsilon"))


def parse_instance(text: str) -> MarketInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return instance_from_dict(doc)


def instance_to_dict(inst: MarketInstance) -> dict:
    sellers = []
    for s in inst.sellers:
        entry = {"id": s.id, "valuation": format_rat(s.valuation), "bid": format_rat(s.bid)}
        if s.sample is not None:
            entry["sample"] = format_rat(s.sample)
        entry["capacity"] = s.capacity.to_json(inst.incident(s.id))
        sellers.append(entry)
    return {
        "epsilon": format_rat(inst.epsilon),
        "buyers": [
            {"id": b.id, "valuation": format_rat(b.valuation), "bid": format_rat(b.bid), "budget": format_rat(b.budget)}
            for b in inst.buyers
        ],
        "sellers": sellers,
        "edges": [[b, s] for b, s in inst.edges],
    }


def serialize_instance(inst: MarketInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2, ensure_ascii=False) + "\n"


def load_instance(path: str) -> MarketInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)  # (entity id, message)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def first(self):
        return self.errors[0] if self.errors else None

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "errors": [{"entity": e, "message": m} for e, m in self.errors],
            "warnings": [{"entity": e, "message": m} for e, m in self.warnings],
        }


def validate(inst: MarketInstance) -> ValidationReport:
    rep = ValidationReport()
    err = lambda who, msg: rep.errors.append((who, msg))
    eps = inst.epsilon
    if not eps > 0:
        err("epsilon", f"epsilon must be positive, got {format_rat(eps)}")
    seen = set()
    for b in inst.buyers:
        if b.id in seen:
            err(b.id, "duplicate buyer id")
        seen.add(b.id)
        if b.id.startswith(VIRTUAL_PREFIX):
            err(b.id, f"buyer ids may not start with {VIRTUAL_PREFIX!r}")
        if not b.valuation > 0:
            err(b.id, "valuation must be positive")
        if not b.bid > 0:
            err(b.id, "bid must be positive")
        elif eps > 0 and not is_multiple(b.bid, eps):
            err(b.id, f"bid {format_rat(b.bid)} is not a multiple of epsilon {format_rat(eps)}")
        if b.budget is INF:
            rep.warnings.append((b.id, "real buyer has an unbounded budget"))
        elif b.budget < 0:
            err(b.id, "budget must be nonnegative")
    sseen = set()
    for s in inst.sellers:
        if s.id in sseen:
            err(s.id, "duplicate seller id")
        sseen.add(s.id)
        if not s.valuation > 0:
            err(s.id, "valuation must be positive")
        for label, value in (("bid", s.bid), ("sample", s.sample)):
            if value is None:
                continue
            if not value > 0:
                err(s.id, f"{label} must be positive")
            elif eps > 0 and not is_multiple(value, eps):
                err(s.id, f"{label} {format_rat(value)} is not a multiple of epsilon {format_rat(eps)}")
    for sid in sorted(seen & sseen):
        err(sid, "id is used by both a buyer and a seller")
    edge_seen = set()
    for b, s in inst.edges:
        if b not in seen:
            err(f"{b}-{s}", f"edge references unknown buyer {b!r}")
        if s not in sseen:
            err(f"{b}-{s}", f"edge references unknown seller {s!r}")
        if (b, s) in edge_seen:
            err(f"{b}-{s}", "duplicate edge")
        edge_seen.add((b, s))
    if not rep.ok:
        return rep
    for s in inst.sellers:
        incident = inst.incident(s.id)
        if not incident:
            err(s.id, "seller has no edges")
            continue
        try:
            guard(len(incident) + 1)
            report = verify_oracle(inst.capacity_oracle(s.id))
        except (ValueError, InstanceError) as exc:
            err(s.id, str(exc))
            continue
        for axiom in ("normalized", "finite", "monotone", "submodular"):
            if not getattr(report, axiom):
                err(s.id, f"capacity is not {axiom}: {report.witnesses.get(axiom)}")
    return rep


def default_epsilon(inst: MarketInstance) -> Fraction:
    """Largest common grid step of all bids that also respects the efficiency condition.

    The condition is ``eps <= v_min**2 / (v_max - v_min)`` over buyer valuations
    and seller valuations.
    """
    bids = [b.bid for b in inst.buyers] + [s.bid for s in inst.sellers]
    bids += [s.sample for s in inst.sellers if s.sample is not None]
    bids = [Fraction(v) for v in bids if v > 0]
    if not bids:
        return Fraction(1)
    eps = rat_gcd(bids)
    bound = efficiency_bound([b.valuation for b in inst.buyers] + [s.valuation for s in inst.sellers])
    if bound is not None and eps > bound:
        eps = eps / ceil(eps / bound)
    return eps


def efficiency_bound(valuations) -> Fraction | None:
    """``v_min**2 / (v_max - v_min)``, or None when all valuations coincide."""
    vals = [Fraction(v) for v in valuations]
    if not vals:
        return None
    lo, hi = min(vals), max(vals)
    if hi == lo:
        return None
    return lo * lo / (hi - lo)


# ---------------------------------------------------------------------------
# preprocessing

VIRTUAL_PREFIX = "virtual:"


@dataclass(frozen=True)
class MarketBuyer:
    """A buyer of the preprocessed market (real or virtual)."""

    id: str
    valuation: Fraction
    bid: Fraction
    budget: ExtRat
    virtual: bool
    seller: int | None = None  # seller index for virtual buyers


class PreprocessedMarket:
    """Working form of a market: real buyers, then one virtual buyer per seller.

    Edges are indexed ``0..|E|-1`` grouped by buyer (buyer order) and, within a
    buyer, by ascending seller index. ``local[j]`` lists seller ``j``'s edge
    indices (virtual edge last) and ``ftab[j]`` is the modified capacity table
    over local masks. ``gtab`` is the buyer-level table ``S -> f(E_S)``.
    """

    def __init__(self, instance: MarketInstance, seller_values: str = "bids"):
        if seller_values not in ("bids", "samples"):
            raise ConfigurationError(f"seller_values must be 'bids' or 'samples', not {seller_values!r}")
        self.instance = instance
        self.seller_values = seller_values
        self.epsilon = instance.epsilon
        buyers = [MarketBuyer(b.id, b.valuation, b.bid, b.budget, False) for b in instance.buyers]
        for j, s in enumerate(instance.sellers):
            if seller_values == "samples":
                if s.sample is None:
                    raise ConfigurationError(f"seller {s.id!r} has no sample")
                value = bid = s.sample
            else:
                value, bid = s.valuation, s.bid
            buyers.append(MarketBuyer(VIRTUAL_PREFIX + s.id, value, bid, INF, True, j))
        self.buyers = tuple(buyers)
        self.n_real = len(instance.buyers)
        self.n = len(buyers)
        self.sellers = instance.sellers
        self.m = len(self.sellers)
        guard(self.n)
        self.buyer_ground = GroundSet(b.id for b in self.buyers)
        bindex = {b.id: i for i, b in enumerate(instance.buyers)}
        sindex = {s.id: j for j, s in enumerate(self.sellers)}
        pairs = [(bindex[b], sindex[s]) for b, s in instance.edges]
        pairs += [(self.n_real + j, j) for j in range(self.m)]
        pairs.sort()
        self.edges = tuple(pairs)
        self.edge_ids = tuple((self.buyers[i].id, self.sellers[j].id) for i, j in pairs)
        self.edge_ground = GroundSet(self.edge_ids)
        self.buyer_edges = tuple(tuple(k for k, (i, _) in enumerate(pairs) if i == b) for b in range(self.n))
        self.local = []
        self.local_pos = {}
        for j in range(self.m):
            local = [k for k, (i, s) in enumerate(pairs) if s == j and i < self.n_real]
            local.append(next(k for k, (i, s) in enumerate(pairs) if s == j and i >= self.n_real))
            for pos, k in enumerate(local):
                self.local_pos[k] = (j, pos)
            self.local.append(tuple(local))
        self.ftab = []
        for j, s in enumerate(self.sellers):
            local = self.local[j]
            guard(len(local))
            real = [self.buyers[pairs[k][0]].id for k in local[:-1]]
            full_real = s.capacity.value(frozenset(real))
            vbit = 1 << (len(local) - 1)
            table = []
            for lm in range(1 << len(local)):
                if lm & vbit:
                    table.append(full_real)
                else:
                    table.append(s.capacity.value(frozenset(real[p] for p in bits(lm))))
            self.ftab.append(table)
        # buyer-level: local mask of seller j covered by a buyer set
        self.buyer_local = [[0] * self.m for _ in range(self.n)]
        for k, (i, j) in enumerate(pairs):
            self.buyer_local[i][j] |= 1 << self.local_pos[k][1]
        gtab = [Fraction(0)] * (1 << self.n)
        cover = [[0] * self.m for _ in range(1 << self.n)]
        for mask in range(1, 1 << self.n):
            low = mask & -mask
            i = low.bit_length() - 1
            prev = cover[mask ^ low]
            cur = [prev[j] | self.buyer_local[i][j] for j in range(self.m)]
            cover[mask] = cur
            gtab[mask] = sum((self.ftab[j][cur[j]] for j in range(self.m)), Fraction(0))
        self.gtab = gtab
        self.cover = cover  # cover[S][j]: local mask of seller j's edges owned by buyers S
        self.g = SubmodularOracle(self.buyer_ground, gtab.__getitem__, name="g")
        self.f = SubmodularOracle(self.edge_ground, self._f_value, name="f")

    def _f_value(self, emask: int) -> Fraction:
        local = [0] * self.m
        for k in bits(emask):
            j, pos = self.local_pos[k]
            local[j] |= 1 << pos
        return sum((self.ftab[j][local[j]] for j in range(self.m)), Fraction(0))

    def seller_oracle(self, j: int) -> SubmodularOracle:
        ground = GroundSet(self.edge_ids[k] for k in self.local[j])
        return SubmodularOracle(ground, self.ftab[j].__getitem__, name=f"f[{self.sellers[j].id}]")

    @property
    def real(self) -> range:
        return range(self.n_real)

    @property
    def virtual(self) -> range:
        return range(self.n_real, self.n)

    @property
    def real_mask(self) -> int:
        return (1 << self.n_real) - 1

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def supply(self, j: int) -> Fraction:
        return self.ftab[j][(1 << len(self.local[j])) - 1]

    def index(self, buyer_id: str) -> int:
        return self.buyer_ground.index[buyer_id]


def preprocess(instance: MarketInstance, seller_values: str = "bids") -> PreprocessedMarket:
    return PreprocessedMarket(instance, seller_values)
