"""Exact polymatroid machinery over small, ordered ground sets.

Subsets are handled internally as integer bitmasks over the positions of a
:class:`GroundSet`; the public helpers also accept any iterable of element
ids. Every routine here is exhaustive (subset enumeration), so ground sets are
guarded by :func:`enumeration_limit`.

The module has two layers:

* reference routines (``membership``, ``contract_rank``, ``reduce_by_caps``,
  ``remnant_rank``, ``remnant_rank_simple``, ``intersection_max``,
  ``greedy_max``) that follow the defining min-formulas literally, and
* table routines (``superset_min``, ``remnant_table``) that compute the same
  quantities for all subsets at once by dynamic programming. The auction engine
  uses the tables; the tests pin the two layers against each other.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from .rational import INF, ExtRat

HARD_LIMIT = 20
DEFAULT_LIMIT = 16


class EnumerationError(ValueError):
    """Raised when a ground set is too large for exhaustive enumeration."""


class ContractViolation(ValueError):
    """Raised when an operation's precondition does not hold."""


def enumeration_limit() -> int:
    """Largest ground set enumerated exhaustively (``CLINCH_MAX_GROUND``, capped at 20)."""
    raw = os.environ.get("CLINCH_MAX_GROUND")
    if raw is None:
        return DEFAULT_LIMIT
    try:
        value = int(raw)
    except ValueError as exc:
        raise EnumerationError(f"CLINCH_MAX_GROUND must be an integer, got {raw!r}") from exc
    return max(0, min(value, HARD_LIMIT))


def guard(size: int, limit: int | None = None) -> None:
    limit = enumeration_limit() if limit is None else limit
    if size > limit:
        raise EnumerationError(
            f"ground set of size {size} exceeds the enumeration guard ({limit})"
        )


def bits(mask: int):
    """Yield the positions of the set bits of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def submasks(mask: int):
    """Yield every submask of ``mask``, including ``mask`` and 0."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def supermasks(mask: int, full: int):
    """Yield every ``S`` with ``mask ⊆ S ⊆ full``."""
    free = full & ~mask
    for extra in submasks(free):
        yield mask | extra


class GroundSet:
    """Ordered finite set of hashable ids; the order fixes all tie-breaking."""

    __slots__ = ("elements", "index")

    def __init__(self, elements: Iterable[Hashable]):
        self.elements = tuple(elements)
        self.index = {e: i for i, e in enumerate(self.elements)}
        if len(self.index) != len(self.elements):
            raise ValueError("ground set ids must be unique")

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, item):
        return item in self.index

    def __eq__(self, other):
        return isinstance(other, GroundSet) and self.elements == other.elements

    def __hash__(self):
        return hash(self.elements)

    def __repr__(self):
        return f"GroundSet({list(self.elements)!r})"

    @property
    def full(self) -> int:
        return (1 << len(self.elements)) - 1

    def mask(self, subset: Iterable[Hashable] | int) -> int:
        if isinstance(subset, int):
            if subset < 0 or subset > self.full:
                raise ContractViolation(f"mask {subset} outside ground set")
            return subset
        m = 0
        for e in subset:
            try:
                m |= 1 << self.index[e]
            except KeyError:
                raise ContractViolation(f"{e!r} is not in the ground set") from None
        return m

    def subset(self, mask: int) -> frozenset:
        return frozenset(self.elements[i] for i in bits(mask))

    def ordered(self, mask: int) -> tuple:
        return tuple(self.elements[i] for i in bits(mask))

    def vector(self, values: Mapping[Hashable, ExtRat] | Sequence[ExtRat]) -> list:
        """Positional list of a vector given as a mapping (missing ids are 0) or sequence."""
        if isinstance(values, Mapping):
            unknown = set(values) - set(self.index)
            if unknown:
                raise ContractViolation(f"vector has ids outside the ground set: {sorted(map(str, unknown))}")
            return [values.get(e, Fraction(0)) for e in self.elements]
        values = list(values)
        if len(values) != len(self.elements):
            raise ContractViolation("vector length does not match the ground set")
        return values


class SubmodularOracle:
    """Value oracle of a set function on a :class:`GroundSet`.

    ``fn`` maps a bitmask to an exact value. Values are memoised, so ``fn``
    must be pure. The monotone-submodular contract is not checked on
    construction; see :func:`verify_oracle`.
    """

    def __init__(self, ground: GroundSet, fn: Callable[[int], Fraction], name: str = ""):
        self.ground = ground
        self._fn = fn
        self._cache: dict[int, Fraction] = {}
        self.name = name

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<SubmodularOracle{label} on {len(self.ground)} elements>"

    def value(self, mask: int) -> Fraction:
        try:
            return self._cache[mask]
        except KeyError:
            v = self._fn(mask)
            self._cache[mask] = v
            return v

    def __call__(self, subset: Iterable[Hashable] | int = ()) -> Fraction:
        return self.value(self.ground.mask(subset))

    def table(self) -> list:
        guard(len(self.ground))
        return [self.value(m) for m in range(self.ground.full + 1)]

    @classmethod
    def from_table(cls, ground: GroundSet, table: Mapping[frozenset, Fraction] | Sequence[Fraction], name=""):
        if isinstance(table, Mapping):
            values = {ground.mask(k): Fraction(v) for k, v in table.items()}
            missing = [m for m in range(ground.full + 1) if m not in values]
            if missing:
                raise ContractViolation(
                    f"table is missing {len(missing)} subsets, e.g. {sorted(map(str, ground.subset(missing[0])))}"
                )
            return cls(ground, values.__getitem__, name)
        values = [Fraction(v) for v in table]
        if len(values) != ground.full + 1:
            raise ContractViolation("table length must be 2**|ground|")
        return cls(ground, values.__getitem__, name)

    @classmethod
    def from_sets(cls, ground: GroundSet, fn: Callable[[frozenset], Fraction], name=""):
        return cls(ground, lambda m: Fraction(fn(ground.subset(m))), name)


@dataclass
class OracleReport:
    normalized: bool
    monotone: bool
    submodular: bool
    finite: bool
    witnesses: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.normalized and self.monotone and self.submodular and self.finite


def verify_oracle(f: SubmodularOracle) -> OracleReport:
    """Exhaustively check normalisation, monotonicity and submodularity.

    Uses the local forms, which are equivalent to the global axioms:
    ``f(S) <= f(S+e)`` and ``f(S+a) + f(S+b) >= f(S) + f(S+a+b)``.
    """
    n = len(f.ground)
    guard(n, HARD_LIMIT)
    full = f.ground.full
    report = OracleReport(True, True, True, True)
    if f.value(0) != 0:
        report.normalized = False
        report.witnesses["normalized"] = {"value_of_empty": f.value(0)}
    for m in range(full + 1):
        v = f.value(m)
        if v is INF or v < 0:
            if report.finite:
                report.finite = False
                report.witnesses["finite"] = {"set": f.ground.ordered(m), "value": v}
    if not report.finite:
        return report
    for m in range(full + 1):
        fm = f.value(m)
        outside = full & ~m
        for a in bits(outside):
            fa = f.value(m | (1 << a))
            if report.monotone and fa < fm:
                report.monotone = False
                report.witnesses["monotone"] = {
                    "S": f.ground.ordered(m),
                    "T": f.ground.ordered(m | (1 << a)),
                }
            if not report.submodular:
                continue
            for b in bits(outside & ~((1 << (a + 1)) - 1)):
                fb = f.value(m | (1 << b))
                fab = f.value(m | (1 << a) | (1 << b))
                if fa + fb < fm + fab:
                    report.submodular = False
                    report.witnesses["submodular"] = {
                        "S": f.ground.ordered(m | (1 << a)),
                        "T": f.ground.ordered(m | (1 << b)),
                    }
                    break
        if not report.monotone and not report.submodular:
            break
    return report


def subset_sums(values: Sequence[ExtRat]) -> list:
    """Table of ``x(S)`` for every bitmask ``S`` over ``len(values)`` positions."""
    n = len(values)
    guard(n)
    sums = [Fraction(0)] * (1 << n)
    for m in range(1, 1 << n):
        low = m & -m
        sums[m] = sums[m ^ low] + values[low.bit_length() - 1]
    return sums


def _positional(f: SubmodularOracle, x) -> list:
    vec = f.ground.vector(x)
    for v in vec:
        if v is INF:
            raise ContractViolation("vector must be finite")
        if v < 0:
            raise ContractViolation("vector must be nonnegative")
    return vec


def membership(f: SubmodularOracle, x) -> bool:
    """True iff ``x(S) <= f(S)`` for every subset ``S`` (and ``x >= 0``)."""
    vec = _positional(f, x)
    sums = subset_sums(vec)
    return all(sums[m] <= f.value(m) for m in range(f.ground.full + 1))


def contract_rank(f: SubmodularOracle, x, subset, check: bool = True) -> Fraction:
    """``min over F' ⊇ F`` of ``f(F') - x(F')``: the rank of ``{y >= 0 : x + y ∈ P(f)}``."""
    vec = _positional(f, x)
    if check and not membership(f, vec):
        raise ContractViolation("x is not in P(f)")
    guard(len(f.ground))
    sums = subset_sums(vec)
    mask = f.ground.mask(subset)
    return min(f.value(s) - sums[s] for s in supermasks(mask, f.ground.full))


def reduce_by_caps(g: SubmodularOracle, caps) -> SubmodularOracle:
    """Rank function of ``{y ∈ P(g) : y <= caps}``: ``min over T ⊆ S`` of ``g(S \\ T) + caps(T)``."""
    guard(len(g.ground))
    cap_vec = g.ground.vector(caps)
    for c in cap_vec:
        if c is not INF and c < 0:
            raise ContractViolation("caps must be nonnegative")
    cap_sums = _ext_subset_sums(cap_vec)

    def value(mask: int) -> Fraction:
        return min(g.value(mask ^ t) + cap_sums[t] for t in submasks(mask))

    return SubmodularOracle(g.ground, value, name=f"{g.name}|caps" if g.name else "reduced")


def _ext_subset_sums(values: Sequence[ExtRat]) -> list:
    n = len(values)
    sums = [Fraction(0)] * (1 << n)
    for m in range(1, 1 << n):
        low = m & -m
        sums[m] = sums[m ^ low] + values[low.bit_length() - 1]
    return sums


def greedy_max(f: SubmodularOracle, order: Sequence[Hashable], caps=None) -> dict:
    """Greedy maximal point of ``{y ∈ P(f) : y <= caps}`` scanned in ``order``.

    Each element receives ``min(cap, max feasible increment)`` where the
    increment is ``min over S ⊆ prefix`` of ``f(S + e) - y(S)``. Elements not in
    ``order`` stay at 0.
    """
    ground = f.ground
    guard(len(ground))
    if sorted(map(ground.index.__getitem__, order)) != sorted(set(map(ground.index.__getitem__, order))):
        raise ContractViolation("order repeats an element")
    cap_vec = ground.vector(caps) if caps is not None else [INF] * len(ground)
    y = [Fraction(0)] * len(ground)
    sums = {0: Fraction(0)}
    prefix = 0
    for e in order:
        pos = ground.index[e]
        bit = 1 << pos
        room = min(f.value(s | bit) - sums[s] for s in submasks(prefix))
        inc = room if cap_vec[pos] is INF else min(room, cap_vec[pos])
        y[pos] = inc
        for s in list(sums):
            sums[s | bit] = sums[s] + inc
        prefix |= bit
    return {e: y[i] for i, e in enumerate(ground.elements)}


def remnant_rank(g: SubmodularOracle, x, d, subset) -> Fraction:
    """Remnant supply rank by double enumeration.

    ``min over S' ⊆ S`` of ``contract_rank(g, x, S') + d(S \\ S')``, where ``g`` is
    the buyer-level rank function ``S -> f(E_S)``.
    """
    xs = _positional(g, x)
    ds = g.ground.vector(d)
    dsums = _ext_subset_sums(ds)
    mask = g.ground.mask(subset)
    best = None
    for sp in submasks(mask):
        inner = contract_rank(g, xs, sp, check=False)
        val = inner + dsums[mask ^ sp]
        if best is None or val < best:
            best = val
    return best


def remnant_rank_simple(g: SubmodularOracle, x, d, subset) -> Fraction:
    """``min over S' ⊆ S`` of ``g(S') - x(S') + d(S \\ S')``.

    Equals :func:`remnant_rank` on states reached by the clinching auction; no
    such identity is claimed for arbitrary ``(x, d)``.
    """
    xs = _positional(g, x)
    ds = g.ground.vector(d)
    guard(len(g.ground))
    xsums = subset_sums(xs)
    dsums = _ext_subset_sums(ds)
    mask = g.ground.mask(subset)
    return min(g.value(sp) - xsums[sp] + dsums[mask ^ sp] for sp in submasks(mask))


def intersection_max(f1: SubmodularOracle, f2: SubmodularOracle, subset) -> Fraction:
    """``max y(F)`` over ``P(f1) ∩ P(f2)``, via the min-max formula.

    Enumerates splits ``F = F1 ⊔ F2``; overlapping covers are never better
    because both functions are monotone.
    """
    if f1.ground != f2.ground:
        raise ContractViolation("oracles must share a ground set")
    mask = f1.ground.mask(subset)
    guard(bin(mask).count("1"))
    return min(f1.value(a) + f2.value(mask ^ a) for a in submasks(mask))


def is_tight(f: SubmodularOracle, x, subset) -> bool:
    vec = _positional(f, x)
    mask = f.ground.mask(subset)
    return sum((vec[i] for i in bits(mask)), Fraction(0)) == f.value(mask)


# ---------------------------------------------------------------------------
# table routines


def superset_min(values: list, n: int) -> list:
    """In-place: ``values[S] := min over T ⊇ S`` of ``values[T]``."""
    for b in range(n):
        bit = 1 << b
        for m in range(1 << n):
            if not m & bit:
                other = values[m | bit]
                if other < values[m]:
                    values[m] = other
    return values


def remnant_table(gtab: Sequence[Fraction], x: Sequence[Fraction], d: Sequence[ExtRat], simple: bool = False) -> list:
    """Remnant rank for every subset of buyers at once.

    With ``simple=False`` this is the contracted form (inner minimum over
    supersets); with ``simple=True`` the inner minimum is dropped. ``gtab`` is the
    table of ``S -> f(E_S)``.
    """
    n = len(x)
    xs = subset_sums(x)
    table = [gtab[m] - xs[m] for m in range(1 << n)]
    if not simple:
        superset_min(table, n)
    for b in range(n):
        bit = 1 << b
        db = d[b]
        if db is INF:
            continue
        for m in range(1 << n):
            if m & bit:
                cand = table[m ^ bit] + db
                if cand < table[m]:
                    table[m] = cand
    return table
