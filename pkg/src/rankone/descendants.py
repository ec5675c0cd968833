"""Descendant sets ``D(I, j) = H_i + ... + H_{j-1}`` and the pair/tuple
censuses built on them.

Descendants are handled as component vectors (one index into ``H_k`` per
stage); integer values are rebuilt only for membership tests.  Every census
is an exact count.  Two exact routes exist for the sum/difference
conditions:

``enumerate``
    visit every ordered pair of descendants and test membership in an
    explicit sumset or difference set (guarded by a pair budget);
``stagewise``
    walk the stages top-down carrying the small set of residual targets the
    lower stages still have to produce.  Pairs are grouped by their
    per-stage sums/differences, so nothing is enumerated pair by pair.
"""

from __future__ import annotations

import bisect
import enum
import itertools
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from rankone.errors import BudgetExceeded, NotADescendant, SpecViolation
from rankone.heights import LOWER, UPPER, HeightSet, RankOneSpec
from rankone import parallel

DEFAULT_PAIR_BUDGET = 10**8
DEFAULT_TUPLE_BUDGET = 10**7


# descendant tables ---------------------------------------------------------


@dataclass(frozen=True)
class Descendant:
    base_stage: int
    target_stage: int
    components: tuple[int, ...]
    value: int

    def parts(self, spec: RankOneSpec) -> tuple[int, ...]:
        return tuple(
            spec[k].elements[c] for k, c in zip(range(self.base_stage, self.target_stage), self.components)
        )


@dataclass(frozen=True)
class DescendantTable:
    i: int
    j: int
    values: tuple[int, ...]
    components: tuple[tuple[int, ...], ...]
    index: dict = field(repr=False, compare=False)

    def __len__(self):
        return len(self.values)

    def __contains__(self, value: int) -> bool:
        return value in self.index

    def descendant(self, pos: int) -> Descendant:
        return Descendant(self.i, self.j, self.components[pos], self.values[pos])


def _check_range(spec: RankOneSpec, i: int, j: int, strict: bool = True) -> None:
    if not (0 <= i <= j <= spec.stages) or (strict and i == j):
        raise ValueError(f"invalid stage range i={i}, j={j} for a spec with {spec.stages} stages")


def descendant_table(spec: RankOneSpec, i: int, j: int) -> DescendantTable:
    """All of ``D(I, j)`` for ``I`` the base of ``C_i``, sorted by height.

    ``i == j`` is allowed and gives the single descendant 0.
    """
    _check_range(spec, i, j, strict=False)
    sets = [spec[k].elements for k in range(i, j)]
    rows = []
    for comp in itertools.product(*(range(len(s)) for s in sets)):
        rows.append((sum(s[c] for s, c in zip(sets, comp)), comp))
    rows.sort()
    values = tuple(r[0] for r in rows)
    for a, b in zip(values, values[1:]):
        if a == b:
            raise SpecViolation(f"D(I,{j}) from stage {i}: height {a} has two decompositions")
    return DescendantTable(i, j, values, tuple(r[1] for r in rows), {v: n for n, v in enumerate(values)})


def decompose(spec: RankOneSpec, value: int, i: int, j: int) -> Descendant:
    """Split a descendant height into its per-stage components, top stage first."""
    _check_range(spec, i, j, strict=False)
    rem = int(value)
    comps = []
    for k in range(j - 1, i - 1, -1):
        below = spec.max_descendant(i, k)
        cands = [n for n, e in enumerate(spec[k].elements) if 0 <= rem - e <= below]
        if not cands:
            raise NotADescendant(f"{value} is not in D(I,{j}) from stage {i}")
        if len(cands) > 1:
            raise SpecViolation(
                f"stage {k}: {len(cands)} components fit {value}; separation schedule violated"
            )
        comps.append(cands[0])
        rem -= spec[k].elements[cands[0]]
    if rem != 0:
        raise NotADescendant(f"{value} is not in D(I,{j}) from stage {i}")
    return Descendant(i, j, tuple(reversed(comps)), int(value))


# pair classification -------------------------------------------------------


class PairKind(enum.Enum):
    PURE_U = "pure-U"
    PURE_L = "pure-L"
    POSITIVE_MIXED = "positive-mixed"
    NEGATIVE_MIXED = "negative-mixed"
    OTHER = "other"

    @property
    def pure(self) -> bool:
        return self in (PairKind.PURE_U, PairKind.PURE_L)


@dataclass(frozen=True)
class PairClass:
    kind: PairKind
    correspondent: Optional[tuple[int, int]] = None  # element values (d, d')


def classify_indices(h: HeightSet, x: int, y: int) -> tuple[PairKind, Optional[tuple[int, int]]]:
    kind = h.pure_kind(x, y)
    if kind == UPPER:
        return PairKind.PURE_U, None
    if kind == LOWER:
        return PairKind.PURE_L, None
    sx, sy = h.side(x), h.side(y)
    if sx == UPPER and sy == LOWER:
        # a - d = a' - d' - 1 with d the partner of y and d' the partner of x
        return PairKind.NEGATIVE_MIXED, (h.partner(y), h.partner(x))
    if sx == LOWER and sy == UPPER:
        return PairKind.POSITIVE_MIXED, None
    return PairKind.OTHER, None


def classify_pair(h: HeightSet, x: int, y: int) -> PairClass:
    """Classify the ordered pair of element values ``(x, y)``."""
    kind, corr = classify_indices(h, h.index_of(x), h.index_of(y))
    if corr is not None:
        corr = (h.elements[corr[0]], h.elements[corr[1]])
    return PairClass(kind, corr)


def pair_census(h: HeightSet) -> dict[PairKind, int]:
    counts = Counter(classify_indices(h, a, b)[0] for a in range(len(h)) for b in range(len(h)))
    return {k: counts.get(k, 0) for k in PairKind}


def _kind_matrix(h: HeightSet) -> list[list[PairKind]]:
    return [[classify_indices(h, a, b)[0] for b in range(len(h))] for a in range(len(h))]


# reports -------------------------------------------------------------------

CSV_COLUMNS = (
    "j",
    "total",
    "satisfied",
    "fraction_num",
    "fraction_den",
    "bound_num",
    "bound_den",
    "bound_kind",
    "elapsed_ms",
)


@dataclass
class CertificateReport:
    name: str
    i: int
    j: int
    total: int
    satisfied: int
    analytic_bound: Fraction
    bound_kind: str  # "lower" or "upper"
    parameters: dict = field(default_factory=dict)
    constructive: Optional[int] = None
    method: str = "enumerate"
    estimate: bool = False
    elapsed_ms: Optional[float] = None
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.satisfied <= self.total:
            raise ValueError("satisfied count out of range")

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.satisfied, self.total)

    @property
    def constructive_fraction(self) -> Optional[Fraction]:
        if self.constructive is None:
            return None
        return Fraction(self.constructive, self.total)

    @property
    def bound_holds(self) -> bool:
        """Whether the census sits on the right side of the analytic bound.

        Lower bounds are checked against the constructive count when one is
        reported (that is the count the bound is about) and against the full
        census otherwise; the full census must also dominate the
        constructive count.
        """
        if self.bound_kind == "upper":
            return self.fraction <= self.analytic_bound
        checked = self.constructive_fraction if self.constructive is not None else self.fraction
        ok = checked >= self.analytic_bound
        if self.constructive is not None:
            ok = ok and self.satisfied >= self.constructive
        return ok

    def to_json(self) -> dict:
        out = {
            "certificate": self.name,
            "i": self.i,
            "j": self.j,
            "total": self.total,
            "satisfied": self.satisfied,
            "fraction": _frac(self.fraction),
            "analytic_bound": _frac(self.analytic_bound),
            "bound_kind": self.bound_kind,
            "bound_holds": self.bound_holds,
            "method": self.method,
            "estimate": self.estimate,
            "parameters": {k: _jsonable(v) for k, v in self.parameters.items()},
        }
        if self.constructive is not None:
            out["constructive"] = self.constructive
            out["constructive_fraction"] = _frac(self.constructive_fraction)
        if self.notes:
            out["notes"] = list(self.notes)
        if self.elapsed_ms is not None:
            out["elapsed_ms"] = round(self.elapsed_ms, 3)
        return out

    def csv_row(self) -> list[str]:
        f, b = self.fraction, self.analytic_bound
        return [
            str(self.j),
            str(self.total),
            str(self.satisfied),
            str(f.numerator),
            str(f.denominator),
            str(b.numerator),
            str(b.denominator),
            self.bound_kind,
            "" if self.elapsed_ms is None else f"{self.elapsed_ms:.3f}",
        ]


def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _jsonable(v):
    if isinstance(v, Fraction):
        return _frac(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


# stagewise exact census ----------------------------------------------------


class CarryCensus:
    """Count query tuples ``(q_i, ..., q_{j-1})`` admitting witnesses
    ``(s_i, ..., s_{j-1})`` with ``sum(q_k - s_k) == target``.

    ``queries[k]`` maps a per-stage query value to its multiplicity and
    ``witnesses[k]`` is the set of per-stage witness values.  Correctness does
    not depend on the stages being well separated; only the speed does.
    """

    def __init__(self, queries: Sequence[dict[int, int]], witnesses: Sequence[Iterable[int]]):
        self.queries = [sorted(q.items()) for q in queries]
        self.witnesses = [sorted(set(w)) for w in witnesses]
        # lo[k], hi[k]: range of sum(q - s) over stages < k
        self.lo = [0]
        self.hi = [0]
        for q, w in zip(self.queries, self.witnesses):
            self.lo.append(self.lo[-1] + q[0][0] - w[-1])
            self.hi.append(self.hi[-1] + q[-1][0] - w[0])
        self.weight = [1]
        for q in self.queries:
            self.weight.append(self.weight[-1] * sum(m for _, m in q))
        self._count = lru_cache(maxsize=None)(self._count_impl)

    @property
    def total(self) -> int:
        return self.weight[-1]

    def count(self, target: int) -> int:
        return self._count(len(self.queries), frozenset([target]))

    def _residuals(self, k: int, targets: frozenset, q: int) -> frozenset:
        # targets for stages < k-1 after stage k-1 contributes q - s
        w = self.witnesses[k - 1]
        lo, hi = self.lo[k - 1], self.hi[k - 1]
        out = set()
        for c in targets:
            # need lo <= c - q + s <= hi
            a = bisect.bisect_left(w, lo + q - c)
            b = bisect.bisect_right(w, hi + q - c)
            out.update(c - q + s for s in w[a:b])
        return frozenset(out)

    def _count_impl(self, k: int, targets: frozenset) -> int:
        targets = frozenset(c for c in targets if self.lo[k] <= c <= self.hi[k])
        if not targets:
            return 0
        if k == 0:
            return 1 if 0 in targets else 0
        total = 0
        for q, mult in self.queries[k - 1]:
            nxt = self._residuals(k, targets, q)
            if nxt:
                total += mult * self._count(k - 1, nxt)
        return total

    def contains(self, queries: Sequence[int], target: int) -> bool:
        """Exact test for one query tuple (used by sampled mode)."""
        targets = frozenset([target])
        for k in range(len(self.queries), 0, -1):
            targets = frozenset(c for c in targets if self.lo[k] <= c <= self.hi[k])
            if not targets:
                return False
            targets = self._residuals(k, targets, queries[k - 1])
        return 0 in targets


def _stage_counter(h: HeightSet, op) -> dict[int, int]:
    els = h.elements
    return Counter(op(x, y) for x in els for y in els)


def _diff(x, y):  # second minus first
    return y - x


def _add(x, y):
    return x + y


# helpers --------------------------------------------------------------------


def _guard(total: int, budget: Optional[int], what: str = "pairs") -> None:
    if budget is not None and total > budget:
        raise BudgetExceeded(total, budget, what)


def _negative_counts(spec: RankOneSpec, i: int, j: int) -> list[tuple[int, int]]:
    out = []
    for k in range(i, j):
        c = pair_census(spec[k])
        out.append((c[PairKind.NEGATIVE_MIXED], len(spec[k]) ** 2))
    return out


def at_least_b_probability(probs: Sequence[Fraction], b: int) -> Fraction:
    """``P[sum of independent Bernoulli(p_k) >= b]`` as an exact rational."""
    dist = [Fraction(1)]
    for p in probs:
        new = [Fraction(0)] * (len(dist) + 1)
        for m, w in enumerate(dist):
            new[m] += w * (1 - p)
            new[m + 1] += w * p
        dist = new
    return sum(dist[b:], Fraction(0)) if b < len(dist) else Fraction(0)


def _at_least_b_count(stage_counts: Sequence[tuple[int, int]], b: int) -> int:
    """Number of component-pair tuples with >= b 'hit' stages (exact integers)."""
    dist = [1]
    for hit, tot in stage_counts:
        new = [0] * (len(dist) + 1)
        for m, w in enumerate(dist):
            new[m] += w * (tot - hit)
            new[m + 1] += w * hit
        dist = new
    return sum(dist[b:]) if b < len(dist) else 0


# T x T ----------------------------------------------------------------------


def txt_bound(spec: RankOneSpec, i: int, j: int, b: int) -> Fraction:
    """``P[#negative-mixed stages >= b]``; with Gamma_k = gamma_k this is
    ``1 - P[Binomial(j-i, 1/4) < b]``."""
    probs = [Fraction(n, t) for n, t in _negative_counts(spec, i, j)]
    return at_least_b_probability(probs, b)


def txt_witness(spec: RankOneSpec, ca: Sequence[int], cb: Sequence[int], i: int, b: int):
    """Constructive ``(d, d')`` components for ``(a, a')``: swap in the
    corresponding positive mixed pair at the first ``b`` negative stages.
    Returns ``None`` when fewer than ``b`` stages are negative mixed."""
    d, dd = list(ca), list(cb)
    used = 0
    for off, (x, y) in enumerate(zip(ca, cb)):
        if used == b:
            break
        kind, corr = classify_indices(spec[i + off], x, y)
        if kind is PairKind.NEGATIVE_MIXED:
            d[off], dd[off] = corr
            used += 1
    if used < b:
        return None
    return tuple(d), tuple(dd)


def _txt_enumerate_chunk(rows: range) -> tuple[int, int]:
    w = parallel.WORK
    vals, comps, diffs, b = w["values"], w["components"], w["diffs"], w["b"]
    spec, i, kinds, value_of = w["spec"], w["i"], w["kinds"], w["value_of"]
    sat = cons = 0
    n = len(vals)
    for a in rows:
        va, ca = vals[a], comps[a]
        for a2 in range(n):
            vb, cb = vals[a2], comps[a2]
            hit = (vb - va - b) in diffs
            sat += hit
            negs = sum(
                1 for off in range(len(ca)) if kinds[off][ca[off]][cb[off]] is PairKind.NEGATIVE_MIXED
            )
            if negs >= b:
                wit = txt_witness(spec, ca, cb, i, b)
                vd, vdd = value_of[wit[0]], value_of[wit[1]]
                if va - vd != vb - vdd - b:
                    raise SpecViolation(f"constructive witness fails for {(va, vb)}")
                if not hit:
                    raise SpecViolation(f"constructive pair {(va, vb)} missed by the census")
                cons += 1
    return sat, cons


def certify_txt(
    spec: RankOneSpec,
    i: int,
    j: int,
    b: int,
    *,
    method: str = "enumerate",
    pair_budget: Optional[int] = DEFAULT_PAIR_BUDGET,
    threads: int = 1,
) -> CertificateReport:
    """Census for ``T x T``: pairs ``(a, a')`` with ``d, d'`` in ``D(I,j)``
    and ``a - d = a' - d' - b``."""
    _check_range(spec, i, j)
    if b < 0:
        raise ValueError("b must be nonnegative")
    t0 = time.perf_counter()
    total = spec.descendant_count(i, j) ** 2
    bound = txt_bound(spec, i, j, b)
    notes = []
    if b >= spec.column_heights[i]:
        notes.append(f"b={b} is not below h_i={spec.column_heights[i]}")
    if method == "enumerate":
        _guard(total, pair_budget)
        table = descendant_table(spec, i, j)
        vals = table.values
        work = dict(
            values=vals,
            components=table.components,
            diffs={y - x for x in vals for y in vals},
            b=b,
            spec=spec,
            i=i,
            kinds=[_kind_matrix(spec[k]) for k in range(i, j)],
            value_of=dict(zip(table.components, vals)),
        )
        sat, cons = parallel.map_rows(_txt_enumerate_chunk, len(vals), work, threads)
    elif method == "stagewise":
        cc = CarryCensus(
            [_stage_counter(spec[k], _diff) for k in range(i, j)],
            [_stage_counter(spec[k], _diff).keys() for k in range(i, j)],
        )
        sat = cc.count(b)
        cons = _at_least_b_count(_negative_counts(spec, i, j), b)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CertificateReport(
        name="txt",
        i=i,
        j=j,
        total=total,
        satisfied=sat,
        analytic_bound=bound,
        bound_kind="lower",
        parameters={"b": b},
        constructive=cons,
        method=method,
        elapsed_ms=(time.perf_counter() - t0) * 1e3,
        notes=notes,
    )


# T x T^-1 obstruction -------------------------------------------------------


def pure_fraction_bound(spec: RankOneSpec, i: int, j: int) -> Fraction:
    """Fraction of pairs with some pure component stage:
    ``1 - prod (1 - pure_k / |H_k|^2)`` (``1 - prod(1 - 1/(4 gamma))`` when
    Gamma_k = gamma_k)."""
    out = Fraction(1)
    for k in range(i, j):
        c = pair_census(spec[k])
        pure = c[PairKind.PURE_U] + c[PairKind.PURE_L]
        out *= 1 - Fraction(pure, len(spec[k]) ** 2)
    return 1 - out


def _pure_tuple_count(spec: RankOneSpec, i: int, j: int) -> int:
    counts = []
    for k in range(i, j):
        c = pair_census(spec[k])
        counts.append((c[PairKind.PURE_U] + c[PairKind.PURE_L], len(spec[k]) ** 2))
    return _at_least_b_count(counts, 1)


def _u_enumerate_chunk(rows: range) -> tuple[int, int]:
    w = parallel.WORK
    vals, comps, sums, kinds = w["values"], w["components"], w["sums"], w["kinds"]
    sat = pure = 0
    n = len(vals)
    for a in rows:
        va, ca = vals[a], comps[a]
        for a2 in range(n):
            cb = comps[a2]
            has_pure = any(kinds[off][ca[off]][cb[off]].pure for off in range(len(ca)))
            pure += has_pure
            if (va + vals[a2] - 1) in sums:
                if not has_pure:
                    raise SpecViolation(
                        f"pair {(va, vals[a2])} has a witness but no pure component"
                    )
                sat += 1
    return sat, pure


def certify_u_obstruction(
    spec: RankOneSpec,
    i: int,
    j: int,
    *,
    method: str = "enumerate",
    pair_budget: Optional[int] = DEFAULT_PAIR_BUDGET,
    threads: int = 1,
) -> CertificateReport:
    """Census of pairs ``(a, a')`` with ``a + a' = d + d' + 1`` for some
    ``d, d'`` in ``D(I,j)``; the upper bound is the pure-component fraction."""
    _check_range(spec, i, j)
    t0 = time.perf_counter()
    total = spec.descendant_count(i, j) ** 2
    if method == "enumerate":
        _guard(total, pair_budget)
        table = descendant_table(spec, i, j)
        vals = table.values
        work = dict(
            values=vals,
            components=table.components,
            sums={x + y for x in vals for y in vals},
            kinds=[_kind_matrix(spec[k]) for k in range(i, j)],
        )
        sat, pure = parallel.map_rows(_u_enumerate_chunk, len(vals), work, threads)
    elif method == "stagewise":
        stages = [_stage_counter(spec[k], _add) for k in range(i, j)]
        sat = CarryCensus(stages, [s.keys() for s in stages]).count(1)
        pure = _pure_tuple_count(spec, i, j)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CertificateReport(
        name="u-obstruction",
        i=i,
        j=j,
        total=total,
        satisfied=sat,
        analytic_bound=pure_fraction_bound(spec, i, j),
        bound_kind="upper",
        parameters={"pure_component_pairs": pure},
        method=method,
        elapsed_ms=(time.perf_counter() - t0) * 1e3,
    )


# A generic prime.  Mersenne moduli are a bad idea here: the heights are
# built from powers of two, and 2^61 = 1 mod 2^61 - 1 makes distinct
# descendants collide.
RESIDUE_MODULUS = 2999999999999999977


def u_obstruction_residue_count(
    spec: RankOneSpec,
    i: int,
    j: int,
    *,
    modulus: int = RESIDUE_MODULUS,
    pair_budget: Optional[int] = DEFAULT_PAIR_BUDGET,
) -> int:
    """Visit every ordered pair and count those with ``a + a' - 1`` congruent
    to some ``d + d'`` modulo ``modulus``.

    Heights are reduced to 64-bit residues so the scan runs in numpy even
    when the heights themselves are far beyond 64 bits.  A true witness is
    always a residue witness, so the result is an upper bound on the exact
    census count (equal to it unless a residue collision occurs).
    """
    _check_range(spec, i, j)
    if not 2 < modulus < 2**62:
        raise ValueError("modulus must lie in (2, 2^62)")
    size = spec.descendant_count(i, j)
    _guard(size * size, pair_budget)
    P = np.uint64(modulus)
    r = np.array([v % modulus for v in descendant_table(spec, i, j).values], dtype=np.uint64)
    sums = np.empty(size * (size + 1) // 2, dtype=np.uint64)
    pos = 0
    for a in range(size):
        sums[pos : pos + size - a] = (r[a] + r[a:]) % P
        pos += size - a
    sums.sort()
    shift = P - np.uint64(1)  # adding P - 1 subtracts 1 without underflow
    hits = 0
    for a in range(size):
        q = (r[a] + r + shift) % P
        at = np.searchsorted(sums, q)
        at[at == len(sums)] = 0
        hits += int(np.count_nonzero(sums[at] == q))
    return hits


def u_obstruction_quadruples(spec: RankOneSpec, i: int, j: int, pair_budget=DEFAULT_PAIR_BUDGET):
    """Yield every ``(a, a', d, d')`` in ``D(I,j)^4`` with ``a + a' = d + d' + 1``."""
    total = spec.descendant_count(i, j) ** 2
    _guard(total, pair_budget)
    vals = descendant_table(spec, i, j).values
    by_sum: dict[int, list[tuple[int, int]]] = {}
    for d in vals:
        for d2 in vals:
            by_sum.setdefault(d + d2, []).append((d, d2))
    for a in vals:
        for a2 in vals:
            for d, d2 in by_sum.get(a + a2 - 1, ()):
                yield a, a2, d, d2


def lemma_mixed_witness(spec: RankOneSpec, a: int, a2: int, d: int, d2: int, i: int, j: int) -> int:
    """Stage at which ``(a, a')`` and ``(d, d')`` are pure pairs of opposite
    kinds, given ``a + a' = d + d' + 1``: the largest stage whose component
    sums differ."""
    if a + a2 != d + d2 + 1:
        raise ValueError("need a + a' = d + d' + 1")
    ca, ca2, cd, cd2 = (decompose(spec, v, i, j).components for v in (a, a2, d, d2))
    for off in range(j - i - 1, -1, -1):
        h = spec[i + off]
        e = h.elements
        if e[ca[off]] + e[ca2[off]] != e[cd[off]] + e[cd2[off]]:
            ka = h.pure_kind(ca[off], ca2[off])
            kd = h.pure_kind(cd[off], cd2[off])
            if ka is None or kd is None or ka == kd:
                raise SpecViolation(
                    f"stage {i + off}: component pairs are not pure pairs of opposite kinds"
                )
            return i + off
    raise SpecViolation("no stage with differing component sums")  # unreachable when sums differ


def verify_witness_stagewise(spec: RankOneSpec, i: int, j: int) -> int:
    """Check the mixed-witness claim for *every* quadruple without listing them.

    For a quadruple, let ``k`` be its largest stage with ``t_k = (a_k + a'_k)
    - (d_k + d'_k) != 0``; the stages below ``k`` then produce ``1 - t_k``.
    So it suffices to check, per stage ``k``, every pair of component sums
    ``(sigma, s)`` whose residual ``1 - (sigma - s)`` is reachable from below,
    and every ordered component pair realizing those sums.  Returns the number
    of (sigma, s) classes checked; raises SpecViolation on failure.
    """
    _check_range(spec, i, j)
    checked = 0
    for k in range(i, j):
        h = spec[k]
        by_sum: dict[int, list[tuple[int, int]]] = {}
        for x in range(len(h)):
            for y in range(len(h)):
                by_sum.setdefault(h.elements[x] + h.elements[y], []).append((x, y))
        stages = [_stage_counter(spec[m], _add) for m in range(i, k)]
        lower = CarryCensus(stages, [s.keys() for s in stages])
        reachable = {}
        sums = sorted(by_sum)
        for sigma in sums:
            # 1 - (sigma - s) must lie in [lower.lo, lower.hi]
            lo = bisect.bisect_left(sums, sigma - 1 + lower.lo[-1])
            hi = bisect.bisect_right(sums, sigma - 1 + lower.hi[-1])
            for s in sums[lo:hi]:
                t = sigma - s
                if t == 0:
                    continue
                if 1 - t not in reachable:
                    reachable[1 - t] = lower.count(1 - t) > 0
                if not reachable[1 - t]:
                    continue
                checked += 1
                for x, y in by_sum[sigma]:
                    for u, v in by_sum[s]:
                        ka, kd = h.pure_kind(x, y), h.pure_kind(u, v)
                        if ka is None or kd is None or ka == kd:
                            raise SpecViolation(
                                f"stage {k}: sums {sigma}, {s} reachable but pairs not pure-split"
                            )
    return checked


# T^n x T^-n conservativity ---------------------------------------------------


def residue_pairs(h: HeightSet, n: int, distinct: bool = True) -> int:
    """``|R_k|``: ordered pairs in ``H_k^2`` with ``n | x - y`` (and ``x != y``)."""
    n = abs(n)
    els = h.elements
    return sum(1 for x in els for y in els if (x - y) % n == 0 and (x != y or not distinct))


def first_pigeonhole_stage(spec: RankOneSpec, i: int, n: int) -> int:
    """Smallest ``k >= i`` with ``|D(I,k)| > 2 n^2`` (may exceed the built range)."""
    k, size = i, 1
    while size <= 2 * n * n:
        size *= len(spec[k]) if k < spec.stages else 2
        k += 1
    return k


def inverse_conservative_bound(spec: RankOneSpec, i: int, j: int, n: int) -> tuple[Fraction, int]:
    kp = first_pigeonhole_stage(spec, i, n)
    prod = Fraction(1)
    for k in range(kp, j):
        prod *= 1 - Fraction(residue_pairs(spec[k], n), len(spec[k]) ** 2)
    return (1 - prod if j > kp else Fraction(0)), kp


def _inv_enumerate_chunk(rows: range) -> tuple[int, int]:
    w = parallel.WORK
    vals, comps, reps, n = w["values"], w["components"], w["reps"], w["n"]
    spec, i, value_of = w["spec"], w["i"], w["value_of"]
    sat = cons = 0
    size = len(vals)
    for a in rows:
        va, ca = vals[a], comps[a]
        for a2 in range(size):
            vb, cb = vals[a2], comps[a2]
            cands = reps.get(va + vb, {}).get(va % n, ())
            hit = any(d != va for d in cands)
            sat += hit
            for off in range(len(ca)):
                x, y = spec[i + off].elements[ca[off]], spec[i + off].elements[cb[off]]
                if x != y and (x - y) % n == 0:
                    d = list(ca)
                    dd = list(cb)
                    d[off], dd[off] = cb[off], ca[off]
                    vd, vdd = value_of[tuple(d)], value_of[tuple(dd)]
                    if not (va - vd == vdd - vb and (va - vd) % n == 0 and va != vd):
                        raise SpecViolation(f"swap witness fails for {(va, vb)}")
                    if not hit:
                        raise SpecViolation(f"swap pair {(va, vb)} missed by the census")
                    cons += 1
                    break
    return sat, cons


def certify_conservative_inverse(
    spec: RankOneSpec,
    i: int,
    j: int,
    n: int,
    *,
    pair_budget: Optional[int] = DEFAULT_PAIR_BUDGET,
    threads: int = 1,
) -> CertificateReport:
    """Census for ``T^n x T^-n``: pairs with ``a - d = d' - a'`` in ``nZ \\ {0}``."""
    _check_range(spec, i, j)
    if n == 0:
        raise ValueError("n must be nonzero")
    t0 = time.perf_counter()
    n_abs = abs(n)
    total = spec.descendant_count(i, j) ** 2
    _guard(total, pair_budget)
    table = descendant_table(spec, i, j)
    vals = table.values
    reps: dict[int, dict[int, list[int]]] = {}
    for d in vals:
        for d2 in vals:
            slot = reps.setdefault(d + d2, {}).setdefault(d % n_abs, [])
            # two distinct candidates are enough to avoid d == a
            if len(slot) < 2 and d not in slot:
                slot.append(d)
    work = dict(
        values=vals,
        components=table.components,
        reps=reps,
        n=n_abs,
        spec=spec,
        i=i,
        value_of=dict(zip(table.components, vals)),
    )
    sat, cons = parallel.map_rows(_inv_enumerate_chunk, len(vals), work, threads)
    bound, kp = inverse_conservative_bound(spec, i, j, n)
    per_stage = []
    for k in range(i, j):
        h = spec[k]
        r_all = residue_pairs(h, n, distinct=False)
        per_stage.append(
            {
                "k": k,
                "R_prime": r_all,
                "R": residue_pairs(h, n),
                "H_sq": len(h) ** 2,
                "pigeonhole_ok": r_all * n * n >= len(h) ** 2,
            }
        )
    closed = Fraction(0) if j <= kp else 1 - (1 - Fraction(1, 2 * n * n)) ** (j - kp)
    return CertificateReport(
        name="inverse-conservative",
        i=i,
        j=j,
        total=total,
        satisfied=sat,
        analytic_bound=bound,
        bound_kind="lower",
        parameters={"n": n, "k_prime": kp, "closed_form_bound": closed, "stages": per_stage},
        constructive=cons,
        elapsed_ms=(time.perf_counter() - t0) * 1e3,
    )


# general products ------------------------------------------------------------


def _general_chunk(rows: range) -> int:
    w = parallel.WORK
    vals, shifts, k = w["values"], w["shifts"], w["k"]
    n = len(vals)
    sat = 0
    for a0 in rows:
        first = shifts[0][a0]
        if not first:
            continue
        for rest in itertools.product(range(n), repeat=k - 1):
            common = first
            for ell, a in enumerate(rest, start=1):
                common = common & shifts[ell][a]
                if not common:
                    break
            else:
                sat += 1
    return sat


def certify_general_product(
    spec: RankOneSpec,
    i: int,
    j: int,
    alphas: Sequence[int],
    bs: Sequence[int],
    *,
    tuple_budget: Optional[int] = DEFAULT_TUPLE_BUDGET,
    threads: int = 1,
) -> CertificateReport:
    """Census for ``T^alpha_0 x ... x T^alpha_{k-1}``: tuples ``(a_l)`` with
    some ``m != 0`` and ``a_l - b_l - alpha_l m`` in ``D(I,j)`` for every l.

    ``bs`` all zero is the conservativity condition; general ``bs`` is the
    ergodicity-necessity condition.  No analytic bound is claimed (reported
    as the trivial lower bound 0).
    """
    _check_range(spec, i, j)
    k = len(alphas)
    if k < 2 or len(bs) != k:
        raise ValueError("need k >= 2 alphas and as many bs")
    if any(a == 0 for a in alphas):
        raise ValueError("alphas must be nonzero")
    t0 = time.perf_counter()
    size = spec.descendant_count(i, j)
    total = size**k
    _guard(total, tuple_budget, "tuples")
    vals = descendant_table(spec, i, j).values
    # shifts[l][a] = {m != 0 : vals[a] - b_l - alpha_l m in D}
    shifts = []
    for alpha, b in zip(alphas, bs):
        row = []
        for va in vals:
            ms = set()
            for vd in vals:
                q, r = divmod(va - b - vd, alpha)
                if r == 0 and q != 0:
                    ms.add(q)
            row.append(frozenset(ms))
        shifts.append(row)
    sat = parallel.map_rows(_general_chunk, size, dict(values=vals, shifts=shifts, k=k), threads)
    return CertificateReport(
        name="general",
        i=i,
        j=j,
        total=total,
        satisfied=sat,
        analytic_bound=Fraction(0),
        bound_kind="lower",
        parameters={"alphas": list(alphas), "bs": list(bs)},
        elapsed_ms=(time.perf_counter() - t0) * 1e3,
    )


# sampled estimates ---------------------------------------------------------------


def sampled_census(
    spec: RankOneSpec,
    i: int,
    j: int,
    condition: str,
    samples: int,
    *,
    b: int = 1,
    seed: int = 0,
) -> CertificateReport:
    """Estimate a census fraction from uniformly drawn component-vector pairs.

    ``condition`` is ``"txt"`` or ``"u-obstruction"``.  Each drawn pair is
    tested exactly; only the fraction is an estimate.
    """
    _check_range(spec, i, j)
    rng = np.random.default_rng(seed)
    sets = [spec[k].elements for k in range(i, j)]
    if condition == "txt":
        op, target, bound = _diff, b, txt_bound(spec, i, j, b)
        kind = "lower"
    elif condition == "u-obstruction":
        op, target, bound = _add, 1, pure_fraction_bound(spec, i, j)
        kind = "upper"
    else:
        raise ValueError(f"unknown condition {condition!r}")
    stages = [_stage_counter(spec[k], op) for k in range(i, j)]
    cc = CarryCensus(stages, [s.keys() for s in stages])
    sat = 0
    draws = [rng.integers(0, len(s), size=(samples, 2)) for s in sets]
    for t in range(samples):
        q = [op(s[int(d[t, 0])], s[int(d[t, 1])]) for s, d in zip(sets, draws)]
        sat += cc.contains(q, target)
    return CertificateReport(
        name=condition,
        i=i,
        j=j,
        total=samples,
        satisfied=sat,
        analytic_bound=bound,
        bound_kind=kind,
        parameters={"b": b, "seed": seed} if condition == "txt" else {"seed": seed},
        method="sampled",
        estimate=True,
        notes=["estimate: uniformly sampled pairs, not an exhaustive count"],
    )
