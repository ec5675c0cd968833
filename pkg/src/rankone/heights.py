"""Height sets of the comb family and the rank-one specs built from them.

A height set ``H_k`` lists the offsets at which the ``r_k`` copies of column
``C_k`` sit inside ``C_{k+1}``.  The sets built here carry a pair structure:
``Gamma`` upper pairs ``{V, W}`` and ``gamma`` lower pairs ``{v, w}`` with
``V + W = v + w - 1``, and no other near-coincidences among pair sums closer
than the separation parameter ``M``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional, Sequence

from rankone.errors import SpecViolation

UPPER = "U"
LOWER = "L"


@dataclass(frozen=True)
class HeightSet:
    """One stage's height set.

    ``upper_pairs`` and ``lower_pairs`` hold *index* pairs into ``elements``,
    ordered ``(V, W)`` / ``(v, w)``; ``V`` is the element that received the
    ``-1`` shift in the construction.
    """

    stage: int
    elements: tuple[int, ...]
    upper_pairs: tuple[tuple[int, int], ...] = ()
    lower_pairs: tuple[tuple[int, int], ...] = ()
    M: int = 1

    def __post_init__(self):
        els = tuple(int(e) for e in self.elements)
        object.__setattr__(self, "elements", els)
        object.__setattr__(self, "upper_pairs", tuple(tuple(p) for p in self.upper_pairs))
        object.__setattr__(self, "lower_pairs", tuple(tuple(p) for p in self.lower_pairs))
        if self.stage < 0:
            raise ValueError("stage must be nonnegative")
        if not els:
            raise ValueError("height set must be nonempty")
        if els[0] < 0:
            raise ValueError("elements must be nonnegative")
        if any(b <= a for a, b in zip(els, els[1:])):
            raise ValueError("elements must be strictly increasing")
        seen = set()
        for p in self.upper_pairs + self.lower_pairs:
            if len(p) != 2 or p[0] == p[1]:
                raise ValueError(f"bad pair {p}")
            for idx in p:
                if not 0 <= idx < len(els):
                    raise ValueError(f"pair index {idx} out of range")
                if idx in seen:
                    raise ValueError(f"element index {idx} used in two pairs")
                seen.add(idx)

    @property
    def Gamma(self) -> int:
        return len(self.upper_pairs)

    @property
    def gamma(self) -> int:
        return len(self.lower_pairs)

    def __len__(self) -> int:
        return len(self.elements)

    @cached_property
    def _side(self) -> dict[int, tuple[str, int]]:
        # index -> (side, partner index)
        out = {}
        for side, pairs in ((UPPER, self.upper_pairs), (LOWER, self.lower_pairs)):
            for x, y in pairs:
                out[x] = (side, y)
                out[y] = (side, x)
        return out

    def side(self, idx: int) -> Optional[str]:
        entry = self._side.get(idx)
        return entry[0] if entry else None

    def partner(self, idx: int) -> Optional[int]:
        entry = self._side.get(idx)
        return entry[1] if entry else None

    def index_of(self, value: int) -> int:
        pos = bisect.bisect_left(self.elements, value)
        if pos == len(self.elements) or self.elements[pos] != value:
            raise ValueError(f"{value} is not an element of H_{self.stage}")
        return pos

    def pure_kind(self, i: int, j: int) -> Optional[str]:
        """``'U'`` or ``'L'`` if ``{elements[i], elements[j]}`` is a designated pair."""
        entry = self._side.get(i)
        if entry is not None and entry[1] == j:
            return entry[0]
        return None

    def pair_sum(self, kind: str) -> Optional[int]:
        pairs = self.upper_pairs if kind == UPPER else self.lower_pairs
        if not pairs:
            return None
        x, y = pairs[0]
        return self.elements[x] + self.elements[y]

    def shifted(self, offset: int) -> "HeightSet":
        """Same set translated by ``offset`` (pair structure kept)."""
        return HeightSet(
            stage=self.stage,
            elements=tuple(e + offset for e in self.elements),
            upper_pairs=self.upper_pairs,
            lower_pairs=self.lower_pairs,
            M=self.M,
        )

    def check(self, min_gap: int = 0) -> None:
        """Raise SpecViolation unless the cheap structural invariants hold.

        Property (2) of the comb construction is exhaustive and lives in
        :func:`verify_comb_properties`.
        """
        n = len(self.elements)
        if n != 2 * self.Gamma + 2 * self.gamma:
            raise SpecViolation(
                f"H_{self.stage}: {n} elements but Gamma={self.Gamma}, gamma={self.gamma}"
            )
        if self.elements[0] != 0:
            raise SpecViolation(f"H_{self.stage}: minimum element is {self.elements[0]}, not 0")
        if not _property1(self):
            raise SpecViolation(f"H_{self.stage}: V+W = v+w-1 fails")
        for a, b in zip(self.elements, self.elements[1:]):
            if b - a < min_gap:
                raise SpecViolation(
                    f"H_{self.stage}: gap {b - a} between {a} and {b} is below {min_gap}"
                )


def _property1(h: HeightSet) -> bool:
    els = h.elements
    usums = {els[x] + els[y] for x, y in h.upper_pairs}
    lsums = {els[x] + els[y] for x, y in h.lower_pairs}
    return all(u == l - 1 for u in usums for l in lsums)


def default_n(Gamma: int, gamma: int) -> int:
    return 2 ** (2 * (Gamma + gamma) + 2)


def comb_construct(
    M: int, Gamma: int, gamma: int, n_choice: Optional[int] = None, stage: int = 0
) -> HeightSet:
    """Build the normalized comb height set for separation ``M``.

    Base set: powers ``2^1..2^(Gamma+gamma)`` and their reflections ``n - 2^r``.
    Everything is scaled by ``M``, each ``V_r`` loses 1, and the result is
    shifted so its minimum is 0.
    """
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    if Gamma < 1 or gamma < 1:
        raise ValueError("Gamma and gamma must be positive")
    floor = default_n(Gamma, gamma)
    n = floor if n_choice is None else int(n_choice)
    if n % 2:
        raise ValueError(f"n must be even, got {n}")
    if n < floor:
        raise ValueError(f"n must be >= 2^(2(Gamma+gamma)+2) = {floor}, got {n}")

    upper = [(M * 2**r - 1, M * (n - 2**r)) for r in range(1, Gamma + 1)]
    lower = [(M * 2 ** (Gamma + s), M * (n - 2 ** (Gamma + s))) for s in range(1, gamma + 1)]
    raw = [x for p in upper + lower for x in p]
    shift = min(raw)
    elements = sorted(x - shift for x in raw)
    pos = {x: i for i, x in enumerate(elements)}
    h = HeightSet(
        stage=stage,
        elements=tuple(elements),
        upper_pairs=tuple((pos[V - shift], pos[W - shift]) for V, W in upper),
        lower_pairs=tuple((pos[v - shift], pos[w - shift]) for v, w in lower),
        M=M,
    )
    h.check(min_gap=M)
    return h


@dataclass(frozen=True)
class CombReport:
    property1_ok: bool
    property2_ok: bool
    counterexample: Optional[tuple[int, int, int, int]] = None
    quadruples_checked: int = 0

    @property
    def ok(self) -> bool:
        return self.property1_ok and self.property2_ok


def quadruple_cases(h: HeightSet, q: tuple[int, int, int, int]) -> list[int]:
    """Which of the four property-(2) cases hold for an index quadruple."""
    i1, i2, i3, i4 = q
    els = h.elements
    s12 = els[i1] + els[i2]
    s34 = els[i3] + els[i4]
    same = sorted((i1, i2)) == sorted((i3, i4))
    k12 = h.pure_kind(i1, i2)
    k34 = h.pure_kind(i3, i4)
    held = []
    if same:
        held.append(1)
    if not same and s12 == s34 and k12 is not None and k12 == k34:
        held.append(2)
    if s12 == s34 - 1 and k12 == UPPER and k34 == LOWER:
        held.append(3)
    if s12 == s34 + 1 and k12 == LOWER and k34 == UPPER:
        held.append(4)
    return held


def verify_comb_properties(h: HeightSet) -> CombReport:
    """Exhaustively check both comb properties.

    Every ordered quadruple with ``|x1+x2-x3-x4| < M`` is examined; the
    others satisfy property (2) vacuously.  Ordered pair sums are sorted so
    only pairs of pairs within distance ``M`` are visited.
    """
    p1 = _property1(h)
    els = h.elements
    idx = range(len(els))
    pairs = sorted(((els[a] + els[b], a, b) for a in idx for b in idx))
    sums = [p[0] for p in pairs]
    checked = 0
    for s, a, b in pairs:
        lo = bisect.bisect_right(sums, s - h.M)
        hi = bisect.bisect_left(sums, s + h.M)
        for t in range(lo, hi):
            _, c, d = pairs[t]
            checked += 1
            if len(quadruple_cases(h, (a, b, c, d))) != 1:
                return CombReport(p1, False, (els[a], els[b], els[c], els[d]), checked)
    return CombReport(p1, True, None, checked)


@dataclass(frozen=True)
class RankOneSpec:
    """A finite run of height sets ``H_0..H_{K-1}`` and the derived
    cutting-and-stacking parameters (``r_k``, ``s_{k,m}``, ``h_k``)."""

    height_sets: tuple[HeightSet, ...] = ()
    cut_counts: tuple[int, ...] = field(init=False)
    spacer_counts: tuple[tuple[int, ...], ...] = field(init=False)
    column_heights: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        hs = tuple(self.height_sets)
        object.__setattr__(self, "height_sets", hs)
        heights = [1]
        spacers = []
        for k, h in enumerate(hs):
            if h.stage != k:
                raise SpecViolation(f"height set at position {k} has stage {h.stage}")
            if h.elements[0] != 0:
                raise SpecViolation(f"0 is not in H_{k}")
            hk = heights[-1]
            s = [b - a - hk for a, b in zip(h.elements, h.elements[1:])]
            if any(x < 0 for x in s):
                m = next(m for m, x in enumerate(s) if x < 0)
                raise SpecViolation(
                    f"H_{k}: elements {h.elements[m]} and {h.elements[m + 1]} are closer "
                    f"than the column height h_{k} = {hk}"
                )
            s.append(0)  # nothing above the last copy
            spacers.append(tuple(s))
            heights.append(len(h) * hk + sum(s))
        object.__setattr__(self, "cut_counts", tuple(len(h) for h in hs))
        object.__setattr__(self, "spacer_counts", tuple(spacers))
        object.__setattr__(self, "column_heights", tuple(heights))

    @property
    def stages(self) -> int:
        return len(self.height_sets)

    def __getitem__(self, k: int) -> HeightSet:
        return self.height_sets[k]

    def max_descendant(self, i: int, j: int) -> int:
        """``max(H_i + ... + H_{j-1})`` (0 for an empty range)."""
        return sum(self.height_sets[k].elements[-1] for k in range(i, j))

    def descendant_count(self, i: int, j: int) -> int:
        out = 1
        for k in range(i, j):
            out *= len(self.height_sets[k])
        return out

    @cached_property
    def obstruction_product(self) -> Fraction:
        """``prod (1 - 1/(4 gamma_k))`` over the built stages."""
        out = Fraction(1)
        for h in self.height_sets:
            out *= 1 - Fraction(1, 4 * h.gamma)
        return out

    def extend(self, h: HeightSet) -> "RankOneSpec":
        return RankOneSpec(self.height_sets + (h,))


def height_sets_from_parameters(
    spacer_counts: Sequence[Sequence[int]],
) -> list[tuple[int, ...]]:
    """Rebuild the element lists from spacer counts (``r_k = len(s_k)``)."""
    out = []
    hk = 1
    for s in spacer_counts:
        els = [0]
        for x in s[:-1]:
            els.append(els[-1] + hk + x)
        out.append(tuple(els))
        hk = len(s) * hk + sum(s)
    return out


def schedule_M(spec_so_far: RankOneSpec) -> int:
    """Separation for the next stage: ``2 max D([0,1], k) + h_k + 2``."""
    k = spec_so_far.stages
    return 2 * spec_so_far.max_descendant(0, k) + spec_so_far.column_heights[k] + 2


def build_family(
    gamma_seq: Sequence[int],
    stages: Optional[int] = None,
    *,
    M_values: Optional[Sequence[int]] = None,
    n_values: Optional[Sequence[Optional[int]]] = None,
) -> RankOneSpec:
    """Stack comb height sets with ``Gamma_k = gamma_k = gamma_seq[k]``.

    ``M_values`` may override the schedule with larger separations.
    """
    gamma_seq = [int(g) for g in gamma_seq]
    if stages is None:
        stages = len(gamma_seq)
    if stages != len(gamma_seq):
        raise ValueError(f"stages={stages} but {len(gamma_seq)} gamma values given")
    spec = RankOneSpec()
    for k, g in enumerate(gamma_seq):
        if g < 1:
            raise ValueError(f"stage {k}: gamma must be positive, got {g}")
        M = schedule_M(spec)
        if M_values is not None:
            if M_values[k] < M:
                raise ValueError(f"stage {k}: M={M_values[k]} is below the schedule value {M}")
            M = int(M_values[k])
        n = None if n_values is None else n_values[k]
        try:
            h = comb_construct(M, g, g, n, stage=k)
            spec = spec.extend(h)
        except (ValueError, SpecViolation) as exc:
            raise type(exc)(f"stage {k}: {exc}") from exc
    return spec


def gamma_rule(rule: str, stages: int) -> list[int]:
    """Expand a gamma rule: ``"2,5,17"``, ``"constant:c"``, ``"linear"``,
    ``"powers-of-two"`` (gamma_k = 2^(k+1))."""
    rule = rule.strip()
    if rule.startswith("constant:"):
        c = int(rule.split(":", 1)[1])
        out = [c] * stages
    elif rule == "linear":
        out = [k + 1 for k in range(stages)]
    elif rule == "powers-of-two":
        out = [2 ** (k + 1) for k in range(stages)]
    else:
        out = [int(x) for x in rule.split(",") if x.strip()]
        if len(out) != stages:
            raise ValueError(f"rule lists {len(out)} values for {stages} stages")
    if any(g < 1 for g in out):
        raise ValueError("gamma must be positive")
    return out


# JSON ----------------------------------------------------------------------


def spec_to_json(spec: RankOneSpec) -> dict:
    return {
        "stages": [
            {
                "k": h.stage,
                "M": str(h.M),
                "Gamma": h.Gamma,
                "gamma": h.gamma,
                "elements": [str(e) for e in h.elements],
                "upper_pairs": [list(p) for p in h.upper_pairs],
                "lower_pairs": [list(p) for p in h.lower_pairs],
            }
            for h in spec.height_sets
        ],
        "column_heights": [str(x) for x in spec.column_heights],
    }


def spec_from_json(doc: dict) -> RankOneSpec:
    hs = []
    for entry in doc.get("stages", []):
        h = HeightSet(
            stage=int(entry["k"]),
            elements=tuple(int(e) for e in entry["elements"]),
            upper_pairs=tuple(tuple(p) for p in entry.get("upper_pairs", [])),
            lower_pairs=tuple(tuple(p) for p in entry.get("lower_pairs", [])),
            M=int(entry.get("M", 1)),
        )
        if "Gamma" in entry and int(entry["Gamma"]) != h.Gamma:
            raise SpecViolation(f"H_{h.stage}: Gamma field disagrees with upper_pairs")
        if "gamma" in entry and int(entry["gamma"]) != h.gamma:
            raise SpecViolation(f"H_{h.stage}: gamma field disagrees with lower_pairs")
        hs.append(h)
    spec = RankOneSpec(tuple(hs))
    if "column_heights" in doc:
        given = tuple(int(x) for x in doc["column_heights"])
        if given != spec.column_heights:
            raise SpecViolation("column_heights do not match the height sets")
    return spec


def iter_pairs(h: HeightSet) -> Iterable[tuple[int, int]]:
    n = len(h)
    return ((a, b) for a in range(n) for b in range(n))
