"""Explicit column stacking from the (r, s) parameters, and exact symbolic
orbits of T on column levels.

This module never reads the height-set elements directly when stacking: it
rebuilds copy offsets from cut and spacer counts, so it serves as an
independent check on the direct-sum description of descendants.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from rankone.errors import StagesExhausted
from rankone.heights import RankOneSpec


@dataclass(frozen=True)
class Column:
    stage: int
    height: int
    descendant_heights: tuple[int, ...]
    width_denominator: int  # each level has width 1 / width_denominator

    @property
    def descendant_count(self) -> int:
        return len(self.descendant_heights)

    @property
    def spacer_count(self) -> int:
        return self.height - len(self.descendant_heights)


def copy_offsets(spec: RankOneSpec, n: int) -> list[int]:
    """Bottom heights of the r_n copies of C_n inside C_{n+1}."""
    h = spec.column_heights[n]
    offsets = [0]
    for s in spec.spacer_counts[n][:-1]:
        offsets.append(offsets[-1] + h + s)
    return offsets


def build_columns(spec: RankOneSpec, n: Optional[int] = None) -> list[Column]:
    n = spec.stages if n is None else n
    if not 0 <= n <= spec.stages:
        raise ValueError(f"column {n} not available for a spec with {spec.stages} stages")
    col = Column(0, 1, (0,), 1)
    out = [col]
    for k in range(n):
        r = spec.cut_counts[k]
        s = spec.spacer_counts[k]
        height = r * col.height + sum(s)
        desc = sorted(off + t for off in copy_offsets(spec, k) for t in col.descendant_heights)
        col = Column(k + 1, height, tuple(desc), col.width_denominator * r)
        out.append(col)
    return out


def build_column(spec: RankOneSpec, n: int) -> Column:
    return build_columns(spec, n)[-1]


def columns_csv(columns: Sequence[Column]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["stage", "height", "descendant_count", "spacer_count"])
    for c in columns:
        w.writerow([c.stage, c.height, c.descendant_count, c.spacer_count])
    return buf.getvalue()


# symbolic points --------------------------------------------------------------


@dataclass(frozen=True)
class SymbolicPoint:
    """Level ``level`` of ``C_stage``; the subcolumn taken at each later
    refinement is drawn deterministically from ``seed``."""

    stage: int
    level: int
    seed: int = 0

    def choice(self, spec: RankOneSpec, stage: int) -> int:
        rng = np.random.default_rng([self.seed, stage])
        return int(rng.integers(spec.cut_counts[stage]))


def refine(spec: RankOneSpec, p: SymbolicPoint) -> SymbolicPoint:
    """Represent the same point one stage finer."""
    if p.stage >= spec.stages:
        raise StagesExhausted(f"no stage beyond {p.stage} is built")
    m = p.choice(spec, p.stage)
    return SymbolicPoint(p.stage + 1, copy_offsets(spec, p.stage)[m] + p.level, p.seed)


def refine_to(spec: RankOneSpec, p: SymbolicPoint, stage: int) -> SymbolicPoint:
    while p.stage < stage:
        p = refine(spec, p)
    return p


def same_point(spec: RankOneSpec, p: SymbolicPoint, q: SymbolicPoint) -> bool:
    if p.seed != q.seed:
        return False
    top = max(p.stage, q.stage)
    return refine_to(spec, p, top).level == refine_to(spec, q, top).level


def apply_T(spec: RankOneSpec, p: SymbolicPoint, power: int) -> SymbolicPoint:
    """``T^power`` on a symbolic point, refining lazily at column tops/bottoms.

    Moves inside a column are taken in one jump, so the cost grows with the
    number of column edges crossed rather than with ``|power|``.
    """
    if power == 0:
        raise ValueError("power must be nonzero")
    left = abs(power)
    while left:
        if power > 0:
            while p.level == spec.column_heights[p.stage] - 1:
                p = refine(spec, p)
            step = min(left, spec.column_heights[p.stage] - 1 - p.level)
            p = SymbolicPoint(p.stage, p.level + step, p.seed)
        else:
            while p.level == 0:
                p = refine(spec, p)
            step = min(left, p.level)
            p = SymbolicPoint(p.stage, p.level - step, p.seed)
        left -= step
    return p


def product_translate(
    spec: RankOneSpec, j: int, levels: Sequence[int], alphas: Sequence[int], m: int
) -> Optional[tuple[int, ...]]:
    """Levels of ``(T^alpha_0 x ... )^m`` applied within ``C_j``, or ``None``
    when some coordinate leaves the column."""
    h = spec.column_heights[j]
    if len(levels) != len(alphas):
        raise ValueError("levels and alphas differ in length")
    if any(not 0 <= x < h for x in levels):
        raise ValueError("levels must lie in the column")
    out = tuple(x + a * m for x, a in zip(levels, alphas))
    if any(not 0 <= x < h for x in out):
        return None
    return out
