import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rankone.descendants import descendant_table, u_obstruction_quadruples
from rankone.errors import StagesExhausted
from rankone.heights import build_family
from rankone.tower import (
    SymbolicPoint,
    apply_T,
    build_column,
    build_columns,
    columns_csv,
    product_translate,
    refine,
    same_point,
)


@pytest.fixture(scope="module")
def deep():
    return build_family([1] * 12)


def test_c0():
    c = build_column(build_family([1]), 0)
    assert c.descendant_heights == (0,) and c.height == 1


@given(st.lists(st.integers(1, 2), min_size=1, max_size=4))
def test_columns_equal_descendant_sums(gammas):
    spec = build_family(gammas)
    cols = build_columns(spec)
    density = []
    for n, col in enumerate(cols):
        assert col.descendant_heights == descendant_table(spec, 0, n).values
        assert col.height == spec.column_heights[n]
        assert col.height - (col.descendant_heights[-1] + 1) == 0
        density.append(Fraction(col.descendant_count, col.height))
    assert all(b <= a for a, b in zip(density, density[1:]))


def test_columns_csv(spec_11):
    text = columns_csv(build_columns(spec_11))
    lines = text.strip().splitlines()
    assert lines[0] == "stage,height,descendant_count,spacer_count"
    assert lines[2].startswith("1,182,4,")


def test_step_inside_column(deep):
    p = SymbolicPoint(2, 10, 0)
    assert apply_T(deep, p, 1) == SymbolicPoint(2, 11, 0)


def test_refinement_keeps_point(deep):
    p = SymbolicPoint(1, 5, 7)
    q = refine(deep, p)
    assert q.stage == 2 and same_point(deep, p, q)
    assert (q.level - p.level) in deep[1].elements


def test_forward_back_identity(deep):
    rnd = random.Random(1)
    for seed in range(10_000):
        p = SymbolicPoint(1, rnd.randrange(deep.column_heights[1]), seed)
        k = rnd.choice([1, 2, 7, 181, -1, -5, -200])
        assert same_point(deep, apply_T(deep, apply_T(deep, p, k), -k), p)


def test_exhausted():
    spec = build_family([1])
    top = SymbolicPoint(1, spec.column_heights[1] - 1)
    with pytest.raises(StagesExhausted):
        apply_T(spec, top, 1)
    with pytest.raises(ValueError):
        apply_T(spec, top, 0)


def test_orbit_lands_on_descendants(spec_111):
    vals = descendant_table(spec_111, 0, 3).values
    for a in vals[:8]:
        for d in vals[-8:]:
            p = apply_T(spec_111, SymbolicPoint(3, a), d - a) if d != a else SymbolicPoint(3, a)
            assert p == SymbolicPoint(3, d)


def test_product_translate(spec_11):
    h = spec_11.column_heights[2]
    assert product_translate(spec_11, 2, (3, 4), (1, -1), 0) == (3, 4)
    assert product_translate(spec_11, 2, (h - 1,), (1,), 1) is None
    for a, a2, d, d2 in u_obstruction_quadruples(spec_11, 0, 2):
        got = product_translate(spec_11, 2, (a, a2), (1, -1), d - a)
        assert got == ((d, d2 + 1) if d2 + 1 < h else None)
