import itertools
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rankone.errors import SpecViolation
from rankone.heights import (
    HeightSet,
    RankOneSpec,
    build_family,
    comb_construct,
    gamma_rule,
    height_sets_from_parameters,
    quadruple_cases,
    schedule_M,
    spec_from_json,
    spec_to_json,
    verify_comb_properties,
)


def naive_property2(h):
    """Every ordered quadruple, no windowing."""
    idx = range(len(h))
    for q in itertools.product(idx, repeat=4):
        x = [h.elements[t] for t in q]
        if abs(x[0] + x[1] - x[2] - x[3]) < h.M and len(quadruple_cases(h, q)) != 1:
            return False
    return True


def test_comb_small_example():
    h = comb_construct(3, 1, 1, 64)
    assert h.elements == (0, 7, 175, 181)
    assert [tuple(h.elements[t] for t in p) for p in h.upper_pairs] == [(0, 181)]
    assert [tuple(h.elements[t] for t in p) for p in h.lower_pairs] == [(7, 175)]
    assert 0 + 181 == 7 + 175 - 1


def test_comb_m2_before_normalization():
    h = comb_construct(2, 1, 1, 64)
    # unnormalized: V'=3, W'=124, v'=8, w'=120; shift is 3
    assert h.elements == (0, 5, 117, 121)
    assert 3 + 124 == 8 + 120 - 1


def test_comb_rejects_bad_input():
    with pytest.raises(ValueError):
        comb_construct(1, 1, 1)
    with pytest.raises(ValueError):
        comb_construct(3, 1, 1, 65)
    with pytest.raises(ValueError):
        comb_construct(3, 1, 1, 32)
    with pytest.raises(ValueError):
        comb_construct(3, 0, 1)


def test_comb_5_2_2_exhaustive():
    h = comb_construct(5, 2, 2, 2**10)
    assert len(h) == 8
    rep = verify_comb_properties(h)
    assert rep.ok
    assert naive_property2(h)


def test_verifier_finds_counterexample():
    h = HeightSet(0, (0, 1, 2, 3), M=10)
    rep = verify_comb_properties(h)
    assert not rep.property2_ok
    assert rep.counterexample is not None


@given(
    M=st.integers(2, 9),
    G=st.integers(1, 2),
    g=st.integers(1, 2),
    extra=st.integers(0, 3),
)
def test_windowed_verifier_matches_naive(M, G, g, extra):
    n = 2 ** (2 * (G + g) + 2 + extra)
    h = comb_construct(M, G, g, n)
    assert verify_comb_properties(h).property2_ok == naive_property2(h)
    assert len(h) == 2 * G + 2 * g


@given(M=st.integers(2, 6), shift=st.integers(1, 10**6))
def test_shift_preserves_property2(M, shift):
    h = comb_construct(M, 1, 2)
    assert naive_property2(h) == naive_property2(h.shifted(shift))


@given(st.lists(st.integers(1, 3), min_size=1, max_size=4))
def test_family_invariants(gammas):
    spec = build_family(gammas)
    for k, h in enumerate(spec.height_sets):
        assert len(h) == 4 * gammas[k]
        h.check(min_gap=spec.column_heights[k])
        assert spec.column_heights[k + 1] == len(h) * spec.column_heights[k] + sum(spec.spacer_counts[k])
        assert spec.spacer_counts[k][-1] == 0
    rebuilt = height_sets_from_parameters(spec.spacer_counts)
    assert rebuilt == [h.elements for h in spec.height_sets]


def test_schedule_examples():
    empty = RankOneSpec()
    assert schedule_M(empty) == 3
    one = build_family([1])
    assert one.max_descendant(0, 1) == 181
    assert schedule_M(one) == 2 * 181 + one.column_heights[1] + 2
    spec = build_family([1, 2, 1])
    ms = [h.M for h in spec.height_sets]
    assert ms == sorted(set(ms))


def test_build_family_examples(spec_11, spec_2_5_17):
    one = build_family([1])
    assert one.cut_counts == (4,)
    assert one.column_heights[1] == 4 + sum(one.spacer_counts[0])
    assert spec_11.descendant_count(0, 2) == 16
    p = spec_2_5_17.obstruction_product
    assert p == Fraction(7, 8) * Fraction(19, 20) * Fraction(67, 68)
    assert p > Fraction(4, 5)


def test_build_family_rejects():
    with pytest.raises(ValueError):
        build_family([1, 0])
    with pytest.raises(ValueError):
        build_family([1, 1], stages=3)
    with pytest.raises(ValueError):
        build_family([1], M_values=[2])


def test_larger_M_accepted():
    spec = build_family([1, 1], M_values=[10, 10**4])
    assert [h.M for h in spec.height_sets] == [10, 10**4]


def test_gamma_rules():
    assert gamma_rule("2,5,17", 3) == [2, 5, 17]
    assert gamma_rule("constant:3", 2) == [3, 3]
    assert gamma_rule("linear", 3) == [1, 2, 3]
    assert gamma_rule("powers-of-two", 3) == [2, 4, 8]
    for bad in ("constant:0", "1,2"):
        with pytest.raises(ValueError):
            gamma_rule(bad, 3)


def test_powers_of_two_product_above_06():
    spec = build_family(gamma_rule("powers-of-two", 5))
    assert spec.obstruction_product > Fraction(3, 5)


def test_json_round_trip(spec_2_5_17):
    doc = spec_to_json(spec_2_5_17)
    assert all(isinstance(e, str) for s in doc["stages"] for e in s["elements"])
    back = spec_from_json(doc)
    assert back == spec_2_5_17


def test_json_rejects_broken_gap(spec_11):
    doc = spec_to_json(spec_11)
    els = doc["stages"][1]["elements"]
    els[1] = str(int(els[0]) + 1)  # closer than h_1
    doc.pop("column_heights")
    with pytest.raises(SpecViolation):
        spec_from_json(doc)


def test_json_rejects_wrong_heights(spec_11):
    doc = spec_to_json(spec_11)
    doc["column_heights"][-1] = "7"
    with pytest.raises(SpecViolation):
        spec_from_json(doc)
