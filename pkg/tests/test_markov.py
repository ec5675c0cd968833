import math

import mpmath
import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from rankone import markov as mk


def chain(eps, R=200, squared=False):
    return mk.MarkovChainSpec(eps, R, squared)


def test_kernel_entries():
    s = chain(0.5)
    assert mk.kernel_entry(s, 0, 1) == mk.kernel_entry(s, 0, -1) == 0.5
    assert mk.kernel_entry(s, 1, 2) == 0.25
    assert mk.kernel_entry(s, 1, 0) == 0.75
    assert mk.kernel_entry(s, 3, 5) == 0.0
    # negative side mirrors the positive side
    assert mk.kernel_entry(s, -1, -2) == 0.25
    assert mk.kernel_entry(s, -1, 0) == 0.75
    with pytest.raises(ValueError):
        mk.kernel_entry(s, 0, 201)


def test_spec_validation():
    for eps in (-0.1, 1.0):
        with pytest.raises(ValueError):
            chain(eps)
    with pytest.raises(ValueError):
        mk.MarkovChainSpec(0.5, 1)


@given(st.floats(0.0, 0.99))
def test_row_sums(eps):
    up, down = mk.kernel_bands(chain(eps, 50))
    assert np.max(np.abs(up + down - 1)) <= 1e-15


@pytest.mark.parametrize("eps", [0.05, 0.3, 0.5, 0.77, 0.95])
def test_stationary_against_mpmath(eps):
    lam = mk.stationary(chain(eps, 2000))
    mpmath.mp.dps = 40
    e = mpmath.mpf(eps)
    for i in (1, 2, 39, 40, 41, 250, 1999, 2000):
        exact = i * mpmath.gamma(1 + e) * mpmath.gamma(i - e) / (mpmath.gamma(1 - e) * mpmath.gamma(i + 1 + e))
        assert abs(lam[i] / float(exact) - 1) < 1e-13


@given(z=st.floats(1.0, 1e6), a=st.floats(-0.99, 0.99), b=st.floats(0.01, 1.99))
def test_log_gamma_ratio_matches_mpmath(z, a, b):
    # direct lgamma differencing is itself off by ~1e-9 at z ~ 1e6, so the
    # oracle is mpmath at 40 digits
    mpmath.mp.dps = 40
    got = mk.log_gamma_ratio(np.array([z]), a, b)[0]
    want = float(mpmath.loggamma(mpmath.mpf(z) + a) - mpmath.loggamma(mpmath.mpf(z) + b))
    assert abs(got - want) <= 1e-13 * max(1.0, abs(want))


@pytest.mark.parametrize("eps", [0.2, 0.5, 0.8])
def test_stationary_identities(eps):
    s = chain(eps, 2000)
    lam = mk.stationary(s)
    assert lam[0] == 1.0 and lam[-3] == lam[3]
    assert abs(lam[1] * (1 + eps) - 1) < 1e-12
    i = np.arange(1, 2000)
    ratio = lam.values[2002:] / lam.values[2001:-1]
    want = ((i + 1) / i) * ((i - eps) / (i + 1 + eps))
    assert np.max(np.abs(ratio / want - 1)) < 1e-12
    assert mk.stationary_residual(s, lam) < 1e-10
    assert np.all(lam.values > 0)


def test_window_sum_grows():
    sums = [mk.stationary(chain(0.5, R)).partial_sum() for R in (10, 100, 1000)]
    assert sums[0] < sums[1] < sums[2]


@pytest.mark.parametrize("squared", [False, True])
def test_reversible(squared):
    s = chain(0.3, 200, squared)
    rep = mk.check_reversible(mk.kernel_matrix(s), mk.stationary(s))
    assert rep.passed


def test_perturbed_kernel_fails():
    s = chain(0.3)
    K = mk.kernel_matrix(s).tolil()
    K[200 + 7, 200 + 8] += 0.01
    rep = mk.check_reversible(K.tocsr(), mk.stationary(s))
    assert not rep.passed
    assert set(rep.worst) == {7, 8}


def test_cylinders():
    s = chain(0.4, 50)
    lam = mk.stationary(s)
    assert mk.cylinder_measure(s, lam, mk.CylinderWord(0, (0,))).value == 1.0
    assert mk.cylinder_measure(s, lam, mk.CylinderWord(0, (0, 1))).value == 0.5
    w = mk.CylinderWord(2, (0, 1, 2))
    a = mk.cylinder_measure(s, lam, w).value
    b = mk.cylinder_measure(s, lam, w.reversed()).value
    assert abs(a - b) <= 1e-12 * max(a, b)
    bad = mk.cylinder_measure(s, lam, mk.CylinderWord(0, (0, 2)))
    assert bad.value == 0.0 and not bad.admissible


def test_random_words_reverse_invariant():
    s = chain(0.6, 100)
    lam = mk.stationary(s)
    for w in mk.random_words(s, 2000, seed=5):
        a = mk.cylinder_measure(s, lam, w)
        b = mk.cylinder_measure(s, lam, w.reversed())
        assert a.admissible and b.admissible
        assert abs(a.value - b.value) <= 1e-12 * max(a.value, b.value)


def test_return_probabilities_small():
    eps = 0.3
    r = mk.return_probabilities(chain(eps, 30), 20)
    assert r.p00[0] == 0.0 and np.all(r.p00[0::2] == 0.0)
    assert abs(r.p00[1] - (1 + eps) / 2) < 1e-15
    assert r.leaked_mass == 0.0
    with pytest.raises(ValueError):
        mk.return_probabilities(chain(eps, 15), 10)


def test_return_partial_sums():
    r = mk.return_probabilities(chain(0.2, 2010), 2000)
    even = r.partial_sums[1::2]
    assert np.all(np.diff(even) > 0)
    assert even[-1] > 3


def test_simple_walk_oracle():
    r = mk.return_probabilities(chain(0.0, 1010), 1000)
    assert np.max(np.abs(r.p00[1::2] - mk.central_binomial_returns(500))) < 1e-12


def test_monte_carlo_tracks_leak():
    s = chain(0.0, 5)
    hits, lost = mk.monte_carlo_returns(s, 30, 10_000, seed=1)
    assert lost > 0 and hits[-1] < 10_000


def test_monte_carlo_chunking_matches_walkers():
    s = chain(0.4, 60)
    exact = mk.return_probabilities(s, 50).p00
    hits, lost = mk.monte_carlo_returns(s, 50, 200_000, seed=2)
    assert lost == 0
    pos = mk.simulate_walkers(s, 50, 20_000, seed=3)
    walker = (pos == 0).mean(axis=1)
    for n in (10, 30, 50):
        se = math.sqrt(exact[n - 1] * (1 - exact[n - 1]))
        assert abs(hits[n - 1] / 200_000 - exact[n - 1]) <= 4 * se / math.sqrt(200_000)
        assert abs(walker[n - 1] - exact[n - 1]) <= 4 * se / math.sqrt(20_000)


def test_monte_carlo_thread_independent():
    s = chain(0.4, 60)
    a = mk.monte_carlo_returns(s, 40, 50_000, seed=9, threads=1)
    b = mk.monte_carlo_returns(s, 40, 50_000, seed=9, threads=2)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_diagnostic_simple_walk():
    d = mk.product_conservativity_diagnostic(chain(0.0, 8010, True), 1, 4000)
    assert abs(d.beta_hat - 0.5) < 0.05
    assert d.verdict == "diverges"
    assert d.leaked_mass == 0.0


@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
def test_diagnostic_k1_diverges(eps):
    d = mk.product_conservativity_diagnostic(chain(eps, 8010, True), 1, 4000)
    assert d.verdict == "diverges"
    assert "heuristic" in d.to_json()["caveat"]


def test_diagnostic_rejects():
    with pytest.raises(ValueError):
        mk.product_conservativity_diagnostic(chain(0.3, 500, False), 2, 200)
    with pytest.raises(ValueError):
        mk.product_conservativity_diagnostic(chain(0.3, 500, True), 2, 50)
    with pytest.raises(ValueError):
        mk.product_conservativity_diagnostic(chain(0.3, 300, True), 2, 200)


def test_diagnostic_exponent_vs_monte_carlo():
    eps, N = 0.4, 1000
    d = mk.product_conservativity_diagnostic(chain(eps, 2 * N + 10, True), 2, N)
    hits, _ = mk.monte_carlo_returns(chain(eps, 2 * N + 10), 2 * N, 10**6, seed=0)
    q_mc = hits[1::2] / 10**6
    beta_mc, _ = mk.fit_decay_exponent(q_mc, N // 2, N)
    assert abs(d.beta_hat - beta_mc) < 0.1


def test_kernel_matrix_square():
    s = chain(0.3, 40, True)
    Q = mk.kernel_matrix(s)
    P = mk.kernel_matrix(s, squared=False)
    assert sp.issparse(Q)
    assert np.allclose((P @ P).toarray(), Q.toarray())
