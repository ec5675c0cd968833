"""The Kakutani-Parry nearest-neighbour chain on the integers.

    p(i, i+1) = (1 - eps/i) / 2,  p(i, i-1) = (1 + eps/i) / 2   (i != 0)
    p(0, 1) = p(0, -1) = 1/2

For negative ``i`` the same formulas already push toward 0 (they coincide
with mirroring the positive half), which is what makes ``lambda_{-i} =
lambda_i`` stationary and the chain reversible.

Everything lives on the window ``|i| <= R``.  Mass that would leave the
window is dropped and reported, never reflected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import bernoulli

_ASYMPTOTIC_FROM = 40
_SERIES_TERMS = 14


@dataclass(frozen=True)
class MarkovChainSpec:
    epsilon: float
    radius: int
    squared: bool = False

    def __post_init__(self):
        # eps = 0 is the simple symmetric walk, kept as a reference case
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.radius < 2:
            raise ValueError("radius must be at least 2")

    @property
    def size(self) -> int:
        return 2 * self.radius + 1

    @property
    def states(self) -> np.ndarray:
        return np.arange(-self.radius, self.radius + 1)


def kernel_entry(spec: MarkovChainSpec, i: int, j: int) -> float:
    R = spec.radius
    if abs(i) > R or abs(j) > R:
        raise ValueError(f"({i}, {j}) lies outside the window |i| <= {R}")
    if abs(i - j) != 1:
        return 0.0
    if i == 0:
        return 0.5
    eps = spec.epsilon
    return (1 - eps / i) / 2 if j == i + 1 else (1 + eps / i) / 2


def kernel_bands(spec: MarkovChainSpec) -> tuple[np.ndarray, np.ndarray]:
    """``(up, down)`` with ``up[i+R] = p(i, i+1)`` and ``down[i+R] = p(i, i-1)``.

    Boundary entries pointing out of the window are kept (they are the leak).
    """
    i = spec.states.astype(float)
    eps = spec.epsilon
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(i == 0, 0.5, (1 - eps / i) / 2)
        down = np.where(i == 0, 0.5, (1 + eps / i) / 2)
    return up, down


def kernel_matrix(spec: MarkovChainSpec, squared: Optional[bool] = None) -> sp.csr_matrix:
    """Truncated kernel on the window (``P``, or ``P @ P`` when squared)."""
    up, down = kernel_bands(spec)
    P = sp.diags([down[1:], up[:-1]], [-1, 1], shape=(spec.size, spec.size), format="csr")
    if spec.squared if squared is None else squared:
        P = (P @ P).tocsr()
    return P


# stationary vector ------------------------------------------------------------


@lru_cache(maxsize=None)
def _bernoulli_numbers(n: int) -> tuple[float, ...]:
    return tuple(float(x) for x in bernoulli(n))


def _bernoulli_poly(n: int, x: float) -> float:
    B = _bernoulli_numbers(n)
    return sum(math.comb(n, k) * B[k] * x ** (n - k) for k in range(n + 1))


def log_gamma_ratio(z: np.ndarray, a: float, b: float) -> np.ndarray:
    """``log Gamma(z + a) - log Gamma(z + b)`` for ``z >= 1``.

    Differencing two large ``lgamma`` values loses about 1e-12 relative
    accuracy by z ~ 500; past ``_ASYMPTOTIC_FROM`` the asymptotic series of
    the difference is summed instead, which stays near machine precision.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < _ASYMPTOTIC_FROM
    out[small] = [math.lgamma(x + a) - math.lgamma(x + b) for x in z[small]]
    big = z[~small]
    acc = (a - b) * np.log(big)
    for n in range(1, _SERIES_TERMS + 1):
        c = (_bernoulli_poly(n + 1, a) - _bernoulli_poly(n + 1, b)) / (n * (n + 1))
        acc = acc + (-1) ** (n + 1) * c / big**n
    out[~small] = acc
    return out


@dataclass(frozen=True)
class StationaryVector:
    epsilon: float
    radius: int
    values: np.ndarray = field(repr=False)  # index i + R

    def __getitem__(self, i: int) -> float:
        if abs(i) > self.radius:
            raise IndexError(i)
        return float(self.values[i + self.radius])

    def partial_sum(self) -> float:
        return float(self.values.sum())


def stationary(spec: MarkovChainSpec) -> StationaryVector:
    """``lambda_i = i Gamma(1+eps) Gamma(i-eps) / (Gamma(1-eps) Gamma(i+1+eps))``,
    ``lambda_0 = 1``, ``lambda_{-i} = lambda_i``, evaluated in log space."""
    eps, R = spec.epsilon, spec.radius
    i = np.arange(1, R + 1, dtype=float)
    logs = np.log(i) + (math.lgamma(1 + eps) - math.lgamma(1 - eps)) + log_gamma_ratio(i, -eps, 1 + eps)
    pos = np.exp(logs)
    values = np.concatenate([pos[::-1], [1.0], pos])
    return StationaryVector(eps, R, values)


def stationary_residual(spec: MarkovChainSpec, lam: StationaryVector) -> float:
    """``max |(lambda P)_i - lambda_i|`` over interior states ``|i| <= R-1``."""
    P = kernel_matrix(spec, squared=False)
    lp = P.T @ lam.values
    return float(np.max(np.abs(lp - lam.values)[1:-1]))


@dataclass(frozen=True)
class ReversibilityReport:
    max_abs: float
    max_rel: float
    worst: tuple[int, int]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel < self.tolerance


def check_reversible(
    kernel: sp.spmatrix, lam: np.ndarray | StationaryVector, tol: float = 1e-12
) -> ReversibilityReport:
    """Largest detailed-balance defect ``|lambda_i p_ij - lambda_j p_ji|``,
    relative to the larger of the two terms, over the kernel's nonzeros.

    ``worst`` is reported in state labels (window index minus R).
    """
    values = lam.values if isinstance(lam, StationaryVector) else np.asarray(lam, dtype=float)
    K = sp.csr_matrix(kernel)
    if K.shape != (len(values), len(values)):
        raise ValueError("kernel and stationary window disagree")
    R = (len(values) - 1) // 2
    coo = K.tocoo()
    rows, cols = coo.row, coo.col
    fwd = values[rows] * coo.data
    bwd = values[cols] * np.asarray(K[cols, rows]).ravel()
    diff = np.abs(fwd - bwd)
    rel = diff / np.maximum(np.abs(fwd), np.abs(bwd))
    k = int(np.argmax(rel))
    return ReversibilityReport(
        float(diff.max()), float(rel[k]), (int(rows[k]) - R, int(cols[k]) - R), tol
    )


# cylinders --------------------------------------------------------------------


@dataclass(frozen=True)
class CylinderWord:
    offset: int
    states: tuple[int, ...]

    def reversed(self) -> "CylinderWord":
        return CylinderWord(self.offset, tuple(reversed(self.states)))

    def admissible(self, spec: MarkovChainSpec) -> bool:
        s = self.states
        return (
            len(s) > 0
            and all(abs(x) <= spec.radius for x in s)
            and all(kernel_entry(spec, x, y) > 0 for x, y in zip(s, s[1:]))
        )


@dataclass(frozen=True)
class CylinderMeasure:
    value: float
    admissible: bool


def cylinder_measure(spec: MarkovChainSpec, lam: StationaryVector, w: CylinderWord) -> CylinderMeasure:
    """``lambda_{s0} p(s0,s1) ... p(s_{n-1},s_n)``; zero (flagged) when inadmissible."""
    if not w.admissible(spec):
        return CylinderMeasure(0.0, False)
    val = lam[w.states[0]]
    for x, y in zip(w.states, w.states[1:]):
        val *= kernel_entry(spec, x, y)
    return CylinderMeasure(val, True)


def random_words(spec: MarkovChainSpec, count: int, max_len: int = 30, seed: int = 0) -> list[CylinderWord]:
    """Seeded admissible words that stay inside the window."""
    rng = np.random.default_rng(seed)
    R = spec.radius
    out = []
    for _ in range(count):
        n = int(rng.integers(1, max_len + 1))
        s = [int(rng.integers(-R + n, R - n + 1))]
        steps = rng.choice([-1, 1], size=n - 1)
        for st in steps:
            s.append(s[-1] + int(st))
        out.append(CylinderWord(int(rng.integers(-5, 6)), tuple(s)))
    return out


# return probabilities ------------------------------------------------------------


@dataclass(frozen=True)
class ReturnSeries:
    epsilon: float
    p00: np.ndarray  # p00[n-1] = p_{00}^{(n)} for the one-step kernel P
    leaked_mass: float

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.p00)


def return_probabilities(spec: MarkovChainSpec, N: int) -> ReturnSeries:
    """``p_{00}^{(n)}``, ``n = 1..N``, by propagating row 0 through ``P``."""
    if N < 1:
        raise ValueError("N must be positive")
    if spec.radius < N + 10:
        raise ValueError(f"window radius {spec.radius} is too small for {N} steps (need >= {N + 10})")
    up, down = kernel_bands(spec)
    R = spec.radius
    v = np.zeros(spec.size)
    v[R] = 1.0
    out = np.empty(N)
    leaked = 0.0
    for n in range(N):
        leaked += v[0] * down[0] + v[-1] * up[-1]
        new = np.zeros_like(v)
        new[1:] += v[:-1] * up[:-1]
        new[:-1] += v[1:] * down[1:]
        v = new
        out[n] = v[R]
    return ReturnSeries(spec.epsilon, out, float(leaked))


def central_binomial_returns(n_max: int) -> np.ndarray:
    """Exact ``C(2n, n) / 4^n`` for ``n = 1..n_max`` (simple walk, eps = 0)."""
    from fractions import Fraction

    return np.array([float(Fraction(math.comb(2 * n, n), 4**n)) for n in range(1, n_max + 1)])


@dataclass(frozen=True)
class ProductDiagnostic:
    epsilon: float
    fold: int
    steps: int
    beta_hat: float
    fit_window: tuple[int, int]
    fit_residual: float
    partial_sum_q: float
    partial_sum_qk: float
    leaked_mass: float
    verdict: str
    q00: np.ndarray = field(repr=False)

    caveat = "finite-N heuristic: exponent fitted on [N/2, N]; not a proof of (non)conservativity"

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "fold": self.fold,
            "steps": self.steps,
            "beta_hat": self.beta_hat,
            "fit_window": list(self.fit_window),
            "fit_residual": self.fit_residual,
            "partial_sum_q": self.partial_sum_q,
            "partial_sum_qk": self.partial_sum_qk,
            "leaked_mass": self.leaked_mass,
            "verdict": self.verdict,
            "caveat": self.caveat,
        }


def fit_decay_exponent(q: np.ndarray, lo: int, hi: int) -> tuple[float, float]:
    """Least-squares slope of ``log q_n`` on ``log n`` over ``lo <= n <= hi``;
    returns ``(beta_hat, rms residual)`` with ``q_n ~ n^-beta_hat``."""
    n = np.arange(lo, hi + 1)
    y = np.log(q[lo - 1 : hi])
    x = np.log(n)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    return float(-slope), float(np.sqrt(np.mean(resid**2)))


def product_conservativity_diagnostic(spec: MarkovChainSpec, k: int, N: int) -> ProductDiagnostic:
    """Return-probability diagnostic for the k-fold product of the ``Q = P P`` shift.

    ``sum_n (q_00^(n))^k`` diverges iff ``k beta <= 1`` when ``q_00^(n) ~ n^-beta``.
    """
    if not spec.squared:
        raise ValueError("the diagnostic works with Q = P P; set squared=True")
    if N < 100:
        raise ValueError("N must be at least 100")
    if k < 1:
        raise ValueError("fold count must be positive")
    series = return_probabilities(spec, 2 * N)
    q = series.p00[1::2]  # q_00^(n) = p_00^(2n)
    lo = N // 2
    beta, resid = fit_decay_exponent(q, lo, N)
    return ProductDiagnostic(
        epsilon=spec.epsilon,
        fold=k,
        steps=N,
        beta_hat=beta,
        fit_window=(lo, N),
        fit_residual=resid,
        partial_sum_q=float(q.sum()),
        partial_sum_qk=float((q**k).sum()),
        leaked_mass=series.leaked_mass,
        verdict="diverges" if k * beta <= 1 else "converges",
        q00=q,
    )


# Monte Carlo ---------------------------------------------------------------------

MC_CHUNKS = 16


def _mc_chunk(spec: MarkovChainSpec, steps: int, paths: int, seed_seq) -> tuple[np.ndarray, int]:
    rng = np.random.default_rng(seed_seq)
    up, _ = kernel_bands(spec)
    R = spec.radius
    counts = np.zeros(spec.size, dtype=np.int64)
    counts[R] = paths
    at_zero = np.empty(steps, dtype=np.int64)
    lost = 0
    for n in range(steps):
        ups = rng.binomial(counts, up)
        downs = counts - ups
        lost += int(ups[-1] + downs[0])
        counts = np.zeros_like(counts)
        counts[1:] += ups[:-1]
        counts[:-1] += downs[1:]
        at_zero[n] = counts[R]
    return at_zero, lost


def monte_carlo_returns(
    spec: MarkovChainSpec, steps: int, paths: int, seed: int = 0, threads: int = 1
) -> tuple[np.ndarray, int]:
    """Simulate ``paths`` independent walkers from 0 for ``steps`` steps.

    Walkers are tracked as occupation counts: at each step the walkers at
    state ``i`` split by a Binomial(count, p(i,i+1)) draw, which has exactly
    the law of moving each walker independently.  Returns the number of
    walkers at 0 after each step and the number lost through the window edge.
    Paths are split into ``MC_CHUNKS`` fixed sub-streams, so the result does
    not depend on ``threads``.
    """
    seqs = np.random.SeedSequence(seed).spawn(MC_CHUNKS)
    sizes = [paths // MC_CHUNKS + (c < paths % MC_CHUNKS) for c in range(MC_CHUNKS)]
    args = [(spec, steps, sz, sq) for sz, sq in zip(sizes, seqs)]
    if threads > 1:
        import multiprocessing as mp
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads, mp_context=mp.get_context("fork")) as ex:
            results = list(ex.map(_mc_chunk, *zip(*args)))
    else:
        results = [_mc_chunk(*a) for a in args]
    total = np.zeros(steps, dtype=np.int64)
    lost = 0
    for z, l in results:
        total += z
        lost += l
    return total, lost


def simulate_walkers(spec: MarkovChainSpec, steps: int, paths: int, seed: int = 0) -> np.ndarray:
    """Per-walker simulation; returns positions, shape ``(steps, paths)``.

    Slower than :func:`monte_carlo_returns`; used to cross-check it.
    """
    rng = np.random.default_rng(seed)
    up, _ = kernel_bands(spec)
    R = spec.radius
    pos = np.zeros(paths, dtype=np.int64)
    out = np.empty((steps, paths), dtype=np.int64)
    for n in range(steps):
        u = rng.random(paths) < up[pos + R]
        pos = pos + np.where(u, 1, -1)
        if np.any(np.abs(pos) > R):
            raise ValueError("walker left the window")
        out[n] = pos
    return out


def standard_error(p_hat: np.ndarray, paths: int) -> np.ndarray:
    return np.sqrt(np.clip(p_hat * (1 - p_hat), 0, None) / paths)
