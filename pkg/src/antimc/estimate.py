"""Monte Carlo estimators: crude, static antithetic, dynamic antithetic.

Every estimator reduces its per-sample values ``g_k`` (already discounted)
through :class:`EstimatorState` in fixed blocks of ``BLOCK`` samples, so a
given sequence of ``g_k`` always produces bit-identical reports no matter
which estimator or how many worker threads produced it. Variances use the
1/n convention, sigma_n^2 = (1/n) sum g_k^2 - S_n^2 (accumulated about a
fixed shift for numerical stability).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import anneal, lie
from .errors import DomainError, NumericError

BLOCK = 1 << 14
Z95 = 1.96

CSV_COLUMNS = ("label", "mode", "price", "variance", "std_error", "n", "elapsed_s", "ci_lo", "ci_hi")


@dataclass
class EstimatorState:
    """Running sums for the sample mean and 1/n variance.

    The sums are taken about ``shift``, the first sample ever added, which
    keeps the one-pass variance free of cancellation when the mean is large
    relative to the spread (a constant payoff gives exactly 0).
    """

    n: int = 0
    sum_g: float = 0.0
    sum_g2: float = 0.0
    mode: str = "crude"
    discount: float = 1.0
    shift: float | None = None

    def add_block(self, g):
        g = np.asarray(g, dtype=float)
        if not np.all(np.isfinite(g)):
            bad = int(np.flatnonzero(~np.isfinite(g))[0])
            raise NumericError(f"non-finite payoff value at sample {self.n + bad}")
        if g.size == 0:
            return
        if self.shift is None:
            self.shift = float(g.flat[0])
        d = g - self.shift
        self.n += g.size
        self.sum_g += float(np.sum(d))
        self.sum_g2 += float(np.sum(d * d))

    def add(self, g):
        """Feed samples in canonical blocks."""
        g = np.asarray(g, dtype=float)
        for start in range(0, g.size, BLOCK):
            self.add_block(g[start:start + BLOCK])

    @property
    def mean(self):
        return self.shift + self.sum_g / self.n if self.n else float("nan")

    @property
    def variance(self):
        if not self.n:
            return float("nan")
        m = self.sum_g / self.n
        return max(self.sum_g2 / self.n - m * m, 0.0)

    def report(self, label, elapsed=0.0, **extra):
        return EstimateReport.from_moments(label, self.mode, self.mean, self.variance, self.n, elapsed, **extra)


@dataclass
class EstimateReport:
    label: str
    mode: str
    price: float
    variance: float
    std_error: float
    n: int
    elapsed: float
    ci95: tuple
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_moments(cls, label, mode, price, variance, n, elapsed=0.0, **extra):
        se = math.sqrt(variance / n)
        return cls(label, mode, price, variance, se, n, elapsed, (price - Z95 * se, price + Z95 * se), extra)

    def row(self, timing=True):
        """CSV fields in :data:`CSV_COLUMNS` order; ``timing=False`` blanks elapsed_s."""
        return [
            self.label,
            self.mode,
            repr(self.price),
            repr(self.variance),
            repr(self.std_error),
            str(self.n),
            f"{self.elapsed:.3f}" if timing else "",
            repr(self.ci95[0]),
            repr(self.ci95[1]),
        ]


def _check_n(n):
    if n < 2:
        raise DomainError("need at least 2 samples")


def _check_matrix(payoff, A):
    A = lie.as_rotation(A)
    if A.shape != (payoff.dim, payoff.dim):
        raise DomainError(f"antithetic matrix is {A.shape[0]}x{A.shape[1]}, payoff dimension is {payoff.dim}")
    return A


def _blocked(payoff, n, stream, block_fn, threads):
    """Evaluate ``block_fn(xi_block)`` over consecutive stream blocks and reduce in order.

    Block ``b`` reads the draws at counters [b*BLOCK*N, (b+1)*BLOCK*N) of the
    stream, so the result does not depend on ``threads``.
    """
    dim = payoff.dim
    base = stream.counter
    starts = list(range(0, n, BLOCK))

    def work(start):
        rows = min(BLOCK, n - start)
        xi = stream.at(base + start * dim).next_matrix(rows, dim)
        return block_fn(xi)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(work, starts))
    else:
        blocks = [work(s) for s in starts]
    # leave the caller's stream positioned after the consumed draws
    stream.seek(base + n * dim)
    return blocks


def crude_mc(payoff, n, stream, threads=1, label=None):
    """Plain average of discount * f(xi_i)."""
    _check_n(n)
    t0 = time.perf_counter()
    disc = payoff.discount
    blocks = _blocked(payoff, n, stream, lambda xi: disc * payoff.value(xi), threads)
    state = EstimatorState(mode="crude", discount=disc)
    for g in blocks:
        state.add_block(g)
    return state.report(label or payoff.label, time.perf_counter() - t0)


def _pair_values(payoff, A):
    def fn(xi):
        return payoff.value(xi), payoff.value(xi @ A.T)

    return fn


def static_antithetic(payoff, A, n, stream, threads=1, label=None):
    """Average of discount * (f(xi) + f(A xi)) / 2 for a fixed orthogonal A."""
    _check_n(n)
    A = _check_matrix(payoff, A)
    t0 = time.perf_counter()
    disc = payoff.discount
    pairs = _blocked(payoff, n, stream, _pair_values(payoff, A), threads)
    state = EstimatorState(mode="static", discount=disc)
    for fx, fa in pairs:
        state.add_block(disc * (fx + fa) / 2.0)
    return state.report(label or payoff.label, time.perf_counter() - t0)


@dataclass
class DynamicResult:
    report: EstimateReport
    A_final: np.ndarray
    anneal_state: anneal.AnnealState
    g: np.ndarray = field(repr=False)


def dynamic_antithetic(payoff, schedule, A0, n, stream, noise_stream=None, label=None):
    """Estimate while annealing: g_k = discount * (f(xi_k) + f(A_{k-1} xi_k)) / 2.

    Each xi_k is used twice, first for g_k with the matrix from the previous
    step and then for the annealing update that produces A_k; the annealing
    noise comes from an independent stream.
    """
    _check_n(n)
    A0 = _check_matrix(payoff, A0)
    t0 = time.perf_counter()
    zeta_stream = noise_stream if noise_stream is not None else stream.noise_stream()
    state = anneal.initial_state(A0)
    m = lie.algebra_dim(payoff.dim)
    disc = payoff.discount
    g = np.empty(n)
    if schedule.variant == "frozen":
        # A_k = A0 throughout, so all draws can be evaluated in one batch.
        fx, fa = _pair_values(payoff, A0)(stream.next_matrix(n, payoff.dim))
        g[:] = disc * (fx + fa) / 2.0
        state = replace(state, n=n)
    else:
        for k in range(n):
            xi = stream.next_vector(payoff.dim)
            zeta = zeta_stream.next_vector(m)
            state = anneal.step(state, schedule, payoff, xi, zeta)
            fx, fa = state.last_values
            g[k] = disc * (fx + fa) / 2.0
    est = EstimatorState(mode="dynamic", discount=disc)
    est.add(g)
    report = est.report(label or payoff.label, time.perf_counter() - t0,
                        rejections=state.rejections, penalty_hits=state.penalty_hits)
    return DynamicResult(report=report, A_final=state.A, anneal_state=state, g=g)


@dataclass(frozen=True)
class CovarianceProbe:
    cov: float
    var: float
    corr: float
    var_f: float
    var_fa: float
    mean: float

    @property
    def antithetic_variance(self):
        return 0.5 * (self.var + self.cov)


def _cov(a, b):
    return float(np.mean(a * b) - np.mean(a) * np.mean(b))


def covariance_probe(payoff, A, n, stream, discounted=True):
    """Sample Cov(f(xi), f(A xi)), pooled Var[f] and their correlation.

    ``var`` pools the two samples, (Var f(xi) + Var f(A xi)) / 2, which makes
    Var[(f(xi) + f(A xi)) / 2] = (var + cov) / 2 an exact identity on the
    drawn samples.
    """
    _check_n(n)
    A = _check_matrix(payoff, A)
    xi = stream.next_matrix(n, payoff.dim)
    fx, fa = _pair_values(payoff, A)(xi)
    if discounted:
        fx = payoff.discount * fx
        fa = payoff.discount * fa
    vx = _cov(fx, fx)
    va = _cov(fa, fa)
    cov = _cov(fx, fa)
    denom = math.sqrt(vx * va)
    corr = cov / denom if denom > 0 else float("nan")
    return CovarianceProbe(cov=cov, var=0.5 * (vx + va), corr=corr, var_f=vx, var_fa=va, mean=float(np.mean(fx)))
