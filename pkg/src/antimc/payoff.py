"""Payoffs f: R^N -> R of standard normal inputs, with a.e. gradients.

All value/gradient callables are vectorised over leading axes: ``x`` has
shape ``(..., N)``, values come back with shape ``(...)`` and gradients with
shape ``(..., N)``. Values are undiscounted; the discount factor travels with
the model and is applied by the estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PayoffModel:
    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    discount: float = 1.0
    label: str = "payoff"
    value_and_grad: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("payoff dimension must be positive")
        if not (0.0 < self.discount <= 1.0):
            raise DomainError(f"discount must lie in (0, 1], got {self.discount}")
        if self.value_and_grad is None:
            object.__setattr__(self, "value_and_grad", lambda x: (self.value(x), self.gradient(x)))

    def check_input(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise DomainError(f"{self.label}: expected trailing dimension {self.dim}, got shape {x.shape}")
        return x


def _validate_times(times):
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("observation times must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(t)) or t[0] <= 0 or np.any(np.diff(t) <= 0):
        raise DomainError("observation times must be positive and strictly increasing")
    return t


def monthly_times(n=12):
    """t_i = i/12, equal-length months."""
    return tuple(i / 12 for i in range(1, n + 1))


@dataclass(frozen=True)
class AsianSpec:
    spot: float = 100.0
    strike: float = 100.0
    rate: float = 0.0283
    vol: float = 0.1036
    times: tuple = field(default_factory=monthly_times)

    def __post_init__(self):
        if not self.spot > 0:
            raise DomainError("spot must be positive")
        if not self.vol >= 0:
            raise DomainError("vol must be non-negative")
        object.__setattr__(self, "times", tuple(float(t) for t in _validate_times(self.times)))

    @property
    def steps(self):
        return np.diff(np.concatenate([[0.0], self.times]))


@dataclass(frozen=True)
class CovSwapSpec:
    """Floored covariance swap on two independent Black-Scholes assets.

    ``normalize`` toggles the 1/N in front of the sum of return products;
    ``scale`` is the number of contracts.
    """

    vol1: float = 0.1736
    vol2: float = 0.1012
    rate: float = 0.0283
    dividend: float = 0.0203
    times: tuple = field(default_factory=monthly_times)
    scale: float = 100.0
    normalize: bool = True

    def __post_init__(self):
        if not (self.vol1 >= 0 and self.vol2 >= 0):
            raise DomainError("vols must be non-negative")
        if not self.scale > 0:
            raise DomainError("scale must be positive")
        object.__setattr__(self, "times", tuple(float(t) for t in _validate_times(self.times)))

    @property
    def steps(self):
        return np.diff(np.concatenate([[0.0], self.times]))


def reference_asian_spec():
    return AsianSpec()


def reference_covswap_spec():
    # Reference magnitudes (price 0.198, variance 0.081 for 100 contracts) need
    # the un-averaged sum of return products.
    return CovSwapSpec(normalize=False)


def gbm_path(spec, x):
    """Prices S_{t_1..t_N} driven by normal increments ``x`` (shape ``(..., N)``)."""
    x = np.asarray(x, dtype=float)
    dt = spec.steps
    if x.shape[-1:] != dt.shape:
        raise DomainError(f"expected {dt.size} normal inputs, got shape {x.shape}")
    drift = (spec.rate - 0.5 * spec.vol**2) * dt
    log_s = math.log(spec.spot) + np.cumsum(drift + spec.vol * np.sqrt(dt) * x, axis=-1)
    return np.exp(log_s)


def asian_payoff(spec):
    """Arithmetic-average Asian call max(0, mean_i S_{t_i} - K)."""
    n = len(spec.times)
    sdt = spec.vol * np.sqrt(spec.steps)

    def value_and_grad(x):
        s = gbm_path(spec, x)
        excess = np.mean(s, axis=-1) - spec.strike
        itm = excess > 0
        value = np.where(itm, excess, 0.0)
        # d mean(S)/dx_j = vol sqrt(dt_j) * sum_{i >= j} S_i / N
        tail = np.flip(np.cumsum(np.flip(s, axis=-1), axis=-1), axis=-1)
        grad = np.where(itm[..., None], tail * (sdt / n), 0.0)
        return value, grad

    def value(x):
        s = gbm_path(spec, x)
        return np.maximum(np.mean(s, axis=-1) - spec.strike, 0.0)

    return PayoffModel(
        dim=n,
        value=value,
        gradient=lambda x: value_and_grad(x)[1],
        discount=math.exp(-spec.rate * spec.times[-1]),
        label="asian",
        value_and_grad=value_and_grad,
    )


def covswap_payoff(spec):
    """Floored covariance swap; odd inputs (1-based) drive asset 1, even inputs asset 2."""
    n = len(spec.times)
    dt = spec.steps
    drift1 = (spec.rate - 0.5 * spec.vol1**2) * dt
    drift2 = (spec.rate - spec.dividend - 0.5 * spec.vol2**2) * dt
    sdt1 = spec.vol1 * np.sqrt(dt)
    sdt2 = spec.vol2 * np.sqrt(dt)
    weight = spec.scale / n if spec.normalize else spec.scale

    def _returns(x):
        if x.shape[-1] != 2 * n:
            raise DomainError(f"covariance swap expects {2 * n} inputs, got shape {x.shape}")
        g1 = np.exp(drift1 + sdt1 * x[..., 0::2])
        g2 = np.exp(drift2 + sdt2 * x[..., 1::2])
        return g1, g2

    def value(x):
        x = np.asarray(x, dtype=float)
        g1, g2 = _returns(x)
        total = np.sum((g1 - 1.0) * (g2 - 1.0), axis=-1)
        return weight * np.maximum(total, 0.0)

    def value_and_grad(x):
        x = np.asarray(x, dtype=float)
        g1, g2 = _returns(x)
        total = np.sum((g1 - 1.0) * (g2 - 1.0), axis=-1)
        pos = total > 0
        grad = np.empty_like(x)
        grad[..., 0::2] = g1 * sdt1 * (g2 - 1.0)
        grad[..., 1::2] = g2 * sdt2 * (g1 - 1.0)
        grad = np.where(pos[..., None], weight * grad, 0.0)
        return weight * np.where(pos, total, 0.0), grad

    return PayoffModel(
        dim=2 * n,
        value=value,
        gradient=lambda x: value_and_grad(x)[1],
        discount=math.exp(-spec.rate * spec.times[-1]),
        label="covswap",
        value_and_grad=value_and_grad,
    )


def toy_payoff():
    """f(x) = x_1 + x_1^2 / 4 on R^2.

    E f = 1/4 and Var f = 9/8. For a planar rotation by theta,
    Cov(f(xi), f(A xi)) = cos(theta) + cos(theta)^2 / 8, uniquely minimised
    at theta = pi with curvature 3/4 there; the optimal antithetic variance
    is 1/2 (9/8 - 7/8) = 1/8.
    """

    def value(x):
        x = np.asarray(x, dtype=float)
        return x[..., 0] + 0.25 * x[..., 0] ** 2

    def gradient(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        g[..., 0] = 1.0 + 0.5 * x[..., 0]
        return g

    return PayoffModel(dim=2, value=value, gradient=gradient, label="toy")


def linear_payoff(n=2, k=0):
    """f(x) = x_k, unit variance."""

    def value(x):
        return np.asarray(x, dtype=float)[..., k]

    def gradient(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        g[..., k] = 1.0
        return g

    return PayoffModel(dim=n, value=value, gradient=gradient, label="linear")


def constant_payoff(n, c=1.0):
    def value(x):
        return np.full(np.shape(x)[:-1], float(c))

    def gradient(x):
        return np.zeros(np.shape(x))

    return PayoffModel(dim=n, value=value, gradient=gradient, label="constant")
