"""Simulated annealing for the optimal antithetic matrix on SO(N).

The search runs in exponential coordinates centred at A0: A = exp(Y) A0 with
Y in so(N). Each step takes one normal draw xi, forms the stochastic gradient
of Y -> f(xi) f(exp(Y) A0 xi), adds the gradient of the ball penalty
||Y||^2 1{||Y|| > pi sqrt(floor(N/2))}, and moves

    Y_n = Y_{n-1} - r_n (Z_n + 2 Y_{n-1} 1{outside}) + sqrt(r_n h_n) zeta_n

with zeta_n a standard normal vector in the E_ij coordinates. Dropping the
noise term gives the plain Robbins-Monro iteration.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import lie
from .errors import ConfigError, DomainError
from .sampling import GaussianStream

REORTHO_EVERY = 100
VARIANTS = ("power", "loglog", "frozen")


@dataclass(frozen=True)
class AnnealSchedule:
    """Step sizes r_n and temperatures h_n.

    power:  r_n = 1/n^gamma,  h_n = heat / ((1 - gamma) ln(n + 1))
    loglog: r_n = b/n,        h_n = heat / ln(ln(n + 3))
    frozen: r_n = h_n = 0 (the matrix never moves)
    """

    gamma: float = 0.5
    heat: float = 1.0
    variant: str = "power"
    b: float = 1.0
    noise: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown schedule variant {self.variant!r}", "variant")
        if not (0.0 < self.gamma < 1.0):
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}", "gamma")
        if not self.heat > 0:
            raise ConfigError(f"heat must be positive, got {self.heat}", "heat")
        if not self.b > 0:
            raise ConfigError(f"b must be positive, got {self.b}", "b")

    @classmethod
    def frozen(cls):
        return cls(variant="frozen")

    def step_size(self, n):
        if self.variant == "power":
            return n ** -self.gamma
        if self.variant == "loglog":
            return self.b / n
        return 0.0

    def temperature(self, n):
        if self.variant == "power":
            return self.heat / ((1.0 - self.gamma) * math.log(n + 1))
        if self.variant == "loglog":
            return self.heat / math.log(math.log(n + 3))
        return 0.0

    def describe(self):
        return f"variant={self.variant} gamma={self.gamma} heat={self.heat:.6g} b={self.b} noise={self.noise}"


@dataclass(frozen=True)
class AnnealState:
    n: int
    Y: np.ndarray
    A: np.ndarray
    A0: np.ndarray
    radius: float
    rejections: int = 0
    penalty_hits: int = 0
    # (f(xi_n), f(A_{n-1} xi_n)) from the latest step, shared with the dynamic estimator
    last_values: tuple | None = None
    step_norm: float = 0.0

    @property
    def dim(self):
        return self.A0.shape[0]


def initial_state(A0):
    A0 = lie.as_rotation(A0)
    n = A0.shape[0]
    if n < 2:
        raise DomainError("annealing needs N >= 2")
    return AnnealState(n=0, Y=np.zeros((n, n)), A=A0.copy(), A0=A0, radius=lie.penalty_radius(n))


def penalty_gradient(Y, radius):
    """Gradient of ||Y||^2 outside the closed ball of the given radius, else 0."""
    if lie.norm(Y) > radius:
        return 2.0 * Y
    return np.zeros_like(Y)


def step(state, schedule, payoff, xi, zeta):
    """One annealing update; returns a new state (the input is never mutated)."""
    xi = np.asarray(xi, dtype=float)
    n = state.n + 1
    v = state.A @ xi
    f_xi = float(payoff.value(xi))
    f_v, grad_v = payoff.value_and_grad(v)
    f_v = float(f_v)
    values = (f_xi, f_v)
    if schedule.variant == "frozen":
        return replace(state, n=n, last_values=values, step_norm=0.0)
    if not (np.all(np.isfinite(grad_v)) and math.isfinite(f_xi)):
        return replace(state, rejections=state.rejections + 1, last_values=values)

    Z = lie.grad_space(f_xi * grad_v, v, state.Y)
    r = schedule.step_size(n)
    pen = penalty_gradient(state.Y, state.radius)
    outside = bool(pen.any())
    Y = state.Y - r * (Z + pen)
    if schedule.noise:
        Y = Y + math.sqrt(r * schedule.temperature(n)) * lie.from_coords(np.asarray(zeta, dtype=float), state.dim)
    A = lie.exp(Y) @ state.A0
    if n % REORTHO_EVERY == 0:
        A = lie.reorthogonalize(A)
    return AnnealState(
        n=n,
        Y=Y,
        A=A,
        A0=state.A0,
        radius=state.radius,
        rejections=state.rejections,
        penalty_hits=state.penalty_hits + int(outside),
        last_values=values,
        step_norm=lie.norm(Y - state.Y),
    )


@dataclass
class AnnealTrace:
    """Per-step record: n, ||Y_n||, and trailing-window Cov(f(xi), f(A xi))."""

    window: int = 1000
    n: list = field(default_factory=list)
    y_norm: list = field(default_factory=list)
    window_cov: list = field(default_factory=list)
    _buf: deque = field(default=None, repr=False)
    _sums: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self._buf = deque()
        self._sums = np.zeros(5)  # sum a, sum b, sum ab, sum a^2, sum b^2

    def record(self, state):
        a, b = state.last_values
        row = np.array([a, b, a * b, a * a, b * b])
        self._buf.append(row)
        self._sums += row
        if len(self._buf) > self.window:
            self._sums -= self._buf.popleft()
        self.n.append(state.n)
        self.y_norm.append(lie.norm(state.Y))
        self.window_cov.append(self.covariance())

    def covariance(self):
        k = len(self._buf)
        if k == 0:
            return float("nan")
        sa, sb, sab = self._sums[:3] / k
        return float(sab - sa * sb)

    def rows(self):
        return zip(self.n, self.y_norm, self.window_cov)


@dataclass
class AnnealResult:
    A_star: np.ndarray
    state: AnnealState
    trace: AnnealTrace
    schedule: AnnealSchedule

    @property
    def rejections(self):
        return self.state.rejections

    @property
    def penalty_hits(self):
        return self.state.penalty_hits


def run(payoff, schedule, A0, iters, stream, window=1000, noise_stream=None):
    """Iterate :func:`step` ``iters`` times.

    xi_n is drawn from ``stream``; zeta_n from ``noise_stream``, by default the
    stream's companion noise substream.
    """
    if iters < 1:
        raise DomainError("iters must be >= 1")
    state = initial_state(A0)
    if state.dim != payoff.dim:
        raise DomainError(f"A0 is {state.dim}x{state.dim} but the payoff has dimension {payoff.dim}")
    zeta_stream = noise_stream if noise_stream is not None else stream.noise_stream()
    m = lie.algebra_dim(state.dim)
    trace = AnnealTrace(window=window)
    for _ in range(int(iters)):
        xi = stream.next_vector(payoff.dim)
        zeta = zeta_stream.next_vector(m)
        state = step(state, schedule, payoff, xi, zeta)
        trace.record(state)
    return AnnealResult(A_star=state.A, state=state, trace=trace, schedule=schedule)


def heat_from_pilot(payoff, pilot_n, stream):
    """Heat constant d = 4 Var[f(xi)] estimated from ``pilot_n`` crude draws.

    Uses the undiscounted payoff, the quantity the annealer optimises.
    """
    if pilot_n < 100:
        raise ConfigError("pilot_n must be >= 100", "pilot_n")
    x = stream.next_matrix(pilot_n, payoff.dim)
    fx = payoff.value(x)
    var = float(np.var(fx))
    if not var > 0:
        raise ConfigError("pilot variance is zero: a constant payoff needs no annealing", "heat")
    return 4.0 * var
