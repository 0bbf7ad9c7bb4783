"""Numerics on so(N) and SO(N).

Skew matrices and rotations are plain ``(N, N)`` float arrays. so(N) carries
the inner product <X, Y> = 1/2 trace(X Y^T), under which the matrices E_ij
(+1 at (i, j), -1 at (j, i), i < j) are orthonormal. Coordinate vectors on
so(N) always list the E_ij in lexicographic order (0,1), (0,2), ..., (N-2,N-1)
(zero based here; the 1-based pairs are (1,2), (1,3), ...).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericError

ORTHO_TOL = 1e-8
DEXP_RTOL = 1e-15
DEXP_MAX_TERMS = 60
# ||ad_Y|| <= 2 ||Y||_F; beyond this the 60-term series is replaced by an eigen-solve.
SERIES_MAX_FROBENIUS = 2 * math.pi


def algebra_dim(n):
    return n * (n - 1) // 2


@lru_cache(maxsize=None)
def basis_indices(n):
    """Zero-based (i, j) pairs, i < j, in lexicographic order."""
    if n < 2:
        raise DomainError(f"so(N) needs N >= 2, got {n}")
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


@lru_cache(maxsize=None)
def _triu(n):
    rows, cols = np.triu_indices(n, k=1)
    rows.flags.writeable = False
    cols.flags.writeable = False
    return rows, cols


def basis_element(n, i, j):
    """E_ij for zero-based ``0 <= i < j < n``."""
    if not (0 <= i < j < n):
        raise DomainError(f"invalid basis index ({i}, {j}) for N={n}")
    E = np.zeros((n, n))
    E[i, j] = 1.0
    E[j, i] = -1.0
    return E


def from_coords(c, n=None):
    """Skew matrix sum_k c_k E_k in the lexicographic basis."""
    c = np.asarray(c, dtype=float)
    if n is None:
        n = int(round((1 + math.sqrt(1 + 8 * c.size)) / 2))
    if c.shape != (algebra_dim(n),):
        raise DomainError(f"expected {algebra_dim(n)} coordinates for N={n}, got shape {c.shape}")
    rows, cols = _triu(n)
    Y = np.zeros((n, n))
    Y[rows, cols] = c
    Y[cols, rows] = -c
    return Y


def to_coords(Y):
    """Coordinates of a skew matrix against the orthonormal E_ij."""
    rows, cols = _triu(Y.shape[0])
    return Y[rows, cols].copy()


def _check_square(X, name="matrix"):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DomainError(f"{name} must be square, got shape {X.shape}")
    return X


def is_skew(Y, tol=0.0):
    Y = np.asarray(Y)
    return Y.ndim == 2 and Y.shape[0] == Y.shape[1] and np.max(np.abs(Y + Y.T), initial=0.0) <= tol


def as_skew(Y):
    """Validate ``Y`` as an element of so(N) (exact antisymmetry, zero diagonal)."""
    Y = _check_square(Y, "skew matrix")
    if Y.shape[0] < 2:
        raise DomainError("so(N) needs N >= 2")
    if not np.all(np.isfinite(Y)):
        raise DomainError("skew matrix has non-finite entries")
    if not is_skew(Y):
        raise DomainError("matrix is not skew-symmetric")
    return Y


def skew_part(M):
    return 0.5 * (M - M.T)


def inner(X, Y):
    """<X, Y> = 1/2 trace(X Y^T)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape:
        raise DomainError(f"dimension mismatch: {X.shape} vs {Y.shape}")
    return 0.5 * float(np.sum(X * Y))


def norm(Y):
    return math.sqrt(max(inner(Y, Y), 0.0))


def orientation(A):
    """Sign of det(A): +1 for SO(N), -1 for the other component of O(N)."""
    return 1 if np.linalg.det(A) > 0 else -1


def orthogonality_error(A):
    A = np.asarray(A, dtype=float)
    return float(np.max(np.abs(A.T @ A - np.eye(A.shape[0]))))


def as_rotation(A, tol=ORTHO_TOL):
    """Validate ``A`` as an element of O(N) and return it as a float array."""
    A = _check_square(A, "rotation")
    if not np.all(np.isfinite(A)):
        raise DomainError("rotation has non-finite entries")
    err = orthogonality_error(A)
    if err > tol:
        raise DomainError(f"matrix is not orthogonal: max|A^T A - I| = {err:.3e} > {tol:.0e}")
    return A


def rodrigues_exp(X):
    """exp of a 3x3 skew matrix by the closed form I + a X + b X^2.

    With sigma the rotation angle, a = sin(sigma)/sigma and
    b = (1 - cos(sigma))/sigma^2; both are taken from their Taylor series
    for small sigma so the sigma -> 0 limit is exact.
    """
    X = as_skew(X)
    if X.shape != (3, 3):
        raise DomainError(f"Rodrigues formula needs N=3, got N={X.shape[0]}")
    s2 = X[0, 1] ** 2 + X[0, 2] ** 2 + X[1, 2] ** 2
    s = math.sqrt(s2)
    if s < 1e-4:
        a = 1.0 - s2 / 6.0 + s2 * s2 / 120.0
        b = 0.5 - s2 / 24.0 + s2 * s2 / 720.0
    else:
        a = math.sin(s) / s
        b = (1.0 - math.cos(s)) / s2
    return np.eye(3) + a * X + b * (X @ X)


def exp_general(Y):
    """Matrix exponential by Pade scaling and squaring, any N."""
    Y = as_skew(Y)
    return scipy.linalg.expm(Y)


def exp(Y):
    """exp: so(N) -> SO(N); Rodrigues at N=3, scaling and squaring otherwise."""
    Y = as_skew(Y)
    if Y.shape[0] == 3:
        return rodrigues_exp(Y)
    return scipy.linalg.expm(Y)


def ad(Y, X):
    return Y @ X - X @ Y


def dexp(Y, E):
    """Differential of exp in space coordinates: sum_j ad_Y^j(E) / (j+1)!.

    The series is summed until a term's max-norm drops below 1e-15 ||E||,
    with a hard cap of 60 terms.
    """
    Y = np.asarray(Y, dtype=float)
    E = np.asarray(E, dtype=float)
    if Y.shape != E.shape:
        raise DomainError(f"dimension mismatch: {Y.shape} vs {E.shape}")
    return _ad_series(Y, E, sign=1.0)


def dexp_adjoint(Y, B):
    """Adjoint of ``dexp(Y, .)`` under the Frobenius product, for any square ``B``.

    For skew Y the Frobenius adjoint of ad_Y is -ad_Y, so this is the same
    series with alternating signs.
    """
    Y = np.asarray(Y, dtype=float)
    B = np.asarray(B, dtype=float)
    if Y.shape != B.shape:
        raise DomainError(f"dimension mismatch: {Y.shape} vs {B.shape}")
    return _ad_series(Y, B, sign=-1.0)


def _phi(z):
    """(e^z - 1)/z elementwise, 1 at z = 0."""
    out = np.ones_like(z)
    small = np.abs(z) < 1e-8
    zs = z[~small]
    out[~small] = np.expm1(zs) / zs
    out[small] = 1.0 + 0.5 * z[small]
    return out


def _ad_spectral(Y, E, sign):
    # Y = U diag(lam) U^H with lam purely imaginary; ad_Y is diagonal in that basis.
    mu, U = np.linalg.eigh(1j * Y)
    lam = -1j * mu
    Ep = U.conj().T @ E @ U
    Ep *= _phi(sign * (lam[:, None] - lam[None, :]))
    return (U @ Ep @ U.conj().T).real


def _ad_series(Y, E, sign):
    if np.sqrt(np.sum(Y * Y)) > SERIES_MAX_FROBENIUS:
        # Far outside the penalty ball the truncated series cancels catastrophically.
        return _ad_spectral(Y, E, sign)
    scale = np.max(np.abs(E), initial=0.0)
    out = E.copy()
    if scale == 0.0:
        return out
    term = E
    stop = DEXP_RTOL * scale
    for j in range(1, DEXP_MAX_TERMS):
        term = (sign / (j + 1)) * (Y @ term - term @ Y)
        out += term
        if np.max(np.abs(term)) < stop:
            break
    return out


def grad_space(u, v, Y):
    """Return sum_{i<j} (u^T dexp(Y, E_ij) v) E_ij.

    Uses the adjoint form: with W = dexp_adjoint(Y, u v^T) the coefficient on
    E_ij is W_ij - W_ji, so the whole gradient is W - W^T. For skew Y, ad_Y
    commutes with transposition, so W - W^T = dexp_adjoint(Y, u v^T - v u^T)
    and the series runs on a skew argument.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    if u.shape != (n,) or v.shape != (n,) or Y.shape != (n, n):
        raise DomainError(f"grad_space shapes u={u.shape} v={v.shape} Y={Y.shape} do not match")
    B = np.outer(u, v)
    # the projection only removes rounding; mathematically the result is already skew
    return skew_part(dexp_adjoint(Y, B - B.T))


def grad_space_reference(u, v, Y):
    """Per-basis evaluation of :func:`grad_space`; slow, kept as an oracle."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    if u.shape != (n,) or v.shape != (n,):
        raise DomainError("grad_space shapes do not match")
    coeffs = [u @ dexp(Y, basis_element(n, i, j)) @ v for i, j in basis_indices(n)]
    return from_coords(np.array(coeffs), n)


def log_rotation(A, tol=ORTHO_TOL):
    """A skew Y with exp(Y) = A and ||Y|| <= pi sqrt(floor(N/2)).

    Works through the real Schur form A = Q T Q^T: T is block diagonal with
    2x2 rotation blocks and +-1 entries, each block is replaced by its
    principal logarithm (angle in [-pi, pi]) and the -1 entries, which come
    in pairs when det A = +1, are paired into rotations by pi.
    """
    A = as_rotation(A, tol)
    n = A.shape[0]
    if orientation(A) < 0:
        raise DomainError("det(A) = -1: A has no logarithm in so(N)")
    T, Q = scipy.linalg.schur(A, output="real")
    L = np.zeros((n, n))
    minus_ones = []
    k = 0
    while k < n:
        if k + 1 < n and abs(T[k + 1, k]) > 1e-12:
            B = T[k:k + 2, k:k + 2]
            theta = math.atan2(0.5 * (B[1, 0] - B[0, 1]), 0.5 * (B[0, 0] + B[1, 1]))
            L[k + 1, k] = theta
            L[k, k + 1] = -theta
            k += 2
        else:
            if T[k, k] < 0:
                minus_ones.append(k)
            k += 1
    if len(minus_ones) % 2:
        raise NumericError("odd number of -1 eigenvalues in a proper rotation")
    for p, q in zip(minus_ones[0::2], minus_ones[1::2]):
        L[q, p] = math.pi
        L[p, q] = -math.pi
    Y = Q @ L @ Q.T
    return skew_part(Y)


def reorthogonalize(A):
    """Nearest orthogonal matrix (polar factor); keeps det sign for near-orthogonal input."""
    A = _check_square(A, "rotation")
    if not np.all(np.isfinite(A)):
        raise NumericError("cannot reorthogonalize non-finite matrix")
    err = orthogonality_error(A)
    if err > 0.1:
        raise NumericError(f"matrix too far from orthogonal to project: {err:.3e}")
    U, _, Vt = np.linalg.svd(A)
    return U @ Vt


def penalty_radius(n):
    """pi sqrt(floor(N/2)): the closed ball of this radius maps onto SO(N)."""
    return math.pi * math.sqrt(n // 2)
