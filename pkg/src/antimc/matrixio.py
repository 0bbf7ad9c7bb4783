"""Plain-text matrix files.

Format: first line ``N``; then N lines of N whitespace-separated decimals
written with 17 significant digits, enough to round-trip float64 exactly.
Lines starting with ``#`` are ignored.
"""

from pathlib import Path

import numpy as np

from . import lie
from .errors import ConfigError


def export_matrix(A, path):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    lines = [str(n)] + [" ".join(f"{x:.17g}" for x in row) for row in A]
    Path(path).write_text("\n".join(lines) + "\n")


def import_matrix(path, tol=lie.ORTHO_TOL):
    """Read a matrix file and check that it is orthogonal."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}", "antithetic_init") from exc
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        n = int(lines[0])
        rows = [[float(tok) for tok in ln.split()] for ln in lines[1:]]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed matrix file {path}: {exc}", "antithetic_init") from exc
    if n < 1 or len(rows) != n or any(len(r) != n for r in rows):
        raise ConfigError(f"matrix file {path}: expected {n} rows of {n} entries", "antithetic_init")
    A = np.array(rows)
    if not np.all(np.isfinite(A)):
        raise ConfigError(f"matrix file {path} has non-finite entries", "antithetic_init")
    err = lie.orthogonality_error(A)
    if err > tol:
        raise ConfigError(f"matrix in {path} is not orthogonal (max|A^T A - I| = {err:.3e})", "antithetic_init")
    return A
