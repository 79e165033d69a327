"""Dense float64 matrix kernels: products, norms, extremal singular/eigen values.

Everything here is a pure, deterministic function of its inputs. The spectral
norm uses power iteration started from the normalized all-ones vector plus one
seeded random confirmation run (guards against a start vector orthogonal to
the top singular direction). Smallest singular values and symmetric minimum
eigenvalues go through a cyclic Jacobi eigensolver on the row Gram matrix.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ConvergenceError",
    "as_matrix",
    "matmul",
    "frobenius_norm",
    "spectral_norm",
    "smallest_singular_value",
    "sym_eig_min",
    "jacobi_eigenvalues",
]

JACOBI_MAX_SWEEPS = 50
JACOBI_REL_TOL = 1e-12
SYM_REL_TOL = 1e-10
_RESTART_SEED = 24389


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap; carries the best estimate."""

    def __init__(self, message: str, best: float):
        super().__init__(message)
        self.best = best


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a finite 2-D float64 array."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.isfinite(out).all():
        raise ValueError(f"{name} contains non-finite entries")
    return out


def matmul(a, b) -> np.ndarray:
    """Matrix product with explicit dimension checking."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def frobenius_norm(a) -> float:
    a = as_matrix(a)
    return float(np.sqrt(np.sum(a * a)))


def _power_top_eig(gram: np.ndarray, v: np.ndarray, tol: float, max_iter: int):
    """Top eigenvalue of a symmetric PSD matrix by power iteration.

    Returns (estimate, converged). The Rayleigh quotient is a lower bound on
    the true top eigenvalue, so a stalled run still reports a safe estimate.
    """
    lam = float(v @ (gram @ v))
    hits = 0
    for _ in range(max_iter):
        w = gram @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            # start vector sits in the null space; caller retries elsewhere
            return 0.0, False
        v = w / nw
        lam_new = float(v @ (gram @ v))
        if abs(lam_new - lam) <= 0.1 * tol * max(abs(lam_new), np.finfo(float).tiny):
            hits += 1
            if hits >= 2:
                return lam_new, True
        else:
            hits = 0
        lam = lam_new
    return lam, False


def spectral_norm(a, tol: float = 1e-10, max_iter: int = 10000) -> float:
    """Largest singular value via power iteration on the smaller Gram matrix.

    Two deterministic runs are made: one from the normalized all-ones vector
    and one from a fixed-seed random vector; the larger estimate wins. Raises
    ConvergenceError (carrying the best estimate) if neither run converges
    within ``max_iter`` iterations.
    """
    a = as_matrix(a)
    if tol <= 0:
        raise ValueError("tol must be positive")
    gram = a @ a.T if a.shape[0] <= a.shape[1] else a.T @ a
    if not np.any(gram):
        return 0.0
    n = gram.shape[0]
    ones = np.ones(n) / np.sqrt(n)
    lam_a, ok_a = _power_top_eig(gram, ones, tol, max_iter)
    rng = np.random.default_rng(_RESTART_SEED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam_b, ok_b = _power_top_eig(gram, v, tol, max_iter)
    best = max(lam_a, lam_b)
    if not (ok_a or ok_b):
        raise ConvergenceError(
            f"power iteration did not converge within {max_iter} iterations",
            best=float(np.sqrt(max(best, 0.0))),
        )
    return float(np.sqrt(max(best, 0.0)))


def _rotate(a: np.ndarray, p: int, q: int, c: float, s: float) -> None:
    """Apply the two-sided Jacobi rotation J(p,q).T @ a @ J(p,q) in place."""
    col_p = a[:, p].copy()
    col_q = a[:, q].copy()
    a[:, p] = c * col_p - s * col_q
    a[:, q] = s * col_p + c * col_q
    row_p = a[p, :].copy()
    row_q = a[q, :].copy()
    a[p, :] = c * row_p - s * row_q
    a[q, :] = s * row_p + c * row_q
    a[p, q] = 0.0
    a[q, p] = 0.0


def jacobi_eigenvalues(s, max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi sweeps.

    Converges when the off-diagonal Frobenius mass drops below
    JACOBI_REL_TOL times the Frobenius norm of the input. Returns the
    eigenvalues sorted ascending. Raises ConvergenceError past the sweep cap.
    """
    a = np.array(s, dtype=np.float64, copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if n == 1:
        return a[0, :1].copy()
    total = float(np.sqrt(np.sum(a * a)))
    if total == 0.0:
        return np.zeros(n)
    stop = JACOBI_REL_TOL * total
    # rotations on entries below this cannot move the off mass past `stop`
    skip = stop / (n * n)
    for _ in range(max_sweeps):
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        off_sq = float(np.sum(off * off))
        if off_sq <= stop * stop:
            return np.sort(np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                _rotate(a, p, q, c, t * c)
    raise ConvergenceError(
        f"Jacobi did not converge within {max_sweeps} sweeps",
        best=float(np.sort(np.diag(a))[0]),
    )


def smallest_singular_value(a) -> float:
    """Smallest singular value of a fat or square matrix (rows <= cols).

    Computed as the square root of the minimum eigenvalue of the rows-by-rows
    Gram matrix a @ a.T, with negative round-off eigenvalues clamped to zero.
    """
    a = as_matrix(a)
    rows, cols = a.shape
    if rows > cols:
        raise ValueError(
            f"matrix must have rows <= cols, got {rows}x{cols}; "
            "tall matrices are outside the supported regime"
        )
    gram = a @ a.T
    eigs = jacobi_eigenvalues(gram)
    return float(np.sqrt(max(float(eigs[0]), 0.0)))


def sym_eig_min(s) -> float:
    """Minimum eigenvalue of a (numerically) symmetric matrix.

    The input must be symmetric to within SYM_REL_TOL relative to its
    Frobenius norm; it is symmetrized by averaging with its transpose before
    the Jacobi sweep.
    """
    s = as_matrix(s)
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"matrix must be square, got shape {s.shape}")
    scale = max(1.0, frobenius_norm(s))
    asym = frobenius_norm(s - s.T)
    if asym > SYM_REL_TOL * scale:
        raise ValueError(f"matrix is not symmetric: ||s - s.T||_F = {asym:.3e}")
    sym = 0.5 * (s + s.T)
    return float(jacobi_eigenvalues(sym)[0])
