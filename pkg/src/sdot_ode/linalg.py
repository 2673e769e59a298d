"""Dense symmetric linear algebra on the complement of the constant vector."""
from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "SingularComplementError",
    "SymmetryError",
    "check_symmetric",
    "projected_solve",
    "complement_basis",
    "jacobi_eigh",
    "restricted_eigenvalues",
]


class SingularComplementError(np.linalg.LinAlgError):
    """Matrix is (numerically) singular on the zero-mean subspace."""

    def __init__(self, message: str, smallest_eigenvalue: float):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class SymmetryError(ValueError):
    pass


def check_symmetric(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise SymmetryError(f"expected a square matrix, got shape {h.shape}")
    scale = 1.0 + np.abs(h).max(initial=0.0)
    if np.abs(h - h.T).max(initial=0.0) > 1e-10 * scale:
        raise SymmetryError("matrix is not symmetric")
    return h


def complement_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the zero-mean subspace, shape ``(n, n - 1)``.

    Helmert contrasts: column ``k`` is ``(1, ..., 1, -k, 0, ...)`` normalised.
    """
    q = np.zeros((n, n - 1))
    for k in range(1, n):
        q[:k, k - 1] = 1.0
        q[k, k - 1] = -k
        q[:, k - 1] /= np.sqrt(k * (k + 1))
    return q


def projected_solve(h: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``H x = P b`` with ``x`` orthogonal to the constant vector.

    ``H`` must annihilate the constant vector.  The rank-one deflation
    ``H + 11^T / n`` is nonsingular exactly when ``H`` is definite on the
    complement; it is factored by Cholesky, falling back to a symmetric
    indefinite (Bunch-Kaufman) solve when quadrature noise spoils
    positivity.

    Raises:
        SingularComplementError: if a pivot falls below ``1e-14 * |H|``.
    """
    h = check_symmetric(h)
    n = h.shape[0]
    if n < 2:
        raise ValueError("need n >= 2")
    b = np.asarray(b, dtype=float)
    norm = np.abs(h).max(initial=0.0)
    if np.abs(h.sum(axis=1)).max() > 1e-6 * max(norm, 1e-300):
        raise ValueError("H does not annihilate the constant vector")
    pb = b - b.mean()
    if not np.any(pb):
        return np.zeros(n)
    a = h + np.full((n, n), 1.0 / n)
    pivot_floor = 1e-14 * max(norm, 1.0 / n)
    try:
        c, lower = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
        pivots = np.diag(c) ** 2
        if pivots.min() < pivot_floor:
            raise np.linalg.LinAlgError
        x = scipy.linalg.cho_solve((c, lower), pb)
    except np.linalg.LinAlgError:
        lam = restricted_eigenvalues(h)
        if np.min(np.abs(lam)) < pivot_floor:
            raise SingularComplementError(
                f"matrix singular on the zero-mean subspace "
                f"(smallest restricted eigenvalue {lam[0]:.3e})", float(lam[0])) from None
        x = scipy.linalg.solve(a, pb, assume_a="sym")
    return x - x.mean()


def jacobi_eigh(a: np.ndarray, tol: float = 1e-13, max_sweeps: int = 100):
    """Cyclic Jacobi eigensolver for a dense symmetric matrix.

    Sweeps over all off-diagonal pairs, annihilating each with a plane
    rotation, until the off-diagonal Frobenius norm is below
    ``tol * |A|_F``.  Returns ``(eigenvalues, eigenvectors)`` in ascending
    order, like :func:`numpy.linalg.eigh`.
    """
    a = check_symmetric(a).copy()
    n = a.shape[0]
    v = np.eye(n)
    if n == 0:
        return np.zeros(0), v
    # work on a unit-max copy so the Frobenius norms cannot overflow
    amax = np.abs(a).max()
    if amax == 0.0:
        return np.zeros(n), v
    a /= amax
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                elif theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise np.linalg.LinAlgError("Jacobi sweeps did not converge")
    w = np.diag(a) * amax
    order = np.argsort(w)
    return w[order], v[:, order]


def restricted_eigenvalues(h: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``H`` on the zero-mean subspace, ascending (``n - 1`` values)."""
    h = check_symmetric(h)
    q = complement_basis(h.shape[0])
    r = q.T @ h @ q
    r = 0.5 * (r + r.T)
    w, _ = jacobi_eigh(r)
    return w
