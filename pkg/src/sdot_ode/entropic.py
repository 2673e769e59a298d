"""Entropic dual functional and its derivatives.

For a potential ``psi`` and continuation time ``t in [0, 1)`` the functional is

    Phi(psi, t) = int (1-t) log sum_k exp(s_k(x)) drho - <psi, mu> - (1-t),
    s_k(x) = (psi_k - t c(x, y_k)) / (1 - t),

minimised over ``psi``.  Its gradient is ``int pi drho - mu`` where ``pi`` is
the softmax of ``s``.  The Hessian is ``int (diag(pi) - pi pi^T) drho / (1-t)``
(positive semi-definite, kernel spanned by the constant vector) and

    d/dt grad_j = (1-t)^-2 int sum_k D_jk(x) pi_j pi_k drho,
    D_jk(x) = (psi_j - c(x, y_j)) - (psi_k - c(x, y_k)).

Every exponential goes through :func:`stable_softmax`.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .problem import Problem
from .quadrature import QuadratureSpec, default_spec, integrate

__all__ = [
    "QuadratureError",
    "stable_softmax",
    "soft_cell_weights",
    "phi",
    "grad_phi",
    "smoothed_masses",
    "hessian_phi",
    "dt_grad_phi",
    "EntropicDerivatives",
    "derivatives",
    "cost_sup_norm",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature hit its subdivision limit before the tolerance."""


def _check_t(t: float) -> float:
    t = float(t)
    if np.isnan(t):
        raise ValueError("t is NaN")
    if not 0.0 <= t < 1.0:
        raise ValueError(f"need 0 <= t < 1, got {t}; use the cells module at t = 1")
    return t


def _check_psi(problem: Problem, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (problem.n,):
        raise ValueError(f"potential has shape {psi.shape}, expected ({problem.n},)")
    if not np.all(np.isfinite(psi)):
        raise ValueError("potential contains non-finite entries")
    return psi


def stable_softmax(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Softmax along the last axis with the max shifted out.

    Returns ``(weights, logsumexp)``.
    """
    m = np.max(s, axis=-1, keepdims=True)
    e = np.exp(s - m)
    z = np.sum(e, axis=-1, keepdims=True)
    return e / z, (m + np.log(z))[..., 0]


def _scores(problem: Problem, psi: np.ndarray, t: float, x: np.ndarray):
    c = problem.cost_matrix(x)
    return (psi - t * c) / (1.0 - t), c


def soft_cell_weights(problem: Problem, psi, t: float, x) -> np.ndarray:
    """Smoothed Laguerre-cell weights ``pi(x)``.

    ``x`` is one point (a scalar is accepted in 1-d) or an array of points
    of shape ``(P, dim)``; the result has shape ``(N,)`` or ``(P, N)``.
    """
    t = _check_t(t)
    psi = _check_psi(problem, psi)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 or (x.ndim == 1 and x.shape[0] == problem.dim)
    pts = x.reshape(-1, problem.dim)
    if not np.all(np.isfinite(pts)):
        raise ValueError("x contains non-finite entries")
    s, _ = _scores(problem, psi, t, pts)
    w, _ = stable_softmax(s)
    return w[0] if single else w


def _run(problem, f, spec):
    spec = spec or default_spec(problem.dim)
    res = integrate(f, problem.domain, spec)
    if not res.converged:
        raise QuadratureError(
            f"quadrature did not converge ({res.n_panels} panels, "
            f"error estimate {res.error_estimate:.3e})")
    return res.value


def phi(problem: Problem, psi, t: float, spec: QuadratureSpec | None = None) -> float:
    """Value of the entropic dual functional."""
    t = _check_t(t)
    psi = _check_psi(problem, psi)
    eps = 1.0 - t

    def f(x):
        s, _ = _scores(problem, psi, t, x)
        _, lse = stable_softmax(s)
        return eps * lse * problem.source.density(x)

    val = _run(problem, f, spec)[0]
    return float(val - psi @ problem.mu - eps)


def smoothed_masses(problem: Problem, psi, t: float,
                    spec: QuadratureSpec | None = None) -> np.ndarray:
    """Masses ``int pi_j drho`` of the smoothed Laguerre cells."""
    t = _check_t(t)
    psi = _check_psi(problem, psi)

    def f(x):
        s, _ = _scores(problem, psi, t, x)
        w, _ = stable_softmax(s)
        return w * problem.source.density(x)[:, None]

    return _run(problem, f, spec)


def grad_phi(problem: Problem, psi, t: float, spec: QuadratureSpec | None = None) -> np.ndarray:
    return smoothed_masses(problem, psi, t, spec) - problem.mu


class EntropicDerivatives(NamedTuple):
    masses: np.ndarray
    hessian: np.ndarray
    dt_grad: np.ndarray
    n_panels: int


def _pair_integrand(problem: Problem, psi: np.ndarray, t: float):
    n = problem.n
    iu, ju = np.triu_indices(n, 1)

    def f(x):
        s, c = _scores(problem, psi, t, x)
        w, _ = stable_softmax(s)
        rho = problem.source.density(x)[:, None]
        g = psi - c
        q = w[:, iu] * w[:, ju]
        r = (g[:, iu] - g[:, ju]) * q
        return np.concatenate([w, q, r], axis=1) * rho

    return f, iu, ju


def derivatives(problem: Problem, psi, t: float,
                spec: QuadratureSpec | None = None) -> EntropicDerivatives:
    """Smoothed masses, Hessian and mixed derivative from one integration.

    The Hessian is assembled from the pairwise integrals ``int pi_i pi_j``
    so that it is exactly symmetric with zero row sums; the mixed
    derivative is assembled from antisymmetric pair terms and sums to zero.
    """
    t = _check_t(t)
    psi = _check_psi(problem, psi)
    n = problem.n
    eps = 1.0 - t
    f, iu, ju = _pair_integrand(problem, psi, t)
    spec = spec or default_spec(problem.dim)
    res = integrate(f, problem.domain, spec)
    if not res.converged:
        raise QuadratureError(
            f"quadrature did not converge at t={t} ({res.n_panels} panels, "
            f"error estimate {res.error_estimate:.3e})")
    v = res.value
    m = iu.size
    masses = v[:n]
    q = v[n:n + m]
    r = v[n + m:]

    h = np.zeros((n, n))
    h[iu, ju] = -q
    h[ju, iu] = -q
    h[np.diag_indices(n)] = -h.sum(axis=1)
    h /= eps

    d = np.zeros((n, n))
    d[iu, ju] = r
    d[ju, iu] = -r
    dt = d.sum(axis=1) / eps**2
    return EntropicDerivatives(masses, h, dt, res.n_panels)


def hessian_phi(problem: Problem, psi, t: float, spec: QuadratureSpec | None = None) -> np.ndarray:
    return derivatives(problem, psi, t, spec).hessian


def dt_grad_phi(problem: Problem, psi, t: float, spec: QuadratureSpec | None = None) -> np.ndarray:
    """Partial derivative in ``t`` of :func:`grad_phi` at fixed ``psi``."""
    return derivatives(problem, psi, t, spec).dt_grad


def cost_sup_norm(problem: Problem, per_axis: int = 101) -> float:
    """Sampled ``max c(x, y_k)`` over a uniform grid of the domain."""
    dom = problem.domain
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(dom.lower, dom.upper)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    return float(problem.cost_matrix(grid).max())
