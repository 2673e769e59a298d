"""Newton's method on the unregularised mass balance ``G(psi) = mu - rho(Lag(psi))``.

In 1-d the Jacobian is assembled exactly from the interval boundaries; in
2-d and 3-d it is a centred finite difference of raster masses.  There is
no globalisation: runs from poor initial guesses are allowed to fail.

Also provides two reference solvers used for checking: the exact 1-d
solution by quantile inversion and a Newton solve of the entropic problem
at fixed ``t``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import cells, entropic
from .linalg import SingularComplementError, projected_solve
from .problem import Problem
from .quadrature import QuadratureSpec
from .report import SolveReport, sup_error

__all__ = [
    "NewtonConfig",
    "SingularJacobianError",
    "newton_residual",
    "newton_jacobian_1d",
    "fd_jacobian",
    "newton_solve",
    "reference_solution_1d",
    "entropic_solution",
]


class SingularJacobianError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class NewtonConfig:
    """Stopping rule and Jacobian settings.

    ``tol`` bounds ``max |G|``; ``fd_step`` is the centred difference step
    of the 2-d/3-d Jacobian; ``damping`` scales every step.
    """

    tol: float = 1e-12
    max_iters: int = 100
    fd_step: float = 1e-5
    damping: float = 1.0
    raster_resolution: int | None = None
    divergence_window: int = 5

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must be in (0, 1]")


def _masses(problem: Problem, psi, resolution, method="label"):
    return cells.cell_masses(problem, psi, resolution, method)


def newton_residual(problem: Problem, psi, resolution=None, method: str = "label") -> np.ndarray:
    """``G_i = mu_i - rho(Lag_i(psi))``."""
    return problem.mu - _masses(problem, psi, resolution, method)


def newton_jacobian_1d(problem: Problem, psi) -> np.ndarray:
    """Exact Jacobian of :func:`newton_residual` in 1-d.

    For cells ``i, j`` sharing the interior boundary ``x``, the off-diagonal
    entry is ``rho(x) / |d_x c(x, y_i) - d_x c(x, y_j)|`` (positive, since
    raising ``psi_j`` takes mass from ``i``); the diagonal makes rows sum to
    zero.

    Raises:
        SingularJacobianError: when the two cost gradients coincide.
    """
    psi = np.asarray(psi, dtype=float)
    dec = cells.laguerre_boundaries_1d(problem, psi)
    n = problem.n
    y = problem.y[:, 0]
    jac = np.zeros((n, n))
    p = problem.cost.p
    for i, j, x in dec.interfaces:
        gi = p * abs(x - y[i]) ** (p - 1) * np.sign(x - y[i])
        gj = p * abs(x - y[j]) ** (p - 1) * np.sign(x - y[j])
        gap = abs(gi - gj)
        if gap < 1e-14:
            raise SingularJacobianError(f"coincident cost gradients at x={x}")
        v = float(problem.source.density(np.array([[x]]))[0]) / gap
        jac[i, j] += v
        jac[j, i] += v
    jac[np.diag_indices(n)] = -jac.sum(axis=1)
    return jac


def fd_jacobian(problem: Problem, psi, step: float = 1e-5, resolution=None,
                method: str = "fractional") -> np.ndarray:
    """Centred finite-difference Jacobian of the residual, symmetrised."""
    psi = np.asarray(psi, dtype=float)
    n = problem.n
    jac = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        gp = newton_residual(problem, psi + e, resolution, method)
        gm = newton_residual(problem, psi - e, resolution, method)
        jac[:, k] = (gp - gm) / (2.0 * step)
    jac = 0.5 * (jac + jac.T)
    jac[np.diag_indices(n)] -= jac.sum(axis=1)
    return jac


def newton_solve(problem: Problem, psi0=None, cfg: NewtonConfig | None = None,
                 reference=None) -> SolveReport:
    """Plain Newton iteration ``psi <- psi - damping * J^+ G``.

    Args:
        problem: the transport problem.
        psi0: initial guess (zero vector when None); its mean is removed.
        cfg: stopping rule and Jacobian settings.
        reference: potential to report the final error against.

    Returns:
        A report with status ``"converged"`` when ``max |G| <= tol``.  It is
        ``"failed"`` after a singular Jacobian, a non-finite residual,
        ``divergence_window`` consecutive residual increases or
        ``max_iters`` iterations.
    """
    cfg = cfg or NewtonConfig()
    start = time.perf_counter()
    n = problem.n
    psi = np.zeros(n) if psi0 is None else np.array(psi0, dtype=float)
    if psi.shape != (n,):
        raise ValueError("initial guess has the wrong length")
    psi = psi - psi.mean()
    # 2-d/3-d: fractional raster masses so the residual varies smoothly
    method = "label" if problem.dim == 1 else "fractional"
    res_of = lambda v: newton_residual(problem, v, cfg.raster_resolution, method)  # noqa: E731

    history: list[float] = []
    status, message = "failed", f"no convergence in {cfg.max_iters} iterations"
    growth = 0
    it = 0
    g = res_of(psi)
    while True:
        r = float(np.max(np.abs(g)))
        history.append(r)
        if not math.isfinite(r):
            message = "non-finite residual"
            break
        if r <= cfg.tol:
            status, message = "converged", ""
            break
        if len(history) > 1 and r > history[-2]:
            growth += 1
            if growth >= cfg.divergence_window:
                message = f"residual grew {growth} times in a row"
                break
        else:
            growth = 0
        if it >= cfg.max_iters:
            break
        try:
            if problem.dim == 1:
                jac = newton_jacobian_1d(problem, psi)
            else:
                jac = fd_jacobian(problem, psi, cfg.fd_step, cfg.raster_resolution)
            # J is negative semi-definite; solve with -J
            step = projected_solve(-jac, g)
        except (SingularJacobianError, SingularComplementError) as exc:
            message = f"singular Jacobian at iteration {it}: {exc}"
            break
        psi = psi + cfg.damping * step
        psi -= psi.mean()
        it += 1
        g = res_of(psi)

    err = sup_error(psi, reference) if reference is not None and status == "converged" else None
    meas = float(np.max(np.abs(cells.cell_masses(problem, psi, cfg.raster_resolution)
                               - problem.mu))) if status == "converged" else None
    return SolveReport(
        method="newton", status=status, potential=[float(v) for v in psi], error=err,
        measure_error=meas, elapsed=time.perf_counter() - start, iterations=it,
        message=message, residual_history=history,
        settings={"tol": cfg.tol, "max_iters": cfg.max_iters, "fd_step": cfg.fd_step,
                  "damping": cfg.damping})


def reference_solution_1d(problem: Problem) -> np.ndarray:
    """Exact zero-mean potential of a 1-d problem by quantile inversion.

    The optimal map is monotone, so with targets sorted the boundary between
    consecutive cells is the quantile of the cumulative target mass; the
    potential then follows from the indifference condition at each
    boundary.
    """
    if problem.dim != 1:
        raise ValueError("reference_solution_1d needs a 1-d problem")
    y = problem.y[:, 0]
    order = np.argsort(y, kind="stable")
    mu = problem.mu[order]
    cum = np.cumsum(mu)[:-1]
    src = problem.source
    total = src.cdf_1d(problem.domain.upper[0])
    xs = [src.quantile_1d(q * total) for q in cum]
    p = problem.cost.p
    ys = y[order]
    psi_sorted = np.zeros(problem.n)
    for i, x in enumerate(xs):
        psi_sorted[i + 1] = psi_sorted[i] + abs(x - ys[i + 1]) ** p - abs(x - ys[i]) ** p
    psi = np.empty(problem.n)
    psi[order] = psi_sorted
    return psi - psi.mean()


def entropic_solution(problem: Problem, t: float, psi0=None, tol: float = 1e-12,
                      max_iters: int = 50, spec: QuadratureSpec | None = None) -> np.ndarray:
    """Minimiser of the entropic functional at fixed ``t`` by damped Newton.

    Steps are halved until the functional decreases; used as an independent
    check of points on the continuation path.

    Args:
        problem: transport problem.
        t: continuation parameter in ``[0, 1)``.
        psi0: starting potential; defaults to the closed-form ``t = 0`` minimiser.
        tol: stopping tolerance on the max-norm of the gradient.
        max_iters: iteration cap.
        spec: quadrature settings.

    Returns:
        The zero-mean minimiser.

    Raises:
        RuntimeError: if the tolerance is not reached.
    """
    psi = np.array(entropic_initial(problem) if psi0 is None else psi0, dtype=float)
    psi -= psi.mean()
    f = entropic.phi(problem, psi, t, spec)
    for _ in range(max_iters):
        d = entropic.derivatives(problem, psi, t, spec)
        g = d.masses - problem.mu
        if np.max(np.abs(g)) <= tol:
            return psi
        try:
            step = -projected_solve(d.hessian, g)
        except SingularComplementError:
            # far from the minimiser the Hessian can vanish numerically;
            # shift it on the zero-mean subspace (Levenberg style)
            n = len(psi)
            shift = np.max(np.abs(g)) * (np.eye(n) - np.full((n, n), 1.0 / n))
            step = -projected_solve(d.hessian + shift, g)
        lam = 1.0
        while lam > 1e-8:
            trial = psi + lam * step
            ft = entropic.phi(problem, trial, t, spec)
            if ft <= f + 1e-4 * lam * (g @ step) or lam < 1.0 and ft <= f:
                break
            lam *= 0.5
        psi, f = trial - trial.mean(), ft
    d = entropic.derivatives(problem, psi, t, spec)
    if np.max(np.abs(d.masses - problem.mu)) > max(tol, 1e-9):
        raise RuntimeError("entropic Newton did not converge")
    return psi


def entropic_initial(problem: Problem) -> np.ndarray:
    logmu = np.log(problem.mu)
    return logmu - logmu.mean()
