"""Continuation ODE from the entropic problem at t = 0 to the unregularised one at t = 1.

Differentiating ``grad Phi(psi(t), t) = 0`` in ``t`` gives

    psi'(t) = -[hess Phi]^+ d/dt grad Phi,    psi(0) = log mu - mean(log mu),

which is integrated with a fixed-step explicit third-order Runge-Kutta
method.  Stage times ``t_n + c_i h`` stay below one for ``0 < c_i < 1``, so
the singular point ``t = 1`` is reached by the last update but never
evaluated.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import cells, entropic
from .linalg import SingularComplementError, projected_solve, restricted_eigenvalues
from .problem import Problem
from .quadrature import NonFiniteIntegrandError, QuadratureSpec
from .report import SolveReport, sup_error

__all__ = [
    "RK3Tableau",
    "make_tableau",
    "initial_potential",
    "rhs",
    "StepHooks",
    "StepRecord",
    "Trajectory",
    "solve_ivp",
    "integrate_fixed",
]

ORDER_TOL = 1e-14


@dataclass(frozen=True)
class RK3Tableau:
    """Butcher coefficients of a three-stage explicit method."""

    alpha: float
    beta: float
    a21: float
    a31: float
    a32: float
    b1: float
    b2: float
    b3: float
    c2: float
    c3: float

    def order_defects(self) -> np.ndarray:
        """Residuals of the four third-order conditions."""
        return np.array([
            self.b1 + self.b2 + self.b3 - 1.0,
            self.b2 * self.c2 + self.b3 * self.c3 - 0.5,
            self.b2 * self.c2**2 + self.b3 * self.c3**2 - 1.0 / 3.0,
            self.b3 * self.a32 * self.c2 - 1.0 / 6.0,
        ])


def make_tableau(alpha: float = 0.125, beta: float = 0.25) -> RK3Tableau:
    """Third-order tableau with nodes ``c2 = alpha`` and ``c3 = beta``.

    Coefficients are evaluated in exact rational arithmetic when ``alpha``
    and ``beta`` are binary floats (they always are), then rounded once.

    Raises:
        ValueError: unless ``alpha, beta != 0``, ``alpha != beta`` and
            ``alpha != 2/3``, or if the order conditions fail to 1e-14.
    """
    if not (math.isfinite(alpha) and math.isfinite(beta)):
        raise ValueError("alpha and beta must be finite")
    a, b = Fraction(alpha), Fraction(beta)
    if a == 0 or b == 0 or a == b or a == Fraction(2, 3) or 3 * alpha == 2.0:
        raise ValueError(f"inadmissible tableau nodes alpha={alpha}, beta={beta}")
    a31 = b / a * (b - 3 * a * (1 - a)) / (3 * a - 2)
    a32 = -b / a * (b - a) / (3 * a - 2)
    b1 = 1 - (3 * a + 3 * b - 2) / (6 * a * b)
    b2 = (3 * b - 2) / (6 * a * (b - a))
    b3 = (2 - 3 * a) / (6 * b * (b - a))
    tab = RK3Tableau(float(a), float(b), float(a), float(a31), float(a32),
                     float(b1), float(b2), float(b3), float(a), float(b))
    scale = max(1.0, abs(tab.b1), abs(tab.b2), abs(tab.b3))
    if np.max(np.abs(tab.order_defects())) > ORDER_TOL * scale:
        raise ValueError(f"order conditions fail for alpha={alpha}, beta={beta}")
    return tab


def initial_potential(mu) -> np.ndarray:
    """Stationary point of the functional at ``t = 0``, normalised to zero mean."""
    logmu = np.log(np.asarray(mu, dtype=float))
    return logmu - logmu.mean()


def _rhs_full(problem: Problem, psi, t: float, spec: QuadratureSpec | None):
    d = entropic.derivatives(problem, psi, t, spec)
    return -projected_solve(d.hessian, d.dt_grad), d


def rhs(problem: Problem, psi, t: float, spec: QuadratureSpec | None = None) -> np.ndarray:
    """Right-hand side ``-H^+ d/dt grad Phi`` (zero mean).

    Raises:
        entropic.QuadratureError: quadrature did not converge.
        SingularComplementError: the Hessian is singular on the complement.
    """
    return _rhs_full(problem, psi, t, spec)[0]


@dataclass(frozen=True)
class StepHooks:
    """Optional per-step diagnostics, recorded on every ``every``-th step."""

    lambda_min: bool = False
    cell_masses: bool = False
    every: int = 1
    raster_resolution: int | None = None
    callback: Callable[[int, float, np.ndarray], None] | None = None

    def __post_init__(self):
        if self.every < 1:
            raise ValueError("every must be >= 1")


@dataclass
class StepRecord:
    t: float
    rhs_norm: float
    quad_converged: bool = True
    lambda_min: float | None = None
    cell_masses: np.ndarray | None = None


@dataclass
class Trajectory:
    """Accepted times and zero-mean potentials, one record per time."""

    times: list[float] = field(default_factory=list)
    potentials: list[np.ndarray] = field(default_factory=list)
    step_records: list[StepRecord] = field(default_factory=list)

    def append(self, t: float, psi: np.ndarray, record: StepRecord) -> None:
        self.times.append(float(t))
        self.potentials.append(np.array(psi, dtype=float))
        self.step_records.append(record)

    @property
    def final(self) -> np.ndarray:
        return self.potentials[-1]

    @property
    def complete(self) -> bool:
        return bool(self.times) and self.times[-1] == 1.0

    def as_array(self) -> np.ndarray:
        return np.array(self.potentials)


def _step_count(h: float) -> int:
    if not 0.0 < h <= 1.0:
        raise ValueError(f"step size must be in (0, 1], got {h}")
    n = round(1.0 / h)
    if n < 1 or abs(n * h - 1.0) > 1e-9:
        raise ValueError(f"1/h must be a positive integer, got h={h}")
    return n


def integrate_fixed(f: Callable[[np.ndarray, float], np.ndarray], y0, t0: float, t1: float,
                    n_steps: int, tableau: RK3Tableau | None = None) -> np.ndarray:
    """Generic fixed-step march of ``y' = f(y, t)`` with the tableau; returns ``y(t1)``."""
    tab = tableau or make_tableau()
    y = np.array(y0, dtype=float)
    h = (t1 - t0) / n_steps
    for n in range(n_steps):
        t = t0 + n * h
        k1 = f(y, t)
        k2 = f(y + h * tab.a21 * k1, t + tab.c2 * h)
        k3 = f(y + h * (tab.a31 * k1 + tab.a32 * k2), t + tab.c3 * h)
        y = y + h * (tab.b1 * k1 + tab.b2 * k2 + tab.b3 * k3)
    return y


def solve_ivp(problem: Problem, h: float = 1e-2, tableau: RK3Tableau | None = None,
              spec: QuadratureSpec | None = None, hooks: StepHooks | None = None,
              reference=None, raster_resolution: int | None = None
              ) -> tuple[Trajectory, SolveReport]:
    """March the continuation ODE from ``t = 0`` to ``t = 1``.

    Args:
        problem: the transport problem.
        h: step size with ``1/h`` an integer.
        tableau: Runge-Kutta coefficients; default ``alpha=1/8, beta=1/4``.
        spec: quadrature settings (per-dimension default when None).
        hooks: optional per-step diagnostics.
        reference: potential to measure the final error against.
        raster_resolution: raster size for the measure error in 2-d/3-d.

    Returns:
        ``(trajectory, report)``.  A quadrature failure, singular Hessian or
        non-finite state stops the march; the report then has status
        ``"failed"`` and holds the last accepted potential and time.
    """
    tab = tableau or make_tableau()
    if not (0.0 < tab.c2 < 1.0 and 0.0 < tab.c3 < 1.0):
        raise ValueError("stage nodes must lie in (0, 1) so no stage reaches t = 1")
    n_steps = _step_count(h)
    hooks = hooks or StepHooks()
    start = time.perf_counter()

    psi = initial_potential(problem.mu)
    traj = Trajectory()
    status, message = "converged", ""
    settings = {"h": h, "alpha": tab.alpha, "beta": tab.beta}

    for n in range(n_steps):
        t = n / n_steps
        try:
            k1, d = _rhs_full(problem, psi, t, spec)
            k2 = rhs(problem, psi + h * tab.a21 * k1, t + tab.c2 * h, spec)
            k3 = rhs(problem, psi + h * (tab.a31 * k1 + tab.a32 * k2), t + tab.c3 * h, spec)
        except (entropic.QuadratureError, SingularComplementError, NonFiniteIntegrandError) as exc:
            status, message = "failed", f"step {n} at t={t:.6g}: {exc}"
            traj.append(t, psi, StepRecord(t, math.nan, False))
            break
        record = StepRecord(t, float(np.linalg.norm(k1)))
        if n % hooks.every == 0:
            if hooks.lambda_min:
                record.lambda_min = float(restricted_eigenvalues(d.hessian)[0])
            if hooks.cell_masses:
                record.cell_masses = cells.cell_masses(problem, psi, hooks.raster_resolution)
            if hooks.callback is not None:
                hooks.callback(n, t, psi)
        traj.append(t, psi, record)

        new = psi + h * (tab.b1 * k1 + tab.b2 * k2 + tab.b3 * k3)
        if not np.all(np.isfinite(new)):
            status, message = "failed", f"non-finite potential after step {n}"
            break
        psi = new - new.mean()
    else:
        final = StepRecord(1.0, math.nan)
        if hooks.cell_masses:
            final.cell_masses = cells.cell_masses(problem, psi, hooks.raster_resolution)
        traj.append(1.0, psi, final)

    last_t, last_psi = traj.times[-1], traj.potentials[-1]
    err = meas = None
    if status == "converged":
        if reference is not None:
            err = sup_error(last_psi, reference)
        masses = cells.cell_masses(problem, last_psi, raster_resolution)
        meas = float(np.max(np.abs(masses - problem.mu)))
    report = SolveReport(
        method="ode", status=status, potential=[float(v) for v in last_psi],
        error=err, measure_error=meas, elapsed=time.perf_counter() - start,
        iterations=len(traj.times) - 1, message=message, last_t=last_t,
        settings=settings)
    return traj, report
