"""Traces along a continuation path and power-law fits against ``1 - t``."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cells, entropic
from .linalg import SingularComplementError, restricted_eigenvalues
from .ode import Trajectory
from .problem import Problem
from .quadrature import NonFiniteIntegrandError, QuadratureSpec
from .report import sup_error

__all__ = [
    "TraceSeries",
    "PowerLawFit",
    "power_law_fit",
    "eigen_trace",
    "eigen_error_trace",
    "mass_trace",
    "rhs_norm_trace",
    "error_report",
    "write_csv",
    "write_json",
]


@dataclass
class TraceSeries:
    """Values against ``t``; ``ordinate`` is ``(T, C)`` with NaN marking gaps."""

    abscissa: np.ndarray
    ordinate: np.ndarray
    label: str
    columns: tuple[str, ...] = ()

    def __post_init__(self):
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        ordinate = np.asarray(self.ordinate, dtype=float)
        if ordinate.ndim == 1:
            ordinate = ordinate[:, None]
        self.ordinate = ordinate
        if ordinate.shape[0] != self.abscissa.size:
            raise ValueError("abscissa and ordinate lengths differ")
        if np.any(np.diff(self.abscissa) <= 0):
            raise ValueError("abscissa must be strictly increasing")
        if not self.columns:
            self.columns = tuple(f"{self.label}_{k}" for k in range(ordinate.shape[1]))
        if len(self.columns) != ordinate.shape[1]:
            raise ValueError("one column name per ordinate column")

    def column(self, k: int = 0) -> "TraceSeries":
        return TraceSeries(self.abscissa, self.ordinate[:, k], self.columns[k], (self.columns[k],))


@dataclass(frozen=True)
class PowerLawFit:
    """``y ~ coefficient * (1 - t)^exponent``; residual is the log-space RMS."""

    coefficient: float
    exponent: float
    rms_residual: float
    n_samples: int


def power_law_fit(series: TraceSeries, window: tuple[float, float] = (0.5, 1.0),
                  column: int = 0) -> PowerLawFit:
    """Least-squares fit of ``log y`` against ``log(1 - t)`` over ``window``.

    Only samples with ``t < 1`` and a positive finite ordinate are used.

    Raises:
        ValueError: with fewer than five usable samples.
    """
    t = series.abscissa
    y = series.ordinate[:, column]
    lo, hi = window
    use = (t >= lo) & (t <= hi) & (t < 1.0) & np.isfinite(y) & (y > 0)
    if use.sum() < 5:
        raise ValueError(f"need at least 5 positive samples in {window}, have {int(use.sum())}")
    x = np.log1p(-t[use])
    ly = np.log(y[use])
    a = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    resid = ly - a @ coef
    return PowerLawFit(float(np.exp(coef[0])), float(coef[1]),
                       float(np.sqrt(np.mean(resid**2))), int(use.sum()))


def _sample(trajectory: Trajectory, every: int, include_final: bool):
    idx = [i for i, t in enumerate(trajectory.times) if t < 1.0][::every]
    if include_final and trajectory.complete:
        idx.append(len(trajectory.times) - 1)
    return idx


def eigen_trace(problem: Problem, trajectory: Trajectory, spec: QuadratureSpec | None = None,
                every: int = 1) -> TraceSeries:
    """Restricted eigenvalues of the entropic Hessian at each stored ``t < 1``.

    Points where the quadrature or the eigensolver fails are kept as NaN rows.
    """
    idx = _sample(trajectory, every, include_final=False)
    rows = []
    for i in idx:
        try:
            h = entropic.hessian_phi(problem, trajectory.potentials[i], trajectory.times[i], spec)
            rows.append(restricted_eigenvalues(h))
        except (entropic.QuadratureError, NonFiniteIntegrandError, np.linalg.LinAlgError):
            rows.append(np.full(problem.n - 1, np.nan))
    times = [trajectory.times[i] for i in idx]
    cols = tuple(f"lambda_{k + 1}" for k in range(problem.n - 1))
    return TraceSeries(times, np.array(rows).reshape(len(idx), problem.n - 1), "eigenvalues", cols)


def eigen_error_trace(series: TraceSeries, reference=None) -> TraceSeries:
    """``|lambda(t) - lambda*|`` per eigenvalue.

    ``lambda*`` is ``reference`` when given (for instance the restricted
    spectrum of the unregularised 1-d Jacobian), else the last row without
    gaps.
    """
    if reference is None:
        ok = np.flatnonzero(np.all(np.isfinite(series.ordinate), axis=1))
        if ok.size == 0:
            raise ValueError("no complete eigenvalue row to use as reference")
        reference = series.ordinate[ok[-1]]
    reference = np.asarray(reference, dtype=float)
    err = np.abs(series.ordinate - reference)
    cols = tuple(f"{c}_error" for c in series.columns)
    return TraceSeries(series.abscissa, err, "eigenvalue_error", cols)


def mass_trace(problem: Problem, trajectory: Trajectory, spec: QuadratureSpec | None = None,
               resolution=None, smoothed: bool = True, every: int = 1) -> TraceSeries:
    """Unregularised cell masses of ``psi(t)`` and, alongside, the smoothed masses.

    Columns are ``cell_k`` then ``smoothed_k``; the smoothed columns are
    missing (NaN) at ``t = 1`` and wherever quadrature fails.
    """
    idx = _sample(trajectory, every, include_final=True)
    n = problem.n
    rows = []
    for i in idx:
        t, psi = trajectory.times[i], trajectory.potentials[i]
        row = list(cells.cell_masses(problem, psi, resolution))
        if smoothed:
            try:
                sm = entropic.smoothed_masses(problem, psi, t, spec) if t < 1.0 else np.full(n, np.nan)
            except (entropic.QuadratureError, NonFiniteIntegrandError):
                sm = np.full(n, np.nan)
            row += list(sm)
        rows.append(row)
    cols = tuple(f"cell_{k}" for k in range(n))
    if smoothed:
        cols += tuple(f"smoothed_{k}" for k in range(n))
    times = [trajectory.times[i] for i in idx]
    return TraceSeries(times, np.array(rows).reshape(len(idx), len(cols)), "masses", cols)


def rhs_norm_trace(trajectory: Trajectory) -> TraceSeries:
    """``|psi'(t_n)|_2`` recorded by the solver at every step start."""
    recs = [r for r in trajectory.step_records if r.t < 1.0]
    return TraceSeries([r.t for r in recs], [r.rhs_norm for r in recs], "rhs_norm", ("rhs_norm",))


def error_report(psi_final, reference) -> float:
    """Sup-norm distance between two zero-mean potentials."""
    return sup_error(psi_final, reference)


def _cell(v: float) -> str:
    return "" if not math.isfinite(v) else repr(float(v))


def write_csv(series: TraceSeries, path) -> None:
    """One row per ``t``; missing values are empty fields."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t",) + tuple(series.columns))
        for t, row in zip(series.abscissa, series.ordinate):
            w.writerow([repr(float(t))] + [_cell(v) for v in row])


def write_json(series: TraceSeries, path, fit: PowerLawFit | None = None) -> None:
    data = {
        "label": series.label,
        "columns": list(series.columns),
        "abscissa": series.abscissa.tolist(),
        "ordinate": [[v if math.isfinite(v) else None for v in row] for row in series.ordinate.tolist()],
    }
    if fit is not None:
        data["fit"] = {"coefficient": fit.coefficient, "exponent": fit.exponent,
                       "rms_residual": fit.rms_residual, "n_samples": fit.n_samples}
    Path(path).write_text(json.dumps(data, indent=2))
