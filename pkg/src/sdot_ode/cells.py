"""Unregularised Laguerre cells.

In 1-d the cells are intervals (the cost is a convex function of ``x - y``,
so the owning target is nondecreasing in ``x``) and are computed exactly.
In 2-d and 3-d cell masses come from a raster of the box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .problem import BoxDomain, Problem
from .quadrature import QuadratureSpec, integrate

__all__ = [
    "CellDecomposition1D",
    "RasterGrid",
    "laguerre_boundaries_1d",
    "cell_masses",
    "raster_grid",
    "raster_masses",
    "write_raster",
    "default_resolution",
]

_BISECT_MAX_ITER = 200
_BISECT_TOL = 1e-14
_INTERVAL_SPEC = QuadratureSpec(rel_tol=1e-14, abs_tol=1e-16, max_subdivisions=256,
                                base_rule_order=7, initial_panels=1)


@dataclass(frozen=True)
class CellDecomposition1D:
    """Interval cells of a 1-d problem.

    ``order[i]`` is the target index of the ``i``-th cell from the left.
    Cell ``order[i]`` is ``[edges[i], edges[i + 1]]`` where ``edges`` is
    ``boundaries`` padded with the domain ends; empty cells have zero length.
    ``interfaces`` lists ``(left_target, right_target, x)`` for every
    boundary strictly inside the domain between two non-empty cells.
    """

    boundaries: np.ndarray
    order: np.ndarray
    lower: float
    upper: float
    interfaces: tuple[tuple[int, int, float], ...]

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([[self.lower], self.boundaries, [self.upper]])

    def intervals(self) -> np.ndarray:
        """``(N, 2)`` array of cell intervals indexed by target."""
        e = self.edges
        out = np.empty((self.order.size, 2))
        out[self.order, 0] = e[:-1]
        out[self.order, 1] = e[1:]
        return out


def _crossing(cost, yj: float, yk: float, pj: float, pk: float, lo: float, hi: float) -> float:
    """Point where ``c(x, yj) - pj = c(x, yk) - pk`` clamped to ``[lo, hi]``; needs ``yj < yk``."""

    def g(x):
        return abs(x - yj) ** cost.p - pj - (abs(x - yk) ** cost.p - pk)

    if g(lo) >= 0.0:
        return lo
    if g(hi) <= 0.0:
        return hi
    a, b = lo, hi
    for _ in range(_BISECT_MAX_ITER):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        if g(m) > 0.0:
            b = m
        else:
            a = m
        if b - a <= _BISECT_TOL * max(1.0, abs(a)) and g(a) == g(b):
            break
    # whichever bracket end has the smaller residual
    return a if abs(g(a)) <= abs(g(b)) else b


def laguerre_boundaries_1d(problem: Problem, psi) -> CellDecomposition1D:
    """Interval Laguerre cells of a 1-d problem.

    Targets are visited in increasing order while a stack keeps the cells
    that own part of the domain (the lower envelope of ``c(., y_k) - psi_k``).

    Raises:
        ValueError: for a non 1-d problem or duplicate target points.
    """
    if problem.dim != 1:
        raise ValueError("laguerre_boundaries_1d needs a 1-d problem")
    psi = np.asarray(psi, dtype=float)
    y = problem.y[:, 0]
    order = np.argsort(y, kind="stable")
    if np.any(np.diff(y[order]) == 0.0):
        raise ValueError("duplicate target points")
    lo, hi = problem.domain.lower[0], problem.domain.upper[0]

    stack: list[list] = []  # [target, left edge]
    for k in order:
        left = lo
        while stack:
            j, jleft = stack[-1]
            x = _crossing(problem.cost, y[j], y[k], psi[j], psi[k], lo, hi)
            if x <= jleft:
                stack.pop()
                left = lo
                continue
            left = x
            break
        if left >= hi:
            continue
        stack.append([k, left])

    owner_left = {k: left for k, left in stack}
    n = problem.n
    right_of = {}
    for idx, (k, _) in enumerate(stack):
        right_of[k] = stack[idx + 1][1] if idx + 1 < len(stack) else hi

    edges = np.empty(n + 1)
    edges[0] = lo
    edges[n] = hi
    # walk right to left so empty cells collapse onto the next non-empty left edge
    nxt = hi
    for pos in range(n - 1, -1, -1):
        k = order[pos]
        if k in owner_left:
            edges[pos + 1] = right_of[k]
            nxt = owner_left[k]
        else:
            edges[pos + 1] = nxt
    edges[1:n] = np.maximum.accumulate(edges[1:n])

    interfaces = []
    for (j, _), (k, x) in zip(stack[:-1], stack[1:]):
        if lo < x < hi:
            interfaces.append((int(j), int(k), float(x)))
    return CellDecomposition1D(edges[1:n].copy(), order, lo, hi, tuple(interfaces))


def _interval_mass(problem: Problem, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    src = problem.source
    if src.kind == "uniform":
        return src.normalization_constant * (b - a)
    res = integrate(src.density, BoxDomain((a,), (b,)), _INTERVAL_SPEC)
    return float(res.value[0])


def default_resolution(dim: int) -> int:
    return {1: 4096, 2: 512, 3: 128}[dim]


@dataclass(frozen=True)
class RasterGrid:
    """Pixel (voxel) ownership of a box.

    ``labels`` and ``weights`` have shape ``resolution``; ``weights`` holds
    the density at each pixel centre times the pixel volume.
    """

    resolution: tuple[int, ...]
    labels: np.ndarray
    weights: np.ndarray


def _pixel_centres(domain: BoxDomain, resolution: tuple[int, ...]):
    lo = np.asarray(domain.lower)
    hi = np.asarray(domain.upper)
    h = (hi - lo) / np.asarray(resolution)
    axes = [lo[i] + h[i] * (np.arange(resolution[i]) + 0.5) for i in range(domain.dim)]
    return axes, h


def _iter_chunks(axes, chunk=1 << 17):
    """Yield flat index ranges and centre coordinates of a tensor grid, row-major."""
    shape = tuple(len(a) for a in axes)
    total = math.prod(shape)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        sub = np.unravel_index(idx, shape)
        pts = np.stack([axes[i][sub[i]] for i in range(len(axes))], axis=-1)
        yield idx, pts


def _resolution_tuple(problem: Problem, resolution) -> tuple[int, ...]:
    if resolution is None:
        resolution = default_resolution(problem.dim)
    if np.isscalar(resolution):
        resolution = (int(resolution),) * problem.dim
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != problem.dim or min(resolution) < 1:
        raise ValueError(f"bad raster resolution {resolution}")
    return resolution


def raster_grid(problem: Problem, psi, resolution=None) -> RasterGrid:
    """Label each pixel centre by ``argmin_k c(x, y_k) - psi_k`` (lowest index on ties)."""
    psi = np.asarray(psi, dtype=float)
    resolution = _resolution_tuple(problem, resolution)
    axes, h = _pixel_centres(problem.domain, resolution)
    vol = float(np.prod(h))
    labels = np.empty(math.prod(resolution), dtype=np.int32)
    weights = np.empty(math.prod(resolution))
    for idx, pts in _iter_chunks(axes):
        labels[idx] = np.argmin(problem.cost_matrix(pts) - psi, axis=1)
        weights[idx] = problem.source.density(pts) * vol
    return RasterGrid(resolution, labels.reshape(resolution), weights.reshape(resolution))


def raster_masses(problem: Problem, psi, resolution=None, method: str = "label") -> np.ndarray:
    """Cell masses from a raster.

    ``method="label"`` assigns each pixel wholly to its owner.
    ``method="fractional"`` splits pixels cut by a boundary between the best
    and second-best target, using the signed distance to the linearised
    boundary; the masses then vary continuously with ``psi``, which finite
    differences need.
    """
    psi = np.asarray(psi, dtype=float)
    n = problem.n
    if method == "label":
        grid = raster_grid(problem, psi, resolution)
        return np.bincount(grid.labels.ravel(), weights=grid.weights.ravel(), minlength=n)
    if method != "fractional":
        raise ValueError(f"unknown raster method {method!r}")
    resolution = _resolution_tuple(problem, resolution)
    axes, h = _pixel_centres(problem.domain, resolution)
    vol = float(np.prod(h))
    y = problem.y
    masses = np.zeros(n)
    for _, pts in _iter_chunks(axes):
        scores = problem.cost_matrix(pts) - psi
        part = np.argpartition(scores, 1, axis=1)[:, :2]
        s2 = np.take_along_axis(scores, part, axis=1)
        swap = s2[:, 0] > s2[:, 1]
        part[swap] = part[swap][:, ::-1]
        k1, k2 = part[:, 0], part[:, 1]
        gap = np.abs(s2[:, 1] - s2[:, 0])
        diff1 = pts - y[k1]
        diff2 = pts - y[k2]
        grad = _radial_grad(problem.cost.p, diff2) - _radial_grad(problem.cost.p, diff1)
        width = np.abs(grad) @ h
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(width > 0, np.clip(0.5 + gap / width, 0.5, 1.0), 1.0)
        w = problem.source.density(pts) * vol
        masses += np.bincount(k1, weights=frac * w, minlength=n)
        masses += np.bincount(k2, weights=(1.0 - frac) * w, minlength=n)
    return masses


def _radial_grad(p: float, diff: np.ndarray) -> np.ndarray:
    if p == 2.0:
        return 2.0 * diff
    r2 = np.sum(diff * diff, axis=-1, keepdims=True)
    return p * r2 ** (0.5 * p - 1.0) * diff


def cell_masses(problem: Problem, psi, resolution=None, method: str = "label") -> np.ndarray:
    """Source mass of every Laguerre cell.

    Exact interval integrals in 1-d; raster sums (see :func:`raster_masses`)
    in 2-d and 3-d.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (problem.n,):
        raise ValueError("potential has the wrong length")
    if problem.dim == 1:
        iv = laguerre_boundaries_1d(problem, psi).intervals()
        return np.array([_interval_mass(problem, a, b) for a, b in iv])
    return raster_masses(problem, psi, resolution, method)


def write_raster(grid: RasterGrid, path) -> None:
    """Plain-text label dump, one row per line along the last axis (row-major)."""
    labels = grid.labels.reshape(-1, grid.resolution[-1])
    np.savetxt(Path(path), labels, fmt="%d")
