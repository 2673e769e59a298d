"""Adaptive Gauss-Kronrod cubature on 1-d intervals and 2-d/3-d boxes.

Integrands are vectorised: ``f(x)`` receives an array of shape ``(P, dim)``
and returns ``(P,)`` or ``(P, C)`` values.  All components share one
subdivision, so quantities assembled from several components (a Hessian,
say) are integrated on the same mesh.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial import legendre

from .problem import BoxDomain

__all__ = [
    "QuadratureSpec",
    "QuadratureResult",
    "NonFiniteIntegrandError",
    "gauss_kronrod",
    "integrate",
    "default_spec",
]

# evaluate at most this many points per integrand call
_CHUNK_POINTS = 200_000


class NonFiniteIntegrandError(FloatingPointError):
    """The integrand produced NaN or Inf."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Error control for :func:`integrate`.

    ``base_rule_order`` is the number of Gauss points per axis of one panel;
    the Kronrod extension uses ``2 * base_rule_order + 1``.
    ``max_subdivisions`` caps the total number of panels (boxes).
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_subdivisions: int = 2**14
    base_rule_order: int = 7
    initial_panels: int = 4

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.abs_tol >= 0:
            raise ValueError("abs_tol must be non-negative")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.base_rule_order < 2:
            raise ValueError("base_rule_order must be >= 2")
        if self.initial_panels < 1:
            raise ValueError("initial_panels must be >= 1")


def default_spec(dim: int) -> QuadratureSpec:
    """Per-dimension defaults used by the solvers."""
    if dim == 1:
        return QuadratureSpec(rel_tol=1e-10, abs_tol=1e-13, max_subdivisions=2**14,
                              base_rule_order=7, initial_panels=8)
    if dim == 2:
        return QuadratureSpec(rel_tol=1e-8, abs_tol=1e-11, max_subdivisions=2**14,
                              base_rule_order=5, initial_panels=4)
    if dim == 3:
        return QuadratureSpec(rel_tol=1e-6, abs_tol=1e-9, max_subdivisions=2**13,
                              base_rule_order=3, initial_panels=4)
    raise ValueError(f"unsupported dimension {dim}")


class QuadratureResult(NamedTuple):
    value: np.ndarray
    error_estimate: float
    converged: bool
    n_panels: int = 0


@lru_cache(maxsize=None)
def gauss_kronrod(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kronrod extension of the ``n``-point Gauss-Legendre rule on [-1, 1].

    Returns ``(nodes, kronrod_weights, gauss_weights)`` where ``nodes`` has
    ``2n + 1`` sorted entries and ``gauss_weights`` is zero on the Kronrod-only
    nodes.  The Kronrod rule is exact for polynomials of degree ``3n + 1``
    (``3n + 2`` for even ``n``).

    The ``n + 1`` new nodes are the zeros of the Stieltjes polynomial
    ``E_{n+1}``, fixed by ``int P_n E_{n+1} x^k dx = 0`` for ``k < n + 1``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xg, wg = legendre.leggauss(n)
    # exact for the degree 3n+1 products below
    xq, wq = legendre.leggauss(2 * n + 2)
    pn = legendre.legval(xq, np.eye(n + 1)[n])
    basis = np.stack([legendre.legval(xq, np.eye(n + 2)[j]) for j in range(n + 2)])
    rows = []
    for k in range(n + 1):
        rows.append((wq * pn * xq**k) @ basis.T)
    rows = np.array(rows)
    # leading Legendre coefficient of E_{n+1} fixed to one
    coef, *_ = np.linalg.lstsq(rows[:, :-1], -rows[:, -1], rcond=None)
    coef = np.append(coef, 1.0)
    xs = np.sort(legendre.legroots(coef).real)
    nodes = np.sort(np.concatenate([xg, xs]))

    m = 2 * n + 1
    vander = legendre.legvander(nodes, m - 1).T
    moments = np.zeros(m)
    moments[0] = 2.0
    wk = np.linalg.solve(vander, moments)

    gw = np.zeros(m)
    for x, w in zip(xg, wg):
        gw[np.argmin(np.abs(nodes - x))] = w
    return nodes, wk, gw


def _box_rule(dim: int, n: int):
    """Tensor Kronrod nodes on [-1,1]^dim with the embedded rules.

    Returns ``(nodes, w_kronrod, w_gauss, w_axis)`` where ``w_axis[i]`` is the
    rule using Gauss weights along axis ``i`` and Kronrod weights elsewhere.
    """
    x, wk, wg = gauss_kronrod(n)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)

    def tensor(ws):
        out = ws[0]
        for w in ws[1:]:
            out = np.multiply.outer(out, w)
        return np.ravel(out)

    w_k = tensor([wk] * dim)
    w_g = tensor([wg] * dim)
    w_axis = np.stack([tensor([wg if j == i else wk for j in range(dim)])
                       for i in range(dim)])
    return nodes, w_k, w_g, w_axis


_box_rule = lru_cache(maxsize=None)(_box_rule)


def _evaluate(f, lo, hi, rule):
    """Apply the tensor rule on every box; returns values, errors, axis errors."""
    nodes, w_k, w_g, w_axis = rule
    m, dim = lo.shape
    q = nodes.shape[0]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    vol = np.prod(half, axis=1)

    per_chunk = max(1, _CHUNK_POINTS // q)
    vals, errs, axes = [], [], []
    for start in range(0, m, per_chunk):
        sl = slice(start, start + per_chunk)
        pts = mid[sl, None, :] + half[sl, None, :] * nodes[None, :, :]
        fx = np.asarray(f(pts.reshape(-1, dim)), dtype=float)
        if fx.ndim == 1:
            fx = fx[:, None]
        fx = fx.reshape(pts.shape[0], q, -1)
        if not np.all(np.isfinite(fx)):
            raise NonFiniteIntegrandError("integrand returned a non-finite value")
        v = np.einsum("q,bqc->bc", w_k, fx) * vol[sl, None]
        vg = np.einsum("q,bqc->bc", w_g, fx) * vol[sl, None]
        va = np.einsum("aq,bqc->bac", w_axis, fx) * vol[sl, None, None]
        vals.append(v)
        errs.append(np.abs(v - vg))
        # per-axis error, max over components; used to pick the bisection axis
        axes.append(np.abs(va - v[:, None, :]).max(axis=2))
    return np.concatenate(vals), np.concatenate(errs), np.concatenate(axes)


def _initial_boxes(domain: BoxDomain, k: int):
    lower = np.asarray(domain.lower, dtype=float)
    upper = np.asarray(domain.upper, dtype=float)
    edges = [np.linspace(lower[i], upper[i], k + 1) for i in range(domain.dim)]
    lo_grid = np.meshgrid(*[e[:-1] for e in edges], indexing="ij")
    hi_grid = np.meshgrid(*[e[1:] for e in edges], indexing="ij")
    lo = np.stack([g.ravel() for g in lo_grid], axis=-1)
    hi = np.stack([g.ravel() for g in hi_grid], axis=-1)
    return lo, hi


def integrate(f: Callable[[np.ndarray], np.ndarray], domain: BoxDomain,
              spec: QuadratureSpec | None = None) -> QuadratureResult:
    """Integrate a vectorised, possibly vector-valued ``f`` over ``domain``.

    Globally adaptive: every round bisects the panels whose (tolerance-scaled)
    error exceeds the average share of the error budget, the worst panel
    always included.  Multi-dimensional boxes are halved along the axis whose
    embedded Gauss rule disagrees most with the Kronrod rule.

    Returns a :class:`QuadratureResult`; ``value`` has shape ``(C,)``.
    ``converged`` is False when ``spec.max_subdivisions`` was exhausted first,
    in which case the best available estimate is still returned.

    Raises:
        NonFiniteIntegrandError: if ``f`` yields NaN or Inf.
    """
    if spec is None:
        spec = default_spec(domain.dim)
    rule = _box_rule(domain.dim, spec.base_rule_order)
    lo, hi = _initial_boxes(domain, spec.initial_panels)
    val, err, axerr = _evaluate(f, lo, hi, rule)

    converged = False
    while True:
        total = val.sum(axis=0)
        total_err = err.sum(axis=0)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total))
        if np.all(total_err <= tol):
            converged = True
            break
        m = lo.shape[0]
        budget = spec.max_subdivisions - m
        if budget <= 0:
            break
        score = (err / np.where(tol > 0, tol, np.inf)).max(axis=1)
        chosen = np.flatnonzero(score >= score.sum() / m / 2)
        if chosen.size == 0:
            chosen = np.array([int(np.argmax(score))])
        if chosen.size > budget:
            chosen = chosen[np.argsort(score[chosen])[::-1][:budget]]

        axis = np.argmax(axerr[chosen], axis=1)
        plo, phi = lo[chosen], hi[chosen]
        cut = 0.5 * (plo[np.arange(chosen.size), axis] + phi[np.arange(chosen.size), axis])
        left_hi = phi.copy()
        left_hi[np.arange(chosen.size), axis] = cut
        right_lo = plo.copy()
        right_lo[np.arange(chosen.size), axis] = cut
        new_lo = np.concatenate([plo, right_lo])
        new_hi = np.concatenate([left_hi, phi])
        nv, ne, na = _evaluate(f, new_lo, new_hi, rule)

        keep = np.ones(m, dtype=bool)
        keep[chosen] = False
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        axerr = np.concatenate([axerr[keep], na])

    total = val.sum(axis=0)
    return QuadratureResult(total, float(err.sum(axis=0).max()), converged, lo.shape[0])
