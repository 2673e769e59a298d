"""Problem data: source density on a box, discrete target, Euclidean-power cost.

Also holds the registry of named test problems (``E0`` ... ``E7``) and the
JSON problem-spec format.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf

__all__ = [
    "BoxDomain",
    "SourceMeasure",
    "TargetMeasure",
    "CostFunction",
    "Problem",
    "EXAMPLE_IDS",
    "builtin_example",
    "exact_solution",
    "cost_eval",
    "random_problem",
    "problem_to_dict",
    "problem_from_dict",
    "save_problem",
    "load_problem",
]


@dataclass(frozen=True)
class BoxDomain:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have the same length")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("need lower[i] < upper[i] on every axis")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)


def unit_box(dim: int) -> BoxDomain:
    return BoxDomain((0.0,) * dim, (1.0,) * dim)


@dataclass(frozen=True)
class SourceMeasure:
    """Absolutely continuous source measure on a box.

    ``kind`` is ``"uniform"`` or ``"gaussian_bump"``.  A gaussian bump has
    params ``center`` (one entry per axis) and ``scale`` and is proportional
    to ``exp(-scale * |x - center|^2)``.  ``normalization_constant`` multiplies
    the unnormalised density; when left as None it is computed so the
    measure has unit mass.  ``display_constant`` is kept only for printing
    (for instance the rounded constant quoted for a named example).
    """

    domain: BoxDomain
    kind: str = "uniform"
    params: tuple = ()
    normalization_constant: float | None = None
    display_constant: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian_bump"):
            raise ValueError(f"unknown density kind {self.kind!r}")
        params = dict(self.params)
        if self.kind == "gaussian_bump":
            center = tuple(float(c) for c in params.get("center", [0.5] * self.domain.dim))
            if len(center) != self.domain.dim:
                raise ValueError("gaussian_bump center has the wrong dimension")
            scale = float(params.get("scale", 1.0))
            if scale <= 0:
                raise ValueError("gaussian_bump scale must be positive")
            params = {"center": center, "scale": scale}
        elif params:
            raise ValueError("uniform density takes no params")
        object.__setattr__(self, "params", tuple(sorted(params.items())))
        if self.normalization_constant is None:
            object.__setattr__(self, "normalization_constant", self._unit_mass_constant())
        else:
            object.__setattr__(self, "normalization_constant", float(self.normalization_constant))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def _unit_mass_constant(self) -> float:
        lo = np.asarray(self.domain.lower)
        hi = np.asarray(self.domain.upper)
        if self.kind == "uniform":
            return 1.0 / self.domain.volume
        p = self.param_dict
        a = math.sqrt(p["scale"])
        c = np.asarray(p["center"])
        # product of 1-d gaussian integrals
        per_axis = 0.5 * math.sqrt(math.pi) / a * (erf(a * (hi - c)) - erf(a * (lo - c)))
        return float(1.0 / np.prod(per_axis))

    def density(self, x: np.ndarray) -> np.ndarray:
        """Density at points ``x`` of shape ``(P, dim)``; no masking outside the box."""
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            return np.full(x.shape[:-1], self.normalization_constant)
        p = self.param_dict
        r2 = np.sum((x - np.asarray(p["center"])) ** 2, axis=-1)
        return self.normalization_constant * np.exp(-p["scale"] * r2)

    def cdf_1d(self, x: float) -> float:
        """Mass of ``[lower, x]`` for a 1-d measure (closed form)."""
        if self.domain.dim != 1:
            raise ValueError("cdf_1d needs a 1-d measure")
        lo, hi = self.domain.lower[0], self.domain.upper[0]
        x = min(max(float(x), lo), hi)
        if self.kind == "uniform":
            return self.normalization_constant * (x - lo)
        p = self.param_dict
        a = math.sqrt(p["scale"])
        c = p["center"][0]
        return float(self.normalization_constant * 0.5 * math.sqrt(math.pi) / a
                     * (erf(a * (x - c)) - erf(a * (lo - c))))

    def quantile_1d(self, q: float) -> float:
        """Smallest ``x`` with ``cdf_1d(x) = q`` (clamped to the interval)."""
        lo, hi = self.domain.lower[0], self.domain.upper[0]
        if q <= 0.0:
            return lo
        if q >= self.cdf_1d(hi):
            return hi
        if self.kind == "uniform":
            return lo + q / self.normalization_constant
        return float(brentq(lambda x: self.cdf_1d(x) - q, lo, hi, xtol=1e-16, rtol=1e-15))

    def density_bounds(self) -> tuple[float, float]:
        """Lower and upper bounds of the density on the box."""
        if self.kind == "uniform":
            return self.normalization_constant, self.normalization_constant
        p = self.param_dict
        c = np.asarray(p["center"])
        lo = np.asarray(self.domain.lower)
        hi = np.asarray(self.domain.upper)
        nearest = np.clip(c, lo, hi)
        farthest = np.where(np.abs(lo - c) > np.abs(hi - c), lo, hi)
        return (float(self.density(farthest[None])[0]), float(self.density(nearest[None])[0]))


@dataclass(frozen=True)
class TargetMeasure:
    points: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(tuple(float(v) for v in np.atleast_1d(p)) for p in self.points)
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if len(pts) < 2:
            raise ValueError("need at least two target points")
        if len(w) != len(pts):
            raise ValueError("one weight per target point")
        if len({len(p) for p in pts}) != 1:
            raise ValueError("target points must share one dimension")
        if min(w) <= 0:
            raise ValueError("target weights must be positive")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"target weights sum to {math.fsum(w)!r}, not 1")

    @property
    def n(self) -> int:
        return len(self.points)

    @cached_property
    def y(self) -> np.ndarray:
        return np.array(self.points, dtype=float)

    @cached_property
    def mu(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    @property
    def min_weight(self) -> float:
        return min(self.weights)


@dataclass(frozen=True)
class CostFunction:
    """``c(x, y) = |x - y|_2 ** p`` with ``p >= 2``."""

    p: float = 2.0
    kind: str = "euclidean_power"

    def __post_init__(self):
        if self.kind != "euclidean_power":
            raise ValueError(f"unsupported cost kind {self.kind!r}")
        object.__setattr__(self, "p", float(self.p))
        if self.p < 2:
            raise ValueError("cost exponent must be >= 2")

    def matrix(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Pairwise costs, ``x`` of shape ``(P, d)`` and ``y`` of shape ``(N, d)``."""
        diff = np.asarray(x, dtype=float)[:, None, :] - np.asarray(y, dtype=float)[None, :, :]
        sq = np.einsum("pnd,pnd->pn", diff, diff)
        if self.p == 2.0:
            return sq
        return sq ** (0.5 * self.p)

    def grad_x(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Gradient in ``x``, shape ``(P, N, d)``."""
        diff = np.asarray(x, dtype=float)[:, None, :] - np.asarray(y, dtype=float)[None, :, :]
        if self.p == 2.0:
            return 2.0 * diff
        sq = np.einsum("pnd,pnd->pn", diff, diff)
        return self.p * (sq ** (0.5 * self.p - 1.0))[..., None] * diff


def cost_eval(cost: CostFunction, x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(cost.matrix(x[None], y[None])[0, 0])


@dataclass(frozen=True)
class Problem:
    source: SourceMeasure
    target: TargetMeasure
    cost: CostFunction = CostFunction()
    label: str = ""

    def __post_init__(self):
        if len(self.target.points[0]) != self.source.domain.dim:
            raise ValueError("target points and domain have different dimensions")

    @property
    def dim(self) -> int:
        return self.source.domain.dim

    @property
    def domain(self) -> BoxDomain:
        return self.source.domain

    @property
    def n(self) -> int:
        return self.target.n

    @property
    def y(self) -> np.ndarray:
        return self.target.y

    @property
    def mu(self) -> np.ndarray:
        return self.target.mu

    def cost_matrix(self, x: np.ndarray) -> np.ndarray:
        return self.cost.matrix(x, self.target.y)

    def with_cost(self, p: float) -> "Problem":
        return Problem(self.source, self.target, CostFunction(p), self.label)


# ---------------------------------------------------------------- registry

EXAMPLE_IDS = ("E0", "E1", "E2", "E3", "E4", "E5", "E6", "E7")

_E1_Y = (0.25, 0.5, 0.75)
_E1_MU = (0.3, 0.4, 0.3)
_E7_Y = (
    (0.5508, 0.8963, 0.0299),
    (0.7081, 0.1256, 0.4568),
    (0.2909, 0.2072, 0.6491),
    (0.5108, 0.0515, 0.2785),
    (0.8929, 0.4408, 0.6763),
)
_DEFAULT_P = {"E0": 2.0, "E1": 2.0, "E2": 2.0, "E3": 2.0, "E4": 2.0,
              "E5": 4.0, "E6": 4.0, "E7": 2.0}


def _params(example_id: str, params: dict | None) -> dict:
    params = dict(params or {})
    unknown = set(params) - {"p", "b"}
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)}")
    p = float(params.get("p", _DEFAULT_P[example_id]))
    out = {"p": p}
    if example_id == "E4":
        b = float(params.get("b", 0.5))
        if not 0.0 < b < 1.0:
            raise ValueError(f"E4 needs 0 < b < 1, got {b}")
        out["b"] = b
    elif "b" in params:
        raise ValueError("parameter b only applies to E4")
    return out


def builtin_example(example_id: str, params: dict | None = None) -> Problem:
    """Return one of the named problems.

    ``params`` may set the cost exponent ``p`` for any example and ``b`` for
    E4 (default 0.5).

    >>> builtin_example("E1").target.weights
    (0.3, 0.4, 0.3)
    """
    example_id = example_id.upper()
    if example_id not in EXAMPLE_IDS:
        raise ValueError(f"unknown example {example_id!r}; choose from {EXAMPLE_IDS}")
    prm = _params(example_id, params)
    cost = CostFunction(prm["p"])
    label = example_id
    if example_id == "E0":
        src = SourceMeasure(unit_box(1))
        tgt = TargetMeasure(((0.25,), (0.75,)), (0.2, 0.8))
    elif example_id == "E1":
        src = SourceMeasure(unit_box(1))
        tgt = TargetMeasure(tuple((v,) for v in _E1_Y), _E1_MU)
    elif example_id == "E2":
        src = SourceMeasure(unit_box(1), "gaussian_bump",
                            (("center", (0.5,)), ("scale", 10.0)),
                            display_constant=1.8305)
        tgt = TargetMeasure(tuple((v,) for v in _E1_Y), _E1_MU)
    elif example_id == "E3":
        src = SourceMeasure(unit_box(1))
        tgt = TargetMeasure(((-3.4584,), (-2.3668,), (0.3374,), (2.4005,)),
                            (0.0078, 0.4920, 0.4823, 0.0179))
    elif example_id == "E4":
        b = prm["b"]
        src = SourceMeasure(unit_box(2))
        tgt = TargetMeasure(((0.0, 0.0), (0.0, 1.0), (1.0, 1.0)),
                            (0.5 * (1 - b), b, 0.5 * (1 - b)))
        label = f"E4(b={b:g})"
    elif example_id == "E5":
        src = SourceMeasure(unit_box(2))
        tgt = TargetMeasure(((0.0, 0.0), (0.0, 1.0)), (0.726759, 0.273241))
    elif example_id == "E6":
        src = SourceMeasure(unit_box(2))
        tgt = TargetMeasure(((0.0, 0.0), (0.0, 1.0)), (0.872066, 0.127934))
    else:
        src = SourceMeasure(unit_box(3))
        tgt = TargetMeasure(_E7_Y, (0.2,) * 5)
    if prm["p"] != _DEFAULT_P[example_id]:
        label += f"(p={prm['p']:g})"
    return Problem(src, tgt, cost, label)


def exact_solution(example_id: str, params: dict | None = None) -> np.ndarray | None:
    """Closed-form zero-mean potential, or None when no closed form is known.

    Available for E0 and E4 under the quadratic cost and for E5 and E6 under
    the quartic cost.  For E5 and E6 the target weights are printed to six
    decimals, so the potential is exact only up to that truncation.
    """
    example_id = example_id.upper()
    if example_id not in EXAMPLE_IDS:
        raise ValueError(f"unknown example {example_id!r}")
    prm = _params(example_id, params)
    p = prm["p"]
    if example_id == "E0" and p == 2.0:
        return np.array([-0.15, 0.15])
    if example_id == "E4" and p == 2.0:
        a = (1.0 - 2.0 * math.sqrt(prm["b"])) / 3.0
        return np.array([a, -2.0 * a, a])
    if example_id == "E5" and p == 4.0:
        return np.array([0.25, -0.25])
    if example_id == "E6" and p == 4.0:
        return np.array([0.5, -0.5])
    return None


def random_problem(dim: int, n_points: int, seed: int = 0, p: float = 2.0,
                   uniform_weights: bool = True) -> Problem:
    """Uniform source on the unit box with random targets inside it."""
    rng = np.random.default_rng(seed)
    y = rng.random((n_points, dim))
    if uniform_weights:
        w = np.full(n_points, 1.0 / n_points)
    else:
        w = rng.random(n_points) + 0.1
        w /= w.sum()
        w[-1] = 1.0 - math.fsum(w[:-1])
    return Problem(SourceMeasure(unit_box(dim)),
                   TargetMeasure(tuple(map(tuple, y)), tuple(w)),
                   CostFunction(p), f"random(dim={dim}, n={n_points}, seed={seed})")


# ---------------------------------------------------------------- JSON i/o

def problem_to_dict(problem: Problem) -> dict:
    src = problem.source
    density: dict = {"kind": src.kind, "params": {}}
    if src.kind == "gaussian_bump":
        prm = src.param_dict
        density["params"] = {"center": list(prm["center"]), "scale": prm["scale"]}
    density["params"]["normalization_constant"] = src.normalization_constant
    return {
        "dim": problem.dim,
        "lower": list(src.domain.lower),
        "upper": list(src.domain.upper),
        "density": density,
        "points": [list(p) for p in problem.target.points],
        "weights": list(problem.target.weights),
        "cost": {"kind": problem.cost.kind, "p": problem.cost.p},
        "label": problem.label,
    }


def problem_from_dict(data: dict) -> Problem:
    domain = BoxDomain(data["lower"], data["upper"])
    if int(data.get("dim", domain.dim)) != domain.dim:
        raise ValueError("dim does not match lower/upper")
    dens = dict(data.get("density", {"kind": "uniform"}))
    prm = dict(dens.get("params", {}))
    const = prm.pop("normalization_constant", None)
    src = SourceMeasure(domain, dens.get("kind", "uniform"), tuple(prm.items()), const)
    tgt = TargetMeasure(tuple(tuple(p) for p in data["points"]), tuple(data["weights"]))
    cost = data.get("cost", {})
    return Problem(src, tgt, CostFunction(cost.get("p", 2.0), cost.get("kind", "euclidean_power")),
                   data.get("label", ""))


def save_problem(problem: Problem, path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(problem), indent=2))


def load_problem(path) -> Problem:
    return problem_from_dict(json.loads(Path(path).read_text()))
