"""Solver outcome record shared by the ODE and Newton solvers."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = ["SolveReport", "sup_error"]


def sup_error(psi, reference) -> float:
    """``max |psi - reference|`` after removing the mean of each (potentials are defined up to a constant)."""
    a = np.asarray(psi, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.max(np.abs((a - a.mean()) - (b - b.mean()))))


@dataclass
class SolveReport:
    """What a solver produced.

    ``status`` is ``"converged"`` or ``"failed"``.  ``error`` is the sup-norm
    distance to a reference potential (None without one) and
    ``measure_error`` is ``max |cell_masses(psi) - mu|``.  On failure
    ``potential`` holds the last good iterate and ``last_t`` its time.
    """

    method: str
    status: str
    potential: list[float]
    error: float | None = None
    measure_error: float | None = None
    elapsed: float = 0.0
    iterations: int = 0
    message: str = ""
    last_t: float | None = None
    residual_history: list[float] = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("error", "measure_error", "last_t"):
            if d[key] is not None and not math.isfinite(d[key]):
                d[key] = None
        d["residual_history"] = [r if math.isfinite(r) else None for r in d["residual_history"]]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "SolveReport":
        data = dict(data)
        data["residual_history"] = [math.nan if r is None else r
                                    for r in data.get("residual_history", [])]
        return cls(**data)
