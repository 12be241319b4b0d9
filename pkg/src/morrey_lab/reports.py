"""Report carriers and their JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .grid import Ball


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays, tuples and non-finite floats to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, Ball):
        return obj.to_dict()
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=False) + "\n"


def write_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def sweep_summary(sweep) -> dict:
    if not sweep:
        return {"count": 0}
    radii = sorted({b.radius for b in sweep})
    centers = {b.center for b in sweep}
    return {"count": len(sweep), "centers": len(centers), "radii": radii}


@dataclass
class NormReport:
    value: float
    witness: Ball
    per_ball: np.ndarray = field(repr=False)
    p: float
    phi: dict | None
    sweep: dict

    def to_dict(self) -> dict:
        return {"value": self.value, "witness": self.witness.to_dict(), "p": self.p,
                "phi": self.phi, "sweep": self.sweep}


@dataclass
class InequalityReport:
    """Outcome of certifying one inequality over a battery or sweep.

    ``constant`` is the smallest C with LHS <= C * RHS over everything
    tested; ``witness`` identifies where it is attained.
    """

    name: str
    lhs: Any
    rhs: Any
    constant: float
    witness: dict | None
    passed: bool
    cap: float | None = None
    sweep: dict | None = None
    seed: int | None = None
    notes: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "constant": self.constant,
            "witness": self.witness,
            "sweep": self.sweep,
            "seed": self.seed,
            "pass": self.passed,
            "cap": self.cap,
            "notes": self.notes,
            "details": self.details,
        }
