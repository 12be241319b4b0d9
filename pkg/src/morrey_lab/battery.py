"""Seeded batteries of test functions for inequality certification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .grid import GridFunction, UniformGrid

KINDS = ("indicator", "gaussian", "monomial", "cosine")


def indicator(grid: UniformGrid, center, radius: float, value: float = 1.0) -> GridFunction:
    """Indicator of the closed ball, so nodes on the sphere carry ``value``."""
    dist = grid.distance_from(center)
    return GridFunction(grid, np.where(dist <= radius + grid.sphere_tol, value, 0.0) * grid.mask)


def gaussian(grid: UniformGrid, center, sigma: float, amplitude: float = 1.0) -> GridFunction:
    dist = grid.distance_from(center)
    return GridFunction(grid, amplitude * np.exp(-0.5 * (dist / sigma) ** 2) * grid.mask)


def monomial(grid: UniformGrid, center, k: float) -> GridFunction:
    """|x - center|**k (k = 0 gives the constant 1)."""
    dist = grid.distance_from(center)
    vals = np.ones_like(dist) if k == 0 else dist ** k
    return GridFunction(grid, vals * grid.mask)


def bump(grid: UniformGrid, center, radius: float, amplitude: float = 1.0) -> GridFunction:
    """C^2 bump (1 - |x-c|^2/a^2)^3_+ supported in the closed ball."""
    dist = grid.distance_from(center)
    t = np.clip(1.0 - (dist / radius) ** 2, 0.0, None)
    return GridFunction(grid, amplitude * t ** 3 * grid.mask)


def cosine_field(grid: UniformGrid, rng: np.random.Generator, terms: int = 5) -> GridFunction:
    """Sum of ``terms`` cosines with random wave vectors, phases and amplitudes."""
    vals = np.zeros(grid.shape)
    for _ in range(terms):
        freq = rng.uniform(0.5, 6.0, size=grid.dimension) * rng.choice([-1.0, 1.0], size=grid.dimension)
        phase = rng.uniform(0.0, 2 * np.pi)
        amp = rng.normal()
        arg = sum(w * x for w, x in zip(freq, grid.coords))
        vals += amp * np.cos(arg + phase)
    return GridFunction(grid, vals * grid.mask)


@dataclass
class BatteryMember:
    label: str
    f: GridFunction


def make_battery(grid: UniformGrid, size: int, seed: int, kinds=KINDS) -> list[BatteryMember]:
    """Deterministic battery cycling through ``kinds``; parameters drawn from ``seed``."""
    if size < 1:
        raise InvalidInputError("battery size must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(b) for b in grid.domain.bounds)
    span = float(np.min(hi - lo))
    out = []
    for i in range(size):
        kind = kinds[i % len(kinds)]
        c = lo + (hi - lo) * rng.uniform(0.3, 0.7, size=grid.dimension)
        if grid.domain.shape == "ball":
            c = np.asarray(grid.domain.center) + 0.3 * grid.domain.radius * rng.uniform(-1, 1, size=grid.dimension)
        if kind == "indicator":
            r = span * rng.uniform(0.05, 0.3)
            out.append(BatteryMember(f"indicator[{i}] r={r:.4g}", indicator(grid, c, r)))
        elif kind == "gaussian":
            s = span * rng.uniform(0.03, 0.2)
            out.append(BatteryMember(f"gaussian[{i}] sigma={s:.4g}", gaussian(grid, c, s, rng.uniform(0.5, 2.0))))
        elif kind == "monomial":
            k = float(rng.choice([0.5, 1.0, 2.0, 3.0]))
            out.append(BatteryMember(f"monomial[{i}] k={k:g}", monomial(grid, c, k)))
        elif kind == "cosine":
            out.append(BatteryMember(f"cosine[{i}]", cosine_field(grid, rng)))
        elif kind == "bump":
            r = span * rng.uniform(0.1, 0.3)
            out.append(BatteryMember(f"bump[{i}] r={r:.4g}", bump(grid, c, r)))
        else:
            raise InvalidInputError(f"unknown battery kind {kind!r}")
    return out
