"""Maximal operator, Riesz potential, the A_1 check and the Hedberg certifier."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DivergenceError, HypothesisViolationError, InvalidInputError
from .grid import Ball, GridFunction, RadiusLadder, UniformGrid, ball_integral_map, ball_measure, convolve_same
from .norms import morrey_norm
from .phi import PhiSpec, tail_integral_constant
from .reports import InequalityReport, sweep_summary

# multiplier on the self-cell term of discrete potentials; 1.0 is correct,
# anything else is a deliberate mutation used to exercise the suite
SELF_CELL_SCALE = 1.0

TAIL_GRID = tuple(2.0 ** k for k in range(-12, 13))
TAIL_CAP = 1e3


@dataclass
class OperatorResult:
    output: GridFunction
    operator: str
    params: dict = field(default_factory=dict)
    witness_radius: np.ndarray | None = field(default=None, repr=False)


def _ladder(radius_ladder) -> RadiusLadder:
    if isinstance(radius_ladder, RadiusLadder):
        return radius_ladder
    radii = list(radius_ladder)
    if not radii:
        raise InvalidInputError("radius ladder is empty")
    return RadiusLadder.explicit(radii)


def maximal_function(f: GridFunction, radius_ladder) -> OperatorResult:
    """Centred maximal function over a finite set of radii.

    The average divides by the full ball measure v_d r^d even where the
    ball leaves the domain, i.e. f is extended by zero.
    """
    ladder = _ladder(radius_ladder)
    grid = f.grid
    density = np.abs(f.values) * grid.weights
    best = np.full(grid.shape, -np.inf)
    arg = np.zeros(grid.shape)
    for r in ladder.radii:
        avg = ball_integral_map(grid, density, r) / ball_measure(Ball((0.0,) * grid.dimension, r), grid.measure)
        better = avg > best
        best = np.where(better, avg, best)
        arg = np.where(better, r, arg)
    best = np.where(grid.mask, best, 0.0)
    return OperatorResult(GridFunction(grid, best), "maximal",
                          {"ladder": list(ladder.radii)}, np.where(grid.mask, arg, 0.0))


@lru_cache(maxsize=None)
def cell_power_integral(d: int, s: float) -> float:
    """Integral of |z|^-s over the unit cube [-1/2, 1/2]^d, for s < d.

    Coning the cube over its 2d faces gives d/(d-s) times the face
    integral of rho^-s with rho the distance from the origin.
    """
    if not s < d:
        raise InvalidInputError("singularity not integrable")
    if d == 1:
        return 0.5 ** (-s) / (1.0 - s)
    if d == 2:
        face, _ = integrate.quad(lambda y: (y * y + 0.25) ** (-s / 2), -0.5, 0.5, epsabs=0, epsrel=1e-13)
    else:
        face, _ = integrate.dblquad(lambda z, y: (y * y + z * z + 0.25) ** (-s / 2), -0.5, 0.5, -0.5, 0.5,
                                    epsabs=0, epsrel=1e-12)
    return d / (d - s) * face


@lru_cache(maxsize=None)
def cell_log_integral(d: int) -> float:
    """Integral of log|z| over the unit cube [-1/2, 1/2]^d."""
    if d == 1:
        return -1.0 - math.log(2.0)
    if d == 2:
        val, _ = integrate.quad(lambda y: 0.5 * math.log(y * y + 0.25) - 0.5, -0.5, 0.5, epsabs=0, epsrel=1e-13)
        return val
    val, _ = integrate.dblquad(lambda z, y: 0.5 * math.log(y * y + z * z + 0.25) - 1.0 / 3.0,
                               -0.5, 0.5, -0.5, 0.5, epsabs=0, epsrel=1e-12)
    return val


def _offset_distance(grid: UniformGrid) -> np.ndarray:
    h = grid.h
    m = grid.nodes_per_axis - 1
    offs = np.meshgrid(*([np.arange(-m, m + 1) * h] * grid.dimension), indexing="ij")
    return np.sqrt(sum(o * o for o in offs))


def kernel_convolution(f: GridFunction, kernel: np.ndarray) -> GridFunction:
    """sum_y K(x - y) f(y) w(y) over domain nodes, for a kernel given on all lattice offsets."""
    grid = f.grid
    out = convolve_same(f.values * grid.weights, kernel)
    return GridFunction(grid, np.where(grid.mask, out, 0.0))


def riesz_kernel(grid: UniformGrid, alpha: float) -> np.ndarray:
    n = grid.measure.n
    s = n - alpha
    dist = _offset_distance(grid)
    center = (grid.nodes_per_axis - 1,) * grid.dimension
    dist[center] = 1.0
    k = dist ** (-s)
    # cell average of the singular kernel over the node's own cell
    k[center] = SELF_CELL_SCALE * cell_power_integral(grid.dimension, s) * grid.h ** (-s)
    return k


def riesz_potential(f: GridFunction, alpha: float) -> OperatorResult:
    """I_alpha f with kernel |x - y|^(alpha - n) and a cell-averaged self term.

    alpha = n is accepted: the kernel is then identically 1.
    """
    n = f.grid.measure.n
    if not (0 < alpha <= n):
        raise InvalidInputError(f"need 0 < alpha <= n (alpha={alpha}, n={n})")
    out = kernel_convolution(f, riesz_kernel(f.grid, alpha))
    return OperatorResult(out, "riesz", {"alpha": alpha, "self_cell_scale": SELF_CELL_SCALE})


def a1_check(w: GridFunction, radius_ladder, cap: float = 10.0) -> InequalityReport:
    """Empirical A_1 constant max Mw / w over domain nodes."""
    mask = w.grid.mask
    if np.any(w.values[mask] < 1.0):
        raise InvalidInputError("A_1 weights must satisfy w >= 1")
    res = maximal_function(w, radius_ladder)
    ratio = np.where(mask, res.output.values / np.where(mask, w.values, 1.0), -np.inf)
    k = int(np.argmax(ratio))
    idx = np.unravel_index(k, w.grid.shape)
    c1 = float(ratio.flat[k])
    return InequalityReport(
        name="a1",
        lhs=float(res.output.values[idx]),
        rhs=float(w.values[idx]),
        constant=c1,
        witness={"node": list(w.grid.node(idx)), "radius": float(res.witness_radius[idx])},
        passed=bool(c1 <= cap),
        cap=cap,
        details={"ladder": res.params["ladder"]},
    )


def hedberg_check(f: GridFunction, p: float, phi: PhiSpec, lam: float, sweep: Sequence[Ball],
                  radius_ladder, cap: float = 100.0) -> InequalityReport:
    """Pointwise estimate I_1 f <= C (Mf)^(1 - 1/(n-lam)) ||f||^(1/(n-lam)).

    The tail hypothesis on phi is verified first on a fixed radius grid;
    a divergent tail, lam outside [0, n-1) or a tail constant above
    ``TAIL_CAP`` raise :class:`HypothesisViolationError`.
    """
    grid = f.grid
    n = grid.measure.n
    if phi.n != n:
        raise InvalidInputError(f"phi context n={phi.n} does not match the measure order n={n}")
    if np.any(f.values[grid.mask] < 0):
        raise InvalidInputError("Hedberg check needs f >= 0")
    try:
        tail_c = tail_integral_constant(phi, lam, TAIL_GRID)
    except (DivergenceError, InvalidInputError) as exc:
        raise HypothesisViolationError(f"tail hypothesis fails: {exc}") from exc
    if tail_c > TAIL_CAP:
        raise HypothesisViolationError(
            f"tail constant {tail_c:.4g} exceeds {TAIL_CAP:g} on radii 2^-12..2^12")
    notes = ["exponent on the norm certified as +1/(n - lambda); a sign-flipped variant also appears in the literature"]
    a = 1.0 - 1.0 / (n - lam)
    details = {"tail_constant": tail_c, "lambda": lam, "n": n, "mf_exponent": a,
               "norm_exponent": 1.0 / (n - lam), "p": p, "phi": phi.describe(),
               "self_cell_scale": SELF_CELL_SCALE}
    if f.max_abs() == 0:
        return InequalityReport("hedberg", 0.0, 0.0, 0.0, None, True, cap, sweep_summary(sweep),
                                notes=notes + ["f = 0: vacuous"], details=details)
    riesz = riesz_potential(f, 1.0).output.values
    mf = maximal_function(f, radius_ladder).output.values
    norm = morrey_norm(f, p, phi, sweep).value
    mask = grid.mask & ~((mf == 0) & (riesz == 0))
    den = mf ** a * norm ** (1.0 / (n - lam))
    bad = mask & (den == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mask, np.abs(riesz) / den, -np.inf)
    ratio[bad] = np.inf
    k = int(np.argmax(ratio))
    idx = np.unravel_index(k, grid.shape)
    c = float(ratio.flat[k])
    if bad.any():
        notes.append(f"{int(bad.sum())} nodes with Mf = 0 but I_1 f != 0")
    details.update(norm=norm)
    return InequalityReport(
        name="hedberg",
        lhs=float(abs(riesz[idx])),
        rhs=float(den[idx]),
        constant=c,
        witness={"node": list(grid.node(idx))},
        passed=bool(math.isfinite(c) and c <= cap),
        cap=cap,
        sweep=sweep_summary(sweep),
        notes=notes,
        details=details,
    )
