"""Generalised and classical Morrey norms and the inequality certifiers built on them.

The supremum over all balls is replaced by a finite sweep of balls (see
:func:`morrey_lab.grid.ball_sweep`).  Enlarging a sweep can only increase a
reported norm, so each value is a certified lower bound for the true norm
of the sampled function.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .battery import BatteryMember, indicator
from .errors import InvalidInputError
from .grid import (Ball, GridFunction, RadiusLadder, UniformGrid, ball_integral_map, ball_measure,
                   ball_sweep, ball_weights)
from .phi import PhiSpec, check_gp, eval_phi
from .reports import InequalityReport, NormReport, sweep_summary


def _check_sweep(sweep: Sequence[Ball]) -> None:
    if len(sweep) == 0:
        raise InvalidInputError("ball sweep is empty")


def default_sweep(grid: UniformGrid, stride: int = 1, ratio: float = 2.0,
                  r_min: float | None = None) -> list[Ball]:
    """Every ``stride``-th node crossed with the geometric ladder r_min * ratio**k <= diam."""
    r_min = r_min or min(grid.spacing)
    return ball_sweep(grid, stride, RadiusLadder.geometric(r_min, grid.domain.diameter, ratio))


def ball_masses(f: GridFunction, p: float, sweep: Sequence[Ball]) -> np.ndarray:
    """Integral of |f|^p over each ball of the sweep, in sweep order."""
    if not p >= 1:
        raise InvalidInputError(f"exponent must be >= 1, got {p}")
    _check_sweep(sweep)
    grid = f.grid
    density = np.abs(f.values) ** p * grid.weights
    radii = np.fromiter((b.radius for b in sweep), float, len(sweep))
    centers = np.array([b.center for b in sweep], dtype=float).reshape(len(sweep), grid.dimension)
    lo = np.array([ax[0] for ax in grid.axes])
    t = (centers - lo) / np.asarray(grid.spacing)
    idx = np.rint(t).astype(np.int64)
    on_node = np.all((np.abs(t - idx) <= 1e-9) & (idx >= 0) & (idx < grid.nodes_per_axis), axis=1)
    flat = np.ravel_multi_index(tuple(np.clip(idx, 0, grid.nodes_per_axis - 1).T), grid.shape)
    out = np.empty(len(sweep))
    for r in np.unique(radii):
        sel = radii == r
        fast = sel & on_node
        if fast.any():
            out[fast] = ball_integral_map(grid, density, float(r)).ravel()[flat[fast]]
        for i in np.nonzero(sel & ~on_node)[0]:
            out[i] = float(np.sum(density * ball_weights(grid, sweep[i])))
    return out


def ball_values(masses: np.ndarray, radii: np.ndarray, p: float, phi: PhiSpec, n: float) -> np.ndarray:
    """(1/phi(r)) * (r^-n * mass)^(1/p), elementwise."""
    masses = np.atleast_1d(np.asarray(masses, dtype=float))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    return (masses / radii ** n) ** (1.0 / p) / np.atleast_1d(eval_phi(phi, radii))


def _radii(sweep: Sequence[Ball]) -> np.ndarray:
    return np.fromiter((b.radius for b in sweep), float, len(sweep))


def morrey_norm(f: GridFunction, p: float, phi: PhiSpec, sweep: Sequence[Ball]) -> NormReport:
    """Generalised Morrey norm over a finite sweep; ties go to the first ball in sweep order."""
    masses = ball_masses(f, p, sweep)
    vals = ball_values(masses, _radii(sweep), p, phi, f.grid.measure.n)
    k = int(np.argmax(vals))
    return NormReport(float(vals[k]), sweep[k], vals, p, phi.describe(), sweep_summary(sweep))


def classical_morrey_norm(f: GridFunction, p: float, lam: float,
                          sweep: Sequence[Ball] | None = None) -> NormReport:
    """Morrey norm with weight r^-lam on radii below diam(domain).

    Equals :func:`morrey_norm` with phi(r) = r^((lam - n)/p) on the same sweep.
    """
    if lam < 0:
        raise InvalidInputError("lambda must be nonnegative")
    if sweep is None:
        sweep = default_sweep(f.grid)
    _check_sweep(sweep)
    diam = f.grid.domain.diameter
    if any(b.radius > diam * (1 + 1e-12) for b in sweep):
        raise InvalidInputError("classical norm radii are capped at diam(domain)")
    radii = _radii(sweep)
    vals = (ball_masses(f, p, sweep) / radii ** lam) ** (1.0 / p)
    k = int(np.argmax(vals))
    return NormReport(float(vals[k]), sweep[k], vals, p, {"classical_lambda": lam}, sweep_summary(sweep))


def _nonzero(battery) -> list[tuple[str, GridFunction]]:
    items = []
    for i, m in enumerate(battery):
        label, f = (m.label, m.f) if isinstance(m, BatteryMember) else (f"f[{i}]", m)
        if f.max_abs() > 0:
            items.append((label, f))
    return items


def indicator_bounds_check(grid: UniformGrid, r0: float, p: float, phi: PhiSpec,
                           sweep: Sequence[Ball], cap: float = 10.0) -> InequalityReport:
    """Two-sided bound for the norm of the indicator of B(0, r0).

    The lower witness is the ball B(0, r0) itself, added to the sweep when
    missing, so lower <= norm holds without tolerance whenever the
    quadrature reproduces mu(B_0).
    """
    d = grid.dimension
    origin = (0.0,) * d
    if grid.domain.distance_to_boundary(origin) < r0 * (1 - 1e-12):
        raise InvalidInputError(f"B(0, {r0}) is not inside the domain")
    b0 = Ball(origin, float(r0))
    notes = []
    sweep = list(sweep)
    if b0 not in sweep:
        sweep.append(b0)
        notes.append("B(0, r0) appended to the sweep")
    gp = check_gp(phi, sorted({b.radius for b in sweep}))
    if not gp.in_gp:
        notes.append("phi fails the G_p check on the sweep radii")
    chi = indicator(grid, origin, r0)
    norm = morrey_norm(chi, p, phi, sweep)
    n = grid.measure.n
    mu0 = ball_measure(b0, grid.measure)
    lower = float(ball_values(np.array([mu0]), np.array([float(r0)]), p, phi, n)[0])
    b_const = (mu0 / r0 ** n) ** (1.0 / p)
    upper_c = norm.value * float(eval_phi(phi, np.array([float(r0)]))[0])
    passed = lower <= norm.value and upper_c <= cap
    return InequalityReport(
        name="indicator_bounds",
        lhs=lower,
        rhs=norm.value,
        constant=upper_c,
        witness=norm.witness.to_dict(),
        passed=bool(passed),
        cap=cap,
        sweep=sweep_summary(sweep),
        notes=notes,
        details={"r0": r0, "p": p, "phi": phi.describe(), "lower_constant_B": b_const,
                 "lower_bound": lower, "norm": norm.value, "upper_constant_C": upper_c,
                 "gp": gp.to_dict()},
    )


def embedding_check(p1: float, phi1: PhiSpec, p2: float, phi2: PhiSpec, battery,
                    sweep: Sequence[Ball], drop_levels: int = 2, growth_tol: float = 0.1) -> InequalityReport:
    """Compare phi2 <= C_I phi1 with ||f||_{p1,phi1} <= C_II ||f||_{p2,phi2}.

    Boundedness is judged by scale growth: each constant is computed on the
    full sweep and on the sweep without its ``drop_levels`` smallest radii.
    A constant counts as bounded when that refinement grows it by at most
    ``1 + growth_tol``.  The check passes when both constants agree on
    boundedness.
    """
    if p1 > p2:
        raise InvalidInputError(f"need p1 <= p2 (got {p1} > {p2})")
    if p1 < 1:
        raise InvalidInputError("exponents must be >= 1")
    _check_sweep(sweep)
    levels = sorted({b.radius for b in sweep})
    if len(levels) <= drop_levels:
        raise InvalidInputError("sweep has too few radius levels for the growth test")
    r_cut = levels[drop_levels]
    lv = np.asarray(levels)
    ratio_I = np.asarray(eval_phi(phi2, lv)) / np.asarray(eval_phi(phi1, lv))
    ci_full = float(np.max(ratio_I))
    ci_trunc = float(np.max(ratio_I[lv >= r_cut]))
    ci_at = float(lv[int(np.argmax(ratio_I))])

    radii = _radii(sweep)
    keep = radii >= r_cut
    n = None
    members = _nonzero(battery)
    notes = []
    cii_full = cii_trunc = float("nan")
    witness = None
    per_member = []
    for label, f in members:
        n = f.grid.measure.n
        v1 = ball_values(ball_masses(f, p1, sweep), radii, p1, phi1, n)
        v2 = ball_values(ball_masses(f, p2, sweep), radii, p2, phi2, n)
        full = float(np.max(v1) / np.max(v2))
        trunc = float(np.max(v1[keep]) / np.max(v2[keep]))
        per_member.append({"label": label, "ratio": full, "ratio_coarse": trunc})
        if not (full <= cii_full):
            cii_full, witness = full, {"member": label}
        cii_trunc = trunc if not (trunc <= cii_trunc) else cii_trunc
    if not members:
        notes.append("empty effective battery: every member is identically zero")
    g_I = ci_full / ci_trunc
    g_II = cii_full / cii_trunc if members else float("nan")
    finite_I = g_I <= 1 + growth_tol
    bounded_II = bool(g_II <= 1 + growth_tol) if members else None
    passed = bool(members) and finite_I == bounded_II
    if not finite_I:
        notes.append(f"(I) fails: phi2/phi1 keeps growing toward the smallest radius {levels[0]:g}")
    return InequalityReport(
        name="embedding",
        lhs=cii_full,
        rhs=ci_full,
        constant=cii_full,
        witness=witness,
        passed=passed,
        cap=1 + growth_tol,
        sweep=sweep_summary(sweep),
        notes=notes,
        details={"C_I": ci_full, "C_I_coarse": ci_trunc, "C_I_radius": ci_at, "growth_I": g_I,
                 "C_II": cii_full, "C_II_coarse": cii_trunc, "growth_II": g_II,
                 "finite_I": finite_I, "bounded_II": bounded_II, "coarse_r_min": r_cut,
                 "p1": p1, "p2": p2, "phi1": phi1.describe(), "phi2": phi2.describe(),
                 "effective_battery": len(members), "members": per_member},
    )


def holder_product_check(f: GridFunction, g: GridFunction, p: float, phi: PhiSpec,
                         sweep: Sequence[Ball], cap: float = 1.0 + 1e-12) -> InequalityReport:
    """Per-ball Hölder-type bound with conjugate exponents p and q.

    For each ball B(a, r) of the sweep,
    (1/(phi(r) r^n)) int_B |fg|  <=  phi(r) ||f||_{p,phi} ||g||_{q,phi},
    where r on the right is the radius of the ball under test.
    """
    if not p > 1:
        raise InvalidInputError(f"need p > 1, got {p}")
    if f.grid != g.grid:
        raise InvalidInputError("f and g live on different grids")
    q = p / (p - 1)
    nf = morrey_norm(f, p, phi, sweep)
    ng = morrey_norm(g, q, phi, sweep)
    radii = _radii(sweep)
    n = f.grid.measure.n
    phir = np.asarray(eval_phi(phi, radii))
    lhs = ball_masses(f * g, 1.0, sweep) / (phir * radii ** n)
    rhs = phir * nf.value * ng.value
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    k = int(np.argmax(ratio))
    const = float(ratio[k])
    return InequalityReport(
        name="holder_product",
        lhs=float(lhs[k]),
        rhs=float(rhs[k]),
        constant=const,
        witness=sweep[k].to_dict(),
        passed=bool(const <= cap),
        cap=cap,
        sweep=sweep_summary(sweep),
        notes=["free radius on the right-hand side read per ball: r is the radius of the ball under test"],
        details={"p": p, "q": q, "norm_f": nf.value, "norm_g": ng.value,
                 "norm_fg_M1": morrey_norm(f * g, 1.0, phi, sweep).value},
    )


def minkowski_check(f: GridFunction, g: GridFunction, p: float, phi: PhiSpec,
                    sweep: Sequence[Ball], tol: float = 1e-12) -> InequalityReport:
    if f.grid != g.grid:
        raise InvalidInputError("f and g live on different grids")
    nf = morrey_norm(f, p, phi, sweep).value
    ng = morrey_norm(g, p, phi, sweep).value
    s = morrey_norm(f + g, p, phi, sweep)
    slack = nf + ng - s.value
    const = s.value / (nf + ng) if nf + ng > 0 else 0.0
    return InequalityReport(
        name="minkowski",
        lhs=s.value,
        rhs=nf + ng,
        constant=const,
        witness=s.witness.to_dict(),
        passed=bool(slack >= -tol),
        cap=1.0,
        sweep=sweep_summary(sweep),
        details={"slack": slack, "norm_f": nf, "norm_g": ng, "tol": tol},
    )
