"""Certifiers for the energy inequalities around the p-Laplace problem."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from ..battery import BatteryMember
from ..errors import InvalidInputError, MorreyLabError
from ..grid import Ball, GridFunction, gradient_norm, integrate_ball
from ..norms import morrey_norm
from ..operators import a1_check
from ..phi import PhiSpec, check_gp, tail_integral_constant
from ..reports import InequalityReport, sweep_summary
from .poisson import SolverSolution


def _members(us) -> list[tuple[str, GridFunction]]:
    if isinstance(us, (GridFunction, BatteryMember, SolverSolution)):
        us = [us]
    out = []
    for i, m in enumerate(us):
        if isinstance(m, BatteryMember):
            out.append((m.label, m.f))
        elif isinstance(m, SolverSolution):
            out.append((f"u[{i}]", m.u))
        else:
            out.append((f"u[{i}]", m))
    return out


def energy_terms(u: GridFunction, V: GridFunction, p: float) -> dict:
    """int |u|^p V, int |grad u|^p and int |u|^p."""
    w = u.grid.weights
    up = np.abs(u.values) ** p
    return {"potential": float(np.sum(w * up * V.values)),
            "gradient": float(np.sum(w * gradient_norm(u).values ** p)),
            "mass": float(np.sum(w * up))}


def _require_nonnegative(V: GridFunction) -> None:
    if np.any(V.values[V.grid.mask] < 0):
        raise InvalidInputError("the potential must satisfy V >= 0")


def fefferman_hypotheses(V: GridFunction, p: float, phi: PhiSpec, lam: float, sweep: Sequence[Ball]) -> dict:
    """Record, without enforcing, the hypotheses on (V, phi, p, lambda)."""
    n = V.grid.measure.n
    out: dict = {"lambda": lam, "n": n, "p": p}
    try:
        out["tail_constant"] = tail_integral_constant(phi, lam, tuple(2.0 ** k for k in range(-12, 13)))
        out["tail_ok"] = True
    except MorreyLabError as exc:
        out["tail_constant"] = None
        out["tail_ok"] = False
        out["tail_error"] = str(exc)
    q = p / (p - 1)
    q_max = (n - lam) / (n - lam - 1) if n - lam - 1 > 0 else math.inf
    out.update(q=q, q_max=q_max, q_ok=bool(p <= q <= q_max))
    radii = sorted({b.radius for b in sweep})
    if len(radii) >= 2:
        out["gp"] = check_gp(phi, radii).to_dict()
    if np.all(V.values[V.grid.mask] >= 1):
        r = np.asarray(radii)
        out["a1"] = a1_check(V, r).constant
    else:
        out["a1"] = None
        out["a1_note"] = "V < 1 somewhere, so the A_1 normalisation does not apply"
    return out


def fefferman_check(u, V: GridFunction, p: float, phi: PhiSpec, lam: float,
                    sweep: Sequence[Ball], cap: float = 100.0) -> InequalityReport:
    """Empirical constant C in int |u|^p V <= C ||V||^(p/(n-lam)) int |grad u|^p.

    ``u`` may be a single function or a battery; the constant is the max
    over members.  Hypotheses are recorded in ``details``, never assumed.
    """
    _require_nonnegative(V)
    n = V.grid.measure.n
    if not n - lam > 0:
        raise InvalidInputError("need lambda < n")
    norm_v = morrey_norm(V, p, phi, sweep).value
    factor = norm_v ** (p / (n - lam))
    rows, notes = [], []
    best, witness = 0.0, None
    for label, f in _members(u):
        t = energy_terms(f, V, p)
        rhs = factor * t["gradient"]
        if rhs > 0:
            c = t["potential"] / rhs
        elif t["potential"] > 0:
            c = math.inf
            notes.append(f"{label}: zero energy with nonzero potential term")
        else:
            c = 0.0
        rows.append({"label": label, **t, "constant": c})
        if c > best or witness is None:
            best, witness = c, {"member": label}
    lhs = max((r["potential"] for r in rows), default=0.0)
    return InequalityReport(
        name="fefferman",
        lhs=lhs,
        rhs=factor,
        constant=best,
        witness=witness,
        passed=bool(math.isfinite(best) and best <= cap),
        cap=cap,
        sweep=sweep_summary(sweep),
        notes=notes + ["q taken as the Hölder conjugate p/(p-1)"],
        details={"norm_V": norm_v, "norm_exponent": p / (n - lam), "members": rows,
                 "hypotheses": fefferman_hypotheses(V, p, phi, lam, sweep)},
    )


def sigma_split_check(us, V: GridFunction, sigma: float, p: float = 2.0,
                      sigma_ladder: Sequence[float] | None = None) -> InequalityReport:
    """Smallest K(sigma) with int |u|^p V <= sigma int |grad u|^p + K int |u|^p on the battery.

    Passes when K is nonincreasing along ``sigma_ladder`` (which always
    contains ``sigma``).
    """
    if not sigma > 0:
        raise InvalidInputError("sigma must be positive")
    _require_nonnegative(V)
    terms = [(label, energy_terms(f, V, p)) for label, f in _members(us)]
    terms = [(lab, t) for lab, t in terms if t["mass"] > 0]
    extra = [] if sigma_ladder is None else [float(s) for s in sigma_ladder]
    ladder = sorted(set([float(sigma)] + extra))
    if not terms:
        return InequalityReport("sigma_split", None, None, math.nan, None, False,
                                notes=["empty effective battery: every member is identically zero"],
                                details={"sigma": sigma})

    def k_of(s: float) -> tuple[float, str]:
        vals = [(max(0.0, (t["potential"] - s * t["gradient"]) / t["mass"]), lab) for lab, t in terms]
        return max(vals, key=lambda v: v[0])

    curve = [k_of(s)[0] for s in ladder]
    k, lab = k_of(sigma)
    monotone = all(b <= a for a, b in zip(curve, curve[1:]))
    return InequalityReport(
        name="sigma_split",
        lhs=k,
        rhs=None,
        constant=k,
        witness={"member": lab},
        passed=bool(monotone),
        details={"sigma": sigma, "p": p, "sigma_ladder": ladder, "K_curve": curve,
                 "members": [{"label": lab, **t} for lab, t in terms]},
    )


def caccioppoli_check(u, x0, radii: Sequence[float], p: float, factor: float = 10.0) -> InequalityReport:
    """C(r) = r^p int_{B_r} |grad u|^p / int_{B_2r} |u|^p along a ladder; passes when max/min < factor."""
    sol = u.u if isinstance(u, SolverSolution) else u
    grid = sol.grid
    x0 = tuple(float(v) for v in np.atleast_1d(x0))
    radii = [float(r) for r in radii]
    if not radii:
        raise InvalidInputError("radius ladder is empty")
    for r in radii:
        if grid.domain.distance_to_boundary(x0) < 2 * r * (1 - 1e-12):
            raise InvalidInputError(f"B({x0}, {2 * r}) is not inside the domain")
    grad = gradient_norm(sol)
    cs, rows, notes = [], [], []
    for r in radii:
        top = r ** p * integrate_ball(grad, Ball(x0, r), p)
        bottom = integrate_ball(sol, Ball(x0, 2 * r), p)
        if bottom == 0:
            notes.append(f"degenerate denominator at r={r:g}: u vanishes on B_2r")
            c = math.nan
        else:
            c = top / bottom
        cs.append(c)
        rows.append({"r": r, "numerator": top, "denominator": bottom, "C": c})
    good = [c for c in cs if not math.isnan(c)]
    if len(good) < len(cs):
        spread, passed = math.nan, False
    elif max(good) == 0:
        spread, passed = 1.0, True
    elif min(good) == 0:
        spread, passed = math.inf, False
    else:
        spread = max(good) / min(good)
        passed = spread < factor
    return InequalityReport(
        name="caccioppoli",
        lhs=max(good) if good else math.nan,
        rhs=min(good) if good else math.nan,
        constant=spread,
        witness={"r_max_C": rows[int(np.nanargmax(cs))]["r"]} if good else None,
        passed=bool(passed),
        cap=factor,
        notes=notes,
        details={"x0": list(x0), "p": p, "rows": rows},
    )
