"""The acceptance battery: thirteen numbered criteria, shared by the CLI suite and the tests.

Each criterion returns a :class:`CriterionResult` whose ``metrics`` hold
only deterministic numbers; timings live in ``elapsed`` so that two seeded
runs can be compared byte for byte.
"""

from __future__ import annotations

import contextlib
import filecmp
import json
import math
import tempfile
import time
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import operators
from .battery import bump, gaussian, indicator, make_battery, monomial
from .errors import HypothesisViolationError
from .grid import Ball, Domain, GridFunction, RadiusLadder, UniformGrid, ball_sweep, ball_weights
from .norms import (classical_morrey_norm, default_sweep, embedding_check, indicator_bounds_check,
                    minkowski_check, morrey_norm)
from .operators import hedberg_check, maximal_function, riesz_potential
from .pde.inequalities import caccioppoli_check, energy_terms, fefferman_check, sigma_split_check
from .pde.plaplace import PLaplaceEnergy, PLaplaceProblem, energy_nonincreasing, linear_solution, solve_plaplace
from .pde.poisson import PoissonProblem, solve_poisson
from .phi import PhiSpec
from .reports import dumps, jsonable
from .sucp import (FINITE_ORDER, INFINITE_ORDER_SUSPECT, classify_profile, mass_function, sucp_experiment,
                   vanishing_order)

DEFAULT_SEED = 20240917
DEFAULT_BATTERY = 30
MUTATIONS = {"riesz-self-cell": 50.0}

TITLES = {
    1: "norm axioms",
    2: "bridge identity",
    3: "indicator sandwich",
    4: "embedding equivalence",
    5: "maximal-operator oracle",
    6: "Riesz accuracy",
    7: "Hedberg certification",
    8: "Poisson solver",
    9: "p-Laplace solver",
    10: "Fefferman certification",
    11: "Caccioppoli r-independence",
    12: "SUCP machinery",
    13: "suite determinism",
}


@dataclass
class SuiteConfig:
    seed: int = DEFAULT_SEED
    battery_size: int = DEFAULT_BATTERY
    mutate: str | None = None


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    elapsed: float = 0.0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        tail = f" :: {'; '.join(self.failures)}" if self.failures else ""
        return f"[{verdict}] criterion {self.number:2d} {self.title} ({self.elapsed:.1f} s){tail}"

    def to_dict(self) -> dict:
        return {"criterion": self.number, "title": self.title, "pass": self.passed,
                "failures": self.failures, "metrics": self.metrics}


class _Checks:
    """Collects named boolean checks with a message for each failure."""

    def __init__(self):
        self.failures: list[str] = []

    def __call__(self, ok, msg: str) -> bool:
        ok = bool(ok)
        if not ok:
            self.failures.append(msg)
        return ok


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


@contextlib.contextmanager
def mutation(name: str | None):
    """Temporarily apply a named code mutation (used to show the suite can fail)."""
    if name is None:
        yield
        return
    if name not in MUTATIONS:
        raise ValueError(f"unknown mutation {name!r}; known: {sorted(MUTATIONS)}")
    saved = operators.SELF_CELL_SCALE
    operators.SELF_CELL_SCALE = MUTATIONS[name]
    try:
        yield
    finally:
        operators.SELF_CELL_SCALE = saved


def _box(d: int, a: float, b: float, n: int) -> UniformGrid:
    return UniformGrid(Domain.box([a] * d, [b] * d), n)


# 1 ---------------------------------------------------------------------------

def criterion_1(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    grid = _box(2, -1.0, 1.0, 33)
    sweep = ball_sweep(grid, 2, RadiusLadder.geometric(grid.h, 2.0, 2.0))
    phi = PhiSpec.classical(1.0, 2.0, 2.0)
    battery = make_battery(grid, cfg.battery_size, cfg.seed)
    worst_h, worst_slack = 0.0, math.inf
    for m in battery:
        base = morrey_norm(m.f, 2.0, phi, sweep).value
        for c in (-2.0, 0.5, 10.0):
            val = morrey_norm(c * m.f, 2.0, phi, sweep).value
            worst_h = max(worst_h, _rel(val, abs(c) * base) if base > 0 else val)
    pairs = [(battery[i], battery[(i + 1) % len(battery)]) for i in range(len(battery))]
    pairs += [(m, m) for m in battery[:3]]
    for a, b in pairs:
        rep = minkowski_check(a.f, b.f, 2.0, phi, sweep)
        worst_slack = min(worst_slack, rep.details["slack"])
    chk(worst_h <= 1e-12, f"homogeneity error {worst_h:.3g} > 1e-12")
    chk(worst_slack >= -1e-12, f"triangle slack {worst_slack:.3g} < -1e-12")
    return CriterionResult(1, TITLES[1], not chk.failures,
                           {"battery": len(battery), "seed": cfg.seed, "homogeneity_max_rel": worst_h,
                            "triangle_min_slack": worst_slack, "pairs": len(pairs)}, chk.failures)


# 2 ---------------------------------------------------------------------------

def criterion_2(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    rows = []
    for d, lam, p in ((1, 0.5, 2.0), (2, 1.0, 2.0), (2, 0.5, 3.0)):
        grid = _box(d, -1.0, 1.0, 65 if d == 1 else 33)
        sweep = default_sweep(grid, stride=2)
        phi = PhiSpec.classical(lam, p, float(d))
        members = make_battery(grid, min(10, cfg.battery_size), cfg.seed + d)
        worst = 0.0
        for m in members:
            a = classical_morrey_norm(m.f, p, lam, sweep).value
            b = morrey_norm(m.f, p, phi, sweep).value
            worst = max(worst, _rel(a, b))
        rows.append({"d": d, "lambda": lam, "p": p, "members": len(members), "max_rel": worst})
        chk(worst <= 1e-12, f"d={d} lambda={lam}: bridge error {worst:.3g}")
    return CriterionResult(2, TITLES[2], not chk.failures, {"cases": rows}, chk.failures)


# 3 ---------------------------------------------------------------------------

def criterion_3(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    grid = UniformGrid(Domain.interval(-2.0, 2.0), 257)
    coarse = ball_sweep(grid, 4, RadiusLadder.geometric(grid.h * 2, 4.0, 2.0))
    fine = ball_sweep(grid, 1, RadiusLadder.geometric(grid.h, 4.0, 2.0 ** 0.5))
    rows = []
    for p, beta in ((2.0, -0.5), (2.0, -0.25), (1.0, -0.5)):
        phi = PhiSpec.power(beta, p=p, n=1.0)
        for r0 in (0.25, 0.5, 1.0):
            a = indicator_bounds_check(grid, r0, p, phi, coarse)
            b = indicator_bounds_check(grid, r0, p, phi, fine)
            for rep in (a, b):
                chk(rep.details["norm"] >= rep.details["lower_bound"],
                    f"p={p} beta={beta} r0={r0}: norm below lower bound")
            drift = _rel(a.constant, b.constant)
            chk(drift <= 0.10, f"p={p} beta={beta} r0={r0}: upper constant drifts {drift:.3g}")
            chk(a.details["gp"]["in_gp"], f"phi beta={beta} fails G_p")
            rows.append({"p": p, "beta": beta, "r0": r0, "lower": a.details["lower_bound"],
                         "norm_coarse": a.details["norm"], "norm_fine": b.details["norm"],
                         "C_coarse": a.constant, "C_fine": b.constant, "drift": drift})
    return CriterionResult(3, TITLES[3], not chk.failures, {"cases": rows}, chk.failures)


# 4 ---------------------------------------------------------------------------

def criterion_4(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 513)
    ladder = RadiusLadder.geometric(2 * grid.h, 2.0, 2.0)
    sweep = ball_sweep(grid, 2, ladder)
    battery = make_battery(grid, min(12, cfg.battery_size), cfg.seed)
    battery += [type(battery[0])(f"small-indicator r={r:g}", indicator(grid, (0.0,), r))
                for r in ladder.radii[:3]]
    log_half = PhiSpec.logpower(-0.5, -1.0, p=2.0, n=1.0)
    pairs = [
        ("identity", 2.0, PhiSpec.power(-0.5, 2.0), 2.0, PhiSpec.power(-0.5, 2.0), True),
        ("r^-1/2 vs r^-1", 1.0, PhiSpec.power(-0.5, 1.0), 1.0, PhiSpec.power(-1.0, 1.0), False),
        ("r^-1 vs r^-1/2", 1.0, PhiSpec.power(-1.0, 1.0), 1.0, PhiSpec.power(-0.5, 1.0), True),
        ("log-power vs r^-1/2", 2.0, log_half, 2.0, PhiSpec.power(-0.5, 2.0), False),
        ("p1<p2 r^-1 vs r^-1/2", 1.0, PhiSpec.power(-1.0, 1.0), 2.0, PhiSpec.power(-0.5, 2.0), True),
    ]
    rows = []
    for label, p1, f1, p2, f2, expect in pairs:
        rep = embedding_check(p1, f1, p2, f2, battery, sweep)
        det = rep.details
        chk(rep.passed, f"{label}: finite_I={det['finite_I']} bounded_II={det['bounded_II']}")
        chk(det["finite_I"] == expect, f"{label}: expected (I) {'finite' if expect else 'unbounded'}")
        rows.append({"pair": label, "C_I": det["C_I"], "growth_I": det["growth_I"], "C_II": det["C_II"],
                     "growth_II": det["growth_II"], "finite_I": det["finite_I"],
                     "bounded_II": det["bounded_II"], "pass": rep.passed})
    zero = embedding_check(1.0, PhiSpec.power(-1.0), 1.0, PhiSpec.power(-1.0), [GridFunction.zeros(grid)], sweep)
    chk(zero.details["effective_battery"] == 0 and not zero.passed, "zero battery not reported as empty")
    return CriterionResult(4, TITLES[4], not chk.failures, {"pairs": rows, "battery": len(battery)},
                           chk.failures)


# 5 ---------------------------------------------------------------------------

def dense_maximal(f: GridFunction, radii: Iterable[float]) -> np.ndarray:
    """Brute-force maximal function: explicit ball sums at every node for every radius."""
    grid = f.grid
    dens = np.abs(f.values) * grid.weights
    out = np.zeros(grid.shape)
    pts = grid.axes[0]
    for r in radii:
        for i, x in enumerate(pts):
            s = ball_weights(grid, Ball((float(x),), float(r)))
            out[i] = max(out[i], float(np.sum(s * dens)) / (2 * r))
    return out


def criterion_5(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    rows = []
    q = 2.0 ** 0.125
    for n_nodes in (81, 161, 200):
        grid = UniformGrid(Domain.interval(-4.0, 4.0), n_nodes)
        ladder = RadiusLadder.geometric(grid.h, 8.0, q)
        # dense radii include the ladder, so M_ladder <= M_dense <= q M_ladder holds exactly
        dense = np.union1d(np.geomspace(grid.h, ladder.r_max, 600), ladder.radii)
        funcs = [("indicator(-1,1)", indicator(grid, (0.0,), 1.0))]
        funcs += [(m.label, m.f) for m in make_battery(grid, 4, cfg.seed + n_nodes)]
        for label, f in funcs:
            m_lad = maximal_function(f, ladder).output.values
            m_den = dense_maximal(f, dense)
            lo = float(np.min(m_den - m_lad))
            hi = float(np.max(m_den - q * m_lad))
            tol = 1e-12 * max(1.0, float(np.max(m_den)))
            chk(lo >= -tol and hi <= tol, f"N={n_nodes} {label}: outside ladder resolution ({lo:.3g}, {hi:.3g})")
            rows.append({"nodes": n_nodes, "f": label, "min(M_dense-M)": lo, "max(M_dense-qM)": hi})
    grid = UniformGrid(Domain.interval(-4.0, 4.0), 161)
    chi = indicator(grid, (0.0,), 1.0)
    res = maximal_function(chi, RadiusLadder.geometric(grid.h, 8.0, 2.0 ** (1 / 16)))
    at2 = res.output.at((2.0,))
    chk(abs(at2 - 1 / 3) <= 0.02, f"M chi(2) = {at2:.5f}, expected 1/3 +- 0.02")
    return CriterionResult(5, TITLES[5], not chk.failures,
                           {"cases": rows, "M_chi_at_2": at2, "witness_radius": float(res.witness_radius[120])},
                           chk.failures)


# 6 ---------------------------------------------------------------------------

def criterion_6(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    grid = _box(2, -1.25, 1.25, 161)
    val = riesz_potential(indicator(grid, (0.0, 0.0), 1.0), 1.0).output.at((0.0, 0.0))
    err = _rel(val, 2 * math.pi)
    chk(err <= 0.03, f"I_1 chi(0) = {val:.6g}, rel error {err:.3g} > 3%")
    g2 = _box(2, -1.0, 1.0, 49)
    bat = make_battery(g2, 4, cfg.seed)
    lin = 0.0
    for alpha in (0.5, 1.0, 1.5):
        for i in range(0, len(bat) - 1):
            f, g = bat[i].f, bat[i + 1].f
            a, b = 2.5, -1.3
            lhs = riesz_potential(a * f + b * g, alpha).output.values
            rhs = a * riesz_potential(f, alpha).output.values + b * riesz_potential(g, alpha).output.values
            lin = max(lin, float(np.max(np.abs(lhs - rhs))) / max(1.0, float(np.max(np.abs(rhs)))))
    chk(lin <= 1e-10, f"linearity error {lin:.3g} > 1e-10")
    return CriterionResult(6, TITLES[6], not chk.failures,
                           {"I1_chi_at_0": val, "exact": 2 * math.pi, "rel_error": err, "linearity": lin},
                           chk.failures)


# 7 ---------------------------------------------------------------------------

def _nonneg_battery(grid: UniformGrid, size: int, seed: int):
    return make_battery(grid, size, seed, kinds=("indicator", "gaussian", "bump", "monomial"))


def criterion_7(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    cases = [("phi=t^-2, lambda=0", PhiSpec.power(-2.0, p=1.0, n=2.0), 0.0, 1.0),
             ("phi=t^-1.5, lambda=0.5", PhiSpec.power(-1.5, p=2.0, n=2.0), 0.5, 2.0)]
    rows = []
    size = min(8, cfg.battery_size)
    ladder = RadiusLadder.geometric(0.125, 2 * math.sqrt(2), 2.0 ** 0.25)
    radii = RadiusLadder.geometric(0.125, 2 * math.sqrt(2), 2.0)
    for label, phi, lam, p in cases:
        consts = []
        for n_nodes, stride in ((33, 2), (65, 4)):
            grid = _box(2, -1.0, 1.0, n_nodes)
            sweep = ball_sweep(grid, stride, radii)
            worst = 0.0
            for m in _nonneg_battery(grid, size, cfg.seed):
                rep = hedberg_check(m.f, p, phi, lam, sweep, ladder)
                chk(math.isfinite(rep.constant), f"{label} {m.label}: C not finite")
                worst = max(worst, rep.constant)
            consts.append(worst)
        drift = _rel(consts[0], consts[1])
        chk(drift <= 0.10, f"{label}: C {consts[0]:.4g} -> {consts[1]:.4g} drifts {drift:.3g}")
        rows.append({"case": label, "C_h": consts[0], "C_h/2": consts[1], "drift": drift})
    grid = _box(2, -1.0, 1.0, 33)
    f = gaussian(grid, (0.0, 0.0), 0.3)
    rejected = []
    for bad_phi, lam in ((PhiSpec.power(-0.5, p=1.0, n=2.0), 0.0), (PhiSpec.power(-3.0, p=1.0, n=2.0), 0.0),
                         (PhiSpec.power(-2.0, p=1.0, n=2.0), 1.5)):
        try:
            hedberg_check(f, 1.0, bad_phi, lam, default_sweep(grid, 4), ladder)
            rejected.append(False)
        except HypothesisViolationError:
            rejected.append(True)
    chk(all(rejected), f"hypothesis-violating phi not rejected: {rejected}")
    zero = hedberg_check(GridFunction.zeros(grid), 1.0, cases[0][1], 0.0, default_sweep(grid, 4), ladder)
    chk(zero.passed and zero.constant == 0.0, "f = 0 is not a vacuous pass")
    return CriterionResult(7, TITLES[7], not chk.failures,
                           {"cases": rows, "rejected": rejected, "self_cell_scale": operators.SELF_CELL_SCALE},
                           chk.failures)


# 8 ---------------------------------------------------------------------------

def _slope(hs, errs) -> float:
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def criterion_8(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    t0 = time.perf_counter()
    g1 = UniformGrid(Domain.interval(-1.0, 1.0), 65)
    z1 = solve_poisson(PoissonProblem(GridFunction.constant(g1, 1.0))).u.at((0.0,))
    chk(abs(z1 - 0.5) <= 1e-10, f"1D z(0) = {z1!r}")
    disk = UniformGrid(Domain.ball((0.0, 0.0), 1.0), 129)
    z2 = solve_poisson(PoissonProblem(GridFunction.constant(disk, 1.0))).u.at((0.0, 0.0))
    chk(abs(z2 - 0.25) <= 0.02 * 0.25, f"2D disk z(0) = {z2!r}")
    hs, e1, e2 = [], [], []
    for n in (17, 33, 65, 129):
        g = UniformGrid(Domain.interval(-1.0, 1.0), n)
        V = GridFunction.sample(g, lambda x: (math.pi / 2) ** 2 * np.cos(math.pi * x / 2))
        z = solve_poisson(PoissonProblem(V)).u.values
        e1.append(float(np.max(np.abs(z - np.cos(math.pi * g.axes[0] / 2)))))
        gd = UniformGrid(Domain.ball((0.0, 0.0), 1.0), n)
        r2 = gd.distance_from((0.0, 0.0)) ** 2
        Vd = GridFunction.sample(gd, lambda x, y: 2 * math.pi * np.sin(math.pi * (x * x + y * y) / 2)
                                 + math.pi ** 2 * (x * x + y * y) * np.cos(math.pi * (x * x + y * y) / 2))
        zd = solve_poisson(PoissonProblem(Vd)).u.values
        e2.append(float(np.max(np.abs(zd - np.cos(math.pi * r2 / 2))[gd.interior_mask])))
        hs.append(g.h)
    s1, s2 = _slope(hs, e1), _slope(hs, e2)
    chk(1.9 <= s1 <= 2.1, f"1D convergence slope {s1:.3f}")
    chk(1.9 <= s2 <= 2.1, f"2D disk convergence slope {s2:.3f}")
    elapsed = time.perf_counter() - t0
    chk(elapsed < 60, f"runtime {elapsed:.1f} s >= 60 s")
    return CriterionResult(8, TITLES[8], not chk.failures,
                           {"z1_at_0": z1, "z2_at_0": z2, "h": hs, "err_1d": e1, "err_disk": e2,
                            "slope_1d": s1, "slope_disk": s2}, chk.failures)


# 9 ---------------------------------------------------------------------------

def _energy_monotone(sol) -> bool:
    return all(energy_nonincreasing(st["energy_history"]) for st in sol.info["stages"])


def criterion_9(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    affine = []
    g1 = UniformGrid(Domain.interval(-1.0, 1.0), 65)
    g2 = _box(2, -1.0, 1.0, 17)
    for grid, func in ((g1, lambda x: (x + 1) / 2), (g2, lambda x, y: 0.3 + 0.5 * x - 0.2 * y)):
        exact = GridFunction.sample(grid, func)
        for p in (1.5, 2.0, 3.0, 4.0):
            sol = solve_plaplace(PLaplaceProblem(p, GridFunction.zeros(grid), exact), warm_start=False)
            err = float(np.max(np.abs(sol.u.values - exact.values)))
            chk(err <= 1e-8, f"d={grid.dimension} p={p}: affine error {err:.3g}")
            chk(_energy_monotone(sol), f"d={grid.dimension} p={p}: energy increased")
            affine.append({"d": grid.dimension, "p": p, "error": err, "iterations": sol.iterations,
                           "converged": sol.converged})
    V = GridFunction.sample(g2, lambda x, y: 1 + x * x)
    g = GridFunction.sample(g2, lambda x, y: np.cos(x) * np.exp(y))
    sol = solve_plaplace(PLaplaceProblem(2.0, V, g, eps=0.0), warm_start=False)
    bridge = float(np.max(np.abs(sol.u.values - linear_solution(g2, V.values, g.values))))
    chk(bridge <= 1e-8, f"p=2 bridge error {bridge:.3g}")
    monotone = []
    for p in (1.5, 3.0, 4.0):
        s = solve_plaplace(PLaplaceProblem(p, V, g), warm_start=False)
        monotone.append(_energy_monotone(s) and s.converged)
        chk(monotone[-1], f"p={p}: descent/convergence failed ({s.info['status']})")
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for p in (1.5, 2.0, 3.0):
        energy = PLaplaceEnergy(PLaplaceProblem(p, V, g))
        for _ in range(10):
            # directional derivative along a random direction at a random point
            u = rng.normal(size=g2.shape).ravel()
            v = rng.normal(size=u.size)
            step = 1e-5
            fd = (energy.value(u + step * v) - energy.value(u - step * v)) / (2 * step)
            exact = float(energy.gradient(u) @ v)
            worst = max(worst, abs(fd - exact) / abs(exact))
    chk(worst <= 1e-6, f"gradient vs finite differences {worst:.3g}")
    return CriterionResult(9, TITLES[9], not chk.failures,
                           {"affine": affine, "bridge": bridge, "descent": monotone, "fd_rel": worst},
                           chk.failures)


# 10 --------------------------------------------------------------------------

def criterion_10(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    g1 = UniformGrid(Domain.interval(-1.0, 1.0), 2 ** 12 + 1)
    u = GridFunction.sample(g1, lambda x: 1 - x * x)
    V1 = GridFunction.constant(g1, 1.0)
    t = energy_terms(u, V1, 2.0)
    chk(abs(t["potential"] - 16 / 15) <= 1e-6, f"int u^2 V = {t['potential']!r}")
    chk(abs(t["gradient"] - 8 / 3) <= 1e-6, f"int |u'|^2 = {t['gradient']!r}")
    sweep1 = default_sweep(g1, stride=64, r_min=2.0 ** -6)
    ana = fefferman_check(u, V1, 2.0, PhiSpec.power(-1.0, 2.0, 1.0), 0.0, sweep1)
    phi = PhiSpec.power(-2.0, p=2.0, n=2.0)
    radii = RadiusLadder.geometric(0.125, 2 * math.sqrt(2), 2.0)
    consts = []
    curve = None
    for n_nodes, stride in ((33, 2), (65, 4)):
        grid = _box(2, -1.0, 1.0, n_nodes)
        sweep = ball_sweep(grid, stride, radii)
        V = 1.0 + gaussian(grid, (0.2, -0.1), 0.3, 2.0)
        rng = np.random.default_rng(cfg.seed)
        us = []
        for i in range(min(8, cfg.battery_size)):
            c = tuple(rng.uniform(-0.3, 0.3, size=2))
            a = float(rng.uniform(0.3, 0.6))
            us.append(bump(grid, c, a))
        rep = fefferman_check(us, V, 2.0, phi, 0.0, sweep)
        consts.append(rep.constant)
        split = sigma_split_check(us, V, 0.2, 2.0, sigma_ladder=list(np.geomspace(1e-3, 10.0, 25)))
        chk(split.passed, f"K(sigma) not nonincreasing on the {n_nodes}-node grid")
        curve = split.details["K_curve"]
    drift = _rel(consts[0], consts[1])
    chk(drift <= 0.10, f"Fefferman C {consts[0]:.4g} -> {consts[1]:.4g} drifts {drift:.3g}")
    return CriterionResult(10, TITLES[10], not chk.failures,
                           {"potential_1d": t["potential"], "gradient_1d": t["gradient"],
                            "C_1d": ana.constant, "C_h": consts[0], "C_h/2": consts[1], "drift": drift,
                            "K_curve": curve}, chk.failures)


# 11 --------------------------------------------------------------------------

def cosh_caccioppoli(r: float) -> float:
    """Exact C(r) for u = cosh(x)/cosh(1), p = 2, x0 = 0."""
    return r ** 2 * (math.sinh(2 * r) / 2 - r) / (math.sinh(4 * r) / 2 + 2 * r)


def criterion_11(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 2 ** 11 + 1)
    one = GridFunction.constant(grid, 1.0)
    sol = solve_plaplace(PLaplaceProblem(2.0, one, one))
    chk(sol.converged, "cosh solve did not converge")
    radii = (0.1, 0.2, 0.3)
    rep = caccioppoli_check(sol, (0.0,), radii, 2.0)
    got = [row["C"] for row in rep.details["rows"]]
    exact = [cosh_caccioppoli(r) for r in radii]
    chk(rep.passed, f"C(r) spread {rep.constant:.4g} is not below {rep.cap:g}")
    return CriterionResult(11, TITLES[11], not chk.failures,
                           {"radii": list(radii), "C": got, "C_exact": exact, "spread": rep.constant,
                            "spread_exact": max(exact) / min(exact)}, chk.failures)


# 12 --------------------------------------------------------------------------

def _sucp_battery(d: int, n_nodes: int):
    g = _box(d, -1.0, 1.0, n_nodes)
    x1 = lambda *x: x[0]  # noqa: E731
    return [
        ("p=2 V=1 g=1", 2.0, GridFunction.constant(g, 1.0), GridFunction.constant(g, 1.0)),
        ("p=3 V=1+|x|^2 g=1+x1", 3.0, GridFunction.sample(g, lambda *x: 1 + sum(c * c for c in x)),
         GridFunction.sample(g, lambda *x: 1 + 0.5 * x[0])),
        ("p=1.5 V=0 g=2+x1", 1.5, GridFunction.zeros(g), GridFunction.sample(g, lambda *x: 2 + x[0])),
        ("p=2 V=0 g=x1", 2.0, GridFunction.zeros(g), GridFunction.sample(g, x1)),
        ("p=3 V=0 g=x1", 3.0, GridFunction.zeros(g), GridFunction.sample(g, x1)),
    ]


def criterion_12(cfg: SuiteConfig) -> CriterionResult:
    chk = _Checks()
    rmin = 1.0 / 16
    radii = [rmin * 2 ** j for j in range(4)]
    slopes = []
    for d in (1, 2):
        for fac in (8, 16):
            grid = UniformGrid.with_spacing(Domain.box([-1.0] * d, [1.0] * d), rmin / fac)
            for k in (0, 1, 2):
                u = monomial(grid, (0.0,) * d, k)
                for p in (1.5, 2.0, 3.0):
                    est = vanishing_order(mass_function(u, (0.0,) * d, radii, p))
                    err = abs(est - k)
                    ok = err <= 0.05 * max(k, 1)
                    chk(ok, f"slope d={d} k={k} p={p} h=r_min/{fac}: k_est={est:.4f}")
                    slopes.append({"d": d, "k": k, "p": p, "h_over_rmin": 1 / fac, "k_est": est})
    doubling = []
    for d in (1, 2):
        grid = UniformGrid.with_spacing(Domain.box([-0.5] * d, [0.5] * d), rmin / 32)
        for k in (0, 1, 2):
            u = monomial(grid, (0.0,) * d, k)
            for p in (1.5, 2.0, 3.0):
                prof = mass_function(u, (0.0,) * d, radii, p)
                err = float(np.max(np.abs(prof.ratios / 2 ** (k * p + d) - 1)))
                chk(err <= 0.03, f"doubling d={d} k={k} p={p}: rel error {err:.4f}")
                doubling.append({"d": d, "k": k, "p": p, "max_rel_error": err})
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 2049)
    with np.errstate(divide="ignore", over="ignore"):
        spec = GridFunction.sample(grid, lambda x: np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300) ** 2), 0.0))
    label, rep = classify_profile(mass_function(spec, (0.0,), [2.0 ** -k for k in range(6, 0, -1)], 2.0))
    chk(label == INFINITE_ORDER_SUSPECT, f"exp(-1/x^2) specimen classified {label}")
    classes = []
    for d, n_nodes in ((1, 257), (2, 65)):
        for name, p, V, g in _sucp_battery(d, n_nodes):
            res = sucp_experiment(PLaplaceProblem(p, V, g), (0.0,) * d)
            chk(res["pass"], f"d={d} {name}: labels {res['labels']}")
            classes.append({"d": d, "problem": name, "labels": res["labels"], "stable": res["stable"],
                            "order": res["runs"][0].get("order")})
    g = _box(1, -1.0, 1.0, 65)
    signed = sucp_experiment(PLaplaceProblem(2.0, GridFunction.constant(g, -2.0), GridFunction.constant(g, 1.0)),
                             (0.0,))
    return CriterionResult(12, TITLES[12], not chk.failures,
                           {"slopes": slopes, "doubling": doubling, "specimen": label,
                            "specimen_ratios": rep.details["ratios"], "classifications": classes,
                            "signed_V_recorded": {"labels": signed["labels"], "pass": signed["pass"]}},
                           chk.failures)


# 13 --------------------------------------------------------------------------

def write_results(results: list[CriterionResult], out_dir: Path, cfg: SuiteConfig) -> list[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for res in results:
        name = f"criterion_{res.number:02d}.json"
        (out_dir / name).write_text(dumps(res.to_dict()), encoding="utf-8")
        files.append(name)
    manifest = {"kind": "suite", "seed": cfg.seed, "battery_size": cfg.battery_size, "mutate": cfg.mutate,
                "checks": [{"criterion": r.number, "title": r.title, "pass": r.passed,
                            "file": f"criterion_{r.number:02d}.json"} for r in results],
                "files": files,
                "wall_clock": {f"criterion_{r.number:02d}": r.elapsed for r in results}}
    (out_dir / "manifest.json").write_text(dumps(manifest), encoding="utf-8")
    return files + ["manifest.json"]


def compare_runs(a: Path, b: Path) -> list[str]:
    """Files that differ between two suite output directories (manifest wall-clock excluded)."""
    diffs = []
    names = sorted({p.name for p in a.iterdir()} | {p.name for p in b.iterdir()})
    for name in names:
        pa, pb = a / name, b / name
        if not (pa.exists() and pb.exists()):
            diffs.append(name)
        elif name == "manifest.json":
            ma, mb = (json.loads(p.read_text(encoding="utf-8")) for p in (pa, pb))
            ma.pop("wall_clock", None)
            mb.pop("wall_clock", None)
            if ma != mb:
                diffs.append(name)
        elif not filecmp.cmp(pa, pb, shallow=False):
            diffs.append(name)
    return diffs


def criterion_13(cfg: SuiteConfig, budget: float = 600.0) -> CriterionResult:
    chk = _Checks()
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        runs = []
        for k in range(2):
            out = Path(tmp) / f"run{k}"
            res = run_criteria(cfg, numbers=range(1, 13))
            write_results(res, out, cfg)
            runs.append(out)
        diffs = compare_runs(*runs)
    elapsed = time.perf_counter() - t0
    chk(not diffs, f"outputs differ: {diffs}")
    chk(elapsed / 2 < budget, f"one suite pass took {elapsed / 2:.0f} s")
    return CriterionResult(13, TITLES[13], not chk.failures,
                           {"differing_files": diffs, "runs": 2}, chk.failures)


CRITERIA: dict[int, Callable[[SuiteConfig], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11, 12: criterion_12,
    13: criterion_13,
}


def run_criterion(number: int, cfg: SuiteConfig | None = None, apply_mutation: bool = True) -> CriterionResult:
    cfg = cfg or SuiteConfig()
    t0 = time.perf_counter()
    with mutation(cfg.mutate if apply_mutation else None):
        res = CRITERIA[number](cfg)
    res.elapsed = time.perf_counter() - t0
    res.metrics = jsonable(res.metrics)
    return res


def run_criteria(cfg: SuiteConfig, numbers: Iterable[int] = CRITERIA, echo: Callable[[str], None] | None = None,
                 workers: int = 1) -> list[CriterionResult]:
    """Run criteria in order (threads when ``workers > 1``); the mutation is applied once around the batch."""
    numbers = list(numbers)
    results = []
    with mutation(cfg.mutate):
        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(run_criterion, n, cfg, False) for n in numbers]
                for fut in futures:
                    results.append(fut.result())
                    if echo:
                        echo(results[-1].line())
            return results
        for n in numbers:
            results.append(run_criterion(n, cfg, False))
            if echo:
                echo(results[-1].line())
    return results
