"""``morrey-lab``: run configured experiments, the acceptance suite, or describe the config schema.

Exit status is 0 when every enabled check passes, 1 when a check fails and
2 on input errors (malformed config, missing files, rejected hypotheses).
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, acceptance
from .battery import KINDS as BATTERY_KINDS
from .battery import BatteryMember, bump, make_battery
from .config import KINDS, ExperimentConfig, load_config
from .errors import HypothesisViolationError, MorreyLabError
from .grid import GridFunction, write_csv
from .norms import (classical_morrey_norm, embedding_check, holder_product_check, indicator_bounds_check,
                    minkowski_check, morrey_norm)
from .operators import a1_check, hedberg_check
from .pde.inequalities import caccioppoli_check, fefferman_check, sigma_split_check
from .pde.plaplace import PLaplaceProblem, solve_plaplace
from .pde.poisson import PoissonProblem, solve_poisson
from .reports import dumps, jsonable
from .sucp import sucp_experiment

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

INEQUALITIES = ("indicator_bounds", "embedding", "holder", "minkowski", "a1", "hedberg", "fefferman",
                "sigma_split", "caccioppoli")


def thread_cap(default: int | None = None) -> int:
    """Worker count, capped by MORREY_LAB_THREADS when set."""
    n = default or min(4, os.cpu_count() or 1)
    env = os.environ.get("MORREY_LAB_THREADS")
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            raise MorreyLabError(f"MORREY_LAB_THREADS must be an integer, got {env!r}") from None
    return n


class Writer:
    """Single writer for one output directory; remembers every file it emits."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def json(self, name: str, obj) -> str:
        (self.out / name).write_text(dumps(obj), encoding="utf-8")
        self.files.append(name)
        return name

    def grid_csv(self, name: str, f: GridFunction) -> str:
        write_csv(f, self.out / name)
        self.files.append(name)
        return name

    def table_csv(self, name: str, header: list[str], rows) -> str:
        with open(self.out / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([f"{float(v):.17g}" for v in row])
        self.files.append(name)
        return name


def _check(name: str, passed, file: str, witness=None, **extra) -> dict:
    return {"name": name, "pass": passed, "file": file, "witness": witness, **extra}


def _p(cfg: ExperimentConfig, phi=None, key: str = "p") -> float:
    default = phi.p if phi is not None else None
    return cfg.number("problem", key, default) if cfg.has("problem") else float(default)


def _battery(cfg: ExperimentConfig, grid, kinds=BATTERY_KINDS) -> list[BatteryMember]:
    size = cfg.integer("battery", "size", 8)
    if cfg.has("battery", "kinds"):
        kinds = tuple(k.strip() for k in cfg.raw("battery", "kinds").replace(",", " ").split())
        bad = [k for k in kinds if k not in BATTERY_KINDS]
        if bad:
            raise MorreyLabError(f"{cfg.where('battery', 'kinds')}: unknown kinds {bad}")
    return make_battery(grid, size, cfg.seed, kinds)


def _members(cfg: ExperimentConfig, grid, key: str = "f", kinds=BATTERY_KINDS) -> list[BatteryMember]:
    key = key.lower()
    if cfg.has("problem", key) or cfg.has("problem", key + "_csv"):
        return [BatteryMember(key, cfg.function(grid, key))]
    return _battery(cfg, grid, kinds)


def _point(cfg: ExperimentConfig, grid, key: str) -> tuple[float, ...]:
    lo, hi = grid.domain.bounds
    default = [(a + b) / 2 for a, b in zip(lo, hi)]
    pt = cfg.numbers("problem", key, default)
    if len(pt) != grid.dimension:
        raise MorreyLabError(f"{cfg.where('problem', key)}: expected {grid.dimension} coordinates")
    return tuple(pt)


# experiments -------------------------------------------------------------------

def run_norm(cfg: ExperimentConfig, w: Writer) -> tuple[list[dict], dict]:
    grid = cfg.grid()
    phi = cfg.phi()
    p = _p(cfg, phi)
    f = cfg.function(grid, "f")
    sweep = cfg.sweep(grid)
    rep = morrey_norm(f, p, phi, sweep)
    summary = {"norm": rep.value, "witness": rep.witness}
    out = {"morrey": rep}
    if cfg.has("problem", "lambda"):
        cl = classical_morrey_norm(f, p, cfg.number("problem", "lambda"), sweep)
        out["classical"] = cl
        summary["classical_norm"] = cl.value
    w.json("norm.json", out)
    rows = [list(b.center) + [b.radius, v] for b, v in zip(sweep, rep.per_ball)]
    w.table_csv("per_ball.csv", [f"x{k + 1}" for k in range(grid.dimension)] + ["r", "value"], rows)
    return [], summary


def run_inequality(cfg: ExperimentConfig, w: Writer) -> tuple[list[dict], dict]:
    name = cfg.raw("inequality", "name").strip().lower()
    if name not in INEQUALITIES:
        raise MorreyLabError(f"{cfg.where('inequality', 'name')}: unknown inequality {name!r}; "
                             f"expected one of {INEQUALITIES}")
    grid = cfg.grid()
    cap = cfg.number("inequality", "cap", None) if cfg.has("inequality", "cap") else None
    kw = {} if cap is None else {"cap": cap}
    reports: list[tuple[str, object]] = []
    if name == "caccioppoli":
        problem = PLaplaceProblem(cfg.number("problem", "p"), cfg.function(grid, "V", default="0"),
                                  cfg.function(grid, "g", default="1"))
        sol = solve_plaplace(problem, **cfg.solver_options())
        w.grid_csv("solution.csv", sol.u)
        radii = cfg.numbers("inequality", "radii")
        factor = cfg.number("inequality", "factor", 10.0)
        reports.append(("caccioppoli", caccioppoli_check(sol, _point(cfg, grid, "x0"), radii, problem.p, factor)))
    elif name == "a1":
        wt = cfg.function(grid, "f")
        reports.append(("a1", a1_check(wt, cfg.ladder(grid), **kw)))
    else:
        sweep = cfg.sweep(grid)
        if name == "indicator_bounds":
            phi = cfg.phi()
            p = _p(cfg, phi)
            for r0 in cfg.numbers("inequality", "r0"):
                reports.append((f"indicator_bounds r0={r0:g}", indicator_bounds_check(grid, r0, p, phi, sweep, **kw)))
        elif name == "embedding":
            phi1, phi2 = cfg.phi("phi"), cfg.phi("phi2")
            p1 = cfg.number("inequality", "p1", phi1.p)
            p2 = cfg.number("inequality", "p2", phi2.p)
            rep = embedding_check(p1, phi1, p2, phi2, _members(cfg, grid), sweep,
                                  drop_levels=cfg.integer("inequality", "drop_levels", 2),
                                  growth_tol=cfg.number("inequality", "growth_tol", 0.1))
            reports.append(("embedding", rep))
        elif name in ("holder", "minkowski"):
            phi = cfg.phi()
            p = _p(cfg, phi)
            f, g = cfg.function(grid, "f"), cfg.function(grid, "g")
            fn = holder_product_check if name == "holder" else minkowski_check
            reports.append((name, fn(f, g, p, phi, sweep)))
        elif name == "hedberg":
            phi = cfg.phi()
            p = _p(cfg, phi)
            lam = cfg.number("problem", "lambda", 0.0)
            ladder = cfg.ladder(grid)
            for m in _members(cfg, grid, kinds=("indicator", "gaussian", "bump", "monomial")):
                reports.append((f"hedberg {m.label}", hedberg_check(m.f, p, phi, lam, sweep, ladder, **kw)))
        elif name == "fefferman":
            phi = cfg.phi()
            p = _p(cfg, phi)
            V = cfg.function(grid, "V")
            lam = cfg.number("problem", "lambda", 0.0)
            reports.append(("fefferman", fefferman_check(_bumps(cfg, grid), V, p, phi, lam, sweep, **kw)))
        elif name == "sigma_split":
            V = cfg.function(grid, "V")
            sigma = cfg.number("inequality", "sigma")
            ladder = cfg.numbers("inequality", "sigma_ladder", [])
            reports.append(("sigma_split", sigma_split_check(_bumps(cfg, grid), V, sigma,
                                                             cfg.number("problem", "p", 2.0), ladder)))
    checks = []
    for i, (label, rep) in enumerate(reports):
        rep.seed = cfg.seed
        fname = w.json(f"report_{i:02d}_{rep.name}.json", rep)
        checks.append(_check(label, rep.passed, fname, rep.witness, constant=rep.constant))
    return checks, {"inequality": name, "reports": len(reports)}


def _bumps(cfg: ExperimentConfig, grid) -> list[BatteryMember]:
    """Compactly supported test functions: a given u, or seeded C^2 bumps inside the domain."""
    if cfg.has("problem", "u") or cfg.has("problem", "u_csv"):
        return [BatteryMember("u", cfg.function(grid, "u"))]
    size = cfg.integer("battery", "size", 8)
    if size < 1:
        raise MorreyLabError(f"{cfg.where('battery', 'size')}: battery size must be positive")
    rng = np.random.default_rng(cfg.seed)
    lo, hi = (np.asarray(b) for b in grid.domain.bounds)
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    out = []
    for i in range(size):
        c = mid + half * rng.uniform(-0.3, 0.3, size=grid.dimension)
        a = float(np.min(half) * rng.uniform(0.3, 0.6))
        out.append(BatteryMember(f"bump[{i}] a={a:.4g}", bump(grid, c, a)))
    return out


def _probes(cfg: ExperimentConfig, grid, u: GridFunction) -> dict:
    lo, hi = grid.domain.bounds
    center = tuple((a + b) / 2 for a, b in zip(lo, hi))
    out = {"center": list(center), "center_value": u.at(center)}
    if cfg.has("problem", "probe"):
        pts = [p for p in cfg.raw("problem", "probe").split(";") if p.strip()]
        vals = []
        for text in pts:
            x = [float(t) for t in text.replace(",", " ").split()]
            if len(x) != grid.dimension:
                raise MorreyLabError(f"{cfg.where('problem', 'probe')}: point {text.strip()!r} has wrong dimension")
            vals.append({"x": x, "value": u.at(tuple(x))})
        out["probes"] = vals
    return out


def run_solve(cfg: ExperimentConfig, w: Writer) -> tuple[list[dict], dict]:
    grid = cfg.grid()
    equation = cfg.raw("problem", "equation").strip().lower()
    if equation == "poisson":
        sol = solve_poisson(PoissonProblem(cfg.function(grid, "V")), tol=cfg.number("solver", "tol", 1e-10))
    elif equation in ("plaplace", "p-laplace"):
        eps = cfg.number("solver", "eps", None) if cfg.has("solver", "eps") else None
        problem = PLaplaceProblem(cfg.number("problem", "p"), cfg.function(grid, "V", default="0"),
                                  cfg.function(grid, "g", default="0"), eps)
        sol = solve_plaplace(problem, **cfg.solver_options())
    else:
        raise MorreyLabError(f"{cfg.where('problem', 'equation')}: unknown equation {equation!r}")
    csv_name = w.grid_csv("solution.csv", sol.u)
    probes = _probes(cfg, grid, sol.u)
    report = {"equation": equation, "grid": grid.describe(), "seed": cfg.seed, **sol.manifest(), **probes}
    fname = w.json("solution.json", report)
    checks = [_check("converged", sol.converged, fname, {"residual": sol.residual}, data=csv_name)]
    return checks, {"equation": equation, "residual": sol.residual, "iterations": sol.iterations, **probes}


def run_sucp(cfg: ExperimentConfig, w: Writer) -> tuple[list[dict], dict]:
    grid = cfg.grid()
    eps = cfg.number("solver", "eps", None) if cfg.has("solver", "eps") else None
    problem = PLaplaceProblem(cfg.number("problem", "p"), cfg.function(grid, "V", default="0"),
                              cfg.function(grid, "g", default="1"), eps)
    x0 = _point(cfg, grid, "x0")
    ladder = cfg.numbers("sweep", "radii") if cfg.has("sweep", "radii") else None
    cap = cfg.number("inequality", "cap", None) if cfg.has("inequality", "cap") else None
    res = sucp_experiment(problem, x0, ladder, cap, refine=cfg.flag("problem", "refine", True),
                          solver_opts=cfg.solver_options())
    res["seed"] = cfg.seed
    for k, run in enumerate(res["runs"]):
        prof = run.get("profile")
        if prof is None:
            continue
        ratio = dict(zip(prof["ratio_radii"], prof["ratios"]))
        rows = [(r, m, ratio.get(r, math.nan)) for r, m in zip(prof["radii"], prof["masses"])]
        run["profile_csv"] = w.table_csv(f"profile_{k}.csv", ["r", "mass", "ratio"], rows)
    fname = w.json("sucp.json", res)
    # a V that changes sign is outside the hypotheses: recorded, not claimed
    checks = [] if res["pass"] is None else [_check("sucp", res["pass"], fname, {"labels": res["labels"]})]
    return checks, {"labels": res["labels"], "stable": res["stable"], "claimed": res["pass"] is not None,
                    "report": fname}


def run_suite_experiment(cfg: ExperimentConfig, w: Writer, battery_size: int | None = None,
                         mutate: str | None = None, echo=print) -> tuple[list[dict], dict]:
    size = battery_size if battery_size is not None else cfg.integer("suite", "battery_size",
                                                                     acceptance.DEFAULT_BATTERY)
    only = [int(v) for v in cfg.numbers("suite", "only", list(acceptance.CRITERIA))]
    return _suite(acceptance.SuiteConfig(cfg.seed, size, mutate), w, only, echo)


def _suite(scfg: acceptance.SuiteConfig, w: Writer | None, only, echo) -> tuple[list[dict], dict]:
    if scfg.battery_size < 1:
        raise MorreyLabError("battery size must be positive")
    bad = [n for n in only if n not in acceptance.CRITERIA]
    if bad:
        raise MorreyLabError(f"unknown criteria {bad}")
    results = acceptance.run_criteria(scfg, only, echo=echo, workers=thread_cap())
    checks = []
    for res in results:
        fname = f"criterion_{res.number:02d}.json"
        if w is not None:
            w.json(fname, res.to_dict())
        checks.append(_check(f"criterion {res.number} {res.title}", res.passed, fname,
                             res.failures or None))
    return checks, {"criteria": len(results), "failed": [r.number for r in results if not r.passed],
                    "battery_size": scfg.battery_size, "mutate": scfg.mutate,
                    "elapsed": {f"criterion_{r.number:02d}": r.elapsed for r in results}}


RUNNERS = {"norm": run_norm, "inequality": run_inequality, "solve": run_solve, "sucp": run_sucp}


def execute(cfg: ExperimentConfig, out: Path | None = None, battery_size: int | None = None,
            mutate: str | None = None, echo=print) -> tuple[int, dict]:
    """Run one configured experiment and write its manifest; returns (exit status, manifest)."""
    out = out or cfg.output
    if battery_size is not None and battery_size < 1:
        raise MorreyLabError("battery size override must be positive")
    if battery_size is not None:
        cfg.sections.setdefault("battery", {})["size"] = str(battery_size)
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    w = Writer(out)
    if cfg.kind == "suite":
        checks, summary = run_suite_experiment(cfg, w, battery_size, mutate, echo)
        elapsed = summary.pop("elapsed")
    else:
        checks, summary = RUNNERS[cfg.kind](cfg, w)
        elapsed = None
    status = EXIT_OK if all(c["pass"] for c in checks) else EXIT_FAIL
    manifest = {
        "artifact": "morrey-lab",
        "version": __version__,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "summary": summary,
        "checks": checks,
        "pass": status == EXIT_OK,
        "files": list(w.files) + ["manifest.json"],
        "wall_clock": {"started_utc": started, "seconds": time.perf_counter() - t0, "per_check": elapsed},
    }
    (out / "manifest.json").write_text(dumps(manifest), encoding="utf-8")
    return status, jsonable(manifest)


# argparse ----------------------------------------------------------------------

SCHEMA = {
    "experiment": "kind (norm|inequality|solve|sucp|suite), seed, output",
    "domain": "shape (box|ball); box: lower, upper [, dimension]; ball: center, radius; nodes or h",
    "phi": "family (power|logpower|table), beta, gamma, table_path, p, n",
    "phi2": "second phi for inequality name=embedding",
    "problem": "f, g, V, u as expressions in x, y, z, r (or *_csv paths); p, lambda, equation (poisson|plaplace), "
               "x0, probe (points separated by ';'), refine",
    "sweep": "stride, ratio, r_min, r_max, or radii (explicit list)",
    "solver": "tol, max_iter, damping, eps, warm_start",
    "inequality": f"name ({'|'.join(INEQUALITIES)}), cap, r0, radii, factor, sigma, sigma_ladder, p1, p2, "
                  "drop_levels, growth_tol",
    "battery": f"size, kinds ({' '.join(BATTERY_KINDS)})",
    "suite": "battery_size, only",
}


def _describe(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        print(dumps({"kind": cfg.kind, "seed": cfg.seed, "output": str(cfg.output), "config": cfg.echo()}), end="")
        return EXIT_OK
    print(f"morrey-lab {__version__}")
    print(f"experiment kinds: {', '.join(KINDS)}")
    print("config sections (key = value lines):")
    for name, text in SCHEMA.items():
        print(f"  [{name}] {text}")
    print("acceptance criteria:")
    for n, title in acceptance.TITLES.items():
        print(f"  {n:2d}. {title}")
    print(f"mutations: {', '.join(acceptance.MUTATIONS)}")
    return EXIT_OK


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.sections.setdefault("experiment", {})["seed"] = str(args.seed)
    status, manifest = execute(cfg, Path(args.out) if args.out else None, args.battery_size, args.mutate)
    for c in manifest["checks"]:
        if cfg.kind != "suite":
            print(f"[{'PASS' if c['pass'] else 'FAIL'}] {c['name']} -> {c['file']}")
    out = Path(args.out) if args.out else cfg.output
    print(f"manifest: {out / 'manifest.json'} (exit {status})")
    return status


def _suite_cmd(args) -> int:
    scfg = acceptance.SuiteConfig(args.seed if args.seed is not None else acceptance.DEFAULT_SEED,
                                  args.battery_size if args.battery_size is not None else acceptance.DEFAULT_BATTERY,
                                  args.mutate)
    only = [int(v) for v in args.only.split(",")] if args.only else list(acceptance.CRITERIA)
    t0 = time.perf_counter()
    w = Writer(Path(args.out)) if args.out else None
    checks, summary = _suite(scfg, w, only, print)
    if w is not None:
        manifest = {"artifact": "morrey-lab", "version": __version__, "kind": "suite", "seed": scfg.seed,
                    "config": {"battery_size": scfg.battery_size, "mutate": scfg.mutate, "only": only},
                    "summary": {k: v for k, v in summary.items() if k != "elapsed"}, "checks": checks,
                    "pass": not summary["failed"], "files": w.files + ["manifest.json"],
                    "wall_clock": {"seconds": time.perf_counter() - t0, "per_check": summary["elapsed"]}}
        (w.out / "manifest.json").write_text(dumps(manifest), encoding="utf-8")
    failed = summary["failed"]
    print(f"{len(checks) - len(failed)}/{len(checks)} criteria passed in {time.perf_counter() - t0:.1f} s"
          + (f"; failed: {', '.join(map(str, failed))}" if failed else ""))
    return EXIT_FAIL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morrey-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the seed")
    common.add_argument("--battery-size", type=int, help="override the battery size")
    common.add_argument("--mutate", choices=sorted(acceptance.MUTATIONS),
                        help="apply a deliberate code mutation (the suite should then fail)")
    common.add_argument("--out", help="output directory")

    p_run = sub.add_parser("run", parents=[common], help="run the experiment described by a config file")
    p_run.add_argument("config", help="path to the config file")
    p_run.set_defaults(func=_run)

    p_suite = sub.add_parser("suite", parents=[common], help="run the acceptance battery")
    p_suite.add_argument("--only", help="comma-separated criterion numbers")
    p_suite.set_defaults(func=_suite_cmd)

    p_desc = sub.add_parser("describe", help="print the config schema, or echo a parsed config")
    p_desc.add_argument("config", nargs="?", help="config file to parse and echo")
    p_desc.set_defaults(func=_describe)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with acceptance.mutation(getattr(args, "mutate", None)):
            return args.func(args)
    except HypothesisViolationError as exc:
        print(f"morrey-lab: hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (MorreyLabError, ValueError, OSError) as exc:
        print(f"morrey-lab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
