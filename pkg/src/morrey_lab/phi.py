"""Catalogue of weight functions phi: (0, inf) -> (0, inf) and the G_p checks."""

from __future__ import annotations

import csv
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .errors import ConfigError, DivergenceError, InvalidInputError, OutOfRangeError

FAMILIES = ("power", "logpower", "table")


@dataclass(frozen=True)
class PhiSpec:
    """A parameterised phi with its (p, n) context.

    ``power``: r**beta.  ``logpower``: r**beta * (1 + |log r|)**gamma.
    ``table``: log-log linear interpolation of sorted (r, phi) samples.
    """

    family: str = "power"
    beta: float = 0.0
    gamma: float = 0.0
    p: float = 1.0
    n: float = 1.0
    table_r: tuple[float, ...] = field(default=(), repr=False)
    table_phi: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInputError(f"unknown phi family {self.family!r}")
        if not self.p >= 1:
            raise InvalidInputError(f"phi context p must be >= 1, got {self.p}")
        if not self.n > 0:
            raise InvalidInputError(f"phi context n must be positive, got {self.n}")
        if self.family == "table":
            r = np.asarray(self.table_r, dtype=float)
            v = np.asarray(self.table_phi, dtype=float)
            if r.size < 2 or r.size != v.size:
                raise InvalidInputError("phi table needs at least two (r, phi) pairs")
            if np.any(r <= 0) or np.any(np.diff(r) <= 0):
                raise InvalidInputError("phi table radii must be positive and strictly increasing")
            if np.any(v <= 0):
                raise InvalidInputError("phi table values must be positive")

    @classmethod
    def power(cls, beta: float, p: float = 1.0, n: float = 1.0) -> PhiSpec:
        return cls("power", beta=float(beta), p=p, n=n)

    @classmethod
    def logpower(cls, beta: float, gamma: float, p: float = 1.0, n: float = 1.0) -> PhiSpec:
        return cls("logpower", beta=float(beta), gamma=float(gamma), p=p, n=n)

    @classmethod
    def table(cls, r, phi, p: float = 1.0, n: float = 1.0) -> PhiSpec:
        return cls("table", p=p, n=n, table_r=tuple(map(float, r)), table_phi=tuple(map(float, phi)))

    @classmethod
    def classical(cls, lam: float, p: float, n: float) -> PhiSpec:
        """phi(r) = r**((lam - n)/p), which turns the generalised norm into M^{p,lam}."""
        return cls.power((lam - n) / p, p=p, n=n)

    def __call__(self, r):
        return eval_phi(self, r)

    def describe(self) -> dict:
        out = {"family": self.family, "p": self.p, "n": self.n}
        if self.family in ("power", "logpower"):
            out["beta"] = self.beta
        if self.family == "logpower":
            out["gamma"] = self.gamma
        if self.family == "table":
            out["table"] = [list(self.table_r), list(self.table_phi)]
        return out


def eval_phi(spec: PhiSpec, r):
    """phi(r) for a scalar or array of radii."""
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr > 0)):
        raise InvalidInputError("phi is only defined for r > 0")
    if spec.family == "power":
        out = arr ** spec.beta
    elif spec.family == "logpower":
        out = arr ** spec.beta * (1.0 + np.abs(np.log(arr))) ** spec.gamma
    else:
        tr = np.asarray(spec.table_r)
        lo, hi = tr[0], tr[-1]
        if np.any(arr < lo * (1 - 1e-12)) or np.any(arr > hi * (1 + 1e-12)):
            raise OutOfRangeError(f"r outside the phi table range [{lo}, {hi}]")
        clipped = np.clip(arr, lo, hi)
        out = np.exp(np.interp(np.log(clipped), np.log(tr), np.log(spec.table_phi)))
    if np.ndim(r) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class GpReport:
    almost_decreasing_constant: float
    almost_increasing_constant: float
    doubling_constant: float
    r_grid: tuple[float, ...]
    cap: float

    @property
    def decreasing_ok(self) -> bool:
        return self.almost_decreasing_constant <= self.cap

    @property
    def increasing_ok(self) -> bool:
        return self.almost_increasing_constant <= self.cap

    @property
    def doubling_ok(self) -> bool:
        return self.doubling_constant <= self.cap

    @property
    def in_gp(self) -> bool:
        return self.decreasing_ok and self.increasing_ok

    def to_dict(self) -> dict:
        return {
            "almost_decreasing_constant": self.almost_decreasing_constant,
            "almost_increasing_constant": self.almost_increasing_constant,
            "doubling_constant": self.doubling_constant,
            "cap": self.cap,
            "decreasing_ok": self.decreasing_ok,
            "increasing_ok": self.increasing_ok,
            "doubling_ok": self.doubling_ok,
            "in_gp": self.in_gp,
            "r_grid": list(self.r_grid),
        }


def _check_grid(r_grid) -> np.ndarray:
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise InvalidInputError("r_grid needs at least two radii")
    if np.any(r <= 0):
        raise InvalidInputError("r_grid must be positive")
    if np.any(np.diff(r) < 0):
        raise InvalidInputError("r_grid must be sorted ascending")
    return r


def check_gp(spec: PhiSpec, r_grid: Sequence[float], cap: float = 100.0) -> GpReport:
    """Empirical G_p constants of ``spec`` on a finite radius grid.

    The almost-decreasing constant C is oriented so that phi(r) >= phi(s)/C
    for all grid r <= s; the almost-increasing constant bounds
    r^{n/p} phi(r) <= C s^{n/p} phi(s).  Both are clamped below at 1.
    """
    r = _check_grid(r_grid)
    phi = np.asarray(eval_phi(spec, r), dtype=float)
    # max over i <= j of phi_j / phi_i
    dec = float(np.max(phi / np.minimum.accumulate(phi)))
    psi = r ** (spec.n / spec.p) * phi
    # max over i <= j of psi_i / psi_j
    inc = float(np.max(psi / np.minimum.accumulate(psi[::-1])[::-1]))
    ratio = r[:, None] / r[None, :]
    near = (ratio >= 0.5) & (ratio <= 2.0)
    q = phi[:, None] / phi[None, :]
    dbl = float(np.max(np.maximum(q, 1.0 / q)[near]))
    return GpReport(max(dec, 1.0), max(inc, 1.0), dbl, tuple(map(float, r)), float(cap))


def tail_is_finite(spec: PhiSpec) -> bool:
    if spec.family == "power":
        return spec.beta < -1
    if spec.family == "logpower":
        return spec.beta < -1 or (spec.beta == -1 and spec.gamma < -1)
    return _table_last_slope(spec) < -1


def _table_last_slope(spec: PhiSpec) -> float:
    r, v = spec.table_r, spec.table_phi
    return math.log(v[-1] / v[-2]) / math.log(r[-1] / r[-2])


def _table_segment_integral(r0, r1, v0, v1, a, b) -> float:
    # phi = v0 (t/r0)^s on [r0, r1], integrated over [a, b] inside it
    s = math.log(v1 / v0) / math.log(r1 / r0)
    if abs(s + 1) < 1e-14:
        return v0 * r0 * math.log(b / a)
    return v0 * r0 ** (-s) * (b ** (s + 1) - a ** (s + 1)) / (s + 1)


def _tail(spec: PhiSpec, r: float, r_cutoff: float) -> float:
    """Integral of phi from r to infinity."""
    if spec.family == "table":
        tr, tv = spec.table_r, spec.table_phi
        if r < tr[0] * (1 - 1e-12):
            raise OutOfRangeError(f"r = {r} below the phi table range")
        total = 0.0
        for i in range(len(tr) - 1):
            a, b = max(r, tr[i]), tr[i + 1]
            if b > a:
                total += _table_segment_integral(tr[i], tr[i + 1], tv[i], tv[i + 1], a, b)
        s = _table_last_slope(spec)
        start = max(r, tr[-1])
        return total + tv[-1] * tr[-1] ** (-s) * start ** (s + 1) / abs(s + 1)

    def f(t):
        return eval_phi(spec, t)

    def remainder(a: float) -> float:
        if spec.family == "power":
            return a ** (spec.beta + 1) / abs(spec.beta + 1)
        val, _ = integrate.quad(f, a, np.inf, epsabs=0.0, epsrel=1e-12, limit=500)
        return val

    if r >= r_cutoff:
        return remainder(r)
    # geometric sub-intervals keep the adaptive rule well conditioned across scales
    n_pieces = max(1, int(math.ceil(math.log2(r_cutoff / r))))
    edges = r * (r_cutoff / r) ** (np.arange(n_pieces + 1) / n_pieces)
    body = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        body += val
    return body + remainder(r_cutoff)


def tail_integral_constant(spec: PhiSpec, lam: float, r_grid: Sequence[float],
                           r_cutoff: float | None = None) -> float:
    """Smallest C with  int_r^inf phi(t) dt <= C r^(lam + 1 - n)  at every grid radius."""
    n = spec.n
    if not (0 <= lam < n - 1):
        raise InvalidInputError(f"need 0 <= lambda < n - 1 (lambda={lam}, n={n})")
    r = _check_grid(r_grid)
    if not tail_is_finite(spec):
        desc = ", ".join(f"{k}={v}" for k, v in spec.describe().items() if k != "table")
        raise DivergenceError(f"int_r^inf phi(t) dt diverges for {desc}")
    cutoff = float(r_cutoff) if r_cutoff is not None else 1e4 * float(r[-1])
    ratios = [_tail(spec, float(ri), cutoff) / ri ** (lam + 1 - n) for ri in r]
    return float(max(ratios))


def parse_phi(block: Mapping[str, str], base_dir: str | Path | None = None) -> PhiSpec:
    """Build a PhiSpec from a config block (``family``, ``beta``, ``gamma``, ``table_path``, ``p``, ``n``)."""

    def num(key, default=None):
        if key not in block:
            if default is None:
                raise ConfigError(f"[phi] missing required field {key!r}")
            return default
        try:
            return float(block[key])
        except ValueError as exc:
            raise ConfigError(f"[phi] field {key!r}: not a number: {block[key]!r}") from exc

    family = block.get("family", "power").strip().lower()
    p = num("p", 1.0)
    n = num("n", 1.0)
    if family == "power":
        return PhiSpec.power(num("beta"), p=p, n=n)
    if family == "logpower":
        return PhiSpec.logpower(num("beta"), num("gamma"), p=p, n=n)
    if family == "table":
        if "table_path" not in block:
            raise ConfigError("[phi] family=table requires table_path")
        path = Path(block["table_path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if not path.exists():
            raise ConfigError(f"[phi] table_path {str(path)!r} does not exist")
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        try:
            rs = [float(row["r"]) for row in rows]
            vs = [float(row["phi"]) for row in rows]
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"[phi] {path}: expected columns r,phi") from exc
        return PhiSpec.table(rs, vs, p=p, n=n)
    raise ConfigError(f"[phi] unknown family {family!r}")
