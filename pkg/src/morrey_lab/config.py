"""Experiment configuration: ``key = value`` lines under ``[section]`` headers.

Sections:

``[experiment]``  kind (norm | inequality | solve | sucp | suite), seed, output
``[domain]``      shape (box | ball), lower/upper or center/radius, nodes or h
``[phi]``         family, beta, gamma, table_path, p, n (``[phi2]`` for embedding)
``[problem]``     f, g, V as expressions or ``*_csv`` paths; p, lambda, equation, x0, probe
``[sweep]``       stride, ratio, r_min, r_max or an explicit radii list
``[solver]``      tol, max_iter, damping, eps, warm_start
``[inequality]``  name, cap and check-specific fields
``[battery]``     size, kinds

Expressions are numpy expressions in ``x, y, z`` (also ``x1, x2, x3``) and
``r = |x|``.  Only whitelisted names may appear.
"""

from __future__ import annotations

import ast
import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import Domain, GridFunction, RadiusLadder, UniformGrid, ball_sweep, read_csv
from .phi import PhiSpec, parse_phi

KINDS = ("norm", "inequality", "solve", "sucp", "suite")
REQUIRED = {
    "norm": ("domain", "phi", "problem"),
    "inequality": ("domain", "inequality"),
    "solve": ("domain", "problem"),
    "sucp": ("domain", "problem"),
    "suite": (),
}

_FUNCS = {name: getattr(np, name) for name in (
    "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "sinh", "cosh", "tanh", "arctan", "where",
    "maximum", "minimum", "sign", "heaviside", "floor", "ones_like", "zeros_like")}
_FUNCS.update(pi=math.pi, e=math.e)
_VARS = ("x", "y", "z", "x1", "x2", "x3", "r")


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    output: Path
    sections: dict[str, dict[str, str]]
    path: Path | None = None
    lines: dict[tuple[str, str], int] = field(default_factory=dict, repr=False)

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path is not None else Path.cwd()

    # helpers ---------------------------------------------------------------

    def where(self, section: str, key: str | None = None) -> str:
        src = str(self.path) if self.path else "<config>"
        # a missing field points at its section header
        line = self.lines.get((section, key or "")) or self.lines.get((section, ""))
        loc = f"{src}:{line}" if line else src
        return f"{loc}: [{section}]" + (f" {key}" if key else "")

    def has(self, section: str, key: str | None = None) -> bool:
        if section not in self.sections:
            return False
        return key is None or key in self.sections[section]

    def section(self, name: str) -> dict[str, str]:
        if name not in self.sections:
            raise ConfigError(f"{self.where(name)}: missing section required for kind={self.kind}")
        return self.sections[name]

    def raw(self, section: str, key: str, default=None) -> str:
        block = self.sections.get(section, {})
        if key in block:
            return block[key]
        if default is None:
            raise ConfigError(f"{self.where(section, key)}: missing required field")
        return default

    def number(self, section: str, key: str, default: float | None = None) -> float:
        if not self.has(section, key):
            if default is None:
                raise ConfigError(f"{self.where(section, key)}: missing required field")
            return float(default)
        try:
            return float(self.sections[section][key])
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: not a number: {self.sections[section][key]!r}") from None

    def integer(self, section: str, key: str, default: int | None = None) -> int:
        v = self.number(section, key, default)
        if v != int(v):
            raise ConfigError(f"{self.where(section, key)}: expected an integer, got {v:g}")
        return int(v)

    def numbers(self, section: str, key: str, default=None) -> list[float]:
        if not self.has(section, key):
            if default is None:
                raise ConfigError(f"{self.where(section, key)}: missing required field")
            return list(default)
        text = self.sections[section][key].replace(",", " ").split()
        try:
            return [float(t) for t in text]
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: expected a list of numbers") from None

    def flag(self, section: str, key: str, default: bool) -> bool:
        if not self.has(section, key):
            return default
        v = self.sections[section][key].strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{self.where(section, key)}: expected a boolean, got {v!r}")

    # builders ----------------------------------------------------------------

    def grid(self) -> UniformGrid:
        self.section("domain")
        shape = self.raw("domain", "shape", "box").strip().lower()
        try:
            if shape == "box":
                d = self.integer("domain", "dimension", 0) or None
                dom = Domain.box(self.numbers("domain", "lower"), self.numbers("domain", "upper"), d)
            elif shape == "ball":
                dom = Domain.ball(self.numbers("domain", "center"), self.number("domain", "radius"))
            else:
                raise ConfigError(f"{self.where('domain', 'shape')}: unknown shape {shape!r}")
            if self.has("domain", "h"):
                return UniformGrid.with_spacing(dom, self.number("domain", "h"))
            return UniformGrid(dom, self.integer("domain", "nodes"))
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{self.where('domain')}: {exc}") from exc

    def phi(self, name: str = "phi") -> PhiSpec:
        block = self.section(name)
        try:
            return parse_phi(block, self.base_dir)
        except ConfigError as exc:
            raise ConfigError(f"{self.where(name)}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"{self.where(name)}: {exc}") from exc

    def function(self, grid: UniformGrid, key: str, section: str = "problem",
                 default: str | None = None) -> GridFunction:
        """``key = expression`` or ``key_csv = path`` from a section (keys are case-insensitive)."""
        key = key.lower()
        if self.has(section, key + "_csv"):
            path = Path(self.sections[section][key + "_csv"])
            if not path.is_absolute():
                path = self.base_dir / path
            if not path.exists():
                raise ConfigError(f"{self.where(section, key + '_csv')}: file {str(path)!r} does not exist")
            try:
                return read_csv(path, grid)
            except ValueError as exc:
                raise ConfigError(f"{self.where(section, key + '_csv')}: {exc}") from exc
        expr = self.raw(section, key, default)
        return evaluate(expr, grid, self.where(section, key))

    def sweep(self, grid: UniformGrid):
        stride = self.integer("sweep", "stride", 1)
        if stride < 1:
            raise ConfigError(f"{self.where('sweep', 'stride')}: must be >= 1")
        return ball_sweep(grid, stride, self.ladder(grid))

    def ladder(self, grid: UniformGrid) -> RadiusLadder:
        try:
            if self.has("sweep", "radii"):
                return RadiusLadder.explicit(self.numbers("sweep", "radii"))
            r_min = self.number("sweep", "r_min", grid.h)
            r_max = self.number("sweep", "r_max", grid.domain.diameter)
            return RadiusLadder.geometric(r_min, r_max, self.number("sweep", "ratio", 2.0))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{self.where('sweep')}: {exc}") from exc

    def solver_options(self) -> dict:
        opts = {}
        for key, conv in (("tol", self.number), ("max_iter", self.integer), ("damping", self.number)):
            if self.has("solver", key):
                opts[key] = conv("solver", key)
        if self.has("solver", "warm_start"):
            opts["warm_start"] = self.flag("solver", "warm_start", True)
        return opts

    def echo(self) -> dict:
        return {name: dict(block) for name, block in self.sections.items()}


def evaluate(expr: str, grid: UniformGrid, where: str = "<expression>") -> GridFunction:
    """Evaluate a whitelisted numpy expression at every lattice node."""
    try:
        code = compile(expr.strip(), where, "eval")
    except SyntaxError as exc:
        raise ConfigError(f"{where}: cannot parse expression {expr!r}: {exc.msg}") from None
    unknown = sorted(set(code.co_names) - set(_FUNCS) - set(_VARS))
    if unknown:
        raise ConfigError(f"{where}: unknown names {unknown} in {expr!r}")
    coords = grid.coords
    env = dict(_FUNCS)
    for k in range(3):
        c = coords[k] if k < grid.dimension else np.zeros(grid.shape)
        env["xyz"[k]] = c
        env[f"x{k + 1}"] = c
    env["r"] = np.sqrt(sum(c * c for c in coords))
    try:
        with np.errstate(all="ignore"):
            vals = eval(code, {"__builtins__": {}}, env)  # noqa: S307 - names whitelisted above
        vals = np.broadcast_to(np.asarray(vals, dtype=float), grid.shape).copy()
    except Exception as exc:  # noqa: BLE001 - any evaluation failure is a config error
        raise ConfigError(f"{where}: cannot evaluate {expr!r}: {exc}") from None
    vals[~grid.mask] = 0.0
    if not np.all(np.isfinite(vals)):
        raise ConfigError(f"{where}: {expr!r} is not finite on the grid")
    return GridFunction(grid, vals)


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    out: dict[tuple[str, str], int] = {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            out.setdefault((section, ""), i)
        elif section and "=" in s and not s.startswith(("#", ";")):
            out.setdefault((section, s.split("=", 1)[0].strip().lower()), i)
    return out


def _unrepr(text: str) -> str:
    try:
        return str(ast.literal_eval(text)).strip()
    except (ValueError, SyntaxError):
        return text.strip()


def parse_config_text(text: str, path: Path | None = None) -> ExperimentConfig:
    src = str(path) if path else "<config>"
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(text, source=src)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{src}:{exc.lineno}: key=value line before any [section] header") from None
    except configparser.ParsingError as exc:
        lines = ", ".join(f"line {n}: {_unrepr(line)!r}" for n, line in exc.errors)
        raise ConfigError(f"{src}: malformed lines ({lines}); expected key = value") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{src}:{exc.lineno}: duplicate section [{exc.section}]") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{src}:{exc.lineno}: duplicate field {exc.option!r} in [{exc.section}]") from None
    sections = {name: dict(parser[name]) for name in parser.sections()}
    cfg = ExperimentConfig("", 0, Path("."), sections, path, _line_numbers(text))
    kind = cfg.raw("experiment", "kind").strip().lower()
    if kind not in KINDS:
        raise ConfigError(f"{cfg.where('experiment', 'kind')}: unknown kind {kind!r}; expected one of {KINDS}")
    cfg.kind = kind
    cfg.seed = cfg.integer("experiment", "seed", 0)
    out = Path(cfg.raw("experiment", "output", "morrey_out"))
    cfg.output = out if out.is_absolute() else cfg.base_dir / out
    for name in REQUIRED[kind]:
        cfg.section(name)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such config file")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 ({exc.reason} at byte {exc.start})") from None
    return parse_config_text(text, path)
