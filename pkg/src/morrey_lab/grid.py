"""Uniform grids, balls, the reference measure and ball quadrature.

Every grid is vertex centred: nodes sit on the closed domain, boundary
included, and each node owns the dual cell of side ``h`` around it.  A
node's quadrature weight is the volume of that dual cell clipped to the
domain (half cells on box faces, quarter cells on box corners, and so on),
so integrating over the whole domain is the tensor trapezoidal rule.

Ball integrals use the cell-centre test: a node contributes its full weight
when it lies strictly inside the ball, half its weight when it lies on the
sphere (to spacing tolerance), and nothing otherwise.  The half weight on
the sphere turns the 1D rule into the trapezoidal rule on node-aligned
balls.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import InvalidInputError, OutOfRangeError

# relative to the smallest grid spacing
SPHERE_TOL = 1e-9

_DIRECT_CONV_LIMIT = 4_000_000


def unit_ball_volume(d: int) -> float:
    """Lebesgue measure of the unit ball in R^d."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _as_point(x, d: int | None = None) -> tuple[float, ...]:
    pt = tuple(float(v) for v in np.atleast_1d(np.asarray(x, dtype=float)))
    if d is not None and len(pt) != d:
        raise InvalidInputError(f"expected a point in R^{d}, got {pt}")
    return pt


@dataclass(frozen=True)
class Domain:
    """Bounded domain: an axis-aligned box or a ball."""

    dimension: int
    shape: str
    lower: tuple[float, ...] = ()
    upper: tuple[float, ...] = ()
    center: tuple[float, ...] = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.dimension < 1 or self.dimension > 3:
            raise InvalidInputError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.shape == "box":
            if len(self.lower) != self.dimension or len(self.upper) != self.dimension:
                raise InvalidInputError("box extents must match the dimension")
            if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
                raise InvalidInputError(f"box extents must be positive: {self.lower} {self.upper}")
        elif self.shape == "ball":
            if len(self.center) != self.dimension:
                raise InvalidInputError("ball center must match the dimension")
            if not self.radius > 0:
                raise InvalidInputError(f"ball radius must be positive, got {self.radius}")
        else:
            raise InvalidInputError(f"unknown domain shape {self.shape!r}")

    @classmethod
    def box(cls, lower, upper, dimension: int | None = None) -> Domain:
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        d = dimension or max(lo.size, hi.size)
        lo = np.broadcast_to(lo, (d,))
        hi = np.broadcast_to(hi, (d,))
        return cls(d, "box", tuple(map(float, lo)), tuple(map(float, hi)))

    @classmethod
    def interval(cls, a: float, b: float) -> Domain:
        return cls.box([a], [b])

    @classmethod
    def ball(cls, center, radius: float) -> Domain:
        c = _as_point(center)
        return cls(len(c), "ball", center=c, radius=float(radius))

    @property
    def bounds(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        """Lower and upper corners of the bounding box."""
        if self.shape == "box":
            return self.lower, self.upper
        return (tuple(c - self.radius for c in self.center),
                tuple(c + self.radius for c in self.center))

    @property
    def diameter(self) -> float:
        if self.shape == "box":
            return math.sqrt(sum((hi - lo) ** 2 for lo, hi in zip(self.lower, self.upper)))
        return 2.0 * self.radius

    def distance_to_boundary(self, x) -> float:
        """Distance from an interior point to the boundary (negative outside)."""
        x = np.asarray(_as_point(x, self.dimension))
        if self.shape == "box":
            lo, hi = np.asarray(self.lower), np.asarray(self.upper)
            return float(np.min(np.minimum(x - lo, hi - x)))
        return float(self.radius - np.linalg.norm(x - np.asarray(self.center)))

    def describe(self) -> dict:
        if self.shape == "box":
            return {"shape": "box", "lower": list(self.lower), "upper": list(self.upper)}
        return {"shape": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class MeasureSpec:
    """Reference measure with growth bound mu(B(a, r)) <= C r^n.

    Only Lebesgue measure is implemented, for which n = d and C = v_d.
    """

    kind: str
    n: float
    growth_constant: float

    def __post_init__(self):
        if self.kind != "lebesgue":
            raise InvalidInputError(f"unsupported measure kind {self.kind!r}")
        if not self.n > 0:
            raise InvalidInputError("growth order n must be positive")
        if not self.growth_constant > 0:
            raise InvalidInputError("growth constant must be positive")

    @classmethod
    def lebesgue(cls, d: int) -> MeasureSpec:
        return cls("lebesgue", float(d), unit_ball_volume(d))


@dataclass(frozen=True, slots=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidInputError(f"ball radius must be positive, got {self.radius}")

    @classmethod
    def at(cls, center, radius: float) -> Ball:
        return cls(_as_point(center), float(radius))

    @property
    def dimension(self) -> int:
        return len(self.center)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "radius": self.radius}


def ball_measure(ball: Ball, measure: MeasureSpec | None = None) -> float:
    """mu(B(a, r)), in closed form."""
    measure = measure or MeasureSpec.lebesgue(ball.dimension)
    if measure.n != ball.dimension:
        raise InvalidInputError("Lebesgue measure requires n = d")
    return unit_ball_volume(ball.dimension) * ball.radius ** ball.dimension


class UniformGrid:
    """Vertex-centred uniform grid over a :class:`Domain`.

    Ball domains are embedded in their bounding box; lattice nodes outside
    the closed ball carry zero weight and are not counted as nodes.
    """

    def __init__(self, domain: Domain, nodes_per_axis: int, measure: MeasureSpec | None = None):
        if int(nodes_per_axis) != nodes_per_axis or nodes_per_axis < 2:
            raise InvalidInputError(f"nodes_per_axis must be an integer >= 2, got {nodes_per_axis}")
        self.domain = domain
        self.nodes_per_axis = int(nodes_per_axis)
        self.measure = measure or MeasureSpec.lebesgue(domain.dimension)
        lo, hi = domain.bounds
        self.axes = tuple(np.linspace(a, b, self.nodes_per_axis) for a, b in zip(lo, hi))
        self.spacing = tuple((b - a) / (self.nodes_per_axis - 1) for a, b in zip(lo, hi))

    @classmethod
    def with_spacing(cls, domain: Domain, h: float, measure: MeasureSpec | None = None) -> UniformGrid:
        """Grid whose spacing along the first axis is ``h``."""
        lo, hi = domain.bounds
        n = (hi[0] - lo[0]) / h
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise InvalidInputError(f"spacing {h} does not divide the domain extent")
        return cls(domain, int(round(n)) + 1, measure)

    def __repr__(self):
        return f"UniformGrid({self.domain.describe()}, nodes_per_axis={self.nodes_per_axis})"

    def __eq__(self, other):
        if not isinstance(other, UniformGrid):
            return NotImplemented
        return (self.domain == other.domain and self.nodes_per_axis == other.nodes_per_axis
                and self.measure == other.measure)

    def __hash__(self):
        return hash((self.domain, self.nodes_per_axis, self.measure))

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.dimension

    @property
    def h(self) -> float:
        """The common spacing; raises on anisotropic grids."""
        h0 = self.spacing[0]
        if any(abs(s - h0) > 1e-12 * h0 for s in self.spacing):
            raise InvalidInputError("grid spacing is not isotropic")
        return h0

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``grid.shape + (d,)``."""
        return np.stack(self.coords, axis=-1)

    def distance_from(self, center) -> np.ndarray:
        c = _as_point(center, self.dimension)
        return np.sqrt(sum((x - ci) ** 2 for x, ci in zip(self.coords, c)))

    @property
    def sphere_tol(self) -> float:
        return SPHERE_TOL * min(self.spacing)

    @cached_property
    def mask(self) -> np.ndarray:
        """Lattice nodes in the closed domain."""
        if self.domain.shape == "box":
            return np.ones(self.shape, dtype=bool)
        return self.distance_from(self.domain.center) <= self.domain.radius + self.sphere_tol

    @cached_property
    def interior_mask(self) -> np.ndarray:
        """Nodes in the open domain, i.e. the unknowns of Dirichlet problems."""
        if self.domain.shape == "box":
            m = np.zeros(self.shape, dtype=bool)
            m[(slice(1, -1),) * self.dimension] = True
            return m
        return self.distance_from(self.domain.center) < self.domain.radius - self.sphere_tol

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.mask & ~self.interior_mask

    @cached_property
    def weights(self) -> np.ndarray:
        """Dual-cell volumes clipped to the domain."""
        if self.domain.shape == "box":
            w = np.ones(self.shape)
            for k in range(self.dimension):
                edge = [slice(None)] * self.dimension
                for end in (0, -1):
                    edge[k] = end
                    w[tuple(edge)] *= 0.5
            return w * self.cell_volume
        dist = self.distance_from(self.domain.center)
        return _sphere_weights(dist, self.domain.radius, self.sphere_tol) * self.cell_volume

    @property
    def node_count(self) -> int:
        return int(self.mask.sum())

    def node_index(self, point) -> tuple[int, ...] | None:
        """Lattice index of ``point`` if it coincides with a node."""
        pt = _as_point(point, self.dimension)
        idx = []
        for x, ax, hk in zip(pt, self.axes, self.spacing):
            t = (x - ax[0]) / hk
            i = int(round(t))
            if abs(t - i) > 1e-9 or i < 0 or i >= ax.size:
                return None
            idx.append(i)
        return tuple(idx)

    def nearest_index(self, point) -> tuple[int, ...]:
        pt = _as_point(point, self.dimension)
        return tuple(int(np.clip(round((x - ax[0]) / hk), 0, ax.size - 1))
                     for x, ax, hk in zip(pt, self.axes, self.spacing))

    def node(self, index) -> tuple[float, ...]:
        return tuple(float(ax[i]) for ax, i in zip(self.axes, index))

    def refined(self) -> UniformGrid:
        """The grid with half the spacing on the same domain."""
        return UniformGrid(self.domain, 2 * self.nodes_per_axis - 1, self.measure)

    def describe(self) -> dict:
        return {"domain": self.domain.describe(), "nodes_per_axis": self.nodes_per_axis,
                "spacing": list(self.spacing)}


def _sphere_weights(dist: np.ndarray, radius: float, tol: float) -> np.ndarray:
    inside = dist < radius - tol
    on = np.abs(dist - radius) <= tol
    return inside.astype(float) + 0.5 * on


@dataclass(eq=False)
class GridFunction:
    """Real values sampled at the nodes of a grid."""

    grid: UniformGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise InvalidInputError(
                f"values shape {self.values.shape} does not match grid shape {self.grid.shape}")
        if np.isnan(self.values).any():
            raise InvalidInputError("grid function contains NaN")
        if not np.isfinite(self.values).all():
            raise InvalidInputError("grid function contains non-finite values")

    @classmethod
    def sample(cls, grid: UniformGrid, func: Callable[..., np.ndarray]) -> GridFunction:
        """Evaluate ``func(x1, ..., xd)`` on the lattice (outside-domain nodes zeroed)."""
        vals = np.broadcast_to(np.asarray(func(*grid.coords), dtype=float), grid.shape).copy()
        vals[~grid.mask] = 0.0
        return cls(grid, vals)

    @classmethod
    def constant(cls, grid: UniformGrid, c: float) -> GridFunction:
        return cls.sample(grid, lambda *x: np.full(grid.shape, float(c)))

    @classmethod
    def zeros(cls, grid: UniformGrid) -> GridFunction:
        return cls(grid, np.zeros(grid.shape))

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise InvalidInputError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values[self.grid.mask]), initial=0.0))

    def at(self, point) -> float:
        idx = self.grid.node_index(point)
        if idx is None:
            raise InvalidInputError(f"{point} is not a grid node")
        return float(self.values[idx])

    def integral(self, p: float | None = None) -> float:
        """Integral of ``f`` over the domain, or of ``|f|^p`` when ``p`` is given."""
        vals = self.values if p is None else np.abs(self.values) ** p
        return float(np.sum(vals * self.grid.weights))


def ball_weights(grid: UniformGrid, ball: Ball) -> np.ndarray:
    """Per-node cell-centre membership in ``ball`` (1, 1/2 on the sphere, 0)."""
    if ball.dimension != grid.dimension:
        raise InvalidInputError("ball and grid dimensions differ")
    return _sphere_weights(grid.distance_from(ball.center), ball.radius, grid.sphere_tol)


def integrate_ball(f: GridFunction, ball: Ball, p: float = 1.0) -> float:
    """Midpoint-rule approximation of the integral of ``|f|^p`` over ``ball`` intersected with the domain."""
    if not p >= 1:
        raise InvalidInputError(f"exponent must be >= 1, got {p}")
    s = ball_weights(f.grid, ball)
    return float(np.sum(s * f.grid.weights * np.abs(f.values) ** p))


def ball_stencil(grid: UniformGrid, radius: float) -> np.ndarray:
    """Membership weights of B(0, radius) on lattice offsets, cropped to the grid."""
    half = [min(int(math.floor(radius / hk + 1e-9)), n - 1)
            for hk, n in zip(grid.spacing, grid.shape)]
    offs = np.meshgrid(*[np.arange(-m, m + 1) * hk for m, hk in zip(half, grid.spacing)],
                       indexing="ij")
    dist = np.sqrt(sum(o * o for o in offs))
    return _sphere_weights(dist, radius, grid.sphere_tol)


def convolve_same(density: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Centred convolution with an odd-sized kernel; method chosen by size only."""
    work = density.size * kernel.size
    method = "direct" if work <= _DIRECT_CONV_LIMIT else "fft"
    return signal.convolve(density, kernel, mode="same", method=method)


def ball_integral_map(grid: UniformGrid, density: np.ndarray, radius: float) -> np.ndarray:
    """Sum of the already weighted nonnegative ``density`` over B(x, radius) for every node x."""
    out = convolve_same(density, ball_stencil(grid, radius))
    return np.maximum(out, 0.0)


@dataclass(frozen=True)
class RadiusLadder:
    """Ascending finite set of radii."""

    radii: tuple[float, ...]

    def __post_init__(self):
        if not self.radii:
            raise InvalidInputError("radius ladder is empty")
        r = np.asarray(self.radii)
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise InvalidInputError("ladder radii must be positive and finite")
        if np.any(np.diff(r) <= 0):
            raise InvalidInputError("ladder radii must be strictly increasing")

    @classmethod
    def geometric(cls, r_min: float, r_max: float, ratio: float = 2.0) -> RadiusLadder:
        """r_min * ratio**k for every k with the value not exceeding r_max."""
        if not r_min > 0:
            raise InvalidInputError("r_min must be positive")
        if r_min >= r_max:
            raise InvalidInputError(f"r_min ({r_min}) must be smaller than r_max ({r_max})")
        if not ratio > 1:
            raise InvalidInputError("ladder ratio must exceed 1")
        count = int(math.floor(math.log(r_max / r_min) / math.log(ratio) + 1e-9)) + 1
        return cls(tuple(r_min * ratio ** k for k in range(count)))

    @classmethod
    def arithmetic(cls, step: float, r_max: float) -> RadiusLadder:
        if not step > 0 or step > r_max:
            raise InvalidInputError("need 0 < step <= r_max")
        count = int(math.floor(r_max / step + 1e-9))
        return cls(tuple(step * k for k in range(1, count + 1)))

    @classmethod
    def explicit(cls, radii: Iterable[float]) -> RadiusLadder:
        return cls(tuple(float(r) for r in radii))

    def __len__(self):
        return len(self.radii)

    def __iter__(self):
        return iter(self.radii)

    @property
    def r_min(self) -> float:
        return self.radii[0]

    @property
    def r_max(self) -> float:
        return self.radii[-1]


def ball_sweep(grid: UniformGrid, center_stride: int, radius_ladder: RadiusLadder | Sequence[float]) -> list[Ball]:
    """Balls centred on every ``center_stride``-th node, crossed with the ladder radii.

    Centres run in lexicographic lattice order, radii ascend within each centre.
    """
    if int(center_stride) != center_stride or center_stride < 1:
        raise InvalidInputError("center_stride must be a positive integer")
    ladder = radius_ladder if isinstance(radius_ladder, RadiusLadder) else RadiusLadder.explicit(radius_ladder)
    if ladder.r_max > grid.domain.diameter * (1 + 1e-12):
        raise InvalidInputError(
            f"ladder r_max {ladder.r_max} exceeds the domain diameter {grid.domain.diameter}")
    sel = np.zeros(grid.shape, dtype=bool)
    sel[(slice(None, None, int(center_stride)),) * grid.dimension] = True
    sel &= grid.mask
    centers = [tuple(float(v) for v in pt) for pt in grid.points[sel]]
    return [Ball(c, r) for c in centers for r in ladder.radii]


def gradient(f: GridFunction) -> list[GridFunction]:
    """Second-order finite-difference gradient, one component per axis."""
    if min(f.grid.shape) < 3:
        raise InvalidInputError("gradient needs at least 3 nodes per axis")
    parts = np.gradient(f.values, *f.grid.spacing, edge_order=2)
    if f.grid.dimension == 1:
        parts = [parts]
    return [GridFunction(f.grid, g) for g in parts]


def gradient_norm(f: GridFunction) -> GridFunction:
    comps = gradient(f)
    return GridFunction(f.grid, np.sqrt(sum(c.values ** 2 for c in comps)))


def write_csv(f: GridFunction, path: str | Path, extra: dict[str, np.ndarray] | None = None) -> None:
    """One row per domain node: ``x1..xd,value`` (plus extra columns) at 17 significant digits."""
    d = f.grid.dimension
    header = [f"x{k + 1}" for k in range(d)] + ["value"]
    cols = [f.values]
    for name, arr in (extra or {}).items():
        header.append(name)
        cols.append(np.asarray(arr, dtype=float))
    sel = f.grid.mask
    pts = f.grid.points[sel]
    data = [c[sel] for c in cols]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(pts.shape[0]):
            w.writerow([f"{v:.17g}" for v in pts[i]] + [f"{c[i]:.17g}" for c in data])


def read_csv(path: str | Path, grid: UniformGrid | None = None) -> GridFunction:
    """Inverse of :func:`write_csv`; infers a box grid when none is given."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInputError(f"{path}: empty CSV")
    header = rows[0]
    d = sum(1 for h in header if h.startswith("x") and h[1:].isdigit())
    if d == 0 or "value" not in header:
        raise InvalidInputError(f"{path}: header must be x1..xd,value")
    vi = header.index("value")
    try:
        data = np.array([[float(v) for v in r[:d]] + [float(r[vi])] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from exc
    if grid is None:
        uniq = [np.unique(data[:, k]) for k in range(d)]
        n = uniq[0].size
        if any(u.size != n for u in uniq) or data.shape[0] != n ** d:
            raise InvalidInputError(f"{path}: nodes do not form a full tensor lattice")
        grid = UniformGrid(Domain.box([u[0] for u in uniq], [u[-1] for u in uniq]), n)
    vals = np.zeros(grid.shape)
    for row in data:
        idx = grid.node_index(row[:d])
        if idx is None:
            raise OutOfRangeError(f"{path}: point {row[:d]} is not a node of {grid}")
        vals[idx] = row[d]
    return GridFunction(grid, vals)
