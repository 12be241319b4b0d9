"""Dirichlet problems for -Laplace(z) + V z = F and the fundamental-solution convolution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from ..errors import InvalidInputError, MorreyLabError, UnsupportedDimensionError
from ..grid import GridFunction, UniformGrid
from ..operators import cell_log_integral, cell_power_integral, kernel_convolution, _offset_distance


@dataclass
class PoissonProblem:
    """-Laplace(z) = V in the domain, z = 0 on its boundary."""

    V: GridFunction

    @property
    def grid(self) -> UniformGrid:
        return self.V.grid


@dataclass
class SolverSolution:
    u: GridFunction
    residual: float
    iterations: int
    energy: float
    converged: bool
    info: dict = field(default_factory=dict)

    def manifest(self) -> dict:
        return {"residual": self.residual, "iterations": self.iterations, "energy": self.energy,
                "converged": self.converged, **self.info}


def _check_grid(grid: UniformGrid) -> None:
    if grid.nodes_per_axis < 3:
        raise InvalidInputError("solver needs at least 3 nodes per axis")


def dirichlet_system(grid: UniformGrid, V: np.ndarray | None = None, g: np.ndarray | None = None):
    """Assemble -Laplace_h + V on the unknown nodes.

    Boxes use the (2d+1)-point stencil with boundary values ``g`` read at
    boundary nodes.  Balls use the Shortley-Weller stencil: an arm that
    leaves the open ball is cut at the sphere, where the value is zero.

    Returns ``(A, b, free)``: the matrix, the boundary contribution to the
    right-hand side and the flat lattice indices of the unknowns.
    """
    _check_grid(grid)
    d, shape, h = grid.dimension, grid.shape, grid.h
    free = np.flatnonzero(grid.interior_mask)
    pos = -np.ones(int(np.prod(shape)), dtype=np.int64)
    pos[free] = np.arange(free.size)
    gflat = np.zeros(pos.size) if g is None else np.asarray(g, dtype=float).ravel()
    ball = grid.domain.shape == "ball"
    if ball and np.any(gflat[grid.boundary_mask.ravel()] != 0):
        raise InvalidInputError("ball domains support zero boundary data only")
    strides = [int(np.prod(shape[k + 1:])) for k in range(d)]
    multi = np.array(np.unravel_index(free, shape))
    if ball:
        y = grid.points.reshape(-1, d)[free] - np.asarray(grid.domain.center)
        r2 = np.sum(y * y, axis=1)
        R = grid.domain.radius
    rows, cols, vals = [], [], []
    diag = np.zeros(free.size)
    b = np.zeros(free.size)
    for k in range(d):
        arms, nbs, ok = {}, {}, {}
        for sgn in (-1, 1):
            inside = (multi[k] + sgn >= 0) & (multi[k] + sgn < shape[k])
            nb = np.where(inside, free + sgn * strides[k], 0)
            ok[sgn] = inside & (pos[nb] >= 0)
            nbs[sgn] = nb
            if ball:
                # distance from the node to the sphere along sgn * e_k
                t = -sgn * y[:, k] + np.sqrt(np.maximum(R * R - (r2 - y[:, k] ** 2), 0.0))
                arms[sgn] = np.where(ok[sgn], h, np.minimum(t, h))
            else:
                arms[sgn] = np.full(free.size, h)
        for sgn in (-1, 1):
            coef = 2.0 / (arms[sgn] * (arms[sgn] + arms[-sgn]))
            diag += coef
            sel = ok[sgn]
            rows.append(np.flatnonzero(sel))
            cols.append(pos[nbs[sgn][sel]])
            vals.append(-coef[sel])
            if not ball:
                b[~sel] += coef[~sel] * gflat[nbs[sgn][~sel]]
    if V is not None:
        diag += np.asarray(V, dtype=float).ravel()[free]
    rows.append(np.arange(free.size))
    cols.append(np.arange(free.size))
    vals.append(diag)
    A = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(free.size, free.size))
    return A, b, free


def solve_dirichlet(grid: UniformGrid, V: np.ndarray | None, F: np.ndarray | None,
                    g: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Sparse LU solve of (-Laplace_h + V) u = F with Dirichlet data ``g``.

    Returns the lattice values (boundary nodes carry ``g``) and the max-norm
    of the algebraic residual.
    """
    A, b, free = dirichlet_system(grid, V, g)
    rhs = b + (np.zeros(free.size) if F is None else np.asarray(F, dtype=float).ravel()[free])
    sol = splinalg.spsolve(A.tocsc(), rhs)
    if not np.all(np.isfinite(sol)):
        raise MorreyLabError("singular Dirichlet system")
    res = float(np.max(np.abs(A @ sol - rhs), initial=0.0))
    out = np.zeros(int(np.prod(grid.shape))) if g is None else np.asarray(g, dtype=float).ravel().copy()
    out[free] = sol
    out[~grid.mask.ravel()] = 0.0
    return out.reshape(grid.shape), res


def solve_poisson(problem: PoissonProblem, tol: float = 1e-10) -> SolverSolution:
    """Second-order finite differences for -Laplace(z) = V, z = 0 on the boundary."""
    grid = problem.grid
    V = problem.V.values
    z, res = solve_dirichlet(grid, None, V)
    zf = GridFunction(grid, z)
    energy = 0.5 * float(np.sum(grid.weights * z * V))
    return SolverSolution(zf, res, 1, energy, bool(res <= tol),
                          {"method": "sparse LU", "stencil": "shortley-weller" if grid.domain.shape == "ball"
                           else "standard", "h": grid.h})


def discrete_laplacian(z: GridFunction) -> GridFunction:
    """Standard (2d+1)-point Laplacian at box-interior lattice nodes, zero elsewhere."""
    grid = z.grid
    _check_grid(grid)
    u = z.values
    out = np.zeros_like(u)
    core = (slice(1, -1),) * grid.dimension
    for k, hk in enumerate(grid.spacing):
        up = [slice(1, -1)] * grid.dimension
        dn = [slice(1, -1)] * grid.dimension
        up[k] = slice(2, None)
        dn[k] = slice(None, -2)
        out[core] += (u[tuple(up)] - 2 * u[core] + u[tuple(dn)]) / hk ** 2
    return GridFunction(grid, out)


def fundamental_kernel(grid: UniformGrid) -> np.ndarray:
    """Fundamental solution of -Laplace on all lattice offsets, self cell averaged."""
    d = grid.dimension
    if d not in (2, 3):
        raise UnsupportedDimensionError(f"no decaying fundamental solution used in d={d}")
    h = grid.h
    dist = _offset_distance(grid)
    center = (grid.nodes_per_axis - 1,) * d
    dist[center] = 1.0
    if d == 2:
        k = -np.log(dist) / (2 * math.pi)
        k[center] = -(cell_log_integral(2) + math.log(h)) / (2 * math.pi)
    else:
        k = 1.0 / (4 * math.pi * dist)
        k[center] = cell_power_integral(3, 1.0) / (4 * math.pi * h)
    return k


def fundamental_convolution(V: GridFunction) -> GridFunction:
    """z = Phi * V with Phi the fundamental solution (d = 2 or 3)."""
    return kernel_convolution(V, fundamental_kernel(V.grid))
