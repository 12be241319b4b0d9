"""Regularised p-Laplace equation with a potential, by damped Newton on the discrete energy.

The discrete energy on a box grid is

    J_eps(u) = sum_cells h^d (s_c + eps^2)^(p/2) / p + sum_nodes w_i V_i |u_i|^p / p,

with s_c the per-axis average of squared edge difference quotients inside
cell c.  For p = 2 its gradient is w_i (-Laplace_h u + V u)_i with the
standard (2d+1)-point Laplacian.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from ..errors import InvalidInputError, MorreyLabError
from ..grid import GridFunction, UniformGrid
from .poisson import SolverSolution, solve_dirichlet


@dataclass
class PLaplaceProblem:
    """-div(|grad u|^(p-2) grad u) + V |u|^(p-2) u = 0 with u = g on the boundary."""

    p: float
    V: GridFunction
    g: GridFunction
    eps: float | None = None

    def __post_init__(self):
        if not self.p > 1:
            raise InvalidInputError(f"need p > 1, got {self.p}")
        if self.V.grid != self.g.grid:
            raise InvalidInputError("V and g live on different grids")
        if self.grid.domain.shape != "box":
            raise InvalidInputError("the p-Laplace solver supports box domains")
        if self.grid.nodes_per_axis < 3:
            raise InvalidInputError("solver needs at least 3 nodes per axis")
        if self.eps is not None and self.eps < 0:
            raise InvalidInputError("eps must be >= 0")

    @property
    def grid(self) -> UniformGrid:
        return self.V.grid

    @property
    def scale(self) -> float:
        """max |g| on the boundary, or 1 for zero data."""
        scale = float(np.max(np.abs(self.g.values[self.grid.boundary_mask]), initial=0.0))
        return scale if scale > 0 else 1.0

    @property
    def epsilon(self) -> float:
        return self.eps if self.eps is not None else 1e-6 * self.scale


class _Cells:
    """Corner bookkeeping for the (N-1)^d lattice cells."""

    def __init__(self, grid: UniformGrid):
        self.d = d = grid.dimension
        self.h = grid.h
        self.N = n = grid.nodes_per_axis
        self.corners = list(itertools.product((0, 1), repeat=d))
        base = np.array(np.meshgrid(*[np.arange(n - 1)] * d, indexing="ij")).reshape(d, -1)
        # flat node index of every corner of every cell, shape (2^d, ncells)
        self.nodes = np.stack([np.ravel_multi_index(tuple(base[k] + v[k] for k in range(d)), grid.shape)
                               for v in self.corners])
        # edges inside a cell: pairs of corners differing in one bit
        self.edges = [(a, b, k) for a, va in enumerate(self.corners) for b, vb in enumerate(self.corners)
                      for k in range(d) if va[k] == 0 and vb[k] == 1
                      and all(va[j] == vb[j] for j in range(d) if j != k)]
        m = 2 ** d
        q = np.zeros((m, m))
        c = 2.0 ** (2 - d) / self.h ** 2
        for a, b, _ in self.edges:
            q[a, a] += c
            q[b, b] += c
            q[a, b] -= c
            q[b, a] -= c
        # Hessian of s_c in the corner values
        self.Q = q

    def local(self, u: np.ndarray):
        """s_c and its gradient G (2^d, ncells) with respect to the corner values."""
        uc = u.ravel()[self.nodes]
        s = np.zeros(uc.shape[1])
        G = np.zeros_like(uc)
        w = 2.0 ** (1 - self.d)
        for a, b, _ in self.edges:
            diff = (uc[b] - uc[a]) / self.h
            s += w * diff * diff
            G[b] += 2 * w * diff / self.h
            G[a] -= 2 * w * diff / self.h
        return s, G


class PLaplaceEnergy:
    """J_eps, its gradient and its Hessian for one problem."""

    def __init__(self, problem: PLaplaceProblem, eps: float | None = None):
        self.problem = problem
        self.grid = problem.grid
        self.p = problem.p
        self.eps = problem.epsilon if eps is None else eps
        self.cells = _Cells(self.grid)
        self.w = self.grid.weights.ravel()
        self.V = problem.V.values.ravel()
        self.vol = self.grid.h ** self.grid.dimension
        self.hess_floor = (1e-12 * problem.scale) ** 2

    def value(self, u: np.ndarray) -> float:
        s, _ = self.cells.local(u)
        p, e2 = self.p, self.eps ** 2
        uf = np.abs(u.ravel())
        return float(self.vol * np.sum((s + e2) ** (p / 2)) / p + np.sum(self.w * self.V * uf ** p) / p)

    def _a(self, s: np.ndarray) -> np.ndarray:
        """h^d (s + eps^2)^((p-2)/2), with its limit at s + eps^2 = 0 for p >= 2."""
        base = s + self.eps ** 2
        if self.p == 2:
            return np.full_like(s, self.vol)
        at_zero = 0.0 if self.p > 2 else np.inf
        with np.errstate(divide="ignore"):
            a = np.where(base > 0, np.maximum(base, 1e-300) ** ((self.p - 2) / 2), at_zero)
        return self.vol * a

    def gradient(self, u: np.ndarray) -> np.ndarray:
        s, G = self.cells.local(u)
        a = self._a(s)
        g = np.zeros(u.size)
        # a G -> 0 as s -> 0 for every p > 1
        contrib = np.where(np.isfinite(a), 0.5 * a, 0.0) * G
        np.add.at(g, self.cells.nodes.ravel(), contrib.ravel())
        uf = u.ravel()
        g += self.w * self.V * np.abs(uf) ** (self.p - 1) * np.sign(uf)
        return g

    def hessian(self, u: np.ndarray) -> sparse.csr_matrix:
        s, G = self.cells.local(u)
        p = self.p
        # floor keeps the matrix finite when eps = 0 and a cell is flat
        base = np.maximum(s + self.eps ** 2, self.hess_floor)
        a = self.vol * base ** ((p - 2) / 2)
        bcoef = self.vol * (p - 2) / 4 * base ** ((p - 4) / 2)
        m = G.shape[0]
        blocks = 0.5 * a[None, None, :] * self.cells.Q[:, :, None] + bcoef[None, None, :] * G[:, None, :] * G[None, :, :]
        rows = np.broadcast_to(self.cells.nodes[:, None, :], (m, m, G.shape[1])).ravel()
        cols = np.broadcast_to(self.cells.nodes[None, :, :], (m, m, G.shape[1])).ravel()
        n = u.size
        H = sparse.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
        uf = u.ravel()
        reg = np.maximum(uf * uf + self.eps ** 2, self.hess_floor) ** ((p - 2) / 2)
        H = H + sparse.diags(self.w * np.maximum(self.V, 0.0) * (p - 1) * reg)
        return H


def plaplace_residual(problem: PLaplaceProblem, u: np.ndarray) -> float:
    """Max over unknowns of |dJ_0/du_i| / w_i, the unregularised discrete residual."""
    free = problem.grid.interior_mask.ravel()
    g = PLaplaceEnergy(problem, eps=0.0).gradient(u)
    return float(np.max(np.abs(g[free] / problem.grid.weights.ravel()[free]), initial=0.0))


def linear_solution(grid: UniformGrid, V: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Direct solve of -Laplace_h u + V u = 0 with u = g on the boundary."""
    u, _ = solve_dirichlet(grid, V, None, g)
    return u


# relative energy change treated as roundoff rather than ascent
ENERGY_ROUNDOFF = 8 * np.finfo(float).eps


def energy_nonincreasing(history) -> bool:
    """True when no step raises the energy by more than roundoff."""
    h = np.asarray(history, dtype=float)
    return bool(np.all(np.diff(h) <= ENERGY_ROUNDOFF * np.abs(h[:-1])))


def _newton(energy: PLaplaceEnergy, u: np.ndarray, free: np.ndarray, tol: float, max_iter: int,
            damping: float, armijo: float):
    """Newton iterations on one J_eps until its own residual drops below ``tol``."""
    w = energy.grid.weights.ravel()[free]
    J = energy.value(u)
    history, steps = [J], []
    for it in range(max_iter):
        grad = energy.gradient(u)
        if np.max(np.abs(grad[free] / w), initial=0.0) <= tol:
            return u, history, steps, "converged"
        H = energy.hessian(u)[free][:, free]
        step = splinalg.spsolve(H.tocsc(), -grad[free])
        if not np.all(np.isfinite(step)) or step @ grad[free] >= 0:
            # Newton failed to give a descent direction: diagonally scaled gradient
            step = -grad[free] / np.maximum(H.diagonal(), 1e-300)
        slope = float(step @ grad[free])
        slack = ENERGY_ROUNDOFF * abs(J)
        t = 1.0
        while True:
            trial = u.copy()
            trial[free] += t * step
            Jt = energy.value(trial)
            if Jt <= J + armijo * t * slope + slack:
                break
            t *= damping
            if t < 1e-14:
                return u, history, steps, "stagnated"
        u, J = trial, Jt
        history.append(J)
        steps.append(t)
    return u, history, steps, "max_iter"


def solve_plaplace(problem: PLaplaceProblem, tol: float = 1e-9, max_iter: int = 200,
                   damping: float = 0.5, u0: np.ndarray | None = None, warm_start: bool = True,
                   armijo: float = 1e-4) -> SolverSolution:
    """Damped Newton with backtracking on J_eps.

    Each step solves with the exact Hessian of J_eps (the V term uses
    max(V, 0) so the matrix stays positive semidefinite) and backtracks by
    the factor ``damping`` until the Armijo condition holds.  Convergence
    is judged by the unregularised residual :func:`plaplace_residual`; when
    the J_eps minimiser misses it, eps is cut by 100 and Newton resumes
    (down to eps = 0).  Energies are recorded per eps stage.
    """
    if not 0 < damping < 1:
        raise InvalidInputError("damping must lie in (0, 1)")
    grid = problem.grid
    free = grid.interior_mask.ravel()
    gvals = problem.g.values.ravel()
    if u0 is not None:
        u = np.asarray(u0, dtype=float).ravel().copy()
        u[~free] = gvals[~free]
    elif warm_start:
        try:
            u = linear_solution(grid, problem.V.values, problem.g.values).ravel()
        except (MorreyLabError, RuntimeError):
            u = linear_solution(grid, np.zeros(grid.shape), problem.g.values).ravel()
    else:
        u = np.where(free, 0.0, gvals)
    eps = problem.epsilon
    stages = []
    iters = 0
    status = "max_iter"
    res = plaplace_residual(problem, u)
    while True:
        energy = PLaplaceEnergy(problem, eps=eps)
        if res <= tol:
            status = "converged"
            stages.append({"eps": eps, "energy_history": [energy.value(u)], "step_lengths": []})
            break
        u, hist, steps, st = _newton(energy, u, free, tol, max_iter - iters, damping, armijo)
        iters += len(steps)
        stages.append({"eps": eps, "energy_history": hist, "step_lengths": steps, "status": st})
        res = plaplace_residual(problem, u)
        if res <= tol:
            status = "converged"
            break
        if st != "converged" or eps == 0.0:
            status = st if st != "converged" else "eps_floor"
            break
        eps = eps / 100.0 if eps > 1e-12 * problem.scale else 0.0
    u = u.reshape(grid.shape)
    info = {"p": problem.p, "eps": problem.epsilon, "final_eps": eps, "tol": tol, "status": status,
            "damping": damping, "stages": stages}
    return SolverSolution(GridFunction(grid, u), res, iters, stages[-1]["energy_history"][-1],
                          status == "converged", info)
