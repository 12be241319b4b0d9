import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morrey_lab.errors import InvalidInputError
from morrey_lab.grid import Domain, GridFunction, UniformGrid
from morrey_lab.pde.plaplace import (PLaplaceEnergy, PLaplaceProblem, energy_nonincreasing, linear_solution,
                                     plaplace_residual, solve_plaplace)

GRID2 = UniformGrid(Domain.box([-1.0, -1.0], [1.0, 1.0]), 9)


def _problem(p, grid=GRID2, V=None, g=None, eps=None):
    V = GridFunction.sample(grid, lambda *x: 1 + x[0] ** 2) if V is None else V
    g = GridFunction.sample(grid, lambda *x: np.cos(x[0]) + 0.5 * x[-1]) if g is None else g
    return PLaplaceProblem(p, V, g, eps)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_affine_exactness(p):
    g = GridFunction.sample(GRID2, lambda x, y: 1 + 2 * x - y)
    sol = solve_plaplace(PLaplaceProblem(p, GridFunction.zeros(GRID2), g), warm_start=False)
    assert sol.converged
    np.testing.assert_allclose(sol.u.values, g.values, atol=1e-8)


def test_p2_matches_linear_solve():
    pr = _problem(2.0, eps=0.0)
    sol = solve_plaplace(pr, warm_start=False)
    ref = linear_solution(GRID2, pr.V.values, pr.g.values)
    np.testing.assert_allclose(sol.u.values, ref, atol=1e-8)


def test_1d_cosh_solution():
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 257)
    one = GridFunction.constant(grid, 1.0)
    sol = solve_plaplace(PLaplaceProblem(2.0, one, one))
    x = grid.axes[0]
    np.testing.assert_allclose(sol.u.values, np.cosh(x) / np.cosh(1.0), atol=1e-5)


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_energy_descends_and_residual_small(p):
    sol = solve_plaplace(_problem(p), tol=1e-9)
    assert sol.converged
    for stage in sol.info["stages"]:
        assert energy_nonincreasing(stage["energy_history"])
    assert plaplace_residual(_problem(p), sol.u.values.ravel()) <= 1e-9
    assert sol.info["eps"] == pytest.approx(1e-6 * _problem(p).scale)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([1.5, 2.0, 3.0, 4.0]), st.integers(0, 10_000))
def test_gradient_matches_finite_differences(p, seed):
    energy = PLaplaceEnergy(_problem(p))
    r = np.random.default_rng(seed)
    u = r.normal(size=GRID2.node_count)
    v = r.normal(size=u.size)
    t = 1e-5
    fd = (energy.value(u + t * v) - energy.value(u - t * v)) / (2 * t)
    assert fd == pytest.approx(energy.gradient(u) @ v, rel=1e-6)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_hessian_matches_gradient_differences(p, rng):
    energy = PLaplaceEnergy(_problem(p))
    u = rng.normal(size=GRID2.node_count)
    v = rng.normal(size=u.size)
    t = 1e-6
    fd = (energy.gradient(u + t * v) - energy.gradient(u - t * v)) / (2 * t)
    hv = energy.hessian(u) @ v
    assert np.max(np.abs(fd - hv)) <= 1e-5 * np.max(np.abs(hv))


def test_problem_validation():
    with pytest.raises(InvalidInputError):
        _problem(1.0)
    disk = UniformGrid(Domain.ball((0.0, 0.0), 1.0), 9)
    with pytest.raises(InvalidInputError):
        PLaplaceProblem(2.0, GridFunction.zeros(disk), GridFunction.zeros(disk))
    with pytest.raises(InvalidInputError):
        solve_plaplace(_problem(2.0), damping=1.0)


def test_zero_data_gives_zero_solution():
    z = GridFunction.zeros(GRID2)
    sol = solve_plaplace(PLaplaceProblem(3.0, GridFunction.constant(GRID2, 1.0), z))
    assert sol.converged and sol.u.max_abs() == 0.0
