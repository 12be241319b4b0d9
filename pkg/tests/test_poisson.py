import math

import numpy as np
import pytest

from morrey_lab.battery import gaussian
from morrey_lab.errors import InvalidInputError, UnsupportedDimensionError
from morrey_lab.grid import Domain, GridFunction, UniformGrid
from morrey_lab.pde.poisson import (PoissonProblem, discrete_laplacian, fundamental_convolution,
                                    fundamental_kernel, solve_dirichlet, solve_poisson)


def test_1d_constant_source_is_exact():
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 33)
    sol = solve_poisson(PoissonProblem(GridFunction.constant(grid, 1.0)))
    # z = (1 - x^2)/2 is quadratic, so the 3-point stencil is exact
    np.testing.assert_allclose(sol.u.values, (1 - grid.axes[0] ** 2) / 2, atol=1e-12)
    assert sol.converged and sol.manifest()["method"] == "sparse LU"


def test_disk_center_value():
    grid = UniformGrid(Domain.ball((0.0, 0.0), 1.0), 129)
    z = solve_poisson(PoissonProblem(GridFunction.constant(grid, 1.0))).u.at((0.0, 0.0))
    assert z == pytest.approx(0.25, rel=0.02)


def test_3d_box_against_series():
    # -Laplace z = 1 on the unit cube: the centre value from the eigenfunction series is 0.0562...
    grid = UniformGrid(Domain.box([0.0] * 3, [1.0] * 3), 25)
    z = solve_poisson(PoissonProblem(GridFunction.constant(grid, 1.0))).u.at((0.5, 0.5, 0.5))
    total = 0.0
    for i in range(1, 60, 2):
        for j in range(1, 60, 2):
            for k in range(1, 60, 2):
                sign = (-1) ** ((i - 1) // 2 + (j - 1) // 2 + (k - 1) // 2)
                total += sign * 64 / (math.pi ** 3 * i * j * k) / (math.pi ** 2 * (i * i + j * j + k * k))
    assert z == pytest.approx(total, rel=5e-3)


def test_second_order_convergence():
    errs, hs = [], []
    for n in (17, 33, 65):
        grid = UniformGrid(Domain.interval(0.0, 1.0), n)
        V = GridFunction.sample(grid, lambda x: math.pi ** 2 * np.sin(math.pi * x))
        z = solve_poisson(PoissonProblem(V)).u.values
        errs.append(np.max(np.abs(z - np.sin(math.pi * grid.axes[0]))))
        hs.append(grid.h)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.9 <= slope <= 2.1


def test_boundary_data_on_box():
    grid = UniformGrid(Domain.box([0.0, 0.0], [1.0, 1.0]), 17)
    g = GridFunction.sample(grid, lambda x, y: x * x - y * y)
    u, res = solve_dirichlet(grid, None, None, g.values)
    # harmonic quadratic: reproduced exactly by the 5-point stencil
    np.testing.assert_allclose(u, g.values, atol=1e-12)
    assert res < 1e-10


def test_ball_rejects_nonzero_boundary_data():
    grid = UniformGrid(Domain.ball((0.0, 0.0), 1.0), 17)
    with pytest.raises(InvalidInputError):
        solve_dirichlet(grid, None, None, np.ones(grid.shape))


def test_discrete_laplacian_of_quadratic(square_grid):
    z = GridFunction.sample(square_grid, lambda x, y: x * x + 3 * y * y)
    lap = discrete_laplacian(z).values[1:-1, 1:-1]
    np.testing.assert_allclose(lap, 8.0, rtol=1e-10)


def test_fundamental_convolution_inverts_laplacian():
    grid = UniformGrid(Domain.box([-2.0, -2.0], [2.0, 2.0]), 129)
    V = gaussian(grid, (0.0, 0.0), 0.2)
    z = fundamental_convolution(V)
    lap = -discrete_laplacian(z).values
    core = grid.distance_from((0.0, 0.0)) < 0.6
    err = np.max(np.abs(lap[core] - V.values[core])) / V.max_abs()
    assert err < 0.05


def test_fundamental_kernel_dimension():
    with pytest.raises(UnsupportedDimensionError):
        fundamental_kernel(UniformGrid(Domain.interval(0.0, 1.0), 9))
    k3 = fundamental_kernel(UniformGrid(Domain.box([0.0] * 3, [1.0] * 3), 5))
    assert k3[4, 4, 5] == pytest.approx(1 / (4 * math.pi * 0.25))
