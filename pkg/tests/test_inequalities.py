import math

import numpy as np
import pytest

from morrey_lab.acceptance import cosh_caccioppoli
from morrey_lab.battery import bump, gaussian
from morrey_lab.errors import InvalidInputError
from morrey_lab.grid import Domain, GridFunction, UniformGrid
from morrey_lab.norms import default_sweep
from morrey_lab.pde.inequalities import caccioppoli_check, energy_terms, fefferman_check, sigma_split_check
from morrey_lab.pde.plaplace import PLaplaceProblem, solve_plaplace
from morrey_lab.phi import PhiSpec


@pytest.fixture(scope="module")
def fine_line():
    return UniformGrid(Domain.interval(-1.0, 1.0), 2 ** 12 + 1)


def test_parabola_energy_terms(fine_line):
    u = GridFunction.sample(fine_line, lambda x: 1 - x * x)
    t = energy_terms(u, GridFunction.constant(fine_line, 1.0), 2.0)
    assert t["potential"] == pytest.approx(16 / 15, abs=1e-6)
    assert t["gradient"] == pytest.approx(8 / 3, abs=1e-6)


def test_fefferman_parabola_constant(fine_line):
    u = GridFunction.sample(fine_line, lambda x: 1 - x * x)
    V = GridFunction.constant(fine_line, 1.0)
    rep = fefferman_check(u, V, 2.0, PhiSpec.power(-1.0, 2.0, 1.0), 0.0, default_sweep(fine_line, 64, r_min=1 / 64))
    # ||1|| with phi = 1/r, p = 2, n = 1 is sup (r * mass)^(1/2) = 2, so C = (16/15) / (4 * 8/3)
    assert rep.details["norm_V"] == pytest.approx(2.0, rel=1e-12)
    assert rep.constant == pytest.approx(0.1, rel=1e-5)
    assert rep.details["hypotheses"]["q"] == pytest.approx(2.0)


def test_fefferman_requires_nonnegative_potential(square_grid):
    u = bump(square_grid, (0.0, 0.0), 0.5)
    with pytest.raises(InvalidInputError):
        fefferman_check(u, GridFunction.constant(square_grid, -1.0), 2.0, PhiSpec.power(-2.0, 2.0, 2.0), 0.0,
                        default_sweep(square_grid, 4))


def test_fefferman_records_a1(square_grid):
    V = 1.0 + gaussian(square_grid, (0.0, 0.0), 0.3)
    rep = fefferman_check([bump(square_grid, (0.1, 0.0), 0.4)], V, 2.0, PhiSpec.power(-2.0, 2.0, 2.0), 0.0,
                          default_sweep(square_grid, 4))
    assert rep.details["hypotheses"]["a1"] >= 1.0
    assert rep.passed


def test_sigma_split_curve_is_nonincreasing(square_grid):
    V = 1.0 + gaussian(square_grid, (0.0, 0.0), 0.3, 5.0)
    us = [bump(square_grid, (0.0, 0.0), a) for a in (0.3, 0.5, 0.7)]
    rep = sigma_split_check(us, V, 0.1, 2.0, sigma_ladder=np.geomspace(1e-3, 1.0, 12))
    assert rep.passed
    curve = rep.details["K_curve"]
    assert all(b <= a for a, b in zip(curve, curve[1:]))
    # sigma -> 0 recovers the plain ratio int u^2 V / int u^2 <= max V
    assert curve[0] <= V.max_abs()


def test_caccioppoli_matches_analytic_cosh():
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 2 ** 11 + 1)
    one = GridFunction.constant(grid, 1.0)
    sol = solve_plaplace(PLaplaceProblem(2.0, one, one))
    rep = caccioppoli_check(sol, (0.0,), (0.1, 0.2, 0.3), 2.0)
    got = [row["C"] for row in rep.details["rows"]]
    np.testing.assert_allclose(got, [cosh_caccioppoli(r) for r in (0.1, 0.2, 0.3)], rtol=1e-2)
    # C(r) grows like r^4 for this solution, far more than a factor 10
    assert rep.constant == pytest.approx(max(got) / min(got))


def test_cosh_caccioppoli_oracle():
    # C(r) = r^2 int_0^r sinh^2 / int_0^{2r} cosh^2, by direct quadrature
    from scipy import integrate

    r = 0.2
    top = integrate.quad(lambda x: math.sinh(x) ** 2, -r, r)[0]
    bot = integrate.quad(lambda x: math.cosh(x) ** 2, -2 * r, 2 * r)[0]
    assert cosh_caccioppoli(r) == pytest.approx(r * r * top / bot, rel=1e-12)


def test_caccioppoli_ball_must_fit():
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 65)
    with pytest.raises(InvalidInputError):
        caccioppoli_check(GridFunction.constant(grid, 1.0), (0.0,), (0.6,), 2.0)
