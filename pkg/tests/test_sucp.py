import math

import numpy as np
import pytest

from morrey_lab.battery import monomial
from morrey_lab.errors import InsufficientDataError, InvalidInputError, NoZeroSetError
from morrey_lab.grid import Ball, Domain, GridFunction, UniformGrid
from morrey_lab.pde.plaplace import PLaplaceProblem
from morrey_lab.sucp import (FINITE_ORDER, IDENTICALLY_ZERO, INFINITE_ORDER_SUSPECT, classify_profile,
                             default_cap, default_ladder, doubling_check, iterate_doubling, mass_function,
                             sucp_experiment, vanishing_order, zero_set_poincare_check)

RMIN = 1 / 16
RADII = [RMIN * 2 ** j for j in range(4)]


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_slope_recovers_monomial_order(d, k, p):
    grid = UniformGrid.with_spacing(Domain.box([-1.0] * d, [1.0] * d), RMIN / 8)
    prof = mass_function(monomial(grid, (0.0,) * d, k), (0.0,) * d, RADII, p)
    assert vanishing_order(prof) == pytest.approx(k, abs=0.05 * max(k, 1))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_doubling_ratio_in_1d(k):
    grid = UniformGrid.with_spacing(Domain.interval(-0.5, 0.5), RMIN / 32)
    prof = mass_function(monomial(grid, (0.0,), k), (0.0,), RADII, 2.0)
    np.testing.assert_allclose(prof.ratios, 2.0 ** (2 * k + 1), rtol=0.03)
    label, rep = classify_profile(prof)
    assert label == FINITE_ORDER and rep.passed


def test_default_cap():
    assert default_cap(2, 3.0) == 2.0 ** (2 + 24)


def test_specimen_is_flagged():
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 2049)
    with np.errstate(over="ignore", divide="ignore"):
        u = GridFunction.sample(grid, lambda x: np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300) ** 2), 0.0))
    prof = mass_function(u, (0.0,), [2.0 ** -j for j in range(6, 0, -1)], 2.0)
    label, rep = classify_profile(prof)
    assert label == INFINITE_ORDER_SUSPECT
    assert rep.details["flagged_radii"] or rep.details["degenerate_radii"]


def test_zero_profile():
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 65)
    prof = mass_function(GridFunction.zeros(grid), (0.0,), RADII, 2.0)
    assert prof.is_zero
    assert classify_profile(prof)[0] == IDENTICALLY_ZERO
    assert not doubling_check(prof).passed


def test_vanishing_order_needs_three_radii(line_grid):
    prof = mass_function(GridFunction.constant(line_grid, 1.0), (0.0,), [0.1, 0.2], 2.0)
    with pytest.raises(InsufficientDataError):
        vanishing_order(prof)


def test_ladder_must_fit(line_grid):
    with pytest.raises(InvalidInputError):
        mass_function(GridFunction.constant(line_grid, 1.0), (0.5,), [0.6], 2.0)


def test_iterate_doubling_on_monomial():
    grid = UniformGrid.with_spacing(Domain.interval(-1.0, 1.0), RMIN / 32)
    prof = mass_function(monomial(grid, (0.0,), 1), (0.0,), RADII, 2.0)
    rep = iterate_doubling(prof, RADII[-2])
    assert rep.passed
    # f(r) ~ r^3 and n = 1, so M 2^-1 = f(r)/f(2r) ~ 1/8
    assert rep.constant == pytest.approx(2 / 8, rel=0.03)
    with pytest.raises(InvalidInputError):
        iterate_doubling(prof, 0.3)


def test_zero_set_poincare_half_line():
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 1025)
    u = GridFunction.sample(grid, lambda x: np.maximum(x, 0.0))
    ball = Ball((0.0,), 0.5)
    A = np.abs(grid.axes[0]) <= 0.5
    rep = zero_set_poincare_check(u, A, ball)
    # lhs = 1/8, zero set has measure 1/2, beta = 2, m(A) = 1, int_{B_1} |u'| = 1
    assert rep.lhs == pytest.approx(0.125, rel=1e-3)
    assert rep.details["mu_E"] == pytest.approx(0.5, rel=1e-2)
    assert rep.rhs == pytest.approx(2.0, rel=1e-2)
    assert rep.passed
    with pytest.raises(NoZeroSetError):
        zero_set_poincare_check(GridFunction.constant(grid, 1.0), A, ball)


def test_profile_csv(tmp_path, line_grid):
    prof = mass_function(GridFunction.constant(line_grid, 1.0), (0.0,), [0.125, 0.25, 0.5], 2.0)
    prof.write_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "r,mass,ratio"
    assert len(lines) == 4
    assert float(lines[1].split(",")[2]) == pytest.approx(2.0)


def test_default_ladder_is_dyadic():
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 257)
    lad = default_ladder(grid, (0.0,))
    assert lad[-1] == pytest.approx(0.5)
    assert min(lad) >= 4 * grid.h * (1 - 1e-12)
    np.testing.assert_allclose(np.diff(np.log2(lad)), 1.0)


def test_experiment_labels():
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 129)
    one = GridFunction.constant(grid, 1.0)
    res = sucp_experiment(PLaplaceProblem(2.0, one, one), (0.0,))
    assert res["labels"] == [FINITE_ORDER, FINITE_ORDER] and res["pass"]
    zero = sucp_experiment(PLaplaceProblem(3.0, one, GridFunction.zeros(grid)), (0.0,))
    assert zero["labels"] == [IDENTICALLY_ZERO, IDENTICALLY_ZERO] and zero["pass"]
    signed = sucp_experiment(PLaplaceProblem(2.0, -one, one), (0.0,))
    assert signed["pass"] is None and not signed["V_nonnegative"]
    assert math.isfinite(res["runs"][0]["order"])
