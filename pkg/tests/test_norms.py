import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from morrey_lab.battery import indicator, make_battery
from morrey_lab.errors import InvalidInputError
from morrey_lab.grid import Ball, Domain, GridFunction, RadiusLadder, UniformGrid, ball_sweep
from morrey_lab.norms import (ball_masses, classical_morrey_norm, default_sweep, embedding_check,
                              holder_product_check, indicator_bounds_check, minkowski_check, morrey_norm)
from morrey_lab.phi import PhiSpec

GRID = UniformGrid(Domain.interval(-1.0, 1.0), 33)
SWEEP = ball_sweep(GRID, 2, RadiusLadder.geometric(GRID.h, 2.0, 2.0))
PHI = PhiSpec.power(-0.5, p=2.0, n=1.0)

values = arrays(np.float64, GRID.shape, elements=st.floats(-10, 10, allow_nan=False, width=64))


def test_zero_function_has_zero_norm():
    rep = morrey_norm(GridFunction.zeros(GRID), 2.0, PHI, SWEEP)
    assert rep.value == 0.0


def test_constant_function_closed_form():
    # phi = r^-1/2, p = 2, n = 1: each ball gives mass^(1/2), the largest mass is the whole interval
    rep = morrey_norm(GridFunction.constant(GRID, 3.0), 2.0, PHI, SWEEP)
    assert rep.value == pytest.approx(3.0 * math.sqrt(2.0), rel=1e-14)
    assert rep.witness.radius >= 1.0


def test_ball_masses_match_explicit_sums(rng):
    f = GridFunction(GRID, rng.normal(size=GRID.shape))
    balls = [Ball((0.0,), 0.25), Ball((0.1,), 0.3), Ball((-1.0,), 0.5)]
    expected = []
    for b in balls:
        s = np.where(np.abs(np.abs(GRID.axes[0] - b.center[0]) - b.radius) <= 1e-9 * GRID.h, 0.5,
                     (np.abs(GRID.axes[0] - b.center[0]) < b.radius).astype(float))
        expected.append(np.sum(s * GRID.weights * np.abs(f.values) ** 3))
    np.testing.assert_allclose(ball_masses(f, 3.0, balls), expected, rtol=1e-13)


def test_bridge_identity_exact(line_grid):
    sweep = default_sweep(line_grid, stride=4)
    f = GridFunction.sample(line_grid, lambda x: np.exp(x) * np.sin(3 * x))
    for lam in (0.0, 0.3, 0.9):
        a = classical_morrey_norm(f, 2.0, lam, sweep).value
        b = morrey_norm(f, 2.0, PhiSpec.classical(lam, 2.0, 1.0), sweep).value
        assert a == pytest.approx(b, rel=1e-12)


def test_classical_rejects_lambda_out_of_range(line_grid):
    with pytest.raises(InvalidInputError):
        classical_morrey_norm(GridFunction.zeros(line_grid), 2.0, -0.5)


def test_indicator_sandwich():
    grid = UniformGrid(Domain.interval(-2.0, 2.0), 129)
    sweep = default_sweep(grid, stride=2)
    for r0 in (0.25, 0.5, 1.0):
        rep = indicator_bounds_check(grid, r0, 2.0, PHI, sweep)
        # trapezoid mass of a node-aligned indicator is exact, as is the lower bound
        assert rep.details["lower_bound"] == pytest.approx(math.sqrt(2 * r0 / r0) * r0 ** 0.5, rel=1e-14)
        assert rep.details["norm"] >= rep.details["lower_bound"]
        assert rep.passed


def test_empty_battery_embedding_fails(line_grid):
    rep = embedding_check(1.0, PHI, 1.0, PHI, [GridFunction.zeros(line_grid)], default_sweep(line_grid, 8))
    assert not rep.passed
    assert rep.details["effective_battery"] == 0


def test_embedding_detects_unbounded_ratio():
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 257)
    ladder = RadiusLadder.geometric(2 * grid.h, 2.0)
    sweep = ball_sweep(grid, 2, ladder)
    battery = [indicator(grid, (0.0,), r) for r in ladder.radii[:3]]
    good = embedding_check(1.0, PhiSpec.power(-1.0), 1.0, PhiSpec.power(-0.5), battery, sweep)
    bad = embedding_check(1.0, PhiSpec.power(-0.5), 1.0, PhiSpec.power(-1.0), battery, sweep)
    assert good.details["finite_I"] and good.details["bounded_II"] and good.passed
    assert not bad.details["finite_I"] and not bad.details["bounded_II"] and bad.passed


@settings(max_examples=60, deadline=None)
@given(values, st.floats(-100, 100).filter(lambda c: abs(c) > 1e-6))
def test_homogeneity(v, c):
    f = GridFunction(GRID, v)
    a = morrey_norm(GridFunction(GRID, c * v), 2.0, PHI, SWEEP).value
    b = abs(c) * morrey_norm(f, 2.0, PHI, SWEEP).value
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(values, values, st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_triangle_inequality(u, v, p):
    rep = minkowski_check(GridFunction(GRID, u), GridFunction(GRID, v), p, PHI, SWEEP)
    assert rep.details["slack"] >= -1e-12 * max(1.0, rep.rhs)
    assert rep.passed


@settings(max_examples=40, deadline=None)
@given(values, values)
def test_holder_per_ball(u, v):
    rep = holder_product_check(GridFunction(GRID, u), GridFunction(GRID, v), 2.0, PHI, SWEEP)
    assert rep.passed


def test_seeded_battery_is_deterministic(square_grid):
    a = make_battery(square_grid, 6, 99)
    b = make_battery(square_grid, 6, 99)
    assert [m.label for m in a] == [m.label for m in b]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.f.values, y.f.values)
    with pytest.raises(InvalidInputError):
        make_battery(square_grid, 0, 1)
