import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morrey_lab.errors import InvalidInputError
from morrey_lab.grid import (Ball, Domain, GridFunction, RadiusLadder, UniformGrid, ball_integral_map,
                             ball_measure, ball_sweep, ball_weights, gradient_norm, integrate_ball, read_csv,
                             unit_ball_volume, write_csv)


def test_unit_ball_volumes():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_weights_sum_to_box_volume(d):
    grid = UniformGrid(Domain.box([-1.0] * d, [0.5] * d), 9)
    assert grid.weights.sum() == pytest.approx(1.5 ** d, rel=1e-14)


def test_trapezoid_is_exact_for_linear(line_grid):
    f = GridFunction.sample(line_grid, lambda x: 3 * x + 2)
    assert f.integral() == pytest.approx(4.0, rel=1e-14)


def test_node_aligned_ball_in_1d_is_trapezoid(line_grid):
    one = GridFunction.constant(line_grid, 1.0)
    # endpoints on the sphere carry half weight
    assert integrate_ball(one, Ball((0.0,), 0.25)) == pytest.approx(0.5, rel=1e-14)
    x2 = GridFunction.sample(line_grid, lambda x: x * x)
    h = line_grid.h
    # trapezoid error for x^2 on [-a, a] is a h^2 / 3
    assert integrate_ball(x2, Ball((0.0,), 0.5)) == pytest.approx(2 * 0.5 ** 3 / 3 + 0.5 * h * h / 3, rel=1e-12)


def test_disk_area_converges():
    grid = UniformGrid(Domain.box([-1.0, -1.0], [1.0, 1.0]), 257)
    area = integrate_ball(GridFunction.constant(grid, 1.0), Ball((0.0, 0.0), 0.7))
    assert area == pytest.approx(math.pi * 0.49, rel=2e-3)


def test_ball_map_matches_explicit_weights(square_grid, rng):
    dens = rng.random(square_grid.shape) * square_grid.weights
    r = 0.3
    fast = ball_integral_map(square_grid, dens, r)
    for idx in [(0, 0), (16, 16), (5, 30), (32, 7)]:
        x = square_grid.node(idx)
        ref = float(np.sum(ball_weights(square_grid, Ball(x, r)) * dens))
        assert fast[idx] == pytest.approx(ref, rel=1e-12)


def test_ball_domain_mask_and_weights():
    grid = UniformGrid(Domain.ball((0.0, 0.0), 1.0), 65)
    assert not grid.mask[0, 0]
    assert grid.mask[32, 32]
    assert grid.weights[~grid.mask].sum() == 0
    assert grid.weights.sum() == pytest.approx(math.pi, rel=2e-2)


def test_closed_form_ball_measure():
    assert ball_measure(Ball((0.0, 0.0), 2.0)) == pytest.approx(4 * math.pi)


def test_gradient_norm_of_linear(square_grid):
    f = GridFunction.sample(square_grid, lambda x, y: 3 * x - 4 * y)
    np.testing.assert_allclose(gradient_norm(f).values[square_grid.mask], 5.0, rtol=1e-12)


def test_radius_ladder_and_sweep(square_grid):
    ladder = RadiusLadder.geometric(0.125, 1.0, 2.0)
    np.testing.assert_allclose(ladder.radii, [0.125, 0.25, 0.5, 1.0])
    sweep = ball_sweep(square_grid, 4, ladder)
    assert len(sweep) == 9 * 9 * 4
    with pytest.raises(InvalidInputError):
        RadiusLadder.geometric(1.0, 0.5)
    with pytest.raises(InvalidInputError):
        RadiusLadder.explicit([])


def test_with_spacing_rejects_non_divisor():
    with pytest.raises(InvalidInputError):
        UniformGrid.with_spacing(Domain.interval(0.0, 1.0), 0.3)
    assert UniformGrid.with_spacing(Domain.interval(0.0, 1.0), 0.25).nodes_per_axis == 5


def test_domain_validation():
    with pytest.raises(InvalidInputError):
        Domain.box([0.0], [0.0])
    with pytest.raises(InvalidInputError):
        Domain.ball((0.0,), -1.0)
    with pytest.raises(InvalidInputError):
        Domain.box([0.0] * 4, [1.0] * 4)


def test_csv_round_trip(tmp_path, square_grid, rng):
    f = GridFunction(square_grid, rng.normal(size=square_grid.shape))
    path = tmp_path / "f.csv"
    write_csv(f, path)
    header = path.read_text().splitlines()[0]
    assert header == "x1,x2,value"
    g = read_csv(path)
    np.testing.assert_array_equal(g.values, f.values)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(0.05, 0.8))
def test_ball_integral_monotone_in_radius(c, r):
    grid = UniformGrid(Domain.interval(-1.0, 1.0), 65)
    f = GridFunction.sample(grid, lambda x: 1 + x * x)
    small = integrate_ball(f, Ball((c,), r))
    big = integrate_ball(f, Ball((c,), 1.5 * r))
    assert big >= small - 1e-15
