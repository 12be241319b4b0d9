import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morrey_lab.errors import ConfigError, DivergenceError, InvalidInputError, OutOfRangeError
from morrey_lab.phi import PhiSpec, check_gp, eval_phi, parse_phi, tail_integral_constant, tail_is_finite

R = list(2.0 ** np.arange(-8, 3))


def test_power_and_logpower_values():
    assert eval_phi(PhiSpec.power(-0.5), 4.0) == pytest.approx(0.5)
    phi = PhiSpec.logpower(-1.0, 2.0)
    assert eval_phi(phi, math.e) == pytest.approx(4 / math.e)
    np.testing.assert_allclose(eval_phi(PhiSpec.power(2.0), np.array([1.0, 3.0])), [1.0, 9.0])


def test_classical_phi():
    phi = PhiSpec.classical(1.0, 2.0, 3.0)
    assert phi.beta == pytest.approx(-1.0)


def test_table_interpolates_log_log():
    phi = PhiSpec.table([1.0, 4.0], [1.0, 1 / 16.0])
    # log-log linear between the samples, so exactly r^-2
    assert eval_phi(phi, 2.0) == pytest.approx(0.25)
    with pytest.raises(OutOfRangeError):
        eval_phi(phi, 8.0)


def test_phi_rejects_nonpositive_radius():
    with pytest.raises(InvalidInputError):
        eval_phi(PhiSpec.power(-1.0), 0.0)


def test_gp_membership():
    # t^{n/p} phi(t) = t^{1/4} increasing, phi decreasing
    assert check_gp(PhiSpec.power(-0.25, p=2.0, n=1.0), R).in_gp
    # phi increasing fails the almost-decreasing condition
    assert not check_gp(PhiSpec.power(1.0, p=1.0, n=1.0), R).decreasing_ok
    # faster decay than t^{-n/p} fails the other side
    assert not check_gp(PhiSpec.power(-2.0, p=1.0, n=1.0), R).increasing_ok


def test_power_gp_constants_closed_form():
    rep = check_gp(PhiSpec.power(-2.0, p=1.0, n=1.0), R)
    # r^{n/p} phi = r^-1, worst ratio over r <= s is R[-1]/R[0]
    assert rep.almost_increasing_constant == pytest.approx(R[-1] / R[0])
    assert rep.doubling_constant == pytest.approx(4.0)


def test_tail_constants():
    assert tail_is_finite(PhiSpec.power(-1.5))
    assert not tail_is_finite(PhiSpec.power(-1.0))
    # int_r^inf t^-2 dt = 1/r = r^(lambda + 1 - n) with lambda = 0, n = 2
    c = tail_integral_constant(PhiSpec.power(-2.0, p=1.0, n=2.0), 0.0, R)
    assert c == pytest.approx(1.0, rel=1e-12)
    c = tail_integral_constant(PhiSpec.power(-1.5, p=2.0, n=2.0), 0.5, R)
    assert c == pytest.approx(2.0, rel=1e-12)


def test_tail_logpower_against_quadrature():
    from scipy import integrate

    phi = PhiSpec.logpower(-2.0, 1.0, p=1.0, n=2.0)
    c = tail_integral_constant(phi, 0.0, [0.5, 1.0, 2.0])
    ref = max(integrate.quad(lambda t: t ** -2 * (1 + abs(math.log(t))), r, np.inf, points=None)[0] * r
              for r in [0.5, 1.0, 2.0])
    assert c == pytest.approx(ref, rel=1e-8)


def test_tail_divergent_and_lambda_range():
    with pytest.raises(DivergenceError):
        tail_integral_constant(PhiSpec.power(-0.5, n=2.0), 0.0, R)
    with pytest.raises(InvalidInputError):
        tail_integral_constant(PhiSpec.power(-2.0, n=2.0), 1.0, R)


def test_parse_phi(tmp_path):
    assert parse_phi({"family": "power", "beta": "-1", "p": "2", "n": "2"}) == PhiSpec.power(-1.0, 2.0, 2.0)
    table = tmp_path / "phi.csv"
    table.write_text("r,phi\n0.5,2\n1,1\n2,0.5\n")
    spec = parse_phi({"family": "table", "table_path": "phi.csv"}, tmp_path)
    assert eval_phi(spec, 1.0) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        parse_phi({"family": "power"})
    with pytest.raises(ConfigError):
        parse_phi({"family": "spline", "beta": "1"})
    with pytest.raises(ConfigError):
        parse_phi({"family": "table", "table_path": "missing.csv"}, tmp_path)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3.0, 0.0), st.floats(1.0, 4.0), st.integers(1, 3))
def test_power_gp_matches_exponent_sign(beta, p, n):
    rep = check_gp(PhiSpec.power(beta, p=p, n=float(n)), R)
    # t^{n/p} t^beta has almost-increasing constant (R_max/R_min)^|e| when e = beta + n/p < 0
    e = beta + n / p
    expected = 1.0 if e >= 0 else (R[-1] / R[0]) ** -e
    assert rep.almost_increasing_constant == pytest.approx(expected, rel=1e-9)
    assert rep.decreasing_ok
