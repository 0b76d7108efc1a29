import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thetascale import (ConstantTheta, LinearTheta, Point, Polyline, RadialTheta, Segment,
                        TabulatedTheta, TimeLinearTheta, TimeQuadraticTheta, VectorField,
                        lightcone_scaling, parse_point, parse_theta, parse_vector_field,
                        path_scaling_factor, retarded_time, scaling_factor)
from thetascale.errors import DivergenceError, DomainError, SingularityError, SpecParseError
from thetascale.fields import line_integral

coord = st.floats(-3, 3)


def P(*c):
    return Point.from_coords(c)


def test_constant_and_linear_examples():
    assert scaling_factor(ConstantTheta(5), P(1, 2, 3, 0), P(0, 0, 0, 0)) == 1.0
    lin = LinearTheta([1.0, 0.0, 0.0])
    assert scaling_factor(lin, P(0, 2, 0, 0), P(0, 0, 0, 0)) == pytest.approx(7.3890560989, abs=1e-10)


@given(st.lists(coord, min_size=4, max_size=4), st.lists(coord, min_size=4, max_size=4),
       st.lists(coord, min_size=4, max_size=4), st.floats(-100, 100))
def test_cocycle_inverse_and_shift(x, y, z, c):
    th = LinearTheta([0.3, -0.7, 0.2], 0.1)
    X, Y, Z = P(*x), P(*y), P(*z)
    assert scaling_factor(th, Z, X) == pytest.approx(
        scaling_factor(th, Z, Y) * scaling_factor(th, Y, X), rel=1e-12)
    assert scaling_factor(th, Y, X) * scaling_factor(th, X, Y) == pytest.approx(1.0, rel=1e-12)
    assert scaling_factor(th.shifted(c), Y, X) == pytest.approx(scaling_factor(th, Y, X), rel=1e-12)


@settings(max_examples=50)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_radial_gradient_matches_finite_differences(x):
    th = RadialTheta(1.5, [3.0, 3.0, 3.0])
    p = np.array([0.0, *x])
    g = th.gradient(P(*p))
    h = 1e-6
    for j in range(3):
        e = np.zeros(4)
        e[j + 1] = h
        fd = (th.value(P(*(p + e))) - th.value(P(*(p - e)))) / (2 * h)
        assert g[j] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_time_fields():
    tl = TimeLinearTheta(0.5, 1.0)
    assert tl.value(P(3, 0)) == 1.0 and tl.time_derivative(P(3, 0)) == 0.5
    tq = TimeQuadraticTheta(2.0)
    assert tq.value(P(3, 7)) == 9.0 and tq.time_derivative(P(3, 7)) == 6.0
    assert np.all(tq.gradient(P(3, 7, 1)) == 0)


def test_tabulated(tmp_path):
    th = TabulatedTheta([0.0, 1.0, 2.0], [0.0, 2.0, 2.0])
    assert th.value(P(0, 0.5)) == 1.0
    assert th.value(P(0, 5.0)) == 2.0          # held constant outside
    assert th.gradient(P(0, 0.5))[0] == pytest.approx(1.0)
    f = tmp_path / "t.csv"
    f.write_text("y,theta\n1,3\n0,1\n")
    parsed = parse_theta(f"table:{f}")
    assert parsed.value(P(0, 0.25)) == pytest.approx(1.5)
    with pytest.raises(DomainError):
        TabulatedTheta([0.0, 0.0], [1.0, 2.0])


def test_guard_and_singularity():
    th = LinearTheta([1.0])
    with pytest.raises(DivergenceError):
        scaling_factor(th, P(0, 800), P(0, 0))
    with pytest.raises(SingularityError):
        RadialTheta(1.0, [0.0, 0.0]).value(P(0, 0, 0))


def test_gradient_field_is_path_independent():
    th = LinearTheta([0.4, -0.3])
    field = VectorField.gradient_of(th)
    a, b = P(0, 0, 0), P(0, 2, 1)
    straight = Segment(a, b)
    bent = Polyline([[0, 0, 0], [0, 0, 3], [0, 2, 1]])
    expected = scaling_factor(th, b, a)
    assert path_scaling_factor(field, straight) == pytest.approx(expected, rel=1e-10)
    assert path_scaling_factor(field, bent) == pytest.approx(expected, rel=1e-10)
    assert path_scaling_factor(VectorField.gradient_of(ConstantTheta(3)), bent) == 1.0


def test_rotational_field_is_path_dependent():
    field = VectorField.rotational(1.0)
    a, b = [0, 1, 0], [0, 0, 1]
    straight = Segment(P(*a), P(*b))
    detour = Polyline([a, [0, 1, 1], b])
    f1, f2 = path_scaling_factor(field, straight), path_scaling_factor(field, detour)
    assert abs(f1 - f2) > 1e-6
    assert line_integral(field, straight) == pytest.approx(1.0, rel=1e-10)


def test_retarded_time_and_lightcone():
    obs = P(10, 0, 0, 0)
    assert retarded_time(obs, [3, 0, 0]) == 7.0
    assert retarded_time(obs, [0, 0, 0]) == 10.0
    assert retarded_time(obs, [0, 3, 0], c=2.0) == 8.5
    th = TimeLinearTheta(0.1, t_ref=10.0)
    assert lightcone_scaling(th, obs, [10, 0, 0]) == pytest.approx(math.exp(-1), rel=1e-12)
    assert lightcone_scaling(ConstantTheta(2), obs, [1, 2, 3]) == 1.0
    assert lightcone_scaling(th, obs, [3, 4, 0]) == lightcone_scaling(th, obs, [0, 0, 5])
    with pytest.raises(DomainError):
        lightcone_scaling(LinearTheta([1.0]), obs, [1, 0, 0])
    with pytest.raises(DomainError):
        retarded_time(obs, [1, 0, 0], c=0)


@pytest.mark.parametrize("spec, cls", [
    ("constant:2", ConstantTheta), ("linear:1,2;3", LinearTheta), ("linear:0.5", LinearTheta),
    ("radial:1@0,0,0", RadialTheta), ("time-linear:0.1@2", TimeLinearTheta),
    ("time-quadratic:0.1", TimeQuadraticTheta),
])
def test_parse_theta(spec, cls):
    assert isinstance(parse_theta(spec), cls)


def test_parse_theta_values():
    th = parse_theta("linear:1,2;3")
    assert th.value(P(0, 1, 1)) == 6.0
    assert parse_theta("radial:2@1,0").value(P(0, 3, 0)) == 1.0


@pytest.mark.parametrize("bad", ["", "linear", "bogus:1", "constant:x", "radial:1",
                                 "linear:", "table:/no/such/file.csv", "constant:1,2"])
def test_parse_theta_errors(bad):
    with pytest.raises(SpecParseError):
        parse_theta(bad)


def test_parse_point_and_vector_field():
    p = parse_point("1,2,3")
    assert p.t == 1.0 and p.x == (2.0, 3.0) and p.dim == 2
    with pytest.raises(SpecParseError):
        parse_point("a,b")
    assert parse_vector_field("grad:linear:1").is_gradient
    assert parse_vector_field("linear:1").is_gradient
    assert not parse_vector_field("rotational:2").is_gradient
    with pytest.raises(SpecParseError):
        parse_vector_field("rotational:1,2")
