import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from collision_asymptotics.errors import ConfigInvalid, NotUnitVector, SingularPoint
from collision_asymptotics.potential import (AngularCoefficient, CylTerm, PairTerm, critical_alpha,
                                             pair_rotation, radial_power_h, zero_f, power_f)
from conftest import unit_vectors


def test_cylindrical_value_matches_definition(cyl5, rng):
    th = unit_vectors(rng, 200, 5)
    want = (3 / 16) / np.sum(th[:, :3] ** 2, axis=1)
    np.testing.assert_allclose(cyl5.eval_a(th), want, rtol=1e-14)


def test_pair_value_matches_definition(pair6, rng):
    th = unit_vectors(rng, 200, 6)
    want = 0.2 / np.sum((th[:, :3] - th[:, 3:]) ** 2, axis=1)
    np.testing.assert_allclose(pair6.eval_a(th), want, rtol=1e-12)


@given(st.floats(0.01, 100.0))
def test_potential_is_homogeneous_of_degree_minus_two(scale):
    c = AngularCoefficient(6, 3, cyl=(CylTerm((1, 2, 4), 0.1),), pairs=(PairTerm((1, 2, 3), (4, 5, 6), -0.3),))
    x = np.array([[0.3, -0.2, 0.5, 0.1, 0.7, -0.4]])
    np.testing.assert_allclose(c.eval_V(scale * x), c.eval_V(x) / scale ** 2, rtol=1e-12)


@pytest.mark.parametrize("kw, exc", [
    (dict(N=2, k=3), ConfigInvalid),
    (dict(N=5, k=2), ConfigInvalid),
    (dict(N=5, k=3, pairs=(PairTerm((1, 2, 3), (3, 4, 5), 0.1),)), ConfigInvalid),
    (dict(N=5, k=3, cyl=(CylTerm((1, 2, 6), 0.1),)), ConfigInvalid),
    (dict(N=5, k=3, cyl=(CylTerm((1, 2, 3), 0.0),)), ConfigInvalid),
])
def test_invalid_coefficients_rejected(kw, exc):
    with pytest.raises(exc):
        AngularCoefficient(**kw)


def test_singular_and_non_unit_inputs(cyl5):
    with pytest.raises(SingularPoint):
        cyl5.eval_a(np.array([[0, 0, 0, 1.0, 0]]))
    with pytest.raises(NotUnitVector):
        cyl5.eval_a(np.array([[2.0, 0, 0, 0, 0]]))


def test_json_round_trip_and_digest(pair6):
    again = AngularCoefficient.from_json(__import__("json").dumps(pair6.to_dict()))
    assert again == pair6
    assert again.digest() == pair6.digest()
    with pytest.raises(ConfigInvalid, match="line 1, column"):
        AngularCoefficient.from_json("{\"N\": 5,, }")


def test_positive_part_and_hardy_bound():
    c = AngularCoefficient(6, 3, cyl=(CylTerm((1, 2, 3), 0.1), CylTerm((4, 5, 6), -0.2)))
    p = c.positive_part()
    assert [t.alpha for t in p.cyl] == [0.1, 0.0]
    # single positive term: (2/(k-2))^2 alpha
    assert math.isclose(p.lambda_upper_bound(), 0.4)
    assert critical_alpha(3) == 0.25


def test_pair_rotation_is_orthogonal():
    Q = pair_rotation(6, np.array([0, 1, 2]), np.array([3, 4, 5]))
    np.testing.assert_allclose(Q @ Q.T, np.eye(6), atol=1e-14)


@given(st.floats(-1.0, 1.0), st.floats(0.05, 0.95))
def test_radial_h_bound_constant(c, eps):
    h = radial_power_h(c, eps)
    x = np.array([[0.3, 0.1, -0.2, 0.4, 0.05]])
    r = np.linalg.norm(x)
    assert math.isclose(float(h(x)[0]), c * r ** (-2 + eps), rel_tol=1e-12, abs_tol=1e-300)
    assert h.bound_C_h == pytest.approx(abs(c) * (1 + abs(-2 + eps)))


def test_nonlinearity_primitive_consistent():
    f = power_f(0.5, 3.0, 5)
    x = np.zeros((3, 5)) + 0.1
    u = np.array([0.2, -0.7, 1.3])
    d = 1e-6
    fd = (f.F(x, u + d) - f.F(x, u - d)) / (2 * d)
    np.testing.assert_allclose(fd, f.f(x, u), rtol=1e-6)
    assert zero_f().is_zero
