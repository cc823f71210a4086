import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from collision_asymptotics.sphere import (block_rule, eval_monomials, exponents, grad_monomials,
                                          harmonic_basis, harmonic_dimension, monomial_integral,
                                          monomial_integral_block, radial_rule, sphere_area,
                                          sphere_rule)


def test_area_known_values():
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi ** 2)


def test_monomial_integral_against_area_and_moments():
    # int x_1^2 over S^{d-1} is |S^{d-1}|/d
    for d in (3, 4, 5):
        e = np.zeros(d, int)
        assert monomial_integral(e) == pytest.approx(sphere_area(d))
        e[0] = 2
        assert monomial_integral(e) == pytest.approx(sphere_area(d) / d)


@given(st.lists(st.integers(0, 3), min_size=4, max_size=4))
def test_sphere_rule_exact(e):
    pts, w = sphere_rule(4, 12)
    val = w @ np.prod(pts ** np.array(e), axis=1)
    assert val == pytest.approx(monomial_integral(e), abs=1e-13)


@given(st.lists(st.integers(0, 2), min_size=5, max_size=5).map(lambda v: [2 * x for x in v]))
def test_block_integral_with_inverse_square(e):
    r = block_rule(5, np.array([0, 1, 2]), n_phi=16, degree=16, kind="jacobi", sing=-2.0)
    vals = np.prod(r.points ** np.array(e), axis=1) / np.sum(r.points[:, :3] ** 2, axis=1)
    assert r.weights @ vals == pytest.approx(monomial_integral_block(e, [0, 1, 2]), rel=1e-11)


def test_de_block_rule_integrates_singular_weight():
    # |z_J|^{-2.5} is integrable for k = 3 but far from polynomial near z_J = 0
    r = block_rule(5, np.array([0, 1, 2]), n_phi=60, degree=4)
    vals = np.sum(r.points[:, :3] ** 2, axis=1) ** -1.25
    # int_{S^4} |x_J|^{2s} = |S^2||S^1| B((3+2s)/2, 1) / 2 for s = -1.25, N-k = 2
    s = -1.25
    want = sphere_area(3) * sphere_area(2) * math.gamma((3 + 2 * s) / 2) * math.gamma(1.0) \
        / math.gamma((5 + 2 * s) / 2) / 2
    assert r.weights @ vals == pytest.approx(want, rel=1e-10)


def test_harmonic_basis_orthonormal_and_harmonic():
    pts, w = sphere_rule(4, 10)
    for l in range(4):
        hb = harmonic_basis(4, l)
        assert hb.size == harmonic_dimension(4, l)
        V = hb.value(pts)
        np.testing.assert_allclose((V.T * w) @ V, np.eye(hb.size), atol=1e-12)


def test_gradients_match_finite_differences(rng):
    exps = np.concatenate([exponents(3, d) for d in range(4)])
    y = rng.standard_normal((5, 3))
    g = grad_monomials(exps, y)
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (eval_monomials(exps, y + e) - eval_monomials(exps, y - e)) / (2 * h)
        np.testing.assert_allclose(g[..., i], fd, atol=1e-6)


def test_radial_rule_integrates_endpoint_singularity():
    s, w = radial_rule(1.0, 60)
    assert w @ s ** -0.5 == pytest.approx(2.0, rel=1e-10)
