import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from collision_asymptotics import bounds as B
from collision_asymptotics.constants import sobolev_constant, two_star
from collision_asymptotics.errors import IndefiniteForm
from collision_asymptotics.fields import homogeneous_field
from collision_asymptotics.potential import AngularCoefficient, CylTerm, power_f, zero_f
from collision_asymptotics.spectrum import assemble_spectrum


@pytest.fixture(scope="module")
def w5(cyl5):
    return B.build_weight(cyl5)


@pytest.fixture(scope="module")
def negative():
    return AngularCoefficient.cylindrical(5, 3, -0.3)


def test_sigma_hat_closed_form(cyl5, w5):
    # mu_1 = -11/16 so sigma_hat = -3/2 + sqrt(9/4 - 11/16) = -1/4
    assert w5.sigma_hat == pytest.approx(-0.25, abs=1e-12)
    assert B.sigma_hat_of(cyl5) == pytest.approx(-0.25, abs=1e-12)


def test_sigma_hat_zero_without_positive_part(negative):
    assert B.sigma_hat_of(negative) == 0.0
    w = B.build_weight(negative)
    assert w.sigma_hat == 0.0 and w.d == pytest.approx(w.inf_psi ** (2 - two_star(5)))


def test_indefinite_positive_part():
    with pytest.raises(IndefiniteForm):
        B.build_weight(AngularCoefficient.cylindrical(5, 3, 0.26))


def test_d_matches_definition(w5):
    p = 2 - two_star(5)
    assert w5.d == pytest.approx(w5.inf_psi ** p, rel=1e-12)
    assert w5.d_change < 0.01
    w2 = B.build_weight(w5.coeff, R=2.0)
    assert w2.d == pytest.approx(2.0 ** (w5.sigma_hat * p) * w5.d, rel=1e-9)


def test_rho_solves_weighted_equation(w5, negative):
    assert B.rho_residual(w5) < 1e-6
    assert B.rho_residual(B.build_weight(negative)) < 1e-6


def test_s_hat_recovers_sobolev_for_zero_weight(negative):
    est = B.s_hat_constant(negative)
    assert est.value == pytest.approx(sobolev_constant(5), rel=0.03)
    assert all(a >= b for a, b in zip(est.per_level, est.per_level[1:]))


def test_s_hat_positive_and_nonincreasing(cyl5, w5):
    est = B.s_hat_constant(cyl5, weight=w5)
    assert est.value > 0
    assert all(a >= b for a, b in zip(est.per_level, est.per_level[1:]))
    worst, ok = B.weighted_sobolev_check(w5, est.value, n=20)
    assert ok and worst <= 1.0


def test_transport_identity(w5):
    bumps = B.transport_family(w5, n=3)
    assert B.quadratic_form_transport(bumps, w5) < 1e-8


def test_transport_scales_quadratically(w5):
    b = B.transport_family(w5, n=1)[0]
    x, w = B._bump_rule(b, 5)
    double = B.CompactBump(b.center, b.width, 2 * b.scale)

    def lhs(bump):
        return w @ (w5.value(x) ** 2 * np.sum(bump.grad(x) ** 2, axis=-1))

    assert lhs(double) == pytest.approx(4 * lhs(b), rel=1e-12)


@given(st.floats(2.01, 40.0), st.integers(3, 9))
def test_s_exponent_threshold(q, N):
    s = B.s_exponent(q, N)
    ts = 2 * N / (N - 2)
    if abs(q - ts) > 1e-9:
        assert (s > N / 2) == (q > ts)


@given(st.floats(2.01, 100.0))
def test_C_of_q(q):
    c = B.C_of_q(q)
    assert 0 < c <= 0.25
    assert c == (0.25 if q <= 12 else 4 / (q + 4))


def test_bk_constants_monotone_in_lambda():
    args = dict(q=4.0, N=5, k=3, S_hat=10.0, d=2.0, C_h=1.0, eps=0.5, s=3.0, V_norm=1.0)
    lo = B.bk_constants(Lambda_hat=0.2, **args)
    hi = B.bk_constants(Lambda_hat=0.8, **args)
    assert hi.ell_q >= lo.ell_q and hi.factor >= lo.factor
    assert lo.C_q == 0.25
    with pytest.raises(ValueError):
        B.bk_constants(Lambda_hat=0.2, **{**args, "s": 2.0})


def test_pointwise_ratio_of_rho_is_one(w5):
    rep = B.pointwise_bound_check(w5.field(), w5)
    assert rep.passed
    assert np.allclose(rep.sup_ratio, 1.0, rtol=1e-10)


def test_pointwise_higher_mode_decays(cyl5, w5):
    dec = assemble_spectrum(cyl5, count=2)
    u = homogeneous_field(dec.modes[1], dec.sigma_plus(1))
    rep = B.pointwise_bound_check(u, w5)
    assert rep.passed
    row = rep.sup_ratio[-1]
    assert row[0] < 1e-2 * row[-1]


def test_potential_from_solution():
    c = AngularCoefficient(5, 3, cyl=(CylTerm((1, 2, 3), 0.1), CylTerm((3, 4, 5), -0.2)))
    w = B.build_weight(c, galerkin_degree=4)
    x = np.array([[0.3, 0.2, 0.1, 0.4, -0.2], [0.5, -0.1, 0.2, 0.1, 0.3]])
    V = B.potential_from_solution(w.field(), w, zero_f(), x)
    a_minus = 0.2 / np.sum(x[:, 2:] ** 2, axis=1)
    expect = -w.value(x) ** (2 - two_star(5)) * a_minus
    assert np.allclose(V, expect, rtol=1e-10)
    f = power_f(1.0, 2.0, 5)  # f/u = 1
    V2 = B.potential_from_solution(w.field(), w, f, x)
    assert np.allclose(V2 - V, w.value(x) ** (2 - two_star(5)), rtol=1e-10)


def test_holder_alpha_metadata():
    assert B.holder_alpha(5) == pytest.approx((2 / two_star(5) + 1) / 2)
