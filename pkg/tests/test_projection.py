import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from collision_asymptotics.errors import DepthExceeded, KEqualsN, NorthPole
from collision_asymptotics.potential import AngularCoefficient
from collision_asymptotics.projection import (GaussianBump, conformal_factor, iterate_reduction,
                                              lambda_b_check, project_potential, projected_pde_residual,
                                              stereographic, stereographic_inv, transport_check)
from collision_asymptotics.spectrum import assemble_spectrum, mu1_closed_form_cylindrical

from conftest import unit_vectors


@given(arrays(float, 4, elements=st.floats(-50, 50)))
def test_round_trip_from_plane(y):
    th = stereographic_inv(y)
    assert np.linalg.norm(th) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(stereographic(th), y, rtol=1e-9, atol=1e-9)


def test_round_trip_from_sphere(rng):
    th = unit_vectors(rng, 200, 5)
    th = th[th[:, -1] < 0.99]
    assert np.allclose(stereographic_inv(stereographic(th)), th, atol=1e-12)
    with pytest.raises(NorthPole):
        stereographic(np.array([0.0, 0, 0, 0, 1.0]))


def test_conformal_factor_is_metric_scaling():
    # |d Pi^{-1}(y) e|^2 = phi(y) |e|^2 for every direction e
    y = np.array([0.3, -1.2, 0.7])
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        d = (stereographic_inv(y + e) - stereographic_inv(y - e)) / (2 * h)
        assert float(d @ d) == pytest.approx(conformal_factor(y), rel=1e-8)


@pytest.mark.parametrize("coeff", [
    AngularCoefficient.cylindrical(5, 3, 3 / 16),
    AngularCoefficient.cylindrical(5, 3, 3 / 16, J=(3, 4, 5)),
    AngularCoefficient.pair(6, 3, 0.2),
])
def test_identity_residual(coeff, rng):
    prob = project_potential(coeff, -0.5)
    y = rng.standard_normal((2000, coeff.N - 1)) * 2.0
    assert prob.identity_residual(y) < 1e-10


def test_terms_are_split_by_the_pole_index():
    c = AngularCoefficient.cylindrical(5, 3, 3 / 16, J=(3, 4, 5))
    prob = project_potential(c, 0.0)
    assert prob.b.is_zero and len(prob.moved_cyl) == 1
    c2 = AngularCoefficient.cylindrical(5, 3, 3 / 16, J=(1, 2, 3))
    prob2 = project_potential(c2, 0.0)
    assert prob2.b.N == 4 and not prob2.moved_cyl


def test_lambda_b_below_one():
    lam, ok = lambda_b_check(AngularCoefficient.cylindrical(5, 3, 3 / 16, J=(1, 2, 3)))
    assert ok and lam == pytest.approx(0.75, abs=0.05)
    lam0, ok0 = lambda_b_check(AngularCoefficient.cylindrical(5, 3, 3 / 16, J=(3, 4, 5)))
    assert lam0 == 0.0 and ok0


def test_projected_eigenfunction_solves_flat_equation(cyl5, rng):
    dec = assemble_spectrum(cyl5, count=1)
    prob = project_potential(cyl5, dec.eigenvalues[0])
    y = rng.standard_normal((300, 4)) * 0.8
    res = [projected_pde_residual(prob, dec.modes[0], y, s) for s in (1e-2, 5e-3)]
    assert res[1] < res[0] and res[1] < 1e-4


def test_iterated_exponent_is_invariant():
    c = AngularCoefficient.cylindrical(6, 3, 0.2, J=(1, 2, 3))
    gp = mu1_closed_form_cylindrical(6, 3, 0.2)[1]
    levels = iterate_reduction(c, assemble_spectrum(c, count=1).mu1, depth=2)
    assert len(levels) == 2
    for lv in levels:
        assert lv.gamma_tilde == pytest.approx(gp, abs=1e-6)
    with pytest.raises(DepthExceeded):
        iterate_reduction(c, 0.0, depth=4)


def test_k_equals_N_rejected():
    with pytest.raises(KEqualsN):
        project_potential(AngularCoefficient.cylindrical(4, 4, 0.5), 0.0)


def test_quadratic_forms_transport():
    b1 = GaussianBump(np.array([0.3, 0.0, -0.2, 0.1]))
    b2 = GaussianBump(np.array([-0.5, 0.4, 0.0, 0.2]), 0.7)
    g, m = transport_check(b1, b2, 5)
    assert g < 1e-6 and m < 1e-6
