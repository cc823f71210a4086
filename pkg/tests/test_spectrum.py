import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from collision_asymptotics.errors import BelowSpectralFloor, SupercriticalAlpha
from collision_asymptotics.galerkin import solve_general_galerkin
from collision_asymptotics.potential import AngularCoefficient
from collision_asymptotics.spectrum import (SturmLiouvilleReduction, assemble_spectrum, gamma_exponent,
                                            lambda_of, mu1_closed_form_cylindrical,
                                            mu1_closed_form_two_body, mu1_of, solve_sector_sl,
                                            spectral_floor)


def oracle_mu1(N, k, alpha):
    """Ground exponent of |x_J|^g: g(g+k-2) = -alpha, then mu = g(g+N-2)."""
    g = -(k - 2) / 2 + math.sqrt(((k - 2) / 2) ** 2 - alpha)
    return g * (g + N - 2)


def test_example_value():
    # N=5, k=3, alpha=3/16: gamma' = -1/2 + 1/4, mu_1 = (-1/4)(11/4)
    mu, gp = mu1_closed_form_cylindrical(5, 3, 3 / 16)
    assert gp == -0.25 and mu == -11 / 16


@pytest.mark.parametrize("N,k,alpha", [(5, 3, 3 / 16), (6, 3, 0.2), (7, 4, 0.5), (4, 3, -1.0)])
def test_sector_solver_matches_oracle(N, k, alpha):
    p = solve_sector_sl(SturmLiouvilleReduction(N, k, alpha, (0, 0), 2048), 1)[0]
    assert p.mu == pytest.approx(oracle_mu1(N, k, alpha), rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.1, 0.3])
def test_two_body_reduces_to_half_alpha(alpha):
    mu = assemble_spectrum(AngularCoefficient.pair(6, 3, alpha), count=1).mu1
    assert mu == pytest.approx(oracle_mu1(6, 3, alpha / 2), rel=1e-10)
    assert mu1_closed_form_two_body(6, 3, alpha) == pytest.approx(oracle_mu1(6, 3, alpha / 2), rel=1e-14)


@given(st.integers(3, 9), st.floats(-2.0, 30.0))
def test_gamma_exponent_roots(N, mu):
    if mu < spectral_floor(N):
        with pytest.raises(BelowSpectralFloor):
            gamma_exponent(N, mu)
        return
    for g in gamma_exponent(N, mu):
        assert g * (g + N - 2) == pytest.approx(mu, abs=1e-9 * max(1, abs(mu)))


def test_higher_sectors_and_multiplicities(cyl5):
    d = assemble_spectrum(cyl5, count=6)
    # l2 = 1 in R^2 has two harmonics: gamma = -1/4 + 1
    g = 0.75
    assert d.eigenvalues[1] == pytest.approx(g * (g + 3), rel=1e-8)
    assert d.eigenvalues[2] == pytest.approx(g * (g + 3), rel=1e-8)
    mu, start, mult = d.cluster_of(1)
    assert mult == 2 and start == 1


def test_eigenfunctions_orthonormal(cyl5):
    from collision_asymptotics.sphere import angular_rule
    d = assemble_spectrum(cyl5, count=4)
    rule = angular_rule(cyl5, n_phi=40, degree=10)
    V = np.array([m.value(rule.points) for m in d.modes[:4]])
    G = (V * rule.weights) @ V.T
    np.testing.assert_allclose(G, np.eye(4), atol=1e-8)


def test_supercritical_and_floor():
    with pytest.raises(SupercriticalAlpha):
        mu1_closed_form_cylindrical(5, 3, 0.3)
    assert mu1_of(AngularCoefficient.cylindrical(5, 3, 0.3)) == -math.inf


@pytest.mark.parametrize("alpha", [0.05, 0.15, 0.24])
def test_lambda_lower_bound_close_to_exact(alpha):
    exact = 4 * alpha  # (2/(k-2))^2 alpha for k = 3
    lam = lambda_of(AngularCoefficient.cylindrical(5, 3, alpha))
    assert lam <= exact * (1 + 1e-12)
    assert lam == pytest.approx(exact, rel=5e-3)


def test_lambda_zero_for_nonpositive():
    assert lambda_of(AngularCoefficient.cylindrical(5, 3, -0.4)) == 0.0


def test_galerkin_monotone_and_above_exact(cyl5):
    mus = [solve_general_galerkin(cyl5, L, 1).eigenvalues[0] for L in (4, 6, 8)]
    assert mus[0] >= mus[1] >= mus[2]
    assert mus[-1] >= -11 / 16


def test_galerkin_free_sphere_harmonics():
    # a tiny coefficient: spectrum close to l(l+N-2) with multiplicities 1, 5
    c = AngularCoefficient.cylindrical(5, 3, 1e-8)
    d = solve_general_galerkin(c, 4, 6)
    np.testing.assert_allclose(d.eigenvalues[1:6], 4.0, atol=1e-6)
