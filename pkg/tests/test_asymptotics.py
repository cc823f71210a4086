import numpy as np
import pytest

from collision_asymptotics.almgren import analyze, compute_trace
from collision_asymptotics.asymptotics import (asymptotic_profile, beta_coefficients, convergence_check,
                                               h1_distance, resolve_eigenspace)
from collision_asymptotics.errors import EigenspaceUnresolved
from collision_asymptotics.fields import homogeneous_field
from collision_asymptotics.potential import radial_power_h
from collision_asymptotics.radial import generate_solution
from collision_asymptotics.spectrum import assemble_spectrum


@pytest.fixture(scope="module")
def setup(cyl5):
    dec = assemble_spectrum(cyl5, count=4)
    h = radial_power_h(0.1, 0.5)
    sol = generate_solution(dec, h, [0])
    return dec, h, sol.field(), sol


def test_beta_of_homogeneous_field_is_its_amplitude(cyl5):
    dec = assemble_spectrum(cyl5, count=4)
    sp = dec.sigma_plus(0)
    u = homogeneous_field(dec.modes[0], sp, 2.5)
    idx, beta = beta_coefficients(u, None, None, dec, sp, 0.5)
    assert list(idx) == [0]
    assert beta[0] == pytest.approx(2.5, rel=1e-10)


def test_beta_independent_of_R(setup):
    dec, h, u, _ = setup
    g = dec.sigma_plus(0)
    bs = [beta_coefficients(u, h, None, dec, g, R)[1][0] for R in (0.25, 0.5, 0.75)]
    assert np.ptp(bs) < 1e-6


def test_beta_matches_limit_of_mode(setup):
    dec, h, u, sol = setup
    g = dec.sigma_plus(0)
    beta = beta_coefficients(u, h, None, dec, g, 0.5)[1][0]
    s = sol.modes[0].samples
    assert s.phi[0] / s.r[0] ** g == pytest.approx(beta, rel=1e-3)


def test_H_limit_equals_beta_squared(cyl5, setup):
    dec, h, u, sol = setup
    prof = asymptotic_profile(u, h, None, dec, dec.sigma_plus(0), 0.5)
    tr = analyze(compute_trace(u, h, coeff=cyl5, r=sol.r))
    assert tr.diagnostics["H_limit"] == pytest.approx(prof.beta_norm2, rel=1e-2)


def test_blowup_converges_and_wrong_exponent_does_not(cyl5, setup):
    dec, h, u, _ = setup
    g = dec.sigma_plus(0)
    prof = asymptotic_profile(u, h, None, dec, g, 0.5)
    rep = convergence_check(u, prof, coeff=cyl5)
    assert np.all(np.diff(rep.errors) < 0)
    assert rep.errors[-1] < 1e-1 * rep.errors[0]
    bad = convergence_check(u, prof, coeff=cyl5, gamma=g + 0.1)
    assert bad.errors[-1] > bad.errors[0]


def test_h1_distance_zero_for_identical_fields(cyl5):
    dec = assemble_spectrum(cyl5, count=1)
    u = homogeneous_field(dec.modes[0], dec.sigma_plus(0))
    assert h1_distance(u, u, cyl5) == pytest.approx(0.0, abs=1e-12)


def test_unresolved_eigenspace(cyl5):
    dec = assemble_spectrum(cyl5, count=4)
    with pytest.raises(EigenspaceUnresolved):
        resolve_eigenspace(dec, 0.123456)
