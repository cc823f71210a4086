import numpy as np
import pytest

from collision_asymptotics import identities as I
from collision_asymptotics.errors import ConfigInvalid, NotASolution
from collision_asymptotics.fields import homogeneous_field
from collision_asymptotics.spectrum import assemble_spectrum


@pytest.mark.parametrize("kind", ["cylindrical", "coercivity", "boundary"])
@pytest.mark.parametrize("which", ["harmonic", "near_optimizer"])
def test_inequalities_hold_on_families(cyl5, kind, which):
    fam = I.default_family(kind, cyl5, which=which)
    rep = I.verify_hardy(kind, cyl5, fam)
    assert rep.passed, rep.as_row()
    assert rep.worst_ratio <= 1.0


def test_two_body_on_pair(pair6):
    rep = I.verify_hardy("two_body", pair6, I.default_family("two_body", pair6, which="harmonic"))
    assert rep.passed


def test_random_family_reproducible(cyl5):
    a = I.verify_hardy("cylindrical", cyl5, I.default_family("cylindrical", cyl5, which="random",
                                                             n_random=10, seed=3))
    b = I.verify_hardy("cylindrical", cyl5, I.default_family("cylindrical", cyl5, which="random",
                                                             n_random=10, seed=3))
    assert a.ratios == b.ratios and a.passed


def test_zero_function_gives_equality(cyl5):
    rep = I.zero_function_check("cylindrical", cyl5)
    assert rep.passed and rep.worst_ratio == 0.0


def test_sharp_constant_fails_when_inflated(cyl5):
    plain, inflated = I.sharpness_probe("cylindrical", cyl5)
    assert plain.passed
    assert not inflated.passed


def test_unknown_kind(cyl5):
    with pytest.raises(ConfigInvalid):
        I.verify_hardy("nope", cyl5)


def test_lambda_for_single_term_is_closed_form(cyl5):
    assert I.lambda_for_checks(cyl5) == pytest.approx(4 * 3 / 16, rel=1e-14)


def test_pohozaev_on_homogeneous_solution(cyl5):
    dec = assemble_spectrum(cyl5, count=1)
    u = homogeneous_field(dec.modes[0], dec.sigma_plus(0))
    res = I.verify_pohozaev(u, cyl5, n_half=30)
    assert res.poho < 1e-8 and res.poho_bounded < 1e-8 and res.energy < 1e-8


def test_pohozaev_with_bounded_h():
    u, coeff, h = I.manufactured_solution(5, 3, 3 / 16)
    res = I.verify_pohozaev(u, coeff, h, n_half=30)
    assert res.pde_residual < 1e-6
    assert max(res.poho, res.poho_bounded, res.energy) < 1e-6


def test_rejects_non_solution(cyl5):
    dec = assemble_spectrum(cyl5, count=1)
    u = homogeneous_field(dec.modes[0], dec.sigma_plus(0) + 0.3)
    with pytest.raises(NotASolution):
        I.verify_pohozaev(u, cyl5, n_half=30)
