import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from collision_asymptotics.almgren import (H_of, analyze, check_doubling, compute_trace, estimate_gamma,
                                           frequency, q_lim_exponent, r0_threshold)
from collision_asymptotics.errors import ConfigInvalid, NoAdmissibleRadius
from collision_asymptotics.fields import homogeneous_field
from collision_asymptotics.potential import radial_power_h, zero_f, zero_h
from collision_asymptotics.radial import generate_solution, log_grid
from collision_asymptotics.spectrum import assemble_spectrum


@pytest.fixture(scope="module")
def dec(cyl5):
    return assemble_spectrum(cyl5, count=4)


def test_frequency_constant_for_homogeneous_solution(cyl5, dec):
    sp = dec.sigma_plus(0)
    u = homogeneous_field(dec.modes[0], sp)
    tr = compute_trace(u, coeff=cyl5, r=log_grid(1.0, 4.0, 100))
    assert np.max(np.abs(tr.N - sp)) < 1e-8
    assert tr.decades >= 3 - 1e-9


def test_H_scales_like_power(cyl5, dec):
    # H(r) = r^{1-N} int_{S_r} u^2 = r^{2 gamma} for a normalized mode
    sp = dec.sigma_plus(1)
    u = homogeneous_field(dec.modes[1], sp, 3.0)
    for r in (0.1, 0.5):
        assert H_of(u, r, cyl5) == pytest.approx(9.0 * r ** (2 * sp), rel=1e-9)
    assert frequency(u, zero_h(), zero_f(), cyl5, 0.3) == pytest.approx(sp, abs=1e-8)


def test_perturbed_trace_limit_and_rate(cyl5, dec):
    h = radial_power_h(0.1, 0.5)
    sol = generate_solution(dec, h, [0])
    tr = analyze(compute_trace(sol.field(), h, coeff=cyl5, r=sol.r))
    assert abs(tr.gamma - dec.sigma_plus(0)) < 1e-4
    assert 0.4 <= tr.delta_fit <= 0.6
    assert tr.diagnostics["doubling_bound"] >= tr.C4


def test_doubling_for_exact_power(cyl5, dec):
    sp = dec.sigma_plus(0)
    tr = compute_trace(homogeneous_field(dec.modes[0], sp), coeff=cyl5, r=log_grid(1.0, 4.0, 100))
    # H = r^{2 sp}: the worst ratio over R in [1, 2] is 2^{2|sp|}
    assert check_doubling(tr).C4 == pytest.approx(2 ** (2 * abs(sp)), rel=1e-6)
    with pytest.raises(ConfigInvalid):
        estimate_gamma(compute_trace(homogeneous_field(dec.modes[0], sp), coeff=cyl5,
                                     r=log_grid(1.0, 2.5, 100)))


@given(st.floats(0.0, 0.99), st.integers(3, 8))
def test_q_lim_above_two_star(Lambda, N):
    ts = 2 * N / (N - 2)
    q = q_lim_exponent(Lambda, N)
    assert q > ts * (1 - 1e-12) or math.isclose(q, ts)


def test_admissible_radius(cyl5):
    h = radial_power_h(0.1, 0.5)
    r0 = r0_threshold(cyl5, h, zero_f(), 0.0, Lambda=0.75)
    assert 0 < r0 <= 1.0
    with pytest.raises(NoAdmissibleRadius):
        r0_threshold(cyl5, h, zero_f(), 0.0, Lambda=0.9999999999999999 + 1e-16)
