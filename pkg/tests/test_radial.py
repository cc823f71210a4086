import numpy as np
import pytest
from hypothesis import given, strategies as st

from collision_asymptotics.errors import BelowSpectralFloor, ConfigInvalid
from collision_asymptotics.fields import homogeneous_field
from collision_asymptotics.potential import PerturbationH, radial_power_h
from collision_asymptotics.radial import (cumulative_log_integral, generate_solution, integral_representation,
                                          kelvin_transform, log_grid, solve_radial_ode)
from collision_asymptotics.spectrum import assemble_spectrum, gamma_exponent


@given(st.floats(-2.0, 6.0))
def test_unperturbed_mode_is_pure_power(mu):
    N = 5
    sp, _ = gamma_exponent(N, mu)
    s = solve_radial_ode(mu, N, lambda r: 0.0 * r, 1.0, 1.0, decades=4.0)
    np.testing.assert_allclose(s.phi, s.r ** sp, rtol=1e-8)
    np.testing.assert_allclose(s.local_exponent, sp, atol=1e-7)


def test_below_floor_rejected():
    with pytest.raises(BelowSpectralFloor):
        solve_radial_ode(-3.0, 5, lambda r: 0.0 * r, 1.0, 1.0)


def test_perturbed_mode_solves_ode():
    N, mu, c, eps = 5, -11 / 16, 0.1, 0.5
    s = solve_radial_ode(mu, N, lambda r: c * r ** (-2 + eps), 1.0, 1.0, decades=5.0)
    # residual of -phi'' - (N-1)/r phi' + mu/r^2 phi - h phi via splines in log r
    from scipy.interpolate import CubicSpline
    t = np.log(s.r)
    sp = CubicSpline(t, s.r * s.dphi)
    d2 = sp(t, 1) / s.r ** 2 - s.dphi / s.r  # phi'' from d/dt (r phi')
    res = -d2 - (N - 1) / s.r * s.dphi + mu / s.r ** 2 * s.phi - c * s.r ** (-2 + eps) * s.phi
    inner = (s.r > 1e-4) & (s.r < 0.9)
    scale = mu / s.r ** 2 * s.phi
    assert np.max(np.abs(res[inner] / scale[inner])) < 1e-5
    assert s.phi[-1] == pytest.approx(1.0)


def test_integral_representation_reproduces_ode_solution():
    N, mu, c, eps = 5, -11 / 16, 0.1, 0.5
    g = gamma_exponent(N, mu)[0]
    s = solve_radial_ode(mu, N, lambda r: c * r ** (-2 + eps), 1.0, 1.0, decades=6.0)
    # Upsilon accumulates the source h phi: int_0^r s^{N-1} h phi ds
    U = cumulative_log_integral(s.r, c * s.r ** (-2 + eps) * s.phi * s.r ** (N - 1), "source")
    phi = integral_representation(1.0, s.r, U, g, N)
    keep = s.r > 1e-5
    np.testing.assert_allclose(phi[keep], s.phi[keep], rtol=1e-5)


def test_integral_representation_without_source():
    r = log_grid(1.0, 3.0)
    np.testing.assert_allclose(integral_representation(2.0, r, np.zeros_like(r), 0.5, 5), 2.0 * r ** 0.5)
    with pytest.raises(ConfigInvalid):
        integral_representation(1.0, r, np.zeros_like(r), -1.5, 5)


def test_kelvin_transform_of_harmonic_power(cyl5):
    d = assemble_spectrum(cyl5, count=1)
    sp, sm = gamma_exponent(5, d.mu1)
    u = homogeneous_field(d.modes[0], sp)
    k = kelvin_transform(u)
    x = np.array([[0.3, 0.2, 0.1, 0.5, -0.4]])
    r = np.linalg.norm(x)
    # the Kelvin image of |x|^{sigma+} psi is |x|^{sigma-} psi
    assert float(k.value(x)[0]) == pytest.approx(float(d.modes[0].value(x / r)[0]) * r ** sm, rel=1e-12)


def test_generate_solution_validation(cyl5):
    d = assemble_spectrum(cyl5, count=3)
    h = radial_power_h(0.1, 0.5)
    angular_h = PerturbationH(lambda x: x[..., 0] ** 2, lambda x: 2 * x[..., 0] ** 2, 1.0, 0.5)
    with pytest.raises(ConfigInvalid):
        generate_solution(d, angular_h, [0])
    with pytest.raises(ConfigInvalid):
        generate_solution(d, h, [0, 0])
    sol = generate_solution(d, h, [0, 1], boundary=[1.0, 2.0], decades=4.0)
    assert sol.modes[1].samples.phi[-1] == pytest.approx(2.0)
