"""Radial Fourier analysis: coefficients phi_i, sources zeta_i and Upsilon_i, radial ODE, Kelvin map.

Solutions are generated mode by mode for radial perturbations h, where the
equation decouples into

    -phi'' - (N-1)/r phi' + mu/r^2 phi = h(r) phi.

In the variable t = log r with phi = r^sigma w (sigma the regular exponent)
this becomes w'' + (2 sigma + N - 2) w' = -r^2 h(r) w, which is integrated
forward from a small r0; the irregular branch decays in that direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import (BelowSpectralFloor, ConfigInvalid, DivergentIntegrand, IrregularBranch,
                     QuadratureFailure, StiffFailure)
from .fields import KelvinField, ModalField, SampledProfile
from .sphere import BlockRule, angular_rule, radial_rule, sphere_rule
from .spectrum import gamma_exponent, spectral_floor

PER_DECADE = 400


def log_grid(R, decades=6.0, per_decade=PER_DECADE):
    """Log-spaced radii on [10^-decades R, R], endpoints included."""
    n = int(round(decades * per_decade)) + 1
    return R * np.logspace(-decades, 0.0, n)


def _default_rule(N, rule, coeff):
    if rule is not None:
        return rule
    if coeff is not None:
        return angular_rule(coeff)
    pts, w = sphere_rule(N, 12)
    return BlockRule(pts, w, np.ones(len(w)))


def _tail_exponent(t, y, n_fit=4):
    """Exponent q of a fitted y ~ A e^{q t} over the first nodes."""
    a = np.abs(y[:n_fit])
    if np.any(a == 0):
        return None
    return float(np.polyfit(t[:n_fit], np.log(a), 1)[0])


def cumulative_log_integral(r, y, what="integrand"):
    """int_0^{r_i} y(s) ds for samples on a log grid, with a power-law tail below r_0.

    The integral is done in t = log s on y*s with a cubic spline; the piece on
    (0, r_0) uses the exponent fitted to the first nodes.

    Raises
    ------
    DivergentIntegrand
        When the fitted tail is not integrable at 0.
    """
    r = np.asarray(r, float)
    t = np.log(r)
    Y = np.asarray(y, float) * r
    if np.all(Y == 0):
        return np.zeros_like(Y)
    q = _tail_exponent(t, Y)
    if q is None:
        tail = 0.0
    elif q <= 0:
        raise DivergentIntegrand(f"{what} grows like s^{q - 1:.3g} at 0; not integrable")
    else:
        tail = Y[0] / q
    spl = CubicSpline(t, Y).antiderivative()
    return tail + spl(t) - spl(t[0])


# ---------------------------------------------------------------------------
# Fourier coefficients and sources


def fourier_coefficient(u, psi, lam, rule=None, coeff=None):
    """phi_i(lam) = int_S u(lam theta) psi_i(theta) dS."""
    rule = _default_rule(u.N, rule, coeff)
    vals = u.value(lam * rule.points) * psi.value(rule.points)
    out = float(rule.integrate(vals))
    if not math.isfinite(out):
        raise QuadratureFailure(f"non-finite Fourier coefficient at lam={lam}")
    return out


def zeta_i(u, h, f, psi, s, rule=None, coeff=None):
    """Source coefficient int_S (h u + f(x, u))(s theta) psi_i(theta) dS."""
    rule = _default_rule(u.N, rule, coeff)
    x = s * rule.points
    uu = u.value(x)
    vals = (h(x) * uu + f.f(x, uu)) * psi.value(rule.points)
    return float(rule.integrate(vals))


def upsilon_i(u, h, f, psi, lam, rule=None, coeff=None, n_half=40):
    """Upsilon_i(lam) = int_{B_lam} (h u + f(x,u)) psi_i(x/|x|) dx.

    Nested quadrature: a double-exponential radial rule on (0, lam), graded
    toward 0, times the angular rule.
    """
    if h.is_zero and f.is_zero:
        return 0.0
    rule = _default_rule(u.N, rule, coeff)
    s, w = radial_rule(lam, n_half)
    z = np.array([zeta_i(u, h, f, psi, si, rule) for si in s])
    out = float(np.sum(w * s ** (u.N - 1) * z))
    if not math.isfinite(out):
        raise QuadratureFailure(f"non-finite Upsilon at lam={lam}")
    return out


def upsilon_samples(u, h, f, psi, r, rule=None, coeff=None):
    """Upsilon_i on a whole log grid in one pass (running cumulative integral)."""
    rule = _default_rule(u.N, rule, coeff)
    r = np.asarray(r, float)
    if h.is_zero and f.is_zero:
        return np.zeros_like(r)
    z = np.array([zeta_i(u, h, f, psi, si, rule) for si in r])
    return cumulative_log_integral(r, r ** (u.N - 1) * z, "Upsilon integrand")


@dataclass(frozen=True)
class GrowthCheck:
    C: float
    slope: float
    expected_slope: float
    ok: bool


def upsilon_growth(r, values, N, delta, sigma, slack=0.05):
    """Fit C in |Upsilon(r)| <= C r^{N-2+delta+sigma} and check the decay rate.

    ``ok`` holds when the fitted log-log slope is at least the expected one
    minus ``slack`` (so the bound with the fitted C does not degrade as r -> 0).
    """
    r = np.asarray(r, float)
    v = np.abs(np.asarray(values, float))
    p = N - 2 + delta + sigma
    if np.all(v == 0):
        return GrowthCheck(0.0, math.inf, p, True)
    keep = v > 0
    C = float(np.max(v[keep] / r[keep] ** p))
    slope = float(np.polyfit(np.log(r[keep]), np.log(v[keep]), 1)[0])
    return GrowthCheck(C, slope, p, bool(math.isfinite(C) and slope >= p - slack))


# ---------------------------------------------------------------------------
# radial ODE


@dataclass(frozen=True)
class RadialSamples:
    """phi, phi' and the local exponent r phi'/phi on a log grid."""

    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    sigma: float
    mu: float

    @property
    def local_exponent(self):
        return self.r * self.dphi / self.phi

    def profile(self):
        return SampledProfile(self.r, self.phi, self.dphi, self.sigma)


def solve_radial_ode(mu, N, h_radial, R, boundary_value, decades=6.0,
                     per_decade=PER_DECADE, rtol=1e-12, atol=1e-14):
    """Regular-branch solution of -phi'' - (N-1)/r phi' + mu/r^2 phi = h(r) phi on (0, R].

    Shoots from r0 = 10^-decades R with phi ~ r^sigma+, then rescales so
    that phi(R) = boundary_value.

    Raises
    ------
    BelowSpectralFloor
        mu < -((N-2)/2)^2.
    StiffFailure
        The integrator could not complete.
    IrregularBranch
        The local exponent over the first decade sits closer to sigma- than sigma+.
    """
    if mu < spectral_floor(N) - 1e-14:
        raise BelowSpectralFloor(f"mu={mu} below the floor {spectral_floor(N)}")
    sp, sm = gamma_exponent(N, max(mu, spectral_floor(N)))
    r = log_grid(R, decades, per_decade)
    t = np.log(r)
    drift = 2 * sp + N - 2

    def q(tt):
        rr = np.exp(tt)
        return rr * rr * float(h_radial(rr))

    def rhs(tt, y):
        return [y[1], -drift * y[1] - q(tt) * y[0]]

    # particular slope for r^2 h ~ A e^{e t}: w_t = -A e^{e t} / (e + drift)
    q0 = q(t[0])
    if q0 == 0.0:
        wt0 = 0.0
    else:
        dt = 1e-3
        e = (math.log(abs(q(t[0] + dt))) - math.log(abs(q0))) / dt
        denom = e + drift
        wt0 = -q0 / denom if abs(denom) > 1e-12 else 0.0
    sol = solve_ivp(rhs, (t[0], t[-1]), [1.0, wt0], method="DOP853", t_eval=t,
                    rtol=rtol, atol=atol)
    if sol.status != 0 or sol.y.shape[1] != len(t):
        raise StiffFailure(f"radial integration failed: {sol.message}")
    w, wt = sol.y
    if not np.all(np.isfinite(w)):
        raise StiffFailure("non-finite radial solution")
    first = slice(0, int(per_decade) + 1)
    ell = sp + wt[first] / w[first]
    if sp != sm and np.any(np.abs(ell - sm) < np.abs(ell - sp)):
        raise IrregularBranch("local exponent drifted toward sigma-")
    if np.any(np.sign(w[first]) != np.sign(w[0])):
        raise IrregularBranch("profile changes sign near the origin")
    scale = boundary_value / (R ** sp * w[-1]) if w[-1] != 0 else 0.0
    phi = scale * r ** sp * w
    dphi = scale * r ** (sp - 1) * (sp * w + wt)
    return RadialSamples(r, phi, dphi, sp, float(mu))


# ---------------------------------------------------------------------------
# integral representation


def integral_representation(phi_R, r, upsilon, gamma, N, R=None):
    """phi_i on the grid r from its boundary value and the accumulated source Upsilon_i.

    phi(lam) = lam^g [R^-g phi(R) + (2-N-g)/(2-N-2g) int_lam^R s^{1-N-g} Ups ds
                      - g R^{2-N-2g}/(2-N-2g) int_0^R s^{g-1} Ups ds]
               + g lam^{2-N-g}/(2-N-2g) int_0^lam s^{g-1} Ups ds.

    The last term vanishes as lam -> 0 faster than lam^g.  Singular pieces
    below the first node use the power law fitted to Upsilon there.
    """
    r = np.asarray(r, float)
    ups = np.asarray(upsilon, float)
    R = float(r[-1]) if R is None else float(R)
    if not np.isclose(R, r[-1], rtol=1e-12):
        raise ConfigInvalid("the grid must end at R")
    g = float(gamma)
    denom = 2 - N - 2 * g
    if abs(denom) < 1e-14:
        raise ConfigInvalid("gamma at the spectral floor: the two branches coincide")
    if np.all(ups == 0):
        return phi_R * (r / R) ** g
    outer = cumulative_log_integral(r, r ** (1 - N - g) * ups, "s^{1-N-g} Upsilon")
    inner = cumulative_log_integral(r, r ** (g - 1) * ups, "s^{g-1} Upsilon")
    from_lam = outer[-1] - outer
    bracket = (R ** (-g) * phi_R + (2 - N - g) / denom * from_lam
               - g * R ** (2 - N - 2 * g) / denom * inner[-1])
    return r ** g * bracket + g * r ** (2 - N - g) / denom * inner


def kelvin_transform(u, N=None):
    """u~(x) = |x|^{-(N-2)} u(x/|x|^2)."""
    return KelvinField(u.N if N is None else N, u)


# ---------------------------------------------------------------------------
# modal solutions


@dataclass(frozen=True)
class ModeSamples:
    index: int
    mu: float
    sigma: float
    samples: RadialSamples


@dataclass(frozen=True)
class ModalSolution:
    """u = sum_i phi_i(r) psi_i(theta) generated for a radial perturbation."""

    decomposition: object
    modes: tuple
    R: float
    h: object = None

    @property
    def M(self):
        return len(self.modes)

    @property
    def N(self):
        return self.decomposition.N

    @property
    def r(self):
        return self.modes[0].samples.r

    def field(self):
        terms = tuple((m.samples.profile(), self.decomposition.modes[m.index]) for m in self.modes)
        return ModalField(self.N, terms)

    def H_parseval(self, r=None):
        """Sum of phi_i(r)^2 (orthonormal modes)."""
        if r is None:
            return sum(m.samples.phi ** 2 for m in self.modes)
        return sum(m.samples.profile()(r) ** 2 for m in self.modes)


def generate_solution(decomposition, h, modes, R=1.0, boundary=None, decades=6.0,
                      per_decade=PER_DECADE):
    """Solve the decoupled mode ODEs for a radial h and assemble a ModalSolution.

    Parameters
    ----------
    decomposition : EigenDecomposition
    h : PerturbationH with a ``radial`` profile
    modes : sequence of int
        0-based indices into the decomposition.
    boundary : sequence of float
        phi_i(R); defaults to ones.
    """
    if h.radial is None:
        raise ConfigInvalid("solution generation needs a radial perturbation h")
    modes = list(modes)
    if len(set(modes)) != len(modes):
        raise ConfigInvalid("mode indices must be distinct")
    boundary = [1.0] * len(modes) if boundary is None else list(boundary)
    if len(boundary) != len(modes):
        raise ConfigInvalid("one boundary value per mode")
    out = []
    for i, b in zip(modes, boundary):
        mu = float(decomposition.eigenvalues[i])
        rs = solve_radial_ode(mu, decomposition.N, h.radial, R, b, decades, per_decade)
        out.append(ModeSamples(i, mu, rs.sigma, rs))
    return ModalSolution(decomposition, tuple(out), float(R), h)
