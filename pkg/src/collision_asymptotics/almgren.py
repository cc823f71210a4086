"""Almgren frequency machinery: H, D, N(r), nu_1, nu_2 and the fitted limit gamma.

Every quantity is built from sphere moments at the radii of a log grid:

    m0 = int u^2,  m1 = int u u_r,  m2 = int u_r^2,
    e  = int |grad u|^2 - a u^2/s^2 - h u^2 - f(x,u) u,
    g  = int (2h + grad h . x) u^2,
    p  = int (N-2) f u - 2N F - 2 grad_x F . x,   q = int 2F - f u,

all over S^{N-1} at radius s.  Then H = m0, D(r) = r^{2-N} int_0^r s^{N-1} e ds
and so on, with every ball integral accumulated once along the grid.  Modal
fields with a radial h skip pointwise evaluation: the moments follow from the
angular Gram matrices of the modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .constants import sobolev_constant, two_star
from .errors import (ConfigInvalid, NoAdmissibleRadius, NoConvergenceDetected,
                     ZeroBoundaryNorm)
from .fields import ModalField
from .potential import zero_f, zero_h
from .radial import cumulative_log_integral
from .sphere import angular_rule, coefficient_on_rule, radial_rule, sphere_area

H_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# sphere moments


def _rule(coeff, rule):
    return angular_rule(coeff) if rule is None else rule


def moments_at(u, h, f, coeff, s, rule):
    """Sphere moments (m0, m1, m2, e, g, p, q) of u at radius s."""
    N = u.N
    th = rule.points
    w = rule.weights
    x = s * th
    uu = u.value(x)
    gu = u.grad(x)
    ur = np.sum(gu * th, axis=-1)
    a = coefficient_on_rule(coeff, rule)
    hv = h(x)
    fv = f.f(x, uu)
    Fv = f.F(x, uu)
    # fold sqrt(w) into the factors: nodes next to the singular set carry huge
    # values with tiny weights, and the products would overflow otherwise
    sw = np.sqrt(w)
    U, UR, G = uu * sw, ur * sw, gu * sw[:, None]
    return np.array([
        U @ U,
        U @ UR,
        UR @ UR,
        np.sum(G * G) - (a * U / (s * s)) @ U - (hv * U) @ U - (fv * U) @ (uu * sw),
        ((2 * hv + h.grad_dot_x(x)) * U) @ U,
        w @ ((N - 2) * fv * uu - 2 * N * Fv - 2 * f.gradx_F_dot_x(x, uu)),
        w @ (2 * Fv - fv * uu),
    ])


@dataclass(frozen=True)
class ModalGram:
    """Angular Gram data of the modes of a modal field."""

    M: np.ndarray  # int psi_i psi_j
    K: np.ndarray  # int grad psi_i . grad psi_j - a psi_i psi_j


def modal_gram(u: ModalField, coeff, rule=None):
    rule = _rule(coeff, rule)
    th = rule.points
    V = np.stack([m.value(th) for _, m in u.terms], axis=1)
    G = np.stack([m.grad(th) for _, m in u.terms], axis=1)
    a = coefficient_on_rule(coeff, rule)
    w = rule.weights
    M = (V.T * w) @ V
    K = np.einsum("p,pid,pjd->ij", w, G, G) - (V.T * (w * a)) @ V
    return ModalGram(0.5 * (M + M.T), 0.5 * (K + K.T))


def _modal_moments(u, h, coeff, r, rule):
    gram = modal_gram(u, coeff, rule)
    phi = np.stack([p(r) for p, _ in u.terms], axis=1)
    dphi = np.stack([p.deriv(r) for p, _ in u.terms], axis=1)
    e1 = np.zeros((len(r), u.N))
    e1[:, 0] = r
    hv = h(e1)
    gx = h.grad_dot_x(e1)
    m0 = np.einsum("ri,ij,rj->r", phi, gram.M, phi)
    m1 = np.einsum("ri,ij,rj->r", phi, gram.M, dphi)
    m2 = np.einsum("ri,ij,rj->r", dphi, gram.M, dphi)
    kin = np.einsum("ri,ij,rj->r", phi, gram.K, phi) / r ** 2
    z = np.zeros_like(r)
    return np.stack([m0, m1, m2, m2 + kin - hv * m0, (2 * hv + gx) * m0, z, z], axis=1)


def sphere_moments(u, h, f, coeff, r, rule=None):
    """Moments on a grid; uses the modal Gram shortcut when it applies."""
    r = np.asarray(r, float)
    rule = _rule(coeff, rule)
    if isinstance(u, ModalField) and f.is_zero and (h.is_zero or h.radial is not None):
        return _modal_moments(u, h, coeff, r, rule)
    return np.stack([moments_at(u, h, f, coeff, s, rule) for s in r])


# ---------------------------------------------------------------------------
# pointwise functionals


def H_of(u, r, coeff=None, rule=None):
    """H(r) = int_{S^{N-1}} u(r theta)^2 dS."""
    if rule is None:
        rule = angular_rule(coeff) if coeff is not None else _plain_rule(u.N)
    return float(rule.integrate(u.value(r * rule.points) ** 2))


def _plain_rule(N):
    from .sphere import BlockRule, sphere_rule
    pts, w = sphere_rule(N, 12)
    return BlockRule(pts, w, np.ones(len(w)))


def D_of(u, h, f, coeff, r, rule=None, n_half=40):
    """D(r) = r^{2-N} int_{B_r} (|grad u|^2 - a u^2/|x|^2 - h u^2 - f(x,u) u) dx.

    Nested quadrature: double-exponential radial rule on (0, r) times the
    angular rule.  Serves as the brute-force oracle for trace values.
    """
    rule = _rule(coeff, rule)
    s, w = radial_rule(r, n_half)
    e = np.array([moments_at(u, h, f, coeff, si, rule)[3] for si in s])
    return float(r ** (2 - u.N) * np.sum(w * s ** (u.N - 1) * e))


def frequency(u, h, f, coeff, r, rule=None):
    """N(r) = D(r)/H(r)."""
    rule = _rule(coeff, rule)
    H = H_of(u, r, rule=rule)
    if H < H_FLOOR:
        raise ZeroBoundaryNorm(f"H({r}) = {H:.3g}; u vanishes on the sphere")
    return D_of(u, h, f, coeff, r, rule) / H


# ---------------------------------------------------------------------------
# traces


def _log_derivative(t, y):
    """dy/dt: 4th-order central differences inside, 2nd-order one-sided at the ends."""
    dt = t[1] - t[0]
    d = np.empty_like(y)
    d[2:-2] = (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * dt)
    d[:2] = (-3 * y[:2] + 4 * y[1:3] - y[2:4]) / (2 * dt)
    d[-2:] = (3 * y[-2:] - 4 * y[-3:-1] + y[-4:-2]) / (2 * dt)
    return d


@dataclass(frozen=True)
class FrequencyTrace:
    """Frequency data on a log grid; fit results are filled in by ``analyze``."""

    N_dim: int
    r: np.ndarray
    H: np.ndarray
    D: np.ndarray
    N: np.ndarray
    nu1: np.ndarray
    nu2: np.ndarray
    H_prime_flux: np.ndarray
    gamma: float = float("nan")
    delta_fit: float = float("nan")
    C3: float = float("nan")
    exact: bool = False
    C4: float = float("nan")
    K1: float = float("nan")
    K2: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.H <= 0):
            raise ZeroBoundaryNorm("H(r) must be positive at every sample")

    @property
    def H_prime_fd(self):
        t = np.log(self.r)
        return _log_derivative(t, self.H) / self.r

    @property
    def N_prime(self):
        return _log_derivative(np.log(self.r), self.N) / self.r

    @property
    def decades(self):
        return math.log10(self.r[-1] / self.r[0])

    def lower_bound_ok(self):
        """N(r) > -(N-2)/2 at every sample."""
        return bool(np.all(self.N > -(self.N_dim - 2) / 2.0))


def compute_trace(u, h=None, f=None, coeff=None, r=None, rule=None, burn_in_decades=1.0):
    """Trace of H, D, N, nu_1, nu_2 on the log grid r.

    Ball integrals start from the first grid node with a fitted power-law tail;
    the first ``burn_in_decades`` are then dropped so the tail approximation
    does not leak into the reported samples.
    """
    h = zero_h() if h is None else h
    f = zero_f() if f is None else f
    r = np.asarray(r, float)
    N = u.N
    mom = sphere_moments(u, h, f, coeff, r, rule)
    m0, m1, m2, e, g, p, q = mom.T
    if np.any(m0 < H_FLOOR):
        raise ZeroBoundaryNorm("H vanishes on the grid")
    cum_e = cumulative_log_integral(r, r ** (N - 1) * e, "energy density")
    cum_g = cumulative_log_integral(r, r ** (N - 1) * g, "h-term density")
    cum_p = cumulative_log_integral(r, r ** (N - 1) * p, "f-term density")
    D = r ** (2 - N) * cum_e
    nu1 = 2 * r * (m2 * m0 - m1 * m1) / m0 ** 2
    nu2 = (-cum_g + cum_p) / (r ** (N - 1) * m0) + r * q / m0
    keep = r >= r[0] * 10 ** burn_in_decades * (1 - 1e-12)
    return FrequencyTrace(N, r[keep], m0[keep], D[keep], D[keep] / m0[keep], nu1[keep],
                          nu2[keep], 2 * m1[keep])


def _aitken(r, y):
    """Limit at r -> 0 of y = L + C r^d from three samples spaced geometrically.

    Returns (L, d) or raises NoConvergenceDetected when the differences do not
    shrink geometrically toward small r.
    """
    t = np.log(r)
    spl = CubicSpline(t, y)
    t1 = t[0]
    step = min(math.log(10.0) / 2, (t[-1] - t[0]) / 2)
    y1, y2, y3 = spl(t1), spl(t1 + step), spl(t1 + 2 * step)
    d12, d23 = y2 - y1, y3 - y2
    if d23 == 0 or d12 == 0:
        return float(y1), float("nan")
    ratio = d23 / d12  # = e^{d step}
    if not 0 < ratio or ratio <= 1:
        raise NoConvergenceDetected(
            f"variation does not decay toward r -> 0 (ratio {ratio:.4g})")
    L = y1 - d12 / (ratio - 1)
    return float(L), float(math.log(ratio) / step)


def estimate_gamma(trace: FrequencyTrace, noise=1e-9):
    """Limit gamma of N(r), fitted rate exponent delta and constant C3.

    Returns
    -------
    gamma, delta_fit, C3 : float
        delta_fit is nan when the trace is constant to ``noise`` (exact case).
    """
    if trace.decades < 3 - 1e-9:
        raise ConfigInvalid("estimate_gamma needs at least three decades")
    Nr = trace.N
    lo = trace.r <= trace.r[0] * 10 * (1 + 1e-12)
    if np.ptp(Nr) <= noise * max(1.0, abs(Nr[0])):
        return float(np.mean(Nr[lo])), float("nan"), 0.0
    gamma, _ = _aitken(trace.r[lo], Nr[lo])
    dev = np.abs(Nr - gamma)
    ok = dev > max(noise, 1e-3 * np.max(dev))
    if np.count_nonzero(ok) < 4:
        return gamma, float("nan"), 0.0
    delta = float(np.polyfit(np.log(trace.r[ok]), np.log(dev[ok]), 1)[0])
    C3 = float(max(0.0, np.max((gamma - Nr) / trace.r ** delta)))
    return gamma, delta, C3


def match_gamma_to_spectrum(gamma, decomposition, tol=1e-4):
    """Index of the eigenvalue cluster whose sigma+ is within tol of gamma, or None."""
    for j, (mu, start, mult) in enumerate(decomposition.clusters):
        from .spectrum import gamma_exponent
        if abs(gamma_exponent(decomposition.N, mu)[0] - gamma) <= tol:
            return j
    return None


@dataclass(frozen=True)
class DoublingResult:
    C4: float
    per_decade: list
    paper_bound: float
    within_bound: bool


def check_doubling(trace: FrequencyTrace, n_R=33):
    """Doubling constant: max over lam and R in [1, 2] of max{H(R lam)/H(lam), inverse}.

    log H is interpolated by a cubic spline in log r so R = 2 is hit exactly.
    Also reports the maximum per decade and the bound max{4^C2, 2^{N-2}}
    with C2 the largest sampled N(r).
    """
    t = np.log(trace.r)
    spl = CubicSpline(t, np.log(trace.H))
    lams = t[t + math.log(2.0) <= t[-1] + 1e-12]
    Rs = np.log(np.linspace(1.0, 2.0, n_R))
    diff = np.abs(spl(lams[:, None] + Rs[None, :]) - spl(lams)[:, None])
    worst = np.exp(np.max(diff, axis=1))
    C4 = float(np.max(worst))
    dec = np.floor((lams - lams[0]) / math.log(10.0)).astype(int)
    per = [float(np.max(worst[dec == d])) for d in np.unique(dec)]
    bound = max(4.0 ** float(np.max(trace.N)), 2.0 ** (trace.N_dim - 2))
    return DoublingResult(C4, per, bound, C4 <= bound * (1 + 1e-9))


@dataclass(frozen=True)
class HBounds:
    K1: float
    K2: float
    limit: float
    last_decade_variation: float


def check_H_bounds(trace: FrequencyTrace, gamma, sigma_probe=0.1):
    """K1 = max r^{-2 gamma} H, K2 = min r^{-2 gamma - sigma_probe} H, and lim r^{-2 gamma} H."""
    scaled = trace.H * trace.r ** (-2 * gamma)
    K1 = float(np.max(scaled))
    K2 = float(np.min(scaled * trace.r ** (-sigma_probe)))
    lo = trace.r <= trace.r[0] * 10 * (1 + 1e-12)
    if np.ptp(scaled[lo]) <= 1e-12 * abs(scaled[0]):
        limit = float(scaled[0])
    else:
        try:
            limit, _ = _aitken(trace.r[lo], scaled[lo])
        except NoConvergenceDetected:
            limit = float(scaled[0])
    variation = float(np.ptp(scaled[lo]) / abs(limit)) if limit else math.inf
    return HBounds(K1, K2, limit, variation)


def analyze(trace: FrequencyTrace, sigma_probe=0.1):
    """Copy of the trace with gamma, delta, C3, C4, K1, K2 filled in."""
    gamma, delta, C3 = estimate_gamma(trace)
    dbl = check_doubling(trace)
    hb = check_H_bounds(trace, gamma, sigma_probe)
    diag = dict(trace.diagnostics)
    diag.update(doubling_per_decade=dbl.per_decade, doubling_bound=dbl.paper_bound,
                H_limit=hb.limit, H_last_decade_variation=hb.last_decade_variation)
    return replace(trace, gamma=gamma, delta_fit=delta, C3=C3, exact=math.isnan(delta),
                   C4=dbl.C4, K1=hb.K1, K2=hb.K2, diagnostics=diag)


def nu2_envelope(trace: FrequencyTrace, eps, q):
    """Fitted C1 in |nu_2| <= C1 (N(r) + N/2)(r^{-1+eps} + r^{-1+2(q-2*)/q})."""
    ts = two_star(trace.N_dim)
    env = (trace.N + trace.N_dim / 2.0) * (trace.r ** (-1 + eps) + trace.r ** (-1 + 2 * (q - ts) / q))
    return float(np.max(np.abs(trace.nu2) / env))


# ---------------------------------------------------------------------------
# exponent ladder and admissible radius


def delta_exponent(eps, q, N, alpha_holder):
    """min{eps, N(q-2*)/q (alpha - 2/2*), 2(q-2*)/q}."""
    ts = two_star(N)
    if q <= ts:
        if q == ts:
            return 0.0
        raise ConfigInvalid(f"q={q} must exceed 2*={ts}")
    if not 2 / ts < alpha_holder < 1:
        raise ConfigInvalid(f"Holder exponent must lie in (2/2*, 1) = ({2 / ts}, 1)")
    return min(eps, N * (q - ts) / q * (alpha_holder - 2 / ts), 2 * (q - ts) / q)


def default_holder_alpha(N):
    """Midpoint of (2/2*, 1)."""
    return (2 / two_star(N) + 1) / 2


def q_lim_exponent(Lambda, N):
    """(2*/2) min{4/Lambda - 2, 2*} for Lambda > 0, (2*)^2/2 for Lambda = 0."""
    if not 0 <= Lambda < 1:
        raise ConfigInvalid(f"Lambda={Lambda} must lie in [0, 1)")
    ts = two_star(N)
    if Lambda == 0:
        return ts * ts / 2
    return ts / 2 * min(4 / Lambda - 2, ts)


def midpoint_q(Lambda, N):
    """q = (2* + q_lim)/2."""
    return (two_star(N) + q_lim_exponent(Lambda, N)) / 2


def r0_condition(r, Lambda, C_h, eps, C_f, u_norm_2star, N, k):
    """Left side of the admissible-radius condition (must stay below 1)."""
    if k <= 2:
        raise ConfigInvalid("admissible radius needs k >= 3")
    ts = two_star(N)
    S = sobolev_constant(N)
    geo = math.comb(N, k) * (2 / (k - 2)) ** 2 * (1 + math.comb(N - k, k))
    return (Lambda + C_h * r ** eps * geo
            + C_f / S * ((sphere_area(N) / N) ** (2 / N) * r * r + u_norm_2star ** (ts - 2)))


def r0_threshold(coeff, h, f, u_norm_2star, N=None, k=None, R=1.0, Lambda=None, xtol=1e-12):
    """Largest r0 <= R with the admissible-radius condition strictly below 1 (bisection).

    Raises
    ------
    NoAdmissibleRadius
        When the condition fails already at r -> 0.
    """
    from .spectrum import lambda_of
    N = coeff.N if N is None else N
    k = coeff.k if k is None else k
    Lam = lambda_of(coeff) if Lambda is None else Lambda
    eps = h.exponent_eps
    fn = lambda r: r0_condition(r, Lam, h.bound_C_h, eps, f.bound_C_f, u_norm_2star, N, k) - 1.0
    if fn(0.0) >= 0:
        raise NoAdmissibleRadius("Lambda + C_f S^-1 ||u||^{2*-2} >= 1")
    if fn(R) < 0:
        return float(R)
    return float(brentq(fn, 0.0, R, xtol=xtol, rtol=4 * np.finfo(float).eps))
