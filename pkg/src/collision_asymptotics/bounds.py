"""Weighted machinery behind the pointwise bound |u| <= C rho.

rho(x) = |x|^sigma_hat psi_hat(x/|x|) is built from the first eigenpair of
the positive part a_hat of the coefficient.  This module computes sigma_hat,
the constant d = sup rho^{2-2*}, an upper estimate of the weighted Sobolev
constant S(a_hat), the Brezis-Kato constants, and checks the transport
identity int rho^2 |grad v|^2 = Q(rho v) and the pointwise bound itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .almgren import default_holder_alpha as holder_alpha
from .constants import sobolev_constant, two_star
from .errors import IndefiniteForm, NonConvergence, QuadratureFailure
from .fields import homogeneous_field
from .identities import lambda_for_checks
from .sphere import (angular_rule, block_rule, eval_monomials, exponents,
                     grad_monomials, radial_rule, sphere_area, sphere_rule)
from .spectrum import PolynomialMode, assemble_spectrum, gamma_exponent

SIGMA_TOL = 1e-10


def _constant_mode(N):
    return PolynomialMode(N, np.zeros((1, N), int), np.array([1.0 / math.sqrt(sphere_area(N))]), 0.0)


def _check_positive_part(coeff):
    ahat = coeff.positive_part()
    if not ahat.is_zero:
        lam = lambda_for_checks(ahat)
        if lam >= 1.0:
            raise IndefiniteForm(f"Lambda(a_hat) = {lam:.6g} >= 1")
    return ahat


def _sigma_from_mu(N, mu):
    sig = gamma_exponent(N, mu)[0]
    if sig > SIGMA_TOL:
        raise NonConvergence(f"sigma_hat = {sig:.3g} > 0 contradicts mu_1(a_hat) <= 0")
    return min(sig, 0.0)


def sigma_hat_of(coeff, **solver_kw):
    """sigma_hat = -(N-2)/2 + sqrt(((N-2)/2)^2 + mu_1(a_hat)); zero when a_hat = 0."""
    ahat = _check_positive_part(coeff)
    if ahat.is_zero:
        return 0.0
    return _sigma_from_mu(coeff.N, assemble_spectrum(ahat, count=1, **solver_kw).mu1)


@dataclass(frozen=True, eq=False)
class WeightRho:
    """rho(x) = |x|^sigma_hat psi_hat(x/|x|) with d = sup_{B_R} rho^{2-2*}.

    Attributes
    ----------
    inf_psi : float
        Minimum of psi_hat over the angular rule (positive by the maximum principle).
    d_coarse : float
        d recomputed on a coarser angular rule, for the refinement check.
    """

    coeff: object
    ahat: object
    sigma_hat: float
    mu_hat: float
    mode: object
    R: float
    inf_psi: float
    d: float
    d_coarse: float
    rule: object = field(repr=False)

    @property
    def N(self):
        return self.coeff.N

    def field(self):
        return homogeneous_field(self.mode, self.sigma_hat)

    def value(self, x):
        return self.field().value(x)

    def grad(self, x):
        return self.field().grad(x)

    @property
    def d_change(self):
        return abs(self.d - self.d_coarse) / self.d


def _psi_min(mode, rule):
    v = mode.value(rule.points)
    return float(np.min(v))


def build_weight(coeff, R=1.0, n_phi=40, degree=8, n_grid=None, galerkin_degree=None):
    """Assemble rho for the positive part of ``coeff`` on the ball of radius R.

    ``n_grid`` sets the sector-solver grid for psi_hat and ``galerkin_degree``
    the basis degree used when a_hat has several terms (defaults: the solvers' own).
    """
    N = coeff.N
    ahat = _check_positive_part(coeff)
    if ahat.is_zero:
        mode, mu, sig = _constant_mode(N), 0.0, 0.0
        rule = angular_rule(ahat, n_phi, degree)
        coarse = angular_rule(ahat, n_phi // 2, degree // 2)
    else:
        kw = {} if n_grid is None else {"n_grid": n_grid}
        if galerkin_degree is not None:
            kw["galerkin_degree"] = galerkin_degree
        dec = assemble_spectrum(ahat, count=1, **kw)
        mode, mu = dec.modes[0], dec.mu1
        sig = _sigma_from_mu(N, mu)
        rule = angular_rule(ahat, n_phi, degree)
        coarse = angular_rule(ahat, n_phi // 2, degree // 2)
    vals = mode.value(rule.points)
    if np.mean(vals) < 0:
        mode = _Negated(mode)
    m_fine, m_coarse = _psi_min(mode, rule), _psi_min(mode, coarse)
    if m_fine <= 0:
        raise NonConvergence(f"psi_hat is not positive on the rule (min {m_fine:.3g})")
    p = 2 - two_star(N)
    # sigma_hat <= 0 and 2 - 2* < 0, so rho^{2-2*} grows with |x| and peaks where psi_hat is least
    d = R ** (sig * p) * m_fine ** p
    dc = R ** (sig * p) * m_coarse ** p
    return WeightRho(coeff, ahat, sig, mu, mode, R, m_fine, d, dc, rule)


@dataclass(frozen=True, eq=False)
class _Negated:
    base: object

    @property
    def N(self):
        return self.base.N

    def value(self, x):
        return -self.base.value(x)

    def grad(self, x):
        return -self.base.grad(x)


# ---------------------------------------------------------------------------
# rho solves -Lap rho - a_hat rho / |x|^2 = 0


def rho_residual(weight: WeightRho, points=None, n=500, seed=0, step=1e-3, min_dist=0.05):
    """Max residual of -Lap rho - a_hat rho/|x|^2 relative to |Lap rho| + |a_hat rho| + rho/|x|^2.

    Fourth-order central differences with step ``step * |x|``.
    """
    N = weight.N
    if points is None:
        rng = np.random.default_rng(seed)
        th = rng.standard_normal((4 * n, N))
        th /= np.linalg.norm(th, axis=1, keepdims=True)
        if not weight.ahat.is_zero:
            th = th[weight.ahat.dist_to_singular(th) > min_dist]
        th = th[:n]
        points = th * rng.uniform(0.1, 1.0, len(th))[:, None] * weight.R
    x = np.asarray(points, float)
    f = weight.value
    hs = step * np.linalg.norm(x, axis=1)
    r0 = f(x)
    lap = np.zeros(len(x))
    for i in range(N):
        d = np.zeros(N)
        d[i] = 1.0
        dd = hs[:, None] * d
        lap += (-f(x + 2 * dd) + 16 * f(x + dd) - 30 * r0 + 16 * f(x - dd) - f(x - 2 * dd)) / (12 * hs ** 2)
    pot = weight.ahat.eval_V_unchecked(x) * r0 if not weight.ahat.is_zero else 0.0 * r0
    # rho/|x|^2 sets the size of each term, so a harmonic rho is judged on that scale
    scale = np.abs(lap) + np.abs(pot) + np.abs(r0) / np.sum(x * x, axis=1)
    return float(np.max(np.abs(-lap - pot) / scale))


RESIDUAL_FLOOR = 1e-6


@dataclass(frozen=True)
class ResidualStudy:
    levels: tuple
    residuals: tuple
    orders: tuple
    passed: bool


def rho_residual_convergence(coeff, levels=None, **kw):
    """rho residual as the psi_hat discretization is refined.

    Levels are sector-grid sizes for a single active term of a_hat and
    Galerkin degrees for several.  Passes when every residual sits below
    RESIDUAL_FLOOR (psi_hat exact up to the difference stencil) or when the
    observed order log2(r_i/r_{i+1}) is at least 1 at every step.
    """
    ahat = coeff.positive_part()
    multi = len(ahat.active_terms) > 1
    if levels is None:
        levels = (4, 6, 8) if multi else (64, 128, 256)
    res = []
    for lv in levels:
        w = build_weight(coeff, **({"galerkin_degree": lv} if multi else {"n_grid": lv}))
        res.append(rho_residual(w, **kw))
    orders = tuple(math.log2(a / b) if a > 0 and b > 0 else math.inf for a, b in zip(res, res[1:]))
    ok = all(r < RESIDUAL_FLOOR for r in res) or all(o >= 1 for o in orders)
    return ResidualStudy(tuple(levels), tuple(res), orders, bool(ok))


def potential_from_solution(u, weight, f, x, zero_tol=1e-14):
    """V(x) in the weighted form of the equation for u.

    V = rho^{2-2*} (f(x,u)/u - a_minus(theta)/|x|^2), with the f term dropped
    where |u| < zero_tol.  Then u solves -Lap u - a_hat u/|x|^2 = (h + rho^{2*-2} V) u.
    """
    N = weight.N
    x = np.asarray(x, float)
    uu = u.value(x)
    r2 = np.sum(x * x, axis=-1)
    neg = weight.coeff.positive_part()
    a_full = weight.coeff.eval_V_unchecked(x) * r2 if not weight.coeff.is_zero else 0.0 * r2
    a_hat = neg.eval_V_unchecked(x) * r2 if not neg.is_zero else 0.0 * r2
    a_minus = a_hat - a_full
    small = np.abs(uu) < zero_tol
    ratio = np.where(small, 0.0, f.f(x, np.where(small, 1.0, uu)) / np.where(small, 1.0, uu))
    rho = weight.value(x)
    return rho ** (2 - two_star(N)) * (ratio - a_minus / r2)


# ---------------------------------------------------------------------------
# weighted Sobolev constant


@dataclass(frozen=True)
class SHatEstimate:
    value: float
    per_level: tuple
    angular_2star: float
    sobolev: float


def _log_line(n=4001, lo=-40.0, hi=40.0):
    t = np.linspace(lo, hi, n)
    w = np.full(n, t[1] - t[0])
    w[0] = w[-1] = 0.5 * w[0]
    return np.exp(t), w * np.exp(t)


def s_hat_constant(coeff, levels=(0, 1, 2), weight=None):
    """Upper estimate of S(a_hat) over the test space {rho(x) v(|x|)}.

    Since Q(rho v) = int rho^2 |grad v|^2, a radial v turns the quotient into
    int s^{N-1+2 sig} v'^2 ds / (A int s^{N-1+2* sig} |v|^{2*} ds)^{2/2*} with
    A = int psi_hat^{2*}.  The profile v = (1+s^kappa)^{-nu/kappa} sum_j c_j
    (1+s^kappa)^{-j}, nu = N-2+2 sig, is minimized over kappa and c for
    j < n with n = 1, 2, 3 (the levels); the sequence is non-increasing and
    the last value is returned.  With a_hat = 0 the first level contains the
    Aubin-Talenti profile and returns the classical constant.
    """
    weight = build_weight(coeff) if weight is None else weight
    N = coeff.N
    p2 = two_star(N)
    sig = weight.sigma_hat
    rule = weight.rule
    A = float(rule.weights @ np.abs(weight.mode.value(rule.points)) ** p2)
    s, ws = _log_line()
    nu = N - 2 + 2 * sig
    wn = ws * s ** (N - 1 + 2 * sig)
    wd = ws * s ** (N - 1 + p2 * sig)

    def quotient(params, n):
        kappa = math.exp(params[0])
        c = np.concatenate([[1.0], params[1:n]])
        base = 1 + s ** kappa
        dbase = kappa * s ** (kappa - 1)
        j = np.arange(n)
        powers = base[:, None] ** (-(nu / kappa) - j[None, :])
        dpow = (-(nu / kappa) - j[None, :]) * base[:, None] ** (-(nu / kappa) - j[None, :] - 1) * dbase[:, None]
        v = powers @ c
        dv = dpow @ c
        num = wn @ (dv * dv)
        den = (A * (wd @ np.abs(v) ** p2)) ** (2 / p2)
        return num / den

    vals = []
    x0 = [math.log(2.0)]
    for lvl in levels:
        n = lvl + 1
        start = np.concatenate([x0, np.zeros(n - len(x0))]) if n > len(x0) else np.array(x0[:n])
        res = minimize(quotient, start, args=(n,), method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000 * n})
        x0 = list(res.x)
        vals.append(min(float(res.fun), vals[-1]) if vals else float(res.fun))
    if not np.all(np.isfinite(vals)):
        raise NonConvergence("weighted Sobolev quotient is not finite")
    return SHatEstimate(vals[-1], tuple(vals), A, sobolev_constant(N))


def _bumped_polys(N, n, seed, degree=2):
    exps = np.concatenate([exponents(N, d) for d in range(degree + 1)])
    return exps, np.random.default_rng(seed).standard_normal((len(exps), n))


def weighted_sobolev_check(weight, S_hat, n=100, seed=0, safety=0.9, n_phi=12, degree=6,
                           n_half=12):
    """int rho^2 |grad v|^2 >= safety S_hat (int rho^{2*} |v|^{2*})^{2/2*} for seeded v.

    v = (1-|x|^2)^2 P(x) with random quadratic P.  Returns (worst ratio rhs/lhs, passed).
    """
    N = weight.N
    p2 = two_star(N)
    exps, coefs = _bumped_polys(N, n, seed)
    ang = (angular_rule(weight.ahat, n_phi, degree) if not weight.ahat.is_zero
           else block_rule(N, np.arange(weight.coeff.k), n_phi=n_phi, degree=degree))
    s, ws = radial_rule(weight.R, n_half)
    psi = weight.mode.value(ang.points)
    lhs = np.zeros(n)
    rhs = np.zeros(n)
    for si, wi in zip(s, ws):
        x = si * ang.points
        q = 1 - (si / weight.R) ** 2
        eta, deta = q * q, -4 * si * q / weight.R ** 2
        P = eval_monomials(exps, x) @ coefs
        gP = np.matmul(grad_monomials(exps, x).transpose(0, 2, 1), coefs).transpose(0, 2, 1)
        v = eta * P
        gv = eta * gP + (deta * P)[..., None] * ang.points[:, None, :]
        rho = si ** weight.sigma_hat * psi
        jac = wi * si ** (N - 1)
        lhs += jac * ((ang.weights * rho ** 2) @ np.sum(gv * gv, axis=-1))
        rhs += jac * ((ang.weights * rho ** p2) @ np.abs(v) ** p2)
    if not (np.all(np.isfinite(lhs)) and np.all(np.isfinite(rhs))):
        raise QuadratureFailure("non-finite weighted Sobolev integrals")
    ratio = safety * S_hat * rhs ** (2 / p2) / lhs
    worst = float(np.max(ratio))
    return worst, bool(worst <= 1.0)


# ---------------------------------------------------------------------------
# quadratic-form transport


@dataclass(frozen=True)
class CompactBump:
    """v(x) = scale * (1 - |x-c|^2/w^2)^4 inside the ball B_w(c)."""

    center: np.ndarray
    width: float
    scale: float = 1.0

    def value(self, x):
        d2 = np.sum((np.asarray(x, float) - self.center) ** 2, axis=-1) / self.width ** 2
        return self.scale * np.where(d2 < 1, (1 - d2) ** 4, 0.0)

    def grad(self, x):
        dx = np.asarray(x, float) - self.center
        d2 = np.sum(dx * dx, axis=-1) / self.width ** 2
        g = np.where(d2 < 1, -8 * (1 - d2) ** 3 / self.width ** 2, 0.0) * self.scale
        return g[..., None] * dx


def transport_family(weight, n=5, seed=0):
    """Bumps whose support stays away from the origin and from the singular set."""
    N = weight.N
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        th = rng.standard_normal(N)
        th /= np.linalg.norm(th)
        dist = 1.0 if weight.ahat.is_zero else float(weight.ahat.dist_to_singular(th[None])[0])
        if dist < 0.2:
            continue
        r = rng.uniform(0.4, 0.8) * weight.R
        width = 0.5 * min(dist * r, r) * 0.9
        out.append(CompactBump(r * th, width, float(rng.uniform(0.5, 2.0))))
    return out


def _bump_rule(bump, N, n_r=14, degree=14):
    s, ws = np.polynomial.legendre.leggauss(n_r)
    s = 0.5 * (s + 1) * bump.width
    ws = 0.5 * ws * bump.width
    th, wa = sphere_rule(N, degree)
    pts = bump.center + (s[:, None, None] * th[None]).reshape(-1, N)
    w = ((ws * s ** (N - 1))[:, None] * wa[None]).ravel()
    return pts, w


def quadratic_form_transport(bumps, weight):
    """Max relative residual of int rho^2 |grad v|^2 = Q_{a_hat}(rho v) over the bumps."""
    worst = 0.0
    N = weight.N
    for b in bumps:
        x, w = _bump_rule(b, N)
        rho = weight.value(x)
        grho = weight.grad(x)
        v = b.value(x)
        gv = b.grad(x)
        lhs = w @ (rho ** 2 * np.sum(gv * gv, axis=-1))
        gu = grho * v[:, None] + rho[:, None] * gv
        V = weight.ahat.eval_V_unchecked(x) if not weight.ahat.is_zero else 0.0
        rhs = w @ (np.sum(gu * gu, axis=-1) - V * (rho * v) ** 2)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    return worst


# ---------------------------------------------------------------------------
# Brezis-Kato constants


def C_of_q(q):
    """C(q) = min{1/4, 4/(q+4)}."""
    return min(0.25, 4.0 / (q + 4.0))


def s_exponent(q, N):
    """s = q/(2*-2), the integrability exponent of V_+ used with q; s > N/2 iff q > 2*."""
    return q / (two_star(N) - 2.0)


@dataclass(frozen=True)
class BKConstants:
    C_q: float
    ell_q: float
    factor: float
    holder_alpha: float = float("nan")


def bk_constants(q, N, k, S_hat, d, Lambda_hat, C_h, eps, s, V_norm, dist=0.5):
    """C(q), ell_q and the bracket factor of the L^{2* q/2} estimate.

    Parameters
    ----------
    V_norm : float
        ||V_+|| in L^s(rho^{2*}).
    dist : float
        dist(Omega', boundary of Omega).
    """
    if q <= 2 or s <= N / 2:
        raise ValueError("need q > 2 and s > N/2")
    Cq = C_of_q(q)
    big = max(16.0, q + 4.0)
    first = ((big / S_hat) * V_norm ** (2 * s / N)) ** (N / (2 * s - N))
    comb = math.comb(N, k) ** (2 / eps) * (1 + math.comb(N - k, k)) ** (2 / eps)
    second = (d * C_h ** (2 / eps) * (2 / (k - 2)) ** (2 * (2 - eps) / eps) * comb
              / (1 - Lambda_hat) ** ((2 - eps) / eps) * big ** ((2 - eps) / eps))
    ell = max(first, second)
    bracket = 20 / Cq * d / dist ** 2 + 4 * (q - 2) * d / dist ** 2 + 4 * ell / Cq
    return BKConstants(Cq, ell, S_hat ** (-1 / q) * bracket ** (1 / q), holder_alpha(N))


# ---------------------------------------------------------------------------
# pointwise bound


@dataclass(frozen=True)
class PointwiseReport:
    radii: np.ndarray
    sup_ratio: np.ndarray  # shape (levels, shells)
    per_level: tuple
    variation: float
    passed: bool


def pointwise_bound_check(u, weight, R=1.0, levels=(4, 8), decades=4.0, shells=17,
                          tube=1e-8):
    """sup |u|/rho over shells from 1e-4 R to R, per angular refinement level.

    ``levels`` are sphere-rule degrees (or block-rule degrees when a_hat has
    a single term).  Nodes within ``tube`` of the singular set are skipped:
    the angular rules cluster nodes so close to it that the differences
    x_i - x_j lose every significant digit.  Passes
    when the overall sup changes by less than 10% between the last two levels.
    """
    N = weight.N
    radii = R * np.logspace(-decades, 0, shells)
    table = []
    for deg in levels:
        rule = (angular_rule(weight.ahat, n_phi=2 * deg, degree=deg) if not weight.ahat.is_zero
                else block_rule(N, np.arange(weight.coeff.k), n_phi=2 * deg, degree=deg))
        th = rule.points
        if tube > 0 and not weight.coeff.is_zero:
            th = th[weight.coeff.dist_to_singular(th) > tube]
        psi = weight.mode.value(th)
        row = []
        for r in radii:
            row.append(float(np.max(np.abs(u.value(r * th)) / (r ** weight.sigma_hat * psi))))
        table.append(row)
    table = np.array(table)
    sups = tuple(float(np.max(t)) for t in table)
    var = abs(sups[-1] - sups[-2]) / max(sups[-1], 1e-300) if len(sups) > 1 else 0.0
    return PointwiseReport(radii, table, sups, var, bool(var < 0.1))
