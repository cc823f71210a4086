"""Blow-up profile |x|^gamma sum beta_i psi_i, rescaled traces and convergence diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDenominator, EigenspaceUnresolved, ZeroBoundaryNorm
from .fields import Field, ModalField, PowerProfile
from .potential import zero_f, zero_h
from .radial import PER_DECADE, cumulative_log_integral, log_grid, zeta_i
from .sphere import angular_rule, radial_rule
from .spectrum import gamma_exponent

GAMMA_TOL = 1e-4


def resolve_eigenspace(decomposition, gamma, tol=GAMMA_TOL):
    """Indices of the eigenvalue cluster whose sigma+ equals gamma within tol."""
    hits = []
    for mu, start, mult in decomposition.clusters:
        if abs(gamma_exponent(decomposition.N, mu)[0] - gamma) <= tol:
            hits.append(list(range(start, start + mult)))
    if len(hits) != 1:
        raise EigenspaceUnresolved(
            f"{len(hits)} eigenvalue clusters match gamma={gamma:.8g} within {tol}")
    return hits[0]


@dataclass(frozen=True)
class AsymptoticProfile:
    """The limit profile |x|^gamma sum_i beta_i psi_i(x/|x|) on one eigenspace."""

    gamma: float
    indices: tuple
    beta: tuple
    R_used: float
    modes: tuple

    def __post_init__(self):
        if not np.any(np.abs(self.beta) > 0):
            raise EigenspaceUnresolved("beta vanishes on the matched eigenspace")

    @property
    def m(self):
        return len(self.indices)

    @property
    def beta_norm2(self):
        return float(np.sum(np.square(self.beta)))

    def field(self):
        N = self.modes[0].N
        return ModalField(N, tuple((PowerProfile(b, self.gamma), md)
                                   for b, md in zip(self.beta, self.modes)))

    def value(self, x):
        return self.field().value(x)


def _cross_gram(modes_a, modes_b, rule):
    th = rule.points
    A = np.stack([m.value(th) for m in modes_a], axis=1)
    B = np.stack([m.value(th) for m in modes_b], axis=1)
    return (A.T * rule.weights) @ B


def beta_coefficients(u, h, f, decomposition, gamma, R, coeff=None, rule=None,
                      decades=6.0, per_decade=PER_DECADE, indices=None):
    """beta_i = R^-g phi_i(R) + 1/(2g+N-2) int_0^R zeta_i(s) (s^{1-g} - s^{g+N-1} R^{-(2g+N-2)}) ds.

    zeta_i(s) is the angular coefficient of h u + f(x,u) at radius s.  The
    radial integral runs on a log grid with a power-law tail below its first
    node.  For modal fields with radial h and f = 0 the angular coefficients
    come from a cross Gram matrix instead of pointwise evaluation.
    """
    h = zero_h() if h is None else h
    f = zero_f() if f is None else f
    coeff = decomposition.coeff if coeff is None else coeff
    rule = angular_rule(coeff) if rule is None else rule
    N = u.N
    denom = 2 * gamma + N - 2
    if denom < 1e-10:
        raise DegenerateDenominator(f"2 gamma + N - 2 = {denom:.3g}")
    idx = resolve_eigenspace(decomposition, gamma) if indices is None else list(indices)
    psis = [decomposition.modes[i] for i in idx]
    s = log_grid(R, decades, per_decade)
    modal = isinstance(u, ModalField) and f.is_zero and (h.is_zero or h.radial is not None)
    if modal:
        C = _cross_gram(psis, [m for _, m in u.terms], rule)
        phi_R = C @ np.array([float(p(R)) for p, _ in u.terms])
    else:
        from .radial import fourier_coefficient
        phi_R = np.array([fourier_coefficient(u, p, R, rule) for p in psis])
    out = []
    for j, psi in enumerate(psis):
        if h.is_zero and f.is_zero:
            out.append(R ** (-gamma) * phi_R[j])
            continue
        if modal:
            e1 = np.zeros((len(s), N))
            e1[:, 0] = s
            phis = np.stack([p(s) for p, _ in u.terms], axis=1)
            z = h(e1) * (phis @ C[j])
        else:
            z = np.array([zeta_i(u, h, f, psi, si, rule) for si in s])
        kern = s ** (1 - gamma) - s ** (gamma + N - 1) * R ** (-denom)
        integral = cumulative_log_integral(s, z * kern, "beta integrand")[-1]
        out.append(R ** (-gamma) * phi_R[j] + integral / denom)
    return idx, np.array(out)


def asymptotic_profile(u, h, f, decomposition, gamma, R, **kw):
    idx, beta = beta_coefficients(u, h, f, decomposition, gamma, R, **kw)
    modes = tuple(decomposition.modes[i] for i in idx)
    return AsymptoticProfile(float(gamma), tuple(idx), tuple(float(b) for b in beta), float(R), modes)


@dataclass(frozen=True, eq=False)
class RescaledField(Field):
    """w(x) = scale * u(lam x)."""

    N: int
    base: Field
    lam: float
    scale: float

    def value(self, x):
        return self.scale * self.base.value(self.lam * np.asarray(x, float))

    def grad(self, x):
        return self.scale * self.lam * self.base.grad(self.lam * np.asarray(x, float))


def rescaled_trace(u, lam, H_lam=None, coeff=None, rule=None, tol=1e-8):
    """w^lam(x) = u(lam x)/sqrt(H(lam)), normalized on the unit sphere."""
    from .almgren import H_of
    if rule is None and coeff is not None:
        rule = angular_rule(coeff)
    H = H_of(u, lam, coeff, rule) if H_lam is None else float(H_lam)
    if H < 1e-300:
        raise ZeroBoundaryNorm(f"H({lam}) = {H:.3g}")
    w = RescaledField(u.N, u, float(lam), 1.0 / math.sqrt(H))
    norm = H_of(w, 1.0, coeff, rule)
    if abs(norm - 1.0) > tol:
        raise ZeroBoundaryNorm(f"unit-sphere normalization off by {abs(norm - 1):.3g}")
    return w


# ---------------------------------------------------------------------------
# H^1(B_1) distances


def _modal_h1(terms, coeff, rule, decades=8.0, per_decade=200):
    """H^1(B_1) norm of sum_j P_j(s) psi_j(theta) from the angular Gram matrices."""
    th = rule.points
    w = rule.weights
    V = np.stack([m.value(th) for _, m in terms], axis=1)
    G = np.stack([m.grad(th) for _, m in terms], axis=1)
    M = (V.T * w) @ V
    T = np.einsum("p,pid,pjd->ij", w, G, G)
    s = log_grid(1.0, decades, per_decade)
    P = np.stack([p(s) for p, _ in terms], axis=1)
    dP = np.stack([p.deriv(s) for p, _ in terms], axis=1)
    dens = (np.einsum("ri,ij,rj->r", dP, M, dP) + np.einsum("ri,ij,rj->r", P, T, P) / s ** 2
            + np.einsum("ri,ij,rj->r", P, M, P))
    dens = np.maximum(dens, 0.0)
    N = terms[0][1].N
    total = cumulative_log_integral(s, s ** (N - 1) * dens, "H1 density")[-1]
    return math.sqrt(max(total, 0.0))


@dataclass(frozen=True)
class _Rescaled:
    """Radial profile s -> scale * P(lam s)."""

    base: object
    lam: float
    scale: float

    def __call__(self, s):
        return self.scale * self.base(self.lam * np.asarray(s, float))

    def deriv(self, s):
        return self.scale * self.lam * self.base.deriv(self.lam * np.asarray(s, float))


def _negate(p):
    return _Rescaled(p, 1.0, -1.0)


@dataclass(frozen=True)
class _SumProfile:
    parts: tuple

    def __call__(self, s):
        return sum(p(s) for p in self.parts)

    def deriv(self, s):
        return sum(p.deriv(s) for p in self.parts)


def _merge_terms(terms):
    """Combine profiles that share an angular function so cancellations happen pointwise."""
    order, groups = [], {}
    for p, m in terms:
        if id(m) not in groups:
            order.append(m)
            groups[id(m)] = []
        groups[id(m)].append(p)
    return [(_SumProfile(tuple(groups[id(m)])), m) for m in order]


def _generic_h1(field_, coeff, rule, n_half=40):
    s, ws = radial_rule(1.0, n_half)
    th, wa = rule.points, rule.weights
    total = 0.0
    for si, wi in zip(s, ws):
        x = si * th
        v = field_.value(x)
        g = field_.grad(x)
        total += wi * si ** (field_.N - 1) * float(wa @ (v * v + np.sum(g * g, axis=-1)))
    return math.sqrt(total)


@dataclass(frozen=True, eq=False)
class _DifferenceField(Field):
    N: int
    a: Field
    b: Field

    def value(self, x):
        return self.a.value(x) - self.b.value(x)

    def grad(self, x):
        return self.a.grad(x) - self.b.grad(x)


def _plain_rule(N):
    from .almgren import _plain_rule as plain
    return plain(N)


def h1_distance(u, v, coeff=None, rule=None):
    """||u - v||_{H^1(B_1)}; modal when both are modal fields."""
    if rule is None:
        rule = angular_rule(coeff) if coeff is not None else _plain_rule(u.N)
    if isinstance(u, ModalField) and isinstance(v, ModalField):
        terms = _merge_terms(list(u.terms) + [(_negate(p), m) for p, m in v.terms])
        return _modal_h1(terms, coeff, rule)
    return _generic_h1(_DifferenceField(u.N, u, v), coeff, rule)


def lambda_schedule(R=1.0, lam_max=1e-1, lam_min=1e-4, ratio=0.5):
    """Geometric lambda values from lam_max R down to lam_min R."""
    n = int(math.floor(math.log(lam_min / lam_max) / math.log(ratio) + 1e-9)) + 1
    return R * lam_max * ratio ** np.arange(n)


@dataclass(frozen=True)
class ConvergenceReport:
    lambdas: np.ndarray
    errors: np.ndarray
    fitted_rate: float
    monotone_tail: bool

    @property
    def halving_factors(self):
        return self.errors[:-1] / self.errors[1:]


def convergence_check(u, profile: AsymptoticProfile, lambdas=None, coeff=None, rule=None,
                      gamma=None):
    """H^1(B_1) errors of lam^{-gamma} u(lam .) against the profile, per lambda.

    ``gamma`` overrides the profile exponent in the rescaling (negative controls).
    """
    if rule is None:
        rule = angular_rule(coeff) if coeff is not None else _plain_rule(u.N)
    lams = lambda_schedule() if lambdas is None else np.asarray(lambdas, float)
    g = profile.gamma if gamma is None else gamma
    target = profile.field()
    errs = []
    for lam in lams:
        if isinstance(u, ModalField):
            scaled = ModalField(u.N, tuple((_Rescaled(p, lam, lam ** (-g)), m) for p, m in u.terms))
        else:
            scaled = RescaledField(u.N, u, lam, lam ** (-g))
        errs.append(h1_distance(scaled, target, coeff, rule))
    errs = np.array(errs)
    pos = errs > 0
    rate = (float(np.polyfit(np.log(lams[pos]), np.log(errs[pos]), 1)[0])
            if np.count_nonzero(pos) >= 2 else float("nan"))
    tail = errs[-3:]
    mono = bool(np.all(np.diff(tail) <= 0))
    return ConvergenceReport(lams, errs, rate, mono)
