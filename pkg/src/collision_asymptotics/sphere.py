"""Sphere and ball quadrature, monomial integrals and harmonic polynomials.

Integrals over S^{N-1} are done in block coordinates adapted to one singular
set: for a block J of size k and its complement R of size m = N - k,

    z_J = sin(phi) * w1,   z_R = cos(phi) * w2,   phi in (0, pi/2),

with w1 on S^{k-1}, w2 on S^{m-1} and surface measure
sin^{k-1} cos^{m-1} dphi dS(w1) dS(w2).  The singular set |z_J| = 0 is the
endpoint phi = 0, so 1-D rules that resolve endpoint power singularities give
accurate integrals of the singular integrands met here.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg
from scipy.special import gammaln, roots_jacobi


def sphere_area(N):
    """omega_{N-1} = |S^{N-1}| = 2 pi^{N/2} / Gamma(N/2)."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


# ---------------------------------------------------------------------------
# monomial integrals


def monomial_integral(e):
    """Integral of x^e over S^{d-1}, d = len(e); zero unless every exponent is even."""
    e = np.asarray(e)
    if np.any(e % 2):
        return 0.0
    h = (e + 1) / 2.0
    return 2.0 * math.exp(np.sum(gammaln(h)) - gammaln(np.sum(h)))


def monomial_integral_block(e, J):
    """Integral of x^e / |x_J|^2 over S^{d-1}; closed form via Beta integrals.

    With h_i = (e_i+1)/2 the value is 2 prod Gamma(h_i) / Gamma(sum h - 1) / (sum_J h - 1).
    """
    e = np.asarray(e)
    if np.any(e % 2):
        return 0.0
    h = (e + 1) / 2.0
    hJ = np.sum(h[np.asarray(J)])
    return 2.0 * math.exp(np.sum(gammaln(h)) - gammaln(np.sum(h) - 1.0)) / (hJ - 1.0)


def exponents(d, degree):
    """All exponent vectors of total degree `degree` in d variables, lexicographic."""
    out = []
    for combo in itertools.combinations_with_replacement(range(d), degree):
        e = [0] * d
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return np.array(sorted(set(out), reverse=True), dtype=int).reshape(-1, d)


def _power_table(y, top):
    """y_i^e for e = 0..top by repeated multiplication, shape (..., d, top+1)."""
    out = np.empty(y.shape + (top + 1,))
    out[..., 0] = 1.0
    for e in range(1, top + 1):
        out[..., e] = out[..., e - 1] * y
    return out


def eval_monomials(exps, y):
    """Values y^e for each row e of exps; y has shape (..., d) -> (..., M)."""
    y = np.asarray(y, dtype=float)
    exps = np.asarray(exps)
    if exps.size == 0 or not exps.any():
        return np.ones(y.shape[:-1] + (exps.shape[0],))
    pw = _power_table(y, int(exps.max()))
    out = np.ones(y.shape[:-1] + (exps.shape[0],))
    for i in range(exps.shape[1]):
        col = exps[:, i]
        if np.any(col):
            out = out * pw[..., i, col]
    return out


def grad_monomials(exps, y):
    """Gradients of y^e, shape (..., M, d)."""
    y = np.asarray(y, dtype=float)
    exps = np.asarray(exps)
    d = exps.shape[1]
    out = np.zeros(y.shape[:-1] + (exps.shape[0], d))
    if exps.size == 0 or not exps.any():
        return out
    pw = _power_table(y, int(exps.max()))
    factors = [pw[..., i, exps[:, i]] for i in range(d)]
    for i in range(d):
        col = exps[:, i]
        if not np.any(col):
            continue
        g = col * pw[..., i, np.maximum(col - 1, 0)]
        for j in range(d):
            if j != i and np.any(exps[:, j]):
                g = g * factors[j]
        out[..., i] = g
    return out


# ---------------------------------------------------------------------------
# harmonic polynomials


def harmonic_dimension(d, l):
    """Dimension of degree-l spherical harmonics on S^{d-1}."""
    if d == 1:
        return 1 if l in (0, 1) else 0
    return math.comb(l + d - 1, d - 1) - (math.comb(l + d - 3, d - 1) if l >= 2 else 0)


@dataclass(frozen=True)
class HarmonicBasis:
    """Orthonormal basis of homogeneous harmonic polynomials of degree l in d variables.

    coefs[:, j] holds the monomial coefficients (rows of exps) of the j-th
    basis polynomial, normalized in L^2(S^{d-1}).
    """

    d: int
    l: int
    exps: np.ndarray
    coefs: np.ndarray

    @property
    def size(self):
        return self.coefs.shape[1]

    def value(self, y):
        return eval_monomials(self.exps, y) @ self.coefs

    def grad(self, y):
        return np.einsum("...md,mj->...jd", grad_monomials(self.exps, y), self.coefs)


@lru_cache(maxsize=None)
def harmonic_basis(d, l):
    exps = exponents(d, l)
    if harmonic_dimension(d, l) == 0:
        return HarmonicBasis(d, l, exps, np.zeros((len(exps), 0)))
    if l < 2:
        null = np.eye(len(exps))
    else:
        low = exponents(d, l - 2)
        pos = {tuple(e): i for i, e in enumerate(low)}
        lap = np.zeros((len(low), len(exps)))
        for j, e in enumerate(exps):
            for i in range(d):
                if e[i] >= 2:
                    t = list(e)
                    t[i] -= 2
                    lap[pos[tuple(t)], j] += e[i] * (e[i] - 1)
        null = linalg.null_space(lap)
    gram_mono = np.array([[monomial_integral(a + b) for b in exps] for a in exps])
    g = null.T @ gram_mono @ null
    w, v = np.linalg.eigh(g)
    coefs = null @ v / np.sqrt(w)
    # deterministic sign: first nonzero coefficient positive
    for j in range(coefs.shape[1]):
        i = np.flatnonzero(np.abs(coefs[:, j]) > 1e-12)[0]
        if coefs[i, j] < 0:
            coefs[:, j] *= -1
    return HarmonicBasis(d, l, exps, coefs)


# ---------------------------------------------------------------------------
# one-dimensional rules


def gauss_jacobi_phi(n, k, m, sing=0.0):
    """Rule for int_0^{pi/2} G(phi) sin^{k-1} cos^{m-1} dphi with G ~ sin^sing * smooth.

    Gauss-Jacobi in x = cos(2 phi) absorbs the sin^{k-2+sing} cos^{m-2}
    factor, so the rule is exact when G / sin^sing is a polynomial in x of
    degree < 2n.

    Returns
    -------
    sin, cos, weight : ndarray
    """
    a = (k - 2 + sing) / 2.0
    b = (m - 2) / 2.0
    x, w = roots_jacobi(n, a, b)
    s = np.sqrt((1 - x) / 2)
    c = np.sqrt((1 + x) / 2)
    w = w * 2.0 ** (-(a + b)) / 4.0 / s ** sing
    return s, c, w


def tanh_sinh(n_half, t_max=4.6):
    """Double-exponential rule on (0, 1) returning distances to both endpoints.

    Returns
    -------
    left, right, weight : ndarray
        Node distance from 0, from 1, and weight.
    """
    h = t_max / n_half
    t = np.arange(-n_half, n_half + 1) * h
    u = 0.5 * math.pi * np.sinh(t)
    e = np.exp(-2 * np.abs(u))
    small = e / (1 + e)  # distance to the nearer endpoint
    big = 1 / (1 + e)
    left = np.where(t < 0, small, big)
    right = np.where(t < 0, big, small)
    w = h * 0.5 * math.pi * np.cosh(t) / np.cosh(u) ** 2 / 2.0
    return left, right, w


def tanh_sinh_phi(n_half=60, k=3, m=2, t_max=4.6):
    """Rule for int_0^{pi/2} G(phi) sin^{k-1} cos^{m-1} dphi, any endpoint singularity."""
    left, right, w = tanh_sinh(n_half, t_max)
    q = 0.5 * math.pi
    s = np.where(left < 0.5, np.sin(q * left), np.cos(q * right))
    c = np.where(left < 0.5, np.cos(q * left), np.sin(q * right))
    w = w * q * s ** (k - 1) * c ** (m - 1)
    return s, c, w


def radial_rule(r, n_half=60, t_max=4.6, r_inner=0.0):
    """Double-exponential rule on (r_inner, r) for the Lebesgue measure ds."""
    left, right, w = tanh_sinh(n_half, t_max)
    L = r - r_inner
    s = np.where(left < 0.5, r_inner + L * left, r - L * right)
    return s, w * L


# ---------------------------------------------------------------------------
# sphere rules


@lru_cache(maxsize=None)
def sphere_rule(d, degree):
    """Product Gauss rule on S^{d-1} exact for polynomials of the given degree.

    No node has a zero coordinate, so folding by sign symmetry is safe.
    """
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        n = 2 * (degree // 2 + 1)
        if n % 4 == 0:
            n += 2
        ang = (np.arange(n) + 0.5) * 2 * math.pi / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=1), np.full(n, 2 * math.pi / n)
    sub_p, sub_w = sphere_rule(d - 1, degree)
    n = degree // 2 + 1
    n += n % 2
    a = (d - 3) / 2.0
    u, wu = roots_jacobi(n, a, a)
    scale = np.sqrt(1 - u * u)
    pts = np.concatenate([np.column_stack([sub_p * sc, np.full(len(sub_p), ui)])
                          for ui, sc in zip(u, scale)])
    wts = np.concatenate([sub_w * wi for wi in wu])
    return pts, wts


@dataclass(frozen=True)
class BlockRule:
    """Quadrature on S^{N-1} adapted to the block J in the frame z = Q theta.

    Attributes
    ----------
    points : ndarray (M, N)
        Unit vectors theta in the original frame.
    weights : ndarray (M,)
    sin_phi : ndarray (M,)
        |z_J| at each node, exact even when tiny.
    """

    points: np.ndarray
    weights: np.ndarray
    sin_phi: np.ndarray
    adapted: bool = False

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


def block_rule(N, J, Q=None, n_phi=60, degree=6, kind="de", sing=0.0, t_max=4.6):
    """Build a BlockRule.

    Parameters
    ----------
    kind : {"de", "jacobi"}
        "de" uses a double-exponential phi rule with 2*n_phi+1 nodes; "jacobi"
        uses n_phi Gauss-Jacobi nodes with the endpoint exponent `sing`.
    """
    J = np.asarray(J)
    k = len(J)
    R = np.setdiff1d(np.arange(N), J)
    m = len(R)
    p1, w1 = sphere_rule(k, degree)
    if m == 0:
        z = p1
        w = w1
        s = np.ones(len(w))
        pts = np.empty_like(z)
        pts[:, J] = z
    else:
        p2, w2 = sphere_rule(m, degree)
        if kind == "de":
            s, c, wp = tanh_sinh_phi(n_phi, k, m, t_max)
        else:
            s, c, wp = gauss_jacobi_phi(n_phi, k, m, sing)
        # order (phi, w1, w2)
        nph, n1, n2 = len(s), len(w1), len(w2)
        pts = np.empty((nph, n1, n2, N))
        pts[..., J] = s[:, None, None, None] * p1[None, :, None, :]
        pts[..., R] = c[:, None, None, None] * p2[None, None, :, :]
        w = (wp[:, None, None] * w1[None, :, None] * w2[None, None, :]).ravel()
        s = np.broadcast_to(s[:, None, None], (nph, n1, n2)).ravel()
        pts = pts.reshape(-1, N)
    if Q is not None:
        pts = pts @ np.asarray(Q)  # theta = Q^T z
    return BlockRule(pts, w, s, adapted=True)


def rule_for(coeff, **kw):
    """Block rule adapted to the first active term of a coefficient (or a plain block)."""
    terms = coeff.active_terms
    if not terms:
        return block_rule(coeff.N, np.arange(coeff.k), **kw)
    if len(terms) == 1:
        J, _, Q = coeff.single_term()
        return block_rule(coeff.N, J, Q, **kw)
    raise ValueError("rule_for needs at most one active term; use per-term rules")


def angular_rule(coeff, n_phi=40, degree=8):
    """Default rule on S^{N-1} for integrands singular on the coefficient's singular set.

    Zero coefficients get a product Gauss rule; single-term coefficients a
    double-exponential block rule; several terms a high-degree product rule,
    which resolves each singular set only algebraically.
    """
    terms = coeff.active_terms
    if len(terms) == 1:
        return rule_for(coeff, n_phi=n_phi, degree=degree, kind="de")
    deg = degree if not terms else 4 * degree
    pts, w = sphere_rule(coeff.N, deg)
    return BlockRule(pts, w, np.ones(len(w)))


def coefficient_on_rule(coeff, rule):
    """a(theta) at the rule nodes.

    On a rule adapted to the single active term the exact node distance
    |z_J| = sin(phi) is used, so nodes extremely close to the singular set
    stay finite and accurate.
    """
    if coeff.is_zero:
        return np.zeros(len(rule.weights))
    if rule.adapted and len(coeff.active_terms) == 1:
        _, alpha, _ = coeff.single_term()
        return alpha / rule.sin_phi ** 2
    return coeff.eval_a(rule.points, cutoff=0.0)
