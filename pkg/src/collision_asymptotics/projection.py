"""Stereographic reduction of the angular eigenproblem to a Schrodinger problem on R^{N-1}.

With Pi the projection from the north pole e_N and phi(y) = 4/(|y|^2+1)^2,
an eigenfunction psi of L_a becomes psi~ = phi^{(N-3)/4} psi o Pi^{-1}, which solves

    -Lap psi~ - b(y/|y|)/|y|^2 psi~ = h~ psi~    on R^{N-1}.

b keeps the terms of a that avoid the index N; every term containing N turns
into a bounded piece of h~.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ConfigInvalid, DepthExceeded, InterpolationGap, KEqualsN, NorthPole)
from .potential import AngularCoefficient
from .sphere import block_rule, radial_rule, sphere_rule
from .spectrum import assemble_spectrum, gamma_exponent, lambda_of


def stereographic(theta):
    """Pi(theta) = theta' / (1 - theta_N) from the north pole."""
    theta = np.asarray(theta, float)
    den = 1.0 - theta[..., -1]
    if np.any(np.abs(den) < 1e-14):
        raise NorthPole("stereographic projection is undefined at e_N")
    return theta[..., :-1] / den[..., None]


def stereographic_inv(y):
    """Pi^{-1}(y) = (2y, |y|^2 - 1) / (|y|^2 + 1)."""
    y = np.asarray(y, float)
    r2 = np.sum(y * y, axis=-1)
    den = r2 + 1.0
    return np.concatenate([2 * y / den[..., None], ((r2 - 1) / den)[..., None]], axis=-1)


def conformal_factor(y):
    """phi(y) = 4 / (|y|^2 + 1)^2."""
    y = np.asarray(y, float)
    return 4.0 / (np.sum(y * y, axis=-1) + 1.0) ** 2


def _conformal_constant(N):
    return (N - 3) * (N - 1) / 4.0


@dataclass(frozen=True)
class ProjectedProblem:
    """b on S^{N-2}, the bounded remainder h~ and the source eigenvalue."""

    source: AngularCoefficient
    b: AngularCoefficient
    mu: float
    moved_cyl: tuple  # cylindrical terms containing N
    moved_pairs: tuple  # pair terms with N in one block

    @property
    def N(self):
        return self.source.N

    def phi(self, y):
        return conformal_factor(y)

    def moved_part(self, y):
        """Bounded terms of phi(y) a(Pi^{-1}(y)) coming from index sets that contain N."""
        y = np.asarray(y, float)
        r2 = np.sum(y * y, axis=-1)
        out = np.zeros(y.shape[:-1])
        for t in self.moved_cyl:
            Jp = t.idx[:-1]
            out = out + 4 * t.alpha / (4 * np.sum(y[..., Jp] ** 2, axis=-1) + (r2 - 1) ** 2)
        for t, n_in_first in self.moved_pairs:
            i1, i2 = t.idx1, t.idx2
            d2 = np.sum((y[..., i1[:-1]] - y[..., i2[:-1]]) ** 2, axis=-1)
            other = y[..., i2[-1]] if n_in_first else y[..., i1[-1]]
            out = out + 4 * t.alpha / (4 * d2 + (r2 - 1 - 2 * other) ** 2)
        return out

    def htilde(self, y):
        """h~(y) = phi(y)((N-3)(N-1)/4 + mu) + bounded terms."""
        return self.phi(y) * (_conformal_constant(self.N) + self.mu) + self.moved_part(y)

    def b_over_r2(self, y):
        """b(y/|y|)/|y|^2 evaluated directly in Cartesian form."""
        y = np.asarray(y, float)
        if self.b.is_zero:
            return np.zeros(y.shape[:-1])
        return self.b.eval_V_unchecked(y)

    def identity_residual(self, y):
        """Max relative residual of phi a(Pi^{-1} y) = b/|y|^2 + h~ - phi((N-3)(N-1)/4 + mu)."""
        y = np.asarray(y, float)
        lhs = self.phi(y) * self.source.eval_a(stereographic_inv(y), cutoff=0.0)
        rhs = self.b_over_r2(y) + self.htilde(y) - self.phi(y) * (_conformal_constant(self.N) + self.mu)
        return float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), 1e-300)))


def project_potential(coeff: AngularCoefficient, mu: float) -> ProjectedProblem:
    """Split a into b (terms avoiding index N) and the bounded part of h~."""
    N, k = coeff.N, coeff.k
    if k >= N:
        raise KEqualsN("k = N: the coefficient is constant and eigenfunctions are smooth")
    if k < 3:
        raise ConfigInvalid("projection needs 3 <= k <= N-1")
    keep_cyl, keep_pairs, moved_cyl, moved_pairs = [], [], [], []
    for t in coeff.cyl:
        (moved_cyl if N in t.J else keep_cyl).append(t)
    for t in coeff.pairs:
        if N in t.J1:
            moved_pairs.append((t, True))
        elif N in t.J2:
            moved_pairs.append((t, False))
        else:
            keep_pairs.append(t)
    b = AngularCoefficient(N - 1, k, tuple(keep_cyl), tuple(keep_pairs), allow_zero=True)
    return ProjectedProblem(coeff, b, float(mu), tuple(moved_cyl), tuple(moved_pairs))


def project_eigenfunction(psi, y):
    """psi~(y) = phi(y)^{(N-3)/4} psi(Pi^{-1}(y)) for an angular function psi."""
    y = np.asarray(y, float)
    N = y.shape[-1] + 1
    vals = psi.value(stereographic_inv(y))
    if not np.all(np.isfinite(vals)):
        raise InterpolationGap("eigenfunction not finite at some projected points")
    return conformal_factor(y) ** ((N - 3) / 4.0) * vals


def projected_pde_residual(problem: ProjectedProblem, psi, y, step):
    """Weighted L^2 relative residual of -Lap psi~ - b psi~/|y|^2 - h~ psi~ on the points y.

    The Laplacian uses second-order central differences with the given step;
    the weight is phi(y), the Jacobian of the projection.
    """
    y = np.asarray(y, float)
    d = y.shape[-1]
    center = project_eigenfunction(psi, y)
    lap = -2 * d * center
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        lap = lap + project_eigenfunction(psi, y + e) + project_eigenfunction(psi, y - e)
    lap /= step * step
    pot = problem.b_over_r2(y) + problem.htilde(y)
    res = -lap - pot * center
    w = conformal_factor(y)
    scale = np.sqrt(np.sum(w * lap * lap)) + np.sqrt(np.sum(w * (pot * center) ** 2))
    return float(np.sqrt(np.sum(w * res * res)) / scale)


def lambda_b_check(coeff: AngularCoefficient, **kw):
    """Lambda(b) of the projected coefficient and whether it is below 1."""
    b = project_potential(coeff, 0.0).b
    lam = 0.0 if b.nonpositive else lambda_of(b, **kw)
    return lam, bool(lam < 1.0)


@dataclass(frozen=True)
class ReductionLevel:
    problem: ProjectedProblem
    mu_b: float
    gamma_tilde: float


def iterate_reduction(coeff: AngularCoefficient, mu: float, depth: int):
    """Project repeatedly, threading the ground eigenvalue of each projected b.

    The exponent at each level is gamma~ = -(N'-2)/2 + sqrt(((N'-2)/2)^2 + mu_1(b))
    in the projected dimension N'.  Stops early once b has no singular set
    left on the sphere.
    """
    if depth > coeff.N - coeff.k:
        raise DepthExceeded(f"depth {depth} exceeds N - k = {coeff.N - coeff.k}")
    levels = []
    cur, cur_mu = coeff, float(mu)
    for _ in range(depth):
        prob = project_potential(cur, cur_mu)
        b = prob.b
        mu_b = 0.0 if b.is_zero else assemble_spectrum(b, count=1).mu1
        levels.append(ReductionLevel(prob, mu_b, gamma_exponent(b.N, mu_b)[0]))
        if b.is_zero or b.N == b.k:
            break
        cur, cur_mu = b, mu_b
    return levels


# ---------------------------------------------------------------------------
# quadratic-form transport


@dataclass(frozen=True)
class GaussianBump:
    """v(y) = exp(-|y - c|^2 / (2 width^2)) with its gradient."""

    center: np.ndarray
    width: float = 1.0

    def value(self, y):
        d = np.asarray(y, float) - self.center
        return np.exp(-np.sum(d * d, axis=-1) / (2 * self.width ** 2))

    def grad(self, y):
        d = np.asarray(y, float) - self.center
        return -(self.value(y) / self.width ** 2)[..., None] * d


def _flat_rules(d, n_half=80, degree=24, y_max=12.0):
    s, ws = radial_rule(y_max, n_half)
    pts, wa = sphere_rule(d, degree)
    return s, ws, pts, wa


def _sphere_side_rule(N, n_phi=120, degree=24):
    """Rule on S^{N-1} graded toward both poles +-e_N."""
    return block_rule(N, np.arange(N - 1), n_phi=n_phi, degree=degree, kind="de")


def transport_check(v1, v2, N, y_max=12.0):
    """Both transport identities for two bumps on R^{N-1}.

    Returns
    -------
    grad_rel, mass_rel : float
        Relative mismatches of int grad v1 . grad v2 = int_S (grad_S w1 . grad_S w2 + c w1 w2)
        and int phi v1 v2 = int_S w1 w2.
    """
    d = N - 1
    s, ws, pts, wa = _flat_rules(d, y_max=y_max)
    grad_flat = mass_flat = 0.0
    for si, wi in zip(s, ws):
        y = si * pts
        jac = wi * si ** (d - 1)
        grad_flat += jac * float(wa @ np.sum(v1.grad(y) * v2.grad(y), axis=-1))
        mass_flat += jac * float(wa @ (conformal_factor(y) * v1.value(y) * v2.value(y)))
    rule = _sphere_side_rule(N)
    theta = rule.points
    away = theta[:, -1] < 1 - 1e-12  # the north pole carries no mass for decaying bumps
    theta, w = theta[away], rule.weights[away]
    c = _conformal_constant(N)
    w1, g1 = _pullback_with_grad(v1, theta, N)
    w2, g2 = _pullback_with_grad(v2, theta, N)
    grad_sph = float(w @ (np.sum(g1 * g2, axis=-1) + c * w1 * w2))
    mass_sph = float(w @ (w1 * w2))
    return (abs(grad_flat - grad_sph) / max(abs(grad_flat), 1e-300),
            abs(mass_flat - mass_sph) / max(abs(mass_flat), 1e-300))


def _pullback_with_grad(v, theta, N):
    """Values and tangential gradients of w = phi^{-(N-3)/4} v o Pi at unit theta.

    Uses the chain rule through y = Pi(theta): with t = 1 - theta_N,
    dy_i/dtheta_j = delta_ij / t (j < N) and dy_i/dtheta_N = y_i / t.
    """
    y = stereographic(theta)
    t = 1.0 - theta[:, -1]
    r2 = np.sum(y * y, axis=-1)
    q = (N - 3) / 4.0
    # phi^{-q} = (r2 + 1)^{2q} / 4^q
    pref = (r2 + 1) ** (2 * q) / 4.0 ** q
    dpref = (2 * q * (r2 + 1) ** (2 * q - 1) / 4.0 ** q)[:, None] * 2 * y
    vv = v.value(y)
    gy = pref[:, None] * v.grad(y) + dpref * vv[:, None]
    gtheta = np.empty_like(theta)
    gtheta[:, :-1] = gy / t[:, None]
    gtheta[:, -1] = np.sum(gy * y, axis=-1) / t
    # project onto the tangent space
    gtheta -= np.sum(gtheta * theta, axis=-1)[:, None] * theta
    return pref * vv, gtheta
