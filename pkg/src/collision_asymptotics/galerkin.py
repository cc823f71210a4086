"""Rayleigh-Ritz for L_a on polynomials of degree <= L restricted to S^{N-1}.

Restricted to the sphere, homogeneous monomials of degree L and L-1 span all
polynomials of degree <= L.  The coordinate sign flips that leave a invariant
(every flip for cylindrical terms, paired flips for pair terms) split that
space into blocks by parity character; each block holds monomials of a single
degree, which keeps the mass matrices well conditioned.

Matrix elements of the sphere mass, the Laplace-Beltrami form and every
cylindrical term are closed-form Gamma-function expressions.  Pair terms use
a product Gauss-Jacobi rule in the rotated frame that is exact for the
polynomial degrees involved.
"""
from __future__ import annotations


import numpy as np
from scipy import linalg
from scipy.special import gammaln

from .errors import ConfigInvalid, QuadratureFailure
from .potential import AngularCoefficient, CylTerm, PairTerm, pair_rotation
from .sphere import block_rule, eval_monomials, exponents
from .spectrum import EigenDecomposition, PolynomialMode


CHUNK = 4000


def _components(coeff):
    """Coordinates that must flip together for a to stay invariant."""
    parent = list(range(coeff.N))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for t in coeff.active_terms:
        if isinstance(t, PairTerm):
            for i, j in zip(t.idx1, t.idx2):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(coeff.N):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in sorted(groups.values())]


def _sphere_int(E):
    """Vectorized integral of x^E over S^{N-1}; E has shape (..., N)."""
    odd = np.any(E % 2, axis=-1)
    h = (E + 1) / 2.0
    val = 2.0 * np.exp(np.sum(gammaln(h), axis=-1) - gammaln(np.sum(h, axis=-1)))
    return np.where(odd, 0.0, val)


def _sphere_int_block(E, J):
    """Vectorized integral of x^E / |x_J|^2 over S^{N-1}."""
    odd = np.any(E % 2, axis=-1)
    h = (E + 1) / 2.0
    hJ = np.sum(h[..., J], axis=-1)
    val = 2.0 * np.exp(np.sum(gammaln(h), axis=-1) - gammaln(np.sum(h, axis=-1) - 1.0)) / (hJ - 1.0)
    return np.where(odd, 0.0, val)


def _blocks(coeff, L):
    comps = _components(coeff)
    out = {}
    for deg in (L, L - 1):
        if deg < 0:
            continue
        for e in exponents(coeff.N, deg):
            label = tuple(int(np.sum(e[c]) % 2) for c in comps)
            out.setdefault(label, []).append(e)
    return [np.array(v) for _, v in sorted(out.items())]


def _pair_rules(coeff, L):
    rules = []
    for t in coeff.active_terms:
        if isinstance(t, PairTerm):
            Q = pair_rotation(coeff.N, t.idx1, t.idx2)
            r = block_rule(coeff.N, t.idx1, Q, n_phi=L + 2, degree=2 * L + 1, kind="jacobi", sing=-2.0)
            d2 = np.sum((r.points[:, t.idx1] - r.points[:, t.idx2]) ** 2, axis=1)
            rules.append((t.alpha, r, r.weights / d2))
    return rules


def _block_matrices(coeff, exps, pair_rules):
    N = coeff.N
    deg = int(exps[0].sum())
    E = exps[:, None, :] + exps[None, :, :]
    M = _sphere_int(E)
    S = -deg * deg * M
    for i in range(N):
        bb = exps[:, None, i] * exps[None, :, i]
        Ei = E.copy()
        Ei[..., i] -= 2
        mask = bb > 0
        Ei[..., i] = np.maximum(Ei[..., i], 0)
        S += np.where(mask, bb * _sphere_int(Ei), 0.0)
    A = np.zeros_like(M)
    for t in coeff.active_terms:
        if isinstance(t, CylTerm):
            A += t.alpha * _sphere_int_block(E, t.idx)
    for alpha, rule, wq in pair_rules:
        # chunked: the full node-by-monomial table does not fit in memory for N = 6, L >= 9
        for lo in range(0, len(wq), CHUNK):
            P = eval_monomials(exps, rule.points[lo:lo + CHUNK])
            A += alpha * (P.T * wq[lo:lo + CHUNK]) @ P
    return M, S, A


def _scaled(M, S, A):
    d = 1.0 / np.sqrt(np.diag(M))
    M = M * d[:, None] * d[None, :]
    S = S * d[:, None] * d[None, :]
    A = A * d[:, None] * d[None, :]
    if np.linalg.cond(M) > 1e12:
        raise QuadratureFailure("Galerkin mass matrix too ill-conditioned")
    return M, S, A, d


def _check(coeff):
    if coeff.N > 6:
        raise ConfigInvalid("general Galerkin path supports N <= 6")


def solve_general_galerkin(coeff: AngularCoefficient, basis_degree_L=10, count=4):
    """Rayleigh-Ritz eigenpairs of L_a in the degree-<=L polynomial space.

    Eigenvalues are upper bounds that do not increase with L.
    """
    _check(coeff)
    L = int(basis_degree_L)
    pair_rules = _pair_rules(coeff, L)
    found = []
    for exps in _blocks(coeff, L):
        M, S, A = _block_matrices(coeff, exps, pair_rules)
        M, S, A, d = _scaled(M, S, A)
        nev = min(count, len(exps))
        w, V = linalg.eigh(S - A, M, subset_by_index=[0, nev - 1])
        V = V * d[:, None]
        for j in range(nev):
            found.append((w[j], exps, V[:, j]))
    found.sort(key=lambda f: f[0])
    found = found[:count]
    probe = np.arange(1, coeff.N + 1, dtype=float)
    probe /= np.linalg.norm(probe)
    modes, mus = [], []
    for mu, exps, c in found:
        mean = float(np.dot(_sphere_int(exps), c))
        if mean < -1e-12 or (abs(mean) <= 1e-12 and eval_monomials(exps, probe) @ c < 0):
            c = -c
        modes.append(PolynomialMode(coeff.N, exps, c, float(mu)))
        mus.append(float(mu))
    return EigenDecomposition(np.array(mus), modes, coeff, f"galerkin(L={L})")


def galerkin_lambda(coeff: AngularCoefficient, L=8):
    """Largest generalized Rayleigh value of int a psi^2 over the H^1 form (a lower bound)."""
    _check(coeff)
    c0 = ((coeff.N - 2) / 2.0) ** 2
    pair_rules = _pair_rules(coeff, L)
    best = 0.0
    for exps in _blocks(coeff, L):
        M, S, A = _block_matrices(coeff, exps, pair_rules)
        M, S, A, _ = _scaled(M, S, A)
        w = linalg.eigh(A, S + c0 * M, eigvals_only=True)
        best = max(best, float(w[-1]))
    return max(best, 0.0)
