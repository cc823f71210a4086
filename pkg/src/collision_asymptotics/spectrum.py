"""Spectrum of L_a = -Delta_S - a on S^{N-1}, the Hardy constant Lambda(a) and exponents.

Single-term potentials separate in block coordinates (phi, w1, w2): an
eigenfunction is g(phi) Y1(w1) Y2(w2) with Y1, Y2 spherical harmonics of
degrees l1, l2 and g solving the weighted 1-D problem

    -(w g')'/w + [l1(l1+k-2) - alpha]/sin^2 g + l2(l2+m-2)/cos^2 g = mu g,
    w = sin^{k-1} cos^{m-1},  m = N - k.

Near phi = 0 the profile behaves like sin^s with s the larger root of
s(s+k-2) = l1(l1+k-2) - alpha, and near pi/2 like cos^{l2}.  Writing
g = sin^s cos^{l2} v turns the problem into a regular weighted one for v with
weight W = sin^{k-1+2s} cos^{m-1+2 l2} and a constant shift
sigma0 (sigma0 + N - 2), sigma0 = s + l2.  The regular problem is discretized
by a symmetrized second-order finite-volume scheme with zero-flux closure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import linalg
from scipy.special import roots_jacobi

from .errors import (BelowSpectralFloor, DimensionTooSmall, IndefiniteOperator,
                     NonConvergence, SupercriticalAlpha, TruncationInsufficient)
from .potential import AngularCoefficient
from .sphere import harmonic_basis, harmonic_dimension

CLUSTER_TOL = 1e-6
DEFAULT_GRID = 2048


def spectral_floor(N):
    return -((N - 2) / 2.0) ** 2


# ---------------------------------------------------------------------------
# closed forms


def mu1_closed_form_cylindrical(N, k, alpha):
    """First eigenvalue for a single cylindrical term and the exponent gamma'.

    Returns
    -------
    mu1, gamma_prime : float
    """
    crit = ((k - 2) / 2.0) ** 2
    if alpha >= crit:
        raise SupercriticalAlpha(f"alpha={alpha} >= ((k-2)/2)^2={crit}")
    root = math.sqrt(crit - alpha)
    mu = -(k - 2) * (N - k) / 2.0 - alpha + (N - k) * root
    gp = -(k - 2) / 2.0 + root
    assert abs(mu - gp * (gp + N - 2)) <= 1e-12 * max(1.0, abs(mu))
    return mu, gp


def mu1_closed_form_two_body(N, k, alpha):
    """First eigenvalue for a single pair term; the cylindrical formula at alpha/2."""
    if N < 2 * k:
        raise DimensionTooSmall(f"pair terms need N >= 2k (N={N}, k={k})")
    if alpha >= (k - 2) ** 2 / 2.0:
        raise SupercriticalAlpha(f"alpha={alpha} >= (k-2)^2/2")
    root = math.sqrt(((k - 2) / 2.0) ** 2 - alpha / 2.0)
    return -(k - 2) * (N - k) / 2.0 - alpha / 2.0 + (N - k) * root


def gamma_exponent(N, mu):
    """Characteristic exponents sigma^+- = -(N-2)/2 +- sqrt(((N-2)/2)^2 + mu)."""
    c = ((N - 2) / 2.0) ** 2
    if mu < -c:
        raise BelowSpectralFloor(f"mu={mu} < -((N-2)/2)^2={-c}")
    root = math.sqrt(c + mu)
    sp, sm = -(N - 2) / 2.0 + root, -(N - 2) / 2.0 - root
    for s in (sp, sm):
        assert abs(s * (s + N - 2) - mu) <= 1e-12 * max(1.0, abs(mu), s * s)
    return sp, sm


# ---------------------------------------------------------------------------
# angular functions


class AngularFunction:
    """A function on S^{N-1}, extended to R^N as a degree-0 homogeneous function."""

    N: int

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class SectorProfile:
    """Normalized profile v in x = cos(2 phi), stored as a Chebyshev series."""

    s: float
    t: int
    cheb: np.ndarray

    def v(self, x):
        return C.chebval(x, self.cheb)

    def dv(self, x):
        return C.chebval(x, C.chebder(self.cheb))

    def g(self, phi):
        """g(phi) = sin^s cos^t v(cos 2phi)."""
        phi = np.asarray(phi, float)
        return np.sin(phi) ** self.s * np.cos(phi) ** self.t * self.v(np.cos(2 * phi))


@dataclass(frozen=True, eq=False)
class SectorMode(AngularFunction):
    """Separated eigenfunction psi(z) = |z_J|^{s-l1} |z|^{-(s+l2)} v(x) P1(z_J) P2(z_R), z = Q theta.

    With x = (|z_R|^2 - |z_J|^2)/|z|^2 this equals g(phi) Y1(w1) Y2(w2).
    """

    N: int
    J: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    profile: SectorProfile
    l1: int
    l2: int
    j1: int
    j2: int
    mu: float
    n: int = 0

    @property
    def sector(self):
        return (self.l1, self.l2)

    def _parts(self, x):
        z = np.asarray(x, float) @ self.Q.T
        zJ, zR = z[..., self.J], z[..., self.R]
        a2 = np.sum(zJ * zJ, axis=-1)
        b2 = np.sum(zR * zR, axis=-1)
        r2 = a2 + b2
        xx = (b2 - a2) / r2
        hb1 = harmonic_basis(len(self.J), self.l1)
        P1 = hb1.value(zJ)[..., self.j1]
        if len(self.R):
            hb2 = harmonic_basis(len(self.R), self.l2)
            P2 = hb2.value(zR)[..., self.j2]
        else:
            hb2, P2 = None, np.ones_like(a2)
        return z, zJ, zR, a2, b2, r2, xx, hb1, hb2, P1, P2

    def value(self, x):
        z, zJ, zR, a2, b2, r2, xx, _, _, P1, P2 = self._parts(x)
        s, l1, l2 = self.profile.s, self.l1, self.l2
        base = a2 ** ((s - l1) / 2) * r2 ** (-(s + l2) / 2)
        return base * self.profile.v(xx) * P1 * P2

    def grad(self, x):
        z, zJ, zR, a2, b2, r2, xx, hb1, hb2, P1, P2 = self._parts(x)
        s, l1, l2 = self.profile.s, self.l1, self.l2
        base = a2 ** ((s - l1) / 2) * r2 ** (-(s + l2) / 2)
        v = self.profile.v(xx)
        dv = self.profile.dv(xx)
        gz = np.zeros(z.shape)
        # d/dz of base * v * P1 * P2
        common = base * v * P1 * P2
        gz[..., self.J] += ((s - l1) * common / a2)[..., None] * zJ
        gz += (-(s + l2) * common / r2)[..., None] * z
        dx = np.zeros(z.shape)
        dx[..., self.J] = -2 * zJ
        dx[..., self.R] = 2 * zR
        dx = dx / r2[..., None] - (2 * xx / r2)[..., None] * z
        gz += (base * dv * P1 * P2)[..., None] * dx
        gz[..., self.J] += (base * v * P2)[..., None] * hb1.grad(zJ)[..., self.j1, :]
        if hb2 is not None:
            gz[..., self.R] += (base * v * P1)[..., None] * hb2.grad(zR)[..., self.j2, :]
        return gz @ self.Q


@dataclass(frozen=True, eq=False)
class PolynomialMode(AngularFunction):
    """psi(theta) = p(theta) for a homogeneous polynomial p, extended as p(x)/|x|^deg."""

    N: int
    exps: np.ndarray
    coefs: np.ndarray
    mu: float = float("nan")

    @property
    def degree(self):
        return int(self.exps[0].sum()) if len(self.exps) else 0

    def value(self, x):
        from .sphere import eval_monomials
        x = np.asarray(x, float)
        r2 = np.sum(x * x, axis=-1)
        return (eval_monomials(self.exps, x) @ self.coefs) * r2 ** (-self.degree / 2)

    def grad(self, x):
        from .sphere import eval_monomials, grad_monomials
        x = np.asarray(x, float)
        r2 = np.sum(x * x, axis=-1)
        p = eval_monomials(self.exps, x) @ self.coefs
        gp = np.einsum("...md,m->...d", grad_monomials(self.exps, x), self.coefs)
        dgr = self.degree
        return gp * r2[..., None] ** (-dgr / 2) - (dgr * p * r2 ** (-dgr / 2 - 1))[..., None] * x


# ---------------------------------------------------------------------------
# sector Sturm-Liouville solver


@dataclass(frozen=True)
class SturmLiouvilleReduction:
    """Separated 1-D problem for one harmonic sector (l1, l2)."""

    dim_N: int
    block_k: int
    alpha: float
    sector: tuple = (0, 0)
    n_grid: int = DEFAULT_GRID

    def __post_init__(self):
        if self.n_grid < 8:
            raise ValueError("grid too small")
        if min(self.sector) < 0:
            raise ValueError("sector degrees must be nonnegative")

    @property
    def m(self):
        return self.dim_N - self.block_k

    @property
    def grid(self):
        h = 0.5 * math.pi / self.n_grid
        return (np.arange(self.n_grid) + 0.5) * h

    @property
    def weight(self):
        phi = self.grid
        return np.sin(phi) ** (self.block_k - 1) * np.cos(phi) ** (self.m - 1)

    @property
    def multiplicity(self):
        l1, l2 = self.sector
        d2 = harmonic_dimension(self.m, l2) if self.m > 0 else (1 if l2 == 0 else 0)
        return harmonic_dimension(self.block_k, l1) * d2

    def frobenius(self):
        """Exponents (s, t) at phi = 0 and phi = pi/2."""
        k, (l1, l2) = self.block_k, self.sector
        disc = ((k - 2) / 2.0 + l1) ** 2 - self.alpha
        if disc <= 0:
            raise IndefiniteOperator(
                f"sector {self.sector}: alpha={self.alpha} exceeds the local Hardy threshold "
                f"{((k - 2) / 2.0 + l1) ** 2}; form unbounded below")
        return -(k - 2) / 2.0 + math.sqrt(disc), l2


@dataclass(frozen=True)
class SectorEigenpair:
    mu: float
    profile: SectorProfile
    multiplicity: int
    sector: tuple
    n: int


def _fv_eigen(n, k, m, s, t, count):
    """Lowest eigenpairs of -(W v')'/W on a uniform cell-centered grid, W = sin^{k-1+2s} cos^{m-1+2t}."""
    h = 0.5 * math.pi / n
    phi = (np.arange(n) + 0.5) * h
    face = np.arange(1, n) * h
    pa, pb = k - 1 + 2 * s, m - 1 + 2 * t
    logW = pa * np.log(np.sin(phi)) + pb * np.log(np.cos(phi))
    logF = pa * np.log(np.sin(face)) + pb * np.log(np.cos(face))
    # symmetrized: diag (F_{i-1/2}+F_{i+1/2})/(h^2 W_i), off -F/(h^2 sqrt(W_i W_{i+1}))
    right = np.exp(logF - logW[:-1])
    left = np.exp(logF - logW[1:])
    d = np.zeros(n)
    d[:-1] += right
    d[1:] += left
    d /= h * h
    e = -np.exp(logF - 0.5 * (logW[:-1] + logW[1:])) / (h * h)
    count = min(count, n)
    lam, vec = linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))
    # Rayleigh quotients of the flux form; exact for the constant null vector
    a = np.exp(0.5 * (logF - logW[1:]))[:, None] * vec[1:]
    b = np.exp(0.5 * (logF - logW[:-1]))[:, None] * vec[:-1]
    lam = np.sum((a - b) ** 2, axis=0) / (h * h) / np.sum(vec * vec, axis=0)
    v = vec / np.exp(0.5 * logW)[:, None]
    return lam, v, phi


def _fit_profiles(v, phi, s, t, k, m, deg):
    """Chebyshev fits in x = cos 2phi, orthonormalized in the continuous weighted L^2."""
    x = np.cos(2 * phi)
    deg = min(deg, len(phi) // 4)
    cheb = np.stack([C.chebfit(x, v[:, j], deg) for j in range(v.shape[1])], axis=1)
    if m == 0:
        return cheb
    A, B = s + (k - 2) / 2.0, t + (m - 2) / 2.0
    xq, wq = roots_jacobi(deg + 8, A, B)
    wq = wq * 2.0 ** (-(A + B)) / 4.0
    V = C.chebval(xq, cheb)  # (nprof, nq)
    G = (V * wq) @ V.T
    w, U = np.linalg.eigh(G)
    cheb = cheb @ (U / np.sqrt(w)) @ U.T
    return cheb


def solve_sector_sl(red: SturmLiouvilleReduction, count=1, richardson=True, fit_degree=48):
    """Lowest eigenpairs of one separated sector.

    Parameters
    ----------
    red : SturmLiouvilleReduction
    count : int
    richardson : bool
        Combine the n- and n/2-node eigenvalues to cancel the O(h^2) term.

    Returns
    -------
    list of SectorEigenpair
    """
    N, k, m = red.dim_N, red.block_k, red.m
    l1, l2 = red.sector
    mult = red.multiplicity
    if mult == 0:
        return []
    s, t = red.frobenius()
    sigma0 = s + t
    shift = sigma0 * (sigma0 + N - 2)
    if m == 0:
        # a is the constant alpha; only the l1 harmonic survives
        prof = SectorProfile(float(l1), 0, np.array([1.0]))
        mu = l1 * (l1 + N - 2) - red.alpha
        return [SectorEigenpair(mu, prof, mult, red.sector, 0)]
    lam, v, phi = _fv_eigen(red.n_grid, k, m, s, t, count)
    if richardson:
        lam_c, _, _ = _fv_eigen(red.n_grid // 2, k, m, s, t, count)
        lam = (4 * lam - lam_c) / 3
    if not np.all(np.isfinite(lam)):
        raise NonConvergence(f"sector {red.sector}: non-finite eigenvalues")
    # sign: positive mean of v (integral against the constant)
    for j in range(v.shape[1]):
        if np.sum(v[:, j] * np.sin(phi) ** (k - 1 + 2 * s) * np.cos(phi) ** (m - 1 + 2 * t)) < 0:
            v[:, j] *= -1
    cheb = _fit_profiles(v, phi, s, t, k, m, fit_degree)
    out = []
    for j in range(len(lam)):
        mu = shift + lam[j]
        if mu < spectral_floor(N) - 1e-12:
            raise IndefiniteOperator(f"mu={mu} below the spectral floor {spectral_floor(N)}")
        out.append(SectorEigenpair(float(mu), SectorProfile(s, t, cheb[:, j]), mult, red.sector, j))
    return out


# ---------------------------------------------------------------------------
# assembled spectrum


@dataclass
class EigenDecomposition:
    """Sorted eigenvalues (repeated by multiplicity) and orthonormal eigenfunctions.

    Attributes
    ----------
    eigenvalues : ndarray
        mu_1 <= mu_2 <= ...; entry i belongs to modes[i].
    modes : list of AngularFunction
    clusters : list of (mu, start, multiplicity)
        Groups of eigenvalues closer than CLUSTER_TOL.
    coeff : AngularCoefficient
    method : str
    """

    eigenvalues: np.ndarray
    modes: list
    coeff: AngularCoefficient
    method: str = "separated"
    normalized: bool = True
    clusters: list = field(default_factory=list)

    def __post_init__(self):
        if not self.clusters:
            self.clusters = cluster_eigenvalues(self.eigenvalues)

    @property
    def N(self):
        return self.coeff.N

    @property
    def mu1(self):
        return float(self.eigenvalues[0])

    def sigma_plus(self, i):
        return gamma_exponent(self.N, float(self.eigenvalues[i]))[0]

    def cluster_of(self, i):
        for mu, start, mult in self.clusters:
            if start <= i < start + mult:
                return mu, start, mult
        raise IndexError(i)

    def summary(self):
        return [{"mu": mu, "multiplicity": mult, "sigma_plus": gamma_exponent(self.N, mu)[0]}
                for mu, start, mult in self.clusters]


def cluster_eigenvalues(mus, tol=CLUSTER_TOL):
    out = []
    i = 0
    mus = np.asarray(mus)
    while i < len(mus):
        j = i + 1
        while j < len(mus) and abs(mus[j] - mus[i]) <= tol * max(1.0, abs(mus[i])):
            j += 1
        out.append((float(np.mean(mus[i:j])), i, j - i))
        i = j
    return out


def _modes_for(pair, N, J, R, Q):
    k, m = len(J), len(R)
    l1, l2 = pair.sector
    d1 = harmonic_dimension(k, l1)
    d2 = harmonic_dimension(m, l2) if m else 1
    return [SectorMode(N, J, R, Q, pair.profile, l1, l2, j1, j2, pair.mu, pair.n)
            for j1 in range(d1) for j2 in range(d2)]


def assemble_spectrum(coeff: AngularCoefficient, count=4, max_sector_degree=4,
                      n_grid=DEFAULT_GRID, galerkin_degree=10):
    """Merged spectrum with multiplicities, complete up to the count-th eigenvalue.

    Single-term coefficients use the separated solver (pair terms after the
    rotation reduction); several active terms dispatch to the Galerkin path.
    """
    if len(coeff.active_terms) > 1:
        return solve_general_galerkin(coeff, galerkin_degree, count)
    N = coeff.N
    J, alpha, Q = coeff.single_term()
    k = len(J)
    R = np.setdiff1d(np.arange(N), J)
    m = len(R)
    l2_max = 0 if m == 0 else (1 if m == 1 else max_sector_degree)
    pairs = []
    for l1 in range(max_sector_degree + 1):
        for l2 in range(l2_max + 1):
            red = SturmLiouvilleReduction(N, k, alpha, (l1, l2), n_grid)
            pairs.extend(solve_sector_sl(red, count))
    pairs.sort(key=lambda p: (p.mu, p.sector, p.n))
    taken, total = [], 0
    for p in pairs:
        if total >= count and p.mu > taken[-1].mu + CLUSTER_TOL * max(1.0, abs(taken[-1].mu)):
            break
        taken.append(p)
        total += p.multiplicity
    if total < count:
        raise TruncationInsufficient(f"only {total} eigenvalues found below the sweep frontier")
    # certify: sector ground states increase with l1 and l2, so the frontier bounds the rest
    last = taken[-1].mu
    frontier = []
    for sec in [(max_sector_degree + 1, 0)] + ([(0, l2_max + 1)] if m >= 2 else []):
        red = SturmLiouvilleReduction(N, k, alpha, sec, max(n_grid // 4, 64))
        got = solve_sector_sl(red, 1)
        if got:
            frontier.append(got[0].mu)
    if frontier and min(frontier) <= last + CLUSTER_TOL:
        raise TruncationInsufficient(
            f"frontier sector ground {min(frontier):.6g} does not exceed the count-th eigenvalue {last:.6g}; "
            "increase max_sector_degree")
    mus, modes = [], []
    for p in taken:
        ms = _modes_for(p, N, J, R, Q)
        modes.extend(ms)
        mus.extend([p.mu] * len(ms))
    return EigenDecomposition(np.array(mus), modes, coeff, "separated")


# ---------------------------------------------------------------------------
# Hardy constant


def _sector_lambda(N, k, alpha, sector, n_grid, tau_lo):
    """Largest generalized Rayleigh value of alpha int g^2 w/sin^2 over the H^1 form on one sector.

    Finite volumes in tau with phi = (pi/2) e^tau, tau in [tau_lo, 0], which
    grades the grid geometrically toward the singular endpoint phi = 0 where
    near-optimal functions concentrate.  Zero-flux closure at both ends.
    """
    m = N - k
    l1, l2 = sector
    c1 = l1 * (l1 + k - 2)
    c2 = l2 * (l2 + m - 2) if m >= 2 else 0.0
    c0 = ((N - 2) / 2.0) ** 2
    tau = np.linspace(tau_lo, 0.0, n_grid)
    dt = tau[1] - tau[0]
    tau = tau - 0.5 * dt  # cell centers strictly inside
    tf = 0.5 * (tau[:-1] + tau[1:])
    q = 0.5 * math.pi

    def logs(t):
        phi = q * np.exp(t)
        return np.log(np.sin(phi)), np.log(np.cos(phi)), np.log(phi)

    ls, lc, lphi = logs(tau)
    lsf, lcf, lphif = logs(tf)
    logw = (k - 1) * ls + (m - 1) * lc
    logp = (k - 1) * lsf + (m - 1) * lcf - lphif - math.log(dt)  # w / (dphi/dtau) / dt
    logmA = math.log(alpha) + logw - 2 * ls + lphi + math.log(dt)
    # B mass over A mass: (c1/s^2 + c2/c^2 + c0) s^2 / alpha
    d = (c1 + c2 * np.exp(2 * ls - 2 * lc) + c0 * np.exp(2 * ls)) / alpha
    d[:-1] += np.exp(logp - logmA[:-1])
    d[1:] += np.exp(logp - logmA[1:])
    e = -np.exp(logp - 0.5 * (logmA[:-1] + logmA[1:]))
    lam = linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, 0), eigvals_only=True)
    return 1.0 / lam[0]


def lambda_of(coeff: AngularCoefficient, n_grid=4096, tau_lo=-140.0,
              max_sector_degree=2, galerkin_degree=8, return_details=False):
    """Best constant Lambda(a) of the Hardy-type inequality on the sphere.

    Single-term coefficients: maximum over harmonic sectors of the discrete
    generalized Rayleigh quotient on a geometrically graded grid, refined once
    and checked for stability.  Several terms: Galerkin generalized Rayleigh
    value (a lower bound).  Zero when a <= 0.
    """
    if coeff.nonpositive:
        return (0.0, {"method": "nonpositive"}) if return_details else 0.0
    terms = coeff.active_terms
    if len(terms) > 1:
        val = _galerkin_lambda(coeff, galerkin_degree)
        return (val, {"method": "galerkin", "degree": galerkin_degree}) if return_details else val
    N = coeff.N
    J, alpha, _ = coeff.single_term()
    k, m = len(J), N - len(J)
    if m == 0:
        val = alpha / ((N - 2) / 2.0) ** 2
        return (val, {"method": "constant"}) if return_details else val
    l2_max = 0 if m == 1 else max_sector_degree
    best, coarse = 0.0, 0.0
    for l1 in range(max_sector_degree + 1):
        for l2 in range(l2_max + 1):
            best = max(best, _sector_lambda(N, k, alpha, (l1, l2), n_grid, tau_lo))
            coarse = max(coarse, _sector_lambda(N, k, alpha, (l1, l2), n_grid // 2, tau_lo / 2))
    change = abs(best - coarse) / best
    if change > 0.05:
        raise NonConvergence(f"Lambda changed by {change:.2%} under refinement")
    return (best, {"method": "sector", "refinement_change": change}) if return_details else best


# ---------------------------------------------------------------------------
# Galerkin path (imported late to keep the module graph acyclic)


def solve_general_galerkin(coeff, basis_degree_L=10, count=4):
    from .galerkin import solve_general_galerkin as _solve
    return _solve(coeff, basis_degree_L, count)


def _galerkin_lambda(coeff, L):
    from .galerkin import galerkin_lambda
    return galerkin_lambda(coeff, L)


def mu1_of(coeff, **kw):
    """First eigenvalue; -inf when the form is unbounded below (supercritical sector)."""
    try:
        return assemble_spectrum(coeff, count=1, **kw).mu1
    except IndefiniteOperator:
        return -math.inf
