"""Singular inverse-square potentials, their regularizations and admissible perturbations.

The angular coefficient is

    a(theta) = sum_J alpha_J / |theta_J|^2 + sum_(J1,J2) alpha_J1J2 / |theta_J1 - theta_J2|^2

where J runs over k-element index sets and (J1, J2) over disjoint pairs of them.
Index sets are stored 1-based, as users write them; arrays use 0-based copies.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import ConfigInvalid, NotUnitVector, SingularPoint

SINGULAR_CUTOFF = 1e-14
UNIT_TOL = 1e-9


def _check_multi_index(entries, N, k, where):
    entries = tuple(int(e) for e in entries)
    if len(entries) != k:
        raise ConfigInvalid(f"{where}: index set {list(entries)} must have {k} entries")
    if any(b <= a for a, b in zip(entries, entries[1:])):
        raise ConfigInvalid(f"{where}: index set {list(entries)} must be strictly increasing")
    if entries[0] < 1 or entries[-1] > N:
        raise ConfigInvalid(f"{where}: index set {list(entries)} must lie in [1, {N}]")
    return entries


@dataclass(frozen=True)
class CylTerm:
    J: tuple
    alpha: float

    @property
    def idx(self):
        return np.asarray(self.J) - 1


@dataclass(frozen=True)
class PairTerm:
    J1: tuple
    J2: tuple
    alpha: float

    @property
    def idx1(self):
        return np.asarray(self.J1) - 1

    @property
    def idx2(self):
        return np.asarray(self.J2) - 1


@dataclass(frozen=True)
class AngularCoefficient:
    """Coefficient maps over A_k (cylindrical) and B_k (pair) index sets.

    Parameters
    ----------
    N : int
        Ambient dimension, at least 3.
    k : int
        Block size, 3 <= k <= N.
    cyl, pairs : tuple
        Terms as CylTerm / PairTerm instances.
    allow_zero : bool
        Projected problems may legitimately carry no terms; user input may not.
    """

    N: int
    k: int
    cyl: tuple = ()
    pairs: tuple = ()
    allow_zero: bool = field(default=False, compare=False)

    def __post_init__(self):
        N, k = self.N, self.k
        if N < 3:
            raise ConfigInvalid(f"N={N} must be at least 3")
        if not 3 <= k <= N:
            raise ConfigInvalid(f"k={k} must satisfy 3 <= k <= N={N}")
        if self.pairs and 2 * k > N:
            raise ConfigInvalid(f"pair terms need 2k <= N (k={k}, N={N})")
        seen = set()
        for t in self.cyl:
            _check_multi_index(t.J, N, k, "cyl")
            if t.J in seen:
                raise ConfigInvalid(f"cyl: duplicate index set {list(t.J)}")
            seen.add(t.J)
        for t in self.pairs:
            _check_multi_index(t.J1, N, k, "pairs.J1")
            _check_multi_index(t.J2, N, k, "pairs.J2")
            if set(t.J1) & set(t.J2):
                raise ConfigInvalid(f"pairs: {list(t.J1)} and {list(t.J2)} overlap")
            if not t.J1 < t.J2:
                raise ConfigInvalid(f"pairs: need J1 < J2 alphabetically, got {list(t.J1)}, {list(t.J2)}")
            if (t.J1, t.J2) in seen:
                raise ConfigInvalid(f"pairs: duplicate pair {list(t.J1)}, {list(t.J2)}")
            seen.add((t.J1, t.J2))
        if not self.allow_zero and self.is_zero:
            raise ConfigInvalid("all coefficients are zero (a must not vanish identically)")

    # construction ------------------------------------------------------
    @classmethod
    def cylindrical(cls, N, k, alpha, J=None, **kw):
        J = tuple(range(1, k + 1)) if J is None else tuple(J)
        return cls(N, k, cyl=(CylTerm(J, float(alpha)),), **kw)

    @classmethod
    def pair(cls, N, k, alpha, J1=None, J2=None, **kw):
        J1 = tuple(range(1, k + 1)) if J1 is None else tuple(J1)
        J2 = tuple(range(k + 1, 2 * k + 1)) if J2 is None else tuple(J2)
        return cls(N, k, pairs=(PairTerm(J1, J2, float(alpha)),), **kw)

    @classmethod
    def from_dict(cls, d, allow_zero=False):
        if not isinstance(d, dict):
            raise ConfigInvalid("potential must be a JSON object")
        unknown = set(d) - {"N", "k", "cyl", "pairs"}
        if unknown:
            raise ConfigInvalid(f"potential: unknown keys {sorted(unknown)}")
        try:
            N, k = int(d["N"]), int(d["k"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"potential: N and k are required integers ({exc})") from None
        cyl, pairs = [], []
        for t in d.get("cyl", []):
            if set(t) != {"J", "alpha"}:
                raise ConfigInvalid(f"cyl term {t}: expected keys J, alpha")
            cyl.append(CylTerm(tuple(int(j) for j in t["J"]), float(t["alpha"])))
        for t in d.get("pairs", []):
            if set(t) != {"J1", "J2", "alpha"}:
                raise ConfigInvalid(f"pair term {t}: expected keys J1, J2, alpha")
            pairs.append(PairTerm(tuple(int(j) for j in t["J1"]),
                                  tuple(int(j) for j in t["J2"]), float(t["alpha"])))
        return cls(N, k, tuple(cyl), tuple(pairs), allow_zero=allow_zero)

    @classmethod
    def from_json(cls, text, allow_zero=False):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(d, allow_zero=allow_zero)

    def to_dict(self):
        return {
            "N": self.N,
            "k": self.k,
            "cyl": [{"J": list(t.J), "alpha": t.alpha} for t in self.cyl],
            "pairs": [{"J1": list(t.J1), "J2": list(t.J2), "alpha": t.alpha} for t in self.pairs],
        }

    def digest(self):
        """Short stable hash used to tag outputs."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # simple properties ---------------------------------------------------
    @property
    def alphas(self):
        return [t.alpha for t in self.cyl] + [t.alpha for t in self.pairs]

    @property
    def is_zero(self):
        return all(a == 0.0 for a in self.alphas)

    @property
    def active_terms(self):
        return [t for t in (*self.cyl, *self.pairs) if t.alpha != 0.0]

    @property
    def nonpositive(self):
        return all(a <= 0.0 for a in self.alphas)

    def positive_part(self):
        """The coefficient a-hat with every alpha replaced by max(alpha, 0)."""
        return AngularCoefficient(
            self.N, self.k,
            tuple(CylTerm(t.J, max(t.alpha, 0.0)) for t in self.cyl),
            tuple(PairTerm(t.J1, t.J2, max(t.alpha, 0.0)) for t in self.pairs),
            allow_zero=True,
        )

    def scaled(self, factor):
        return AngularCoefficient(
            self.N, self.k,
            tuple(CylTerm(t.J, t.alpha * factor) for t in self.cyl),
            tuple(PairTerm(t.J1, t.J2, t.alpha * factor) for t in self.pairs),
            allow_zero=True,
        )

    # evaluation ----------------------------------------------------------
    def _sq_distances(self, x):
        """Squared block distances for every active term, shape (nterms, ...)."""
        out = []
        for t in self.active_terms:
            if isinstance(t, CylTerm):
                out.append(np.sum(x[..., t.idx] ** 2, axis=-1))
            else:
                out.append(np.sum((x[..., t.idx1] - x[..., t.idx2]) ** 2, axis=-1))
        return out

    def dist_to_singular(self, theta):
        """Distance of theta to the singular set of the active terms.

        Uses |theta_J| and |theta_J1 - theta_J2|/sqrt(2); the latter is the
        Euclidean distance to the collision plane theta_J1 = theta_J2.
        """
        theta = np.asarray(theta, dtype=float)
        d = np.full(theta.shape[:-1], np.inf)
        for t, s in zip(self.active_terms, self._sq_distances(theta)):
            s = np.sqrt(s)
            if isinstance(t, PairTerm):
                s = s / math.sqrt(2.0)
            d = np.minimum(d, s)
        return d

    def _check_unit(self, theta):
        nrm = np.linalg.norm(theta, axis=-1)
        if np.any(np.abs(nrm - 1.0) > UNIT_TOL):
            raise NotUnitVector(f"|theta| deviates from 1 by {np.max(np.abs(nrm - 1.0)):.3e}")

    def _sum_terms(self, x, lam=0.0):
        total = np.zeros(x.shape[:-1])
        for t, s in zip(self.active_terms, self._sq_distances(x)):
            total = total + t.alpha / (s + lam) if lam > 0 else total + t.alpha / s
        return total

    def eval_a(self, theta, cutoff=SINGULAR_CUTOFF):
        theta = np.asarray(theta, dtype=float)
        self._check_unit(theta)
        if np.any(self.dist_to_singular(theta) < cutoff):
            raise SingularPoint("theta lies on the singular set")
        out = self._sum_terms(theta)
        return float(out) if out.ndim == 0 else out

    def eval_a_lambda(self, theta, lam, cutoff=SINGULAR_CUTOFF):
        """Regularized coefficient a_lambda; equals a for lam <= 0."""
        if lam <= 0:
            return self.eval_a(theta, cutoff)
        theta = np.asarray(theta, dtype=float)
        self._check_unit(theta)
        out = self._sum_terms(theta, lam)
        return float(out) if out.ndim == 0 else out

    def eval_V(self, x, cutoff=SINGULAR_CUTOFF):
        """V(x) = a(x/|x|)/|x|^2 evaluated directly in Cartesian form."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        if np.any(r == 0) or np.any(self.dist_to_singular(x) < cutoff * np.maximum(r, 1e-300)):
            raise SingularPoint("x lies on the singular cone")
        out = self._sum_terms(x)
        return float(out) if out.ndim == 0 else out

    def eval_V_unchecked(self, x):
        return self._sum_terms(np.asarray(x, dtype=float))

    def lambda_upper_bound(self):
        """A-priori bound (2/(k-2))^2 * sum of positive parts."""
        return (2.0 / (self.k - 2)) ** 2 * sum(max(a, 0.0) for a in self.alphas)

    # single-term reduction -------------------------------------------------
    def single_term(self):
        """Reduce a single active term to a cylindrical problem in rotated coordinates.

        Returns
        -------
        J : ndarray
            0-based block indices (in the rotated frame) carrying the singularity.
        alpha : float
            Effective cylindrical coefficient (alpha/2 for a pair term).
        Q : ndarray
            Orthogonal matrix with a(theta) = alpha/|(Q theta)_J|^2.
        """
        terms = self.active_terms
        if len(terms) > 1:
            raise ConfigInvalid("single_term() needs at most one active term")
        N = self.N
        if not terms:
            return np.arange(self.k), 0.0, np.eye(N)
        t = terms[0]
        if isinstance(t, CylTerm):
            return t.idx, t.alpha, np.eye(N)
        Q = pair_rotation(N, t.idx1, t.idx2)
        return t.idx1, t.alpha / 2.0, Q


def pair_rotation(N, idx1, idx2):
    """Orthogonal Q with (Q y)_J1 = (y_J1 - y_J2)/sqrt(2), (Q y)_J2 = (y_J1 + y_J2)/sqrt(2)."""
    Q = np.eye(N)
    s = 1.0 / math.sqrt(2.0)
    for i, j in zip(idx1, idx2):
        Q[i, i], Q[i, j] = s, -s
        Q[j, i], Q[j, j] = s, s
    return Q


def critical_alpha(k):
    """Threshold ((k-2)/2)^2 for a single cylindrical coefficient."""
    return ((k - 2) / 2.0) ** 2


# ---------------------------------------------------------------------------
# admissible perturbations


def test_cloud(coeff, n=10_000, radius=1.0, eta=1e-3, seed=0):
    """Quasi-random points in B_radius minus an eta-tube around the singular cone."""
    N = coeff.N
    sob = qmc.Sobol(N, scramble=True, seed=seed)
    m = int(2 ** math.ceil(math.log2(4 * n * 2 ** min(N, 6) / 10)))
    pts = (2 * sob.random(m) - 1) * radius
    r = np.linalg.norm(pts, axis=1)
    keep = (r < radius) & (r > eta)
    if coeff.active_terms:
        keep &= coeff.dist_to_singular(pts) > eta
    pts = pts[keep]
    return pts[:n]


def _sigma_weight(coeff, x, eps):
    """sum over all index sets of |x_J|^{-2+eps} + |x_J1 - x_J2|^{-2+eps}."""
    total = np.zeros(x.shape[0])
    for t, s in zip(coeff.active_terms, coeff._sq_distances(x)):
        total += s ** ((-2 + eps) / 2)
    return total


@dataclass(frozen=True)
class PerturbationH:
    """Lower-order perturbation h with the data needed to check condition (H)."""

    evaluator: Callable
    grad_dot_x: Callable
    bound_C_h: float
    exponent_eps: float
    radial: Callable | None = None
    name: str = "h"

    def __post_init__(self):
        if not 0.0 < self.exponent_eps < 1.0:
            raise ConfigInvalid(f"eps={self.exponent_eps} must lie in (0, 1)")
        if self.bound_C_h < 0:
            raise ConfigInvalid("C_h must be nonnegative")

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))

    @property
    def is_zero(self):
        return self.name == "zero"

    def check(self, coeff, n=10_000, eta=1e-3, seed=0, radius=1.0):
        """Sampled check of (H); returns the worst ratio lhs/rhs (pass iff <= 1)."""
        x = test_cloud(coeff, n, radius, eta, seed)
        lhs = np.abs(self.evaluator(x)) + np.abs(self.grad_dot_x(x))
        rhs = self.bound_C_h * _sigma_weight(coeff, x, self.exponent_eps)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(lhs == 0, 0.0, lhs / rhs)
        return float(np.max(ratio)) if ratio.size else 0.0


def zero_h():
    z = lambda x: np.zeros(np.asarray(x).shape[:-1])
    return PerturbationH(z, z, 0.0, 0.5, radial=lambda r: np.zeros_like(np.asarray(r, float)), name="zero")


def radial_power_h(c, eps):
    """h(x) = c |x|^{-2+eps}; C_h = |c|(1 + |2-eps|) since |x_J| <= |x|."""
    p = -2.0 + eps

    def ev(x):
        return c * np.linalg.norm(x, axis=-1) ** p

    def gx(x):
        return c * p * np.linalg.norm(x, axis=-1) ** p

    return PerturbationH(ev, gx, abs(c) * (1 + abs(p)), eps,
                         radial=lambda r: c * np.asarray(r, float) ** p, name=f"radial-power(c={c},eps={eps})")


def bounded_radial_h(g, g_prime, bound, eps=0.5, name="bounded-radial"):
    """Radial bounded h(x) = g(|x|); C_h chosen as the supplied sup bound over B_1."""
    def ev(x):
        return g(np.linalg.norm(x, axis=-1))

    def gx(x):
        r = np.linalg.norm(x, axis=-1)
        return r * g_prime(r)

    return PerturbationH(ev, gx, bound, eps, radial=g, name=name)


@dataclass(frozen=True)
class NonlinearityF:
    """Nonlinear term f(x, s) with primitive F and the derivatives needed for (F)."""

    f: Callable
    F: Callable
    f_s: Callable
    gradx_F_dot_x: Callable
    bound_C_f: float
    name: str = "f"

    @property
    def is_zero(self):
        return self.name == "zero"

    def check(self, coeff, n=10_000, eta=1e-3, seed=0, radius=1.0, rel_tol=1e-6):
        """Sampled check of (F), F(x,0)=0 and dF/ds = f.

        Returns
        -------
        ratio : float
            Worst value of lhs/rhs in the growth bound (pass iff <= 1).
        consistent : bool
            Whether the primitive checks hold within rel_tol.
        """
        N = coeff.N
        x = test_cloud(coeff, n, radius, eta, seed)
        rng = np.random.default_rng(seed)
        s = rng.uniform(-3, 3, size=x.shape[0])
        two_star = 2 * N / (N - 2)
        lhs = np.abs(self.f(x, s) * s) + np.abs(self.f_s(x, s) * s * s) + np.abs(self.gradx_F_dot_x(x, s))
        rhs = self.bound_C_f * (s * s + np.abs(s) ** two_star)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(lhs == 0, 0.0, lhs / rhs)
        ds = 1e-5 * np.maximum(1.0, np.abs(s))
        fd = (self.F(x, s + ds) - self.F(x, s - ds)) / (2 * ds)
        scale = np.maximum(np.abs(self.f(x, s)), 1e-12)
        ok_prim = np.all(np.abs(fd - self.f(x, s)) <= rel_tol * np.maximum(scale, 1.0) * 10)
        ok_zero = np.all(self.F(x, np.zeros_like(s)) == 0)
        return float(np.max(ratio)) if ratio.size else 0.0, bool(ok_prim and ok_zero)


def zero_f():
    z = lambda x, s: np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(s)))
    return NonlinearityF(z, z, z, z, 0.0, name="zero")


def power_f(c, p, N):
    """f(x,s) = c|s|^{p-2}s with 2 <= p <= 2*; C_f = |c|(2 + p) covers both regimes."""
    two_star = 2 * N / (N - 2)
    if not 2 <= p <= two_star:
        raise ConfigInvalid(f"power nonlinearity needs 2 <= p <= 2* = {two_star}")

    def f(x, s):
        s = np.asarray(s, float)
        return c * np.abs(s) ** (p - 2) * s

    def F(x, s):
        return c * np.abs(np.asarray(s, float)) ** p / p

    def f_s(x, s):
        return c * (p - 1) * np.abs(np.asarray(s, float)) ** (p - 2)

    def gF(x, s):
        return np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(s)))

    return NonlinearityF(f, F, f_s, gF, abs(c) * p, name=f"power(c={c},p={p})")


def multi_index_key(J: Sequence[int]):
    """Alphabetic order on sorted entries (tuples compare lexicographically)."""
    return tuple(sorted(int(j) for j in J))
