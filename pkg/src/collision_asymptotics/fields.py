"""Scalar fields on punctured balls: modal sums phi_i(r) psi_i(theta) and wrapped callables.

Every field exposes ``value(x)`` and ``grad(x)`` for points of shape (..., N).
Radial profiles expose ``__call__(r)`` and ``deriv(r)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import NearSingularGradient


# ---------------------------------------------------------------------------
# radial profiles


@dataclass(frozen=True)
class PowerProfile:
    """phi(r) = coef * r^gamma."""

    coef: float
    gamma: float

    @property
    def sigma(self):
        return self.gamma

    def __call__(self, r):
        return self.coef * np.asarray(r, float) ** self.gamma

    def deriv(self, r):
        r = np.asarray(r, float)
        return self.coef * self.gamma * r ** (self.gamma - 1)


@dataclass(frozen=True)
class FrobeniusSeriesProfile:
    """Regular solution of -phi'' - (N-1)/r phi' + mu/r^2 phi = c r^{-2+eps} phi.

    phi = scale * r^sigma * sum_n a_n r^{n eps} with a_0 = 1 and
    a_n = -c a_{n-1} / P(sigma + n eps), P(nu) = nu (nu + N - 2) - mu.
    The coefficients decay factorially, so the series is entire in r^eps.
    """

    N: int
    mu: float
    c: float
    eps: float
    scale: float = 1.0
    n_terms: int = 200

    @property
    def sigma(self):
        half = (self.N - 2) / 2.0
        return -half + math.sqrt(half * half + self.mu)

    @property
    def coefficients(self):
        s = self.sigma
        a = [1.0]
        for n in range(1, self.n_terms):
            nu = s + n * self.eps
            a.append(-self.c * a[-1] / (nu * (nu + self.N - 2) - self.mu))
            if abs(a[-1]) < 1e-300:
                break
        return np.array(a)

    def _series(self, r):
        r = np.asarray(r, float)
        a = self.coefficients
        n = np.arange(len(a))
        x = r[..., None] ** self.eps
        powers = x ** n
        w = powers @ a
        dw = (powers @ (a * n * self.eps))  # r dw/dr
        return r, w, dw

    def __call__(self, r):
        r, w, _ = self._series(r)
        return self.scale * r ** self.sigma * w

    def deriv(self, r):
        r, w, dw = self._series(r)
        s = self.sigma
        return self.scale * r ** (s - 1) * (s * w + dw)

    def rescaled(self, value_at_R, R):
        """Copy scaled so that phi(R) = value_at_R."""
        base = FrobeniusSeriesProfile(self.N, self.mu, self.c, self.eps, 1.0, self.n_terms)
        return FrobeniusSeriesProfile(self.N, self.mu, self.c, self.eps,
                                      value_at_R / float(base(R)), self.n_terms)


@dataclass(frozen=True)
class SampledProfile:
    """Profile from samples on a log grid, stored as phi = r^sigma w(log r).

    w and its log-derivative are interpolated with a cubic Hermite spline.
    Below the first node w is held at its first value (regular branch).
    """

    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    sigma: float
    _spline: CubicHermiteSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.log(self.r)
        w = self.phi * self.r ** (-self.sigma)
        wt = (self.r * self.dphi - self.sigma * self.phi) * self.r ** (-self.sigma)
        object.__setattr__(self, "_spline", CubicHermiteSpline(t, w, wt))

    def _w(self, r):
        t = np.clip(np.log(np.asarray(r, float)), np.log(self.r[0]), np.log(self.r[-1]))
        return self._spline(t), self._spline(t, 1)

    def __call__(self, r):
        r = np.asarray(r, float)
        w, _ = self._w(r)
        return r ** self.sigma * w

    def deriv(self, r):
        r = np.asarray(r, float)
        w, wt = self._w(r)
        below = r < self.r[0]
        wt = np.where(below, 0.0, wt)
        return r ** (self.sigma - 1) * (self.sigma * w + wt)

    def scaled(self, factor):
        return SampledProfile(self.r, self.phi * factor, self.dphi * factor, self.sigma)


# ---------------------------------------------------------------------------
# fields


class Field:
    """Base class; subclasses implement value and grad."""

    N: int

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ModalField(Field):
    """u(x) = sum_i phi_i(|x|) psi_i(x/|x|).

    ``terms`` pairs a radial profile with an angular function (an object with
    value/grad evaluated on the degree-0 extension).
    """

    N: int
    terms: tuple

    def value(self, x):
        x = np.asarray(x, float)
        r = np.linalg.norm(x, axis=-1)
        out = np.zeros(x.shape[:-1])
        for prof, mode in self.terms:
            out = out + prof(r) * mode.value(x)
        return out

    def grad(self, x):
        x = np.asarray(x, float)
        r = np.linalg.norm(x, axis=-1)
        xhat = x / r[..., None]
        out = np.zeros(x.shape)
        for prof, mode in self.terms:
            out += (prof.deriv(r) * mode.value(x))[..., None] * xhat
            out += prof(r)[..., None] * mode.grad(x)
        return out

    def scaled(self, factor):
        return ModalField(self.N, tuple((_scale_profile(p, factor), m) for p, m in self.terms))


def _scale_profile(p, factor):
    if isinstance(p, PowerProfile):
        return PowerProfile(p.coef * factor, p.gamma)
    if isinstance(p, FrobeniusSeriesProfile):
        return FrobeniusSeriesProfile(p.N, p.mu, p.c, p.eps, p.scale * factor, p.n_terms)
    return p.scaled(factor)


def homogeneous_field(mode, gamma, coef=1.0):
    """u = coef |x|^gamma psi(theta)."""
    return ModalField(mode.N, ((PowerProfile(coef, gamma), mode),))


@dataclass(frozen=True, eq=False)
class CallableField(Field):
    """Wraps value (and optionally gradient) callables.

    Without an analytic gradient, central differences with step
    ``fd_step * |x|`` are used; when ``coeff`` is given, stencils that come
    within two steps of the singular cone raise NearSingularGradient.
    """

    N: int
    fn: Callable
    grad_fn: Callable | None = None
    coeff: object = None
    fd_step: float = 1e-6

    def value(self, x):
        return self.fn(np.asarray(x, float))

    def grad(self, x):
        x = np.asarray(x, float)
        if self.grad_fn is not None:
            return self.grad_fn(x)
        h = self.fd_step * np.maximum(np.linalg.norm(x, axis=-1), 1e-300)
        if self.coeff is not None and self.coeff.active_terms:
            flat = x.reshape(-1, self.N)
            d = self.coeff.dist_to_singular(flat / np.linalg.norm(flat, axis=1, keepdims=True))
            if np.any(d * np.linalg.norm(flat, axis=1) < 2 * h.reshape(-1)):
                raise NearSingularGradient("finite-difference stencil straddles the singular cone")
        out = np.empty(x.shape)
        for i in range(self.N):
            e = np.zeros(self.N)
            e[i] = 1.0
            step = h[..., None] * e
            out[..., i] = (self.fn(x + step) - self.fn(x - step)) / (2 * h)
        return out


@dataclass(frozen=True, eq=False)
class KelvinField(Field):
    """u~(x) = |x|^{-(N-2)} u(x/|x|^2) with the chain-rule gradient."""

    N: int
    base: Field

    def value(self, x):
        x = np.asarray(x, float)
        r2 = np.sum(x * x, axis=-1)
        y = x / r2[..., None]
        return r2 ** (-(self.N - 2) / 2) * self.base.value(y)

    def grad(self, x):
        x = np.asarray(x, float)
        r2 = np.sum(x * x, axis=-1)
        y = x / r2[..., None]
        gu = self.base.grad(y)
        # Dy = (I - 2 xhat xhat^T) / r^2 is symmetric
        xdot = np.sum(x * gu, axis=-1)
        dy_t_gu = (gu - 2 * (xdot / r2)[..., None] * x) / r2[..., None]
        lead = -(self.N - 2) * r2 ** (-self.N / 2) * self.base.value(y)
        return lead[..., None] * x + r2[..., None] ** (-(self.N - 2) / 2) * dy_t_gu


def modal_terms(field_: Field):
    """The (profile, mode) pairs of a modal field, or None."""
    return field_.terms if isinstance(field_, ModalField) else None


def sum_fields(*fields: Sequence[ModalField]):
    """Concatenate modal fields into one."""
    N = fields[0].N
    return ModalField(N, tuple(t for f in fields for t in f.terms))
