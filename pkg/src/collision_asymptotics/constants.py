"""Dimension constants shared by several modules."""
from __future__ import annotations

import math


def two_star(N):
    """Critical Sobolev exponent 2N/(N-2)."""
    return 2.0 * N / (N - 2)


def sobolev_constant(N):
    """Best constant S in S ||u||_{2*}^2 <= ||grad u||_2^2 on R^N.

    S = pi N (N-2) (Gamma(N/2)/Gamma(N))^{2/N}.
    """
    return math.pi * N * (N - 2) * (math.gamma(N / 2) / math.gamma(N)) ** (2.0 / N)
