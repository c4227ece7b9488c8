"""Diffusion channel model: Levy first-arrival law and per-interval arrival statistics.

Indexing follows the physical description: receiver sub-intervals are
numbered ``i = 1..n`` and release indices ``j = 0..m-1``.  Arrays stored on
:class:`ArrivalMatrix` are zero-based, so sub-interval ``i`` is row ``i-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as _sp

from .errors import DegenerateVarianceError, DomainError

MAX_DIM = 512
_SLOT_TOL = 1e-9


@dataclass(frozen=True)
class ChannelGeometry:
    """Transmitter-receiver distance ``d`` (um) and diffusion coefficient ``D`` (um^2/s)."""

    d: float
    D: float

    def __post_init__(self):
        if not (self.d > 0 and self.D > 0):
            raise DomainError(f"geometry needs d > 0 and D > 0, got d={self.d}, D={self.D}")


@dataclass(frozen=True)
class ChannelParams:
    """One slotted channel instance.

    ``c`` is the Levy noise parameter (s), ``T_s`` the symbol period, ``t_b``
    the receiver sub-interval width, ``sigma_x`` the spacing of the ``m``
    release times inside a window of length ``tau_x``, and ``lambda0`` the
    mean count of environmental noise molecules per sub-interval.
    """

    c: float
    T_s: float
    t_b: float
    sigma_x: float
    tau_x: float
    m: int
    n: int
    lambda0: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"c must be positive, got {self.c}")
        if int(self.m) != self.m or int(self.n) != self.n or self.m < 1 or self.n < 1:
            raise DomainError(f"m and n must be positive integers, got m={self.m}, n={self.n}")
        if self.m > MAX_DIM or self.n > MAX_DIM:
            raise DomainError(f"m and n are capped at {MAX_DIM}")
        if not (self.t_b > 0 and self.T_s > 0):
            raise DomainError("T_s and t_b must be positive")
        if abs(self.n * self.t_b - self.T_s) > _SLOT_TOL * max(1.0, self.T_s):
            raise DomainError(f"n * t_b = {self.n * self.t_b} does not equal T_s = {self.T_s}")
        if self.sigma_x < 0:
            raise DomainError(f"sigma_x must be >= 0, got {self.sigma_x}")
        if (self.m - 1) * self.sigma_x > self.tau_x * (1 + 1e-12) + 1e-15 or self.tau_x > self.T_s * (1 + 1e-12):
            raise DomainError("release times must satisfy (m-1)*sigma_x <= tau_x <= T_s")
        if self.lambda0 < 0:
            raise DomainError(f"lambda0 must be >= 0, got {self.lambda0}")

    @classmethod
    def slotted(cls, c, T_s, n, m, tau_x=None, lambda0=0.0):
        """Equal receiver sub-intervals and ``m`` release times spaced ``tau_x / m`` apart.

        The ``tau_x / m`` spacing makes the release grids for m and 2m nested.
        ``tau_x`` defaults to ``T_s / 2``.
        """
        tau = T_s / 2 if tau_x is None else tau_x
        return cls(c=c, T_s=T_s, t_b=T_s / n, sigma_x=tau / m, tau_x=tau, m=int(m), n=int(n), lambda0=lambda0)

    def replace(self, **changes):
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return ChannelParams(**values)


def c_from_geometry(geom: ChannelGeometry) -> float:
    """Levy parameter ``d^2 / (2 D)`` in seconds."""
    return geom.d**2 / (2.0 * geom.D)


def c_table_relation(geom: ChannelGeometry) -> float:
    """``d^2 / D``: the relation the reference (c, D) setup table follows."""
    return geom.d**2 / geom.D


def levy_pdf(t, release, c):
    """Levy first-hitting-time density for a molecule released at ``release``."""
    s = np.asarray(t, dtype=float) - release
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    out[pos] = np.sqrt(c / (2 * np.pi * sp**3)) * np.exp(-c / (2 * sp))
    return out if out.ndim else float(out)


def levy_cdf(s, c):
    """``P(first arrival <= s)`` after release; zero for s <= 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = _sp.erfc(np.sqrt(c / (2 * s[pos])))
    return out if out.ndim else float(out)


def arrival_prob(i: int, j: int, params: ChannelParams) -> float:
    """Probability that a molecule released at ``j * sigma_x`` arrives in sub-interval ``i``.

    When the release happens inside the sub-interval the lower limit clamps
    to the release time, and a release at or after the end of the
    sub-interval gives zero.
    """
    if not (1 <= i <= params.n and 0 <= j < params.m):
        raise DomainError(f"index out of range: i={i}, j={j}")
    release = j * params.sigma_x
    upper = i * params.t_b - release
    if upper <= 0:
        return 0.0
    lower = (i - 1) * params.t_b - release
    # difference of erfc avoids cancellation when both erf terms are near 1
    return float(levy_cdf(upper, params.c) - levy_cdf(max(lower, 0.0), params.c))


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ArrivalMatrix:
    """Arrival probabilities ``p[i-1, j]`` and the statistics derived from them.

    ``p_i_star``: row maxima; ``p_prime_j``: column sums; ``p_star``: the
    largest column sum; ``p_tilde_i``: row minima; ``q`` / ``q_prime``:
    differences and sums of adjacent rows, row ``i-2`` pairing sub-intervals
    ``i-1`` and ``i``.
    """

    p: np.ndarray
    p_i_star: np.ndarray = field(init=False)
    p_prime_j: np.ndarray = field(init=False)
    p_star: float = field(init=False)
    p_tilde_i: np.ndarray = field(init=False)
    q: np.ndarray = field(init=False)
    q_prime: np.ndarray = field(init=False)

    def __post_init__(self):
        p = _frozen(self.p)
        if p.ndim != 2 or p.size == 0:
            raise DomainError("arrival matrix must be a non-empty 2-D array")
        if np.any(p < 0) or np.any(p > 1):
            raise DomainError("arrival probabilities must lie in [0, 1]")
        if np.any(p.sum(axis=0) > 1 + 1e-12):
            raise DomainError("column sums of the arrival matrix exceed 1")
        set_ = object.__setattr__
        set_(self, "p", p)
        set_(self, "p_i_star", _frozen(p.max(axis=1)))
        set_(self, "p_prime_j", _frozen(p.sum(axis=0)))
        set_(self, "p_star", float(p.sum(axis=0).max()))
        set_(self, "p_tilde_i", _frozen(p.min(axis=1)))
        set_(self, "q", _frozen(p[1:] - p[:-1]))
        set_(self, "q_prime", _frozen(p[1:] + p[:-1]))

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def m(self) -> int:
        return self.p.shape[1]


def arrival_matrix(params: ChannelParams) -> ArrivalMatrix:
    """Fill the n x m arrival matrix for ``params``."""
    i = np.arange(1, params.n + 1)[:, None]
    release = (np.arange(params.m) * params.sigma_x)[None, :]
    upper = i * params.t_b - release
    lower = np.maximum((i - 1) * params.t_b - release, 0.0)
    p = levy_cdf(upper, params.c) - levy_cdf(lower, params.c)
    p = np.where(upper > 0, p, 0.0)
    return ArrivalMatrix(np.clip(p, 0.0, 1.0))


def _poisson_pmf(y, mean):
    y = np.asarray(y, dtype=float)
    mean = np.asarray(mean, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = y * np.log(mean) - mean - _sp.gammaln(y + 1)
        out = np.exp(logp)
    out = np.where(mean == 0, (y == 0).astype(float), out)
    return out if out.ndim else float(out)


def poisson_likelihood(y, x, i, j, A: ArrivalMatrix, lambda0=0.0):
    """``P(Y_i = y | X = x, T_x = j sigma_x)``: Poisson with mean ``x p_ij + lambda0``.

    The noisy mean uses the released concentration ``x``; writing the total
    received count there instead would not reduce to the noiseless case.
    """
    if x < 0:
        raise DomainError(f"concentration must be >= 0, got {x}")
    return _poisson_pmf(y, x * A.p[i - 1, j] + lambda0)


def sum_likelihood(y, x, j, A: ArrivalMatrix, lambda0=0.0):
    """Law of the total count ``Y_1 + ... + Y_n``: Poisson with mean ``x p'_j + n lambda0``."""
    if x < 0:
        raise DomainError(f"concentration must be >= 0, got {x}")
    return _poisson_pmf(y, x * A.p_prime_j[j] + A.n * lambda0)


def diff_likelihood(y, x, i, j, A: ArrivalMatrix):
    """Gaussian approximation to the law of ``Y_i - Y_{i-1}``, ``i = 2..n``.

    Mean ``x q_ij`` and variance ``x q'_ij``.
    """
    if not 2 <= i <= A.n:
        raise DomainError(f"difference kernel needs 2 <= i <= n, got {i}")
    if not x > 0:
        raise DegenerateVarianceError(f"difference kernel needs x > 0, got {x}")
    var = x * A.q_prime[i - 2, j]
    if not var > 0:
        raise DegenerateVarianceError(f"q'_{i}{j} = 0 gives a zero-variance difference kernel")
    mean = x * A.q[i - 2, j]
    y = np.asarray(y, dtype=float)
    out = np.exp(-((y - mean) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)
    return out if out.ndim else float(out)
