"""Special functions used by the channel model and the capacity bounds.

Everything here is a pure function of its arguments.  The error-function
family is delegated to :mod:`scipy.special`; the exponential integral,
the ``2F2(1/2, 1/2; 3/2, 3/2; x)`` series, the Poisson entropy and the
Gaussian moments are evaluated directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .errors import ConvergenceError, DomainError

__all__ = [
    "SeriesControl",
    "DEFAULT_SERIES",
    "EULER_GAMMA",
    "erf",
    "erfc",
    "erfi",
    "expint_ei",
    "expint_e1",
    "ei_scaled",
    "e1_scaled",
    "hyp2f2_half",
    "poisson_entropy",
    "gaussian_central_moment",
    "gaussian_noncentral_moment",
    "log_factorial",
]

EULER_GAMMA = 0.57721566490153286061
_EPS = np.finfo(float).eps
_EXP_OVERFLOW = 709.78

# Ei(x), x > 0: ascending series below, asymptotic series above.
_EI_SERIES_MAX = 40.0
# E1(x): power series at or below, continued fraction above.
_E1_SERIES_MAX = 1.0
# 2F2 at x < _HYP_ASYMPTOTIC_BELOW uses the erf-integral identity.
_HYP_ASYMPTOTIC_BELOW = -20.0
MAX_MOMENT_ORDER = 64


@dataclass(frozen=True)
class SeriesControl:
    """Stopping rule for power series: relative tolerance and a term cap."""

    rel_tol: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 10:
            raise ValueError(f"max_terms must be an integer >= 10, got {self.max_terms}")


DEFAULT_SERIES = SeriesControl()


def erf(x):
    """Error function, ``2/sqrt(pi) * int_0^x exp(-t^2) dt``."""
    return _sp.erf(x)


def erfc(x):
    """Complementary error function ``1 - erf(x)`` without cancellation."""
    return _sp.erfc(x)


def erfi(x):
    """Imaginary error function ``-i erf(i x)``."""
    return _sp.erfi(x)


def _e1_series(x: float) -> float:
    total = 0.0
    term = 1.0
    for k in range(1, 200):
        term *= -x / k
        contrib = term / k
        total += contrib
        if abs(contrib) < _EPS * abs(total):
            break
    return -EULER_GAMMA - math.log(x) - total


def _e1_cf_scaled(x: float) -> float:
    """``exp(x) * E1(x)`` by the modified Lentz continued fraction, x > 1."""
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ConvergenceError("E1 continued fraction did not converge", iterations=10_000, last_value=h)


def e1_scaled(x: float) -> float:
    """``exp(x) * E1(x)`` for x > 0; finite for arbitrarily large x."""
    x = float(x)
    if not x > 0:
        raise DomainError(f"e1_scaled requires x > 0, got {x}")
    if x <= _E1_SERIES_MAX:
        return math.exp(x) * _e1_series(x)
    return _e1_cf_scaled(x)


def expint_e1(x: float) -> float:
    """Exponential integral ``E1(x) = int_x^inf exp(-t)/t dt`` for x > 0."""
    x = float(x)
    if not x > 0:
        raise DomainError(f"E1 requires x > 0, got {x}")
    if x <= _E1_SERIES_MAX:
        return _e1_series(x)
    return math.exp(-x) * _e1_cf_scaled(x)


def _ei_series(x: float) -> float:
    total = 0.0
    term = 1.0
    for k in range(1, 500):
        term *= x / k
        contrib = term / k
        total += contrib
        if abs(contrib) < _EPS * abs(total):
            break
    return EULER_GAMMA + math.log(x) + total


def _ei_asymptotic_scaled(x: float) -> float:
    """``exp(-x) * Ei(x)`` from the divergent asymptotic series, x >= 40."""
    total = 1.0
    term = 1.0
    for k in range(1, int(x)):
        new = term * k / x
        if new > term:
            break
        term = new
        total += term
        if term < _EPS * total:
            break
    return total / x


def ei_scaled(x: float) -> float:
    """``exp(-x) * Ei(x)`` for x != 0.

    Used where ``Ei`` itself would overflow or where a difference of two
    ``Ei`` values multiplied by an exponential is needed.
    """
    x = float(x)
    if x == 0.0 or not math.isfinite(x):
        raise DomainError(f"ei_scaled requires finite x != 0, got {x}")
    if x < 0:
        return -e1_scaled(-x)
    if x <= _EI_SERIES_MAX:
        return math.exp(-x) * _ei_series(x)
    return _ei_asymptotic_scaled(x)


def expint_ei(x: float) -> float:
    """Exponential integral ``Ei(x) = -PV int_{-x}^inf exp(-t)/t dt``.

    Raises :class:`DomainError` at the logarithmic singularity x = 0 and
    :class:`OverflowError` when ``Ei(x)`` is not representable.
    """
    x = float(x)
    if x == 0.0:
        raise DomainError("Ei has a logarithmic singularity at x = 0")
    if not math.isfinite(x):
        raise DomainError(f"Ei requires finite x, got {x}")
    if x < 0:
        return -expint_e1(-x)
    if x <= _EI_SERIES_MAX:
        return _ei_series(x)
    if x > _EXP_OVERFLOW:
        raise OverflowError(f"Ei({x}) overflows double precision")
    return math.exp(x) * _ei_asymptotic_scaled(x)


def _hyp2f2_series(x: float, control: SeriesControl) -> float:
    # term_k = x^k / (k! (2k+1)^2); power part carried recursively
    power = 1.0
    terms = [1.0]
    partial = 1.0
    for k in range(1, control.max_terms):
        power *= x / k
        t = power / (2 * k + 1) ** 2
        terms.append(t)
        partial += t
        if k > abs(x) and abs(t) <= control.rel_tol * abs(partial) * 1e-2:
            return math.fsum(terms)
    raise ConvergenceError(
        f"2F2 series at x={x} not converged after {control.max_terms} terms",
        iterations=control.max_terms,
        last_value=math.fsum(terms),
    )


def _hyp2f2_negative_asymptotic(x: float) -> float:
    z = math.sqrt(-x)
    # int_0^z erf(t)/t dt = erf(z) ln z + (gamma + 2 ln 2)/2 + (2/sqrt(pi)) int_z^inf ln t e^{-t^2} dt
    lnz = math.log(z)
    tail = math.exp(-z * z) / (2 * z) * (lnz + (1 - lnz) / (2 * z * z))
    integral = math.erf(z) * lnz + 0.5 * (EULER_GAMMA + 2 * math.log(2.0)) + 2 / math.sqrt(math.pi) * tail
    return math.sqrt(math.pi) / (2 * z) * integral


def hyp2f2_half(x: float, control: SeriesControl = DEFAULT_SERIES) -> float:
    """``2F2(1/2, 1/2; 3/2, 3/2; x)``.

    The power series ``sum_k x^k / (k! (2k+1)^2)`` is summed for
    ``x >= -20``.  Below that the alternating series loses too many digits
    to cancellation and the identity
    ``2F2(.; -z^2) = sqrt(pi)/(2z) * int_0^z erf(t)/t dt`` is evaluated in
    closed form with an asymptotic tail.
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"2F2 requires finite x, got {x}")
    if x == 0.0:
        return 1.0
    if x < _HYP_ASYMPTOTIC_BELOW:
        return _hyp2f2_negative_asymptotic(x)
    return _hyp2f2_series(x, control)


def log_factorial(k):
    """``ln(k!)`` via the log-gamma function; accepts arrays."""
    return _sp.gammaln(np.asarray(k, dtype=float) + 1.0)


def poisson_entropy(lam: float, tail_mass: float = 1e-14) -> float:
    """Shannon entropy (nats) of a Poisson(lam) variable by direct summation.

    The support is cut where the neglected tail mass falls below
    ``tail_mass``; the Chernoff margins below are wide enough for that at
    every lam >= 0.
    """
    lam = float(lam)
    if lam < 0 or not math.isfinite(lam):
        raise DomainError(f"Poisson mean must be finite and >= 0, got {lam}")
    if lam == 0.0:
        return 0.0
    width = 12.0 * math.sqrt(lam) + 70.0
    lo = max(0, int(math.floor(lam - width)))
    hi = int(math.ceil(lam + width))
    k = np.arange(lo, hi + 1, dtype=float)
    logp = k * math.log(lam) - lam - _sp.gammaln(k + 1.0)
    p = np.exp(logp)
    kept = math.fsum(p)
    # gammaln round-off alone perturbs the total by ~1e-13 at large lam
    if 1.0 - kept > max(tail_mass, 1e-10):
        raise ConvergenceError(f"Poisson support truncation left mass {1.0 - kept:.3e}")
    return -math.fsum(p * logp)


def gaussian_central_moment(k: int, variance: float) -> float:
    """``E[(Z - mean)^k]`` for a Gaussian: zero for odd k, ``(k-1)!! var^(k/2)`` for even k."""
    if k % 2:
        return 0.0
    if k == 0:
        return 1.0
    return math.prod(range(k - 1, 0, -2)) * variance ** (k // 2)


def gaussian_noncentral_moment(k: int, mean: float, variance: float, max_order: int = MAX_MOMENT_ORDER) -> float:
    """Raw moment ``E[Z^k]`` of ``Z ~ Normal(mean, variance)``.

    Expands ``(mean + (Z - mean))^k`` binomially over the central moments.
    """
    k = int(k)
    if k < 0 or k > max_order:
        raise DomainError(f"moment order must be in [0, {max_order}], got {k}")
    if variance < 0:
        raise DomainError(f"variance must be >= 0, got {variance}")
    if variance == 0:
        return float(mean) ** k
    terms = [
        math.comb(k, l) * gaussian_central_moment(l, variance) * float(mean) ** (k - l)
        for l in range(0, k + 1, 2)
    ]
    return math.fsum(terms)
