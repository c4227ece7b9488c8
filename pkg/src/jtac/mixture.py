"""Taylor-moment lower bound on the differential entropy of a 1-D Gaussian mixture.

For ``g(y) = sum_j a_j N(y; c_j, v_j)`` and an expansion point ``y0`` the
log-density is written as a Taylor polynomial of even order ``r`` whose
last coefficient is replaced by the supremum of ``(ln g)^(r) / r!`` over
the real line.  Taylor's theorem with Lagrange remainder then makes the
polynomial a pointwise upper bound on ``ln g``, so minus its expectation
under ``g`` (a combination of Gaussian raw moments) bounds the entropy
from below.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .errors import DomainError, NumericalInstabilityError
from .specfun import gaussian_noncentral_moment

_GRID_POINTS = 4001
_TAIL_SIGMAS = 12.0


def _validate(weights, means, variances):
    a = np.asarray(weights, dtype=float).ravel()
    c = np.asarray(means, dtype=float).ravel()
    v = np.asarray(variances, dtype=float).ravel()
    if not (a.shape == c.shape == v.shape) or a.size == 0:
        raise DomainError("weights, means and variances must be equal-length, non-empty")
    if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-12:
        raise DomainError(f"mixture weights must be >= 0 and sum to 1, got sum {a.sum()!r}")
    if np.any(~(v > 0)) or not np.all(np.isfinite(c)):
        raise DomainError("component variances must be > 0 and means finite")
    keep = a > 0
    return a[keep], c[keep], v[keep]


def log_mixture_derivatives(y, weights, means, variances, order):
    """Derivatives ``(ln g)^(k)(y)`` for ``k = 0..order``, shape ``(order+1, len(y))``.

    ``ln g`` is a log-sum-exp of quadratics, so its derivatives are the
    cumulants of the component scores under the posterior weights.  Scores
    are centred on their posterior mean before the moment-to-cumulant
    recursion, which keeps the recursion free of cancellation far from the
    component means.
    """
    a, c, v = _validate(weights, means, variances)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    logw = np.log(a)[:, None] - 0.5 * np.log(2 * np.pi * v)[:, None] - (y[None, :] - c[:, None]) ** 2 / (2 * v[:, None])
    out = np.empty((order + 1, y.size))
    out[0] = logsumexp(logw, axis=0)
    if order == 0:
        return out
    post = np.exp(logw - out[0][None, :])
    score = -(y[None, :] - c[:, None]) / v[:, None]
    mean_score = (post * score).sum(axis=0)
    out[1] = mean_score
    s = score - mean_score[None, :]
    curv = np.broadcast_to((-1.0 / v)[:, None], s.shape)
    # P_n(s, c): coefficients of h^n/n! in exp(s h + c h^2 / 2)
    prev, cur = np.ones_like(s), s
    moments = [np.ones(y.size), (post * s).sum(axis=0)]
    for k in range(1, order):
        prev, cur = cur, s * cur + k * curv * prev
        moments.append((post * cur).sum(axis=0))
    kappa = [None, moments[1]]
    for nn in range(2, order + 1):
        acc = moments[nn].copy()
        for k in range(1, nn):
            acc -= math.comb(nn - 1, k - 1) * kappa[k] * moments[nn - k]
        kappa.append(acc)
    for nn in range(2, order + 1):
        out[nn] = kappa[nn]
    return out


def _tail_limit(a, c, v, order):
    """Limit of ``(ln g)^(order)`` as |y| -> inf (the widest component takes over)."""
    if order == 0:
        return -np.inf
    if order == 2:
        return -1.0 / v.max()
    return 0.0


def _crossover_points(a, c, v, lo, hi):
    """Points where two components swap dominance of the posterior."""
    pts = []
    la = np.log(a) - 0.5 * np.log(2 * np.pi * v)
    for j in range(len(a)):
        for k in range(j + 1, len(a)):
            # la_j - (y-c_j)^2/(2v_j) = la_k - (y-c_k)^2/(2v_k)
            A = 1 / (2 * v[k]) - 1 / (2 * v[j])
            B = c[j] / v[j] - c[k] / v[k]
            C = la[j] - la[k] - c[j] ** 2 / (2 * v[j]) + c[k] ** 2 / (2 * v[k])
            if abs(A) < 1e-300:
                if B != 0:
                    pts.append(-C / B)
                continue
            disc = B * B - 4 * A * C
            if disc >= 0:
                sq = math.sqrt(disc)
                pts.extend([(-B + sq) / (2 * A), (-B - sq) / (2 * A)])
    return [p for p in pts if math.isfinite(p) and (p < lo or p > hi)]


def sup_log_mixture_derivative(weights, means, variances, order):
    """Supremum over the real line of ``(ln g)^(order)``.

    Evaluated on a dense grid spanning every component plus local grids
    around the far-out points where two components trade dominance, then
    polished with a bounded scalar search; the tail limit is included.
    """
    a, c, v = _validate(weights, means, variances)
    sd = np.sqrt(v)
    lo = float(np.min(c - _TAIL_SIGMAS * sd))
    hi = float(np.max(c + _TAIL_SIGMAS * sd))
    grids = [np.linspace(lo, hi, _GRID_POINTS)]
    span = float(sd.max())
    for p in _crossover_points(a, c, v, lo, hi):
        width = 40 * span + 1e-6 * abs(p)
        grids.append(np.linspace(p - width, p + width, 801))
    y = np.concatenate(grids)
    y.sort()
    vals = log_mixture_derivatives(y, a, c, v, order)[order]
    if not np.all(np.isfinite(vals)):
        raise NumericalInstabilityError(f"non-finite derivative of order {order}; try a smaller order")
    best = int(np.argmax(vals))
    sup = float(vals[best])
    left = y[max(best - 1, 0)]
    right = y[min(best + 1, y.size - 1)]
    if right > left:
        res = minimize_scalar(
            lambda t: -log_mixture_derivatives([t], a, c, v, order)[order][0],
            bounds=(left, right),
            method="bounded",
            options={"xatol": 1e-12 * max(1.0, abs(y[best]))},
        )
        if res.success:
            sup = max(sup, -float(res.fun))
    return max(sup, _tail_limit(a, c, v, order))


def taylor_coefficients(y0, weights, means, variances, order):
    """Taylor coefficients ``z_k = (ln g)^(k)(y0) / k!`` for ``k = 0..order``."""
    d = log_mixture_derivatives([y0], weights, means, variances, order)[:, 0]
    z = np.array([d[k] / math.factorial(k) for k in range(order + 1)])
    if not np.all(np.isfinite(z)):
        raise NumericalInstabilityError(f"non-finite Taylor coefficients up to order {order}; use a smaller order")
    return z


def mixture_moments(y0, weights, means, variances, order):
    """``E_j[(Y - y0)^k]`` per component, shape ``(order+1, n_components)``."""
    a, c, v = _validate(weights, means, variances)
    return np.array(
        [[gaussian_noncentral_moment(k, cj - y0, vj) for cj, vj in zip(c, v)] for k in range(order + 1)]
    )


def mixture_entropy_lower(weights, means, variances, y0, r=4):
    """Lower bound (nats) on the entropy of ``sum_j a_j N(c_j, v_j)``.

    ``r`` must be even.  Orders below ``r`` use the Taylor coefficients of
    ``ln g`` at ``y0``; the order-``r`` coefficient is ``sup (ln g)^(r) / r!``.
    The result is ``-sum_k sum_j a_j z_k m_kj`` with ``m_kj`` the raw moments
    of component ``j`` about ``y0``.
    """
    r = int(r)
    if r < 0 or r % 2:
        raise DomainError(f"Taylor order must be a non-negative even integer, got {r}")
    a, c, v = _validate(weights, means, variances)
    z = np.zeros(r + 1)
    if r > 0:
        z[:r] = taylor_coefficients(y0, a, c, v, r - 1)
    z[r] = sup_log_mixture_derivative(a, c, v, r) / math.factorial(r)
    m = mixture_moments(y0, a, c, v, r)
    total = float(np.einsum("k,kj,j->", z, m, a))
    if not math.isfinite(total):
        raise NumericalInstabilityError(f"entropy bound is not finite at order {r}; use a smaller order")
    return -total
