"""Finite-alphabet capacity: channel discretization, Blahut-Arimoto and exact mutual information."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as _sp
from scipy import stats
from scipy.optimize import minimize, minimize_scalar

from .bounds import BoundResult, ConstraintSet, Rate
from .channel import ArrivalMatrix
from .errors import AlphabetSizeError, ConvergenceError, DomainError

DEFAULT_OUTPUT_CAP = 2_000_000
DEFAULT_Y_TAIL_MASS = 1e-12
# probabilities below this are flushed to zero; subnormal floats slow BA by orders of magnitude
_FLUSH = 1e-250
# BA iterations used only to guess the support before the direct solve
_WARMUP = 300

__all__ = [
    "DiscreteChannel",
    "CapacityResult",
    "discretize_jtac",
    "discretize_cb",
    "blahut_arimoto",
    "mutual_information",
    "tb_rate",
]


@dataclass(frozen=True)
class DiscreteChannel:
    """A discrete memoryless channel with a cost per input letter.

    ``inputs`` is a ``(K, 2)`` array of ``(x, j)`` pairs (concentration and
    release index); ``outputs`` holds one count vector per row.  Rows of
    ``W`` sum to one; ``tail_mass_dropped[k]`` is the probability that
    truncating the count alphabet removed from row ``k`` before
    renormalisation.
    """

    W: np.ndarray
    input_costs: np.ndarray
    inputs: np.ndarray = None
    outputs: np.ndarray = None
    tail_mass_dropped: np.ndarray = None

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        if W.ndim != 2 or W.size == 0:
            raise DomainError("W must be a non-empty 2-D matrix")
        if np.any(W < 0) or np.any(np.abs(W.sum(axis=1) - 1.0) > 1e-9):
            raise DomainError("W must be non-negative with rows summing to 1")
        costs = np.array(self.input_costs, dtype=float).ravel()
        if costs.shape != (W.shape[0],) or np.any(costs < 0):
            raise DomainError("input_costs must be non-negative, one per row of W")
        inputs = np.arange(W.shape[0])[:, None] if self.inputs is None else np.asarray(self.inputs)
        outputs = np.arange(W.shape[1])[:, None] if self.outputs is None else np.asarray(self.outputs)
        dropped = np.zeros(W.shape[0]) if self.tail_mass_dropped is None else np.asarray(self.tail_mass_dropped, float)
        for name, arr in (("W", W), ("input_costs", costs), ("inputs", inputs), ("outputs", outputs), ("tail_mass_dropped", dropped)):
            arr = np.array(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_inputs(self) -> int:
        return self.W.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class CapacityResult:
    """Blahut-Arimoto output.  ``upper`` is a certified upper bound on the (cost-constrained) capacity."""

    capacity: Rate
    input_distribution: np.ndarray
    iterations: int
    gap: float
    multiplier: float
    achieved_mean_cost: float
    upper: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    @property
    def nats(self) -> float:
        return self.capacity.nats

    @property
    def bits(self) -> float:
        return self.capacity.bits


# --------------------------------------------------------------------------
# discretization


def _x_grid(cons: ConstraintSet, size: int) -> np.ndarray:
    if int(size) != size or size < 2:
        raise DomainError(f"x_grid_size must be an integer >= 2, got {size}")
    return np.linspace(0.0, cons.M, int(size))


def _count_cap(mean: float, tail: float) -> int:
    """Smallest K with ``P(Poisson(mean) > K) <= tail``."""
    if mean <= 0:
        return 0
    return int(stats.poisson.isf(tail, mean))


def _log_pmf_table(means: np.ndarray, kmax: int) -> np.ndarray:
    k = np.arange(kmax + 1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = k[None, :] * np.log(means[:, None]) - means[:, None] - _sp.gammaln(k + 1)[None, :]
    zero = means == 0
    out[zero] = -np.inf
    out[zero, 0] = 0.0
    return out


def _simplex_outputs(caps, total_cap, output_cap):
    """All count vectors with ``y_i <= caps[i]`` and ``sum(y) <= total_cap``, lexicographic order."""
    count = 0
    vectors = []
    for y in itertools.product(*(range(c + 1) for c in caps)):
        if sum(y) <= total_cap:
            count += 1
            if count > output_cap:
                raise AlphabetSizeError(
                    f"output alphabet exceeds {output_cap} symbols; use a smaller n or a larger y_tail_mass"
                )
            vectors.append(y)
    return np.array(vectors, dtype=np.int64).reshape(-1, len(caps))


def _estimate_outputs(caps, total_cap):
    size = 1
    for c in caps:
        size *= c + 1
    return min(size, math.comb(total_cap + len(caps), len(caps)))


def discretize_jtac(
    A: ArrivalMatrix,
    cons: ConstraintSet,
    x_grid_size: int,
    lambda0: float,
    y_tail_mass: float = DEFAULT_Y_TAIL_MASS,
    output_cap: int = DEFAULT_OUTPUT_CAP,
) -> DiscreteChannel:
    """Joint-output channel: inputs ``(x, j)`` on a uniform x grid times all release indices.

    Outputs are count vectors ``(y_1..y_n)``.  Coordinate ``i`` is cut at
    the Poisson quantile leaving ``y_tail_mass / (2n)`` of its largest
    mean, and vectors whose total exceeds the quantile of the largest total
    mean at ``y_tail_mass / 2`` are dropped, so every row loses at most
    ``y_tail_mass`` before renormalisation.
    """
    if lambda0 < 0:
        raise DomainError(f"lambda0 must be >= 0, got {lambda0}")
    xs = _x_grid(cons, x_grid_size)
    n, m = A.n, A.m
    caps = [_count_cap(cons.M * A.p_i_star[i] + lambda0, y_tail_mass / (2 * n)) for i in range(n)]
    total_cap = _count_cap(cons.M * A.p_star + n * lambda0, y_tail_mass / 2)
    if _estimate_outputs(caps, total_cap) > 4 * output_cap:
        raise AlphabetSizeError(f"output alphabet exceeds {output_cap} symbols; use a smaller n or a larger y_tail_mass")
    Y = _simplex_outputs(caps, total_cap, output_cap)

    X, J = np.meshgrid(xs, np.arange(m), indexing="ij")
    X, J = X.ravel(), J.ravel()
    logW = np.zeros((X.size, Y.shape[0]))
    for i in range(n):
        table = _log_pmf_table(X * A.p[i, J] + lambda0, caps[i])
        logW += table[:, Y[:, i]]
    W = np.exp(logW)
    W[W < _FLUSH] = 0.0
    kept = W.sum(axis=1)
    dropped = np.clip(1.0 - kept, 0.0, None)
    if np.any(dropped > y_tail_mass * (1 + 1e-6) + 1e-15):
        raise DomainError("count truncation dropped more than y_tail_mass; this is a bug")
    W /= kept[:, None]
    return DiscreteChannel(W, X.copy(), np.column_stack([X, J]), Y, dropped)


def discretize_cb(
    A: ArrivalMatrix,
    cons: ConstraintSet,
    x_grid_size: int,
    lambda0: float,
    y_tail_mass: float = DEFAULT_Y_TAIL_MASS,
    output_cap: int = DEFAULT_OUTPUT_CAP,
) -> DiscreteChannel:
    """Concentration-only channel: release index 0, output the total count ``Poisson(x p'_0 + n lambda0)``."""
    if lambda0 < 0:
        raise DomainError(f"lambda0 must be >= 0, got {lambda0}")
    xs = _x_grid(cons, x_grid_size)
    means = xs * A.p_prime_j[0] + A.n * lambda0
    kmax = _count_cap(float(means.max()), y_tail_mass)
    if kmax + 1 > output_cap:
        raise AlphabetSizeError(f"output alphabet exceeds {output_cap} symbols")
    W = np.exp(_log_pmf_table(means, kmax))
    W[W < _FLUSH] = 0.0
    kept = W.sum(axis=1)
    dropped = np.clip(1.0 - kept, 0.0, None)
    W /= kept[:, None]
    inputs = np.column_stack([xs, np.zeros_like(xs)])
    return DiscreteChannel(W, xs.copy(), inputs, np.arange(kmax + 1)[:, None], dropped)


# --------------------------------------------------------------------------
# Blahut-Arimoto


def _divergences(W, neg_entropy, p):
    """``D(W_x || pW)`` for every input x, with 0 log 0 = 0.

    ``neg_entropy[x] = sum_y W log W`` is precomputed, leaving one matrix-vector product.
    """
    q = p @ W
    logq = np.log(np.maximum(q, np.finfo(float).tiny))
    return neg_entropy - W @ logq


def mutual_information(ch: DiscreteChannel, input_dist) -> Rate:
    """Exact ``I(X; Y)`` on the finite alphabets, in nats."""
    p = np.asarray(input_dist, dtype=float).ravel()
    if p.shape != (ch.n_inputs,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise DomainError("input_dist must be a probability vector over the channel inputs")
    d = _divergences(ch.W, _sp.xlogy(ch.W, ch.W).sum(axis=1), p)
    return Rate(float(max(np.dot(p, d), 0.0)))


def _ba_fixed_multiplier(W, wlogw, costs, s, p0, tol, max_iter, strict=True):
    """Capacity-cost BA at multiplier ``s``: maximise ``I(p) - s E_p[cost]``.

    Stops when ``max_x (D_x - s c_x) - log sum_x p_x exp(D_x - s c_x) <= tol``;
    both terms sandwich the optimum of the Lagrangian.
    """
    # warm starts keep a uniform floor so flushed inputs can re-enter the support
    p = p0 + 1e-6 / p0.size
    p /= p.sum()
    gap = float("inf")
    for it in range(1, max_iter + 1):
        d = _divergences(W, wlogw, p) - s * costs
        with np.errstate(divide="ignore"):
            logp = np.log(p)
        z = logp + d
        lower = float(_sp.logsumexp(z))
        upper = float(np.max(d))
        gap = upper - lower
        if gap <= tol:
            return p, it, gap, upper
        p = np.exp(z - lower)
        p[p < _FLUSH] = 0.0
        p /= p.sum()
    if not strict:
        return p, max_iter, gap, upper
    raise ConvergenceError(f"Blahut-Arimoto did not reach gap {tol:.1e} in {max_iter} iterations (gap {gap:.3e})",
                           iterations=max_iter, last_value=gap)


def _dual_upper(d, costs, cap):
    """``min_{s >= 0} max_x (d_x - s c_x) + s cap``: an upper bound on the cost-constrained capacity.

    ``d`` holds ``D(W_x || q)`` for any output law ``q``; returns ``(bound, s)``.
    Without a cap the bound is ``max_x d_x``.
    """
    if cap is None:
        return float(np.max(d)), 0.0

    def g(s):
        return float(np.max(d - s * costs) + s * cap)

    slack = cap - float(costs.min())
    if slack <= 0:
        return g(0.0), 0.0
    s_hi = max(float(d.max() - d[costs == costs.min()].max()) / slack, 1e-12)
    res = minimize_scalar(g, bounds=(0.0, s_hi), method="bounded", options={"xatol": 1e-12 * max(1.0, s_hi)})
    best = min((g(0.0), 0.0), (g(s_hi), s_hi), (float(res.fun), float(res.x)))
    return best


def _restricted_capacity(W, wlogw, costs, cap, p0):
    """Maximise ``I(p)`` over the simplex with ``c . p <= cap`` (no cap if None) by SLSQP."""
    k = W.shape[0]

    def neg_info(p):
        p = np.clip(p, 0.0, None)
        d = _divergences(W, wlogw, p)
        return -float(p @ d), -(d - 1.0)

    constraints = [{"type": "eq", "fun": lambda p: p.sum() - 1.0, "jac": lambda p: np.ones(k)}]
    if cap is not None:
        constraints.append({"type": "ineq", "fun": lambda p: cap - p @ costs, "jac": lambda p: -costs})
    res = minimize(
        neg_info,
        p0,
        jac=True,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * k,
        constraints=constraints,
        options={"maxiter": 1000, "ftol": 1e-15},
    )
    p = np.clip(res.x, 0.0, None)
    return p / p.sum(), int(res.nit)


def _onto_cap(p, costs, cap):
    """Shift a sliver of mass to the cheapest input when rounding left ``c . p`` above the cap."""
    cost = float(p @ costs)
    if cap is None or cost <= cap:
        return p
    cheap = int(np.argmin(costs))
    eps = (cost - cap) / (cost - costs[cheap])
    out = (1.0 - eps) * p
    out[cheap] += eps
    return out


def _polish_constrained(ch, wlogw, cap, p_guess, tol, rounds=20, max_active=64):
    """Constrained capacity by SLSQP over a growing set of candidate inputs.

    Candidates start from the support of ``p_guess``; inputs that violate
    the dual certificate most are added each round.  Returns
    ``(p, gap, s, upper, rounds_used)`` with ``gap`` the certified
    distance to the dual bound.
    """
    W, costs = ch.W, ch.input_costs
    k = W.shape[0]
    if k <= max_active:
        active = np.arange(k)
    else:
        order = np.argsort(-p_guess, kind="stable")
        active = np.sort(order[: max_active // 2])
    p = p_guess
    gap, s, upper = float("inf"), 0.0, float("inf")
    for r in range(1, rounds + 1):
        start = p[active] + 1e-9
        start /= start.sum()
        sub, _ = _restricted_capacity(W[active], wlogw[active], costs[active], cap, start)
        p = np.zeros(k)
        p[active] = sub
        p = _onto_cap(p, costs, cap)
        d = _divergences(W, wlogw, p)
        info = float(p @ d)
        upper, s = _dual_upper(d, costs, cap)
        gap = upper - info
        if gap <= tol or active.size == k:
            return p, gap, s, upper, r
        score = d - s * costs
        outside = np.setdiff1d(np.arange(k), active)
        add = outside[np.argsort(-score[outside], kind="stable")[: max(8, active.size // 4)]]
        keep = active[p[active] > 1e-12]
        active = np.union1d(keep, add)
    return p, gap, s, upper, rounds


def blahut_arimoto(
    ch: DiscreteChannel,
    cost_cap: float | None = None,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    outer_iterations: int = 12,
    cost_tol: float | None = None,
    method: str = "auto",
) -> CapacityResult:
    """Channel capacity in nats, optionally under ``E[cost] <= cost_cap``.

    * ``method="auto"`` seeds the support with a few BA iterations, then
      maximises I directly (under the cost constraint, if any) with SLSQP
      and certifies the result with the dual bound
      ``min_s max_x (D(W_x||q) - s c_x) + s cap``.  If the certified gap
      stays above ``tol`` it falls back to the classic path below.
    * ``method="bisection"`` runs classic BA stopped by the capacity gap.
      When its optimum already meets the cap that is the answer
      (multiplier 0); otherwise it bisects the cost multiplier ``s``
      (``outer_iterations`` steps) until the mean cost lies in
      ``[cost_cap - cost_tol, cost_cap]``, ``cost_tol = 1e-4 cost_cap`` by
      default.  If the window is missed the two bracketing distributions
      are mixed so the cost sits on the cap.
    """
    if method not in ("auto", "bisection"):
        raise DomainError(f"unknown method {method!r}")
    W = ch.W
    wlogw = _sp.xlogy(W, W).sum(axis=1)
    costs = ch.input_costs
    p_init = np.full(ch.n_inputs, 1.0 / ch.n_inputs)
    total_iter = 0

    def finish(p, s, gap, upper, note):
        p = np.clip(p, 0.0, None)
        p /= p.sum()
        info = mutual_information(ch, p)
        return CapacityResult(info, p, total_iter, gap, s, float(p @ costs), upper, {"mode": note})

    if cost_cap is not None and cost_cap < costs.min():
        raise DomainError(f"cost cap {cost_cap} is below the cheapest input cost {costs.min()}")

    if method == "auto":
        warm, it, _, _ = _ba_fixed_multiplier(W, wlogw, costs, 0.0, p_init, tol, min(_WARMUP, max_iter), strict=False)
        total_iter += it
        p, gap, s, upper, rounds = _polish_constrained(ch, wlogw, cost_cap, warm, tol)
        if gap <= tol:
            res = finish(p, s, gap, upper, "direct")
            res.diagnostics["rounds"] = rounds
            return res

    p0, it, gap, up = _ba_fixed_multiplier(W, wlogw, costs, 0.0, p_init, tol, max_iter)
    total_iter += it
    cost0 = float(p0 @ costs)
    if cost_cap is None or cost0 <= cost_cap:
        return finish(p0, 0.0, gap, up, "unconstrained")

    cost_tol = 1e-4 * cost_cap if cost_tol is None else cost_tol
    # bracket: s_lo gives cost > cap, s_hi gives cost <= cap
    s_lo, p_lo, cost_lo, gap_lo = 0.0, p0, cost0, gap
    s_hi = 1.0 / max(cost_cap, 1e-12)
    while True:
        p_hi, it, gap_hi, up_hi = _ba_fixed_multiplier(W, wlogw, costs, s_hi, p_lo, tol, max_iter)
        total_iter += it
        cost_hi = float(p_hi @ costs)
        if cost_hi <= cost_cap:
            break
        s_lo, p_lo, cost_lo, gap_lo = s_hi, p_hi, cost_hi, gap_hi
        s_hi *= 4
        if s_hi > 1e12:
            raise ConvergenceError("cost multiplier diverged while bracketing the constraint", last_value=s_hi)
    if cost_hi >= cost_cap - cost_tol:
        return finish(p_hi, s_hi, gap_hi, up_hi + s_hi * cost_cap, "bisection")

    for _ in range(outer_iterations):
        s_mid = 0.5 * (s_lo + s_hi)
        p_mid, it, gap_mid, up_mid = _ba_fixed_multiplier(W, wlogw, costs, s_mid, p_hi, tol, max_iter)
        total_iter += it
        cost_mid = float(p_mid @ costs)
        if cost_mid > cost_cap:
            s_lo, p_lo, cost_lo, gap_lo = s_mid, p_mid, cost_mid, gap_mid
        else:
            s_hi, p_hi, cost_hi, gap_hi, up_hi = s_mid, p_mid, cost_mid, gap_mid, up_mid
            if cost_hi >= cost_cap - cost_tol:
                return finish(p_hi, s_hi, gap_hi, up_hi + s_hi * cost_cap, "bisection")

    # time-share the bracketing solutions so the cost sits on the cap
    theta = (cost_lo - cost_cap) / (cost_lo - cost_hi)
    mix = _onto_cap(theta * p_hi + (1 - theta) * p_lo, costs, cost_cap)
    return finish(mix, s_hi, max(gap_lo, gap_hi), up_hi + s_hi * cost_cap, "mixture")


# --------------------------------------------------------------------------
# timing-only rate


def _timing_channel(A: ArrivalMatrix, i: int, x: float, lambda0: float, y_tail_mass: float) -> DiscreteChannel:
    means = x * A.p[i] + lambda0
    kmax = _count_cap(float(means.max()), y_tail_mass)
    W = np.exp(_log_pmf_table(means, kmax))
    kept = W.sum(axis=1)
    W /= kept[:, None]
    return DiscreteChannel(W, np.zeros(A.m), np.column_stack([np.full(A.m, x), np.arange(A.m)]),
                           np.arange(kmax + 1)[:, None], np.clip(1 - kept, 0, None))


def tb_rate(
    A: ArrivalMatrix,
    x_fixed: float,
    lambda0: float = 0.0,
    mode: str = "uniform",
    y_tail_mass: float = DEFAULT_Y_TAIL_MASS,
    tol: float = 1e-9,
) -> BoundResult:
    """``max_i I(T_x; Y_i)`` at fixed concentration, uniform release time by default.

    ``mode="ba"`` optimises the release-time distribution per sub-interval
    with Blahut-Arimoto instead.
    """
    if not x_fixed > 0:
        raise DomainError(f"x_fixed must be positive, got {x_fixed}")
    if mode not in ("uniform", "ba"):
        raise DomainError(f"unknown tb mode {mode!r}")
    per = []
    for i in range(A.n):
        ch = _timing_channel(A, i, x_fixed, lambda0, y_tail_mass)
        if mode == "uniform":
            per.append(mutual_information(ch, np.full(A.m, 1.0 / A.m)).nats)
        else:
            per.append(blahut_arimoto(ch, tol=tol).nats)
    best = int(np.argmax(per))
    return BoundResult(Rate(per[best]), best + 1, tuple(per), {"mode": mode, "x": x_fixed})
