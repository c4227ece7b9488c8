"""Closed-form lower and upper bounds on the JTAC channel capacity.

All quantities are in nats internally; :class:`Rate` converts to bits on
request.  Sub-interval indices reported as ``argmax_interval`` are 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import brentq

from .channel import ArrivalMatrix
from .errors import (
    ConvergenceError,
    DegenerateVarianceError,
    DomainError,
    InfeasibleConstraintError,
    JTACError,
    RootNotBracketedError,
)
from .mixture import mixture_entropy_lower
from .specfun import e1_scaled, ei_scaled, erf, erfi, hyp2f2_half, poisson_entropy

LN2 = math.log(2.0)
LOG_2PI_E = math.log(2 * math.pi * math.e)

__all__ = [
    "Rate",
    "ConstraintSet",
    "BoundConfig",
    "BoundResult",
    "SecondBound",
    "ThirdBound",
    "BoundReport",
    "mu_equation_rhs",
    "solve_mu",
    "mu_density",
    "explog_correction",
    "lower_bound_1",
    "phi_normalizer",
    "phi_mean",
    "phi_equation_residual",
    "solve_phi",
    "lower_bound_2",
    "timing_rate_given_x",
    "mixture_entropy_lower",
    "solve_u",
    "truncated_gaussian_stats",
    "lower_bound_3",
    "sym_kl_interval_bound",
    "upper_bound",
    "evaluate_bounds",
]


@dataclass(frozen=True)
class Rate:
    """An information rate; stored in nats, ``bits`` is ``nats / ln 2``."""

    nats: float

    @property
    def bits(self) -> float:
        return self.nats / LN2

    @property
    def clamped(self) -> "Rate":
        """The rate floored at zero (zero is always achievable)."""
        return Rate(max(self.nats, 0.0))

    def __float__(self):
        return float(self.nats)


@dataclass(frozen=True)
class ConstraintSet:
    """Average (``E_m``) and peak (``M``) constraints on the released concentration."""

    E_m: float
    M: float

    def __post_init__(self):
        if not (0 < self.E_m <= self.M) or not math.isfinite(self.M):
            raise InfeasibleConstraintError(f"need 0 < E_m <= M, got E_m={self.E_m}, M={self.M}")

    @property
    def alpha(self) -> float:
        return self.E_m / self.M

    @classmethod
    def from_ratio(cls, M, alpha):
        return cls(E_m=alpha * M, M=M)


@dataclass(frozen=True)
class BoundConfig:
    """Numerical knobs of the closed-form bounds.

    ``variant`` selects the assembly of the adjacent-difference bound:
    ``"corrected"`` uses a normalised input density and a sign-consistent
    assembly, ``"literal"`` keeps the unnormalised density and the original term order.
    """

    eta: float | None = None
    taylor_order_r: int = 4
    root_tol: float = 1e-10
    y_tail_mass: float = 1e-12
    variant: Literal["corrected", "literal"] = "corrected"

    def __post_init__(self):
        if self.eta is not None and not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta}")
        if int(self.taylor_order_r) != self.taylor_order_r or self.taylor_order_r < 0 or self.taylor_order_r % 2:
            raise DomainError(f"taylor_order_r must be a non-negative even integer, got {self.taylor_order_r}")
        if not self.root_tol > 0 or not 0 < self.y_tail_mass < 1:
            raise DomainError("root_tol and y_tail_mass must be positive")
        if self.variant not in ("corrected", "literal"):
            raise DomainError(f"unknown variant {self.variant!r}")

    def eta_for(self, cons: ConstraintSet) -> float:
        return cons.E_m if self.eta is None else self.eta


@dataclass(frozen=True)
class BoundResult:
    """A bound maximised over receiver sub-intervals."""

    rate: Rate
    argmax_interval: int
    per_interval: tuple[float, ...]
    details: dict = field(default_factory=dict)

    @property
    def nats(self) -> float:
        return self.rate.nats

    @property
    def bits(self) -> float:
        return self.rate.bits


def _argmax(values) -> int:
    arr = np.asarray(values, dtype=float)
    if not np.any(np.isfinite(arr)):
        raise InfeasibleConstraintError("no sub-interval admits the bound")
    # nanargmax returns the first maximum, i.e. ties go to the smaller index
    return int(np.nanargmax(np.where(np.isfinite(arr), arr, np.nan)))


# --------------------------------------------------------------------------
# single best sub-interval


def _scaled_erf_ratio(mu: float) -> float:
    """``sqrt(pi) erf(sqrt(mu)) / sqrt(mu)``, continued analytically to mu <= 0."""
    if abs(mu) < 1e-3:
        return 2.0 * sum((-mu) ** k / (math.factorial(k) * (2 * k + 1)) for k in range(8))
    if mu > 0:
        r = math.sqrt(mu)
        return math.sqrt(math.pi) * float(erf(r)) / r
    r = math.sqrt(-mu)
    return math.sqrt(math.pi) * float(erfi(r)) / r


def mu_equation_rhs(mu: float) -> float:
    """``1/(2 mu) - exp(-mu) / (sqrt(mu pi) erf(sqrt(mu)))``: mean/M of the sqrt-exponential density.

    Decreases from 1 (mu -> -inf) through 1/3 (mu = 0) to 0 (mu -> inf);
    negative mu is handled through ``erfi``.
    """
    if abs(mu) < 0.5:
        num = sum((-mu) ** l / (math.factorial(l) * (2 * l + 3)) for l in range(20))
        den = sum((-mu) ** k / (math.factorial(k) * (2 * k + 1)) for k in range(20))
        return num / den
    return 1.0 / (2 * mu) - math.exp(-mu) / _scaled_erf_ratio(mu) / mu


def solve_mu(alpha: float, tol: float = 1e-10) -> float:
    """Root ``mu`` of ``mu_equation_rhs(mu) = alpha`` for ``0 < alpha < 1``."""
    if not 0 < alpha < 1:
        raise InfeasibleConstraintError(f"E_m/M = {alpha} admits no density of the required form")
    lo, hi = -1.0, 1.0
    while mu_equation_rhs(lo) < alpha:
        lo *= 2
        if lo < -700:
            raise RootNotBracketedError(f"no bracket for alpha={alpha}", brackets=[(lo, hi)])
    while mu_equation_rhs(hi) > alpha:
        hi *= 2
        if hi > 1e12:
            raise RootNotBracketedError(f"no bracket for alpha={alpha}", brackets=[(lo, hi)])
    mu = brentq(lambda t: mu_equation_rhs(t) - alpha, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    residual = abs(mu_equation_rhs(mu) - alpha)
    if residual > tol:
        raise ConvergenceError(f"mu residual {residual:.3e} exceeds {tol:.1e}", last_value=mu)
    return float(mu)


def mu_density(x, mu: float, M: float):
    """Input density ``exp(-mu x / M) / (sqrt(M x) * sqrt(pi) erf(sqrt(mu))/sqrt(mu))`` on (0, M]."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.exp(-mu * x / M) / (np.sqrt(M * x) * _scaled_erf_ratio(mu))
    return np.where((x > 0) & (x <= M), out, 0.0)


def explog_correction(p_star_i: float, M: float, mu: float) -> float:
    """Closed-form bound on ``E[log(1 + 1/(12 p X))]`` with the exponential factor dropped.

    Written as ``(4 atan(sqrt(12 M p))/sqrt(12 M p) + 2 log(1 + 1/(12 p M))) / G(mu)``
    with ``G(mu) = sqrt(pi) erf(sqrt(mu)) / sqrt(mu)``, which equals the
    usual sqrt(mu) form for mu > 0 and stays real for mu <= 0.
    """
    if not (p_star_i > 0 and M > 0):
        raise DomainError("explog_correction needs p > 0 and M > 0")
    s = math.sqrt(12 * M * p_star_i)
    return (4 * math.atan(s) / s + 2 * math.log1p(1 / (12 * p_star_i * M))) / _scaled_erf_ratio(mu)


def lower_bound_1(A: ArrivalMatrix, cons: ConstraintSet, cfg: BoundConfig = BoundConfig()) -> BoundResult:
    """Rate achievable by reading only the single most informative sub-interval.

    Rows containing a zero arrival probability are skipped: the reference
    input density behind the bound needs ``p_ij > 0`` for every release index.
    """
    mu = solve_mu(cons.alpha, cfg.root_tol)
    eta = cfg.eta_for(cons)
    m, M, alpha = A.m, cons.M, cons.alpha
    head = math.log(m) + 0.5 * math.log(M) + math.log(_scaled_erf_ratio(mu)) + alpha * mu - m - 0.5 * LOG_2PI_E
    per = []
    for i in range(A.n):
        row = A.p[i]
        if np.any(row <= 0):
            per.append(float("nan"))
            continue
        p_i = float(row.max())
        log_k = -math.log(float(np.sum(1.0 / row)))
        per.append(
            head
            - math.log(eta * p_i)
            - log_k
            - 0.5 * math.log(p_i)
            - 0.5 * explog_correction(p_i, M, mu)
        )
    best = _argmax(per)
    return BoundResult(Rate(per[best]), best + 1, tuple(per), {"mu": mu})


# --------------------------------------------------------------------------
# sum-then-time


def phi_normalizer(phi: float, b: float, M: float) -> float:
    """``int_0^M exp(phi x) / (b x + 1) dx`` through scaled exponential integrals."""
    if phi == 0.0:
        return math.log1p(b * M) / b
    if phi < 0:
        a = -phi / b
        return (e1_scaled(a) - math.exp(phi * M) * e1_scaled(a - phi * M)) / b
    if phi * M > 700:
        raise OverflowError(f"phi * M = {phi * M} overflows the normaliser")
    w1 = phi / b
    w2 = phi * (M + 1 / b)
    return (math.exp(phi * M) * ei_scaled(w2) - ei_scaled(w1)) / b


def phi_mean(phi: float, b: float, M: float) -> float:
    """Mean of the density ``exp(phi x) / (b x + 1)`` normalised on [0, M]."""
    z = phi_normalizer(phi, b, M)
    mass = M if phi == 0.0 else math.expm1(phi * M) / phi
    return (mass / z - 1.0) / b


def phi_equation_residual(phi: float, cons: ConstraintSet, p_star: float) -> float:
    """Relative residual of ``Z(phi) = (exp(phi M) - 1) / (b phi (E_m + 1/b))``."""
    b = 12.0 * p_star
    z = phi_normalizer(phi, b, cons.M)
    mass = cons.M if phi == 0.0 else math.expm1(phi * cons.M) / phi
    rhs = mass / (b * (cons.E_m + 1.0 / b))
    return abs(z - rhs) / abs(rhs)


@dataclass(frozen=True)
class PhiRoot:
    phi: float
    c_prime: float
    residual: float = 0.0
    iterations: int = 0

    def __iter__(self):
        return iter((self.phi, self.c_prime))


def solve_phi(cons: ConstraintSet, p_star: float, tol: float = 1e-10) -> PhiRoot:
    """Exponent ``phi`` and normaliser ``c'`` of ``c' exp(phi x)/(b x + 1)``, ``b = 12 p*``, with mean ``E_m``.

    Unpacks as ``phi, c_prime = solve_phi(...)``.
    """
    if not p_star > 0:
        raise DomainError(f"p* must be positive, got {p_star}")
    if not cons.E_m < cons.M:
        raise InfeasibleConstraintError("E_m = M forces a point mass at M; no density of this family")
    b, M = 12.0 * p_star, cons.M

    def g(phi):
        return phi_mean(phi, b, M) - cons.E_m

    g0 = g(0.0)
    if g0 == 0.0:
        return PhiRoot(0.0, 1.0 / phi_normalizer(0.0, b, M))
    step = -1.0 / M if g0 > 0 else 1.0 / M
    tried = []
    far = step
    while True:
        try:
            val = g(far)
        except OverflowError:
            raise RootNotBracketedError(f"no sign change for E_m={cons.E_m}, M={M}", brackets=tried) from None
        tried.append((far, val))
        if np.sign(val) != np.sign(g0):
            break
        if abs(far) * M > 700:
            raise RootNotBracketedError(f"no sign change for E_m={cons.E_m}, M={M}", brackets=tried)
        far *= 2
    near = far / 2 if len(tried) > 1 else 0.0
    lo, hi = sorted((near, far))
    phi, info = brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500, full_output=True)
    residual = phi_equation_residual(phi, cons, p_star)
    if residual > tol:
        raise ConvergenceError(f"phi residual {residual:.3e} exceeds {tol:.1e}", last_value=phi)
    return PhiRoot(float(phi), 1.0 / phi_normalizer(phi, b, M), residual, info.iterations)


@dataclass(frozen=True)
class SecondBound:
    """The two sum-then-time bounds; ``r1`` carries ``-log m - 1``, ``r2`` carries ``-m``."""

    r1: Rate
    r2: Rate
    argmax_interval: int
    phi: float
    c_prime: float
    details: dict = field(default_factory=dict)

    @property
    def best(self) -> Rate:
        return self.r1 if self.r1.nats >= self.r2.nats else self.r2


def lower_bound_2(A: ArrivalMatrix, cons: ConstraintSet, cfg: BoundConfig = BoundConfig()) -> SecondBound:
    """Rates from decoding the concentration from the total count, then timing from one sub-interval.

    The leading logarithm of m is taken in nats like every other term.
    """
    if np.any(A.p_prime_j <= 0):
        raise InfeasibleConstraintError("some release time delivers no molecule within the symbol")
    root = solve_phi(cons, A.p_star, cfg.root_tol)
    eta = cfg.eta_for(cons)
    m = A.m
    log_k_prime = -math.log(float(np.sum(1.0 / A.p_prime_j)))
    h_pois = [poisson_entropy(cons.M * pt) for pt in A.p_tilde_i]
    best = _argmax(h_pois)
    common = (
        math.log(m)
        - math.log(root.c_prime)
        - cons.E_m * root.phi
        - math.log(eta * A.p_star)
        - LOG_2PI_E
        - log_k_prime
        + math.log(12.0)
        + h_pois[best]
    )
    r1 = common - math.log(m) - 1.0
    r2 = common - m
    return SecondBound(
        Rate(r1), Rate(r2), best + 1, root.phi, root.c_prime,
        {"phi_residual": root.residual, "phi_iterations": root.iterations},
    )


def timing_rate_given_x(A: ArrivalMatrix, x: float, m: int | None = None) -> BoundResult:
    """Extra timing rate at a fixed concentration ``x``, best sub-interval.

    ``log m + mean_j h(Poisson(p_ij x)) - log(p_i* x + 1/12)`` in nats.
    """
    if not x > 0:
        raise DomainError(f"x must be positive, got {x}")
    m = A.m if m is None else int(m)
    if m != A.m:
        raise DomainError(f"m={m} does not match the arrival matrix ({A.m} release times)")
    per = []
    for i in range(A.n):
        row = A.p[i]
        mean_h = float(np.mean([poisson_entropy(p * x) for p in row]))
        per.append(math.log(m) + mean_h - math.log(row.max() * x + 1.0 / 12.0))
    best = _argmax(per)
    return BoundResult(Rate(per[best]), best + 1, tuple(per), {"x": x})


# --------------------------------------------------------------------------
# adjacent-difference


def _half_gauss_mean_ratio(s: float) -> float:
    """E[X]/M for density ~ exp(-x^2/u) on [0, M] with s = M / sqrt(u)."""
    if s < 1e-4:
        return 0.5 - s * s / 12.0
    return -math.expm1(-s * s) / (s * math.sqrt(math.pi) * float(erf(s)))


def solve_u(cons: ConstraintSet, tol: float = 1e-10) -> float:
    """Width ``u`` of the truncated half-Gaussian ``exp(-x^2/u)`` on [0, M] with mean ``E_m``."""
    alpha = cons.alpha
    if not 0 < alpha < 0.5:
        raise InfeasibleConstraintError(f"a decreasing half-Gaussian on [0, M] has mean below M/2; E_m/M={alpha}")
    lo, hi = 1e-6, 1.0
    while _half_gauss_mean_ratio(hi) > alpha:
        hi *= 2
        if hi > 1e8:
            raise RootNotBracketedError(f"no bracket for u at alpha={alpha}", brackets=[(lo, hi)])
    s = brentq(lambda t: _half_gauss_mean_ratio(t) - alpha, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    if abs(_half_gauss_mean_ratio(s) - alpha) > tol:
        raise ConvergenceError("u equation not solved to tolerance", last_value=s)
    return (cons.M / s) ** 2


def truncated_gaussian_stats(u: float, M: float) -> dict:
    """Normaliser, ``E[log X]``, ``E[X^2]`` and entropy of ``exp(-x^2/u)`` on [0, M]."""
    z = M / math.sqrt(u)
    norm = 0.5 * math.sqrt(math.pi * u) * float(erf(z))
    hyp = hyp2f2_half(-(z * z))
    e_log = math.log(M) - M * hyp / norm
    e_sq = 0.5 * u - 0.5 * u * M * math.exp(-z * z) / norm
    return {
        "normalizer": norm,
        "hyp2f2": hyp,
        "e_log_x": e_log,
        "e_x2": e_sq,
        "entropy": math.log(norm) + e_sq / u,
    }


@dataclass(frozen=True)
class ThirdBound:
    rate: Rate
    argmax_interval: int
    u: float
    concentration_part: float
    timing_per_interval: tuple[float, ...]
    details: dict = field(default_factory=dict)

    @property
    def nats(self) -> float:
        return self.rate.nats

    @property
    def bits(self) -> float:
        return self.rate.bits


def _difference_mixture_entropy(A: ArrivalMatrix, i: int, x: float, r: int) -> float:
    """Entropy bound for ``Y_i - Y_{i-1}`` given ``X = x`` with uniform release time."""
    q = A.q[i - 2]
    qp = A.q_prime[i - 2]
    if np.any(qp <= 0):
        raise DegenerateVarianceError(f"q'_{i}j = 0 for some release index")
    weights = np.full(A.m, 1.0 / A.m)
    return mixture_entropy_lower(weights, x * q, x * qp, y0=x * q[0], r=r)


def lower_bound_3(A: ArrivalMatrix, cons: ConstraintSet, cfg: BoundConfig = BoundConfig()) -> ThirdBound:
    """Rate from the total count (concentration) plus adjacent-count differences (timing).

    The input is uniform in release time and a half-Gaussian
    ``exp(-x^2/u)`` on [0, M] in concentration with ``u`` set by the mean
    constraint.  Difference laws are Gaussian and evaluated at ``X = E_m``.

    ``variant="corrected"``: normalised density, concentration part
    ``h(X) - E[log X]/2 - log(2 pi e)/2 - log(eta p*) - m - log k' - mean_j log(p'_j)/2``
    plus timing part ``H_lower(mixture) - mean_j log(2 pi e E_m q'_ij)/2``.
    ``variant="literal"``: the unnormalised assembly, term by term.
    """
    if A.n < 2:
        raise DomainError("the difference bound needs at least two sub-intervals")
    if np.any(A.p_prime_j <= 0):
        raise InfeasibleConstraintError("some release time delivers no molecule within the symbol")
    u = solve_u(cons, cfg.root_tol)
    st = truncated_gaussian_stats(u, cons.M)
    eta = cfg.eta_for(cons)
    m, M, E_m = A.m, cons.M, cons.E_m
    log_k_prime = -math.log(float(np.sum(1.0 / A.p_prime_j)))
    mean_log_pprime = float(np.mean(np.log(A.p_prime_j)))
    tail = -math.log(eta * A.p_star) - m - log_k_prime - 0.5 * mean_log_pprime

    per = [float("nan")]
    for i in range(2, A.n + 1):
        try:
            mix = _difference_mixture_entropy(A, i, E_m, cfg.taylor_order_r)
        except DegenerateVarianceError:
            per.append(float("nan"))
            continue
        qp = A.q_prime[i - 2]
        if cfg.variant == "corrected":
            per.append(mix - 0.5 * float(np.mean(np.log(2 * math.pi * math.e * E_m * qp))))
        else:
            per.append(mix + float(np.sum(0.5 * np.log(2 * math.pi * math.e * qp))) / (2 * m))
    best = _argmax(per)

    if cfg.variant == "corrected":
        conc = st["entropy"] - 0.5 * st["e_log_x"] - 0.5 * LOG_2PI_E + tail
    else:
        z = M / math.sqrt(u)
        conc = (
            math.log(M) * float(erf(z)) / (2 * m)
            - M * st["hyp2f2"] / (2 * m * math.sqrt(math.pi * u))
            + 0.5 * math.log(2 * math.pi * u * math.e)
            + tail
        )
    value = conc + per[best]
    return ThirdBound(
        Rate(value), best + 1, u, conc, tuple(per),
        {"variant": cfg.variant, "taylor_order_r": cfg.taylor_order_r, **{k: v for k, v in st.items()}},
    )


# --------------------------------------------------------------------------
# upper bound


def sym_kl_interval_bound(A: ArrivalMatrix, i: int, cons: ConstraintSet, lambda0: float) -> float:
    """Symmetric-KL bound on ``I(X, T_x; Y_i)`` in nats."""
    if not lambda0 > 0:
        raise DomainError("the symmetric-KL bound diverges without environmental noise (lambda0 = 0)")
    if cons.E_m > cons.M / 2:
        raise InfeasibleConstraintError("the binary-input maximisation assumes E_m <= M/2")
    if not 1 <= i <= A.n:
        raise DomainError(f"sub-interval {i} out of range 1..{A.n}")
    p = float(A.p_i_star[i - 1])
    return cons.E_m * p / cons.M * (cons.M - cons.E_m) * math.log1p(cons.M * p / lambda0)


def upper_bound(A: ArrivalMatrix, cons: ConstraintSet, lambda0: float) -> Rate:
    """Sum of the per-sub-interval symmetric-KL bounds."""
    return Rate(math.fsum(sym_kl_interval_bound(A, i, cons, lambda0) for i in range(1, A.n + 1)))


# --------------------------------------------------------------------------
# report


@dataclass
class BoundReport:
    """Every closed-form rate for one parameter point, with solver diagnostics."""

    lb1: Rate | None = None
    lb2_r1: Rate | None = None
    lb2_r2: Rate | None = None
    lb3: Rate | None = None
    timing_given_x: Rate | None = None
    ub: Rate | None = None
    mu: float | None = None
    phi: float | None = None
    c_prime: float | None = None
    u: float | None = None
    argmax_interval: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def rates(self) -> dict:
        names = ("lb1", "lb2_r1", "lb2_r2", "lb3", "timing_given_x", "ub")
        return {k: getattr(self, k) for k in names if getattr(self, k) is not None}


def evaluate_bounds(
    A: ArrivalMatrix,
    cons: ConstraintSet,
    cfg: BoundConfig = BoundConfig(),
    lambda0: float | None = None,
    x_timing: float | None = None,
) -> BoundReport:
    """Compute every bound that applies; failures are recorded in ``errors``."""
    rep = BoundReport()
    try:
        r = lower_bound_1(A, cons, cfg)
        rep.lb1, rep.mu = r.rate, r.details["mu"]
        rep.argmax_interval["lb1"] = r.argmax_interval
    except JTACError as exc:
        rep.errors["lb1"] = str(exc)
    try:
        r2 = lower_bound_2(A, cons, cfg)
        rep.lb2_r1, rep.lb2_r2, rep.phi, rep.c_prime = r2.r1, r2.r2, r2.phi, r2.c_prime
        rep.argmax_interval["lb2"] = r2.argmax_interval
        rep.diagnostics.update(r2.details)
    except JTACError as exc:
        rep.errors["lb2"] = str(exc)
    try:
        r3 = lower_bound_3(A, cons, cfg)
        rep.lb3, rep.u = r3.rate, r3.u
        rep.argmax_interval["lb3"] = r3.argmax_interval
    except JTACError as exc:
        rep.errors["lb3"] = str(exc)
    try:
        rt = timing_rate_given_x(A, cons.E_m if x_timing is None else x_timing)
        rep.timing_given_x = rt.rate
        rep.argmax_interval["timing_given_x"] = rt.argmax_interval
    except JTACError as exc:
        rep.errors["timing_given_x"] = str(exc)
    if lambda0 is not None:
        try:
            rep.ub = upper_bound(A, cons, lambda0)
        except JTACError as exc:
            rep.errors["ub"] = str(exc)
    return rep
