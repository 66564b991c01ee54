"""
Dirichlet coefficients, the Euler product and the completed L-function.

The completed function Lambda(u) = A^u Gamma(u) L(u), A = sqrt(N)/(2 pi),
is evaluated by the two-sided incomplete-gamma expansion split at t:

    Lambda(u) = sum a_n [ (A/n)^u Gamma(u, nt/A) + w (A/n)^(2-u) Gamma(2-u, n/(tA)) ]

The value does not depend on t when w is right, which is how the sign is
found. xi(s) = N^(-1/4) (2 pi)^(1/2) Lambda(s + 1/2).
"""

import logging
import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import mpmath
from mpmath import mpc, mpf
from sympy import divisor_count, factorint, primerange

from .constants import (DIVISOR_CUBE_ROOT_BOUND, EULER_REGION_MIN, ROOT_NUMBER_SPLITS,
                        ROOT_NUMBER_TEST_POINTS)
from .errors import HasseViolation, IndeterminateSign, NeedMoreCoeffs, RegionError
from .numerics import DEFAULT_PRECISION, PrecisionConfig, gamma, upper_incomplete_gamma_with_error

logger = logging.getLogger("lfunction")


@dataclass(frozen=True)
class XiValue:
    s: mpc
    value: mpc
    error_bound: mpf


@dataclass(frozen=True)
class EulerValue:
    s: mpc
    value: mpc
    error_bound: mpf
    tail_bound: mpf


class LFunctionContext:
    """
    Per-curve state: conductor, sign, and a growable cache of exact a_n.

    ``ap_source`` supplies a_p at primes not dividing N. A pickled copy keeps
    the cached a_n and the a_p values seen so far and gets a fresh lock, but
    loses the source: it can extend a_n over those primes and raises
    NeedMoreCoeffs at a new one.
    """

    def __init__(self, curve_id: str, N: int, bad_ap: Dict[int, int],
                 ap_source: Optional[Callable[[int], int]] = None,
                 cfg: PrecisionConfig = DEFAULT_PRECISION, w: Optional[int] = None,
                 coeffs: Optional[Sequence[int]] = None):
        self.curve_id = curve_id
        self.N = N
        self.bad_ap = dict(bad_ap)
        self.cfg = cfg
        self.w = w
        self._ap_source = ap_source
        self._ap: Dict[int, int] = dict(bad_ap)
        self.coeffs: List[int] = [0, 1]
        self._lock = threading.Lock()
        if coeffs:
            self.coeffs = [0] + [int(a) for a in coeffs]

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_lock"] = None
        state["_ap_source"] = None
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    @property
    def n_cached(self) -> int:
        return len(self.coeffs) - 1

    def with_precision(self, cfg: PrecisionConfig) -> "LFunctionContext":
        """Same curve and coefficients at another precision; the sign is kept."""
        other = LFunctionContext(self.curve_id, self.N, self.bad_ap, self._ap_source, cfg, self.w)
        other.coeffs = list(self.coeffs)
        other._ap = dict(self._ap)
        return other

    def ap(self, p: int) -> int:
        if p not in self._ap:
            if self._ap_source is None:
                raise NeedMoreCoeffs(p, self.n_cached)
            self._ap[p] = int(self._ap_source(p))
        return self._ap[p]

    def _prime_power(self, p: int, k: int) -> int:
        a_p = self.ap(p)
        if self.N % p == 0:
            return a_p ** k
        prev, cur = 1, a_p
        for _ in range(k - 1):
            prev, cur = cur, a_p * cur - p * prev
        return cur

    def ensure_coeffs(self, n_max: int) -> None:
        """Extend the cache to a_1..a_n_max (idempotent, thread safe)."""
        if n_max <= self.n_cached:
            return
        with self._lock:
            start = self.n_cached + 1
            for n in range(start, n_max + 1):
                a_n = 1
                for p, k in factorint(n).items():
                    # a_{p^k} is already cached when p^k < n
                    pk = p ** k
                    a_n *= self.coeffs[pk] if pk < n else self._prime_power(p, k)
                if a_n * a_n > divisor_count(n) ** 2 * n:
                    raise HasseViolation(f"|a_{n}| = {abs(a_n)} exceeds d(n) sqrt(n)")
                self.coeffs.append(a_n)
            logger.debug(f"{self.curve_id}: extended coefficients {start}..{n_max}")

    def coeffs_upto(self, n: int) -> List[int]:
        if n > self.n_cached:
            raise NeedMoreCoeffs(n, self.n_cached)
        return self.coeffs


def dirichlet_coeffs(ctx: LFunctionContext, n_max: int) -> List[int]:
    """a_1..a_n_max from a_p by multiplicativity and the prime-power recursions."""
    ctx.ensure_coeffs(n_max)
    return ctx.coeffs[1:n_max + 1]


def _series_inverse(poly: Sequence[int], order: int) -> List[int]:
    # 1 / (c_0 + c_1 X + ...) for c_0 = 1, exact
    out = [1]
    for k in range(1, order + 1):
        out.append(-sum(poly[j] * out[k - j] for j in range(1, min(k, len(poly) - 1) + 1)))
    return out


def expand_euler_product(ctx: LFunctionContext, n_max: int) -> List[int]:
    """
    a_1..a_n_max by multiplying out the local factors as Dirichlet series.

    Independent of the recursion in ``dirichlet_coeffs``: each local factor
    is inverted as a power series in p^-s and the results are convolved.
    """
    series = [0] * (n_max + 1)
    series[1] = 1
    for p in primerange(2, n_max + 1):
        a_p = ctx.ap(p)
        local = [1, -a_p] if ctx.N % p == 0 else [1, -a_p, p]
        order = 0
        while p ** (order + 1) <= n_max:
            order += 1
        inverse = _series_inverse(local, order)
        updated = [0] * (n_max + 1)
        for n in range(1, n_max + 1):
            if series[n] == 0:
                continue
            pk = 1
            for k in range(order + 1):
                if n * pk > n_max:
                    break
                updated[n * pk] += series[n] * inverse[k]
                pk *= p
        series = updated
    return series[1:]


def euler_product(ctx: LFunctionContext, s, p_max: int) -> EulerValue:
    """
    Truncated Euler product over p <= p_max for Re s >= 1.6.

    The tail of log L over p > p_max is bounded with |a_p| <= 2 sqrt(p) by
    T = 2 P^(3/2-s) / ((1 - P^(1/2-s)) (s - 3/2)), s real part, P = p_max;
    the value error is |value| (e^T - 1).

    Raises:
        RegionError: Re s < 1.6
    """
    cfg = ctx.cfg
    with mpmath.workprec(cfg.working_bits):
        s = mpc(s)
        sigma = s.real
        if sigma < EULER_REGION_MIN:
            raise RegionError(f"the Euler product is only used for Re s >= {EULER_REGION_MIN}, got {sigma}")
        value = mpc(1)
        count = 0
        for p in primerange(2, p_max + 1):
            a_p = ctx.ap(p)
            x = mpmath.power(p, -s)
            if ctx.N % p == 0:
                value /= 1 - a_p * x
            else:
                value /= 1 - a_p * x + p * x * x
            count += 1
        P = mpf(max(p_max, 2))
        tail = 2 * mpmath.power(P, mpf(1.5) - sigma) / ((1 - mpmath.power(P, mpf(0.5) - sigma)) * (sigma - mpf(1.5)))
        rounding = abs(value) * cfg.epsilon() * 4 * (count + 1)
        error = abs(value) * mpmath.expm1(tail) + rounding
        return EulerValue(s, value, error, tail)


def dirichlet_sum(ctx: LFunctionContext, s, n_max: int) -> EulerValue:
    """
    sum_{n <= n_max} a_n n^-s with the tail bounded through d(n) <= 3.53 n^(1/3).

    Raises:
        RegionError: Re s <= 11/6, where that tail bound diverges
    """
    cfg = ctx.cfg
    coeffs = dirichlet_coeffs(ctx, n_max)
    with mpmath.workprec(cfg.working_bits):
        s = mpc(s)
        sigma = s.real
        exponent = mpf(11) / 6 - sigma
        if exponent >= 0:
            raise RegionError(f"the Dirichlet sum tail bound needs Re s > 11/6, got {sigma}")
        value = mpc(0)
        for n, a_n in enumerate(coeffs, start=1):
            if a_n:
                value += a_n * mpmath.power(n, -s)
        tail = DIVISOR_CUBE_ROOT_BOUND * mpmath.power(n_max, exponent) / (-exponent)
        error = tail + abs(value) * cfg.epsilon() * 4 * n_max
        return EulerValue(s, value, error, tail)


def scale(N: int) -> mpf:
    """A = sqrt(N) / (2 pi) at the current precision."""
    return mpmath.sqrt(N) / (2 * mpmath.pi)


def _cutoff(A: mpf, order_real: mpf, c: mpf, target: mpf) -> int:
    # sum_{n > M} |a_n (A/n)^v Gamma(v, cn)| <= K e^(-c(M+1)) / (1 - e^(-c)),
    # K = 2 * 3.53 * A^Re(v) * c^(Re(v)-1), valid once c(M+1) >= max(1, 2|Re(v)-1|)
    K = 2 * DIVISOR_CUBE_ROOT_BOUND * mpmath.power(A, order_real) * mpmath.power(c, order_real - 1)
    need = mpmath.log(K / (target * (1 - mpmath.exp(-c)))) / c
    floor = max(mpf(1), 2 * abs(order_real - 1)) / c
    return max(1, int(mpmath.ceil(max(need, floor))) - 1)


def _tail(A: mpf, order_real: mpf, c: mpf, M: int) -> mpf:
    K = 2 * DIVISOR_CUBE_ROOT_BOUND * mpmath.power(A, order_real) * mpmath.power(c, order_real - 1)
    return K * mpmath.exp(-c * (M + 1)) / (1 - mpmath.exp(-c))


def truncation_point(ctx: LFunctionContext, u, t=1) -> int:
    """Number of terms the expansion of Lambda(u) split at t needs."""
    cfg = ctx.cfg
    with mpmath.workprec(cfg.working_bits):
        u = mpc(u)
        t = mpf(t)
        A = scale(ctx.N)
        target = cfg.epsilon()
        return max(_cutoff(A, u.real, t / A, target), _cutoff(A, 2 - u.real, 1 / (t * A), target))


@dataclass(frozen=True)
class _Halves:
    P: mpc
    Q: mpc
    error_P: mpf
    error_Q: mpf
    n_cut: int


def _lambda_halves(ctx: LFunctionContext, u, t) -> _Halves:
    cfg = ctx.cfg
    n_cut = truncation_point(ctx, u, t)
    ctx.ensure_coeffs(n_cut)
    coeffs = ctx.coeffs_upto(n_cut)
    with mpmath.workprec(cfg.working_bits):
        u = mpc(u)
        t = mpf(t)
        A = scale(ctx.N)
        c1, c2 = t / A, 1 / (t * A)
        eps = cfg.epsilon()
        P, Q = mpc(0), mpc(0)
        round_P, round_Q = mpf(0), mpf(0)
        for n in range(1, n_cut + 1):
            a_n = coeffs[n]
            if a_n == 0:
                continue
            ratio = A / n
            g1, e1 = upper_incomplete_gamma_with_error(u, n * c1, cfg)
            f1 = mpmath.power(ratio, u)
            P += a_n * f1 * g1
            round_P += abs(a_n) * abs(f1) * (e1 + 4 * eps * abs(g1))
            g2, e2 = upper_incomplete_gamma_with_error(2 - u, n * c2, cfg)
            f2 = mpmath.power(ratio, 2 - u)
            Q += a_n * f2 * g2
            round_Q += abs(a_n) * abs(f2) * (e2 + 4 * eps * abs(g2))
        error_P = _tail(A, u.real, c1, n_cut) + round_P
        error_Q = _tail(A, 2 - u.real, c2, n_cut) + round_Q
        return _Halves(P, Q, error_P, error_Q, n_cut)


def _sign(ctx: LFunctionContext, w: Optional[int]) -> int:
    if w is not None:
        return w
    if ctx.w is None:
        root_number(ctx)
    return ctx.w


def completed_lambda(ctx: LFunctionContext, u, t=1, w: Optional[int] = None) -> XiValue:
    """
    Lambda(u) = (sqrt(N)/2pi)^u Gamma(u) L(u) anywhere in the plane.

    Args:
        ctx: curve context with enough cached a_n
        u: evaluation point
        t: splitting parameter of the expansion (positive)
        w: sign to use; defaults to the context's root number

    Returns:
        XiValue: value and an error bound covering truncation and rounding

    Raises:
        NeedMoreCoeffs: the cache stops before the truncation point
    """
    sign = _sign(ctx, w)
    halves = _lambda_halves(ctx, u, t)
    with mpmath.workprec(ctx.cfg.working_bits):
        value = halves.P + sign * halves.Q
        return XiValue(mpc(u), value, halves.error_P + halves.error_Q)


def xi(ctx: LFunctionContext, s, t=1, w: Optional[int] = None) -> XiValue:
    """xi(s) = N^(-1/4) (2 pi)^(1/2) Lambda(s + 1/2)."""
    with mpmath.workprec(ctx.cfg.working_bits):
        s = mpc(s)
        lam = completed_lambda(ctx, s + mpf(0.5), t, w)
        factor = mpmath.power(ctx.N, mpf(-0.25)) * mpmath.sqrt(2 * mpmath.pi)
        return XiValue(s, factor * lam.value, factor * lam.error_bound)


def lvalue(ctx: LFunctionContext, s, t=1) -> XiValue:
    """L(s) = Lambda(s) / (A^s Gamma(s)) away from the poles of Gamma."""
    cfg = ctx.cfg
    lam = completed_lambda(ctx, s, t)
    with mpmath.workprec(cfg.working_bits):
        s = mpc(s)
        factor = mpmath.power(scale(ctx.N), s) * gamma(s, cfg)
        value = lam.value / factor
        error = lam.error_bound / abs(factor) + abs(value) * cfg.epsilon() * 8
        return XiValue(s, value, error)


def fe_residual(ctx: LFunctionContext, s, splits: Tuple = ROOT_NUMBER_SPLITS) -> Tuple[mpf, mpf]:
    """
    |xi(s) - w xi(1-s)| and the sum of the two error bounds.

    The two sides are evaluated with different splitting parameters so the
    residual is not zero by construction.
    """
    sign = _sign(ctx, None)
    left = xi(ctx, s, t=splits[0])
    with mpmath.workprec(ctx.cfg.working_bits):
        right = xi(ctx, 1 - mpc(s), t=splits[1])
        return abs(left.value - sign * right.value), left.error_bound + right.error_bound


def theta_sign_estimate(ctx: LFunctionContext, t=ROOT_NUMBER_SPLITS[1]) -> mpf:
    """theta(1/t) / (t^2 theta(t)) with theta(y) = sum a_n e^(-2 pi n y / sqrt(N)); equals w."""
    cfg = ctx.cfg
    with mpmath.workprec(cfg.working_bits):
        t = mpf(t)
        A = scale(ctx.N)
        y_min = min(t, 1 / t)
        n_max = int(mpmath.ceil(cfg.working_bits * mpmath.log(2) * A / y_min)) + 10
        coeffs = dirichlet_coeffs(ctx, n_max)

        def theta(y):
            return mpmath.fsum(a * mpmath.exp(-n * y / A) for n, a in enumerate(coeffs, start=1) if a)

        return theta(1 / t) / (t * t * theta(t))


def root_number(ctx: LFunctionContext, test_points: Sequence = ROOT_NUMBER_TEST_POINTS,
                splits: Tuple = ROOT_NUMBER_SPLITS) -> int:
    """
    The sign w in Lambda(u) = w Lambda(2-u), found numerically.

    At each test point the expansion is evaluated with both splitting
    parameters; a sign passes when the two values agree within twice the
    combined error bound. The first point where exactly one sign passes
    decides.

    Raises:
        IndeterminateSign: no test point separates the two signs
    """
    cfg = ctx.cfg
    for point in test_points:
        u = mpc(*point) if isinstance(point, tuple) else mpc(point)
        first = _lambda_halves(ctx, u, splits[0])
        second = _lambda_halves(ctx, u, splits[1])
        with mpmath.workprec(cfg.working_bits):
            budget = 2 * (first.error_P + first.error_Q + second.error_P + second.error_Q)
            passing = []
            for sign in (1, -1):
                defect = abs((first.P - second.P) + sign * (first.Q - second.Q))
                if defect <= budget:
                    passing.append(sign)
            logger.debug(f"{ctx.curve_id}: test point {u} accepts signs {passing}")
            if len(passing) == 1:
                ctx.w = passing[0]
                break
    else:
        raise IndeterminateSign(f"{ctx.curve_id}: no test point separates w = +1 from w = -1 "
                                f"at {cfg.bits} bits")
    try:
        estimate = theta_sign_estimate(ctx)
        logger.info(f"{ctx.curve_id}: root number {ctx.w}, theta ratio {mpmath.nstr(estimate, 8)}")
    except NeedMoreCoeffs as e:
        logger.info(f"{ctx.curve_id}: root number {ctx.w} (theta cross-check skipped: {e})")
    return ctx.w
