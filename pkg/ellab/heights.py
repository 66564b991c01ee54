"""
Naive and canonical heights on E(Q), the Neron-Tate pairing, and a checker
for positive definite quadratic forms.

Canonical heights use the doubling limit (1/2) lim 4^-n h(x([2^n]P)) in
exact rational arithmetic. Points of order at most 12 are detected first
and get height exactly 0.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, combinations_with_replacement
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import mpmath
from mpmath import mpf

from utils.worker_utils import parallel_map

from .constants import (COORDINATE_BIT_BUDGET, DEFAULT_HEIGHT_TOL, DEFAULT_N_CAP, MIN_DOUBLINGS,
                        TORSION_ORDER_LIMIT)
from .errors import AuditFailure, CoordinateBlowup, IdentityPoint
from .numerics import DEFAULT_PRECISION, PrecisionConfig
from .pointcount import FrobeniusForm
from .weierstrass import IDENTITY, CurvePoint, RawEquation, add, double, negate, subtract

logger = logging.getLogger("heights")


@dataclass(frozen=True)
class HeightValue:
    value: mpf
    error_bound: mpf
    doublings_used: int
    torsion: bool = False
    converged: bool = True


@dataclass(frozen=True)
class PairingValue:
    value: mpf
    error_bound: mpf


@dataclass(frozen=True)
class HeightCSReport:
    lhs: mpf
    rhs: mpf
    lhs_error: mpf
    rhs_error: mpf
    holds: bool
    equality: bool


@dataclass(frozen=True)
class PairingMatrix:
    points: List[CurvePoint]
    entries: List[List[mpf]]
    errors: List[List[mpf]]


def naive_height(P: CurvePoint, cfg: PrecisionConfig = DEFAULT_PRECISION) -> mpf:
    """
    h(P) = log max(|num x|, |den x|) for x(P) in lowest terms.

    Raises:
        IdentityPoint: P is the point at infinity
    """
    if P.is_identity:
        raise IdentityPoint("the naive height is not defined at O")
    x = Fraction(P.x)
    with mpmath.workprec(cfg.working_bits):
        return mpmath.log(max(abs(x.numerator), x.denominator))


def torsion_order(curve: RawEquation, P: CurvePoint, limit: int = TORSION_ORDER_LIMIT) -> Optional[int]:
    """Smallest m <= limit with [m]P = O, or None."""
    Q = P
    for m in range(1, limit + 1):
        if Q.is_identity:
            return m
        Q = add(curve, Q, P)
    return None


def _coordinate_bits(P: CurvePoint) -> int:
    x = Fraction(P.x)
    return x.numerator.bit_length() + x.denominator.bit_length()


def canonical_height(curve: RawEquation, P: CurvePoint, tol=DEFAULT_HEIGHT_TOL, n_cap: int = DEFAULT_N_CAP,
                     bit_budget: int = COORDINATE_BIT_BUDGET,
                     cfg: PrecisionConfig = DEFAULT_PRECISION) -> HeightValue:
    """
    Canonical height by exact doubling.

    The error bound after n doublings is twice the last change of the
    estimate plus C 4^-n / 6, C the largest |h(2Q) - 4h(Q)| seen so far.
    Doubling continues (at least four times) until that bound is below
    tol. Reaching n_cap or the coordinate budget first returns the current
    estimate with ``converged`` unset.

    Args:
        curve: curve over Q
        P: point on the curve
        tol: target accuracy
        n_cap: most doublings to perform
        bit_budget: largest coordinate size in bits before stopping early
        cfg: precision of the logarithms

    Returns:
        HeightValue: value, error bound and doublings used

    Raises:
        CoordinateBlowup: the budget is exceeded before a single doubling
    """
    if P.is_identity:
        return HeightValue(mpf(0), mpf(0), 0, torsion=True)
    order = torsion_order(curve, P)
    if order is not None:
        logger.debug(f"{P} has order {order}, height 0")
        return HeightValue(mpf(0), mpf(0), 0, torsion=True)

    with mpmath.workprec(cfg.working_bits):
        tol = mpf(tol)
        Q = P
        h_prev = naive_height(Q, cfg)
        estimate = h_prev / 2
        diff = mpf(0)
        drift = mpf(0)
        error = mpmath.inf
        n = 0
        while n < MIN_DOUBLINGS or error >= tol:
            if n >= n_cap:
                logger.info(f"{P}: error bound {mpmath.nstr(error, 3)} still above {tol} after {n_cap} doubling(s)")
                break
            if _coordinate_bits(Q) > bit_budget:
                if n == 0:
                    raise CoordinateBlowup(f"{P} already exceeds {bit_budget} coordinate bits")
                logger.warning(f"{P}: coordinates exceed {bit_budget} bits after {n} doubling(s), "
                               f"returning the current estimate")
                break
            Q = double(curve, Q)
            n += 1
            if Q.is_identity:
                return HeightValue(mpf(0), mpf(0), n, torsion=True)
            h = naive_height(Q, cfg)
            drift = max(drift, abs(h - 4 * h_prev))
            new_estimate = h / (2 * mpmath.power(4, n))
            diff = abs(new_estimate - estimate)
            estimate, h_prev = new_estimate, h
            error = 2 * diff + drift / (6 * mpmath.power(4, n))
            logger.debug(f"{P}: doubling {n}, estimate {mpmath.nstr(estimate, 12)}, error {mpmath.nstr(error, 3)}")
        if estimate < tol:
            logger.warning(f"{P}: height {mpmath.nstr(estimate, 5)} below tolerance but no torsion "
                           f"of order <= {TORSION_ORDER_LIMIT} was found")
        return HeightValue(estimate, error, n, converged=error < tol)


def nt_pairing(curve: RawEquation, P: CurvePoint, Q: CurvePoint, tol=DEFAULT_HEIGHT_TOL,
               n_cap: int = DEFAULT_N_CAP, cfg: PrecisionConfig = DEFAULT_PRECISION) -> PairingValue:
    """<P, Q> = h(P+Q) - h(P) - h(Q); the error is the sum of the three bounds."""
    hs = [canonical_height(curve, R, tol, n_cap, cfg=cfg) for R in (add(curve, P, Q), P, Q)]
    with mpmath.workprec(cfg.working_bits):
        return PairingValue(hs[0].value - hs[1].value - hs[2].value, sum(h.error_bound for h in hs))


def cauchy_schwarz_ht(curve: RawEquation, P: CurvePoint, Q: CurvePoint, tol=DEFAULT_HEIGHT_TOL,
                      n_cap: int = DEFAULT_N_CAP, cfg: PrecisionConfig = DEFAULT_PRECISION) -> HeightCSReport:
    """
    |h(P-Q) - h(P) - h(Q)| <= 2 sqrt(h(P) h(Q)) with both sides' errors.

    ``equality`` is set when the two sides agree within the combined error,
    as they do when Q is a multiple of P.
    """
    h_diff, h_p, h_q = (canonical_height(curve, R, tol, n_cap, cfg=cfg) for R in (subtract(curve, P, Q), P, Q))
    with mpmath.workprec(cfg.working_bits):
        lhs = abs(h_diff.value - h_p.value - h_q.value)
        lhs_error = h_diff.error_bound + h_p.error_bound + h_q.error_bound
        a, b = max(h_p.value, 0), max(h_q.value, 0)
        rhs = 2 * mpmath.sqrt(a * b)
        hi = 2 * mpmath.sqrt((a + h_p.error_bound) * (b + h_q.error_bound))
        lo = 2 * mpmath.sqrt(max(a - h_p.error_bound, 0) * max(b - h_q.error_bound, 0))
        rhs_error = max(hi - rhs, rhs - lo)
        holds = lhs <= rhs + lhs_error + rhs_error
        equality = abs(lhs - rhs) <= lhs_error + rhs_error
        if not holds:
            logger.error(f"Cauchy-Schwarz fails for P={P}, Q={Q}: {mpmath.nstr(lhs, 10)} > {mpmath.nstr(rhs, 10)}")
        return HeightCSReport(lhs, rhs, lhs_error, rhs_error, holds, equality)


def _height_task(task) -> HeightValue:
    curve, P, tol, n_cap, cfg = task
    return canonical_height(curve, P, tol, n_cap, cfg=cfg)


def pairing_matrix(curve: RawEquation, points: Sequence[CurvePoint], tol=DEFAULT_HEIGHT_TOL,
                   n_cap: int = DEFAULT_N_CAP, cfg: PrecisionConfig = DEFAULT_PRECISION,
                   workers: int = 1) -> PairingMatrix:
    """Gram matrix of <Pi, Pj>; each distinct point's height is computed once."""
    points = list(points)
    k = len(points)
    wanted: List[CurvePoint] = []
    for P in points:
        if P not in wanted:
            wanted.append(P)
    for i in range(k):
        for j in range(i, k):
            S = add(curve, points[i], points[j])
            if S not in wanted:
                wanted.append(S)
    results = parallel_map(_height_task, [(curve, P, tol, n_cap, cfg) for P in wanted], workers)
    memo = dict(zip(wanted, results))
    entries = [[mpf(0)] * k for _ in range(k)]
    errors = [[mpf(0)] * k for _ in range(k)]
    with mpmath.workprec(cfg.working_bits):
        for i in range(k):
            for j in range(i, k):
                hs = (memo[add(curve, points[i], points[j])], memo[points[i]], memo[points[j]])
                entries[i][j] = entries[j][i] = hs[0].value - hs[1].value - hs[2].value
                errors[i][j] = errors[j][i] = sum(h.error_bound for h in hs)
    return PairingMatrix(points, entries, errors)


@dataclass
class QuadraticFormWitness:
    """
    A function d on an abelian group, given through sample elements.

    ``evaluate`` returns (d(x), error). With ``direct_combinations`` the
    audit evaluates d(m a + n b) itself; otherwise it goes through the
    pairing matrix of the two elements, which is cheaper when evaluating d
    is expensive.
    """

    name: str
    elements: List[Any]
    evaluate: Callable[[Any], Tuple[Any, Any]]
    add: Callable[[Any, Any], Any]
    neg: Callable[[Any], Any]
    zero: Any
    is_zero: Callable[[Any], bool]
    direct_combinations: bool = True
    triples: Optional[List[Tuple[Any, Any, Any]]] = None
    key: Callable[[Any], Hashable] = lambda x: x
    _memo: Dict[Hashable, Tuple[Any, Any]] = field(default_factory=dict, repr=False)

    def d(self, x) -> Tuple[Any, Any]:
        k = self.key(x)
        if k not in self._memo:
            self._memo[k] = self.evaluate(x)
        return self._memo[k]

    def pairing(self, x, y) -> Tuple[Any, Any]:
        (s, es), (a, ea), (b, eb) = self.d(self.add(x, y)), self.d(x), self.d(y)
        return s - a - b, es + ea + eb

    def scale(self, m: int, x):
        result = self.zero
        step = x if m >= 0 else self.neg(x)
        for _ in range(abs(m)):
            result = self.add(result, step)
        return result


@dataclass(frozen=True)
class AuditReport:
    name: str
    checks: int
    violations: List[str]

    @property
    def passed(self) -> bool:
        return not self.violations


def qform_audit(witness: QuadraticFormWitness, coeff_range: int = 5) -> AuditReport:
    """
    Check the laws of a positive definite quadratic form on the witness elements.

    - d(x) = d(-x) >= 0, d(0) = 0, and d(x) > 0 for non-zero x
    - <x + y, z> = <x, z> + <y, z> on sampled triples
    - <m x + n y, m x + n y> >= 0 for m, n in [-coeff_range, coeff_range]

    Raises:
        AuditFailure: any law fails; the exception lists every violation
    """
    violations: List[str] = []
    checks = 0

    value, error = witness.d(witness.zero)
    checks += 1
    if abs(value) > error:
        violations.append(f"d(0) = {value}, not 0")

    for x in witness.elements:
        value, error = witness.d(x)
        neg_value, neg_error = witness.d(witness.neg(x))
        checks += 3
        if value < -error:
            violations.append(f"d({x}) = {value} is negative")
        if abs(value - neg_value) > error + neg_error:
            violations.append(f"d({x}) = {value} differs from d(-x) = {neg_value}")
        if not witness.is_zero(x) and value <= error:
            violations.append(f"d({x}) = {value} vanishes on a non-zero element")

    triples = witness.triples
    if triples is None:
        triples = list(combinations_with_replacement(witness.elements, 3))
    for x, y, z in triples:
        left, e_left = witness.pairing(witness.add(x, y), z)
        a, e_a = witness.pairing(x, z)
        b, e_b = witness.pairing(y, z)
        checks += 1
        if abs(left - a - b) > e_left + e_a + e_b:
            violations.append(f"bilinearity fails on ({x}, {y}, {z}): {left} != {a} + {b}")

    span = range(-coeff_range, coeff_range + 1)
    for x, y in combinations(witness.elements, 2):
        if not witness.direct_combinations:
            xx, e_xx = witness.pairing(x, x)
            xy, e_xy = witness.pairing(x, y)
            yy, e_yy = witness.pairing(y, y)
        for m in span:
            for n in span:
                checks += 1
                if witness.direct_combinations:
                    combo = witness.add(witness.scale(m, x), witness.scale(n, y))
                    value, error = witness.pairing(combo, combo)
                else:
                    value = m * m * xx + 2 * m * n * xy + n * n * yy
                    error = m * m * e_xx + 2 * abs(m * n) * e_xy + n * n * e_yy
                if value < -error:
                    violations.append(f"<{m}x + {n}y, {m}x + {n}y> = {value} < 0 for x={x}, y={y}")

    report = AuditReport(witness.name, checks, violations)
    if violations:
        logger.error(f"{witness.name}: {len(violations)} violation(s) in {checks} check(s)")
        raise AuditFailure(violations)
    logger.info(f"{witness.name}: {checks} check(s) passed")
    return report


def frobenius_witness(form: FrobeniusForm, elements: Optional[Sequence[Tuple[int, int]]] = None) -> QuadraticFormWitness:
    """deg on Z + Z phi, elements written (m, n) for m + n phi; exact integers."""
    if elements is None:
        elements = [(1, 0), (0, 1), (1, -1), (2, 1)]
    return QuadraticFormWitness(
        name=f"frobenius(a={form.a}, q={form.q})",
        elements=list(elements),
        evaluate=lambda x: (form.value(*x), 0),
        add=lambda x, y: (x[0] + y[0], x[1] + y[1]),
        neg=lambda x: (-x[0], -x[1]),
        zero=(0, 0),
        is_zero=lambda x: x == (0, 0),
    )


def neron_tate_witness(curve: RawEquation, points: Sequence[CurvePoint], tol=DEFAULT_HEIGHT_TOL,
                       n_cap: int = DEFAULT_N_CAP, cfg: PrecisionConfig = DEFAULT_PRECISION) -> QuadraticFormWitness:
    """The canonical height on the given points, with its error bounds as tolerances."""
    heights: Dict[CurvePoint, HeightValue] = {}

    def height(P: CurvePoint) -> HeightValue:
        if P not in heights:
            heights[P] = canonical_height(curve, P, tol, n_cap, cfg=cfg)
        return heights[P]

    def evaluate(P: CurvePoint):
        h = height(P)
        return h.value, h.error_bound

    return QuadraticFormWitness(
        name=f"neron-tate on {curve}",
        elements=list(points),
        evaluate=evaluate,
        add=lambda P, Q: add(curve, P, Q),
        neg=lambda P: negate(curve, P),
        zero=IDENTITY,
        is_zero=lambda P: height(P).torsion,
        direct_combinations=False,
    )
