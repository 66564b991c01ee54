"""
Counting F_p-rational points and the Frobenius degree form.

Small primes are counted exhaustively with a table of quadratic residues
(the trusted oracle). Above the threshold the group order is found with
baby-step giant-step on random points, and when the Hasse interval still
holds several multiples of the group exponent the quadratic twist settles
it through #E + #E' = 2p + 2.
"""

import logging
import random
from dataclasses import dataclass
from enum import Enum
from math import gcd, isqrt
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import mpmath
import numpy as np
from mpmath import mpc, mpf
from sympy import factorint, isprime, legendre_symbol

from .constants import BSGS_POINT_BUDGET, BSGS_TWIST_RETRIES, DEFAULT_SEED, EXHAUSTIVE_THRESHOLD
from .errors import AmbiguousOrder, HasseViolation, PrecondError, SingularReduction
from .numerics import DEFAULT_PRECISION, PrecisionConfig
from .weierstrass import (IDENTITY, CurvePoint, PrimeField, RawEquation, add, lift_x, negate,
                          quadratic_twist, reduce_mod, scalar_mul, short_model)

logger = logging.getLogger("pointcount")


class CountMethod(Enum):
    EXHAUSTIVE = "exhaustive"
    BSGS = "bsgs"


def hasse_interval(p: int) -> Tuple[int, int]:
    """Integer bounds of [p+1-2sqrt(p), p+1+2sqrt(p)]."""
    width = isqrt(4 * p)
    return p + 1 - width, p + 1 + width


def hasse_ok(p: int, a: int) -> bool:
    return a * a <= 4 * p


@dataclass(frozen=True)
class CountResult:
    p: int
    count: int
    a: int
    method: CountMethod

    def __post_init__(self):
        if self.a != self.p + 1 - self.count:
            raise ValueError(f"inconsistent trace {self.a} for count {self.count} at p={self.p}")
        if not hasse_ok(self.p, self.a):
            raise HasseViolation(f"|a|={abs(self.a)} exceeds 2*sqrt({self.p})")


def _residue_table(p: int) -> bytearray:
    table = bytearray(p)
    for y in range(p):
        table[y * y % p] = 1
    return table


def _count_brute_force(curve: RawEquation) -> int:
    p = curve.field.p
    a1, a2, a3, a4, a6 = (int(a) for a in curve.coefficients)
    total = 1
    for x in range(p):
        right = (x * x * x + a2 * x * x + a4 * x + a6) % p
        for y in range(p):
            if (y * y + a1 * x * y + a3 * y - right) % p == 0:
                total += 1
    return total


def count_exhaustive(curve: RawEquation) -> int:
    """#E(F_p) including the identity, by running over every x."""
    p = curve.field.p
    if p == 2:
        return _count_brute_force(curve)
    inv = curve.invariants
    b2, b4, b6 = int(inv.b2), int(inv.b4), int(inv.b6)
    squares = _residue_table(p)
    # (2y + a1x + a3)^2 = 4x^3 + b2x^2 + 2b4x + b6
    total = 1
    for x in range(p):
        f = (((4 * x + b2) * x + 2 * b4) * x + b6) % p
        if f == 0:
            total += 1
        elif squares[f]:
            total += 2
    return total


def _find_multiple(curve: RawEquation, P: CurvePoint, lo: int, hi: int) -> int:
    """Some k in [lo, hi] with [k]P = O, by baby-step giant-step."""
    m = isqrt(hi - lo) + 1
    baby: Dict[CurvePoint, int] = {}
    step = IDENTITY
    for j in range(m):
        baby.setdefault(negate(curve, step), j)
        step = add(curve, step, P)
    giant = scalar_mul(curve, m, P)
    current = scalar_mul(curve, lo, P)
    for i in range(m + 1):
        j = baby.get(current)
        if j is not None:
            return lo + i * m + j
        current = add(curve, current, giant)
    raise AmbiguousOrder(f"no multiple of {P} vanishes in [{lo}, {hi}]")


def element_order(curve: RawEquation, P: CurvePoint, lo: int, hi: int) -> int:
    """Exact order of P, given that some multiple in [lo, hi] vanishes."""
    k = _find_multiple(curve, P, lo, hi)
    for q in factorint(k):
        while k % q == 0 and scalar_mul(curve, k // q, P).is_identity:
            k //= q
    return k


def _random_point(curve: RawEquation, rng: random.Random) -> CurvePoint:
    p = curve.field.p
    while True:
        P = lift_x(curve, rng.randrange(p))
        if P is not None:
            return P


def _lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)


def _non_residue(p: int) -> int:
    d = 2
    while legendre_symbol(d, p) != -1:
        d += 1
    return d


def count_bsgs(curve: RawEquation, seed: int = DEFAULT_SEED,
               point_budget: int = BSGS_POINT_BUDGET) -> int:
    """#E(F_p) for p >= 5 from element orders of random points, twist-disambiguated."""
    p = curve.field.p
    lo, hi = hasse_interval(p)
    rng = random.Random(seed * 1000003 + p)
    model = short_model(curve)
    twist = quadratic_twist(curve, _non_residue(p))

    exponent = 1
    candidates: List[int] = list(range(lo, hi + 1))
    for attempt in range(point_budget):
        P = _random_point(model, rng)
        exponent = _lcm(exponent, element_order(model, P, lo, hi))
        candidates = [n for n in range(lo, hi + 1) if n % exponent == 0]
        logger.debug(f"p={p}: exponent {exponent} after {attempt + 1} point(s), {len(candidates)} candidate(s)")
        if len(candidates) <= 1:
            break

    twist_exponent = 1
    retries = 0
    while len(candidates) > 1:
        if retries >= BSGS_TWIST_RETRIES * point_budget:
            raise AmbiguousOrder(f"p={p}: candidates {candidates} remain after twist disambiguation")
        retries += 1
        Q = _random_point(twist, rng)
        twist_exponent = _lcm(twist_exponent, element_order(twist, Q, lo, hi))
        candidates = [n for n in candidates if (2 * p + 2 - n) % twist_exponent == 0]
        logger.debug(f"p={p}: twist exponent {twist_exponent}, {len(candidates)} candidate(s)")

    if not candidates:
        raise AmbiguousOrder(f"p={p}: no group order is compatible with exponent {exponent}")
    return candidates[0]


def count_points(curve: RawEquation, method: Optional[CountMethod] = None,
                 threshold: int = EXHAUSTIVE_THRESHOLD, seed: int = DEFAULT_SEED) -> CountResult:
    """
    Exact #E(F_p) for a curve over a prime field.

    Args:
        curve: equation over PrimeField(p)
        method: force a method; by default exhaustive up to ``threshold``, BSGS above
        threshold: largest prime counted exhaustively
        seed: seed for the random points of BSGS

    Returns:
        CountResult: count, trace a = p + 1 - count and the method used

    Raises:
        SingularReduction: the discriminant vanishes mod p
    """
    if not isinstance(curve.field, PrimeField):
        raise PrecondError("count_points needs a curve over a prime field")
    p = curve.field.p
    if curve.disc == 0:
        raise SingularReduction(f"{curve} is singular mod {p}")
    if method is None:
        method = CountMethod.EXHAUSTIVE if p <= threshold else CountMethod.BSGS
    if method is CountMethod.BSGS and p < 5:
        logger.warning(f"BSGS needs p >= 5, counting p={p} exhaustively")
        method = CountMethod.EXHAUSTIVE
    if method is CountMethod.EXHAUSTIVE:
        count = count_exhaustive(curve)
    else:
        count = count_bsgs(curve, seed=seed)
    return CountResult(p, count, p + 1 - count, method)


@dataclass(frozen=True)
class FrobeniusForm:
    """deg(m + n phi) = m^2 + a m n + q n^2 on the subring Z + Z phi."""

    a: int
    q: int

    def value(self, m: int, n: int) -> int:
        return m * m + self.a * m * n + self.q * n * n

    def pairing(self, psi: Tuple[int, int], chi: Tuple[int, int]) -> int:
        return (self.value(psi[0] + chi[0], psi[1] + chi[1])
                - self.value(*psi) - self.value(*chi))

    @property
    def discriminant(self) -> int:
        return self.a * self.a - 4 * self.q

    @property
    def hasse_ok(self) -> bool:
        return self.discriminant <= 0


def frobenius_form(count: CountResult) -> FrobeniusForm:
    return FrobeniusForm(count.a, count.p)


@dataclass(frozen=True)
class DegreeCSReport:
    psi: Tuple[int, int]
    chi: Tuple[int, int]
    lhs: int
    rhs: mpf
    holds: bool
    equality: bool


def cauchy_schwarz_deg(form: FrobeniusForm, m1: int, n1: int, m2: int, n2: int,
                       strict: bool = False) -> DegreeCSReport:
    """
    |<psi, chi>| <= 2 sqrt(deg psi deg chi) for psi = m1 + n1 phi, chi = m2 + n2 phi.

    The comparison is made on squares, in integers.
    """
    psi, chi = (m1, n1), (m2, n2)
    lhs = abs(form.pairing(psi, chi))
    deg_psi, deg_chi = form.value(*psi), form.value(*chi)
    product = deg_psi * deg_chi
    holds = product >= 0 and lhs * lhs <= 4 * product
    equality = product >= 0 and lhs * lhs == 4 * product
    rhs = 2 * mpmath.sqrt(max(product, 0))
    if strict and not holds:
        raise HasseViolation(f"Cauchy-Schwarz fails for psi={psi}, chi={chi}: {lhs} > {rhs}")
    return DegreeCSReport(psi, chi, lhs, rhs, holds, equality)


def local_lfactor(form: FrobeniusForm, cfg: PrecisionConfig = DEFAULT_PRECISION) -> Tuple[mpc, mpc]:
    """
    Roots alpha, beta of X^2 - aX + q, so that 1 - a q^-s + q^(1-2s) = (1 - alpha q^-s)(1 - beta q^-s).

    Raises:
        HasseViolation: a^2 > 4q
    """
    if not form.hasse_ok:
        raise HasseViolation(f"a={form.a} violates a^2 <= 4q for q={form.q}")
    with mpmath.workprec(cfg.working_bits):
        root = mpmath.sqrt(mpf(4 * form.q - form.a * form.a))
        alpha = mpc(form.a, root) / 2
        beta = mpc(form.a, -root) / 2
        sqrt_q = mpmath.sqrt(form.q)
        tol = sqrt_q * cfg.target()
        if abs(abs(alpha) - sqrt_q) > tol or abs(beta - mpmath.conj(alpha)) > tol:
            raise HasseViolation(f"local roots off the circle |z| = sqrt({form.q})")
        return alpha, beta


def local_factor_value(form: FrobeniusForm, s, cfg: PrecisionConfig = DEFAULT_PRECISION) -> mpc:
    """1 - a q^-s + q^(1-2s)."""
    with mpmath.workprec(cfg.working_bits):
        s = mpc(s)
        q = mpf(form.q)
        return 1 - form.a * mpmath.power(q, -s) + mpmath.power(q, 1 - 2 * s)


def factored_local_factor(form: FrobeniusForm, s, cfg: PrecisionConfig = DEFAULT_PRECISION) -> mpc:
    """(1 - alpha q^-s)(1 - beta q^-s)."""
    alpha, beta = local_lfactor(form, cfg)
    with mpmath.workprec(cfg.working_bits):
        q_s = mpmath.power(mpf(form.q), -mpc(s))
        return (1 - alpha * q_s) * (1 - beta * q_s)


@dataclass(frozen=True)
class GaussDiaryResult:
    p: int
    N: int
    affine_trace: int
    completed: int
    trace: int
    bound_ok: bool


def gauss_diary_count(p: int) -> GaussDiaryResult:
    """
    Number of pairs (x, y) in F_p^2 with x^2y^2 + x^2 + y^2 = 1, for p = 1 mod 4.

    The smooth model (x^2 + 1)(y^2 + 1) = 2 in P^1 x P^1 adds the four points
    at infinity (x or y equal to +-i), and the trace bound is checked on
    that completed count.

    Raises:
        PrecondError: p is not a prime congruent to 1 mod 4
    """
    if not isprime(p) or p % 4 != 1:
        raise PrecondError(f"p must be a prime congruent to 1 mod 4, got {p}")
    squares = [v * v % p for v in range(p)]
    N = 0
    for x2 in squares:
        for y2 in squares:
            if (x2 * y2 + x2 + y2) % p == 1:
                N += 1
    completed = N + 4
    trace = p + 1 - completed
    return GaussDiaryResult(p, N, p + 1 - N, completed, trace, trace * trace <= 4 * p)


@dataclass(frozen=True)
class ApRow:
    p: int
    ap: Optional[int]
    type: str


def ap_table(curve: RawEquation, primes: Iterable[int],
             threshold: int = EXHAUSTIVE_THRESHOLD, seed: int = DEFAULT_SEED,
             counter: Optional[Callable[[RawEquation, int], CountResult]] = None) -> List[ApRow]:
    """
    Rows (p, a_p, type) for a curve over Q with integral coefficients.

    Primes where the given model reduces to a singular curve are flagged
    "bad" with no a_p; their classification belongs to the reduction module.
    ``counter(reduced, p)`` replaces the direct count, e.g. to go through a cache.
    """
    if counter is None:
        def counter(reduced: RawEquation, p: int) -> CountResult:
            return count_points(reduced, threshold=threshold, seed=seed)
    rows = []
    for p in primes:
        reduced = reduce_mod(curve, p)
        if reduced.disc == 0:
            logger.info(f"{curve} has bad reduction at p={p}")
            rows.append(ApRow(p, None, "bad"))
            continue
        rows.append(ApRow(p, counter(reduced, p).a, "good"))
    return rows


@dataclass(frozen=True)
class SweepRow:
    p: int
    curves: int
    violations: int
    max_trace: int


def hasse_sweep(primes: Iterable[int]) -> List[SweepRow]:
    """
    Check |a| <= 2 sqrt(p) for every nonsingular y^2 = x^3 + Ax + B over each F_p.

    For each A the traces of all p values of B come out of one table
    lookup: a = -sum_x chi(x^3 + Ax + B), chi the quadratic character.
    """
    rows = []
    for p in primes:
        if p == 2:
            # every short model is singular in characteristic 2
            rows.append(SweepRow(p, 0, 0, 0))
            continue
        x = np.arange(p, dtype=np.int64)
        chi = np.full(p, -1, dtype=np.int64)
        chi[x * x % p] = 1
        chi[0] = 0
        cubes = x ** 3 % p
        B = np.arange(p, dtype=np.int64)
        curves = violations = max_trace = 0
        for A in range(p):
            values = (cubes + A * x)[None, :] + B[:, None]
            traces = -chi[values % p].sum(axis=1)
            nonsingular = (4 * A ** 3 + 27 * B * B) % p != 0
            traces = traces[nonsingular]
            curves += int(nonsingular.sum())
            violations += int((traces * traces > 4 * p).sum())
            if traces.size:
                max_trace = max(max_trace, int(np.abs(traces).max()))
        if violations:
            logger.error(f"{violations} Hasse violation(s) at p={p}")
        logger.debug(f"p={p}: {curves} curves, max |a| = {max_trace}")
        rows.append(SweepRow(p, curves, violations, max_trace))
    return rows
