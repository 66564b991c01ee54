"""
Precision kernel: arbitrary-precision Gamma, incomplete Gamma and the DFT.

Real and complex values are mpmath ``mpf``/``mpc``. Every operation runs
under ``mpmath.workprec`` at the configured bits plus guard bits, so callers
never touch the global mpmath context.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import mpmath
from mpmath import mpc, mpf

from .constants import DEFAULT_BITS, DEFAULT_GUARD_BITS, DIRECT_DFT_MAX, ITERATION_BUDGET, MIN_BITS
from .errors import ConvergenceError, DomainError, PoleError, PrecisionError

logger = logging.getLogger("numerics")

HPReal = mpf
HPComplex = mpc


@dataclass(frozen=True)
class PrecisionConfig:
    bits: int = DEFAULT_BITS
    guard_bits: int = DEFAULT_GUARD_BITS

    def __post_init__(self):
        if self.bits < MIN_BITS:
            raise PrecisionError(f"bits must be at least {MIN_BITS}, got {self.bits}")
        if self.guard_bits < 0:
            raise PrecisionError(f"guard_bits must be non-negative, got {self.guard_bits}")

    @property
    def working_bits(self) -> int:
        return self.bits + self.guard_bits

    def target(self) -> mpf:
        """Relative error target 2^(-bits+guard)."""
        return mpmath.ldexp(mpf(1), -self.bits + self.guard_bits)

    def epsilon(self) -> mpf:
        """Unit roundoff at the working precision."""
        return mpmath.ldexp(mpf(1), -self.working_bits)

    def raised(self, extra_bits: int) -> "PrecisionConfig":
        return PrecisionConfig(self.bits + extra_bits, self.guard_bits)

    def iteration_budget(self) -> int:
        return ITERATION_BUDGET * max(1, self.working_bits // 53)


DEFAULT_PRECISION = PrecisionConfig()


def pole_distance(s) -> Tuple[int, mpf]:
    """Nearest non-positive integer to s and the distance to it (distance is inf if there is none nearby)."""
    s = mpc(s)
    k = int(mpmath.nint(s.real))
    if k > 0:
        return k, mpmath.inf
    return k, abs(s - k)


def gamma(s, cfg: PrecisionConfig = DEFAULT_PRECISION) -> mpc:
    """
    Gamma function at complex s.

    mpmath picks its expansion (Taylor near small arguments, Spouge/Stirling
    elsewhere) from the working precision, which gives uniform error control
    at any bit length.

    Raises:
        PoleError: s is a non-positive integer within 2^(-bits/2)
    """
    with mpmath.workprec(cfg.working_bits):
        s = mpc(s)
        k, dist = pole_distance(s)
        if dist < mpmath.ldexp(mpf(1), -cfg.bits // 2):
            raise PoleError(f"Gamma has a pole at s={k}")
        return mpc(mpmath.gamma(s))


def lower_incomplete_gamma(s, x, cfg: PrecisionConfig = DEFAULT_PRECISION) -> mpc:
    """gamma(s, x) = x^s e^(-x) sum_k x^k / (s (s+1) ... (s+k))."""
    with mpmath.workprec(cfg.working_bits):
        value, _ = _lower_series(mpc(s), mpf(x), cfg)
        return value


def _lower_series(s: mpc, x: mpf, cfg: PrecisionConfig) -> Tuple[mpc, mpf]:
    eps = cfg.epsilon()
    term = 1 / s
    total = term
    largest = abs(term)
    k = 0
    budget = cfg.iteration_budget()
    while True:
        k += 1
        if k > budget:
            raise ConvergenceError(f"incomplete gamma series did not converge for s={s}, x={x}")
        term = term * x / (s + k)
        total += term
        largest = max(largest, abs(term))
        if abs(term) <= eps * abs(total):
            break
    prefactor = mpmath.exp(s * mpmath.log(x) - x)
    value = prefactor * total
    # rounding grows with the number of terms and with the largest partial term
    error = abs(prefactor) * largest * eps * (k + 2)
    return value, error


def _upper_continued_fraction(s: mpc, x: mpf, cfg: PrecisionConfig) -> Tuple[mpc, mpf]:
    # Legendre continued fraction evaluated with the modified Lentz method
    eps = cfg.epsilon()
    tiny = mpmath.ldexp(mpf(1), -4 * cfg.working_bits)
    b = x + 1 - s
    c = 1 / mpc(tiny)
    d = 1 / b
    h = d
    budget = cfg.iteration_budget()
    i = 0
    while True:
        i += 1
        if i > budget:
            raise ConvergenceError(f"incomplete gamma continued fraction did not converge for s={s}, x={x}")
        an = -i * (i - s)
        b += 2
        d = an * d + b
        if abs(d) < tiny:
            d = mpc(tiny)
        c = b + an / c
        if abs(c) < tiny:
            c = mpc(tiny)
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) <= eps:
            break
    value = mpmath.exp(s * mpmath.log(x) - x) * h
    return value, abs(value) * eps * (i + 2)


def upper_incomplete_gamma_with_error(s, x, cfg: PrecisionConfig = DEFAULT_PRECISION) -> Tuple[mpc, mpf]:
    """
    Upper incomplete gamma together with an absolute rounding estimate.

    The series branch (x < |s|+1) subtracts gamma(s, x) from Gamma(s), so its
    estimate includes the cancellation between the two.
    """
    with mpmath.workprec(cfg.working_bits):
        s = mpc(s)
        x = mpf(x)
        if x <= 0:
            raise DomainError(f"upper incomplete gamma needs x > 0, got {x}")
        _, dist = pole_distance(s)
        use_series = x < abs(s) + 1 and dist > mpf("0.1")
        if use_series:
            lower, lower_err = _lower_series(s, x, cfg)
            full = mpc(mpmath.gamma(s))
            value = full - lower
            error = lower_err + (abs(full) + abs(lower)) * cfg.epsilon() * 4
            return value, error
        return _upper_continued_fraction(s, x, cfg)


def upper_incomplete_gamma(s, x, cfg: PrecisionConfig = DEFAULT_PRECISION) -> mpc:
    """
    Gamma(s, x) = integral from x to infinity of t^(s-1) e^(-t) dt.

    Args:
        s: complex order
        x: positive real lower limit
        cfg: precision configuration

    Returns:
        mpc: the upper incomplete gamma value

    Raises:
        ConvergenceError: neither expansion met the target within the iteration budget
    """
    value, _ = upper_incomplete_gamma_with_error(s, x, cfg)
    return value


def _roots_of_unity(m: int, sign: int) -> List[mpc]:
    return [mpmath.expjpi(mpf(2 * sign * k) / m) for k in range(m)]


def _direct_transform(values: Sequence[mpc], sign: int) -> List[mpc]:
    m = len(values)
    roots = _roots_of_unity(m, sign)
    out = []
    for k in range(m):
        acc = mpc(0)
        for j, v in enumerate(values):
            acc += v * roots[(j * k) % m]
        out.append(acc)
    return out


def _radix2_transform(values: Sequence[mpc], roots: List[mpc], stride: int) -> List[mpc]:
    m = len(values)
    if m == 1:
        return [values[0]]
    even = _radix2_transform(values[0::2], roots, stride * 2)
    odd = _radix2_transform(values[1::2], roots, stride * 2)
    half = m // 2
    out = [mpc(0)] * m
    for k in range(half):
        t = roots[k * stride] * odd[k]
        out[k] = even[k] + t
        out[k + half] = even[k] - t
    return out


def _transform(values: Sequence, sign: int, cfg: PrecisionConfig) -> List[mpc]:
    m = len(values)
    if m < 1:
        raise DomainError("DFT needs at least one value")
    with mpmath.workprec(cfg.working_bits):
        values = [mpc(v) for v in values]
        if m > DIRECT_DFT_MAX and m & (m - 1) == 0:
            return _radix2_transform(values, _roots_of_unity(m, sign), 1)
        return _direct_transform(values, sign)


def dft(values: Sequence, cfg: PrecisionConfig = DEFAULT_PRECISION) -> List[mpc]:
    """Forward transform X_k = sum_j v_j e^(-2 pi i j k / M)."""
    return _transform(values, -1, cfg)


def idft(values: Sequence, cfg: PrecisionConfig = DEFAULT_PRECISION) -> List[mpc]:
    """Inverse of dft: v_j = (1/M) sum_k X_k e^(2 pi i j k / M)."""
    m = len(values)
    out = _transform(values, 1, cfg)
    with mpmath.workprec(cfg.working_bits):
        return [v / m for v in out]
