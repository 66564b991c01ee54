"""
Li coefficients of xi through the disk map z -> s = 1/(1-z).

phi(z) = xi(1/(1-z)) is sampled on a circle |z| = r, its Taylor
coefficients come out of a DFT, and the series of phi'/phi follows by
formal division. The n-th coefficient of phi'/phi is lambda(n+1).
Error estimates compare the run against a second radius and against a
run with twice the samples.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from mpmath import mpc, mpf

from utils.worker_utils import parallel_map

from .constants import ALTERNATE_RADIUS, DEFAULT_RADIUS, MIN_SAMPLES
from .errors import AliasingBudgetExceeded, CentralValueTooSmall, PoleError, PrecondError
from .lfunction import LFunctionContext, root_number, xi
from .numerics import PrecisionConfig, dft

logger = logging.getLogger("licoeff")


def disk_map(z, cfg: Optional[PrecisionConfig] = None) -> mpc:
    """s = 1/(1-z): 0 -> 1, -1 -> 1/2, and the unit circle onto Re s = 1/2."""
    bits = cfg.working_bits if cfg is not None else mpmath.mp.prec
    with mpmath.workprec(bits):
        z = mpc(z)
        if z == 1:
            raise PoleError("the disk map has a pole at z = 1")
        return 1 / (1 - z)


def _next_power_of_two(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


@dataclass(frozen=True)
class DiskSamplingPlan:
    radius: float = DEFAULT_RADIUS
    M: int = MIN_SAMPLES
    cfg: PrecisionConfig = field(default_factory=PrecisionConfig)

    def __post_init__(self):
        if not 0 < self.radius < 1:
            raise PrecondError(f"radius must lie strictly inside the unit disk, got {self.radius}")
        if self.M < 2 or self.M & (self.M - 1):
            raise PrecondError(f"sample count must be a power of two, got {self.M}")

    @classmethod
    def for_nmax(cls, n_max: int, radius: float = DEFAULT_RADIUS, M: Optional[int] = None,
                 cfg: Optional[PrecisionConfig] = None) -> "DiskSamplingPlan":
        """Default plan: M = max(256, 8 n_max) rounded up to a power of two."""
        if M is None:
            M = _next_power_of_two(max(MIN_SAMPLES, 8 * n_max))
        return cls(radius, M, cfg or PrecisionConfig())

    def with_radius(self, radius: float) -> "DiskSamplingPlan":
        return DiskSamplingPlan(radius, self.M, self.cfg)

    def doubled(self) -> "DiskSamplingPlan":
        return DiskSamplingPlan(self.radius, 2 * self.M, self.cfg)

    @property
    def alternate_radius(self) -> float:
        return ALTERNATE_RADIUS if self.radius != ALTERNATE_RADIUS else DEFAULT_RADIUS


@dataclass(frozen=True)
class CircleSamples:
    radius: float
    values: List[mpc]
    max_error: mpf


@dataclass(frozen=True)
class PhiCoefficients:
    coeffs: List[mpc]
    aliasing_bound: mpf
    sample_error: mpf
    samples: CircleSamples


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    residual: float


@dataclass
class LiReport:
    curve: str
    n_max: int
    lambdas: List[mpf]
    error_estimates: List[mpf]
    all_nonnegative: bool
    growth_fit: Optional[GrowthFit]
    radius: float = DEFAULT_RADIUS
    M: int = MIN_SAMPLES
    bits: int = 0


@dataclass(frozen=True)
class GrowthSummary:
    lambdas: List[float]
    normalized: List[float]
    differences: List[float]
    fit: Optional[GrowthFit]
    sign_changes: List[int]


def _xi_sample(task: Tuple[LFunctionContext, mpc]) -> Tuple[mpc, mpf]:
    ctx, s = task
    value = xi(ctx, s)
    return value.value, value.error_bound


def _circle_point(radius: float, j: int, M: int) -> mpc:
    return mpf(radius) * mpmath.expjpi(mpf(2 * j) / M)


def sample_circle(ctx: LFunctionContext, radius: float, M: int, workers: int = 1,
                  coarse: Optional[CircleSamples] = None) -> CircleSamples:
    """
    phi at z_j = r e^(2 pi i j / M), j = 0..M-1.

    Only j <= M/2 is evaluated; phi(conj z) = conj phi(z) fills the rest.
    With ``coarse`` (the same radius at M/2 samples) the even indices are reused.
    """
    cfg = ctx.cfg
    half = M // 2
    reused = {}
    if coarse is not None and len(coarse.values) * 2 == M and coarse.radius == radius:
        reused = {2 * j: coarse.values[j] for j in range(len(coarse.values) // 2 + 1)}
    with mpmath.workprec(cfg.working_bits):
        todo = [j for j in range(half + 1) if j not in reused]
        tasks = [(ctx, disk_map(_circle_point(radius, j, M), cfg)) for j in todo]
    results = parallel_map(_xi_sample, tasks, workers)
    logger.debug(f"{ctx.curve_id}: {len(todo)} xi evaluation(s) on |z|={radius}, M={M}")
    with mpmath.workprec(cfg.working_bits):
        upper = dict(reused)
        max_error = coarse.max_error if reused else mpf(0)
        for j, (value, error) in zip(todo, results):
            upper[j] = value
            max_error = max(max_error, error)
        values = [upper[j] if j <= half else mpmath.conj(upper[M - j]) for j in range(M)]
        return CircleSamples(radius, values, max_error)


def coefficients_from_samples(samples: CircleSamples, K: int, cfg: PrecisionConfig) -> PhiCoefficients:
    """
    c_0..c_K from circle samples: c_k = r^-k X_k / M with X the forward DFT.

    Raises:
        AliasingBudgetExceeded: max|phi| r^(M-K) / (1-r) is above the precision target
    """
    M = len(samples.values)
    if K > M // 4:
        raise PrecondError(f"{M} samples support at most {M // 4} coefficients, asked for {K}")
    transformed = dft(samples.values, cfg)
    with mpmath.workprec(cfg.working_bits):
        r = mpf(samples.radius)
        peak = max(abs(v) for v in samples.values)
        relative = mpmath.power(r, M - K) / (1 - r)
        if relative > cfg.target():
            raise AliasingBudgetExceeded(f"aliasing factor {mpmath.nstr(relative, 5)} exceeds the target "
                                         f"at M={M}, K={K}, r={samples.radius}")
        coeffs = [transformed[k] / (M * mpmath.power(r, k)) for k in range(K + 1)]
        return PhiCoefficients(coeffs, peak * relative, samples.max_error, samples)


def phi_taylor(ctx: LFunctionContext, plan: DiskSamplingPlan, K: int, workers: int = 1) -> PhiCoefficients:
    """
    Taylor coefficients c_0..c_K of phi(z) = xi(1/(1-z)).

    Raises:
        PrecondError: K > M/4
        AliasingBudgetExceeded: the sample count is too small for the precision
    """
    if K > plan.M // 4:
        raise PrecondError(f"{plan.M} samples support at most {plan.M // 4} coefficients, asked for {K}")
    samples = sample_circle(ctx, plan.radius, plan.M, workers)
    return coefficients_from_samples(samples, K, ctx.cfg)


def series_quotient(num: Sequence, den: Sequence, order: int) -> List:
    """Coefficients q_0..q_order of num/den as formal power series (den[0] != 0)."""
    q = []
    for n in range(order + 1):
        acc = num[n] if n < len(num) else 0
        for k in range(1, min(n, len(den) - 1) + 1):
            acc -= den[k] * q[n - k]
        q.append(acc / den[0])
    return q


def _lambdas(coeffs: Sequence[mpc], n_max: int) -> List[mpc]:
    derivative = [(k + 1) * coeffs[k + 1] for k in range(n_max)]
    return series_quotient(derivative, coeffs, n_max - 1)


def growth_fit(lambdas: Sequence) -> Optional[GrowthFit]:
    """Least-squares line through (log n, lambda(n)/n)."""
    if len(lambdas) < 2:
        return None
    n = np.arange(1, len(lambdas) + 1, dtype=float)
    y = np.array([float(v) for v in lambdas]) / n
    x = np.log(n)
    (slope, intercept), residuals, _, _, _ = np.polyfit(x, y, 1, full=True)
    residual = math.sqrt(float(residuals[0])) if len(residuals) else 0.0
    return GrowthFit(float(slope), float(intercept), residual)


def li_coefficients(ctx: LFunctionContext, plan: DiskSamplingPlan, n_max: int, workers: int = 1) -> LiReport:
    """
    lambda(1..n_max) with error estimates from a second radius and doubled sampling.

    Args:
        ctx: curve context (root number is computed on demand)
        plan: radius and sample count of the main run
        n_max: number of Li coefficients
        workers: processes for the xi evaluations

    Returns:
        LiReport

    Raises:
        CentralValueTooSmall: |c_0| is below four times its error estimate
    """
    cfg = ctx.cfg
    if n_max < 1:
        raise PrecondError(f"n_max must be positive, got {n_max}")
    if ctx.w is None:
        root_number(ctx)
    logger.info(f"{ctx.curve_id}: Li coefficients up to n={n_max} at r={plan.radius}, M={plan.M}")
    main = phi_taylor(ctx, plan, n_max, workers)
    other = phi_taylor(ctx, plan.with_radius(plan.alternate_radius), n_max, workers)
    finer_samples = sample_circle(ctx, plan.radius, 2 * plan.M, workers, coarse=main.samples)
    finer = coefficients_from_samples(finer_samples, n_max, cfg)

    with mpmath.workprec(cfg.working_bits):
        c0_error = max(abs(main.coeffs[0] - other.coeffs[0]), abs(main.coeffs[0] - finer.coeffs[0]),
                       main.sample_error)
        if abs(main.coeffs[0]) < 4 * c0_error:
            raise CentralValueTooSmall(f"|xi(1)| = {mpmath.nstr(abs(main.coeffs[0]), 5)} is within "
                                       f"four error estimates of zero")
        values = _lambdas(main.coeffs, n_max)
        by_radius = _lambdas(other.coeffs, n_max)
        by_doubling = _lambdas(finer.coeffs, n_max)
        lambdas = [mpf(v.real) for v in values]
        errors = [max(abs(v - a), abs(v - b)) for v, a, b in zip(values, by_radius, by_doubling)]

    report = LiReport(
        curve=ctx.curve_id,
        n_max=n_max,
        lambdas=lambdas,
        error_estimates=errors,
        all_nonnegative=all(v >= 0 for v in lambdas),
        growth_fit=growth_fit(lambdas),
        radius=plan.radius,
        M=plan.M,
        bits=cfg.bits,
    )
    if not report.all_nonnegative:
        negative = [n for n, v in enumerate(lambdas, start=1) if v < 0]
        logger.warning(f"{ctx.curve_id}: negative Li coefficient(s) at n = {negative}")
    return report


def growth_diagnostics(report: LiReport) -> GrowthSummary:
    """lambda(n), lambda(n)/n, first differences, the log fit, and where negative runs start."""
    lambdas = [float(v) for v in report.lambdas]
    normalized = [v / n for n, v in enumerate(lambdas, start=1)]
    differences = [b - a for a, b in zip(lambdas, lambdas[1:])]
    sign_changes = [n for n, v in enumerate(lambdas, start=1)
                    if v < 0 and (n == 1 or lambdas[n - 2] >= 0)]
    fit = report.growth_fit if report.growth_fit is not None else growth_fit(lambdas)
    return GrowthSummary(lambdas, normalized, differences, fit, sign_changes)


def lambda_one_oracle(ctx: LFunctionContext, cfg: Optional[PrecisionConfig] = None) -> Tuple[mpf, mpf]:
    """
    xi'(1)/xi(1) by central differences with h = 2^(-bits/3).

    The error estimate compares steps h and 2h and adds the xi error bounds
    divided by h.
    """
    cfg = cfg or ctx.cfg
    if cfg != ctx.cfg:
        ctx = ctx.with_precision(cfg)
    with mpmath.workprec(cfg.working_bits):
        h = mpmath.ldexp(mpf(1), -(cfg.bits // 3))
        centre = xi(ctx, 1)
        plus, minus = xi(ctx, 1 + h), xi(ctx, 1 - h)
        plus2, minus2 = xi(ctx, 1 + 2 * h), xi(ctx, 1 - 2 * h)
        d1 = (plus.value - minus.value) / (2 * h)
        d2 = (plus2.value - minus2.value) / (4 * h)
        value = d1 / centre.value
        # Richardson: the h^2 term of d1 is a third of d2 - d1
        truncation = abs(d2 - d1) / 3 / abs(centre.value)
        rounding = (plus.error_bound + minus.error_bound) / (2 * h) / abs(centre.value)
        rounding += abs(value) * centre.error_bound / abs(centre.value)
        return mpf(value.real), truncation + rounding
