"""
Service layer between the command line and the numerical modules (singleton).

It owns the per-curve L-function contexts, loads and stores their
coefficients in the on-disk cache, and retries precision-sensitive steps
at a higher working precision.
"""

import functools
import logging
import threading
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath

from utils.cache_utils import read_cache, write_cache

from .constants import (CACHE_DIR, DEFAULT_HEIGHT_TOL, DEFAULT_N_CAP, DEFAULT_RADIUS, DEFAULT_SEED,
                        EXHAUSTIVE_THRESHOLD)
from .errors import CentralValueTooSmall, ConvergenceError, HasseViolation, IndeterminateSign, PrecondError
from .heights import (AuditReport, HeightCSReport, HeightValue, PairingMatrix, canonical_height,
                      cauchy_schwarz_ht, frobenius_witness, neron_tate_witness, pairing_matrix, qform_audit)
from .lfunction import (LFunctionContext, XiValue, completed_lambda, dirichlet_coeffs, lvalue, root_number,
                        truncation_point, xi)
from .licoeff import DiskSamplingPlan, LiReport, disk_map, li_coefficients
from .numerics import DEFAULT_PRECISION, PrecisionConfig
from .pointcount import (ApRow, CountMethod, CountResult, FrobeniusForm, GaussDiaryResult, SweepRow, ap_table,
                         count_points, frobenius_form, gauss_diary_count, hasse_sweep)
from .reduction import ConductorData, OverrideSpec, ReductionType, bad_primes, classify, conductor, local_ap
from .weierstrass import CurvePoint, PrimeField, RawEquation, WeierstrassCurve

logger = logging.getLogger("lab_service")

RETRYABLE = (IndeterminateSign, ConvergenceError, CentralValueTooSmall)


def with_retry(max_retries=2, bits_step=32, backoff=2.0, retry_on=RETRYABLE):
    """
    Decorator that re-runs a numerical step at a higher precision.

    Args:
        max_retries: Maximum number of retry attempts
        bits_step: Bits added to the precision on the first retry
        backoff: Multiplier for the bits added on each later retry
        retry_on: Exceptions that trigger a retry; anything else propagates
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(self, *args, cfg: Optional[PrecisionConfig] = None, **kwargs):
            cfg = cfg or self.precision
            step = bits_step
            retries = 0
            while True:
                try:
                    return func(self, *args, cfg=cfg, **kwargs)
                except retry_on as e:
                    if retries == max_retries:
                        logger.error(f"{func.__name__} failed after {max_retries} retries: {str(e)}")
                        raise
                    retries += 1
                    cfg = cfg.raised(int(step))
                    logger.warning(f"{func.__name__}: {str(e)}; retrying at {cfg.bits} bits "
                                   f"({retries}/{max_retries})")
                    step *= backoff
        return wrapper
    return decorator


@dataclass(frozen=True)
class ServiceSettings:
    cache_dir: str = CACHE_DIR
    use_cache: bool = True
    workers: int = 1
    exhaustive_threshold: int = EXHAUSTIVE_THRESHOLD
    seed: int = DEFAULT_SEED
    precision: PrecisionConfig = DEFAULT_PRECISION


class LabService:
    """Pipelines behind the command line (Singleton)"""

    _instance = None
    _lock = threading.Lock()

    def __init__(self, settings: Optional[ServiceSettings] = None):
        self.settings = settings or ServiceSettings()
        self._contexts: Dict[Tuple, LFunctionContext] = {}
        self._conductors: Dict[Tuple, ConductorData] = {}
        self._registry_lock = threading.Lock()

    @classmethod
    def get_instance(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = cls()
        return cls._instance

    def configure(self, settings: ServiceSettings) -> "LabService":
        with self._registry_lock:
            if settings != self.settings:
                self.settings = settings
                self._contexts.clear()
                self._conductors.clear()
        return self

    @property
    def precision(self) -> PrecisionConfig:
        return self.settings.precision

    # cache helpers

    def _read(self, parts):
        if not self.settings.use_cache:
            return None
        return read_cache(parts, self.settings.cache_dir)

    def _write(self, parts, payload):
        if self.settings.use_cache:
            write_cache(parts, payload, self.settings.cache_dir)

    # counting and reduction

    def count_table(self, curve: RawEquation, primes: Sequence[int]) -> List[ApRow]:
        if isinstance(curve.field, PrimeField):
            p = curve.field.p
            if curve.disc == 0:
                logger.info(f"{curve} is singular mod {p}")
                return [ApRow(p, None, "bad")]
            return [ApRow(p, self.point_count(curve, p, curve).a, "good")]
        return ap_table(curve, primes, counter=lambda reduced, p: self.point_count(curve, p, reduced))

    def point_count(self, curve: RawEquation, p: int, reduced: RawEquation) -> CountResult:
        """#E(F_p) of a reduction of ``curve``, cached per curve and prime."""
        parts = [curve.key(), "pointcount", p]
        cached = self._read(parts)
        if cached is not None:
            try:
                count = cached["count"]
                return CountResult(p, count, p + 1 - count, CountMethod(cached["method"]))
            except (KeyError, TypeError, ValueError, HasseViolation) as e:
                logger.warning(f"ignoring cached count of {curve} at p={p}: {str(e)}")
        result = count_points(reduced, threshold=self.settings.exhaustive_threshold, seed=self.settings.seed)
        self._write(parts, {"count": result.count, "method": result.method.value})
        return result

    def classify_primes(self, curve: RawEquation, primes: Optional[Sequence[int]] = None,
                        overrides: Optional[OverrideSpec] = None) -> Dict[int, ReductionType]:
        spec = overrides or OverrideSpec()
        primes = list(primes) if primes else bad_primes(curve)
        return {p: classify(curve, p, spec.primes.get(p), self.settings.exhaustive_threshold, self.settings.seed)
                for p in primes}

    def conductor(self, curve: RawEquation, overrides: Optional[OverrideSpec] = None) -> ConductorData:
        key = (curve.key(), repr(overrides))
        with self._registry_lock:
            if key not in self._conductors:
                self._conductors[key] = conductor(curve, overrides, self.settings.exhaustive_threshold,
                                                  self.settings.seed)
            return self._conductors[key]

    # L-functions

    def context_for(self, curve: RawEquation, overrides: Optional[OverrideSpec] = None,
                    cfg: Optional[PrecisionConfig] = None) -> LFunctionContext:
        """The context of a curve at a precision, seeded from the coefficient cache."""
        cfg = cfg or self.precision
        data = self.conductor(curve, overrides)
        key = (curve.key(), data.N, tuple(sorted(data.bad_ap.items())), cfg.bits, cfg.guard_bits)
        with self._registry_lock:
            ctx = self._contexts.get(key)
            if ctx is None:
                threshold, seed = self.settings.exhaustive_threshold, self.settings.seed
                cached = self._read(self._coeff_key(curve, data)) or {}
                ctx = LFunctionContext(
                    curve.key(), data.N, data.bad_ap,
                    ap_source=lambda p: local_ap(curve, p, data, threshold, seed),
                    cfg=cfg, w=cached.get("w"), coeffs=cached.get("coeffs"),
                )
                self._contexts[key] = ctx
            return ctx

    def _coeff_key(self, curve: RawEquation, data: ConductorData):
        return [curve.key(), "lfunction", data.N, sorted(data.bad_ap.items())]

    def persist(self, curve: RawEquation, ctx: LFunctionContext, overrides: Optional[OverrideSpec] = None):
        """Store coefficients and sign when they extend what the cache holds."""
        data = self.conductor(curve, overrides)
        parts = self._coeff_key(curve, data)
        cached = self._read(parts) or {}
        if len(cached.get("coeffs", [])) >= ctx.n_cached and (ctx.w is None or cached.get("w") == ctx.w):
            return
        coeffs = ctx.coeffs[1:]
        if len(cached.get("coeffs", [])) > len(coeffs):
            coeffs = cached["coeffs"]
        self._write(parts, {"coeffs": coeffs, "w": ctx.w if ctx.w is not None else cached.get("w")})

    def coefficients(self, curve: RawEquation, n_max: int, overrides: Optional[OverrideSpec] = None) -> List[int]:
        ctx = self.context_for(curve, overrides)
        coeffs = dirichlet_coeffs(ctx, n_max)
        self.persist(curve, ctx, overrides)
        return coeffs

    @with_retry()
    def root_number(self, curve: RawEquation, overrides: Optional[OverrideSpec] = None,
                    cfg: Optional[PrecisionConfig] = None) -> int:
        ctx = self.context_for(curve, overrides, cfg)
        if ctx.w is None:
            root_number(ctx)
            self.persist(curve, ctx, overrides)
        return ctx.w

    def _ready_context(self, curve, overrides, cfg) -> LFunctionContext:
        w = self.root_number(curve, overrides, cfg=cfg)
        ctx = self.context_for(curve, overrides, cfg)
        ctx.w = w
        return ctx

    @with_retry()
    def lvalue(self, curve: RawEquation, s, overrides: Optional[OverrideSpec] = None,
               cfg: Optional[PrecisionConfig] = None) -> XiValue:
        ctx = self._ready_context(curve, overrides, cfg)
        value = lvalue(ctx, s)
        self.persist(curve, ctx, overrides)
        return value

    @with_retry()
    def completed_lambda(self, curve: RawEquation, u, overrides: Optional[OverrideSpec] = None,
                         cfg: Optional[PrecisionConfig] = None) -> XiValue:
        ctx = self._ready_context(curve, overrides, cfg)
        value = completed_lambda(ctx, u)
        self.persist(curve, ctx, overrides)
        return value

    @with_retry()
    def xi_value(self, curve: RawEquation, s, overrides: Optional[OverrideSpec] = None,
                 cfg: Optional[PrecisionConfig] = None) -> XiValue:
        ctx = self._ready_context(curve, overrides, cfg)
        value = xi(ctx, s)
        self.persist(curve, ctx, overrides)
        return value

    @with_retry()
    def li_report(self, curve: RawEquation, n_max: int, radius: float = DEFAULT_RADIUS,
                  dft_size: Optional[int] = None, overrides: Optional[OverrideSpec] = None,
                  cfg: Optional[PrecisionConfig] = None) -> LiReport:
        ctx = self._ready_context(curve, overrides, cfg)
        plan = DiskSamplingPlan.for_nmax(n_max, radius=radius, M=dft_size, cfg=ctx.cfg)
        # worker processes can only read coefficients, so extend them up front
        needed = 0
        for radius_used in (plan.radius, plan.alternate_radius):
            for z in (radius_used, -radius_used, 1j * radius_used):
                with mpmath.workprec(ctx.cfg.working_bits):
                    u = disk_map(z, ctx.cfg) + mpmath.mpf(0.5)
                needed = max(needed, truncation_point(ctx, u))
        ctx.ensure_coeffs(needed + needed // 4 + 10)
        report = li_coefficients(ctx, plan, n_max, workers=self.settings.workers)
        self.persist(curve, ctx, overrides)
        return report

    # heights

    def heights(self, curve: RawEquation, points: Sequence[CurvePoint], tol=DEFAULT_HEIGHT_TOL,
                n_cap: int = DEFAULT_N_CAP) -> List[HeightValue]:
        model = WeierstrassCurve.from_raw(curve)
        return [canonical_height(model, P, tol, n_cap, cfg=self.precision) for P in points]

    def pairing_matrix(self, curve: RawEquation, points: Sequence[CurvePoint], tol=DEFAULT_HEIGHT_TOL,
                       n_cap: int = DEFAULT_N_CAP) -> PairingMatrix:
        model = WeierstrassCurve.from_raw(curve)
        return pairing_matrix(model, points, tol, n_cap, cfg=self.precision, workers=self.settings.workers)

    def cs_check(self, curve: RawEquation, P: CurvePoint, Q: CurvePoint, tol=DEFAULT_HEIGHT_TOL,
                 n_cap: int = DEFAULT_N_CAP) -> HeightCSReport:
        model = WeierstrassCurve.from_raw(curve)
        return cauchy_schwarz_ht(model, P, Q, tol, n_cap, cfg=self.precision)

    # finite-field checks

    def gauss(self, p: int) -> GaussDiaryResult:
        return gauss_diary_count(p)

    def hasse_sweep(self, primes: Sequence[int]) -> List[SweepRow]:
        return hasse_sweep(primes)

    def frobenius(self, curve: RawEquation) -> FrobeniusForm:
        if not isinstance(curve.field, PrimeField):
            raise PrecondError("the Frobenius form needs a curve over F_p (write the curve as '...@p')")
        return frobenius_form(self.point_count(curve, curve.field.p, curve))

    def audit_qform(self, curve: Optional[RawEquation] = None, points: Optional[Sequence[CurvePoint]] = None,
                    form: Optional[FrobeniusForm] = None, tol=DEFAULT_HEIGHT_TOL,
                    n_cap: int = DEFAULT_N_CAP) -> AuditReport:
        """Audit an explicit form (a, q), the Frobenius form of a curve over F_p, or Neron-Tate on points."""
        if form is not None:
            return qform_audit(frobenius_witness(form))
        if curve is None:
            raise PrecondError("audit-qform needs a curve or an explicit form")
        if isinstance(curve.field, PrimeField):
            return qform_audit(frobenius_witness(self.frobenius(curve)))
        if not points:
            raise PrecondError("a Neron-Tate audit needs points")
        model = WeierstrassCurve.from_raw(curve)
        return qform_audit(neron_tate_witness(model, points, tol, n_cap, cfg=self.precision))
