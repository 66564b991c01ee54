#!/usr/bin/env python3
"""
Test script for the licoeff module.
The disk map, coefficient extraction on functions with known Taylor series,
and the first Li coefficients of 11a1 and 37a1 against the finite-difference oracle.

Set ELLAB_FULL_TESTS=1 to run the default n_max = 50 job on 11a1 and 37a1 at both radii.
"""

import functools
import math
import os
import random
import sys

import mpmath
from mpmath import mpc, mpf

from ellab.errors import AliasingBudgetExceeded, PoleError, PrecondError
from ellab.lfunction import LFunctionContext
from ellab.licoeff import (CircleSamples, DiskSamplingPlan, LiReport, coefficients_from_samples, disk_map,
                           growth_diagnostics, growth_fit, lambda_one_oracle, li_coefficients, sample_circle,
                           series_quotient)
from ellab.numerics import PrecisionConfig
from ellab.reduction import conductor, local_ap
from ellab.weierstrass import QQ, WeierstrassCurve

FULL = os.getenv("ELLAB_FULL_TESTS", "") not in ("", "0")
CFG = PrecisionConfig(bits=64, guard_bits=16)
CURVES = {
    "11a1": WeierstrassCurve.over(QQ, 0, -1, 1, -10, -20),
    "37a1": WeierstrassCurve.over(QQ, 0, 0, 1, -1, 0),
}
N_SMALL = 6
M_SMALL = 64


@functools.lru_cache(maxsize=None)
def context(label: str, cfg: PrecisionConfig = CFG) -> LFunctionContext:
    curve = CURVES[label]
    data = conductor(curve)
    return LFunctionContext(curve.key(), data.N, data.bad_ap,
                            ap_source=lambda p: local_ap(curve, p, data), cfg=cfg)


@functools.lru_cache(maxsize=None)
def small_report(label: str) -> LiReport:
    return li_coefficients(context(label), DiskSamplingPlan(0.5, M_SMALL, CFG), N_SMALL)


def synthetic_samples(func, radius: float, M: int) -> CircleSamples:
    with mpmath.workprec(CFG.working_bits):
        values = [func(mpf(radius) * mpmath.expjpi(mpf(2 * j) / M)) for j in range(M)]
    return CircleSamples(radius, values, mpf(0))


def test_disk_map():
    with mpmath.workprec(CFG.working_bits):
        assert disk_map(0, CFG) == 1
        assert disk_map(-1, CFG) == mpf("0.5")
        for theta in (mpf("0.3"), mpf(1), mpf("2.9")):
            s = disk_map(mpmath.expj(theta), CFG)
            assert abs(s.real - mpf("0.5")) < CFG.target()
        # the critical line maps onto the unit circle
        rng = random.Random(5)
        for _ in range(100):
            s = mpc("0.5", rng.uniform(-50, 50))
            assert abs(abs(1 - 1 / s) - 1) < CFG.target()
    try:
        disk_map(1, CFG)
        assert False, "z = 1 mapped"
    except PoleError:
        pass


def test_sampling_plan():
    assert DiskSamplingPlan.for_nmax(50).M == 512
    assert DiskSamplingPlan.for_nmax(10).M == 256
    assert DiskSamplingPlan.for_nmax(10, M=64).M == 64
    plan = DiskSamplingPlan(0.5, 64, CFG)
    assert plan.alternate_radius == 0.4
    assert plan.with_radius(0.4).alternate_radius == 0.5
    assert plan.doubled().M == 128
    for radius, M in ((0, 64), (1, 64), (1.2, 64), (0.5, 100), (0.5, 1)):
        try:
            DiskSamplingPlan(radius, M, CFG)
            assert False, f"r={radius}, M={M} accepted"
        except PrecondError:
            pass


def test_series_quotient():
    # 1 / (1 - x) = 1 + x + x^2 + ...
    assert series_quotient([1], [1, -1], 5) == [1, 1, 1, 1, 1, 1]
    # (1 + x) / (1 - x) = 1 + 2x + 2x^2 + ...
    assert series_quotient([1, 1], [1, -1], 3) == [1, 2, 2, 2]
    q = series_quotient([mpf(2), mpf(0)], [mpf(4)], 1)
    assert q == [mpf("0.5"), 0]


def test_coefficients_of_known_series():
    samples = synthetic_samples(lambda z: 1 / (1 - z / 2), 0.5, M_SMALL)
    result = coefficients_from_samples(samples, 8, CFG)
    with mpmath.workprec(CFG.working_bits):
        for k, c in enumerate(result.coeffs):
            assert abs(c - mpf(2) ** -k) < mpf(10) ** -15, f"c_{k} = {c}"
        assert result.aliasing_bound <= 2 * CFG.target()
    samples = synthetic_samples(mpmath.exp, 0.4, M_SMALL)
    result = coefficients_from_samples(samples, 10, CFG)
    with mpmath.workprec(CFG.working_bits):
        for k, c in enumerate(result.coeffs):
            assert abs(c - mpf(1) / math.factorial(k)) < mpf(10) ** -14, f"c_{k} = {c}"


def test_coefficient_limits():
    samples = synthetic_samples(mpmath.exp, 0.5, M_SMALL)
    try:
        coefficients_from_samples(samples, M_SMALL // 4 + 1, CFG)
        assert False, "K > M/4 accepted"
    except PrecondError:
        pass
    close_to_edge = synthetic_samples(mpmath.exp, 0.99, M_SMALL)
    try:
        coefficients_from_samples(close_to_edge, 8, CFG)
        assert False, "aliasing at r = 0.99, M = 64 accepted"
    except AliasingBudgetExceeded:
        pass


def test_growth_fit():
    lambdas = [n * math.log(n) + 2 * n for n in range(1, 41)]
    fit = growth_fit(lambdas)
    assert abs(fit.slope - 1) < 1e-9
    assert abs(fit.intercept - 2) < 1e-9
    assert fit.residual < 1e-9
    assert growth_fit([1.0]) is None


def test_sign_change_detector():
    lambdas = [mpf(v) for v in (0.1, 0.3, 0.6, 0.9, 1.2, 1.4, -0.2, -0.1, 0.5, -0.3)]
    report = LiReport("synthetic", len(lambdas), lambdas, [mpf(0)] * len(lambdas),
                      all_nonnegative=False, growth_fit=None)
    summary = growth_diagnostics(report)
    assert summary.sign_changes == [7, 10]
    assert abs(summary.differences[0] - 0.2) < 1e-12
    assert abs(summary.normalized[1] - 0.15) < 1e-12
    assert summary.fit is not None


def test_small_li_report_11a1():
    report = small_report("11a1")
    assert report.n_max == N_SMALL and len(report.lambdas) == N_SMALL
    assert report.all_nonnegative
    assert (report.radius, report.M, report.bits) == (0.5, M_SMALL, CFG.bits)
    with mpmath.workprec(CFG.working_bits):
        assert all(v > 0 for v in report.lambdas)
        assert all(e < mpf(10) ** -8 for e in report.error_estimates)


def test_lambda_one_matches_oracle():
    for label in CURVES:
        report = small_report(label)
        oracle, oracle_error = lambda_one_oracle(context(label))
        with mpmath.workprec(CFG.working_bits):
            budget = 2 * (report.error_estimates[0] + oracle_error) + mpf(10) ** -12
            assert abs(report.lambdas[0] - oracle) <= budget, f"{label}: {report.lambdas[0]} vs {oracle}"


def test_lambda_one_at_default_precision():
    cfg = PrecisionConfig()
    for label in CURVES:
        ctx = context(label, cfg)
        report = li_coefficients(ctx, DiskSamplingPlan(0.5, 128, cfg), 4)
        oracle, oracle_error = lambda_one_oracle(ctx)
        with mpmath.workprec(cfg.working_bits):
            disagreement = abs(report.lambdas[0] - oracle)
            assert disagreement <= 2 * (report.error_estimates[0] + oracle_error), label
            assert disagreement <= mpf(10) ** -20, f"{label}: {mpmath.nstr(disagreement, 3)}"


def test_radius_invariance():
    for label in CURVES:
        base = small_report(label)
        inner = li_coefficients(context(label), DiskSamplingPlan(0.4, M_SMALL, CFG), N_SMALL)
        assert inner.radius == 0.4
        with mpmath.workprec(CFG.working_bits):
            for n, (a, b, ea, eb) in enumerate(zip(base.lambdas, inner.lambdas, base.error_estimates,
                                                   inner.error_estimates), start=1):
                assert abs(a - b) <= ea + eb, f"{label}, n={n}"


def test_rank_one_curve_is_nonnegative():
    report = small_report("37a1")
    assert context("37a1").w == -1
    assert report.all_nonnegative
    assert growth_diagnostics(report).sign_changes == []


def test_parallel_sampling_matches_inline():
    ctx = context("11a1")
    inline = sample_circle(ctx, 0.5, 8)
    pooled = sample_circle(ctx, 0.5, 8, workers=2)
    with mpmath.workprec(CFG.working_bits):
        for a, b in zip(inline.values, pooled.values):
            assert abs(a - b) <= 2 * inline.max_error
    finer = sample_circle(ctx, 0.5, 16, coarse=inline)
    assert finer.values[::2] == inline.values


def test_default_job():
    if not FULL:
        return
    for label in CURVES:
        ctx = context(label, PrecisionConfig())
        plan = DiskSamplingPlan.for_nmax(50, cfg=ctx.cfg)
        report = li_coefficients(ctx, plan, 50)
        assert report.all_nonnegative, label
        assert growth_diagnostics(report).fit.slope > 0
        inner = li_coefficients(ctx, plan.with_radius(0.4), 50)
        with mpmath.workprec(ctx.cfg.working_bits):
            for n in range(50):
                gap = abs(report.lambdas[n] - inner.lambdas[n])
                assert gap <= report.error_estimates[n] + inner.error_estimates[n], f"{label}, n={n + 1}"


if __name__ == "__main__":
    print("=" * 50)
    print("LI COEFFICIENT TEST")
    print("=" * 50)
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_")]
    failures = 0
    for i, (name, fn) in enumerate(tests, 1):
        print(f"\n{i}. {name}")
        print("-" * 50)
        try:
            fn()
            print("OK")
        except Exception as e:
            failures += 1
            print(f"FAILED: {type(e).__name__}: {str(e)}")
    print("\n" + "=" * 50)
    print(f"TEST COMPLETED ({failures} failure(s))")
    print("=" * 50)
    sys.exit(1 if failures else 0)
