#!/usr/bin/env python3
"""
Test script for the heights module.
Canonical heights on 37a1 (rank 1), 389a1 (rank 2) and the 5-torsion of 11a1,
the pairing matrix, Cauchy-Schwarz, and the quadratic form audit.
"""

import os
import sys

import mpmath
from mpmath import mpf

from ellab.constants import DEFAULT_HEIGHT_TOL, DEFAULT_N_CAP
from ellab.errors import AuditFailure, CoordinateBlowup, IdentityPoint
from ellab.heights import (canonical_height, cauchy_schwarz_ht, frobenius_witness, naive_height, neron_tate_witness,
                           nt_pairing, pairing_matrix, qform_audit, torsion_order)
from ellab.numerics import PrecisionConfig
from ellab.pointcount import FrobeniusForm
from ellab.weierstrass import IDENTITY, QQ, WeierstrassCurve, add, negate, point, scalar_mul, subtract

CFG = PrecisionConfig(bits=64, guard_bits=16)
TOL = 1e-4
N_CAP = 7
DEFAULT_CFG = PrecisionConfig()
FULL = os.getenv("ELLAB_FULL_TESTS", "") not in ("", "0")

CURVE_11A1 = WeierstrassCurve.over(QQ, 0, -1, 1, -10, -20)
CURVE_37A1 = WeierstrassCurve.over(QQ, 0, 0, 1, -1, 0)
CURVE_389A1 = WeierstrassCurve.over(QQ, 0, 1, 1, -2, 0)
P37 = point(CURVE_37A1, 0, 0)
G1, G2 = point(CURVE_389A1, -1, 1), point(CURVE_389A1, 0, 0)
T11 = point(CURVE_11A1, 5, 5)
# (1/2) lim 4^-n h(x([2^n]P)) for the generator of 37a1
H_P37 = mpf("0.0255557041199844")


def height(curve, P):
    return canonical_height(curve, P, TOL, N_CAP, cfg=CFG)


class MultipleHeights:
    """Canonical heights of [k]P at the default settings, computed once per |k|."""

    def __init__(self, curve, P):
        self.curve, self.P = curve, P
        self.values = {}

    def __call__(self, k):
        k = abs(k)
        if k not in self.values:
            Q = scalar_mul(self.curve, k, self.P)
            self.values[k] = canonical_height(self.curve, Q, DEFAULT_HEIGHT_TOL, DEFAULT_N_CAP, cfg=DEFAULT_CFG)
        return self.values[k]


HEIGHTS_37A1 = MultipleHeights(CURVE_37A1, P37)
# (a, b) for A = [a]P, B = [b]P; A + B and A - B stay within [4]P
PAIRS = [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1), (2, 2), (1, -1), (2, -1), (1, -2), (3, -1)]


def test_naive_height():
    with mpmath.workprec(CFG.working_bits):
        assert naive_height(P37, CFG) == 0
        fifth = scalar_mul(CURVE_37A1, 5, P37)
        assert abs(naive_height(fifth, CFG) - mpmath.log(4)) < CFG.target()
    try:
        naive_height(IDENTITY, CFG)
        assert False, "naive height of O computed"
    except IdentityPoint:
        pass


def test_torsion():
    assert torsion_order(CURVE_11A1, T11) == 5
    assert torsion_order(CURVE_37A1, P37) is None
    for m in range(5):
        value = height(CURVE_11A1, scalar_mul(CURVE_11A1, m, T11))
        assert value.torsion and value.value == 0 and value.error_bound == 0


def test_generator_height_37a1():
    value = HEIGHTS_37A1(1)
    assert not value.torsion and 4 <= value.doublings_used <= DEFAULT_N_CAP
    with mpmath.workprec(DEFAULT_CFG.working_bits):
        assert value.error_bound < 10 * DEFAULT_HEIGHT_TOL
        assert abs(value.value - H_P37) <= 3 * value.error_bound + DEFAULT_HEIGHT_TOL


def test_doubling_stops_within_tolerance():
    # a single small change of the estimate is not enough to stop early
    for k in (1, 2, 3):
        value = HEIGHTS_37A1(k)
        assert value.converged == (value.error_bound < DEFAULT_HEIGHT_TOL)
        assert value.converged or value.doublings_used == DEFAULT_N_CAP, f"k={k}"
    coarse = height(CURVE_37A1, P37)
    assert coarse.converged or coarse.doublings_used == N_CAP
    capped = canonical_height(CURVE_37A1, P37, DEFAULT_HEIGHT_TOL, 4, cfg=DEFAULT_CFG)
    assert capped.doublings_used == 4 and not capped.converged


def test_height_of_double_37a1():
    h1, h2 = HEIGHTS_37A1(1), HEIGHTS_37A1(2)
    with mpmath.workprec(DEFAULT_CFG.working_bits):
        assert abs(h2.value - 4 * h1.value) <= 3 * (h2.error_bound + 4 * h1.error_bound)


def test_height_is_quadratic():
    base = height(CURVE_37A1, P37)
    for m in (2, 3, -2):
        multiple = height(CURVE_37A1, scalar_mul(CURVE_37A1, m, P37))
        with mpmath.workprec(CFG.working_bits):
            budget = 3 * (multiple.error_bound + m * m * base.error_bound) + TOL
            assert abs(multiple.value - m * m * base.value) <= budget, f"m={m}"
    assert height(CURVE_37A1, negate(CURVE_37A1, P37)).value == base.value


def test_parallelogram_law_37a1():
    with mpmath.workprec(DEFAULT_CFG.working_bits):
        for a, b in PAIRS:
            h_sum, h_diff, h_a, h_b = (HEIGHTS_37A1(k) for k in (a + b, a - b, a, b))
            residual = abs(h_sum.value + h_diff.value - 2 * h_a.value - 2 * h_b.value)
            assert residual <= 6 * DEFAULT_HEIGHT_TOL, f"(a, b) = ({a}, {b}): residual {mpmath.nstr(residual, 3)}"


def test_parallelogram_law_389a1():
    h_sum = height(CURVE_389A1, add(CURVE_389A1, G1, G2))
    h_diff = height(CURVE_389A1, subtract(CURVE_389A1, G1, G2))
    h1, h2 = height(CURVE_389A1, G1), height(CURVE_389A1, G2)
    with mpmath.workprec(CFG.working_bits):
        lhs = h_sum.value + h_diff.value
        rhs = 2 * h1.value + 2 * h2.value
        budget = h_sum.error_bound + h_diff.error_bound + 2 * (h1.error_bound + h2.error_bound)
        assert abs(lhs - rhs) <= 3 * budget + TOL


def test_coordinate_budget():
    fifth = scalar_mul(CURVE_37A1, 5, P37)
    try:
        canonical_height(CURVE_37A1, fifth, TOL, N_CAP, bit_budget=1, cfg=CFG)
        assert False, "budget of one bit accepted"
    except CoordinateBlowup:
        pass
    early = canonical_height(CURVE_37A1, P37, TOL, N_CAP, bit_budget=64, cfg=CFG)
    assert 0 < early.doublings_used < N_CAP


def test_cauchy_schwarz():
    for a, b in PAIRS:
        A, B = scalar_mul(CURVE_37A1, a, P37), scalar_mul(CURVE_37A1, b, P37)
        report = cauchy_schwarz_ht(CURVE_37A1, A, B, DEFAULT_HEIGHT_TOL, DEFAULT_N_CAP, DEFAULT_CFG)
        assert report.holds and report.equality, f"(a, b) = ({a}, {b})"
    independent = cauchy_schwarz_ht(CURVE_389A1, G1, G2, TOL, N_CAP, CFG)
    assert independent.holds and not independent.equality


def test_pairing_matrix():
    matrix = pairing_matrix(CURVE_389A1, [G1, G2], TOL, N_CAP, CFG)
    entries, errors = matrix.entries, matrix.errors
    with mpmath.workprec(CFG.working_bits):
        assert entries[0][1] == entries[1][0]
        assert entries[0][0] > errors[0][0] and entries[1][1] > errors[1][1]
        det = entries[0][0] * entries[1][1] - entries[0][1] ** 2
        assert det > 0
        direct = nt_pairing(CURVE_389A1, G1, G2, TOL, N_CAP, CFG)
        assert abs(direct.value - entries[0][1]) <= direct.error_bound + errors[0][1]
        # <P, P> = h(2P) - 2 h(P) = 2 h(P)
        h1 = height(CURVE_389A1, G1)
        assert abs(entries[0][0] - 2 * h1.value) <= errors[0][0] + 2 * h1.error_bound + TOL
    torsion = pairing_matrix(CURVE_11A1, [T11, scalar_mul(CURVE_11A1, 2, T11)], TOL, N_CAP, CFG)
    assert all(v == 0 for row in torsion.entries for v in row)


def test_frobenius_form_audit():
    report = qform_audit(frobenius_witness(FrobeniusForm(2, 5)))
    assert report.passed and report.checks > 0
    try:
        # m^2 + 10mn + n^2 is indefinite
        qform_audit(frobenius_witness(FrobeniusForm(10, 1)))
        assert False, "indefinite form passed"
    except AuditFailure as e:
        assert e.violations


def test_neron_tate_audit():
    double = scalar_mul(CURVE_37A1, 2, P37)
    elements = [IDENTITY, P37, negate(CURVE_37A1, P37), double]
    witness = neron_tate_witness(CURVE_37A1, elements, TOL, N_CAP, CFG)
    report = qform_audit(witness)
    assert report.passed
    witness = neron_tate_witness(CURVE_389A1, [G1, G2], TOL, N_CAP, CFG)
    assert qform_audit(witness, coeff_range=3).passed


def test_neron_tate_audit_default_settings():
    if not FULL:
        return
    elements = [IDENTITY, P37, negate(CURVE_37A1, P37), scalar_mul(CURVE_37A1, 2, P37)]
    witness = neron_tate_witness(CURVE_37A1, elements, DEFAULT_HEIGHT_TOL, DEFAULT_N_CAP, DEFAULT_CFG)
    assert qform_audit(witness, coeff_range=5).passed


if __name__ == "__main__":
    print("=" * 50)
    print("HEIGHTS TEST")
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
