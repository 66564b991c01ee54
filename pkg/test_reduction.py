#!/usr/bin/env python3
"""
Test script for the reduction module.
Minimal models, singular points, reduction types and the conductor with and without overrides.
"""

import sys
from fractions import Fraction

from sympy import nextprime

from ellab.constants import SINGULAR_SEARCH_LIMIT
from ellab.errors import MissingOverride, NeedsOverride, ParseError, UnsupportedPrime
from ellab.reduction import (OverrideSpec, PrimeOverride, ReductionKind, _classify_singular, bad_primes, classify,
                             conductor, local_ap, minimal_at_p, singular_point, valuation)
from ellab.weierstrass import QQ, PrimeField, RawEquation, WeierstrassCurve, transform

CURVE_11A1 = WeierstrassCurve.over(QQ, 0, -1, 1, -10, -20)
CURVE_37A1 = WeierstrassCurve.over(QQ, 0, 0, 1, -1, 0)
# cusp at 5, bad at 2 and 3
CURVE_CUSP_5 = WeierstrassCurve.over(QQ, 0, 0, 0, 0, 5)


def test_valuation_and_bad_primes():
    assert valuation(250, 5) == 3
    assert valuation(0, 7) == float("inf")
    assert bad_primes(CURVE_11A1) == [11]
    assert bad_primes(CURVE_37A1) == [37]
    assert bad_primes(CURVE_CUSP_5) == [2, 3, 5]


def test_minimal_model():
    assert minimal_at_p(CURVE_11A1, 11) == CURVE_11A1
    base = WeierstrassCurve.over(QQ, 0, 0, 0, 1, 0)
    scaled = transform(base, u=Fraction(1, 5))
    assert scaled.a4 == 625
    minimal = minimal_at_p(scaled, 5)
    assert valuation(scaled.disc, 5) - valuation(minimal.disc, 5) == 12
    inv = minimal.invariants
    assert valuation(inv.c4, 5) < 4 or valuation(inv.c6, 5) < 6
    try:
        minimal_at_p(CURVE_11A1, 3)
        assert False, "p = 3 accepted"
    except UnsupportedPrime:
        pass


def test_singular_points():
    node = RawEquation.over(PrimeField(7), 0, 0, 0, -3, 2)
    P = singular_point(node)
    assert P.x == 1 and P.y == 0
    p = nextprime(SINGULAR_SEARCH_LIMIT)
    large = RawEquation.over(PrimeField(p), 0, 0, 0, -3, 2)
    assert singular_point(large).x == 1


def test_node_split_and_nonsplit():
    # tangent slopes of y^2 = (x - 1)^2 (x + 2) at (1, 0) are +-sqrt(3)
    assert _classify_singular(RawEquation.over(PrimeField(11), 0, 0, 0, -3, 2)).kind is ReductionKind.SPLIT
    assert _classify_singular(RawEquation.over(PrimeField(7), 0, 0, 0, -3, 2)).kind is ReductionKind.NONSPLIT
    assert _classify_singular(RawEquation.over(PrimeField(7), 0, 0, 0, 0, 0)).kind is ReductionKind.ADDITIVE


def test_classify_known_curves():
    t11 = classify(CURVE_11A1, 11)
    assert t11.kind is ReductionKind.SPLIT and t11.ap == 1 and t11.exponent == 1
    t37 = classify(CURVE_37A1, 37)
    assert t37.kind is ReductionKind.NONSPLIT and t37.ap == -1
    good = classify(CURVE_11A1, 13)
    assert good.is_good and good.ap == 4
    assert classify(CURVE_11A1, 2).ap == -2
    additive = classify(CURVE_CUSP_5, 5)
    assert additive.kind is ReductionKind.ADDITIVE and additive.ap == 0 and additive.exponent == 2


def test_small_prime_overrides():
    try:
        classify(CURVE_CUSP_5, 2)
        assert False, "bad reduction at 2 classified without override"
    except NeedsOverride as e:
        assert e.p == 2
    override = PrimeOverride(ReductionKind.ADDITIVE, 5, 0)
    assert classify(CURVE_CUSP_5, 2, override).kind is ReductionKind.ADDITIVE


def test_override_parsing():
    spec = OverrideSpec.from_dict({
        "conductor": 5400,
        "primes": {"2": {"type": "additive", "exponent": 5, "ap": 0},
                   "3": {"type": "split_multiplicative"}},
    })
    assert spec.conductor == 5400
    assert spec.primes[2] == PrimeOverride(ReductionKind.ADDITIVE, 5, 0)
    assert spec.primes[3] == PrimeOverride(ReductionKind.SPLIT, 1, 1)
    for bad in ({"primes": {"2": {"type": "tame"}}}, {"primes": {"2": {"type": "good"}}},
                {"primes": {"two": {"type": "additive"}}}, {"conductor": 0}):
        try:
            OverrideSpec.from_dict(bad)
            assert False, f"{bad} accepted"
        except ParseError:
            pass


def test_conductor():
    data = conductor(CURVE_11A1)
    assert data.N == 11 and data.exponents == {11: 1} and not data.overrides
    assert data.bad_ap == {11: 1}
    assert conductor(CURVE_37A1).N == 37
    try:
        conductor(CURVE_CUSP_5)
        assert False, "missing overrides not reported"
    except MissingOverride as e:
        assert e.primes == [2, 3]
    spec = OverrideSpec.from_dict({"primes": {"2": {"type": "additive", "exponent": 3},
                                              "3": {"type": "additive", "exponent": 3}}})
    data = conductor(CURVE_CUSP_5, spec)
    assert data.exponents == {2: 3, 3: 3, 5: 2}
    assert data.N == 8 * 27 * 25
    assert data.overrides == frozenset({2, 3})


def test_conductor_value_override():
    data = conductor(CURVE_11A1, OverrideSpec(conductor=11))
    assert data.N == 11 and data.overrides == frozenset({11})
    assert data.types[11].ap == 1
    # the conductor alone settles additive reduction at 2 and 3
    data = conductor(CURVE_CUSP_5, OverrideSpec(conductor=5400))
    assert data.N == 5400 and data.exponents == {2: 3, 3: 3, 5: 2}
    assert data.types[2].kind is ReductionKind.ADDITIVE and data.types[3].kind is ReductionKind.ADDITIVE
    assert data.bad_ap[2] == 0 and data.bad_ap[3] == 0
    try:
        conductor(CURVE_CUSP_5, OverrideSpec(conductor=2 * 27 * 25))
        assert False, "exponent 1 at 2 accepted without a reduction type"
    except MissingOverride as e:
        assert e.primes == [2]


def test_local_ap():
    data = conductor(CURVE_11A1)
    assert local_ap(CURVE_11A1, 11, data) == 1
    assert local_ap(CURVE_11A1, 13, data) == 4
    assert local_ap(CURVE_11A1, 31, data) == 7


if __name__ == "__main__":
    print("=" * 50)
    print("REDUCTION TEST")
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
