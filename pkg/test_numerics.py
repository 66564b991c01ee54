#!/usr/bin/env python3
"""
Test script for the precision kernel.
Checks Gamma, the incomplete Gamma functions and the DFT against closed forms and identities.
"""

import random
import sys

import mpmath
from mpmath import mpc, mpf

from ellab.errors import DomainError, PoleError, PrecisionError
from ellab.numerics import (PrecisionConfig, _direct_transform, _radix2_transform, _roots_of_unity, dft, gamma,
                            idft, lower_incomplete_gamma, upper_incomplete_gamma,
                            upper_incomplete_gamma_with_error)

CFG = PrecisionConfig(bits=64, guard_bits=16)


def close(a, b, tol=None) -> bool:
    tol = tol if tol is not None else CFG.target()
    with mpmath.workprec(CFG.working_bits):
        scale = max(abs(mpc(b)), mpf(1))
        return abs(mpc(a) - mpc(b)) <= tol * scale


def test_precision_config():
    assert CFG.working_bits == 80
    assert CFG.target() == mpmath.ldexp(1, -48)
    assert CFG.raised(32).bits == 96
    try:
        PrecisionConfig(bits=32)
        assert False, "bits below 53 accepted"
    except PrecisionError:
        pass


def test_gamma_values():
    assert close(gamma(1, CFG), 1)
    assert close(gamma(5, CFG), 24)
    with mpmath.workprec(CFG.working_bits):
        assert close(gamma(mpf(1) / 2, CFG), mpmath.sqrt(mpmath.pi))


def test_gamma_poles():
    for s in (0, -3, mpc(-2, 1e-30)):
        try:
            gamma(s, CFG)
            assert False, f"no pole reported at {s}"
        except PoleError:
            pass


def test_gamma_reflection_and_recurrence():
    rng = random.Random(7)
    checked = 0
    while checked < 100:
        s = mpc(rng.uniform(-10, 10), rng.uniform(-3, 3))
        if abs(s) > 10 or abs(s.real - round(s.real)) < 0.1:
            continue
        with mpmath.workprec(CFG.working_bits):
            reflected = mpmath.pi / mpmath.sin(mpmath.pi * s)
            product = gamma(s, CFG) * gamma(1 - s, CFG)
            assert abs(product - reflected) <= CFG.target() * abs(reflected)
            assert close(gamma(s + 1, CFG), s * gamma(s, CFG))
        checked += 1


def test_upper_gamma_closed_forms():
    with mpmath.workprec(CFG.working_bits):
        for x in (mpf("0.5"), mpf(3), mpf(10)):
            assert close(upper_incomplete_gamma(1, x, CFG), mpmath.exp(-x))
        assert close(upper_incomplete_gamma(3, 1, CFG), 5 * mpmath.exp(-1))


def test_upper_gamma_small_x_limit():
    with mpmath.workprec(CFG.working_bits):
        x = mpmath.ldexp(mpf(1), -CFG.bits // 2)
        s = mpf("2.5")
        assert close(upper_incomplete_gamma(s, x, CFG), mpmath.gamma(s))


def test_upper_plus_lower_is_gamma():
    rng = random.Random(11)
    for _ in range(100):
        s = mpc(rng.uniform(0.3, 6), rng.uniform(-4, 4))
        x = mpf(rng.choice([rng.uniform(0.05, 2), rng.uniform(8, 25)]))
        with mpmath.workprec(CFG.working_bits):
            total = upper_incomplete_gamma(s, x, CFG) + lower_incomplete_gamma(s, x, CFG)
            full = mpmath.gamma(s)
            assert abs(total - full) <= 64 * CFG.target() * max(abs(full), 1)


def test_upper_gamma_error_estimate():
    value, error = upper_incomplete_gamma_with_error(mpc(2, 1), 1, CFG)
    with mpmath.workprec(CFG.working_bits + 40):
        reference = mpmath.gammainc(mpc(2, 1), 1)
        assert abs(value - reference) <= 16 * max(error, CFG.epsilon())
    try:
        upper_incomplete_gamma(2, 0, CFG)
        assert False, "x = 0 accepted"
    except DomainError:
        pass


def test_dft_constant_and_tone():
    M = 16
    out = dft([mpc(3, 1)] * M, CFG)
    assert close(out[0], M * mpc(3, 1))
    assert all(close(v, 0) for v in out[1:])
    with mpmath.workprec(CFG.working_bits):
        tone = [mpmath.expjpi(mpf(2 * j) / M) for j in range(M)]
    # forward transform uses e^(-2 pi i jk/M), so the tone lands at index 1
    out = dft(tone, CFG)
    assert close(out[1], M)
    assert all(close(v, 0) for k, v in enumerate(out) if k != 1)


def test_dft_round_trip_linearity_parseval():
    rng = random.Random(3)
    M = 12
    u = [mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(M)]
    v = [mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(M)]
    back = idft(dft(u, CFG), CFG)
    assert all(close(a, b) for a, b in zip(back, u))
    U, V = dft(u, CFG), dft(v, CFG)
    W = dft([2 * a - b for a, b in zip(u, v)], CFG)
    assert all(close(w, 2 * a - b) for w, a, b in zip(W, U, V))
    with mpmath.workprec(CFG.working_bits):
        energy = mpmath.fsum(abs(a) ** 2 for a in u)
        spectral = mpmath.fsum(abs(a) ** 2 for a in U) / M
    assert close(energy, spectral)


def test_radix2_matches_direct():
    rng = random.Random(5)
    M = 32
    values = [mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(M)]
    with mpmath.workprec(CFG.working_bits):
        fast = _radix2_transform(values, _roots_of_unity(M, -1), 1)
        slow = _direct_transform(values, -1)
    assert all(close(a, b) for a, b in zip(fast, slow))


if __name__ == "__main__":
    print("=" * 50)
    print("NUMERICS TEST")
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
