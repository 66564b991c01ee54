"""
Reduction types at bad primes and the conductor.

For p >= 5 the curve is first made p-minimal, reduced, and the singular
point of the reduction is moved to the origin; the tangent cone
y^2 + a1 xy - a2 x^2 then tells node from cusp and split from non-split.
At p = 2 and p = 3 only good versus bad is decided here; a bad prime there
must be described by the user (type, exponent, a_p).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Optional

from sympy import Poly, factorint, legendre_symbol, multiplicity, symbols

from .constants import DEFAULT_SEED, EXHAUSTIVE_THRESHOLD, SINGULAR_SEARCH_LIMIT
from .errors import DomainError, MissingOverride, NeedsOverride, ParseError, UnsupportedPrime
from .pointcount import count_points
from .weierstrass import CurvePoint, PrimeField, RawEquation, WeierstrassCurve, reduce_mod, transform

logger = logging.getLogger("reduction")

_X = symbols("x")


class ReductionKind(Enum):
    GOOD = "good"
    SPLIT = "split"
    NONSPLIT = "nonsplit"
    ADDITIVE = "additive"


_KIND_ALIASES = {
    "good": ReductionKind.GOOD,
    "split": ReductionKind.SPLIT,
    "split_multiplicative": ReductionKind.SPLIT,
    "nonsplit": ReductionKind.NONSPLIT,
    "non-split": ReductionKind.NONSPLIT,
    "nonsplit_multiplicative": ReductionKind.NONSPLIT,
    "additive": ReductionKind.ADDITIVE,
}

# a_p and conductor exponent (p >= 5) for each bad type
_BAD_AP = {ReductionKind.SPLIT: 1, ReductionKind.NONSPLIT: -1, ReductionKind.ADDITIVE: 0}
_EXPONENT = {ReductionKind.GOOD: 0, ReductionKind.SPLIT: 1, ReductionKind.NONSPLIT: 1, ReductionKind.ADDITIVE: 2}


@dataclass(frozen=True)
class ReductionType:
    kind: ReductionKind
    ap: int

    @classmethod
    def good(cls, ap: int) -> "ReductionType":
        return cls(ReductionKind.GOOD, ap)

    @classmethod
    def bad(cls, kind: ReductionKind) -> "ReductionType":
        return cls(kind, _BAD_AP[kind])

    @property
    def is_good(self) -> bool:
        return self.kind is ReductionKind.GOOD

    @property
    def exponent(self) -> int:
        """Conductor exponent without wild part, valid for p >= 5."""
        return _EXPONENT[self.kind]

    @property
    def label(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class PrimeOverride:
    type: ReductionKind
    exponent: int
    ap: int

    @classmethod
    def from_dict(cls, p: int, data: Mapping) -> "PrimeOverride":
        try:
            kind = _KIND_ALIASES[str(data["type"]).strip().lower()]
        except KeyError:
            raise ParseError(f"override for p={p} needs a type out of {sorted(_KIND_ALIASES)}", str(data))
        exponent = int(data.get("exponent", _EXPONENT[kind]))
        if "ap" in data:
            ap = int(data["ap"])
        elif kind is ReductionKind.GOOD:
            raise ParseError(f"override for p={p} of type good needs an ap value", str(data))
        else:
            ap = _BAD_AP[kind]
        if exponent < 0:
            raise ParseError(f"negative conductor exponent for p={p}", str(data))
        return cls(kind, exponent, ap)

    def reduction(self) -> ReductionType:
        return ReductionType(self.type, self.ap)


@dataclass(frozen=True)
class OverrideSpec:
    conductor: Optional[int] = None
    primes: Mapping[int, PrimeOverride] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping) -> "OverrideSpec":
        conductor = data.get("conductor")
        if conductor is not None:
            conductor = int(conductor)
            if conductor < 1:
                raise ParseError("conductor override must be a positive integer", str(data.get("conductor")))
        primes = {}
        for key, entry in (data.get("primes") or {}).items():
            try:
                p = int(key)
            except ValueError:
                raise ParseError("override prime keys must be integers", str(key))
            primes[p] = PrimeOverride.from_dict(p, entry)
        return cls(conductor, primes)


@dataclass(frozen=True)
class ConductorData:
    N: int
    exponents: Dict[int, int]
    overrides: FrozenSet[int]
    types: Dict[int, ReductionType]

    @property
    def bad_ap(self) -> Dict[int, int]:
        return {p: self.types[p].ap for p in self.exponents}


def valuation(n, p: int) -> float:
    """p-adic valuation of a non-zero integer; inf for 0."""
    n = int(n)
    if n == 0:
        return float("inf")
    return multiplicity(p, n)


def bad_primes(curve: RawEquation) -> List[int]:
    """Primes dividing the discriminant of the given integral model."""
    curve.integer_coefficients()
    disc = int(curve.disc)
    return sorted(factorint(abs(disc)))


def minimal_at_p(curve: RawEquation, p: int) -> WeierstrassCurve:
    """
    A model of the curve with val_p(c4) < 4 or val_p(c6) < 6, for p >= 5.

    Each round translates mod p^6 so that p^i divides a_i, then rescales
    by u = p, which lowers val_p(disc) by 12.

    Raises:
        UnsupportedPrime: p is 2 or 3
    """
    if p < 5:
        raise UnsupportedPrime(f"minimal models are only computed for p >= 5, got {p}")
    model = curve
    curve.integer_coefficients()
    rounds = 0
    while True:
        inv = model.invariants
        if valuation(inv.c4, p) < 4 or valuation(inv.c6, p) < 6:
            break
        modulus = p ** 6
        half, third = pow(2, -1, modulus), pow(3, -1, modulus)
        a1, a2, a3, _, _ = model.integer_coefficients()
        s = (-a1 * half) % modulus
        r = (-(a2 - s * a1 - s * s) * third) % modulus
        t = (-(a3 + r * a1) * half) % modulus
        model = transform(transform(model, r=r, s=s, t=t), u=p)
        if not model.is_integral():
            raise DomainError(f"rescaling {curve} at p={p} left non-integral coefficients")
        rounds += 1
    if rounds:
        logger.debug(f"{curve} at p={p}: minimal model {model} after {rounds} rescaling(s)")
    return WeierstrassCurve.from_raw(model)


def singular_point(reduced: RawEquation) -> CurvePoint:
    """
    The singular point of a singular equation over F_p, p odd.

    x0 is the double root of 4x^3 + b2x^2 + 2b4x + b6, found by search up
    to SINGULAR_SEARCH_LIMIT and from gcd(g, g') above it.
    """
    F = reduced.field
    if not isinstance(F, PrimeField) or F.p == 2:
        raise UnsupportedPrime("singular points are located for odd p only")
    if reduced.disc != 0:
        raise DomainError(f"{reduced} is nonsingular")
    p = F.p
    inv = reduced.invariants
    b2, b4, b6 = int(inv.b2), int(inv.b4), int(inv.b6)
    x0 = None
    if p <= SINGULAR_SEARCH_LIMIT:
        for x in range(p):
            g = ((4 * x + b2) * x + 2 * b4) * x + b6
            dg = (12 * x + 2 * b2) * x + 2 * b4
            if g % p == 0 and dg % p == 0:
                x0 = x
                break
    else:
        g = Poly([4, b2, 2 * b4, b6], _X, modulus=p)
        common = g.gcd(g.diff(_X))
        coeffs = [int(c) % p for c in common.all_coeffs()]
        if common.degree() == 1:
            x0 = -coeffs[1] * pow(coeffs[0], -1, p) % p
        elif common.degree() == 2:
            x0 = -coeffs[1] * pow(2 * coeffs[0], -1, p) % p
    if x0 is None:
        raise DomainError(f"no singular point found on {reduced}")
    x = F(x0)
    y = (-reduced.a1 * x - reduced.a3) / 2
    return CurvePoint(x, y)


def _classify_singular(reduced: RawEquation) -> ReductionType:
    p = reduced.field.p
    node = singular_point(reduced)
    moved = transform(reduced, r=node.x, t=node.y)
    # tangent cone at the origin: y^2 + a1 xy - a2 x^2
    cone_disc = int(moved.a1 * moved.a1 + 4 * moved.a2)
    if cone_disc == 0:
        return ReductionType.bad(ReductionKind.ADDITIVE)
    if legendre_symbol(cone_disc, p) == 1:
        return ReductionType.bad(ReductionKind.SPLIT)
    return ReductionType.bad(ReductionKind.NONSPLIT)


def classify(curve: RawEquation, p: int, override: Optional[PrimeOverride] = None,
             threshold: int = EXHAUSTIVE_THRESHOLD, seed: int = DEFAULT_SEED) -> ReductionType:
    """
    Reduction type of an integral curve over Q at the prime p.

    Args:
        curve: integral model over Q
        p: prime
        override: user classification, used verbatim when given

    Returns:
        ReductionType: good with a_p from point counting, or the bad type with its a_p

    Raises:
        NeedsOverride: bad reduction at p = 2 or 3 with no override
    """
    if override is not None:
        return override.reduction()
    if p < 5:
        reduced = reduce_mod(curve, p)
        if reduced.disc != 0:
            return ReductionType.good(count_points(reduced, threshold=threshold, seed=seed).a)
        raise NeedsOverride(p)
    model = minimal_at_p(curve, p)
    reduced = reduce_mod(model, p)
    if reduced.disc != 0:
        return ReductionType.good(count_points(reduced, threshold=threshold, seed=seed).a)
    result = _classify_singular(reduced)
    logger.debug(f"{curve} at p={p}: {result.label}")
    return result


def conductor(curve: RawEquation, overrides: Optional[OverrideSpec] = None,
              threshold: int = EXHAUSTIVE_THRESHOLD, seed: int = DEFAULT_SEED) -> ConductorData:
    """
    Conductor N = prod p^f_p with f_p in {0, 1, 2} for p >= 5 and user-supplied f_p at 2 and 3.

    A conductor value in the overrides replaces the product; its prime
    factors then still need a classification (computed or overridden).
    A bad prime 2 or 3 whose exponent in that conductor is at least 2 is
    additive (a_p = 0) and needs no per-prime entry. Exponent 1 leaves
    split against nonsplit open, so it still does.

    Raises:
        MissingOverride: bad primes 2 or 3 lack an override
    """
    spec = overrides or OverrideSpec()
    candidates = set(bad_primes(curve)) | set(spec.primes)
    given = factorint(spec.conductor) if spec.conductor is not None else {}
    candidates |= set(given)
    prime_overrides = dict(spec.primes)
    missing = []
    for p in sorted(candidates):
        if p >= 5 or p in spec.primes or reduce_mod(curve, p).disc != 0:
            continue
        if given.get(p, 0) >= 2:
            prime_overrides[p] = PrimeOverride(ReductionKind.ADDITIVE, given[p], _BAD_AP[ReductionKind.ADDITIVE])
        else:
            missing.append(p)
    if missing:
        raise MissingOverride(missing)

    types: Dict[int, ReductionType] = {}
    exponents: Dict[int, int] = {}
    for p in sorted(candidates):
        override = prime_overrides.get(p)
        reduction = classify(curve, p, override, threshold, seed)
        types[p] = reduction
        exponent = override.exponent if override is not None else reduction.exponent
        if exponent:
            exponents[p] = exponent

    if spec.conductor is not None:
        exponents = dict(given)
        user_primes = frozenset(exponents)
    else:
        user_primes = frozenset(p for p in spec.primes if p in candidates)

    N = 1
    for p, e in exponents.items():
        N *= p ** e
    logger.info(f"{curve}: conductor {N} with exponents {exponents}")
    return ConductorData(N, exponents, user_primes, types)


def local_ap(curve: RawEquation, p: int, data: ConductorData,
             threshold: int = EXHAUSTIVE_THRESHOLD, seed: int = DEFAULT_SEED) -> int:
    """a_p for any prime p, using the classification recorded in ``data`` when there is one."""
    known = data.types.get(p)
    if known is not None:
        return known.ap
    reduced = reduce_mod(curve, p)
    if reduced.disc == 0:
        if p < 5:
            raise NeedsOverride(p)
        return classify(curve, p, threshold=threshold, seed=seed).ap
    return count_points(reduced, threshold=threshold, seed=seed).a
