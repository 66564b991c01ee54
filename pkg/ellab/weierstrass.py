"""
Weierstrass curves y^2 + a1xy + a3y = x^3 + a2x^2 + a4x + a6 and the
chord-tangent group law.

Coefficients live in an exact domain: ``RationalField`` (``Fraction``
elements, always in lowest terms) or ``PrimeField(p)`` (``ModP`` elements).
No floating point is used anywhere in this module.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Optional, Tuple

from sympy.ntheory import sqrt_mod

from .errors import DomainError, PointNotOnCurve, SingularCurve

logger = logging.getLogger("weierstrass")


class ModP:
    """Integer modulo a prime p."""

    __slots__ = ("value", "p")

    def __init__(self, value: int, p: int):
        self.value = value % p
        self.p = p

    def _coerce(self, other) -> int:
        if isinstance(other, ModP):
            if other.p != self.p:
                raise DomainError(f"mixing F_{self.p} and F_{other.p}")
            return other.value
        if isinstance(other, Fraction):
            if other.denominator % self.p == 0:
                raise DomainError(f"{other} is not {self.p}-integral")
            return other.numerator * pow(other.denominator, -1, self.p)
        return int(other)

    def __add__(self, other):
        return ModP(self.value + self._coerce(other), self.p)

    __radd__ = __add__

    def __sub__(self, other):
        return ModP(self.value - self._coerce(other), self.p)

    def __rsub__(self, other):
        return ModP(self._coerce(other) - self.value, self.p)

    def __mul__(self, other):
        return ModP(self.value * self._coerce(other), self.p)

    __rmul__ = __mul__

    def __neg__(self):
        return ModP(-self.value, self.p)

    def inverse(self) -> "ModP":
        if self.value == 0:
            raise DomainError(f"0 has no inverse in F_{self.p}")
        return ModP(pow(self.value, -1, self.p), self.p)

    def __truediv__(self, other):
        return self * ModP(self._coerce(other), self.p).inverse()

    def __rtruediv__(self, other):
        return ModP(self._coerce(other), self.p) * self.inverse()

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.inverse() ** (-exponent)
        return ModP(pow(self.value, exponent, self.p), self.p)

    def __eq__(self, other):
        if isinstance(other, (ModP, int, Fraction)):
            try:
                return self.value == self._coerce(other) % self.p
            except DomainError:
                return False
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.p))

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.p})"


@dataclass(frozen=True)
class RationalField:
    characteristic = 0

    def __call__(self, value) -> Fraction:
        if isinstance(value, ModP):
            raise DomainError("cannot lift a residue to Q")
        return Fraction(value)

    def __str__(self):
        return "Q"


@dataclass(frozen=True)
class PrimeField:
    p: int

    @property
    def characteristic(self) -> int:
        return self.p

    def __call__(self, value) -> ModP:
        if isinstance(value, ModP):
            if value.p != self.p:
                raise DomainError(f"residue mod {value.p} is not in F_{self.p}")
            return value
        if isinstance(value, Fraction):
            if value.denominator % self.p == 0:
                raise DomainError(f"{value} is not {self.p}-integral")
            return ModP(value.numerator * pow(value.denominator, -1, self.p), self.p)
        return ModP(int(value), self.p)

    def elements(self) -> Iterator[ModP]:
        for v in range(self.p):
            yield ModP(v, self.p)

    def __str__(self):
        return f"F_{self.p}"


QQ = RationalField()


@dataclass(frozen=True)
class CurveInvariants:
    b2: object
    b4: object
    b6: object
    b8: object
    c4: object
    c6: object
    disc: object
    j: Optional[object]

    @property
    def singular(self) -> bool:
        return self.disc == 0


def invariants(a1, a2, a3, a4, a6) -> CurveInvariants:
    """
    Standard derived quantities of a Weierstrass equation.

    j is only defined when the discriminant is non-zero; a zero
    discriminant is reported through ``CurveInvariants.singular``.
    """
    b2 = a1 * a1 + 4 * a2
    b4 = 2 * a4 + a1 * a3
    b6 = a3 * a3 + 4 * a6
    b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
    c4 = b2 * b2 - 24 * b4
    c6 = -b2 * b2 * b2 + 36 * b2 * b4 - 216 * b6
    disc = -b2 * b2 * b8 - 8 * b4 * b4 * b4 - 27 * b6 * b6 + 9 * b2 * b4 * b6
    if disc == 0:
        j = None
    elif isinstance(disc, int):
        j = Fraction(c4 ** 3, disc)
    else:
        j = c4 * c4 * c4 / disc
    return CurveInvariants(b2, b4, b6, b8, c4, c6, disc, j)


@dataclass(frozen=True)
class RawEquation:
    """A Weierstrass equation that may be singular (used for reduction analysis)."""

    a1: object
    a2: object
    a3: object
    a4: object
    a6: object
    field: object = QQ

    @classmethod
    def over(cls, field, a1=0, a2=0, a3=0, a4=0, a6=0):
        return cls(field(a1), field(a2), field(a3), field(a4), field(a6), field)

    @property
    def coefficients(self) -> Tuple:
        return (self.a1, self.a2, self.a3, self.a4, self.a6)

    @cached_property
    def invariants(self) -> CurveInvariants:
        return invariants(*self.coefficients)

    @property
    def disc(self):
        return self.invariants.disc

    def is_integral(self) -> bool:
        return isinstance(self.field, RationalField) and all(a.denominator == 1 for a in self.coefficients)

    def integer_coefficients(self) -> Tuple[int, ...]:
        if not self.is_integral():
            raise DomainError(f"{self} does not have integral coefficients")
        return tuple(int(a) for a in self.coefficients)

    def evaluate(self, x, y):
        """Left minus right side of the equation at (x, y)."""
        return (y * y + self.a1 * x * y + self.a3 * y
                - x * x * x - self.a2 * x * x - self.a4 * x - self.a6)

    def key(self) -> str:
        coeffs = ",".join(str(int(a)) if not isinstance(a, Fraction) or a.denominator == 1 else str(a)
                          for a in self.coefficients)
        if isinstance(self.field, PrimeField):
            return f"{coeffs}@{self.field.p}"
        return coeffs

    def __str__(self):
        return f"[{self.key()}]"


@dataclass(frozen=True)
class WeierstrassCurve(RawEquation):
    """A nonsingular Weierstrass equation."""

    def __post_init__(self):
        if self.invariants.singular:
            raise SingularCurve(f"{self.key()} over {self.field} has zero discriminant")

    @classmethod
    def from_raw(cls, raw: RawEquation) -> "WeierstrassCurve":
        return cls(raw.a1, raw.a2, raw.a3, raw.a4, raw.a6, raw.field)


@dataclass(frozen=True)
class CurvePoint:
    """Affine point (x, y), or the identity O when both coordinates are None."""

    x: object = None
    y: object = None

    @property
    def is_identity(self) -> bool:
        return self.x is None

    def __str__(self):
        if self.is_identity:
            return "O"
        return f"({self.x}, {self.y})"


IDENTITY = CurvePoint()


def on_curve(curve: RawEquation, P: CurvePoint) -> bool:
    if P.is_identity:
        return True
    return curve.evaluate(P.x, P.y) == 0


def point(curve: RawEquation, x, y) -> CurvePoint:
    """Build an affine point, checking the curve equation exactly."""
    P = CurvePoint(curve.field(x), curve.field(y))
    if not on_curve(curve, P):
        raise PointNotOnCurve(f"({x}, {y}) is not on {curve}")
    return P


def negate(curve: RawEquation, P: CurvePoint) -> CurvePoint:
    if P.is_identity:
        return P
    return CurvePoint(P.x, -P.y - curve.a1 * P.x - curve.a3)


def add(curve: RawEquation, P: CurvePoint, Q: CurvePoint) -> CurvePoint:
    """Chord-tangent addition for the general a1..a6 equation."""
    if P.is_identity:
        return Q
    if Q.is_identity:
        return P
    a1, a2, a3, a4, a6 = curve.coefficients
    x1, y1, x2, y2 = P.x, P.y, Q.x, Q.y
    if x1 == x2:
        if y1 + y2 + a1 * x2 + a3 == 0:
            return IDENTITY
        denom = 2 * y1 + a1 * x1 + a3
        lam = (3 * x1 * x1 + 2 * a2 * x1 + a4 - a1 * y1) / denom
        nu = (-x1 * x1 * x1 + a4 * x1 + 2 * a6 - a3 * y1) / denom
    else:
        dx = x2 - x1
        lam = (y2 - y1) / dx
        nu = (y1 * x2 - y2 * x1) / dx
    x3 = lam * lam + a1 * lam - a2 - x1 - x2
    y3 = -(lam + a1) * x3 - nu - a3
    return CurvePoint(x3, y3)


def subtract(curve: RawEquation, P: CurvePoint, Q: CurvePoint) -> CurvePoint:
    return add(curve, P, negate(curve, Q))


def double(curve: RawEquation, P: CurvePoint) -> CurvePoint:
    return add(curve, P, P)


def scalar_mul(curve: RawEquation, m: int, P: CurvePoint) -> CurvePoint:
    """[m]P by double-and-add; [0]P = O and [-m]P = -[m]P."""
    if m < 0:
        return negate(curve, scalar_mul(curve, -m, P))
    result = IDENTITY
    addend = P
    while m:
        if m & 1:
            result = add(curve, result, addend)
        m >>= 1
        if m:
            addend = add(curve, addend, addend)
    return result


def transform(raw: RawEquation, u=1, r=0, s=0, t=0) -> RawEquation:
    """
    Coefficients after the change of variables x = u^2 x' + r, y = u^3 y' + s u^2 x' + t.
    """
    F = raw.field
    u, r, s, t = F(u), F(r), F(s), F(t)
    a1, a2, a3, a4, a6 = raw.coefficients
    b1 = (a1 + 2 * s) / u
    b2 = (a2 - s * a1 + 3 * r - s * s) / u ** 2
    b3 = (a3 + r * a1 + 2 * t) / u ** 3
    b4 = (a4 - s * a3 + 2 * r * a2 - (t + r * s) * a1 + 3 * r * r - 2 * s * t) / u ** 4
    b6 = (a6 + r * a4 + r * r * a2 + r * r * r - t * a3 - t * t - r * t * a1) / u ** 6
    return type(raw)(b1, b2, b3, b4, b6, F)


def transform_point(P: CurvePoint, field, u=1, r=0, s=0, t=0) -> CurvePoint:
    """Image of P under the same change of variables as ``transform``."""
    if P.is_identity:
        return P
    u, r, s, t = field(u), field(r), field(s), field(t)
    x_new = (P.x - r) / u ** 2
    y_new = (P.y - s * u ** 2 * x_new - t) / u ** 3
    return CurvePoint(x_new, y_new)


def reduce_mod(raw: RawEquation, p: int) -> RawEquation:
    """Reduce a p-integral equation over Q to an equation over F_p (possibly singular)."""
    if not isinstance(raw.field, RationalField):
        raise DomainError("only equations over Q can be reduced")
    F = PrimeField(p)
    return RawEquation(*(F(a) for a in raw.coefficients), F)


def short_model(curve: RawEquation) -> WeierstrassCurve:
    """Isomorphic short model y^2 = x^3 - 27c4 x - 54c6 (p >= 5)."""
    F = curve.field
    if isinstance(F, PrimeField) and F.p < 5:
        raise DomainError("short models need characteristic >= 5")
    inv = curve.invariants
    return WeierstrassCurve(F(0), F(0), F(0), -27 * inv.c4, -54 * inv.c6, F)


def quadratic_twist(curve: RawEquation, d) -> WeierstrassCurve:
    """Twist of the short model by d: y^2 = x^3 + A d^2 x + B d^3."""
    short = short_model(curve)
    F = curve.field
    d = F(d)
    return WeierstrassCurve(F(0), F(0), F(0), short.a4 * d * d, short.a6 * d * d * d, F)


def lift_x(curve: RawEquation, x) -> Optional[CurvePoint]:
    """A point with the given x-coordinate over F_p (odd p), or None if x does not lift."""
    F = curve.field
    if not isinstance(F, PrimeField) or F.p == 2:
        raise DomainError("lift_x needs an odd prime field")
    x = F(x)
    inv = curve.invariants
    rhs = 4 * x * x * x + inv.b2 * x * x + 2 * inv.b4 * x + inv.b6
    root = sqrt_mod(int(rhs), F.p)
    if root is None:
        return None
    y = (F(root) - curve.a1 * x - curve.a3) / 2
    return CurvePoint(x, y)
