"""
Utility module for reading curves, points and override files, and for
writing results as JSON or CSV.

Curves are written "a1,a2,a3,a4,a6" with an optional "@p" for a curve
over F_p; points are "x,y" with rational coordinates ("7/3") or "O", and
several points are separated by ";". High-precision numbers are written
as decimal strings so no digits are lost.
"""

import csv
import io
import json
import logging
import re
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Sequence

import mpmath
from mpmath.libmp import prec_to_dps
from sympy import isprime, primerange

from ellab.errors import ParseError
from ellab.reduction import OverrideSpec
from ellab.weierstrass import IDENTITY, QQ, CurvePoint, PrimeField, RawEquation, point

logger = logging.getLogger("format_utils")

_NUMBER = re.compile(r"^\s*[+-]?\d+(\s*/\s*\d+)?\s*$")


def _fraction(token: str, text: str, column: int) -> Fraction:
    if not _NUMBER.match(token):
        raise ParseError("expected an integer or a fraction n/d", text, column)
    try:
        return Fraction(token.replace(" ", ""))
    except ZeroDivisionError:
        raise ParseError("zero denominator", text, column)


def _split(text: str, sep: str) -> List[tuple]:
    """Pieces of text with the 1-based column where each starts."""
    pieces, column = [], 1
    for piece in text.split(sep):
        pieces.append((piece, column))
        column += len(piece) + len(sep)
    return pieces


def parse_curve(text: str) -> RawEquation:
    """
    Parse "a1,a2,a3,a4,a6" or "a1,a2,a3,a4,a6@p".

    Raises:
        ParseError: with the column of the offending token
    """
    if text is None or not text.strip():
        raise ParseError("empty curve string", text or "")
    body, field = text, QQ
    if "@" in text:
        body, _, prime = text.partition("@")
        column = len(body) + 2
        if not prime.strip().isdigit():
            raise ParseError("expected a prime after '@'", text, column)
        p = int(prime)
        if not isprime(p):
            raise ParseError(f"{p} is not prime", text, column)
        field = PrimeField(p)
    pieces = _split(body, ",")
    if len(pieces) != 5:
        raise ParseError(f"expected 5 coefficients a1,a2,a3,a4,a6, got {len(pieces)}", text,
                         pieces[min(len(pieces), 5) - 1][1] if pieces else 1)
    coeffs = [_fraction(token, text, column) for token, column in pieces]
    try:
        return RawEquation.over(field, *coeffs)
    except Exception as e:
        raise ParseError(f"coefficients do not define a curve over {field}: {e}", text)


def parse_point(curve: RawEquation, text: str) -> CurvePoint:
    """
    Parse "x,y" (rational coordinates) or "O" and check it lies on the curve.

    Raises:
        ParseError: malformed text
        PointNotOnCurve: well-formed point off the curve
    """
    stripped = text.strip()
    if stripped.upper() == "O":
        return IDENTITY
    pieces = _split(text, ",")
    if len(pieces) != 2:
        raise ParseError("a point is 'x,y' or 'O'", text, 1)
    x, y = (_fraction(token, text, column) for token, column in pieces)
    return point(curve, x, y)


def parse_points(curve: RawEquation, text: str) -> List[CurvePoint]:
    if text is None or not text.strip():
        raise ParseError("no points given", text or "")
    return [parse_point(curve, piece) for piece, _ in _split(text, ";") if piece.strip()]


def parse_primes(value: str) -> List[int]:
    """A single prime "p" or a range "lo..hi" (primes inside it)."""
    text = value.strip()
    if ".." in text:
        lo, _, hi = text.partition("..")
        if not (lo.strip().isdigit() and hi.strip().isdigit()):
            raise ParseError("a prime range is written lo..hi", value, 1)
        return list(primerange(int(lo), int(hi) + 1))
    if not text.isdigit():
        raise ParseError("expected a prime", value, 1)
    p = int(text)
    if not isprime(p):
        raise ParseError(f"{p} is not prime", value, 1)
    return [p]


def load_overrides(path: str) -> OverrideSpec:
    """
    Read the override file {"conductor": N?, "primes": {"2": {"type": ..., "exponent": ..., "ap": ...}}}.

    Raises:
        ParseError: unreadable file or malformed JSON, with line and column
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ParseError(f"cannot read override file: {e}", path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid override JSON: {e.msg}", path, e.colno, e.lineno)
    if not isinstance(data, dict):
        raise ParseError("the override file must hold a JSON object", path)
    logger.debug(f"loaded overrides from {path}")
    return OverrideSpec.from_dict(data)


def digits_for(bits: int) -> int:
    return prec_to_dps(bits)


def format_real(x, digits: int) -> str:
    return mpmath.nstr(mpmath.mpf(x), digits)


def format_complex(z, digits: int) -> List[str]:
    z = mpmath.mpc(z)
    return [format_real(z.real, digits), format_real(z.imag, digits)]


def format_error(e) -> str:
    return mpmath.nstr(mpmath.mpf(e), 6)


def format_point(P: CurvePoint) -> str:
    if P.is_identity:
        return "O"
    return f"{P.x},{P.y}"


def to_json(payload: Any) -> str:
    """Sorted-key JSON so identical results give identical bytes."""
    return json.dumps(payload, sort_keys=True, indent=2)


def to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else v for v in row])
    return buffer.getvalue()


def report_dict(**fields) -> Dict[str, Any]:
    """Drop None values so optional fields do not appear as null."""
    return {k: v for k, v in fields.items() if v is not None}
