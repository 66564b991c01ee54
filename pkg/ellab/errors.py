"""
Errors raised across the lab.

Every error carries the process exit code the command line reports for it:
1 for a violated mathematical assertion, 2 for usage, parse and
precondition errors, 3 for precision and convergence failures.
"""

from typing import Iterable, List, Optional

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_PRECISION = 3


class LabError(Exception):
    """Base class for every error the lab raises on purpose."""

    exit_code = EXIT_USAGE


# numerics

class PoleError(LabError):
    """Evaluation point sits on a pole (Gamma at a non-positive integer, the disk map at z=1)."""


class ConvergenceError(LabError):
    exit_code = EXIT_PRECISION


class PrecisionError(LabError):
    """Invalid precision configuration."""


# weierstrass

class DomainError(LabError):
    """A required inverse does not exist in the coefficient domain."""


class SingularCurve(LabError):
    """Tried to build a curve object from a singular equation."""


# pointcount

class SingularReduction(LabError):
    pass


class AmbiguousOrder(LabError):
    exit_code = EXIT_VIOLATION


class HasseViolation(LabError):
    exit_code = EXIT_VIOLATION


class PrecondError(LabError):
    pass


# reduction

class UnsupportedPrime(LabError):
    """Minimal models and fine classification are only computed for p >= 5."""


class NeedsOverride(LabError):
    def __init__(self, p: int, message: Optional[str] = None):
        self.p = p
        super().__init__(message or f"bad reduction at p={p} needs a user-supplied classification")


class MissingOverride(LabError):
    def __init__(self, primes: Iterable[int]):
        self.primes: List[int] = sorted(primes)
        joined = ", ".join(str(p) for p in self.primes)
        super().__init__(f"missing conductor override for bad prime(s): {joined}")


# lfunction

class RegionError(LabError):
    pass


class NeedMoreCoeffs(LabError):
    def __init__(self, n_required: int, n_cached: int):
        self.n_required = n_required
        self.n_cached = n_cached
        super().__init__(f"need a_n up to n={n_required}, only {n_cached} cached")


class IndeterminateSign(LabError):
    exit_code = EXIT_PRECISION


# licoeff

class AliasingBudgetExceeded(LabError):
    exit_code = EXIT_PRECISION


class CentralValueTooSmall(LabError):
    exit_code = EXIT_PRECISION


# heights

class IdentityPoint(LabError):
    pass


class CoordinateBlowup(LabError):
    exit_code = EXIT_PRECISION


class AuditFailure(LabError):
    exit_code = EXIT_VIOLATION

    def __init__(self, violations):
        self.violations = list(violations)
        first = self.violations[0] if self.violations else "unknown"
        super().__init__(f"quadratic form audit failed ({len(self.violations)} violation(s)), first: {first}")


# cli

class ParseError(LabError):
    def __init__(self, message: str, text: str = "", column: Optional[int] = None, line: int = 1):
        self.text = text
        self.column = column
        self.line = line
        where = f" at line {line}, column {column}" if column is not None else ""
        super().__init__(f"{message}{where}: {text!r}" if text else f"{message}{where}")


class PointNotOnCurve(LabError):
    pass
