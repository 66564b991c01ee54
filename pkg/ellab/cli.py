"""
Command-line surface of the lab.

Every subcommand writes its result to stdout (JSON with sorted keys, or
CSV) and logs to stderr. Exit codes: 0 success, 1 a mathematical check
failed, 2 usage or input error, 3 precision or convergence failure.
"""

import argparse
import logging
import sys
from dataclasses import dataclass
from typing import List, Optional, TextIO

import mpmath

from utils.format_utils import (digits_for, format_complex, format_error, format_point, format_real,
                                load_overrides, parse_curve, parse_points, parse_primes, report_dict, to_csv,
                                to_json)
from utils.worker_utils import resolve_workers

from .constants import (CACHE_DIR, DEFAULT_BITS, DEFAULT_GUARD_BITS, DEFAULT_HEIGHT_TOL, DEFAULT_N_CAP,
                        DEFAULT_N_MAX, DEFAULT_RADIUS, DEFAULT_SEED, DEFAULT_WORKERS, EXHAUSTIVE_THRESHOLD,
                        LOG_FORMAT, LOG_LEVEL)
from .errors import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, AuditFailure, LabError, ParseError, PrecondError
from .lab_service import LabService, ServiceSettings
from .licoeff import growth_diagnostics
from .numerics import PrecisionConfig
from .pointcount import FrobeniusForm
from .reduction import OverrideSpec
from .weierstrass import PrimeField, WeierstrassCurve

logger = logging.getLogger("cli")


@dataclass(frozen=True)
class RunConfig:
    precision_bits: int = DEFAULT_BITS
    guard_bits: int = DEFAULT_GUARD_BITS
    n_max: int = DEFAULT_N_MAX
    radius: float = DEFAULT_RADIUS
    dft_size: Optional[int] = None
    exhaustive_threshold: int = EXHAUSTIVE_THRESHOLD
    tol: float = DEFAULT_HEIGHT_TOL
    n_cap: int = DEFAULT_N_CAP
    cache_dir: str = CACHE_DIR
    use_cache: bool = True
    conductor_override_path: Optional[str] = None
    workers: int = 1
    seed: int = DEFAULT_SEED
    format: Optional[str] = None

    def __post_init__(self):
        if self.n_max < 1:
            raise PrecondError(f"--nmax must be positive, got {self.n_max}")
        if not 0 < self.radius < 1:
            raise PrecondError(f"--radius must lie in (0, 1), got {self.radius}")
        if self.dft_size is not None and (self.dft_size < 4 * self.n_max or self.dft_size & (self.dft_size - 1)):
            raise PrecondError(f"--dft-size must be a power of two of at least 4 * nmax, got {self.dft_size}")
        if self.tol <= 0:
            raise PrecondError(f"--tol must be positive, got {self.tol}")
        if self.exhaustive_threshold < 2:
            raise PrecondError(f"--exhaustive-threshold must be at least 2, got {self.exhaustive_threshold}")
        if self.n_cap < 1:
            raise PrecondError(f"--n-cap must be positive, got {self.n_cap}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        return cls(
            precision_bits=args.bits,
            guard_bits=args.guard_bits,
            n_max=args.nmax,
            radius=args.radius,
            dft_size=args.dft_size,
            exhaustive_threshold=args.exhaustive_threshold,
            tol=args.tol,
            n_cap=args.n_cap,
            cache_dir=args.cache_dir,
            use_cache=not args.no_cache,
            conductor_override_path=args.conductor_override,
            workers=resolve_workers(args.workers),
            seed=args.seed,
            format=args.format,
        )

    @property
    def precision(self) -> PrecisionConfig:
        return PrecisionConfig(self.precision_bits, self.guard_bits)

    def settings(self) -> ServiceSettings:
        return ServiceSettings(self.cache_dir, self.use_cache, self.workers, self.exhaustive_threshold,
                               self.seed, self.precision)

    def overrides(self) -> Optional[OverrideSpec]:
        if self.conductor_override_path is None:
            return None
        return load_overrides(self.conductor_override_path)

    def output_format(self, default: str) -> str:
        return self.format or default


def parse_complex(text: str, cfg: PrecisionConfig) -> mpmath.mpc:
    """'re' or 're,im' at the working precision."""
    pieces = [piece.strip() for piece in text.split(",")]
    if not 1 <= len(pieces) <= 2:
        raise ParseError("a complex number is written 're' or 're,im'", text, 1)
    with mpmath.workprec(cfg.working_bits):
        try:
            parts = [mpmath.mpf(piece) for piece in pieces]
        except ValueError:
            raise ParseError("not a number", text, 1)
        return mpmath.mpc(*parts)


def _curve_over_q(text: str) -> WeierstrassCurve:
    curve = parse_curve(text)
    if isinstance(curve.field, PrimeField):
        raise ParseError("this command needs a curve over Q (drop the '@p')", text, text.index("@") + 1)
    return WeierstrassCurve.from_raw(curve)


def _value_payload(value, cfg: PrecisionConfig, **extra) -> dict:
    digits = digits_for(cfg.bits)
    return report_dict(s=format_complex(value.s, digits), value=format_complex(value.value, digits),
                       error=format_error(value.error_bound), **extra)


def cmd_count(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    if not args.curve:
        if not args.p_range:
            raise ParseError("count needs --curve, or --p-range for a sweep over all short models", "")
        rows = service.hasse_sweep(parse_primes(args.p_range))
        if config.output_format("csv") == "csv":
            out.write(to_csv(["p", "curves", "violations", "max_trace"],
                             [(r.p, r.curves, r.violations, r.max_trace) for r in rows]))
        else:
            out.write(to_json([{"p": r.p, "curves": r.curves, "violations": r.violations,
                                "max_trace": r.max_trace} for r in rows]) + "\n")
        return EXIT_VIOLATION if any(r.violations for r in rows) else EXIT_OK
    curve = parse_curve(args.curve)
    if isinstance(curve.field, PrimeField):
        primes = [curve.field.p]
    elif args.p_range:
        primes = parse_primes(args.p_range)
    elif args.p:
        primes = parse_primes(args.p)
    else:
        raise ParseError("count needs --p or --p-range for a curve over Q", args.curve)
    rows = service.count_table(curve, primes)
    if config.output_format("csv") == "csv":
        out.write(to_csv(["p", "ap", "type"], [(r.p, r.ap, r.type) for r in rows]))
    else:
        out.write(to_json([report_dict(p=r.p, ap=r.ap, type=r.type) for r in rows]) + "\n")
    return EXIT_OK


def cmd_classify(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    curve = _curve_over_q(args.curve)
    primes = parse_primes(args.p_range or args.p) if (args.p_range or args.p) else None
    types = service.classify_primes(curve, primes, config.overrides())
    rows = [(p, t.ap, t.label) for p, t in sorted(types.items())]
    if config.output_format("csv") == "csv":
        out.write(to_csv(["p", "ap", "type"], rows))
    else:
        out.write(to_json([{"p": p, "ap": ap, "type": label} for p, ap, label in rows]) + "\n")
    return EXIT_OK


def cmd_conductor(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    curve = _curve_over_q(args.curve)
    data = service.conductor(curve, config.overrides())
    payload = {
        "curve": curve.key(),
        "N": data.N,
        "exponents": {str(p): e for p, e in data.exponents.items()},
        "overrides": sorted(data.overrides),
        "types": {str(p): t.label for p, t in data.types.items()},
    }
    out.write(to_json(payload) + "\n")
    return EXIT_OK


def cmd_coeffs(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    curve = _curve_over_q(args.curve)
    coeffs = service.coefficients(curve, config.n_max, config.overrides())
    if config.output_format("csv") == "csv":
        out.write(to_csv(["n", "an"], enumerate(coeffs, start=1)))
    else:
        out.write(to_json({"curve": curve.key(), "an": coeffs}) + "\n")
    return EXIT_OK


def cmd_lvalue(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    curve = _curve_over_q(args.curve)
    cfg = config.precision
    value = service.lvalue(curve, parse_complex(args.s, cfg), config.overrides(), cfg=cfg)
    out.write(to_json(_value_payload(value, cfg)) + "\n")
    return EXIT_OK


def cmd_xi(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    curve = _curve_over_q(args.curve)
    cfg = config.precision
    overrides = config.overrides()
    value = service.xi_value(curve, parse_complex(args.s, cfg), overrides, cfg=cfg)
    w = service.root_number(curve, overrides, cfg=cfg)
    out.write(to_json(_value_payload(value, cfg, w=w)) + "\n")
    return EXIT_OK


def cmd_li(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    curve = _curve_over_q(args.curve)
    cfg = config.precision
    report = service.li_report(curve, config.n_max, config.radius, config.dft_size, config.overrides(), cfg=cfg)
    digits = digits_for(report.bits)
    if config.output_format("json") == "csv":
        rows = [(n, format_real(v, digits), format_error(e))
                for n, (v, e) in enumerate(zip(report.lambdas, report.error_estimates), start=1)]
        out.write(to_csv(["n", "lambda", "error"], rows))
    else:
        summary = growth_diagnostics(report)
        fit = report.growth_fit
        growth = report_dict(
            slope=fit.slope if fit else None,
            intercept=fit.intercept if fit else None,
            residual=fit.residual if fit else None,
            normalized=summary.normalized,
            differences=summary.differences,
            sign_changes=summary.sign_changes,
        )
        payload = {
            "curve": report.curve,
            "n_max": report.n_max,
            "lambdas": [format_real(v, digits) for v in report.lambdas],
            "errors": [format_error(e) for e in report.error_estimates],
            "all_nonnegative": report.all_nonnegative,
            "growth": growth,
            "radius": report.radius,
            "M": report.M,
            "bits": report.bits,
        }
        out.write(to_json(payload) + "\n")
    return EXIT_OK if report.all_nonnegative else EXIT_VIOLATION


def cmd_height(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    curve = _curve_over_q(args.curve)
    points = parse_points(curve, args.points)
    digits = digits_for(config.precision_bits)
    heights = service.heights(curve, points, config.tol, config.n_cap)
    payload = [
        {"point": format_point(P), "value": format_real(h.value, digits), "error": format_error(h.error_bound),
         "doublings": h.doublings_used, "torsion": h.torsion, "converged": h.converged}
        for P, h in zip(points, heights)
    ]
    out.write(to_json(payload) + "\n")
    return EXIT_OK


def cmd_pairing(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    curve = _curve_over_q(args.curve)
    points = parse_points(curve, args.points)
    digits = digits_for(config.precision_bits)
    matrix = service.pairing_matrix(curve, points, config.tol, config.n_cap)
    payload = {
        "points": [format_point(P) for P in matrix.points],
        "matrix": [[format_real(v, digits) for v in row] for row in matrix.entries],
        "errors": [[format_error(e) for e in row] for row in matrix.errors],
    }
    out.write(to_json(payload) + "\n")
    return EXIT_OK


def cmd_cs_check(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    curve = _curve_over_q(args.curve)
    points = parse_points(curve, args.points)
    if len(points) != 2:
        raise ParseError(f"cs-check takes exactly two points 'P;Q', got {len(points)}", args.points)
    digits = digits_for(config.precision_bits)
    report = service.cs_check(curve, points[0], points[1], config.tol, config.n_cap)
    payload = {
        "P": format_point(points[0]),
        "Q": format_point(points[1]),
        "lhs": format_real(report.lhs, digits),
        "rhs": format_real(report.rhs, digits),
        "lhs_error": format_error(report.lhs_error),
        "rhs_error": format_error(report.rhs_error),
        "holds": report.holds,
        "equality": report.equality,
    }
    out.write(to_json(payload) + "\n")
    return EXIT_OK if report.holds else EXIT_VIOLATION


def cmd_gauss(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    result = service.gauss(args.p)
    payload = {"p": result.p, "N": result.N, "affine_trace": result.affine_trace, "completed": result.completed,
               "trace": result.trace, "bound_ok": result.bound_ok}
    out.write(to_json(payload) + "\n")
    return EXIT_OK if result.bound_ok else EXIT_VIOLATION


def cmd_audit_qform(args, config: RunConfig, service: LabService, out: TextIO) -> int:
    form = None
    curve = None
    points = None
    if args.form:
        pieces = args.form.split(",")
        if len(pieces) != 2 or not all(piece.strip().lstrip("+-").isdigit() for piece in pieces):
            raise ParseError("a form is written 'a,q'", args.form, 1)
        form = FrobeniusForm(int(pieces[0]), int(pieces[1]))
    elif args.curve:
        curve = parse_curve(args.curve)
        if not isinstance(curve.field, PrimeField):
            curve = WeierstrassCurve.from_raw(curve)
            points = parse_points(curve, args.points) if args.points else None
    else:
        raise ParseError("audit-qform needs --form or --curve", "")
    try:
        report = service.audit_qform(curve, points, form, config.tol, config.n_cap)
    except AuditFailure as e:
        out.write(to_json({"passed": False, "violations": e.violations}) + "\n")
        return EXIT_VIOLATION
    out.write(to_json({"name": report.name, "checks": report.checks, "passed": report.passed,
                       "violations": report.violations}) + "\n")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--bits", type=int, default=DEFAULT_BITS, help="working precision in bits")
    parser.add_argument("--guard-bits", type=int, default=DEFAULT_GUARD_BITS)
    parser.add_argument("--nmax", type=int, default=DEFAULT_N_MAX, help="number of Li coefficients / a_n")
    parser.add_argument("--radius", type=float, default=DEFAULT_RADIUS, help="sampling circle radius")
    parser.add_argument("--dft-size", type=int, default=None, help="circle samples (power of two)")
    parser.add_argument("--exhaustive-threshold", type=int, default=EXHAUSTIVE_THRESHOLD)
    parser.add_argument("--tol", type=float, default=DEFAULT_HEIGHT_TOL, help="canonical height tolerance")
    parser.add_argument("--n-cap", type=int, default=DEFAULT_N_CAP, help="most doublings per height")
    parser.add_argument("--cache-dir", default=CACHE_DIR)
    parser.add_argument("--no-cache", action="store_true", help="neither read nor write the cache")
    parser.add_argument("--conductor-override", default=None, metavar="FILE",
                        help="JSON file with the conductor and/or per-prime reduction data")
    parser.add_argument("--workers", default=DEFAULT_WORKERS, help="worker processes, or 'auto'")
    parser.add_argument("--seed", type=lambda v: int(v, 0), default=DEFAULT_SEED, help="BSGS random seed")
    parser.add_argument("--format", choices=("json", "csv"), default=None)
    parser.add_argument("--log-level", default=LOG_LEVEL)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common)
    parser = argparse.ArgumentParser(prog="ellab", description="Elliptic curve L-series lab")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(handler=handler)
        return p

    p = add("count", cmd_count, "a_p table from point counts, or a Hasse sweep")
    p.add_argument("--curve")
    p.add_argument("--p")
    p.add_argument("--p-range")

    p = add("classify", cmd_classify, "reduction type at bad primes")
    p.add_argument("--curve", required=True)
    p.add_argument("--p")
    p.add_argument("--p-range")

    p = add("conductor", cmd_conductor, "conductor and exponents")
    p.add_argument("--curve", required=True)

    p = add("coeffs", cmd_coeffs, "Dirichlet coefficients a_1..a_nmax")
    p.add_argument("--curve", required=True)

    for name, handler, help_text in (("lvalue", cmd_lvalue, "L(s) with error bound"),
                                     ("xi", cmd_xi, "xi(s) with error bound")):
        p = add(name, handler, help_text)
        p.add_argument("--curve", required=True)
        p.add_argument("--s", required=True, help="'re' or 're,im'")

    p = add("li", cmd_li, "Li coefficient report")
    p.add_argument("--curve", required=True)

    for name, handler, help_text in (("height", cmd_height, "canonical heights"),
                                     ("pairing", cmd_pairing, "Neron-Tate Gram matrix"),
                                     ("cs-check", cmd_cs_check, "height Cauchy-Schwarz check")):
        p = add(name, handler, help_text)
        p.add_argument("--curve", required=True)
        p.add_argument("--points", required=True, help="'x,y' or 'O', separated by ';'")

    p = add("gauss", cmd_gauss, "count x^2y^2 + x^2 + y^2 = 1 mod p")
    p.add_argument("--p", type=int, required=True)

    p = add("audit-qform", cmd_audit_qform, "audit a quadratic form")
    p.add_argument("--curve")
    p.add_argument("--points")
    p.add_argument("--form", help="explicit 'a,q' for m^2 + a mn + q n^2")
    return parser


def main(argv: Optional[List[str]] = None, out: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format=LOG_FORMAT, stream=sys.stderr)
    try:
        config = RunConfig.from_args(args)
        service = LabService.get_instance().configure(config.settings())
        return args.handler(args, config, service, out)
    except LabError as e:
        logger.error(f"{args.command}: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        logger.error(f"{args.command}: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
