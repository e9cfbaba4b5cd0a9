from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Sequence

import numpy as np
from dotenv import load_dotenv  # type: ignore
from pydantic import ValidationError

from .analysis import (
    bench_to_csv,
    bench_wc,
    check_equivalence,
    identity_suite,
    parse_relaxations,
    perturbed_network,
)
from .case_io import BUILTIN_PREFIX, builtin_case, load_case, write_report
from .config import SolverConfig, get_settings
from .envelopes import compose_product, cosine_envelope, dump_cuts_csv, mccormick, sine_envelope, square_envelope
from .errors import EnvelopeDomainError, OpfRelaxError
from .graph import run_case
from .sdp_export import export_sdp
from .state import SolveState
from .ux import error_tag, export_lines, number, report_lines, verdict

# Load .env from the working directory
load_dotenv()

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
IDENTITY_TOL = 1e-9
# perturbation injected by --break-identity
BROKEN_IDENTITY = 1e-3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opfrelax", description="Convex relaxations of AC optimal power flow")
    p.add_argument("-v", "--verbose", action="store_true", help="Debug logging (overrides OPFRELAX_LOG_LEVEL)")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--tol", type=float, default=None, help="Feasibility and gap tolerance")
        sp.add_argument("--max-iter", type=int, default=None, help="Interior-point iteration limit")

    s = sub.add_parser("solve", help="AC heuristic, relaxation bounds and optimality gaps")
    s.add_argument("--case", action="append", required=True, help="builtin:<name>, a .m file or a directory")
    s.add_argument("--relax", default="soc,qc,cp", help="Comma-separated subset of soc,qc,cp")
    s.add_argument("--variant", choices=("w", "c", "W", "C"), default="w")
    s.add_argument("--objective", choices=("cost", "loss"), default="cost")
    s.add_argument("--start", choices=("flat", "warm"), default="flat", help="AC starting point")
    s.add_argument("--sdp-bound", type=float, default=None, help="Bound from an external SDP solve")
    s.add_argument("--min-soc-gap", type=float, default=None, help="Keep only cases with a larger SOC gap (%%)")
    s.add_argument("--out", default=None, help="Report file (default: stdout)")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    solver_flags(s)

    c = sub.add_parser("check", help="Branch identity and W/C equivalence suites")
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--seed", type=int, default=42)
    c.add_argument("--networks", type=int, default=3, help="Randomized extended networks for the equivalence suite")
    c.add_argument("--break-identity", action="store_true", help=argparse.SUPPRESS)
    solver_flags(c)

    e = sub.add_parser("export-sdp", help="Write the SDP relaxation in SDPA sparse format")
    e.add_argument("--case", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--objective", choices=("cost", "loss"), default="cost")

    b = sub.add_parser("bench", help="Median solve times of the W and C formulations")
    b.add_argument("--case", action="append", required=True)
    b.add_argument("--repetitions", type=int, default=3)
    b.add_argument("--out", default=None, help="CSV file (default: stdout)")
    solver_flags(b)

    v = sub.add_parser("envelopes", help="Dump the cut coefficients of the QC envelopes")
    v.add_argument("--theta", type=float, default=30.0, help="Angle bound in degrees")
    v.add_argument("--v-min", type=float, default=0.9)
    v.add_argument("--v-max", type=float, default=1.1)
    v.add_argument("--out", default=None)
    return p


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, get_settings().log_level, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _fail(message: str, code: int = EXIT_USAGE) -> int:
    print(f"{error_tag()} {message}", file=sys.stderr)
    return code


def _config(args: argparse.Namespace, **fields) -> SolverConfig:
    return SolverConfig(**fields).with_overrides(args.tol, args.max_iter)


def expand_cases(values: Sequence[str]) -> List[str]:
    """Directories expand to their .m files, sorted by name."""
    out: List[str] = []
    for value in values:
        path = Path(value)
        if not value.startswith(BUILTIN_PREFIX) and path.is_dir():
            out.extend(str(p) for p in sorted(path.glob("*.m")))
        else:
            out.append(value)
    return out


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        relaxations = parse_relaxations(args.relax)
        cfg = _config(args, start=args.start)
    except (ValueError, ValidationError) as exc:
        return _fail(str(exc))
    specs = expand_cases(args.case)
    if not specs:
        return _fail(f"no case files found in {', '.join(args.case)}")

    inputs = {
        "relaxations": relaxations,
        "variant": args.variant.upper(),
        "objective": args.objective,
        "cfg": cfg,
        "sdp_bound": args.sdp_bound,
        "min_soc_gap": args.min_soc_gap,
    }
    workers = max(1, min(get_settings().threads, len(specs)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        states: List[SolveState] = list(pool.map(lambda spec: run_case(spec, **inputs), specs))

    load_errors = [s["load_error"] for s in states if s.get("load_error")]
    reports = [s["report"] for s in states if "report" in s and not s.get("skipped")]
    unit = "$/h" if args.objective == "cost" else "MW"
    if args.out is not None:
        for report in reports:
            print("\n".join(report_lines(report, unit)))
    try:
        _write(write_report(reports, args.format), args.out)
    except OSError as exc:
        return _fail(f"cannot write {args.out}: {exc}")
    for message in load_errors:
        _fail(message)
    if load_errors:
        return EXIT_USAGE
    return EXIT_OK if all(r.all_optimal for r in reports) else EXIT_FAILURE


def cmd_check(args: argparse.Namespace) -> int:
    try:
        cfg = _config(args)
    except ValidationError as exc:
        return _fail(str(exc))
    perturb = BROKEN_IDENTITY if args.break_identity else 0.0
    ok = True
    if args.samples <= 0:
        print("no samples")
    else:
        for name, extended in (("identities", False), ("identities-ext", True)):
            worst = identity_suite(args.samples, args.seed, extended, perturb)
            passed = worst <= IDENTITY_TOL
            ok &= passed
            print(f"{name} max err {worst:.1e} over {args.samples} samples {verdict(passed)}")

    if args.networks > 0:
        base = builtin_case("case3_base")
        rng = np.random.default_rng(args.seed)
        nets = [base] + [perturbed_network(base, rng, f"{base.name}__ext{k}") for k in range(args.networks)]
        for net in nets:
            res = check_equivalence(net, cfg)
            ok &= res.ok
            mapped = max(v if v is not None else math.inf for v in (res.w_to_c, res.c_to_w))
            print(
                f"equivalence {net.name}: W {number(res.w_objective, '{:.6f}')} "
                f"C {number(res.c_objective, '{:.6f}')} rel diff {res.relative_difference:.1e} "
                f"mapped residual {mapped:.1e} {verdict(res.ok)}"
            )
    return EXIT_OK if ok else EXIT_FAILURE


def cmd_export_sdp(args: argparse.Namespace) -> int:
    try:
        name, net = load_case(args.case)
    except FileNotFoundError:
        return _fail(f"case file not found: {args.case}")
    except (OSError, OpfRelaxError) as exc:
        return _fail(f"{args.case}: {exc}")
    try:
        export = export_sdp(net, args.out, args.objective)
    except OSError as exc:
        return _fail(f"cannot write {args.out}: {exc}")
    print("\n".join(export_lines(name, export.summary(), args.out)))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        cfg = _config(args)
    except ValidationError as exc:
        return _fail(str(exc))
    rows = []
    for spec in expand_cases(args.case):
        try:
            _, net = load_case(spec)
        except FileNotFoundError:
            return _fail(f"case file not found: {spec}")
        except (OSError, OpfRelaxError) as exc:
            return _fail(f"{spec}: {exc}")
        rows.extend(bench_wc(net, args.repetitions, cfg))
    try:
        _write(bench_to_csv(rows), args.out)
    except OSError as exc:
        return _fail(f"cannot write {args.out}: {exc}")
    return EXIT_OK if all(r.status == "optimal" for r in rows) else EXIT_FAILURE


def cmd_envelopes(args: argparse.Namespace) -> int:
    theta = math.radians(args.theta)
    try:
        square = square_envelope(args.v_min, args.v_max, arg="v")
        vv = mccormick(args.v_min, args.v_max, args.v_min, args.v_max)
        cos_env = cosine_envelope(theta, arg="d")
        sin_env = sine_envelope(theta, arg="d")
        envs = [
            ("square", square),
            ("product", vv),
            ("cos", cos_env),
            ("sin", sin_env),
            ("wc", compose_product(vv, cos_env)),
            ("ws", compose_product(vv, sin_env)),
        ]
    except EnvelopeDomainError as exc:
        return _fail(str(exc))
    try:
        _write(dump_cuts_csv(envs), args.out)
    except OSError as exc:
        return _fail(f"cannot write {args.out}: {exc}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "check": cmd_check,
    "export-sdp": cmd_export_sdp,
    "bench": cmd_bench,
    "envelopes": cmd_envelopes,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    return COMMANDS[args.command](args)
