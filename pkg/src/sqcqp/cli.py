"""Command-line interface: ``sqcqp solve|certify|relax|omega-check|p1 <input.json>``."""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import barrier
from .certify import check_assumption2, check_slater, find_multipliers, verify_kkt
from .model import ProblemFormatError, load_problem
from .msolve import NoCandidate, load_p1, solve_p1
from .relax import RelaxationInfeasible, build_socp, recover_and_check, shor_sdpa_text, solve_relaxation
from .slemma import omega_convexity_probe

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SOLVER = 3
EXIT_MULTIPLIERS = 4
EXIT_WRITE = 5
EXIT_STRUCTURAL = 6
EXIT_NO_CANDIDATE = 7


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _clean(value):
    """Make a report JSON-safe with deterministic float text."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if np.isnan(v):
            return None
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def _write(path: str | None, text: str) -> None:
    if path is None:
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_WRITE, f"cannot write {path}: {exc}") from exc


def _load(path: str):
    try:
        return load_problem(path)
    except ProblemFormatError as exc:
        raise CliError(EXIT_PARSE, f"cannot parse {path}: {exc}") from exc


def cmd_solve(args) -> tuple[dict, str]:
    problem = _load(args.input)
    slater = check_slater(problem, seed=args.seed)
    if slater is not None:
        problem = problem.with_slater(slater)
    a2 = check_assumption2(problem)
    try:
        sol = solve_relaxation(problem, tol_gap=args.tol_gap)
    except RelaxationInfeasible as exc:
        raise CliError(EXIT_SOLVER, str(exc)) from exc
    if sol.status == barrier.Status.ITER_LIMIT.value:
        raise CliError(EXIT_SOLVER, "barrier solver hit its iteration limit")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = recover_and_check(problem, sol, tol=args.tol)
    report = {
        "command": "solve",
        "relaxation": sol.to_dict(),
        "value": sol.objective_value,
        "exact": sol.exact,
        "point": None if sol.x_recovered is None else sol.x_recovered,
        "upper_bound": sol.upper_bound,
        "certificate": None if sol.certificate is None else sol.certificate.to_dict(),
        "assumptions": {
            "slater_point": slater,
            "assumption2_witness": a2,
            "dimension_ok": problem.dimension_ok,
        },
    }
    gap = sol.gap_vs_certified
    summary = (
        f"relaxation value {sol.objective_value:.10g}; exact = {str(sol.exact).lower()}"
        + ("" if gap is None else f"; gap {gap:.6g}")
        + ("" if sol.certificate is None else f"; verdict {sol.certificate.verdict.value}")
    )
    return report, summary


def _load_point(path: str, n: int) -> np.ndarray:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_PARSE, f"cannot parse point file {path}: {exc}") from exc
    x = data.get("x") if isinstance(data, dict) else data
    if not isinstance(x, list) or len(x) != n:
        raise CliError(EXIT_PARSE, f"point must be a list of length {n}")
    return np.asarray(x, dtype=float)


def cmd_certify(args) -> tuple[dict, str]:
    problem = _load(args.input)
    if args.point is None:
        raise CliError(EXIT_PARSE, "certify needs --point")
    x = _load_point(args.point, problem.n)
    slater = check_slater(problem, seed=args.seed)
    if slater is not None:
        problem = problem.with_slater(slater)
    gamma = find_multipliers(problem, x, tol=args.tol)
    if gamma is None:
        raise CliError(EXIT_MULTIPLIERS, "no nonnegative multipliers make the point a KKT point")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cert = verify_kkt(problem, x, gamma, tol=args.tol, slater=slater is not None)
    report = {"command": "certify", "x": x, **cert.to_dict()}
    return report, f"verdict {cert.verdict.value}; w = {cert.w:.6g}"


def cmd_relax(args) -> tuple[dict, str]:
    problem = _load(args.input)
    if args.format == "sdpa":
        text = shor_sdpa_text(problem)
        written = "Shor SDP (SDPA sparse)"
    else:
        text = dumps(build_socp(problem).to_dict())
        written = "SOCP description (JSON)"
    if args.out is None:
        sys.stdout.write(text)
        return None, ""
    _write(args.out, text)
    return None, f"wrote {written} to {args.out}"


def cmd_omega_check(args) -> tuple[dict, str]:
    problem = _load(args.input)
    report = omega_convexity_probe(problem, samples=args.samples, seed=args.seed)
    report = {"command": "omega-check", **report}
    if report["structural_failures"]:
        _write(args.out, dumps(report))
        raise CliError(EXIT_STRUCTURAL, "B has full column rank: no witness direction exists")
    return report, f"{report['passes']}/{report['samples']} witnesses pass"


def cmd_p1(args) -> tuple[dict, str]:
    try:
        instance = load_p1(args.input)
    except ProblemFormatError as exc:
        raise CliError(EXIT_PARSE, f"cannot parse {args.input}: {exc}") from exc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            sol = solve_p1(instance, seed=args.seed)
        except NoCandidate as exc:
            report = {"command": "p1", "candidates": [c.to_dict() for c in exc.candidates]}
            _write(args.out, dumps(report))
            raise CliError(EXIT_NO_CANDIDATE, str(exc)) from exc
    report = {"command": "p1", **sol.to_dict()}
    return report, (
        f"branch {sol.branch}; objective {sol.objective:.10g}; verdict {sol.certificate.verdict.value}"
    )


COMMANDS = {
    "solve": cmd_solve,
    "certify": cmd_certify,
    "relax": cmd_relax,
    "omega-check": cmd_omega_check,
    "p1": cmd_p1,
}


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError("must be positive")
        return value

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqcqp", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("input", help="problem JSON file")
    parser.add_argument("--out", help="report or export path")
    parser.add_argument("--tol", type=_positive(float), default=1e-7, help="certificate tolerance")
    parser.add_argument("--tol-gap", type=_positive(float), default=1e-9, help="barrier duality-gap target")
    parser.add_argument("--samples", type=_positive(int), default=1000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--format", choices=("sdpa", "socp-json"), default="sdpa")
    parser.add_argument("--point", help="JSON file with the point to certify (certify only)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        report, summary = COMMANDS[args.command](args)
        if report is not None:
            _write(args.out, dumps(report))
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    if summary:
        print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
