"""Command-line entry point: fit, simulate, check, roots, consistency.

Exit codes: 0 ok, 1 input error, 2 degenerate instance, 3 no applicable oracle
(``check`` also returns 2 when the oracle comparison fails).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from . import __version__, poly
from .config import load_config
from .errors import (ConfigError, DataValidationError, DegenerateInstance, DimensionMismatch,
                     NoAdmissibleCandidate, OracleUnavailable, QuadMinimaxError)
from .moments import write_environment_csv
from .pencil import intersection_candidates
from .risk import build_forms
from .sem import SemSpec, environment_rng, simulate_environment
from .solver import solve

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_ORACLE = 0, 1, 2, 3
INPUT_ERRORS = (ConfigError, DataValidationError, DimensionMismatch, OSError, ValueError,
                KeyError, TypeError)


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _fail(msg, code):
    print(f"error: {msg}", file=sys.stderr)
    return code


def build_report(cfg, report, elapsed_ms=None, status="ok") -> dict:
    d = report.to_dict()
    return {
        "version": __version__,
        "status": status,
        "config_echo": cfg.to_dict(),
        "candidates": d["candidates"],
        "chosen": d["chosen"],
        "chosen_betas": [c["beta"] for k, c in enumerate(d["candidates"]) if k in d["chosen"]],
        "epsilon_set": d["epsilon_set"],
        "epsilon": d["epsilon"],
        "min_value": d["min_value"],
        "diagnostics": d["diagnostics"],
        "timing_ms": elapsed_ms,
    }


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        qfs = build_forms(cfg.scheme, cfg.load_moments())
    except INPUT_ERRORS as exc:
        return _fail(exc, EXIT_INPUT)
    try:
        report = solve(qfs, cfg.solver_options())
        status, code = "ok", EXIT_OK
    except NoAdmissibleCandidate as exc:
        report, status, code = exc.partial, "NoAdmissibleCandidate", EXIT_DEGENERATE
        print(f"error: degenerate instance: {exc}", file=sys.stderr)
    except DegenerateInstance as exc:
        return _fail(f"degenerate instance: {exc}", EXIT_DEGENERATE)
    elapsed = round((time.perf_counter() - t0) * 1e3, 3) if args.timing else None
    _dump(build_report(cfg, report, elapsed, status), args.out)
    return code


def cmd_check(args) -> int:
    from .oracle import oracle_check

    try:
        cfg = load_config(args.config)
        qfs = build_forms(cfg.scheme, cfg.load_moments())
    except INPUT_ERRORS as exc:
        return _fail(exc, EXIT_INPUT)
    try:
        report = solve(qfs, cfg.solver_options())
    except DegenerateInstance as exc:
        return _fail(f"degenerate instance: {exc}", EXIT_DEGENERATE)
    try:
        chk = oracle_check(qfs, report.min_value, report.chosen_betas)
    except OracleUnavailable as exc:
        return _fail(exc, EXIT_ORACLE)
    out = chk.to_dict()
    out["chosen_betas"] = [b.tolist() for b in report.chosen_betas]
    _dump(out, args.out)
    return EXIT_OK if chk.passed else EXIT_DEGENERATE


def _print_roots(lams, betas=None, name="root"):
    if not lams:
        print("no real roots")
        return
    for k, lam in enumerate(lams):
        line = f"{k + 1:3d}  {name} = {lam!r}"
        if betas is not None:
            line += f"  beta = {[float(x) for x in betas[k]]}"
        print(line)


def cmd_roots(args) -> int:
    if args.coeffs is not None:
        try:
            coeffs = [float(x) for x in args.coeffs.split(",") if x.strip()]
        except ValueError as exc:
            return _fail(f"bad coefficient list: {exc}", EXIT_INPUT)
        P = poly.Polynomial(coeffs)
        if P.degree < 0:
            return _fail("zero polynomial has no isolated roots", EXIT_INPUT)
        try:
            search = poly.find_real_roots(P)
        except DegenerateInstance as exc:
            return _fail(f"degenerate polynomial: {exc}", EXIT_DEGENERATE)
        if args.json:
            _dump({"coeffs": P.coeffs.tolist(), "method": search.method,
                   "roots": [float(r) for r in search.roots]})
        else:
            print(f"degree {P.degree}, method {search.method}")
            _print_roots(search.roots)
        return EXIT_OK
    if args.pair is None or args.config is None:
        return _fail("roots needs --coeffs, or --pair together with --config", EXIT_INPUT)
    try:
        i, j = (int(x) - 1 for x in args.pair.split(","))
        cfg = load_config(args.config)
        qfs = build_forms(cfg.scheme, cfg.load_moments())
        if not (0 <= i < len(qfs) and 0 <= j < len(qfs)) or i == j:
            raise ConfigError(f"pair must name two distinct forms in 1..{len(qfs)}")
    except INPUT_ERRORS as exc:
        return _fail(exc, EXIT_INPUT)
    try:
        res = intersection_candidates(qfs[i], qfs[j], i, j, cfg.tolerances, cfg.bisections,
                                      cfg.interval_budget)
    except QuadMinimaxError as exc:
        return _fail(f"degenerate pair: {exc}", EXIT_DEGENERATE)
    if args.json:
        _dump(res.to_dict())
    else:
        coeffs = [] if res.ptilde is None else res.ptilde.coeffs.tolist()
        print(f"pair ({i + 1},{j + 1})  P~ coefficients (ascending): {coeffs}")
        if res.flags:
            print("flags: " + ", ".join(res.flags))
        _print_roots(res.lambdas, res.betas, name="lambda")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        spec = SemSpec.from_dict(raw)
        n = int(args.n if args.n is not None else raw.get("n", 1000))
        if n < 1:
            raise ConfigError("n must be >= 1")
    except (json.JSONDecodeError,) + INPUT_ERRORS as exc:
        return _fail(exc, EXIT_INPUT)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    covariates = [f"x{l + 1}" for l in range(spec.p)]
    try:
        for idx, shift in enumerate(spec.shifts):
            samples = simulate_environment(spec, shift, n, environment_rng(spec, idx))
            name = f"env_{idx + 1}.csv"
            write_environment_csv(out / name, samples, "y", covariates)
            files.append(name)
    except DegenerateInstance as exc:
        return _fail(exc, EXIT_DEGENERATE)
    manifest = {"version": __version__, "spec": spec.to_dict(), "n": n,
                "seeds": {"master": spec.seed,
                          "streams": [f"SeedSequence({spec.seed}).spawn[{i}]"
                                      for i in range(spec.k)]},
                "files": files, "target": "y", "covariates": covariates}
    _dump(manifest, out / "manifest.json")
    return EXIT_OK


def cmd_consistency(args) -> int:
    from .consistency import run_consistency, shipped_fixtures

    fixtures = {f.name: f for f in shipped_fixtures(replications=args.reps, seed=args.seed)}
    names = list(fixtures) if args.fixture == "all" else [args.fixture]
    for name in names:
        if name not in fixtures:
            return _fail(f"unknown fixture {name!r}; choose from {sorted(fixtures)}", EXIT_INPUT)
    rows = []
    for name in names:
        exp = fixtures[name]
        if args.schedule:
            exp.schedule = tuple(int(x) for x in args.schedule.split(","))
        rows.extend(run_consistency(exp).to_rows())
    fields = ["fixture", "n", "median_distance", "median_eps_size", "median_chosen", "degenerate"]
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="quadminimax", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="solve the instance described by a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--timing", action="store_true",
                   help="record wall time in the report (breaks byte-identical reruns)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="draw one CSV per shift from a SEM spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n", type=int, help="samples per environment (overrides the spec)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="compare the solver with brute-force oracles")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("roots", help="real roots of a polynomial or of a pair's P~")
    p.add_argument("--coeffs", help="comma-separated ascending coefficients, e.g. --coeffs=-2,0,1")
    p.add_argument("--pair", help="1-based form indices i,j")
    p.add_argument("--config")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_roots)

    p = sub.add_parser("consistency", help="Monte Carlo convergence curve for shipped fixtures")
    p.add_argument("--fixture", default="all")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schedule", help="comma-separated sample sizes, default 100,1000,10000")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_consistency)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QuadMinimaxError as exc:
        return _fail(exc, EXIT_DEGENERATE if isinstance(exc, DegenerateInstance) else EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
