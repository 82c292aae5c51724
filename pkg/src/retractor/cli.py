"""Command-line front end.

    retractor solve SPEC [--eps E] [--gamma G] [--seed S] [--max-iter K]
                         [--allow-uncertified] [--report PATH] [--trace PATH]
    retractor verify SPEC [same flags]
    retractor plotdata TRACE [--format json|csv] [--out PATH]

Exit status: 0 success, 1 audit failure (verify), 2 unreadable or invalid
input, 3 certification failure, 4 convergence or contract failure.
Set RETRACTOR_LOG (e.g. INFO, DEBUG) for log output on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .errors import (
    CertificationError,
    ContractFailure,
    ConvergenceError,
    KMTimeout,
    NonConvergence,
    PartialBuildError,
    SelfMapError,
    SpecError,
)
from .harness.report import RunReport, read_trace, trace_series, write_trace
from .harness.suite import certify_problem, run_property_suite, solver_kwargs
from .problem import ProblemSpec
from .retraction import apply, build_retraction

EXIT_OK, EXIT_AUDIT, EXIT_INPUT, EXIT_CERT, EXIT_CONVERGENCE = 0, 1, 2, 3, 4

log = logging.getLogger("retractor")


def _setup_logging():
    level = os.environ.get("RETRACTOR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _load(args):
    spec = ProblemSpec.load(args.spec)
    return spec.with_overrides(eps=args.eps, gamma=args.gamma, seed=args.seed,
                               max_iter=args.max_iter, report=args.report, trace=args.trace)


def _default_path(spec_path, suffix):
    return Path(spec_path).stem + suffix


def _report_path(args, spec):
    return spec.outputs["report"] or _default_path(args.spec, ".report.json")


def _trace_path(args, spec):
    return spec.outputs["trace"] or _default_path(args.spec, ".trace.csv")


def _print_cert_failure(exc):
    print(f"certification failed: {exc}", file=sys.stderr)
    w = getattr(exc, "witness", None)
    if isinstance(exc, SelfMapError):
        w = (exc.x, exc.y)
    if w is not None:
        print("witness: " + json.dumps([np.asarray(v).tolist() if isinstance(v, np.ndarray) else v
                                        for v in w]))


def _failure_rows(exc):
    cause = exc.cause if isinstance(exc, PartialBuildError) else exc
    stage = exc.stage if isinstance(exc, PartialBuildError) else 0
    if isinstance(cause, KMTimeout):
        return cause.trace.rows(stage)
    if isinstance(cause, NonConvergence) and cause.trace is not None:
        return [(stage, k, s, s) for k, s in enumerate(cause.trace.steps)]
    if isinstance(cause, ContractFailure) and cause.trace:
        return [r for rows in cause.trace.values() for r in rows]
    return []


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    spec = _load(args)
    cert = certify_problem(spec, args.allow_uncertified, seed=spec.solver["seed"])
    t_cert = time.perf_counter() - t0
    trace_path = _trace_path(args, spec)
    X = spec.evaluation_points()
    try:
        R = build_retraction(cert.family, spec.solver["eps"],
                             **solver_kwargs(spec, args.allow_uncertified))
        t_build = time.perf_counter() - t0 - t_cert
        Y, diag = apply(R, X, trace=True)
    except (ConvergenceError, ContractFailure) as exc:
        write_trace(trace_path, _failure_rows(exc))
        print(f"convergence failure: {exc}", file=sys.stderr)
        print(f"trace: {trace_path}")
        return EXIT_CONVERGENCE
    rows = [r for k in sorted(diag.traces) for r in diag.traces[k]]
    write_trace(trace_path, rows)
    stats = [s.__dict__ for s in diag.stages]
    evaluation = {
        "points": X, "outputs": Y, "residuals": diag.residuals,
        "max_residual": diag.max_residual, "eps": diag.eps,
        "refinements": diag.refinements, "stage_stats": stats,
    }
    audit = {"id": "retraction.residual_contract", "status": "pass",
             "value": diag.max_residual, "bound": diag.eps, "margin": diag.eps - diag.max_residual,
             "details": {}}
    report = RunReport(spec.to_dict(), spec.digest(), spec.solver["seed"],
                       certificates=dict(cert.certificates, problems=[str(p) for p in cert.problems]),
                       stages=R.describe(), evaluation=evaluation, audits=[audit],
                       timings={"certify": t_cert, "build": t_build,
                                "total": time.perf_counter() - t0})
    report_path = _report_path(args, spec)
    report.write(report_path)
    iters = sum(s["iterations"] for s in stats)
    print(f"max residual {diag.max_residual:.3e} (eps {diag.eps:.1e}), "
          f"{len(R.stages)} stages, {iters} iterations; report {report_path}, trace {trace_path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = _load(args)
    report = run_property_suite(spec, allow_uncertified=args.allow_uncertified)
    path = _report_path(args, spec)
    report.write(path)
    fails = report.failures
    n = len(report.audits)
    skipped = sum(a["status"] == "skipped" for a in report.audits)
    if fails:
        for a in fails:
            detail = a.get("message") or f"value {a['value']:.3e} > bound {a['bound']:.3e}"
            print(f"FAIL {a['id']}: {detail}", file=sys.stderr)
        print(f"{len(fails)} of {n} audits failed; report {path}")
        return EXIT_AUDIT
    print(f"all {n - skipped} audits passed ({skipped} skipped); report {path}")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    series = trace_series(read_trace(args.trace_file))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.format == "json":
            json.dump({"series": [dict(stage=k, **v) for k, v in series.items()]}, out, indent=2)
            out.write("\n")
        else:
            w = csv.writer(out)
            w.writerow(["stage", "iteration", "step_norm", "log10_step_norm"])
            for k, s in series.items():
                for it, step in zip(s["iteration"], s["step_norm"]):
                    w.writerow([k, it, repr(step), repr(math.log10(step)) if step > 0 else "-inf"])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="retractor", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (("solve", cmd_solve, "build the retraction and evaluate it"),
                               ("verify", cmd_verify, "run the property suite")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("spec", help="problem spec (JSON)")
        sp.add_argument("--eps", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--max-iter", type=int, dest="max_iter")
        sp.add_argument("--allow-uncertified", action="store_true",
                        help="run even if certification fails (negative controls)")
        sp.add_argument("--report", help="run report path (JSON)")
        sp.add_argument("--trace", help="iteration trace path (CSV)")
        sp.set_defaults(func=fn)
    pp = sub.add_parser("plotdata", help="per-stage step-norm series from a trace")
    pp.add_argument("trace_file")
    pp.add_argument("--format", choices=("json", "csv"), default="json")
    pp.add_argument("--out")
    pp.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CertificationError, SelfMapError) as exc:
        _print_cert_failure(exc)
        return EXIT_CERT


if __name__ == "__main__":
    sys.exit(main())
