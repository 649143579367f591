"""Command-line entry point: analyze, eval, optimize, certify, verify.

stdout carries exactly one report document; diagnostics go to stderr.
Exit codes: 0 success, 1 a verify suite failed, 2 input error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .bell import evaluate_S, max_violation_certificate
from .errors import NetbellError, ParseError
from .network import independence_report
from .optimize import CLASSES, CONSTRAINTS, optimize_S
from .report import (
    bell_body,
    certificate_body,
    correlation_body,
    envelope,
    independence_body,
    optimization_body,
    to_json,
    to_table,
    verify_body,
)
from .scenario_io import load_document, parse_optimize_config, parse_party_list, parse_topology, scenario_from_document
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="netbell", description="Bell functional toolkit for quantum networks.")
    p.add_argument("--version", action="version", version=f"netbell {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("scenario", help="scenario JSON file")
        sp.add_argument("--format", choices=("json", "table"), default="json")

    def indep(sp):
        sp.add_argument("--indep-set", help="comma-separated party names or 1-based indices")

    sp = sub.add_parser("analyze", help="independence structure of the network")
    common(sp)

    sp = sub.add_parser("eval", help="evaluate I, J and S")
    common(sp)
    indep(sp)
    sp.add_argument("--correlations", action="store_true", help="include p(a|x) tables")

    sp = sub.add_parser("optimize", help="maximise S over the observables")
    common(sp)
    indep(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--max-iter", type=int)
    sp.add_argument("--tol", type=float, help="convergence tolerance on the per-sweep gain")
    sp.add_argument("--obs-class", choices=CLASSES)
    sp.add_argument("--constraint", choices=CONSTRAINTS)
    sp.add_argument("--fd-step", type=float)

    sp = sub.add_parser("certify", help="maximal-violation certificate")
    common(sp)
    indep(sp)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--probes", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("verify", help="randomised property suites")
    common(sp, scenario=False)
    sp.add_argument("--suite", choices=("all",) + SUITES, default="all")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int, default=0)
    return p


def _load(args, *, validate=True):
    doc, digest = load_document(args.scenario)
    scenario = scenario_from_document(doc, validate=validate)
    if getattr(args, "indep_set", None):
        scenario.independent_set = parse_party_list(args.indep_set.split(","), scenario.topology)
        scenario.validate()
    return doc, digest, scenario


def _dispatch(args) -> tuple[dict, int]:
    if args.command == "analyze":
        doc, digest = load_document(args.scenario)
        topology = parse_topology(doc)
        return envelope("analyze", independence_body(topology, independence_report(topology)), digest), EXIT_OK

    if args.command == "eval":
        _, digest, sc = _load(args)
        body = bell_body(sc, evaluate_S(sc))
        if args.correlations:
            body["correlations"] = correlation_body(sc)
        return envelope("eval", body, digest), EXIT_OK

    if args.command == "optimize":
        doc, digest, sc = _load(args)
        cfg = parse_optimize_config(
            doc, seed=args.seed, restarts=args.restarts, max_iter=args.max_iter, tol=args.tol,
            obs_class=args.obs_class, constraint=args.constraint, fd_step=args.fd_step,
        )
        sc.obs_class = cfg.obs_class
        result = optimize_S(sc, cfg)
        return envelope("optimize", optimization_body(sc, result, cfg), digest), EXIT_OK

    if args.command == "certify":
        _, digest, sc = _load(args)
        rep = max_violation_certificate(sc, probes=args.probes, seed=args.seed, tol=args.tol,
                                        indep=sc.independent_set)
        body = {"bell": bell_body(sc, evaluate_S(sc)), "certificate": certificate_body(sc, rep)}
        return envelope("certify", body, digest), EXIT_OK

    if args.command == "verify":
        if args.trials is not None and args.trials < 1:
            raise NetbellError("--trials must be at least 1")
        results = run_suite(args.suite, args.trials, args.seed)
        body = verify_body(results, args.seed)
        for r in results:
            print(f"{r.name}: {r.passed}/{r.trials} {'pass' if r.ok else 'FAIL'}", file=sys.stderr)
        return envelope("verify", body, None), EXIT_OK if body["passed"] else EXIT_FAIL

    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc, code = _dispatch(args)
    except ParseError as exc:
        print(f"netbell: parse error at {exc.path or '<document>'}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NetbellError as exc:
        print(f"netbell: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sys.stdout.write(to_table(doc) if args.format == "table" else to_json(doc))
    return code


if __name__ == "__main__":
    sys.exit(main())
