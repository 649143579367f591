"""Machine-readable report documents and their text renderings.

Metric values are rounded to 9 significant digits.  Two blocks stay at
full precision: ``exact`` (I, J, S as computed) and the embedded
``scenario`` of optimize reports, so a report can be parsed back and
re-evaluated to the same S.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from itertools import product

import numpy as np

from . import __version__
from .bell import BellReport, CertificateReport, Scenario, correlation, parity_from_table
from .network import IndependenceReport, NetworkTopology
from .optimize import OptimizationResult
from .scenario_io import scenario_to_document
from .verify import SuiteResult

SIG_DIGITS = 9
VERBATIM_KEYS = frozenset({"scenario", "exact", "input_digest", "version"})


def round_sig(x: float, digits: int = SIG_DIGITS) -> float:
    if not np.isfinite(x):
        return float(x)
    return float(f"{x:.{digits}g}")


def rounded(node, digits: int = SIG_DIGITS):
    """Copy of a JSON-ready tree with every float rounded (verbatim keys excepted)."""
    if isinstance(node, bool) or node is None or isinstance(node, (int, str)):
        return node
    if isinstance(node, float):
        return round_sig(node, digits)
    if isinstance(node, Mapping):
        return {k: (v if k in VERBATIM_KEYS else rounded(v, digits)) for k, v in node.items()}
    if isinstance(node, (list, tuple)):
        return [rounded(v, digits) for v in node]
    raise TypeError(f"cannot serialize {type(node).__name__}")


def envelope(command: str, body: Mapping, digest: str | None) -> dict:
    doc = {"tool": "netbell", "version": __version__, "command": command}
    if digest is not None:
        doc["input_digest"] = digest
    doc.update(body)
    return rounded(doc)


def party_set(topology: NetworkTopology, indices: Sequence[int]) -> dict:
    return {"names": [topology.parties[k] for k in indices], "indices": [k + 1 for k in indices]}


# ---------------------------------------------------------------- bodies


def independence_body(topology: NetworkTopology, report: IndependenceReport) -> dict:
    return {
        "parties": list(topology.parties),
        "sources": [{"name": s.name, "parties": list(s.parties)} for s in topology.sources],
        "m": topology.m,
        "n": topology.n,
        "h_max": report.h_max,
        "no_independent_pair": report.no_independent_pair,
        "independence": [
            {"h": h, "D": report.degree(h), "sets": [party_set(topology, s) for s in report.sets[h]]}
            for h in sorted(report.sets)
        ],
    }


def bell_body(scenario: Scenario, rep: BellReport) -> dict:
    return {
        "I": rep.I,
        "J": rep.J,
        "S": rep.S,
        "h": rep.h,
        "independent_set": party_set(scenario.topology, rep.independent_set),
        "classical_bound_satisfied": rep.classical_bound_satisfied,
        "tsirelson_satisfied": rep.tsirelson_satisfied,
        "violation": rep.violation,
        "maximal": rep.maximal,
        "exact": {"I": float(rep.I), "J": float(rep.J), "S": float(rep.S)},
    }


def correlation_body(scenario: Scenario) -> list[dict]:
    """p(a|x) for every input string; outcome bit 0 means +1."""
    m = scenario.topology.m
    out = []
    for inputs in product((0, 1), repeat=m):
        table = correlation(scenario, inputs)
        out.append({
            "inputs": "".join(map(str, inputs)),
            "p": {"".join(map(str, bits)): float(table[bits]) for bits in product((0, 1), repeat=m)},
            "parity": parity_from_table(table),
        })
    return out


def certificate_body(scenario: Scenario, rep: CertificateReport) -> dict:
    parties = []
    for p in rep.parties:
        entry = {
            "party": p.party,
            "r_sq0": p.r_sq0,
            "r_sq1": p.r_sq1,
            "r_anti": p.r_anti,
            "algebra_dim": p.algebra.dim,
            "m2": p.algebra.m2,
        }
        if p.op_anti is not None:
            entry.update(op_sq0=p.op_sq0, op_sq1=p.op_sq1, op_anti=p.op_anti)
        parties.append(entry)
    return {
        "passed": rep.passed,
        "tol": rep.tol,
        "faithful": rep.faithful,
        "max_residual": rep.max_residual,
        "r_comp0": rep.r_comp0,
        "r_comp1": rep.r_comp1,
        "parties": parties,
    }


def optimization_body(scenario: Scenario, result: OptimizationResult, config) -> dict:
    optimized = scenario.with_observables(result.observables(), result.params)
    optimized.independent_set = result.independent_set
    return {
        "S": result.S,
        "I": result.I,
        "J": result.J,
        "independent_set": party_set(scenario.topology, result.independent_set),
        "converged": result.converged,
        "best_restart": result.best_restart,
        "max_observed": result.max_observed,
        "min_anticommutator": result.min_anticommutator,
        "exact": {"I": float(result.I), "J": float(result.J), "S": float(result.S)},
        "restart_values": list(result.restart_values),
        "iterations": list(result.iterations),
        "config": {
            "restarts": config.restarts, "max_iter": config.max_iter, "tol": config.tol,
            "seed": config.seed, "obs_class": config.obs_class, "constraint": config.constraint,
            "fd_step": config.fd_step,
        },
        "scenario": scenario_to_document(optimized),
    }


def verify_body(results: Sequence[SuiteResult], seed: int) -> dict:
    return {
        "seed": seed,
        "passed": all(r.ok for r in results),
        "suites": [
            {
                "suite": r.name,
                "passed": r.ok,
                "trials": r.trials,
                "pass_count": r.passed,
                "fail_count": r.failed,
                "worst": r.worst,
                "bound": r.bound,
                "details": dict(r.details),
            }
            for r in results
        ],
    }


# ---------------------------------------------------------------- output


def to_json(doc: Mapping) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _flatten(node, prefix: str, out: list[tuple[str, str]]) -> None:
    if isinstance(node, Mapping):
        for k, v in node.items():
            _flatten(v, f"{prefix}.{k}" if prefix else str(k), out)
    elif isinstance(node, list) and node and all(isinstance(v, (int, float, str)) for v in node):
        out.append((prefix, ", ".join(json.dumps(v) for v in node)))
    elif isinstance(node, list):
        for i, v in enumerate(node):
            _flatten(v, f"{prefix}[{i}]", out)
    else:
        out.append((prefix, json.dumps(node)))


def to_table(doc: Mapping) -> str:
    """Two-column ``key  value`` rendering; the embedded scenario is omitted."""
    rows: list[tuple[str, str]] = []
    _flatten({k: v for k, v in doc.items() if k != "scenario"}, "", rows)
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)
