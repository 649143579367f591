"""The network Bell functional S = |I|^(1/h) + |J|^(1/h) and related checks.

``I`` multiplies ``A0 + A1`` over the chosen independent parties with ``A0``
of every other party; ``J`` uses ``A0 − A1`` and ``A1``.  Factors are applied
one party at a time to the state ensemble, so the 2^h sign expansion is
never formed.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from itertools import product
from math import prod

import numpy as np

from .algebra import (
    DEFAULT_TOL,
    AlgebraInfo,
    SubsystemLayout,
    anticommutator,
    classify_observable,
    commutator,
    generated_algebra_dim,
    op_norm,
    random_dichotomic,
)
from .errors import (
    InvalidIndependentSet,
    LayoutMismatch,
    NoIndependentSet,
    NotCommuting,
    NotHermitian,
    ThetaOutOfRange,
    ValidationError,
)
from .network import NetworkTopology, independence_report, is_independent
from .state import NetworkState, contract, is_faithful, local_expectation

TSIRELSON = 2 * np.sqrt(2)
VIOLATION_TOL = 1e-9
MAXIMAL_TOL = 1e-8


@dataclass(frozen=True)
class Tolerances:
    algebra: float = DEFAULT_TOL
    classify: float = DEFAULT_TOL
    bound: float = VIOLATION_TOL


@dataclass
class Scenario:
    """Everything the functional needs.

    ``observables`` maps each party name to its pair ``(A0, A1)`` of local
    matrices.  ``independent_set`` holds 0-based party indices, or ``None``
    to scan every set of the largest size.  ``params`` optionally records
    the :class:`ObservableParams` behind some parties' matrices.
    """

    topology: NetworkTopology
    layout: SubsystemLayout
    state: NetworkState
    observables: dict[str, tuple[np.ndarray, np.ndarray]]
    independent_set: tuple[int, ...] | None = None
    obs_class: str = "dichotomic"
    tol: Tolerances = field(default_factory=Tolerances)
    params: dict = field(default_factory=dict, repr=False)

    def validate(self) -> Scenario:
        if self.state.layout != self.layout:
            raise LayoutMismatch("state layout differs from scenario layout")
        for party in self.topology.parties:
            pair = self.observables.get(party)
            if pair is None or len(pair) != 2:
                raise ValidationError(f"party {party!r} needs observables for inputs 0 and 1")
            d = self.layout.party_dim(party)
            for x, a in enumerate(pair):
                a = np.asarray(a)
                if a.shape != (d, d):
                    raise ValidationError(
                        f"party {party!r} input {x}: matrix shape {a.shape}, local dim {d}"
                    )
                try:
                    c = classify_observable(a, self.tol.classify)
                except NotHermitian as exc:
                    raise ValidationError(f"party {party!r} input {x}: {exc}") from None
                if self.obs_class == "dichotomic" and c.kind != "dichotomic":
                    raise ValidationError(
                        f"party {party!r} input {x}: not dichotomic (‖A²−I‖ = {c.dichotomic:.3g})"
                    )
                if self.obs_class == "contraction" and c.kind == "hermitian":
                    raise ValidationError(f"party {party!r} input {x}: spectrum leaves [-1, 1]")
        if self.independent_set is not None:
            check_independent_set(self.topology, self.independent_set)
        return self

    def with_observables(self, observables: Mapping[str, tuple[np.ndarray, np.ndarray]],
                         params: Mapping | None = None) -> Scenario:
        return Scenario(self.topology, self.layout, self.state, dict(observables),
                        self.independent_set, self.obs_class, self.tol, dict(params or {}))

    def candidate_sets(self) -> list[tuple[int, ...]]:
        if self.independent_set is not None:
            return [tuple(self.independent_set)]
        report = independence_report(self.topology)
        if report.no_independent_pair:
            raise NoIndependentSet("network has no pair of independent parties")
        return report.sets[report.h_max]


def check_independent_set(topology: NetworkTopology, parties: Sequence[int]) -> tuple[int, ...]:
    members = tuple(sorted(int(i) for i in parties))
    if len(members) < 2 or len(set(members)) != len(members):
        raise InvalidIndependentSet(f"need at least two distinct parties, got {list(parties)}")
    if any(not 0 <= i < topology.m for i in members):
        raise InvalidIndependentSet(f"party index out of range in {list(parties)}")
    if not is_independent(topology, members):
        names = [topology.parties[i] for i in members]
        raise InvalidIndependentSet(f"parties {names} share a source")
    return members


# ---------------------------------------------------------------- S value


@dataclass(frozen=True)
class BellReport:
    I: float
    J: float
    S: float
    h: int
    independent_set: tuple[int, ...]
    classical_bound_satisfied: bool
    tsirelson_satisfied: bool
    violation: bool
    maximal: bool


def functional_value(I: float, J: float, h: int) -> float:
    # |0|^(1/h) taken as 0
    return abs(I) ** (1.0 / h) + abs(J) ** (1.0 / h)


def factor_pairs(scenario: Scenario, indep: Sequence[int]):
    """Per party, the local factors entering I and J."""
    chosen = set(indep)
    out = {}
    for k, party in enumerate(scenario.topology.parties):
        a0, a1 = (np.asarray(a, dtype=complex) for a in scenario.observables[party])
        if k in chosen:
            out[party] = (a0 + a1, a0 - a1)
        else:
            out[party] = (a0, a1)
    return out


def evaluate_IJ(scenario: Scenario, indep: Sequence[int]) -> tuple[float, float]:
    factors = factor_pairs(scenario, indep)
    I = contract(scenario.state, {p: f[0] for p, f in factors.items()})
    J = contract(scenario.state, {p: f[1] for p, f in factors.items()})
    return float(I.real), float(J.real)


def _report(I: float, J: float, indep: tuple[int, ...], tol: float) -> BellReport:
    h = len(indep)
    S = functional_value(I, J, h)
    return BellReport(
        I=I, J=J, S=S, h=h, independent_set=indep,
        classical_bound_satisfied=bool(S <= 2 + tol),
        tsirelson_satisfied=bool(S <= TSIRELSON + tol),
        violation=bool(S > 2 + VIOLATION_TOL),
        maximal=bool(S >= TSIRELSON - MAXIMAL_TOL),
    )


def evaluate_S(scenario: Scenario) -> BellReport:
    """Bell report for the scenario's set, or the best set of the largest size.

    Ties between sets go to the lexicographically first.
    """
    best = None
    for indep in scenario.candidate_sets():
        indep = check_independent_set(scenario.topology, indep)
        rep = _report(*evaluate_IJ(scenario, indep), indep, scenario.tol.bound)
        if best is None or rep.S > best.S:
            best = rep
    return best


# ------------------------------------------------------------ correlations


def correlation(scenario: Scenario, inputs: Sequence[int]) -> np.ndarray:
    """p(a|x) as an array of shape (2,)*m, indexed by the outcome bits."""
    parties = scenario.topology.parties
    if len(inputs) != len(parties):
        raise ValidationError(f"need {len(parties)} inputs, got {len(inputs)}")
    table = np.zeros((2,) * len(parties))
    projectors = []
    for party, x in zip(parties, inputs):
        a = np.asarray(scenario.observables[party][x], dtype=complex)
        ident = np.eye(a.shape[0])
        projectors.append(((ident + a) / 2, (ident - a) / 2))
    for bits in product((0, 1), repeat=len(parties)):
        ops = {p: projectors[k][b] for k, (p, b) in enumerate(zip(parties, bits))}
        table[bits] = contract(scenario.state, ops).real
    return table


def parity_from_table(table: np.ndarray) -> float:
    m = table.ndim
    total = 0.0
    for bits in product((0, 1), repeat=m):
        total += (-1) ** sum(bits) * table[bits]
    return float(total)


# ------------------------------------------------------------ certificate


@dataclass
class PartyCertificate:
    party: str
    r_sq0: float
    r_sq1: float
    r_anti: float
    algebra: AlgebraInfo
    op_sq0: float | None = None
    op_sq1: float | None = None
    op_anti: float | None = None


@dataclass
class CertificateReport:
    parties: list[PartyCertificate]
    r_comp0: float
    r_comp1: float
    faithful: bool
    tol: float
    passed: bool

    @property
    def max_residual(self) -> float:
        vals = [self.r_comp0, self.r_comp1]
        for p in self.parties:
            vals += [p.r_sq0, p.r_sq1, p.r_anti]
        return max(vals)


def _complement_residual(scenario, complement, x, probes) -> float:
    """max over probes P of |τ(∏ A_j² P) − τ(P)| for the complement parties."""
    squares = {}
    for party in complement:
        a = np.asarray(scenario.observables[party][x], dtype=complex)
        squares[party] = a @ a
    worst = 0.0
    for probe in probes:
        base = contract(scenario.state, probe)
        ops = {p: sq @ probe.get(p, np.eye(sq.shape[0])) for p, sq in squares.items()}
        sq = contract(scenario.state, ops)
        worst = max(worst, abs(sq - base))
    return float(worst)


def max_violation_certificate(scenario: Scenario, probes: int = 64, seed: int = 0,
                              tol: float = 1e-10, indep: Sequence[int] | None = None) -> CertificateReport:
    """Residuals of the state-level maximal-violation conditions.

    Probe operators are the identity plus ``probes`` seeded random local
    observables (for the complement: random products over the non-chosen
    parties).  When the state is faithful, operator-level residuals are
    reported as well.
    """
    topo, layout, state = scenario.topology, scenario.layout, scenario.state
    if indep is None:
        indep = evaluate_S(scenario).independent_set
    indep = check_independent_set(topo, indep)
    rng = np.random.default_rng(seed)
    faithful = is_faithful(state)

    party_reports = []
    for k in indep:
        party = topo.parties[k]
        a0, a1 = (np.asarray(a, dtype=complex) for a in scenario.observables[party])
        d = a0.shape[0]
        ident = np.eye(d)
        local_probes = [ident] + [random_dichotomic(d, rng) for _ in range(probes)]
        anti = anticommutator(a0, a1)
        r0 = r1 = ra = 0.0
        for p in local_probes:
            base = local_expectation(state, party, p)
            r0 = max(r0, abs(local_expectation(state, party, a0 @ a0 @ p) - base))
            r1 = max(r1, abs(local_expectation(state, party, a1 @ a1 @ p) - base))
            ra = max(ra, abs(local_expectation(state, party, anti @ p)))
        rep = PartyCertificate(party, r0, r1, ra, generated_algebra_dim(a0, a1, max(tol, 1e-12)))
        if faithful:
            rep.op_sq0 = op_norm(a0 @ a0 - ident)
            rep.op_sq1 = op_norm(a1 @ a1 - ident)
            rep.op_anti = op_norm(anti)
        party_reports.append(rep)

    complement = [p for k, p in enumerate(topo.parties) if k not in indep]
    probe_sets = [{}]
    for _ in range(probes if complement else 0):
        probe_sets.append({p: random_dichotomic(layout.party_dim(p), rng) for p in complement})
    rc0 = _complement_residual(scenario, complement, 0, probe_sets)
    rc1 = _complement_residual(scenario, complement, 1, probe_sets)

    residuals_ok = all(max(p.r_sq0, p.r_sq1, p.r_anti) <= tol for p in party_reports)
    passed = bool(residuals_ok and rc0 <= tol and rc1 <= tol and all(p.algebra.m2 for p in party_reports))
    return CertificateReport(party_reports, rc0, rc1, faithful, tol, passed)


# ------------------------------------------------------------ abelian case


def abelian_effects(a0: np.ndarray, a1: np.ndarray, tol: float = DEFAULT_TOL) -> dict[str, np.ndarray]:
    """The four effects (1 + e0 A0)(1 + e1 A1)/4 of a commuting pair, keyed "++", "+-", ..."""
    a0, a1 = np.asarray(a0, dtype=complex), np.asarray(a1, dtype=complex)
    if op_norm(commutator(a0, a1)) > tol:
        raise NotCommuting("observables do not commute")
    for a in (a0, a1):
        c = classify_observable(a, tol)
        if c.kind == "hermitian":
            raise NotCommuting("abelian decomposition needs contractions")
    ident = np.eye(a0.shape[0])
    out = {}
    for e0, e1 in product((1, -1), repeat=2):
        key = ("+" if e0 > 0 else "-") + ("+" if e1 > 0 else "-")
        eff = (ident + e0 * a0) @ (ident + e1 * a1) / 4
        out[key] = (eff + eff.conj().T) / 2
    return out


# --------------------------------------------------------- sine inequality


def geo_mean_sine_check(thetas: Sequence[float]) -> tuple[float, float]:
    """((∏ sin θ_i)^(1/h), sin(mean θ)) for angles in (0, π)."""
    th = np.asarray(thetas, dtype=float)
    if th.ndim != 1 or len(th) < 2:
        raise ThetaOutOfRange("need at least two angles")
    if np.any(th <= 0) or np.any(th >= np.pi):
        raise ThetaOutOfRange("angles must lie strictly inside (0, π)")
    h = len(th)
    lhs = float(prod(np.sin(th)) ** (1.0 / h))
    rhs = float(np.sin(th.mean()))
    return lhs, rhs
