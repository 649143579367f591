"""Randomised property suites for the bounds on S.

Every trial draws its own generator from ``seed + trial`` so results do not
depend on how trials are scheduled.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algebra import SubsystemLayout, hermitian_basis, random_dichotomic
from .bell import TSIRELSON, Scenario, evaluate_IJ, functional_value, geo_mean_sine_check
from .network import NetworkTopology, chain, independence_report, star
from .optimize import canonical_optimal_scenario, random_pair_floor
from .state import SourceState, assemble_network_state, check_density

SUITES = ("tsirelson", "abelian", "separable", "continuity", "trig", "odd-dim")
BOUND_TOL = 1e-9


@dataclass
class SuiteResult:
    name: str
    trials: int
    passed: int
    worst: float
    bound: float
    details: dict = field(default_factory=dict)

    @property
    def failed(self) -> int:
        return self.trials - self.passed

    @property
    def ok(self) -> bool:
        return self.failed == 0


def default_topologies() -> list[NetworkTopology]:
    return [chain(3), chain(5), star(3)]


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = int(rng.integers(1, d + 1)) if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_product_sources(topology: NetworkTopology, rng: np.random.Generator) -> list[SourceState]:
    out = []
    for src in topology.sources:
        D = int(np.prod(src.dims))
        out.append(SourceState(src.name, check_density(random_density(D, rng)), "explicit", src.dims))
    return out


def random_separable_sources(topology: NetworkTopology, rng: np.random.Generator,
                             max_terms: int = 4) -> list[SourceState]:
    out = []
    for src in topology.sources:
        terms = int(rng.integers(1, max_terms + 1))
        weights = rng.dirichlet(np.ones(terms))
        D = int(np.prod(src.dims))
        rho = np.zeros((D, D), dtype=complex)
        for w in weights:
            local = np.eye(1, dtype=complex)
            for d in src.dims:
                local = np.kron(local, random_density(d, rng))
            rho += w * local
        out.append(SourceState(src.name, check_density(rho), "separable_mixture", src.dims))
    return out


def random_set(topology: NetworkTopology, rng: np.random.Generator) -> tuple[int, ...]:
    report = independence_report(topology)
    pool = [s for h in sorted(report.sets) for s in report.sets[h]]
    return pool[int(rng.integers(len(pool)))]


def random_observables(layout: SubsystemLayout, parties, rng) -> dict:
    return {p: (random_dichotomic(layout.party_dim(p), rng), random_dichotomic(layout.party_dim(p), rng))
            for p in parties}


def commuting_pair(d: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two ±1 observables diagonal in one shared random eigenbasis."""
    u = scipy.linalg.expm(1j * np.tensordot(rng.standard_normal(d * d), hermitian_basis(d), axes=1))
    s0, s1 = rng.choice([-1.0, 1.0], size=(2, d))
    return (u * s0) @ u.conj().T, (u * s1) @ u.conj().T


def random_scenario(topology: NetworkTopology, rng: np.random.Generator, *,
                    sources: Callable = random_product_sources, abelian: bool = False) -> Scenario:
    layout = SubsystemLayout.from_topology(topology)
    indep = random_set(topology, rng)
    state = assemble_network_state(sources(topology, rng), layout)
    obs = random_observables(layout, topology.parties, rng)
    if abelian:
        for k in indep:
            p = topology.parties[k]
            obs[p] = commuting_pair(layout.party_dim(p), rng)
    return Scenario(topology, layout, state, obs, indep)


def _kick(op: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    d = op.shape[0]
    u = scipy.linalg.expm(1j * eps * np.tensordot(rng.standard_normal(d * d), hermitian_basis(d), axes=1))
    return u @ op @ u.conj().T


def perturbed_canonical(topology: NetworkTopology, rng: np.random.Generator,
                        max_kick: float = 0.3, max_noise: float = 0.05) -> Scenario:
    """Canonical optimum with unitarily kicked observables and noisy singlets.

    Uniformly random scenarios sit far below both bounds; these sit close to
    the quantum maximum and so actually probe it.
    """
    sc = canonical_optimal_scenario(topology, random_set(topology, rng))
    eps = rng.uniform(0, max_kick)
    obs = {p: (_kick(a0, eps, rng), _kick(a1, eps, rng)) for p, (a0, a1) in sc.observables.items()}
    noise = rng.uniform(0, max_noise)
    sources = [
        SourceState(s.source, check_density((1 - noise) * s.rho + noise * random_density(4, rng)), "explicit", s.dims)
        for s in sc.state.sources
    ]
    state = assemble_network_state(sources, sc.layout)
    return Scenario(topology, sc.layout, state, obs, sc.independent_set)


def _scenario_suite(name: str, trials: int, seed: int, bound: float, near_optimal: bool = False,
                    **kwargs) -> SuiteResult:
    topologies = default_topologies()
    worst = -np.inf
    passed = 0
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        topo = topologies[t % len(topologies)]
        if near_optimal and (t // len(topologies)) % 2:
            sc = perturbed_canonical(topo, rng)
        else:
            sc = random_scenario(topo, rng, **kwargs)
        I, J = evaluate_IJ(sc, sc.independent_set)
        S = functional_value(I, J, len(sc.independent_set))
        worst = max(worst, S)
        passed += S <= bound + BOUND_TOL
    return SuiteResult(name, trials, int(passed), float(worst), float(bound), {"max_S": float(worst)})


def tsirelson_suite(trials: int = 10_000, seed: int = 0) -> SuiteResult:
    """Half uniformly random scenarios, half perturbed canonical optima."""
    return _scenario_suite("tsirelson", trials, seed, TSIRELSON, near_optimal=True)


def abelian_suite(trials: int = 1_000, seed: int = 0) -> SuiteResult:
    return _scenario_suite("abelian", trials, seed, 2.0, abelian=True)


def separable_suite(trials: int = 1_000, seed: int = 0) -> SuiteResult:
    return _scenario_suite("separable", trials, seed, 2.0, sources=random_separable_sources)


def trace_distance_norm(rho: np.ndarray, sigma: np.ndarray) -> float:
    """‖ρ − σ‖₁ (sum of absolute eigenvalues)."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))


def continuity_suite(trials: int = 1_000, seed: int = 0, constant: float = 4.0) -> SuiteResult:
    """|S_ρ − S_σ| ≤ k ‖ρ − σ‖₁^(1/h) at fixed observables.

    Half of the pairs are independent random states, half are small
    perturbations of one another so the bound is probed near zero distance.
    """
    topologies = [chain(3), chain(4), star(3)]
    worst_ratio = 0.0
    passed = 0
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        topo = topologies[t % len(topologies)]
        sc = random_scenario(topo, rng)
        h = len(sc.independent_set)
        other = random_product_sources(topo, rng)
        if t % 2:
            eps = 10.0 ** rng.uniform(-8, -1)
            other = [
                SourceState(s.source, check_density((1 - eps) * s.rho + eps * o.rho), "explicit", s.dims)
                for s, o in zip(sc.state.sources, other)
            ]
        state2 = assemble_network_state(other, sc.layout)
        sc2 = Scenario(topo, sc.layout, state2, sc.observables, sc.independent_set)
        s1 = functional_value(*evaluate_IJ(sc, sc.independent_set), h)
        s2 = functional_value(*evaluate_IJ(sc2, sc.independent_set), h)
        dist = trace_distance_norm(sc.state.density_matrix(), state2.density_matrix())
        allowed = constant * dist ** (1.0 / h)
        passed += abs(s1 - s2) <= allowed + BOUND_TOL
        if allowed > 0:
            worst_ratio = max(worst_ratio, abs(s1 - s2) / allowed)
    return SuiteResult("continuity", trials, int(passed), worst_ratio, 1.0, {"max_ratio": worst_ratio, "k": constant})


def trig_suite(trials: int = 10_000, seed: int = 0) -> SuiteResult:
    worst = -np.inf
    passed = 0
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        h = 2 + t % 3
        thetas = rng.uniform(0, np.pi, h)
        thetas = np.clip(thetas, 1e-12, np.pi - 1e-12)
        lhs, rhs = geo_mean_sine_check(thetas)
        worst = max(worst, lhs - rhs)
        passed += lhs <= rhs + 1e-12
    return SuiteResult("trig", trials, int(passed), float(worst), 0.0, {"max_lhs_minus_rhs": float(worst)})


def odd_dim_suite(trials: int = 10_000, seed: int = 0, d: int = 3) -> SuiteResult:
    floor = random_pair_floor(d, trials, seed)
    ok = floor > 0
    return SuiteResult("odd-dim", trials, trials if ok else 0, floor, 0.0, {"anticommutator_floor": floor, "d": d})


_RUNNERS = {
    "tsirelson": tsirelson_suite,
    "abelian": abelian_suite,
    "separable": separable_suite,
    "continuity": continuity_suite,
    "trig": trig_suite,
    "odd-dim": odd_dim_suite,
}


def run_suite(name: str, trials: int | None = None, seed: int = 0) -> list[SuiteResult]:
    names = SUITES if name == "all" else (name,)
    out = []
    for n in names:
        if n not in _RUNNERS:
            raise ValueError(f"unknown suite {n!r}")
        kwargs = {"seed": seed}
        if trials is not None:
            kwargs["trials"] = trials
        out.append(_RUNNERS[n](**kwargs))
    return out


__all__ = [
    "SUITES",
    "SuiteResult",
    "run_suite",
    "random_scenario",
    "random_density",
    "trace_distance_norm",
]
