"""Search for the supremum of S over measurement choices.

The search is a see-saw: parties are visited in turn and, with every other
party frozen, I and J are affine in the visited party's observables.  Each
party's two "environment" matrices are therefore contracted once per visit,
after which one objective evaluation costs a d×d matrix exponential.  The
observable generators are moved by finite-difference gradient ascent with
backtracking.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.linalg

from .algebra import (
    I2,
    X,
    Z,
    ObservableParams,
    SubsystemLayout,
    anticommutator,
    commutator,
    hermitian_basis,
    observable_from_params,
    op_norm,
    kron_all,
)
from .bell import (
    TSIRELSON,
    Scenario,
    check_independent_set,
    evaluate_IJ,
    functional_value,
    max_violation_certificate,
)
from .errors import EvenDimension, NoIndependentSet, UnsupportedTopology
from .network import NetworkTopology, independence_report, validate_topology
from .state import assemble_network_state, faithfulness, make_source_state

log = logging.getLogger(__name__)

CONSTRAINTS = ("none", "abelian_pairs", "fixed_state")
CLASSES = ("dichotomic", "contraction")


@dataclass
class OptimizeConfig:
    restarts: int = 32
    max_iter: int = 500
    tol: float = 1e-8
    seed: int = 0
    obs_class: str = "dichotomic"
    constraint: str = "none"
    fd_step: float = 1e-5
    signatures: dict[str, tuple[int, int]] | None = None
    inner_iter: int = 10
    initial_step: float = 0.1

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iter < 1 or self.inner_iter < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.tol <= 0 or self.fd_step <= 0 or self.initial_step <= 0:
            raise ValueError("tolerances and steps must be positive")
        if self.obs_class not in CLASSES:
            raise ValueError(f"obs_class must be one of {CLASSES}")
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"constraint must be one of {CONSTRAINTS}")


@dataclass
class RestartResult:
    index: int
    S: float
    I: float
    J: float
    independent_set: tuple[int, ...]
    params: dict[str, tuple[ObservableParams, ObservableParams]]
    sweeps: int
    converged: bool
    history: list[float] = field(default_factory=list)


@dataclass
class OptimizationResult:
    S: float
    I: float
    J: float
    independent_set: tuple[int, ...]
    params: dict[str, tuple[ObservableParams, ObservableParams]]
    restart_values: list[float]
    converged: bool
    iterations: list[int]
    best_restart: int
    max_observed: float
    min_anticommutator: float
    restarts: list[RestartResult] = field(repr=False, default_factory=list)

    def observables(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {p: (observable_from_params(a), observable_from_params(b)) for p, (a, b) in self.params.items()}


# --------------------------------------------------------------- helpers


def _spectrum_batch(p: ObservableParams, vecs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unitaries and spectra for a batch of parameter vectors (theta[+eigen])."""
    d = p.dim
    n = d * d
    gens = np.tensordot(vecs[:, :n], hermitian_basis(d), axes=1)
    us = scipy.linalg.expm(1j * gens)
    if p.eigen is not None:
        spec = np.sin(vecs[:, n:])
    else:
        spec = np.broadcast_to(p.spectrum(), (len(vecs), d))
    return us, spec


def _observables_batch(p: ObservableParams, vecs: np.ndarray) -> np.ndarray:
    us, spec = _spectrum_batch(p, vecs)
    ops = np.einsum("kab,kb,kcb->kac", us, spec, us.conj())
    return ops


def _vector(p: ObservableParams) -> np.ndarray:
    return p.theta if p.eigen is None else np.concatenate([p.theta, p.eigen])


def _with_vector(p: ObservableParams, v: np.ndarray) -> ObservableParams:
    n = p.dim * p.dim
    eigen = None if p.eigen is None else v[n:].copy()
    return ObservableParams(p.dim, p.signature, v[:n].copy(), eigen, p.pattern)


def _environment(psi: np.ndarray, layout: SubsystemLayout, party: str, factors) -> np.ndarray:
    """M with ⟨ψ|F_party · (other factors)|ψ⟩ = Σ F ∘ M."""
    phi = psi
    for other, op in factors:
        if other != party:
            phi = _apply(op, other, layout, phi)
    sites = layout.party_sites[party]
    paxes = [1 + s for s in sites]
    oaxes = [a for a in range(psi.ndim) if a not in paxes]
    env = np.tensordot(psi.conj(), phi, axes=(oaxes, oaxes))
    d = layout.party_dim(party)
    return env.reshape(d, d)


def _apply(op: np.ndarray, party: str, layout: SubsystemLayout, psi: np.ndarray) -> np.ndarray:
    sites = layout.party_sites[party]
    k = len(sites)
    if k == 0:
        return op[0, 0] * psi
    pdims = layout.party_dims(party)
    axes = [1 + s for s in sites]
    out = np.tensordot(op.reshape(pdims + pdims), psi, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def _ascend(objective, v: np.ndarray, f: float, cfg: OptimizeConfig, step: float):
    """Finite-difference gradient ascent with backtracking; never decreases f."""
    n = len(v)
    eye = np.eye(n) * cfg.fd_step
    for _ in range(cfg.inner_iter):
        probes = objective(v + eye)
        grad = (probes - f) / cfg.fd_step
        norm = np.linalg.norm(grad)
        if not np.isfinite(norm) or norm < 1e-12:
            break
        direction = grad / norm
        improved = False
        while step > 1e-10:
            cand = v + step * direction
            fc = float(objective(cand[None, :])[0])
            if fc > f:
                gain = fc - f
                v, f, improved = cand, fc, True
                break
            step /= 2
        if not improved:
            step = cfg.initial_step
            break
        step = min(2 * step, 1.0)
        if gain < 0.1 * cfg.tol:
            break
    return v, f, step


# ------------------------------------------------------------- see-saw


class _SeeSaw:
    def __init__(self, scenario: Scenario, indep: tuple[int, ...], cfg: OptimizeConfig):
        self.sc = scenario
        self.indep = indep
        self.cfg = cfg
        self.h = len(indep)
        self.layout = scenario.layout
        self.psi = scenario.state.psi
        self.parties = scenario.topology.parties
        self.chosen = {scenario.topology.parties[k] for k in indep}
        self.abelian = {p for p in self.chosen} if cfg.constraint == "abelian_pairs" else set()
        self.max_observed = -np.inf

    # coefficients of (A0, A1) in the I and J factors of a party
    def _coeffs(self, party: str):
        if party in self.chosen:
            return (1.0, 1.0), (1.0, -1.0)
        return (1.0, 0.0), (0.0, 1.0)

    def _signature(self, party: str) -> tuple[int, int]:
        d = self.layout.party_dim(party)
        if self.cfg.signatures and party in self.cfg.signatures:
            return tuple(self.cfg.signatures[party])
        return ((d + 1) // 2, d // 2)

    def initial_params(self, rng: np.random.Generator):
        params = {}
        for party in self.parties:
            d = self.layout.party_dim(party)
            if party in self.abelian:
                theta = rng.standard_normal(d * d)
                pair = []
                for _ in range(2):
                    pattern = rng.choice([-1.0, 1.0], size=d)
                    sig = (int((pattern > 0).sum()), int((pattern < 0).sum()))
                    pair.append(ObservableParams(d, sig, theta.copy(), pattern=pattern))
                params[party] = tuple(pair)
                continue
            pair = []
            for _ in range(2):
                theta = rng.standard_normal(d * d)
                if self.cfg.obs_class == "contraction":
                    eigen = rng.uniform(-np.pi / 2, np.pi / 2, d)
                    pair.append(ObservableParams(d, (d, 0), theta, eigen))
                else:
                    pair.append(ObservableParams(d, self._signature(party), theta))
            params[party] = tuple(pair)
        return params

    def _matrices(self, params):
        return {p: (observable_from_params(a), observable_from_params(b)) for p, (a, b) in params.items()}

    def _factors(self, mats):
        fi, fj = [], []
        for p in self.parties:
            (ci, cj), (a0, a1) = self._coeffs(p), mats[p]
            fi.append((p, ci[0] * a0 + ci[1] * a1))
            fj.append((p, cj[0] * a0 + cj[1] * a1))
        return fi, fj

    def _value(self, I: np.ndarray, J: np.ndarray) -> np.ndarray:
        s = np.abs(I) ** (1.0 / self.h) + np.abs(J) ** (1.0 / self.h)
        self.max_observed = max(self.max_observed, float(np.max(s)))
        return s

    def visit(self, party: str, params, mats, step: float):
        fi, fj = self._factors(mats)
        env_i = _environment(self.psi, self.layout, party, fi)
        env_j = _environment(self.psi, self.layout, party, fj)
        ci, cj = self._coeffs(party)

        def linear(ops, env):
            return np.einsum("kab,ab->k", ops, env).real

        pair = list(params[party])
        a = list(mats[party])
        if party in self.abelian:
            return self._visit_abelian(party, pair, env_i, env_j, ci, cj, step, params, mats)

        f = None
        for x in (0, 1):
            other = a[1 - x]
            base_i = ci[1 - x] * float(np.sum(other * env_i).real)
            base_j = cj[1 - x] * float(np.sum(other * env_j).real)
            p = pair[x]

            def objective(vecs, p=p, x=x, base_i=base_i, base_j=base_j):
                ops = _observables_batch(p, vecs)
                I = base_i + ci[x] * linear(ops, env_i)
                J = base_j + cj[x] * linear(ops, env_j)
                return self._value(I, J)

            v = _vector(p)
            f0 = float(objective(v[None, :])[0])
            v, f, step = _ascend(objective, v, f0, self.cfg, step)
            pair[x] = _with_vector(p, v)
            a[x] = observable_from_params(pair[x])
        params[party] = tuple(pair)
        mats[party] = tuple(a)
        return f, step

    def _visit_abelian(self, party, pair, env_i, env_j, ci, cj, step, params, mats):
        d = pair[0].dim
        patterns = [pair[0].pattern, pair[1].pattern]

        def value_for(us, s0, s1):
            a0 = np.einsum("kab,b,kcb->kac", us, s0, us.conj())
            a1 = np.einsum("kab,b,kcb->kac", us, s1, us.conj())
            I = np.einsum("kab,ab->k", ci[0] * a0 + ci[1] * a1, env_i).real
            J = np.einsum("kab,ab->k", cj[0] * a0 + cj[1] * a1, env_j).real
            return self._value(I, J)

        def objective(vecs):
            us = scipy.linalg.expm(1j * np.tensordot(vecs, hermitian_basis(d), axes=1))
            return value_for(us, patterns[0], patterns[1])

        theta = pair[0].theta
        f = float(objective(theta[None, :])[0])
        theta, f, step = _ascend(objective, theta, f, self.cfg, step)

        # discrete pass over the ±1 diagonal patterns in the shared eigenbasis
        u = scipy.linalg.expm(1j * np.tensordot(theta, hermitian_basis(d), axes=1))[None]
        candidates = [np.array(s, dtype=float) for s in product((1.0, -1.0), repeat=d)]
        for x in (0, 1):
            for cand in candidates:
                trial = list(patterns)
                trial[x] = cand
                val = float(value_for(u, trial[0], trial[1])[0])
                if val > f:
                    f, patterns = val, trial
        new = []
        for s in patterns:
            sig = (int((s > 0).sum()), int((s < 0).sum()))
            new.append(ObservableParams(d, sig, theta.copy(), pattern=s.copy()))
        params[party] = tuple(new)
        mats[party] = tuple(observable_from_params(q) for q in new)
        return f, step

    def run(self, index: int, seed: int) -> RestartResult:
        rng = np.random.default_rng(seed)
        params = self.initial_params(rng)
        mats = self._matrices(params)
        steps = {p: self.cfg.initial_step for p in self.parties}
        history = []
        prev = -np.inf
        converged = False
        sweeps = 0
        for sweeps in range(1, self.cfg.max_iter + 1):
            cur = prev
            for party in self.parties:
                cur, steps[party] = self.visit(party, params, mats, steps[party])
            history.append(cur)
            if cur - prev < self.cfg.tol:
                converged = True
                break
            prev = cur
        I, J = evaluate_IJ(self.sc.with_observables(mats), self.indep)
        S = functional_value(I, J, self.h)
        return RestartResult(index, S, I, J, self.indep, params, sweeps, converged, history)


def _identity_params(scenario: Scenario) -> dict[str, tuple[ObservableParams, ObservableParams]]:
    out = {}
    for p in scenario.topology.parties:
        d = scenario.layout.party_dim(p)
        ident = ObservableParams(d, (d, 0), np.zeros(d * d))
        out[p] = (ident, ObservableParams(d, (d, 0), np.zeros(d * d)))
    return out


def optimize_S(scenario: Scenario, config: OptimizeConfig | None = None) -> OptimizationResult:
    """Multi-start see-saw maximisation of S over the parties' observables.

    Observables already present in ``scenario`` are ignored.  Restart ``r``
    uses seed ``config.seed + r``.  The all-identity strategy (S = 2) is
    always kept as a fallback candidate.
    """
    cfg = config or OptimizeConfig()
    report = independence_report(scenario.topology)
    if report.no_independent_pair:
        raise NoIndependentSet("network has no pair of independent parties")
    if scenario.independent_set is not None:
        sets = [check_independent_set(scenario.topology, scenario.independent_set)]
    else:
        sets = report.sets[report.h_max]

    runs: list[RestartResult] = []
    max_observed = -np.inf
    for indep in sets:
        seesaw = _SeeSaw(scenario, tuple(indep), cfg)
        for r in range(cfg.restarts):
            res = seesaw.run(len(runs), cfg.seed + r)
            log.debug("restart %d set %s: S=%.12f after %d sweeps", r, indep, res.S, res.sweeps)
            runs.append(res)
        max_observed = max(max_observed, seesaw.max_observed)

    best = max(runs, key=lambda r: (r.S, -r.index))
    ident = _identity_params(scenario)
    base_mats = {p: (observable_from_params(a), observable_from_params(b)) for p, (a, b) in ident.items()}
    bI, bJ = evaluate_IJ(scenario.with_observables(base_mats), sets[0])
    base_S = functional_value(bI, bJ, len(sets[0]))
    if base_S > best.S:
        best = RestartResult(-1, base_S, bI, bJ, tuple(sets[0]), ident, 0, True)

    min_anti = np.inf
    for run in runs:
        for k in run.independent_set:
            a, b = run.params[scenario.topology.parties[k]]
            min_anti = min(min_anti, op_norm(anticommutator(observable_from_params(a), observable_from_params(b))))

    return OptimizationResult(
        S=best.S, I=best.I, J=best.J,
        independent_set=best.independent_set,
        params=best.params,
        restart_values=[r.S for r in runs],
        converged=all(r.converged for r in runs),
        iterations=[r.sweeps for r in runs],
        best_restart=best.index,
        max_observed=max(max_observed, best.S),
        min_anticommutator=float(min_anti),
        restarts=runs,
    )


# ------------------------------------------------------ canonical scenario


def canonical_optimal_scenario(topology: NetworkTopology, independent_set) -> Scenario:
    """Singlet sources with anticommuting qubit pairs at the chosen parties.

    A chosen party with k sites measures (P ± Q)/√2 where P = Z^⊗k, Q = X^⊗k
    for odd k; for even k (where those would commute) P and Q act on the
    party's first site only.  Every other party measures, site by site, the
    operator its partner uses in the I term (input 0) or the J term
    (input 1), or Z / X when the partner is also unchosen.
    """
    for src in topology.sources:
        if src.arity != 2 or src.dims != (2, 2):
            raise UnsupportedTopology(f"source {src.name!r} is not a bipartite qubit source")
    indep = check_independent_set(topology, independent_set)
    layout = SubsystemLayout.from_topology(topology)
    chosen = {topology.parties[k] for k in indep}

    site_ops: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    observables = {}
    for party in chosen:
        sites = layout.party_sites[party]
        k = len(sites)
        if k == 0:
            raise UnsupportedTopology(f"party {party!r} receives no source")
        if k % 2:
            ops = [(Z, X)] * k
        else:
            ops = [(Z, X)] + [(I2, I2)] * (k - 1)
        for s, pair in zip(sites, ops):
            site_ops[s] = pair
        P = kron_all([o[0] for o in ops])
        Q = kron_all([o[1] for o in ops])
        observables[party] = ((P + Q) / np.sqrt(2), (P - Q) / np.sqrt(2))

    for party in topology.parties:
        if party in chosen:
            continue
        zs, xs = [], []
        for s in layout.party_sites[party]:
            source = layout.sites[s].source
            partner = next(t for t in layout.source_sites(source) if t != s)
            zo, xo = site_ops.get(partner, (Z, X))
            zs.append(zo)
            xs.append(xo)
        observables[party] = (kron_all(zs), kron_all(xs))

    states = [make_source_state("singlet", dims=(2, 2), source=s.name) for s in topology.sources]
    state = assemble_network_state(states, layout)
    return Scenario(topology, layout, state, observables, indep).validate()


# ---------------------------------------------------- perturbation sweep


@dataclass(frozen=True)
class SweepPoint:
    delta: float
    S: float
    max_residual: float
    r_anti: float


def perturbation_sweep(scenario: Scenario, deltas, party: int | None = None,
                       probes: int = 16, seed: int = 0) -> list[SweepPoint]:
    """Rotate A_{i,1} of one chosen party by δ inside the plane of its pair.

    The rotation generator is (i/2)[A0, A1]; for the canonical qubit pair
    this turns (Z−X)/√2 towards Z, reaching it at δ = π/4.
    """
    indep = check_independent_set(scenario.topology, scenario.independent_set)
    k = indep[0] if party is None else party
    name = scenario.topology.parties[k]
    a0, a1 = (np.asarray(a, dtype=complex) for a in scenario.observables[name])
    gen = 0.5j * commutator(a0, a1)
    points = []
    for delta in deltas:
        u = scipy.linalg.expm(-0.5j * delta * gen)
        rotated = u @ a1 @ u.conj().T
        rotated = (rotated + rotated.conj().T) / 2
        obs = dict(scenario.observables)
        obs[name] = (a0, rotated)
        sc = scenario.with_observables(obs)
        I, J = evaluate_IJ(sc, indep)
        cert = max_violation_certificate(sc, probes=probes, seed=seed, indep=indep)
        r_anti = next(p.r_anti for p in cert.parties if p.party == name)
        points.append(SweepPoint(float(delta), functional_value(I, J, len(indep)), cert.max_residual, r_anti))
    return points


# ----------------------------------------------------- odd dimensions


@dataclass
class OddDimensionResult:
    d: int
    best_S: float
    gap: float
    residual_floor: float
    min_eig: float
    result: OptimizationResult


def faithful_scenario(topology: NetworkTopology, d: int, visibility: float) -> Scenario:
    """All local dimensions set to ``d``; werner-type (isotropic) sources."""
    raw = {
        "parties": list(topology.parties),
        "sources": [
            {"name": s.name, "parties": list(s.parties), "dims": [d] * s.arity} for s in topology.sources
        ],
    }
    topo = validate_topology(raw)
    layout = SubsystemLayout.from_topology(topo)
    states = [
        make_source_state("werner", {"visibility": visibility}, s.dims, source=s.name) for s in topo.sources
    ]
    state = assemble_network_state(states, layout)
    return Scenario(topo, layout, state, {})


def odd_dimension_gap(topology: NetworkTopology, d: int, config: OptimizeConfig | None = None,
                      visibility: float = 0.99) -> OddDimensionResult:
    """Optimise S with odd local dimension ``d`` and a full-rank state.

    The residual floor is the smallest ‖{A0, A1}‖ over the chosen parties of
    every restart's final observables.
    """
    if d < 3 or d % 2 == 0:
        raise EvenDimension(f"local dimension must be odd and >= 3, got {d}")
    sc = faithful_scenario(topology, d, visibility)
    res = optimize_S(sc, config)
    return OddDimensionResult(d, res.S, TSIRELSON - res.S, res.min_anticommutator,
                              faithfulness(sc.state), res)


def random_pair_floor(d: int, samples: int, seed: int = 0) -> float:
    """min ‖{A, B}‖ over random ±1 pairs in dimension d (random signatures)."""
    rng = np.random.default_rng(seed)
    floor = np.inf
    basis = hermitian_basis(d)
    for _ in range(samples):
        ops = []
        for _ in range(2):
            plus = int(rng.integers(0, d + 1))
            spec = np.concatenate([np.ones(plus), -np.ones(d - plus)])
            u = scipy.linalg.expm(1j * np.tensordot(rng.standard_normal(d * d), basis, axes=1))
            ops.append((u * spec) @ u.conj().T)
        floor = min(floor, op_norm(ops[0] @ ops[1] + ops[1] @ ops[0]))
    return float(floor)
