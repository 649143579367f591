"""Source states, the product network state, and expectation values.

The network state is the tensor product of one density matrix per source.
Expectations of local products are tensor-network contractions over the
source tensors.  For the optimiser each source is also split into its
weighted eigenvectors and the product ensemble is stored as a tensor
``psi`` of shape ``(R, *layout.dims)`` whose rows are ``sqrt(w_e) |v_e>``;
then ``Tr(rho X) = sum_e <psi_e| X |psi_e>`` for any global operator ``X``.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from math import prod

import numpy as np

from .algebra import DENSE_CAP, EmbeddedOperator, SubsystemLayout, embed, kron_all, random_dichotomic
from .errors import (
    BadDims,
    LayoutMismatch,
    MissingSource,
    NonCommutingFactors,
    NotAState,
    SingletNeedsQubits,
)
from .network import NetworkTopology, is_independent

STATE_TOL = 1e-12
ENSEMBLE_CUTOFF = 1e-14
FAITHFUL_THRESHOLD = 1e-6

SOURCE_KINDS = ("maximally_entangled", "singlet", "product", "separable_mixture", "werner", "explicit")

_NAMED_KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "+i": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "-i": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


def check_density(rho: np.ndarray, tol: float = STATE_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotAState(f"density matrix must be square, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > tol:
        raise NotAState("density matrix is not Hermitian")
    rho = (rho + rho.conj().T) / 2
    tr = np.trace(rho).real
    if abs(tr - 1) > tol:
        raise NotAState(f"trace is {tr:.15g}, expected 1")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < -tol:
        raise NotAState(f"minimum eigenvalue {lo:.3g} is negative")
    return rho


def local_state(spec, d: int) -> np.ndarray:
    """Single-site density matrix from a name ("0", "+", "mixed", ...), ket or matrix."""
    if isinstance(spec, str):
        if spec == "mixed":
            return np.eye(d, dtype=complex) / d
        if spec.isdigit() and int(spec) < d:
            ket = np.zeros(d, dtype=complex)
            ket[int(spec)] = 1
        elif spec in _NAMED_KETS and d == 2:
            ket = _NAMED_KETS[spec]
        else:
            raise BadDims(f"no local state named {spec!r} in dimension {d}")
        return np.outer(ket, ket.conj())
    arr = np.asarray(spec, dtype=complex)
    if arr.ndim == 1:
        if arr.shape[0] != d:
            raise BadDims(f"ket of length {arr.shape[0]} for dimension {d}")
        arr = arr / np.linalg.norm(arr)
        return np.outer(arr, arr.conj())
    if arr.shape != (d, d):
        raise BadDims(f"local state of shape {arr.shape} for dimension {d}")
    return check_density(arr)


def singlet() -> np.ndarray:
    psi = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
    return np.outer(psi, psi.conj())


def maximally_entangled(dims: Sequence[int]) -> np.ndarray:
    """Projector onto (1/√d) Σ_i |i…i⟩ (GHZ-type for more than two sites)."""
    d = dims[0]
    if any(x != d for x in dims):
        raise BadDims(f"maximally entangled state needs equal dims, got {list(dims)}")
    psi = np.zeros(prod(dims), dtype=complex)
    stride = sum(d**k for k in range(len(dims)))
    psi[[i * stride for i in range(d)]] = 1 / np.sqrt(d)
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class SourceState:
    source: str
    rho: np.ndarray
    kind: str
    dims: tuple[int, ...]
    params: dict = field(default_factory=dict)

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.rho)[0])


def make_source_state(kind: str, params: Mapping | None = None, dims: Sequence[int] = (2, 2),
                      source: str = "") -> SourceState:
    """Construct one of the named source states.

    ``params`` by kind: ``product`` → ``states`` (one local spec per site);
    ``separable_mixture`` → ``weights`` and ``components`` (each a list of
    local specs); ``werner`` → ``visibility``; ``explicit`` → ``matrix``.
    """
    params = dict(params or {})
    dims = tuple(int(d) for d in dims)
    D = prod(dims)
    if kind == "singlet":
        if dims != (2, 2):
            raise SingletNeedsQubits(f"singlet needs two qubits, got dims {dims}")
        rho = singlet()
    elif kind == "maximally_entangled":
        rho = maximally_entangled(dims)
    elif kind == "werner":
        v = float(params.get("visibility", params.get("v", 1.0)))
        if not 0 <= v <= 1:
            raise NotAState(f"visibility {v} outside [0, 1]")
        target = singlet() if dims == (2, 2) else maximally_entangled(dims)
        rho = v * target + (1 - v) * np.eye(D) / D
    elif kind == "product":
        states = params.get("states")
        if states is None or len(states) != len(dims):
            raise BadDims(f"product state needs one local state per site ({len(dims)})")
        rho = kron_all([local_state(s, d) for s, d in zip(states, dims)])
    elif kind == "separable_mixture":
        weights = np.asarray(params.get("weights", []), dtype=float)
        comps = params.get("components", [])
        if len(weights) != len(comps) or len(comps) == 0:
            raise NotAState("separable_mixture needs matching weights and components")
        if np.any(weights < 0) or abs(weights.sum() - 1) > STATE_TOL:
            raise NotAState(f"mixture weights {weights.tolist()} must be nonnegative and sum to 1")
        rho = np.zeros((D, D), dtype=complex)
        for w, comp in zip(weights, comps):
            if len(comp) != len(dims):
                raise BadDims(f"mixture component needs {len(dims)} local states")
            rho += w * kron_all([local_state(s, d) for s, d in zip(comp, dims)])
    elif kind == "explicit":
        rho = np.asarray(params.get("matrix"), dtype=complex)
        if rho.shape != (D, D):
            raise BadDims(f"explicit matrix of shape {rho.shape} for dims {dims}")
    else:
        raise NotAState(f"unknown source kind {kind!r}")
    return SourceState(source, check_density(rho), kind, dims, params)


def _ensemble(rho: np.ndarray) -> np.ndarray:
    """Rows sqrt(w) v for the eigenvectors of ``rho`` (weights below cutoff dropped)."""
    w, v = np.linalg.eigh(rho)
    keep = w > ENSEMBLE_CUTOFF
    return (v[:, keep] * np.sqrt(w[keep])).T


class NetworkState:
    """Product of source states, or a single global matrix (escape hatch).

    Expectations of products of local operators are computed by contracting
    the source tensors with the operator tensors (:func:`contract`), which
    never forms anything of global size.  The purified ensemble ``psi`` used
    by the optimiser is built on first access.
    """

    def __init__(self, layout: SubsystemLayout, sources: tuple[SourceState, ...],
                 psi: np.ndarray | None = None, global_rho: np.ndarray | None = None):
        self.layout = layout
        self.sources = tuple(sources)
        self.global_rho = global_rho
        self._psi = psi

    @property
    def psi(self) -> np.ndarray:
        if self._psi is None:
            self._psi = _product_ensemble(self.sources, self.layout)
        return self._psi

    @property
    def rank(self) -> int:
        return self.psi.shape[0]

    def density_matrix(self, cap: int = DENSE_CAP) -> np.ndarray:
        D = self.layout.dim
        if D > cap:
            raise LayoutMismatch(f"global dimension {D} exceeds dense cap {cap}")
        if self.global_rho is not None:
            return self.global_rho
        # sources occupy contiguous site blocks in layout order
        return kron_all([s.rho for s in self.sources])

    @classmethod
    def from_global(cls, rho: np.ndarray, layout: SubsystemLayout) -> NetworkState:
        """Escape hatch for a non-product global density matrix."""
        rho = check_density(rho)
        if rho.shape[0] != layout.dim:
            raise LayoutMismatch(f"global matrix of dim {rho.shape[0]} for layout dim {layout.dim}")
        vecs = _ensemble(rho)
        return cls(layout, (), vecs.reshape((len(vecs), *layout.dims)), rho)


def _product_ensemble(sources: Sequence[SourceState], layout: SubsystemLayout) -> np.ndarray:
    weights = np.ones(1)
    vecs = np.ones((1, 1), dtype=complex)
    for st in sources:
        ens = _ensemble(st.rho)
        w = np.einsum("ij,ij->i", ens, ens.conj()).real
        # product ensemble, pruned at the global cutoff
        weights = np.outer(weights, w).ravel()
        vecs = np.einsum("ra,sb->rsab", vecs, ens).reshape(len(weights), -1)
        keep = weights >= ENSEMBLE_CUTOFF
        weights, vecs = weights[keep], vecs[keep]
    return vecs.reshape((len(vecs), *layout.dims))


def assemble_network_state(sources: Sequence[SourceState] | Mapping[str, SourceState],
                           layout: SubsystemLayout) -> NetworkState:
    """Tensor product of the source states, ordered as in the layout."""
    if isinstance(sources, Mapping):
        by_name = dict(sources)
    else:
        by_name = {s.source: s for s in sources}
    order = list(dict.fromkeys(site.source for site in layout.sites))
    missing = [s for s in order if s not in by_name]
    if missing or len(by_name) != len(order):
        extra = sorted(set(by_name) - set(order))
        raise MissingSource(f"missing states for {missing}, unexpected {extra}")

    ordered = []
    for name in order:
        st = by_name[name]
        sites = layout.source_sites(name)
        dims = tuple(layout.sites[k].dim for k in sites)
        if st.dims != dims:
            raise LayoutMismatch(f"source {name!r}: state dims {st.dims}, layout dims {dims}")
        if list(sites) != list(range(sites[0], sites[0] + len(sites))):
            raise LayoutMismatch(f"source {name!r} sites are not contiguous")
        ordered.append(st)
    return NetworkState(layout, tuple(ordered))


def contract(state: NetworkState, ops: Mapping[str, np.ndarray]) -> complex:
    """τ(∏ ops) for one operator per listed party (identity elsewhere).

    Product states are contracted as a tensor network: every source density
    tensor carries a ket and a bra index per site, every party operator joins
    the bra indices of its sites to their ket indices, and unowned sites are
    traced out.
    """
    layout = state.layout
    if not state.sources:
        handles = [embed(a, p, layout) for p, a in ops.items()]
        return complex(np.vdot(state.psi, apply_all(state.psi, handles)))
    n = len(layout.sites)
    if 2 * n > 52:
        raise LayoutMismatch(f"{n} sites exceed the contraction index budget")
    ket = list(range(n))
    bra = list(range(n, 2 * n))
    scale = 1.0 + 0j
    operands = []
    owned = set()
    for p, a in ops.items():
        sites = layout.party_sites[p]
        a = np.asarray(a, dtype=complex)
        if not sites:
            scale *= a[0, 0]
            continue
        pd = layout.party_dims(p)
        if a.shape != (prod(pd), prod(pd)):
            raise LayoutMismatch(f"operator of shape {a.shape} for party {p!r} with dims {pd}")
        operands += [a.reshape(pd + pd), [bra[s] for s in sites] + [ket[s] for s in sites]]
        owned.update(sites)
    for s in range(n):
        if s not in owned:
            bra[s] = ket[s]
    for st in state.sources:
        sites = layout.source_sites(st.source)
        operands += [st.rho.reshape(st.dims + st.dims), [ket[s] for s in sites] + [bra[s] for s in sites]]
    return scale * complex(np.einsum(*operands, [], optimize=True))


def _as_handles(factors, layout: SubsystemLayout) -> list[EmbeddedOperator]:
    handles = list(factors)
    seen = set()
    for f in handles:
        if f.layout is not layout and f.layout != layout:
            raise LayoutMismatch(f"factor for {f.party!r} embedded in a different layout")
        if f.party in seen:
            raise NonCommutingFactors(f"two factors act on party {f.party!r}")
        seen.add(f.party)
    return handles


def apply_all(psi: np.ndarray, factors: Sequence[EmbeddedOperator]) -> np.ndarray:
    for f in factors:
        psi = f.apply(psi)
    return psi


def expectation(state: NetworkState, factors: Sequence[EmbeddedOperator]) -> float:
    """τ(∏ factors) for factors on pairwise distinct parties."""
    handles = _as_handles(factors, state.layout)
    val = contract(state, {h.party: h.local for h in handles})
    if abs(val.imag) > 1e-9:
        raise NonCommutingFactors(f"expectation has imaginary part {val.imag:.3g}")
    return float(val.real)


def local_expectation(state: NetworkState, party: str, op: np.ndarray) -> complex:
    """τ(op) for an arbitrary (not necessarily Hermitian) operator on one party."""
    return contract(state, {party: op})


def faithfulness(state: NetworkState) -> float:
    """Minimum eigenvalue of the global density matrix.

    For product states this is the product of the per-source minima, which
    is exact; only a supplied global matrix needs an eigensolve.
    """
    if state.global_rho is not None:
        return float(np.linalg.eigvalsh(state.global_rho)[0])
    return float(prod(max(0.0, s.min_eig()) for s in state.sources))


def is_faithful(state: NetworkState, threshold: float = FAITHFUL_THRESHOLD) -> bool:
    return faithfulness(state) >= threshold


@dataclass(frozen=True)
class FactorizationResult:
    residual: float
    structurally_dependent: bool


def factorization_check(state: NetworkState, topology: NetworkTopology, parties: Sequence[int],
                        n_samples: int = 100, seed: int = 0,
                        observables: Sequence[np.ndarray] | None = None) -> FactorizationResult:
    """max |τ(∏ A_r) − ∏ τ(A_r)| over sampled dichotomic observables.

    ``observables`` (one per listed party) replaces the random draw.  A set
    that is not independent in the topology is still checked but flagged.
    """
    names = [topology.parties[i] for i in parties]
    dependent = not is_independent(topology, parties)
    layout = state.layout
    rng = np.random.default_rng(seed)
    if observables is not None:
        draws = [list(observables)]
    else:
        draws = [
            [random_dichotomic(layout.party_dim(p), rng) for p in names]
            for _ in range(n_samples)
        ]
    worst = 0.0
    for ops in draws:
        handles = [embed(a, p, layout) for a, p in zip(ops, names)]
        joint = expectation(state, handles)
        singles = prod(expectation(state, [h]) for h in handles)
        worst = max(worst, abs(joint - singles))
    return FactorizationResult(worst, dependent)
