"""Finite-dimensional operator core.

Local operators are dense ``numpy`` matrices.  Operators embedded in the
global network space are never materialised by default: an
:class:`EmbeddedOperator` acts on state tensors by contracting only the axes
that belong to its party, so parties with disjoint sites commute exactly.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache
from math import prod

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotHermitian, SameParty
from .network import NetworkTopology

DEFAULT_TOL = 1e-9
DENSE_CAP = 4096
SPECTRAL_NORM_MAX_DIM = 64

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

PAULI = {
    "I": I2,
    "X": X,
    "Y": Y,
    "Z": Z,
    "(Z+X)/sqrt2": (Z + X) / np.sqrt(2),
    "(Z-X)/sqrt2": (Z - X) / np.sqrt(2),
}


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def tensor_power(op: np.ndarray, k: int) -> np.ndarray:
    return kron_all([op] * k)


def op_norm(a: np.ndarray) -> float:
    """Spectral norm for small matrices, Frobenius (an upper bound) above."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    if a.shape[0] <= SPECTRAL_NORM_MAX_DIM:
        return float(np.linalg.norm(a, 2))
    return float(np.linalg.norm(a, "fro"))


def _check_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch("matrix has non-finite entries")
    return a


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _check_square(a), _check_square(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _check_square(a), _check_square(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return a @ b + b @ a


# ------------------------------------------------------------ classification


@dataclass(frozen=True)
class Classification:
    kind: str  # "dichotomic" | "contraction" | "hermitian"
    hermiticity: float
    dichotomic: float
    contraction_margin: float


def classify_observable(op: np.ndarray, tol: float = DEFAULT_TOL) -> Classification:
    """Residuals ‖A−A†‖, ‖A²−I‖ and max(0, max|eig|−1), plus a class tag.

    Raises :class:`NotHermitian` when the Hermiticity residual exceeds ``tol``.
    """
    a = _check_square(op)
    herm = op_norm(a - a.conj().T)
    if herm > tol:
        raise NotHermitian(f"‖A − A†‖ = {herm:.3g} > {tol:.3g}")
    a = (a + a.conj().T) / 2
    dich = op_norm(a @ a - np.eye(a.shape[0]))
    eig = np.linalg.eigvalsh(a)
    margin = max(0.0, float(np.max(np.abs(eig))) - 1.0) if eig.size else 0.0
    if dich <= tol:
        kind = "dichotomic"
    elif margin <= tol:
        kind = "contraction"
    else:
        kind = "hermitian"
    return Classification(kind, herm, dich, margin)


@dataclass(frozen=True)
class LocalObservable:
    party: str
    x: int
    matrix: np.ndarray
    kind: str = "dichotomic"

    def __post_init__(self):
        if self.x not in (0, 1):
            raise ValueError(f"input must be 0 or 1, got {self.x}")


# ---------------------------------------------------------------- layout


@dataclass(frozen=True)
class Site:
    source: str
    party: str
    dim: int


@dataclass(frozen=True)
class SubsystemLayout:
    """Global tensor-factor layout: one site per (source, party) incidence.

    Sites are ordered source by source, and within a source in the order the
    source lists its parties.  ``party_sites`` maps each party to its site
    indices in increasing order; the party's local space is the tensor
    product of those sites in that order.
    """

    sites: tuple[Site, ...]
    party_sites: dict[str, tuple[int, ...]]

    @classmethod
    def from_topology(cls, topology: NetworkTopology) -> SubsystemLayout:
        sites = []
        owned: dict[str, list[int]] = {p: [] for p in topology.parties}
        for src in topology.sources:
            for party, d in zip(src.parties, src.dims):
                owned[party].append(len(sites))
                sites.append(Site(src.name, party, d))
        return cls(tuple(sites), {p: tuple(v) for p, v in owned.items()})

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.sites)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def party_dims(self, party: str) -> tuple[int, ...]:
        return tuple(self.sites[k].dim for k in self.party_sites[party])

    def party_dim(self, party: str) -> int:
        return prod(self.party_dims(party))

    def source_sites(self, source: str) -> tuple[int, ...]:
        return tuple(k for k, s in enumerate(self.sites) if s.source == source)


class EmbeddedOperator:
    """``local`` acting on one party's sites, identity on the rest.

    :meth:`apply` works on batched state tensors of shape ``(R, *layout.dims)``;
    the leading axis is never touched.
    """

    def __init__(self, local: np.ndarray, party: str, layout: SubsystemLayout):
        local = _check_square(local)
        if party not in layout.party_sites:
            raise DimensionMismatch(f"party {party!r} has no sites in this layout")
        pdims = layout.party_dims(party)
        if local.shape[0] != prod(pdims):
            raise DimensionMismatch(
                f"operator of dim {local.shape[0]} for party {party!r} "
                f"with local dim {prod(pdims)}"
            )
        self.local = local
        self.party = party
        self.layout = layout
        self.sites = layout.party_sites[party]
        self._tensor = local.reshape(pdims + pdims)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        k = len(self.sites)
        if k == 0:
            return self.local[0, 0] * psi
        axes = [1 + s for s in self.sites]
        out = np.tensordot(self._tensor, psi, axes=(list(range(k, 2 * k)), axes))
        return np.moveaxis(out, list(range(k)), axes)

    def to_dense(self, cap: int = DENSE_CAP) -> np.ndarray:
        D = self.layout.dim
        if D > cap:
            raise DimensionMismatch(f"global dimension {D} exceeds dense cap {cap}")
        basis = np.eye(D, dtype=complex).reshape((D, *self.layout.dims))
        return self.apply(basis).reshape(D, D).T


def embed(local: np.ndarray, party: str, layout: SubsystemLayout) -> EmbeddedOperator:
    return EmbeddedOperator(local, party, layout)


def mutual_commutation_check(
    layout: SubsystemLayout,
    obs_a: LocalObservable,
    obs_b: LocalObservable,
    tol: float = DEFAULT_TOL,
    probes: int = 64,
    seed: int = 0,
) -> float:
    """‖[embed(A), embed(B)]‖ evaluated on basis vectors (random probes if D is large).

    The residual is returned rather than compared with ``tol``; callers
    decide what to do with it.
    """
    if obs_a.party == obs_b.party:
        raise SameParty(f"both observables belong to {obs_a.party!r}")
    ea = embed(obs_a.matrix, obs_a.party, layout)
    eb = embed(obs_b.matrix, obs_b.party, layout)
    D = layout.dim
    if D <= 1024:
        vecs = np.eye(D, dtype=complex).reshape((D, *layout.dims))
    else:
        rng = np.random.default_rng(seed)
        vecs = rng.standard_normal((probes, D)) + 1j * rng.standard_normal((probes, D))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        vecs = vecs.reshape((probes, *layout.dims))
    diff = ea.apply(eb.apply(vecs)) - eb.apply(ea.apply(vecs))
    cols = diff.reshape(diff.shape[0], D)
    if D <= 1024:
        return op_norm(cols.T)
    return float(np.max(np.linalg.norm(cols, axis=1)))


# ------------------------------------------------------- parameterisation


@lru_cache(maxsize=None)
def hermitian_basis(d: int) -> np.ndarray:
    """d² Hermitian matrices: symmetric/antisymmetric off-diagonal pairs, then diagonals."""
    basis = []
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1
            a = np.zeros((d, d), dtype=complex)
            a[j, k], a[k, j] = -1j, 1j
            basis += [s, a]
    for j in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[j, j] = 1
        basis.append(e)
    out = np.array(basis)
    out.setflags(write=False)
    return out


@dataclass
class ObservableParams:
    """Generator coefficients for ``U diag(spectrum) U†`` with ``U = exp(iG)``.

    ``signature`` is (number of +1, number of −1) eigenvalues, placed +1
    first.  ``pattern`` fixes the ±1 diagonal in basis order instead (used
    when two observables share an eigenbasis).  When ``eigen`` is given
    (contraction class) the spectrum is ``sin(eigen)`` and the signature is
    ignored.
    """

    dim: int
    signature: tuple[int, int]
    theta: np.ndarray
    eigen: np.ndarray | None = None
    pattern: np.ndarray | None = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.signature = (int(self.signature[0]), int(self.signature[1]))
        if sum(self.signature) != self.dim or min(self.signature) < 0:
            raise DimensionMismatch(f"signature {self.signature} does not fit dim {self.dim}")
        if self.theta.shape != (self.dim**2,):
            raise DimensionMismatch(f"theta needs {self.dim**2} entries, got {self.theta.shape}")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")
        if self.eigen is not None:
            self.eigen = np.asarray(self.eigen, dtype=float)
            if self.eigen.shape != (self.dim,):
                raise DimensionMismatch(f"eigen needs {self.dim} entries")
        if self.pattern is not None:
            self.pattern = np.asarray(self.pattern, dtype=float)
            if self.pattern.shape != (self.dim,) or not np.all(np.abs(self.pattern) == 1):
                raise DimensionMismatch(f"pattern needs {self.dim} entries of ±1")
            if int((self.pattern > 0).sum()) != self.signature[0]:
                raise DimensionMismatch("pattern does not match signature")

    @classmethod
    def from_bloch(cls, polar: float, azimuth: float) -> ObservableParams:
        """Qubit params whose observable is n·σ for the given Bloch angles."""
        theta = np.zeros(4)
        # G = (polar/2)(sin φ X − cos φ Y) rotates ẑ onto n
        theta[0] = 0.5 * polar * np.sin(azimuth)
        theta[1] = -0.5 * polar * np.cos(azimuth)
        return cls(2, (1, 1), theta)

    def spectrum(self) -> np.ndarray:
        if self.eigen is not None:
            return np.sin(self.eigen)
        if self.pattern is not None:
            return self.pattern
        plus, minus = self.signature
        return np.concatenate([np.ones(plus), -np.ones(minus)])

    def to_dict(self) -> dict:
        out = {
            "dim": self.dim,
            "signature": list(self.signature),
            "theta": [float(t) for t in self.theta],
        }
        if self.eigen is not None:
            out["eigen"] = [float(e) for e in self.eigen]
        if self.pattern is not None:
            out["pattern"] = [int(e) for e in self.pattern]
        return out


def unitary_from_theta(theta: np.ndarray, d: int) -> np.ndarray:
    gen = np.tensordot(np.asarray(theta, dtype=float), hermitian_basis(d), axes=1)
    return scipy.linalg.expm(1j * gen)


def observable_from_params(p: ObservableParams) -> np.ndarray:
    u = unitary_from_theta(p.theta, p.dim)
    op = (u * p.spectrum()) @ u.conj().T
    return (op + op.conj().T) / 2


def bloch_observable(polar: float, azimuth: float) -> np.ndarray:
    return (
        np.sin(polar) * np.cos(azimuth) * X
        + np.sin(polar) * np.sin(azimuth) * Y
        + np.cos(polar) * Z
    )


def random_dichotomic(d: int, rng: np.random.Generator, signature: tuple[int, int] | None = None):
    """Random ±1 observable; a uniformly drawn signature unless one is given."""
    if signature is None:
        plus = int(rng.integers(0, d + 1))
        signature = (plus, d - plus)
    return observable_from_params(ObservableParams(d, signature, rng.standard_normal(d * d)))


# ------------------------------------------------------ generated algebra


@dataclass(frozen=True)
class AlgebraInfo:
    dim: int
    m2: bool
    anticommutator: float
    square_residuals: tuple[float, float]
    structure_residual: float


def _span_rank(vectors: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis (rows) of the row span of ``vectors``."""
    if len(vectors) == 0:
        return vectors
    u, s, vh = np.linalg.svd(vectors, full_matrices=False)
    keep = s > tol * max(1.0, s[0])
    return vh[keep]


def generated_algebra_dim(a0: np.ndarray, a1: np.ndarray, tol: float = DEFAULT_TOL) -> AlgebraInfo:
    """Linear dimension of the unital algebra generated by ``a0`` and ``a1``.

    The M₂ flag requires dimension 4, ``a0² = a1² = I``, ``{a0, a1} = 0`` and
    Pauli structure constants for ``a0, a1, −(i/2)[a0, a1]``.
    """
    a0, a1 = _check_square(a0), _check_square(a1)
    if a0.shape != a1.shape:
        raise DimensionMismatch(f"{a0.shape} vs {a1.shape}")
    for name, a in (("a0", a0), ("a1", a1)):
        if op_norm(a - a.conj().T) > tol:
            raise NotHermitian(f"{name} is not Hermitian")
    d = a0.shape[0]
    ident = np.eye(d, dtype=complex)
    basis = _span_rank(np.array([ident.ravel(), a0.ravel(), a1.ravel()]), tol)
    while True:
        mats = basis.reshape(-1, d, d)
        products = [g @ b for b in mats for g in (a0, a1)]
        grown = _span_rank(np.vstack([basis, np.array([p.ravel() for p in products])]), tol)
        if len(grown) == len(basis):
            break
        basis = grown
    dim = len(basis)

    anti = op_norm(anticommutator(a0, a1))
    sq = (op_norm(a0 @ a0 - ident), op_norm(a1 @ a1 - ident))
    a2 = -0.5j * commutator(a0, a1)
    structure = max(
        op_norm(a2 @ a2 - ident),
        op_norm(a0 @ a1 - 1j * a2),
        op_norm(a1 @ a2 - 1j * a0),
        op_norm(a2 @ a0 - 1j * a1),
    )
    m2 = dim == 4 and anti <= tol and max(sq) <= tol and structure <= tol
    return AlgebraInfo(dim, m2, anti, sq, structure)
