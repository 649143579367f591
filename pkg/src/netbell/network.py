"""Network topologies and their independence structure.

A network is a list of parties and a list of sources; each source hands one
subsystem (of some local dimension) to each party it touches.  Two parties
are *dependent* when some source feeds both of them.  The Bell functional is
built on sets of pairwise independent parties, so this module enumerates
those sets exactly by backtracking over the sharing graph.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import DegenerateSource, EmptyNetwork, HOutOfRange, UnknownParty


@dataclass(frozen=True)
class Source:
    name: str
    parties: tuple[str, ...]
    dims: tuple[int, ...]

    @property
    def arity(self) -> int:
        return len(self.parties)


@dataclass(frozen=True)
class NetworkTopology:
    """Parties plus sources.  Build through :func:`validate_topology`."""

    parties: tuple[str, ...]
    sources: tuple[Source, ...]

    @property
    def m(self) -> int:
        return len(self.parties)

    @property
    def n(self) -> int:
        return len(self.sources)

    def index(self, party: str) -> int:
        try:
            return self.parties.index(party)
        except ValueError:
            raise UnknownParty(f"unknown party {party!r}") from None

    def sources_of(self, party: str) -> tuple[str, ...]:
        """Names of the sources feeding ``party``."""
        return tuple(s.name for s in self.sources if party in s.parties)


@dataclass(frozen=True)
class SharingGraph:
    parties: tuple[str, ...]
    adjacency: np.ndarray

    def neighbours(self, i: int) -> set[int]:
        return set(np.flatnonzero(self.adjacency[i]).tolist())


@dataclass(frozen=True)
class IndependenceReport:
    h_max: int
    sets: dict[int, list[tuple[int, ...]]] = field(default_factory=dict)

    @property
    def no_independent_pair(self) -> bool:
        return self.h_max < 2

    def degree(self, h: int) -> int:
        """Degree of repetition D_h."""
        return len(self.sets.get(h, []))


def validate_topology(spec: Mapping | NetworkTopology) -> NetworkTopology:
    """Build a checked topology from a raw description.

    ``spec`` has keys ``parties`` (names) and ``sources``; each source is a
    mapping with ``name``, ``parties`` and optionally ``dims`` (default 2 per
    party).  A :class:`NetworkTopology` is re-validated as-is.
    """
    if isinstance(spec, NetworkTopology):
        parties = list(spec.parties)
        raw_sources = [
            {"name": s.name, "parties": list(s.parties), "dims": list(s.dims)}
            for s in spec.sources
        ]
    else:
        parties = [str(p) for p in spec.get("parties", [])]
        raw_sources = list(spec.get("sources", []))

    if len(set(parties)) != len(parties):
        raise UnknownParty(f"duplicate party names in {parties}")
    if not parties or not raw_sources:
        raise EmptyNetwork("a network needs at least one party and one source")

    known = set(parties)
    sources = []
    for k, raw in enumerate(raw_sources):
        name = str(raw.get("name", f"S{k + 1}"))
        members = [str(p) for p in raw.get("parties", [])]
        for p in members:
            if p not in known:
                raise UnknownParty(f"source {name!r} references undeclared party {p!r}")
        if len(set(members)) != len(members):
            raise DegenerateSource(f"source {name!r} lists a party twice")
        if len(members) < 2:
            raise DegenerateSource(f"source {name!r} must touch at least two parties")
        dims = raw.get("dims")
        dims = [2] * len(members) if dims is None else [int(d) for d in dims]
        if len(dims) != len(members):
            raise DegenerateSource(f"source {name!r}: {len(dims)} dims for {len(members)} parties")
        if any(d < 2 for d in dims):
            raise DegenerateSource(f"source {name!r}: local dimensions must be >= 2")
        sources.append(Source(name, tuple(members), tuple(dims)))

    names = [s.name for s in sources]
    if len(set(names)) != len(names):
        raise DegenerateSource(f"duplicate source names in {names}")
    return NetworkTopology(tuple(parties), tuple(sources))


def sharing_graph(topology: NetworkTopology) -> SharingGraph:
    m = topology.m
    adj = np.zeros((m, m), dtype=bool)
    for src in topology.sources:
        idx = [topology.index(p) for p in src.parties]
        for i, j in combinations(idx, 2):
            adj[i, j] = adj[j, i] = True
    return SharingGraph(topology.parties, adj)


def _backtrack(adj: np.ndarray, h: int) -> list[tuple[int, ...]]:
    m = adj.shape[0]
    out: list[tuple[int, ...]] = []
    chosen: list[int] = []

    def extend(start: int) -> None:
        if len(chosen) == h:
            out.append(tuple(chosen))
            return
        # not enough candidates left to reach size h
        for v in range(start, m - (h - len(chosen)) + 1):
            if any(adj[v, u] for u in chosen):
                continue
            chosen.append(v)
            extend(v + 1)
            chosen.pop()

    extend(0)
    return out


def independent_sets(topology: NetworkTopology, h: int) -> list[tuple[int, ...]]:
    """All size-``h`` sets of pairwise independent parties (0-based, sorted)."""
    if not 2 <= h <= topology.m:
        raise HOutOfRange(f"h={h} outside 2..{topology.m}")
    return _backtrack(sharing_graph(topology).adjacency, h)


def independence_report(topology: NetworkTopology) -> IndependenceReport:
    adj = sharing_graph(topology).adjacency
    sets: dict[int, list[tuple[int, ...]]] = {}
    h_max = 1
    for h in range(2, topology.m + 1):
        found = _backtrack(adj, h)
        if not found:
            break  # every (h+1)-set would contain an independent h-set
        sets[h] = found
        h_max = h
    return IndependenceReport(h_max, sets)


def is_independent(topology: NetworkTopology, parties: Iterable[int]) -> bool:
    members = list(parties)
    adj = sharing_graph(topology).adjacency
    return all(not adj[i, j] for i, j in combinations(members, 2))


# ---------------------------------------------------------------- builders


def chain(m: int, dim: int = 2) -> NetworkTopology:
    """Parties A1..Am in a line, one bipartite source between neighbours."""
    parties = [f"A{i + 1}" for i in range(m)]
    sources = [
        {"name": f"S{i + 1}", "parties": [parties[i], parties[i + 1]], "dims": [dim, dim]}
        for i in range(m - 1)
    ]
    return validate_topology({"parties": parties, "sources": sources})


def star(leaves: int, dim: int = 2) -> NetworkTopology:
    """Centre party ``C`` sharing one bipartite source with each leaf L1..Lk."""
    names = [f"L{i + 1}" for i in range(leaves)]
    sources = [
        {"name": f"S{i + 1}", "parties": ["C", leaf], "dims": [dim, dim]}
        for i, leaf in enumerate(names)
    ]
    return validate_topology({"parties": ["C", *names], "sources": sources})


def triangle(dim: int = 2) -> NetworkTopology:
    parties = ["A", "B", "C"]
    pairs = [("A", "B"), ("B", "C"), ("C", "A")]
    sources = [
        {"name": f"S{k + 1}", "parties": list(pq), "dims": [dim, dim]}
        for k, pq in enumerate(pairs)
    ]
    return validate_topology({"parties": parties, "sources": sources})


def party_names(topology: NetworkTopology, indices: Sequence[int]) -> list[str]:
    return [topology.parties[i] for i in indices]
