"""Brute-force reference implementations used only by the tests.

Nothing here calls kron, tensordot or the library's layout code: operators
and states are built entry by entry from decoded basis indices, and
independent sets come from enumerating every subset.
"""

from itertools import combinations

import numpy as np


def site_list(topology):
    """(source name, party) per site, source by source in declaration order."""
    return [(s.name, p, d) for s in topology.sources for p, d in zip(s.parties, s.dims)]


def decode(index, dims):
    digits = []
    for d in reversed(dims):
        digits.append(index % d)
        index //= d
    return tuple(reversed(digits))


def encode(digits, dims):
    out = 0
    for x, d in zip(digits, dims):
        out = out * d + x
    return out


def dense_operator(topology, local_ops):
    """Global matrix of a product of local operators {party: matrix}."""
    sites = site_list(topology)
    dims = [d for _, _, d in sites]
    D = int(np.prod(dims))
    owned = {p: [k for k, (_, q, _) in enumerate(sites) if q == p] for p in topology.parties}
    out = np.zeros((D, D), dtype=complex)
    basis = [decode(i, dims) for i in range(D)]
    free = [k for k in range(len(dims)) if not any(k in owned[p] for p in local_ops)]
    for i, bi in enumerate(basis):
        for j, bj in enumerate(basis):
            val = 1.0 + 0j
            if any(bi[k] != bj[k] for k in free):
                continue
            for p, op in local_ops.items():
                ks = owned[p]
                pd = [dims[k] for k in ks]
                val *= op[encode([bi[k] for k in ks], pd), encode([bj[k] for k in ks], pd)]
                if val == 0:
                    break
            out[i, j] = val
    return out


def dense_state(topology, source_rhos):
    """Global density matrix of independent sources {source name: rho}."""
    sites = site_list(topology)
    dims = [d for _, _, d in sites]
    D = int(np.prod(dims))
    groups = {s.name: [k for k, (n, _, _) in enumerate(sites) if n == s.name] for s in topology.sources}
    out = np.zeros((D, D), dtype=complex)
    basis = [decode(i, dims) for i in range(D)]
    for i, bi in enumerate(basis):
        for j, bj in enumerate(basis):
            val = 1.0 + 0j
            for name, ks in groups.items():
                sd = [dims[k] for k in ks]
                val *= source_rhos[name][encode([bi[k] for k in ks], sd), encode([bj[k] for k in ks], sd)]
            out[i, j] = val
    return out


def dense_IJ(topology, rho, observables, indep):
    """I and J by full traces of dense products."""
    names = [topology.parties[k] for k in indep]
    I_ops, J_ops = {}, {}
    for p in topology.parties:
        a0, a1 = observables[p]
        if p in names:
            I_ops[p], J_ops[p] = a0 + a1, a0 - a1
        else:
            I_ops[p], J_ops[p] = a0, a1
    I = np.trace(rho @ dense_operator(topology, I_ops)).real
    J = np.trace(rho @ dense_operator(topology, J_ops)).real
    return float(I), float(J)


def dense_S(topology, rho, observables, indep):
    I, J = dense_IJ(topology, rho, observables, indep)
    h = len(indep)
    return abs(I) ** (1 / h) + abs(J) ** (1 / h)


def brute_independent_sets(topology, h):
    shared = [set(s.parties) for s in topology.sources]
    out = []
    for combo in combinations(range(topology.m), h):
        names = {topology.parties[k] for k in combo}
        if all(len(names & s) <= 1 for s in shared):
            out.append(combo)
    return out


def brute_h_max(topology):
    best = 1
    for h in range(2, topology.m + 1):
        if brute_independent_sets(topology, h):
            best = h
    return best


def singlet_matrix():
    v = np.array([0, 1, -1, 0]) / np.sqrt(2)
    return np.outer(v, v).astype(complex)


SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def kron_operator(topology, local_ops):
    """Same as :func:`dense_operator`, built with kron plus an axis permutation.

    Fast enough for D in the thousands; parties missing from ``local_ops``
    get the identity.
    """
    sites = site_list(topology)
    dims = [d for _, _, d in sites]
    n = len(dims)
    perm, mats = [], []
    for p in topology.parties:
        owned = [k for k, (_, q, _) in enumerate(sites) if q == p]
        if not owned:
            continue
        perm += owned
        size = int(np.prod([dims[k] for k in owned]))
        mats.append(local_ops.get(p, np.eye(size)))
    full = mats[0]
    for m in mats[1:]:
        full = np.kron(full, m)
    pd = [dims[k] for k in perm]
    inv = [perm.index(s) for s in range(n)]
    t = full.reshape(pd + pd).transpose(inv + [n + i for i in inv])
    D = int(np.prod(dims))
    return t.reshape(D, D)


def kron_state(topology, source_rhos):
    """Global state as a kron over sources (sites are contiguous per source)."""
    out = np.ones((1, 1), dtype=complex)
    for s in topology.sources:
        out = np.kron(out, source_rhos[s.name])
    return out
