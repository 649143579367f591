import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netbell.algebra import X, Z, SubsystemLayout, embed
from netbell.errors import BadDims, LayoutMismatch, MissingSource, NonCommutingFactors, NotAState, SingletNeedsQubits
from netbell.network import chain, star
from netbell.state import (
    NetworkState,
    assemble_network_state,
    expectation,
    factorization_check,
    faithfulness,
    is_faithful,
    local_state,
    make_source_state,
)
from netbell.verify import random_density
from oracles import dense_operator, dense_state, singlet_matrix


def singlets(topo):
    return [make_source_state("singlet", source=s.name) for s in topo.sources]


def test_singlet_correlations():
    topo = chain(2)
    layout = SubsystemLayout.from_topology(topo)
    state = assemble_network_state(singlets(topo), layout)
    for a in (X, Z):
        assert expectation(state, [embed(a, "A1", layout), embed(a, "A2", layout)]) == pytest.approx(-1)
    assert expectation(state, [embed(Z, "A1", layout)]) == pytest.approx(0, abs=1e-15)


def test_werner_and_faithfulness():
    s = make_source_state("werner", {"visibility": 0.9})
    assert s.min_eig() == pytest.approx(0.1 / 4)
    topo = chain(3)
    layout = SubsystemLayout.from_topology(topo)
    state = assemble_network_state([make_source_state("werner", {"visibility": 0.9}, source=x.name)
                                    for x in topo.sources], layout)
    rho = state.density_matrix()
    assert faithfulness(state) == pytest.approx(np.linalg.eigvalsh(rho)[0], abs=1e-15)
    assert is_faithful(state)
    assert not is_faithful(assemble_network_state(singlets(topo), layout))


def test_named_states():
    assert np.allclose(local_state("+", 2), np.full((2, 2), 0.5))
    assert np.allclose(local_state("mixed", 3), np.eye(3) / 3)
    assert np.allclose(local_state("2", 3), np.diag([0, 0, 1]))
    with pytest.raises(BadDims):
        local_state("+", 3)
    prod = make_source_state("product", {"states": ["0", "1"]})
    assert prod.rho[1, 1] == pytest.approx(1)


def test_separable_mixture():
    s = make_source_state("separable_mixture", {"weights": [0.25, 0.75], "components": [["0", "0"], ["+", "-"]]})
    assert np.trace(s.rho).real == pytest.approx(1)
    with pytest.raises(NotAState):
        make_source_state("separable_mixture", {"weights": [0.5, 0.6], "components": [["0", "0"], ["1", "1"]]})


def test_state_errors():
    with pytest.raises(SingletNeedsQubits):
        make_source_state("singlet", dims=(3, 3))
    with pytest.raises(NotAState):
        make_source_state("explicit", {"matrix": np.diag([1.0, 1, -1, 0])})
    with pytest.raises(NotAState):
        make_source_state("werner", {"visibility": 1.5})
    topo = chain(3)
    layout = SubsystemLayout.from_topology(topo)
    with pytest.raises(MissingSource):
        assemble_network_state(singlets(topo)[:1], layout)
    bad = [make_source_state("maximally_entangled", dims=(3, 3), source="S1"), singlets(topo)[1]]
    with pytest.raises(LayoutMismatch):
        assemble_network_state(bad, layout)


def test_same_party_factors_rejected():
    layout = SubsystemLayout.from_topology(chain(2))
    state = assemble_network_state(singlets(chain(2)), layout)
    with pytest.raises(NonCommutingFactors):
        expectation(state, [embed(Z, "A1", layout), embed(X, "A1", layout)])


def test_ensemble_reproduces_density():
    topo = star(3)
    layout = SubsystemLayout.from_topology(topo)
    rng = np.random.default_rng(5)
    rhos = {s.name: random_density(4, rng) for s in topo.sources}
    state = assemble_network_state(
        [make_source_state("explicit", {"matrix": r}, source=n) for n, r in rhos.items()], layout
    )
    assert np.allclose(state.density_matrix(), dense_state(topo, rhos), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_expectation_matches_dense_trace(seed):
    rng = np.random.default_rng(seed)
    topo = chain(3)
    layout = SubsystemLayout.from_topology(topo)
    rhos = {s.name: random_density(4, rng) for s in topo.sources}
    state = assemble_network_state(
        [make_source_state("explicit", {"matrix": r}, source=n) for n, r in rhos.items()], layout
    )
    ops = {}
    for p in topo.parties:
        d = layout.party_dim(p)
        h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        ops[p] = h + h.conj().T
    lazy = expectation(state, [embed(a, p, layout) for p, a in ops.items()])
    dense = np.trace(dense_state(topo, rhos) @ dense_operator(topo, ops)).real
    assert lazy == pytest.approx(dense, abs=1e-10)


def test_factorization_on_independent_pair():
    topo = chain(3)
    layout = SubsystemLayout.from_topology(topo)
    state = assemble_network_state(singlets(topo), layout)
    res = factorization_check(state, topo, [0, 2], n_samples=20)
    assert res.residual < 1e-12 and not res.structurally_dependent
    res = factorization_check(state, topo, [0, 1], observables=[Z, np.kron(Z, np.eye(2))])
    assert res.structurally_dependent
    assert res.residual == pytest.approx(1)


def test_global_escape_hatch():
    topo = chain(2)
    layout = SubsystemLayout.from_topology(topo)
    state = NetworkState.from_global(singlet_matrix(), layout)
    assert expectation(state, [embed(Z, "A1", layout), embed(Z, "A2", layout)]) == pytest.approx(-1)
    assert faithfulness(state) == pytest.approx(0, abs=1e-12)
