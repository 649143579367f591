"""JSON scenario documents: parsing into a Scenario and back.

A document has ``parties``, ``sources`` (each with a ``state``) and
``observables``; ``independent_set``, ``tolerances``, ``optimize``,
``observable_class`` and ``global_state`` are optional.  Errors in the
document structure raise :class:`ParseError` carrying a path such as
``observables.A2[0].matrix``.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from dataclasses import fields
from pathlib import Path

import numpy as np

from .algebra import PAULI, ObservableParams, SubsystemLayout, bloch_observable, observable_from_params, tensor_power
from .bell import Scenario, Tolerances
from .errors import NetbellError, ParseError, UnknownParty, ValidationError
from .network import NetworkTopology, validate_topology
from .optimize import CLASSES, OptimizeConfig
from .state import NetworkState, SourceState, assemble_network_state, make_source_state

OBSERVABLE_KINDS = ("pauli", "bloch", "matrix", "params")
_SIMPLE_KINDS = ("singlet", "maximally_entangled", "werner", "product", "separable_mixture")


# ---------------------------------------------------------------- loading


def load_document(source) -> tuple[dict, str]:
    """Read a scenario document; returns (document, sha256 hex digest).

    ``source`` is a path, or an already-parsed mapping (digest of its
    canonical JSON form).
    """
    if isinstance(source, Mapping):
        raw = json.dumps(source, sort_keys=True).encode()
        return dict(source), hashlib.sha256(raw).hexdigest()
    path = Path(source)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ParseError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError:
        raise ParseError("", f"{path} is not UTF-8") from None
    except json.JSONDecodeError as exc:
        raise ParseError("", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("", "top level must be a JSON object")
    return doc, hashlib.sha256(raw).hexdigest()


def _need(node, key: str, path: str, kind=None):
    if not isinstance(node, Mapping) or key not in node:
        raise ParseError(path, f"missing key {key!r}")
    value = node[key]
    if kind is not None and not isinstance(value, kind):
        raise ParseError(f"{path}.{key}" if path else key, f"expected {_kind_name(kind)}")
    return value


def _kind_name(kind) -> str:
    names = {list: "a list", dict: "an object", str: "a string"}
    if isinstance(kind, tuple):
        return " or ".join(names.get(k, k.__name__) for k in kind)
    return names.get(kind, kind.__name__)


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(path, "expected a number")
    return float(value)


def parse_matrix(value, path: str) -> np.ndarray:
    """Rows of entries; an entry is a real number or an ``[re, im]`` pair."""
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ParseError(path, "expected a non-empty list of rows")
    n = len(value)
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(value):
        if len(row) != n:
            raise ParseError(path, f"not square: row {i} has {len(row)} entries, expected {n}")
        for j, entry in enumerate(row):
            where = f"{path}[{i}][{j}]"
            if isinstance(entry, list):
                if len(entry) != 2:
                    raise ParseError(where, "complex entries are [re, im] pairs")
                out[i, j] = complex(_number(entry[0], where), _number(entry[1], where))
            else:
                out[i, j] = _number(entry, where)
    return out


def encode_matrix(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


# ---------------------------------------------------------------- pieces


def parse_topology(doc: Mapping) -> NetworkTopology:
    parties = _need(doc, "parties", "", list)
    sources = _need(doc, "sources", "", list)
    for k, p in enumerate(parties):
        if not isinstance(p, str):
            raise ParseError(f"parties[{k}]", "party names are strings")
    raw = []
    for k, src in enumerate(sources):
        path = f"sources[{k}]"
        if not isinstance(src, Mapping):
            raise ParseError(path, "expected an object")
        _need(src, "name", path, str)
        members = _need(src, "parties", path, list)
        entry = {"name": src["name"], "parties": members}
        if "dims" in src:
            dims = src["dims"]
            if not isinstance(dims, list) or not all(isinstance(d, int) and not isinstance(d, bool) for d in dims):
                raise ParseError(f"{path}.dims", "expected a list of integers")
            entry["dims"] = dims
        raw.append(entry)
    return validate_topology({"parties": parties, "sources": raw})


def parse_source_state(node, src, path: str) -> SourceState:
    if not isinstance(node, Mapping):
        raise ParseError(path, "expected an object")
    kind = _need(node, "kind", path, str)
    if "params" in node:
        params = node["params"]
        if not isinstance(params, Mapping):
            raise ParseError(f"{path}.params", "expected an object")
        params = dict(params)
    else:
        params = {k: v for k, v in node.items() if k != "kind"}
    if "matrix" in params:
        where = f"{path}.params.matrix" if "params" in node else f"{path}.matrix"
        params["matrix"] = parse_matrix(params["matrix"], where)
        kind = "explicit" if kind == "matrix" else kind
    try:
        return make_source_state(kind, params, src.dims, src.name)
    except NetbellError as exc:
        raise ValidationError(f"source {src.name!r}: {exc}") from None


def parse_observable(node, path: str) -> tuple[np.ndarray, ObservableParams | None]:
    """Local matrix, plus its parameters when given in ``params`` form."""
    if not isinstance(node, Mapping):
        raise ParseError(path, "expected an object")
    kind = _need(node, "kind", path, str)
    if kind == "pauli":
        label = _need(node, "label", path, str)
        if label not in PAULI:
            raise ParseError(f"{path}.label", f"unknown Pauli label {label!r}; one of {sorted(PAULI)}")
        k = node.get("tensor", 1)
        if isinstance(k, bool) or not isinstance(k, int) or k < 1:
            raise ParseError(f"{path}.tensor", "expected a positive integer")
        return tensor_power(PAULI[label], k), None
    if kind == "bloch":
        polar = _number(_need(node, "polar", path), f"{path}.polar")
        azimuth = _number(_need(node, "azimuth", path), f"{path}.azimuth")
        return bloch_observable(polar, azimuth), None
    if kind == "matrix":
        return parse_matrix(_need(node, "matrix", path), f"{path}.matrix"), None
    if kind == "params":
        dim = _need(node, "dim", path, int)
        sig = _need(node, "signature", path, list)
        theta = _need(node, "theta", path, list)
        extra = {}
        for key in ("eigen", "pattern"):
            if node.get(key) is not None:
                extra[key] = [_number(v, f"{path}.{key}[{i}]") for i, v in enumerate(node[key])]
        try:
            p = ObservableParams(dim, tuple(sig), [_number(t, f"{path}.theta[{i}]") for i, t in enumerate(theta)],
                                 **extra)
        except (NetbellError, TypeError) as exc:
            raise ParseError(path, str(exc)) from None
        return observable_from_params(p), p
    raise ParseError(f"{path}.kind", f"unknown observable kind {kind!r}; one of {list(OBSERVABLE_KINDS)}")


def parse_observables(doc: Mapping, topology: NetworkTopology):
    node = _need(doc, "observables", "", dict)
    for name in node:
        if name not in topology.parties:
            raise UnknownParty(f"observables given for undeclared party {name!r}")
    mats, params = {}, {}
    for party in topology.parties:
        if party not in node:
            raise ValidationError(f"party {party!r} has no observables")
        pair = node[party]
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError(f"observables.{party}", "expected a list of two observables")
        parsed = [parse_observable(o, f"observables.{party}[{x}]") for x, o in enumerate(pair)]
        mats[party] = (parsed[0][0], parsed[1][0])
        if parsed[0][1] is not None and parsed[1][1] is not None:
            params[party] = (parsed[0][1], parsed[1][1])
    return mats, params


def parse_independent_set(doc: Mapping, topology: NetworkTopology) -> tuple[int, ...] | None:
    names = doc.get("independent_set")
    if names is None:
        return None
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise ParseError("independent_set", "expected a list of party names")
    return parse_party_list(names, topology)


def parse_party_list(names, topology: NetworkTopology) -> tuple[int, ...]:
    """Party names (or 1-based indices as strings) to 0-based indices."""
    out = []
    for n in names:
        n = str(n).strip()
        if n in topology.parties:
            out.append(topology.index(n))
        elif n.isdigit() and 1 <= int(n) <= topology.m:
            out.append(int(n) - 1)
        else:
            raise UnknownParty(f"unknown party {n!r} in independent set")
    return tuple(out)


def parse_tolerances(doc: Mapping) -> Tolerances:
    node = doc.get("tolerances", {})
    if not isinstance(node, Mapping):
        raise ParseError("tolerances", "expected an object")
    allowed = {f.name for f in fields(Tolerances)}
    vals = {}
    for key, v in node.items():
        if key not in allowed:
            raise ParseError(f"tolerances.{key}", f"unknown tolerance; one of {sorted(allowed)}")
        vals[key] = _number(v, f"tolerances.{key}")
        if vals[key] <= 0:
            raise ParseError(f"tolerances.{key}", "must be positive")
    return Tolerances(**vals)


def parse_optimize_config(doc: Mapping, **overrides) -> OptimizeConfig:
    """OptimizeConfig from the document's ``optimize`` object; ``overrides`` win when not None."""
    node = doc.get("optimize", {}) or {}
    if not isinstance(node, Mapping):
        raise ParseError("optimize", "expected an object")
    allowed = {f.name for f in fields(OptimizeConfig)}
    vals = {}
    for key, v in node.items():
        if key not in allowed:
            raise ParseError(f"optimize.{key}", f"unknown option; one of {sorted(allowed)}")
        if key == "signatures":
            if not isinstance(v, Mapping):
                raise ParseError("optimize.signatures", "expected an object of [plus, minus] pairs")
            v = {p: tuple(s) for p, s in v.items()}
        vals[key] = v
    vals.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return OptimizeConfig(**vals)
    except (TypeError, ValueError) as exc:
        raise ParseError("optimize", str(exc)) from None


def _observable_class(doc: Mapping) -> str:
    cls = doc.get("observable_class")
    if cls is None:
        opt = doc.get("optimize") or {}
        cls = opt.get("obs_class", "dichotomic") if isinstance(opt, Mapping) else "dichotomic"
    if cls not in CLASSES:
        raise ParseError("observable_class", f"expected one of {list(CLASSES)}")
    return cls


# ---------------------------------------------------------------- scenario


def parse_scenario(source, *, validate: bool = True) -> Scenario:
    """Scenario from a path or a parsed document."""
    doc, _ = load_document(source)
    return scenario_from_document(doc, validate=validate)


def scenario_from_document(doc: Mapping, *, validate: bool = True) -> Scenario:
    topology = parse_topology(doc)
    layout = SubsystemLayout.from_topology(topology)
    if "global_state" in doc:
        node = doc["global_state"]
        rho = parse_matrix(_need(node, "matrix", "global_state"), "global_state.matrix")
        state = NetworkState.from_global(rho, layout)
    else:
        states = []
        for k, (src, raw) in enumerate(zip(topology.sources, doc["sources"])):
            path = f"sources[{k}]"
            states.append(parse_source_state(_need(raw, "state", path), src, f"{path}.state"))
        state = assemble_network_state(states, layout)
    observables, params = parse_observables(doc, topology)
    sc = Scenario(
        topology, layout, state, observables,
        independent_set=parse_independent_set(doc, topology),
        obs_class=_observable_class(doc),
        tol=parse_tolerances(doc),
        params=params,
    )
    return sc.validate() if validate else sc


def _state_node(s: SourceState) -> dict:
    if s.kind in ("singlet", "maximally_entangled"):
        return {"kind": s.kind}
    if s.kind in _SIMPLE_KINDS:
        try:
            params = json.loads(json.dumps(s.params))
        except TypeError:
            params = None
        if params is not None:
            return {"kind": s.kind, "params": params}
    return {"kind": "explicit", "matrix": encode_matrix(s.rho)}


def scenario_to_document(scenario: Scenario, params: Mapping | None = None) -> dict:
    """JSON-ready document; parsing it back yields the same numbers.

    Observables are written in ``params`` form where parameters are known
    (from ``params`` or the scenario's own), else as full-precision matrices.
    """
    topo = scenario.topology
    params = dict(scenario.params) | dict(params or {})
    doc: dict = {"parties": list(topo.parties), "sources": []}
    by_name = {s.source: s for s in scenario.state.sources}
    for src in topo.sources:
        node = {"name": src.name, "parties": list(src.parties), "dims": list(src.dims)}
        if src.name in by_name:
            node["state"] = _state_node(by_name[src.name])
        doc["sources"].append(node)
    if scenario.state.global_rho is not None and not scenario.state.sources:
        doc["global_state"] = {"matrix": encode_matrix(scenario.state.global_rho)}
    obs = {}
    for party in topo.parties:
        pair = []
        for x in (0, 1):
            if party in params:
                pair.append({"kind": "params", **params[party][x].to_dict()})
            else:
                pair.append({"kind": "matrix", "matrix": encode_matrix(scenario.observables[party][x])})
        obs[party] = pair
    doc["observables"] = obs
    if scenario.independent_set is not None:
        doc["independent_set"] = [topo.parties[k] for k in scenario.independent_set]
    doc["tolerances"] = {f.name: getattr(scenario.tol, f.name) for f in fields(Tolerances)}
    doc["observable_class"] = scenario.obs_class
    return doc
