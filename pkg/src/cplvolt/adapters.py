"""Reductions of AC, MT-HVDC and DC-microgrid steady states to ``(A, b, w)``.

All quantities are SI (V, A, Ohm, S, W, var). Node numbering in the
``from_dict`` documents is 1-based unless explicit string ids are used.
Inductances, capacitances and converter time constants may appear in input
documents; the steady-state reduction ignores them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ParseError, SystemData, ValidationReport, validate_system


class SpecError(ValueError):
    """Malformed network description."""


def incidence_from_lines(n_nodes: int, lines) -> np.ndarray:
    """Node-by-line incidence with each line oriented lower index -> +1."""
    B = np.zeros((n_nodes, len(lines)))
    for k, (i, j) in enumerate(lines):
        if i == j or not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise SpecError(f"line {k + 1} has invalid endpoints ({i}, {j})")
        lo, hi = min(i, j), max(i, j)
        B[lo, k] = 1.0
        B[hi, k] = -1.0
    return B


def weighted_laplacian(B: np.ndarray, conductance) -> np.ndarray:
    L = (B * np.asarray(conductance, dtype=float)) @ B.T
    off = L - np.diag(np.diag(L))
    if np.any(off > 1e-12 * np.max(np.abs(L), initial=1.0)):
        raise SpecError("weighted Laplacian has a positive off-diagonal entry")
    return L


@dataclass(frozen=True)
class AcGridSpec:
    """Decoupled reactive-power balance with ZIP loads.

    ``lines`` holds ``(i, j, B_ij)`` with 0-based nodes and ``B_ij <= 0``.
    ``Y``, ``k`` and ``Q`` are the impedance, current and power parts of the
    reactive ZIP load at each node.
    """
    Y: np.ndarray
    k: np.ndarray
    Q: np.ndarray
    lines: tuple = ()

    @property
    def n(self) -> int:
        return len(self.Y)


@dataclass(frozen=True)
class HvdcSpec:
    """Multi-terminal HVDC network reduced to its power-controlled nodes.

    ``B_V`` (s x m) and ``B_P`` (n x m) are the split node-edge incidence
    matrices, ``r`` the line resistances, ``G`` the shunt conductances of the
    power nodes, ``V_V`` the fixed voltages and ``P`` the power setpoints.
    """
    B_V: np.ndarray
    B_P: np.ndarray
    r: np.ndarray
    G: np.ndarray
    V_V: np.ndarray
    P: np.ndarray

    @property
    def n(self) -> int:
        return len(self.P)

    @classmethod
    def from_lines(cls, V_V, P, G, lines):
        """Build from ``(u, v, r)`` lines over stacked nodes (voltage nodes first)."""
        s = len(V_V)
        n = len(P)
        B = incidence_from_lines(s + n, [(u, v) for u, v, _ in lines])
        r = np.array([line[2] for line in lines], dtype=float)
        return cls(B[:s], B[s:], r, np.asarray(G, float), np.asarray(V_V, float),
                   np.asarray(P, float))


@dataclass(frozen=True)
class DcMicrogridSpec:
    """Kron-reduced DC microgrid with ZIP loads behind RL filters."""
    Rt: np.ndarray
    Y: np.ndarray
    k: np.ndarray
    P: np.ndarray
    u: np.ndarray
    lines: tuple = ()       # (i, j, R) with 0-based nodes

    @property
    def n(self) -> int:
        return len(self.P)


def build_from_ac(spec: AcGridSpec) -> tuple[SystemData, ValidationReport]:
    n = spec.n
    Y = np.asarray(spec.Y, float)
    A = np.zeros((n, n))
    for i, j, Bij in spec.lines:
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise SpecError(f"line ({i}, {j}) has invalid endpoints")
        if Bij > 0:
            raise SpecError(f"line ({i + 1}, {j + 1}): susceptance must be <= 0, got {Bij}")
        g = abs(Bij)
        A[i, j] -= g
        A[j, i] -= g
        A[i, i] += g
        A[j, j] += g
    A -= np.diag(Y)
    sys = SystemData(A, -np.asarray(spec.Q, float), np.asarray(spec.k, float))
    return sys, validate_system(sys)


def build_from_hvdc(spec: HvdcSpec) -> tuple[SystemData, ValidationReport]:
    B_V = np.atleast_2d(np.asarray(spec.B_V, float))
    B_P = np.atleast_2d(np.asarray(spec.B_P, float))
    r = np.asarray(spec.r, float)
    if np.any(r <= 0):
        raise SpecError("line resistances must be positive")
    if np.any(np.asarray(spec.G) < 0):
        raise SpecError("shunt conductances must be nonnegative")
    stacked = np.vstack([B_V, B_P])
    if stacked.shape[1] != r.size:
        raise SpecError("incidence matrices and resistance vector disagree on line count")
    if not (np.all(np.isin(stacked, (-1, 0, 1)))
            and np.all((stacked == 1).sum(axis=0) == 1)
            and np.all((stacked == -1).sum(axis=0) == 1)):
        raise SpecError("each incidence column needs exactly one +1 and one -1")
    A = weighted_laplacian(B_P, 1.0 / r) + np.diag(spec.G)
    w = -(B_P * (1.0 / r)) @ B_V.T @ np.asarray(spec.V_V, float)
    sys = SystemData(A, np.asarray(spec.P, float), w)
    return sys, validate_system(sys)


def build_from_dc_microgrid(spec: DcMicrogridSpec) -> tuple[SystemData, ValidationReport]:
    Rt = np.asarray(spec.Rt, float)
    Y = np.asarray(spec.Y, float)
    if np.any(Rt <= 0):
        raise SpecError("filter resistances must be positive")
    if np.any(Y < 0):
        raise SpecError("impedance loads must be nonnegative")
    R = np.array([line[2] for line in spec.lines], dtype=float)
    if np.any(R <= 0):
        raise SpecError("line resistances must be positive")
    B = incidence_from_lines(spec.n, [(i, j) for i, j, _ in spec.lines])
    A = np.diag(1.0 / Rt) + np.diag(Y) + weighted_laplacian(B, 1.0 / R)
    w = np.asarray(spec.u, float) / Rt - np.asarray(spec.k, float)
    sys = SystemData(A, np.asarray(spec.P, float), w)
    return sys, validate_system(sys)


# -- JSON documents ---------------------------------------------------------

def _num(doc, key, where, default=None):
    v = doc.get(key, default)
    if v is None:
        raise ParseError(f"{where}: missing '{key}'")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: '{key}' must be a number")
    return float(v)


def _node_index(nodes, where):
    index = {}
    for pos, node in enumerate(nodes):
        if not isinstance(node, dict):
            raise ParseError(f"{where}: node {pos + 1} must be an object")
        key = node.get("id", pos + 1)
        if key in index:
            raise ParseError(f"{where}: duplicate node id {key!r}")
        index[key] = pos
    return index


def _lines(doc, index, param, where):
    lines = doc.get("lines", [])
    if not isinstance(lines, list):
        raise ParseError(f"{where}: 'lines' must be a list")
    out = []
    for k, line in enumerate(lines):
        if not isinstance(line, dict):
            raise ParseError(f"{where}: line {k + 1} must be an object")
        try:
            i, j = index[line.get("from")], index[line.get("to")]
        except KeyError:
            raise ParseError(f"{where}: line {k + 1} references an unknown node") from None
        out.append((i, j, _num(line, param, f"{where} line {k + 1}")))
    return tuple(out)


def _nodes(doc, key, where):
    nodes = doc.get(key)
    if not isinstance(nodes, list) or not nodes:
        raise ParseError(f"{where}: '{key}' must be a non-empty list")
    return nodes


def ac_from_dict(doc: dict) -> AcGridSpec:
    nodes = _nodes(doc, "nodes", "ac")
    index = _node_index(nodes, "ac")
    Y = [_num(nd, "Y", "ac node", 0.0) for nd in nodes]
    k = [_num(nd, "k", "ac node", 0.0) for nd in nodes]
    Q = [_num(nd, "Q", "ac node") for nd in nodes]
    return AcGridSpec(np.array(Y), np.array(k), np.array(Q), _lines(doc, index, "B", "ac"))


def hvdc_from_dict(doc: dict) -> HvdcSpec:
    vnodes = _nodes(doc, "v_nodes", "hvdc")
    pnodes = _nodes(doc, "p_nodes", "hvdc")
    V = [_num(nd, "V", "hvdc v_node") for nd in vnodes]
    P = [_num(nd, "P", "hvdc p_node") for nd in pnodes]
    G = [_num(nd, "G", "hvdc p_node", 0.0) for nd in pnodes]
    if "incidence" in doc:
        inc = doc["incidence"]
        try:
            B_V = np.array(inc["B_V"], dtype=float).reshape(len(V), -1)
            B_P = np.array(inc["B_P"], dtype=float).reshape(len(P), -1)
            r = np.array(doc["r"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"hvdc: bad incidence block: {exc}") from None
        return HvdcSpec(B_V, B_P, r, np.array(G), np.array(V), np.array(P))
    # ids are namespaced so voltage and power nodes may share labels
    ids = {("V", nd.get("id", f"V{p + 1}")): p for p, nd in enumerate(vnodes)}
    ids.update({("P", nd.get("id", f"P{p + 1}")): len(V) + p for p, nd in enumerate(pnodes)})
    flat = {}
    for (_, key), pos in ids.items():
        if key in flat:
            raise ParseError(f"hvdc: node id {key!r} is ambiguous")
        flat[key] = pos
    lines = _lines(doc, flat, "r", "hvdc")
    return HvdcSpec.from_lines(V, P, G, lines)


def dc_microgrid_from_dict(doc: dict) -> DcMicrogridSpec:
    nodes = _nodes(doc, "nodes", "dc_microgrid")
    index = _node_index(nodes, "dc_microgrid")
    where = "dc_microgrid node"
    return DcMicrogridSpec(
        Rt=np.array([_num(nd, "Rt", where) for nd in nodes]),
        Y=np.array([_num(nd, "Y", where, 0.0) for nd in nodes]),
        k=np.array([_num(nd, "k", where, 0.0) for nd in nodes]),
        P=np.array([_num(nd, "P", where) for nd in nodes]),
        u=np.array([_num(nd, "u", where) for nd in nodes]),
        lines=_lines(doc, index, "R", "dc_microgrid"),
    )


MODELS = ("raw", "ac", "hvdc", "dc_microgrid")


def system_from_document(doc: dict) -> tuple[str, SystemData, ValidationReport]:
    """Dispatch on the top-level ``model`` tag and reduce to canonical form."""
    model = doc.get("model", "raw")
    if model == "raw":
        sys = SystemData.from_dict(doc)
        return model, sys, validate_system(sys)
    try:
        if model == "ac":
            sys, report = build_from_ac(ac_from_dict(doc))
        elif model == "hvdc":
            sys, report = build_from_hvdc(hvdc_from_dict(doc))
        elif model == "dc_microgrid":
            sys, report = build_from_dc_microgrid(dc_microgrid_from_dict(doc))
        else:
            raise ParseError(f"unknown model tag {model!r}; expected one of {MODELS}")
    except SpecError as exc:
        raise ParseError(str(exc)) from None
    return model, sys, report
