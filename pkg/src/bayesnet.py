"""
Bayes Net - Converts circuits into complex-valued Bayesian networks
Each node carries a conditional amplitude table (CAT) whose cells are ZERO, ONE
or a reference into the shared ParamTable.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from src.circuit_ir import (Circuit, GateApp, KrausSet, NoiseApp, gate_unitary, kraus_set,
                            two_qubit_encoding, validate_circuit)
from src.errors import BindingError, EncodingError

logger = logging.getLogger(__name__)

Cell = Tuple[Tuple[int, ...], int]


class Const(Enum):
    ZERO = 0
    ONE = 1

    def __repr__(self):
        return self.name


ZERO = Const.ZERO
ONE = Const.ONE


@dataclass(frozen=True)
class Param:
    pid: int


Entry = Union[Const, Param]


class NodeKind(Enum):
    QUBIT_STATE = "qubit_state"
    NOISE_EVENT = "noise_event"


@dataclass
class ConditionalAmplitudeTable:
    parent_ids: Tuple[str, ...]
    parent_domains: Tuple[int, ...]
    domain_size: int
    entries: Dict[Cell, Entry]

    def rows(self) -> Iterator[Tuple[int, ...]]:
        return itertools.product(*(range(d) for d in self.parent_domains))

    def cells(self) -> Iterator[Cell]:
        for row in self.rows():
            for value in range(self.domain_size):
                yield row, value

    def entry(self, parents: Tuple[int, ...], value: int) -> Entry:
        return self.entries[(tuple(parents), value)]

    def row_entries(self, parents: Tuple[int, ...]) -> List[Entry]:
        return [self.entries[(tuple(parents), v)] for v in range(self.domain_size)]

    def is_deterministic_row(self, parents: Tuple[int, ...]) -> bool:
        row = self.row_entries(parents)
        return row.count(ONE) == 1 and row.count(ZERO) == len(row) - 1

    def param_ids(self) -> List[int]:
        return sorted({e.pid for e in self.entries.values() if isinstance(e, Param)})


@dataclass
class BayesNode:
    id: str
    kind: NodeKind
    domain_size: int
    cat: ConditionalAmplitudeTable
    qubit: int
    time: int
    op_index: Optional[int] = None

    @property
    def parents(self) -> Tuple[str, ...]:
        return self.cat.parent_ids


@dataclass
class BayesNet:
    nodes: List[BayesNode]
    frontier: Dict[int, str]
    outputs: List[str]
    noise_events: List[str]
    initial_evidence: Dict[str, int]
    num_qubits: int = 0
    _index: Dict[str, BayesNode] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._index = {node.id: node for node in self.nodes}

    def node(self, node_id: str) -> BayesNode:
        return self._index[node_id]

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._index

    @property
    def query_nodes(self) -> List[str]:
        return list(self.noise_events) + list(self.outputs)


@dataclass
class ParamTable:
    entries: Dict[int, complex] = field(default_factory=dict)
    # pid -> cells (op index, node id, parent values, value) that use it
    provenance: Dict[int, Tuple[Tuple[Optional[int], str, Tuple[int, ...], int], ...]] = \
        field(default_factory=dict)

    def add(self, value: complex, origin: Tuple[Optional[int], str, Tuple[int, ...], int]) -> int:
        pid = len(self.entries)
        self.entries[pid] = complex(value)
        self.provenance[pid] = (origin,)
        return pid

    def attach(self, pid: int, origin: Tuple[Optional[int], str, Tuple[int, ...], int]):
        self.provenance[pid] = self.provenance[pid] + (origin,)

    def __len__(self):
        return len(self.entries)

    def values(self) -> Dict[int, complex]:
        return dict(self.entries)


@dataclass
class _RawNode:
    id: str
    kind: NodeKind
    qubit: int
    time: int
    op_index: Optional[int]
    parent_ids: Tuple[str, ...]
    parent_domains: Tuple[int, ...]
    domain_size: int
    raw: Dict[Cell, complex]


def raw_single_qubit(u: np.ndarray) -> Dict[Cell, complex]:
    """Transpose rule: cell (parent b, value b') holds u[b', b]"""
    return {((b,), v): complex(u[v, b]) for b in range(2) for v in range(2)}


def raw_controlled(u: np.ndarray, control_first: bool) -> Dict[Cell, complex]:
    """Cells over parents (control, target) for the new target value"""
    encoding = two_qubit_encoding(u)
    if encoding is None or encoding != control_first and not _preserves_both(u):
        raise EncodingError("two-qubit gate is not monomial with a preserved control qubit")

    def index(control: int, target: int) -> int:
        return (control << 1) | target if control_first else (target << 1) | control

    return {((c, t), v): complex(u[index(c, v), index(c, t)])
            for c in range(2) for t in range(2) for v in range(2)}


def _preserves_both(u: np.ndarray) -> bool:
    rows, cols = np.nonzero(u)
    return bool(np.all(rows == cols))


def _nonzero_row(column: np.ndarray) -> Optional[int]:
    rows = np.nonzero(column)[0]
    return int(rows[0]) if len(rows) else None


def raw_noise(kraus: KrausSet) -> Tuple[Dict[Cell, complex], Optional[Dict[Cell, complex]]]:
    """Event cells (parent b, event j) and the deterministic post-state cells, None when all diagonal"""
    event = {}
    post = {}
    for j, op in enumerate(kraus.operators):
        for b in range(2):
            row = _nonzero_row(op[:, b])
            event[((b,), j)] = complex(op[row, b]) if row is not None else 0j
            target = b if row is None else row
            for v in range(2):
                post[((b, j), v)] = 1 + 0j if v == target else 0j
    return event, (None if kraus.is_diagonal() else post)


def _fold(raw_node: _RawNode, params: ParamTable) -> ConditionalAmplitudeTable:
    entries = {}
    shared: Dict[Tuple[float, float], int] = {}
    for cell, value in raw_node.raw.items():
        if value == 0:
            entries[cell] = ZERO
        elif value == 1:
            entries[cell] = ONE
        else:
            origin = (raw_node.op_index, raw_node.id, cell[0], cell[1])
            key = (value.real, value.imag)
            if key in shared:
                params.attach(shared[key], origin)
            else:
                shared[key] = params.add(value, origin)
            entries[cell] = Param(shared[key])
    return ConditionalAmplitudeTable(raw_node.parent_ids, raw_node.parent_domains,
                                     raw_node.domain_size, entries)


def cat_from_single_qubit_gate(u: np.ndarray, params: ParamTable, parent_id: str = "parent",
                               node_id: str = "node") -> ConditionalAmplitudeTable:
    raw = _RawNode(node_id, NodeKind.QUBIT_STATE, 0, 0, None, (parent_id,), (2,), 2, raw_single_qubit(u))
    return _fold(raw, params)


def cat_from_controlled_gate(u: np.ndarray, control_first: bool, params: ParamTable,
                             parent_ids: Tuple[str, str] = ("control", "target"),
                             node_id: str = "node") -> ConditionalAmplitudeTable:
    raw = _RawNode(node_id, NodeKind.QUBIT_STATE, 0, 0, None, tuple(parent_ids), (2, 2), 2,
                   raw_controlled(u, control_first))
    return _fold(raw, params)


def cats_from_noise(kraus: KrausSet, params: ParamTable, parent_id: str = "parent",
                    event_id: str = "event", node_id: str = "node"
                    ) -> Tuple[ConditionalAmplitudeTable, Optional[ConditionalAmplitudeTable]]:
    event_raw, post_raw = raw_noise(kraus)
    event_cat = _fold(_RawNode(event_id, NodeKind.NOISE_EVENT, 0, 0, None, (parent_id,), (2,),
                               len(kraus), event_raw), params)
    if post_raw is None:
        return event_cat, None
    post_cat = _fold(_RawNode(node_id, NodeKind.QUBIT_STATE, 0, 0, None, (parent_id, event_id),
                              (2, len(kraus)), 2, post_raw), params)
    return event_cat, post_cat


def _raw_network(c: Circuit) -> Tuple[List[_RawNode], Dict[int, str], List[str]]:
    """Walk the circuit once, producing unfolded tables in topological order"""
    nodes: List[_RawNode] = []
    frontier: Dict[int, str] = {}
    events: List[str] = []

    for q in range(c.num_qubits):
        node_id = f"q{q}m0"
        nodes.append(_RawNode(node_id, NodeKind.QUBIT_STATE, q, 0, None, (), (), 2,
                              {((), 0): 1 + 0j, ((), 1): 1 + 0j}))
        frontier[q] = node_id

    for index, op in enumerate(c.ops):
        t = index + 1
        if isinstance(op, GateApp):
            if op.kind == "SWAP":
                a, b = op.qubits
                frontier[a], frontier[b] = frontier[b], frontier[a]
                continue
            u = gate_unitary(op)
            if len(op.qubits) == 1:
                q = op.qubits[0]
                node_id = f"q{q}m{t}"
                nodes.append(_RawNode(node_id, NodeKind.QUBIT_STATE, q, t, index, (frontier[q],), (2,), 2,
                                      raw_single_qubit(u)))
                frontier[q] = node_id
                continue

            control_first = two_qubit_encoding(u)
            if control_first is None:
                raise EncodingError(f"op {index} ({op.kind}): gate not encodable; decompose")
            control, target = op.qubits if control_first else op.qubits[::-1]
            node_id = f"q{target}m{t}"
            nodes.append(_RawNode(node_id, NodeKind.QUBIT_STATE, target, t, index,
                                  (frontier[control], frontier[target]), (2, 2), 2,
                                  raw_controlled(u, control_first)))
            frontier[target] = node_id

        elif isinstance(op, NoiseApp):
            q = op.qubit
            kraus = kraus_set(op)
            event_raw, post_raw = raw_noise(kraus)
            event_id = f"q{q}m{t}rv"
            nodes.append(_RawNode(event_id, NodeKind.NOISE_EVENT, q, t, index, (frontier[q],), (2,),
                                  len(kraus), event_raw))
            events.append(event_id)
            if post_raw is not None:
                node_id = f"q{q}m{t}"
                nodes.append(_RawNode(node_id, NodeKind.QUBIT_STATE, q, t, index, (frontier[q], event_id),
                                      (2, len(kraus)), 2, post_raw))
                frontier[q] = node_id

    return nodes, frontier, events


def circuit_to_bn(c: Circuit) -> Tuple[BayesNet, ParamTable]:
    diagnostics = validate_circuit(c)
    if diagnostics:
        raise EncodingError("; ".join(diagnostics))

    raw_nodes, frontier, events = _raw_network(c)
    params = ParamTable()
    nodes = []
    for raw in raw_nodes:
        cat = _fold(raw, params)
        nodes.append(BayesNode(raw.id, raw.kind, raw.domain_size, cat, raw.qubit, raw.time, raw.op_index))

    evidence = {f"q{q}m0": int(bit) for q, bit in enumerate(c.initial_state)}
    bn = BayesNet(nodes, dict(frontier), [frontier[q] for q in range(c.num_qubits)], events, evidence,
                  c.num_qubits)
    logger.info(f"Built Bayesian network: {len(nodes)} nodes, {len(events)} noise events, "
                f"{len(params)} parameters")
    return bn, params


def cell_amplitudes(c: Circuit) -> Dict[str, Dict[Cell, complex]]:
    """Raw per-cell amplitudes for every node, before 0/1 folding"""
    raw_nodes, _, _ = _raw_network(c)
    return {raw.id: dict(raw.raw) for raw in raw_nodes}


def binding_values(bn: BayesNet, params: ParamTable, c: Circuit) -> Dict[int, complex]:
    """
    Parameter values for a circuit with the same structure as the one bn was
    built from. Cells folded to ZERO/ONE must keep that exact value.
    """
    raw = cell_amplitudes(c)
    if set(raw) != {node.id for node in bn.nodes}:
        raise BindingError("circuit structure changed: node sets differ; recompile")

    values: Dict[int, complex] = {}
    for node in bn.nodes:
        node_raw = raw[node.id]
        for cell, entry in node.cat.entries.items():
            if cell not in node_raw:
                raise BindingError(f"circuit structure changed at {node.id}; recompile")
            value = node_raw[cell]
            if isinstance(entry, Param):
                previous = values.setdefault(entry.pid, value)
                if previous != value:
                    raise BindingError(f"parameter {entry.pid} at {node.id} no longer shared; recompile")
            elif value != entry.value:
                raise BindingError(f"circuit structure changed: {node.id} cell {cell} is {value}, "
                                   f"compiled as {entry.name}; recompile")

    missing = set(params.entries) - set(values)
    if missing:
        raise BindingError(f"no values derived for parameters {sorted(missing)}")
    return values


def _format_entry(entry: Entry, params: ParamTable) -> str:
    if isinstance(entry, Param):
        value = params.entries[entry.pid]
        return f"p{entry.pid}={value.real:+.6f}{value.imag:+.6f}j"
    return entry.name


def describe_bn(bn: BayesNet, params: ParamTable) -> str:
    """Human-readable dump of nodes, parents and tables"""
    lines = [f"# {len(bn.nodes)} nodes, outputs {bn.outputs}, events {bn.noise_events}"]
    for node in bn.nodes:
        evidence = bn.initial_evidence.get(node.id)
        suffix = f" evidence={evidence}" if evidence is not None else ""
        lines.append(f"node {node.id} {node.kind.value} domain={node.domain_size} "
                     f"parents={list(node.parents)}{suffix}")
        for row in node.cat.rows():
            cells = ", ".join(_format_entry(e, params) for e in node.cat.row_entries(row))
            lines.append(f"  {row} -> ({cells})")
    return "\n".join(lines)
