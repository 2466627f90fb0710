"""
Query - Upward/downward passes over compiled arithmetic circuits
Amplitudes, derivatives, density matrices and output distributions with
parameter rebinding that never recompiles.
"""

import itertools
import logging
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.cnf import Indicator, Parameter
from src.ddnnf import ArithmeticCircuit
from src.errors import BindingError, EnumerationLimitError, QueryError, StaleCacheError
from src.settings import get_config

logger = logging.getLogger(__name__)

Evidence = Dict[str, int]

_NODE_LABEL = re.compile(r'^q(\d+)m(\d+)(rv)?$')

# leaf codes
_CONST, _INDICATOR, _PARAM, _AND, _OR = range(5)


@dataclass
class CircuitLayout:
    """Output nodes by qubit and noise-event nodes in circuit order"""
    outputs: List[str]
    noise_events: List[str]
    domains: Dict[str, int]

    @property
    def event_domains(self) -> List[int]:
        return [self.domains[e] for e in self.noise_events]

    @property
    def num_qubits(self) -> int:
        return len(self.outputs)


def layout_from_ac(ac: ArithmeticCircuit) -> CircuitLayout:
    domains = ac.query_nodes()
    if ac.outputs:
        missing = [n for n in list(ac.outputs) + list(ac.noise_events) if n not in domains]
        if missing:
            raise QueryError(f"layout names nodes without query indicators: {missing}")
        return CircuitLayout(list(ac.outputs), list(ac.noise_events), domains)

    # no recorded layout: fall back to q{i}m{t} labels
    outputs: Dict[int, str] = {}
    events = []
    for node in domains:
        match = _NODE_LABEL.match(node)
        if not match:
            continue
        qubit, step = int(match.group(1)), int(match.group(2))
        if match.group(3):
            events.append((step, qubit, node))
        elif qubit in outputs:
            raise QueryError(f"two output nodes for qubit {qubit}: {outputs[qubit]}, {node}")
        else:
            outputs[qubit] = node
    if outputs and sorted(outputs) != list(range(len(outputs))):
        raise QueryError(f"output nodes do not cover qubits 0..{len(outputs) - 1}")
    return CircuitLayout([outputs[q] for q in sorted(outputs)], [n for _, _, n in sorted(events)], domains)


class Session:
    """Compiled AC plus bindings and traversal caches; confine each instance to one thread"""

    def __init__(self, ac: ArithmeticCircuit, binding: Optional[Dict[int, complex]] = None,
                 config: Optional[dict] = None, layout: Optional[CircuitLayout] = None):
        self.ac = ac
        self.config = config or get_config()
        query_config = self.config.get('query', {})
        self.enumeration_limit = int(query_config.get('enumeration_limit', 1 << 20))
        self.batch_size = max(1, int(query_config.get('batch_size', 4096)))
        self.zero_tolerance = float(query_config.get('zero_tolerance', 1e-20))

        self.query_nodes = ac.query_nodes()
        self._layout = layout
        self._param_var = ac.param_vars()
        self.binding: Dict[int, complex] = {}
        self.upward: Optional[List[complex]] = None
        self.downward: Optional[List[complex]] = None
        self.dirty = True
        self.node_visits = 0
        self._evidence: Optional[Evidence] = None

        self._codes: List[int] = []
        self._leaf_info: List = []
        for node in ac.nodes:
            if node.kind == 'T':
                self._codes.append(_CONST)
                self._leaf_info.append(1 + 0j)
            elif node.kind == 'F':
                self._codes.append(_CONST)
                self._leaf_info.append(0j)
            elif node.kind == 'L':
                meaning = ac.meanings.get(node.var)
                if node.lit < 0:
                    self._codes.append(_CONST)
                    self._leaf_info.append(1 + 0j)
                elif isinstance(meaning, Parameter):
                    self._codes.append(_PARAM)
                    self._leaf_info.append(meaning.param)
                elif isinstance(meaning, Indicator):
                    self._codes.append(_INDICATOR)
                    self._leaf_info.append((meaning.node, meaning.value))
                else:
                    self._codes.append(_CONST)
                    self._leaf_info.append(1 + 0j)
            else:
                self._codes.append(_AND if node.kind == 'A' else _OR)
                self._leaf_info.append(node.children)

        default = {m.param: ac.weights[var] for var, m in ac.meanings.items()
                   if isinstance(m, Parameter) and var in ac.weights}
        self.rebind_params(binding if binding is not None else default)

    @property
    def layout(self) -> CircuitLayout:
        if self._layout is None:
            self._layout = layout_from_ac(self.ac)
        return self._layout

    def rebind_params(self, binding: Dict[int, complex]) -> 'Session':
        """Swap parameter values in place; caches are invalidated, nothing is recompiled"""
        missing = sorted(set(self._param_var) - set(binding))
        if missing:
            raise BindingError(f"binding is missing parameter ids {missing}")
        unknown = sorted(set(binding) - set(self._param_var))
        if unknown:
            raise BindingError(f"binding names unknown parameter ids {unknown}")
        self.binding = {pid: complex(value) for pid, value in binding.items()}
        self.dirty = True
        self.upward = None
        self.downward = None
        logger.debug(f"Rebound {len(self.binding)} parameters")
        return self

    def _check_evidence(self, evidence: Evidence):
        for node, value in evidence.items():
            domain = self.query_nodes.get(node)
            if domain is None:
                raise QueryError(f"evidence on {node!r}, which is not an output or noise-event node")
            if not 0 <= value < domain:
                raise QueryError(f"evidence {node}={value} outside domain 0..{domain - 1}")

    def evaluate(self, evidence: Evidence) -> complex:
        """Upward pass; fills the upward cache"""
        self._check_evidence(evidence)
        binding = self.binding
        up: List[complex] = []
        for code, info in zip(self._codes, self._leaf_info):
            if code == _CONST:
                up.append(info)
            elif code == _INDICATOR:
                node, value = info
                assigned = evidence.get(node)
                up.append(1 + 0j if assigned is None or assigned == value else 0j)
            elif code == _PARAM:
                up.append(binding[info])
            elif code == _AND:
                product = 1 + 0j
                for child in info:
                    product *= up[child]
                up.append(product)
            else:
                up.append(up[info[0]] + up[info[1]])

        self.node_visits += len(up)
        self.upward = up
        self.downward = None
        self._evidence = dict(evidence)
        self.dirty = False
        return up[self.ac.root]

    def differentiate(self) -> Dict[Tuple[str, int], complex]:
        """Downward pass: d f / d lambda for every query indicator (node, value)"""
        if self.dirty or self.upward is None:
            raise StaleCacheError("differentiate needs an evaluate for the current binding")
        up = self.upward
        down = [0j] * len(up)
        down[self.ac.root] = 1 + 0j
        for index in range(len(up) - 1, -1, -1):
            code = self._codes[index]
            parent = down[index]
            if code == _OR:
                low, high = self._leaf_info[index]
                down[low] += parent
                down[high] += parent
            elif code == _AND and parent != 0:
                children = self._leaf_info[index]
                prefix = 1 + 0j
                prefixes = []
                for child in children:
                    prefixes.append(prefix)
                    prefix *= up[child]
                suffix = 1 + 0j
                for k in range(len(children) - 1, -1, -1):
                    down[children[k]] += parent * prefixes[k] * suffix
                    suffix *= up[children[k]]

        self.node_visits += len(down)
        self.downward = down

        derivatives = {(node, value): 0j for node, domain in self.query_nodes.items() for value in range(domain)}
        for index, code in enumerate(self._codes):
            if code == _INDICATOR and self._leaf_info[index] in derivatives:
                derivatives[self._leaf_info[index]] += down[index]
        return derivatives

    def evaluate_batch(self, rows: Sequence[Evidence]) -> np.ndarray:
        """Vectorized upward pass over many evidence rows, in chunks of batch_size"""
        results = np.empty(len(rows), dtype=complex)
        for start in range(0, len(rows), self.batch_size):
            chunk = rows[start:start + self.batch_size]
            columns = {}
            for node in self.query_nodes:
                columns[node] = np.array([row.get(node, -1) for row in chunk], dtype=np.int64)
            for row in chunk:
                self._check_evidence(row)
            results[start:start + len(chunk)] = self._evaluate_columns(columns)
        return results

    def _evaluate_columns(self, columns: Dict[str, np.ndarray]):
        last_use = {}
        for index, code in enumerate(self._codes):
            if code in (_AND, _OR):
                for child in self._leaf_info[index]:
                    last_use[child] = index

        values: Dict[int, object] = {}
        binding = self.binding
        for index, (code, info) in enumerate(zip(self._codes, self._leaf_info)):
            if code == _CONST:
                value = info
            elif code == _INDICATOR:
                node, target = info
                column = columns[node]
                value = ((column == -1) | (column == target)).astype(complex)
            elif code == _PARAM:
                value = binding[info]
            elif code == _AND:
                value = 1 + 0j
                for child in info:
                    value = value * values[child]
            else:
                value = values[info[0]] + values[info[1]]
            values[index] = value
            if code in (_AND, _OR):
                for child in info:
                    if last_use.get(child) == index:
                        values.pop(child, None)
        self.node_visits += len(self._codes)
        return values[self.ac.root]

    def basis_amplitude(self, outputs: str, noise_events: Sequence[int] = ()) -> complex:
        layout = self.layout
        if len(outputs) != len(layout.outputs) or set(outputs) - {'0', '1'}:
            raise QueryError(f"expected a {len(layout.outputs)}-bit output string, got {outputs!r}")
        if len(noise_events) != len(layout.noise_events):
            raise QueryError(f"expected {len(layout.noise_events)} noise-event values, got {len(noise_events)}")
        evidence = {node: int(bit) for node, bit in zip(layout.outputs, outputs)}
        evidence.update({node: int(v) for node, v in zip(layout.noise_events, noise_events)})
        return self.evaluate(evidence)

    def event_assignments(self) -> List[Tuple[int, ...]]:
        return list(itertools.product(*(range(d) for d in self.layout.event_domains)))

    def amplitude_matrix(self) -> np.ndarray:
        """A[v, x]: amplitude of output x under noise-event assignment v"""
        layout = self.layout
        n = layout.num_qubits
        events = self.event_assignments()
        total = (1 << n) * len(events)
        if total > self.enumeration_limit:
            raise EnumerationLimitError(f"enumeration needs {total} amplitudes, limit is {self.enumeration_limit}")

        bitstrings = list(itertools.product((0, 1), repeat=n))
        rows = []
        for assignment in events:
            base = dict(zip(layout.noise_events, assignment))
            for bits in bitstrings:
                row = dict(base)
                row.update(zip(layout.outputs, bits))
                rows.append(row)
        logger.debug(f"Enumerating {total} amplitudes ({len(events)} noise-event assignments)")
        return self.evaluate_batch(rows).reshape(len(events), 1 << n)


def _hermitian(rho: np.ndarray) -> np.ndarray:
    return (rho + rho.conj().T) / 2


def density_matrix(s: Session) -> np.ndarray:
    amplitudes = s.amplitude_matrix()
    return _hermitian(amplitudes.T @ amplitudes.conj())


def density_components(s: Session) -> Dict[Tuple[int, ...], np.ndarray]:
    """Per noise-event assignment v, the component a_v a_v^dagger"""
    amplitudes = s.amplitude_matrix()
    return {v: np.outer(a, a.conj()) for v, a in zip(s.event_assignments(), amplitudes)}


def bitstring(index: int, width: int) -> str:
    return format(index, f'0{width}b') if width else ""


def output_distribution(s: Session) -> Dict[str, float]:
    amplitudes = s.amplitude_matrix()
    probabilities = np.sum(np.abs(amplitudes) ** 2, axis=0)
    width = s.layout.num_qubits
    return {bitstring(x, width): float(p) for x, p in enumerate(probabilities) if p > s.zero_tolerance}


def evaluate(s: Session, evidence: Evidence) -> complex:
    return s.evaluate(evidence)


def differentiate(s: Session) -> Dict[Tuple[str, int], complex]:
    return s.differentiate()


def rebind_params(s: Session, binding: Dict[int, complex]) -> Session:
    return s.rebind_params(binding)


def basis_amplitude(s: Session, outputs: str, noise_events: Sequence[int] = ()) -> complex:
    return s.basis_amplitude(outputs, noise_events)
