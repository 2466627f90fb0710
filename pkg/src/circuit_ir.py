"""
Circuit IR - Quantum circuit representation, gate/noise libraries and text format
Qubit 0 is the most significant bit of every basis index and bitstring.
"""

import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import CircuitError, CircuitParseError

logger = logging.getLogger(__name__)

UNITARY_TOLERANCE = 1e-9

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(theta: float) -> np.ndarray:
    return np.array([[cmath.exp(-0.5j * theta), 0], [0, cmath.exp(0.5j * theta)]], dtype=complex)


def _cphase(theta: float) -> np.ndarray:
    return np.diag([1, 1, 1, cmath.exp(1j * theta)]).astype(complex)


@dataclass(frozen=True)
class GateSpec:
    kind: str
    arity: int
    num_params: int
    text_name: str
    unitary_fn: Callable[..., np.ndarray] = field(compare=False, repr=False)
    description: str = ""


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    num_params: int
    text_name: str
    kraus_fn: Callable[..., List[np.ndarray]] = field(compare=False, repr=False)
    description: str = ""


GATE_LIBRARY: Dict[str, GateSpec] = {
    "X": GateSpec("X", 1, 0, "x", lambda: _X.copy(), "Pauli-X"),
    "Y": GateSpec("Y", 1, 0, "y", lambda: _Y.copy(), "Pauli-Y"),
    "Z": GateSpec("Z", 1, 0, "z", lambda: _Z.copy(), "Pauli-Z"),
    "H": GateSpec("H", 1, 0, "h", lambda: _H.copy(), "Hadamard"),
    "S": GateSpec("S", 1, 0, "s", lambda: np.diag([1, 1j]).astype(complex), "Phase"),
    "T": GateSpec("T", 1, 0, "t", lambda: np.diag([1, cmath.exp(0.25j * math.pi)]), "pi/8"),
    "RX": GateSpec("RX", 1, 1, "rx", _rx, "X rotation exp(-i theta X / 2)"),
    "RY": GateSpec("RY", 1, 1, "ry", _ry, "Y rotation exp(-i theta Y / 2)"),
    "RZ": GateSpec("RZ", 1, 1, "rz", _rz, "Z rotation exp(-i theta Z / 2)"),
    "CNOT": GateSpec("CNOT", 2, 0, "cnot", lambda: np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex), "Controlled NOT"),
    "CZ": GateSpec("CZ", 2, 0, "cz", lambda: np.diag([1, 1, 1, -1]).astype(complex), "Controlled Z"),
    "CPHASE": GateSpec("CPHASE", 2, 1, "cphase", _cphase, "Controlled phase"),
    "SWAP": GateSpec("SWAP", 2, 0, "swap", lambda: np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex), "Wire swap"),
}


def _bit_flip(p):
    return [math.sqrt(1 - p) * _I, math.sqrt(p) * _X]


def _phase_flip(p):
    return [math.sqrt(1 - p) * _I, math.sqrt(p) * _Z]


def _depolarizing(p):
    pauli = math.sqrt(p / 3)
    return [math.sqrt(1 - p) * _I, pauli * _X, pauli * _Y, pauli * _Z]


def _asymmetric_depolarizing(px, py, pz):
    rest = max(0.0, 1 - px - py - pz)
    return [math.sqrt(rest) * _I, math.sqrt(px) * _X, math.sqrt(py) * _Y, math.sqrt(pz) * _Z]


def _amplitude_damping(gamma):
    return [np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
            np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)]


def _generalized_amplitude_damping(gamma, p):
    keep, excite = math.sqrt(p), math.sqrt(1 - p)
    return [keep * np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
            keep * np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
            excite * np.array([[math.sqrt(1 - gamma), 0], [0, 1]], dtype=complex),
            excite * np.array([[0, 0], [math.sqrt(gamma), 0]], dtype=complex)]


def _phase_damping(gamma):
    return [np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
            np.array([[0, 0], [0, math.sqrt(gamma)]], dtype=complex)]


NOISE_LIBRARY: Dict[str, NoiseSpec] = {
    "BITFLIP": NoiseSpec("BITFLIP", 1, "bf", _bit_flip, "Bit flip mixture"),
    "PHASEFLIP": NoiseSpec("PHASEFLIP", 1, "pf", _phase_flip, "Phase flip mixture"),
    "DEPOLARIZING_SYM": NoiseSpec("DEPOLARIZING_SYM", 1, "dep", _depolarizing,
                                  "Symmetric depolarizing mixture"),
    "DEPOLARIZING_ASYM": NoiseSpec("DEPOLARIZING_ASYM", 3, "adep", _asymmetric_depolarizing,
                                   "Asymmetric depolarizing mixture"),
    "AMPLITUDE_DAMPING": NoiseSpec("AMPLITUDE_DAMPING", 1, "ad", _amplitude_damping,
                                   "Amplitude damping channel (T1)"),
    "GENERALIZED_AMPLITUDE_DAMPING": NoiseSpec("GENERALIZED_AMPLITUDE_DAMPING", 2, "gad",
                                               _generalized_amplitude_damping,
                                               "Generalized amplitude damping channel"),
    "PHASE_DAMPING": NoiseSpec("PHASE_DAMPING", 1, "pd", _phase_damping, "Phase damping channel (T2)"),
}


def register_gate(kind: str, arity: int, unitary_fn: Callable[..., np.ndarray],
                  num_params: int = 0, text_name: Optional[str] = None, description: str = ""):
    """Add or replace a gate kind; validate_circuit decides whether it is encodable"""
    kind = kind.upper()
    GATE_LIBRARY[kind] = GateSpec(kind, arity, num_params, text_name or kind.lower(), unitary_fn, description)
    logger.info(f"Registered gate {kind} (arity {arity})")


def unregister_gate(kind: str):
    GATE_LIBRARY.pop(kind.upper(), None)


def _check_params(kind: str, params: Tuple[float, ...], expected: int):
    if len(params) != expected:
        raise CircuitError(f"{kind} takes {expected} parameter(s), got {len(params)}")
    for value in params:
        if not math.isfinite(value):
            raise CircuitError(f"{kind} parameter is not finite: {value}")


@dataclass(frozen=True)
class GateApp:
    kind: str
    qubits: Tuple[int, ...]
    params: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'kind', self.kind.upper())
        object.__setattr__(self, 'qubits', tuple(int(q) for q in self.qubits))
        object.__setattr__(self, 'params', tuple(float(p) for p in self.params))

        spec = GATE_LIBRARY.get(self.kind)
        if spec is None:
            raise CircuitError(f"Unknown gate kind: {self.kind}")
        if len(self.qubits) != spec.arity:
            raise CircuitError(f"{self.kind} acts on {spec.arity} qubit(s), got {len(self.qubits)}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"{self.kind} qubits must be distinct: {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError(f"Negative qubit index in {self.kind}")
        _check_params(self.kind, self.params, spec.num_params)


@dataclass(frozen=True)
class NoiseApp:
    kind: str
    qubit: int
    params: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'kind', self.kind.upper())
        object.__setattr__(self, 'qubit', int(self.qubit))
        object.__setattr__(self, 'params', tuple(float(p) for p in self.params))

        spec = NOISE_LIBRARY.get(self.kind)
        if spec is None:
            raise CircuitError(f"Unknown noise kind: {self.kind}")
        if self.qubit < 0:
            raise CircuitError(f"Negative qubit index in {self.kind}")
        _check_params(self.kind, self.params, spec.num_params)
        for value in self.params:
            if not 0.0 <= value <= 1.0:
                raise CircuitError(f"{self.kind} parameter outside [0, 1]: {value}")
        if self.kind == "DEPOLARIZING_ASYM" and sum(self.params) > 1.0 + 1e-12:
            raise CircuitError(f"DEPOLARIZING_ASYM probabilities sum above 1: {sum(self.params)}")

    @property
    def qubits(self) -> Tuple[int, ...]:
        return (self.qubit,)


Op = Union[GateApp, NoiseApp]


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    ops: Tuple[Op, ...] = ()
    initial_state: Optional[str] = None

    def __post_init__(self):
        if self.num_qubits < 1:
            raise CircuitError(f"Circuit needs at least one qubit, got {self.num_qubits}")
        object.__setattr__(self, 'ops', tuple(self.ops))
        if self.initial_state is None:
            object.__setattr__(self, 'initial_state', "0" * self.num_qubits)
        if len(self.initial_state) != self.num_qubits or set(self.initial_state) - {"0", "1"}:
            raise CircuitError(f"Initial state must be a {self.num_qubits}-bit string: {self.initial_state!r}")
        for index, op in enumerate(self.ops):
            for q in op.qubits:
                if q >= self.num_qubits:
                    raise CircuitError(f"Op {index} ({op.kind}) uses qubit {q} outside width {self.num_qubits}")

    @property
    def gates(self) -> List[GateApp]:
        return [op for op in self.ops if isinstance(op, GateApp)]

    @property
    def noise(self) -> List[NoiseApp]:
        return [op for op in self.ops if isinstance(op, NoiseApp)]

    def is_noisy(self) -> bool:
        return any(isinstance(op, NoiseApp) for op in self.ops)

    def with_ops(self, ops: Sequence[Op]) -> 'Circuit':
        return Circuit(self.num_qubits, tuple(ops), self.initial_state)


@dataclass(frozen=True, eq=False)
class KrausSet:
    operators: Tuple[np.ndarray, ...]

    def completeness_residual(self) -> float:
        total = sum(op.conj().T @ op for op in self.operators)
        return float(np.max(np.abs(total - _I)))

    def is_column_monomial(self) -> bool:
        return all(np.count_nonzero(op[:, col]) <= 1 for op in self.operators for col in range(2))

    def is_diagonal(self) -> bool:
        return all(op[0, 1] == 0 and op[1, 0] == 0 for op in self.operators)

    def __len__(self):
        return len(self.operators)


def gate_unitary(app: GateApp) -> np.ndarray:
    """Standard unitary for a gate application, 2x2 or 4x4"""
    return np.asarray(GATE_LIBRARY[app.kind].unitary_fn(*app.params), dtype=complex)


def is_unitary(u: np.ndarray, tolerance: float = UNITARY_TOLERANCE) -> bool:
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tolerance)


def kraus_set(app: NoiseApp) -> KrausSet:
    """Kraus operators of a noise application; zero operators are dropped"""
    operators = [np.asarray(op, dtype=complex) for op in NOISE_LIBRARY[app.kind].kraus_fn(*app.params)]
    kept = tuple(op for op in operators if np.count_nonzero(op)) or (operators[0],)
    kraus = KrausSet(kept)

    residual = kraus.completeness_residual()
    if residual > UNITARY_TOLERANCE:
        raise CircuitError(f"{app.kind}{app.params}: Kraus completeness violated by {residual:.3e}")
    return kraus


def two_qubit_encoding(u: np.ndarray) -> Optional[bool]:
    """
    For a monomial 4x4 unitary that leaves one qubit's value unchanged, return
    True when that qubit is the first (high) one and False when it is the second.
    None means the gate has no single-node encoding.
    """
    nonzero = u != 0
    if np.any(nonzero.sum(axis=0) != 1) or np.any(nonzero.sum(axis=1) != 1):
        return None
    rows, cols = np.nonzero(nonzero)
    if np.all((rows >> 1) == (cols >> 1)):
        return True
    if np.all((rows & 1) == (cols & 1)):
        return False
    return None


def validate_circuit(c: Circuit) -> List[str]:
    """Diagnostics for every op lacking a Bayesian network encoding; empty means encodable"""
    diagnostics = []
    for index, op in enumerate(c.ops):
        if isinstance(op, GateApp):
            spec = GATE_LIBRARY.get(op.kind)
            if spec is None:
                diagnostics.append(f"op {index} ({op.kind}): unknown gate")
                continue
            u = gate_unitary(op)
            if u.shape != (2 ** spec.arity, 2 ** spec.arity) or not is_unitary(u):
                diagnostics.append(f"op {index} ({op.kind}): matrix is not unitary")
                continue
            if spec.arity == 1 or op.kind == "SWAP":
                continue
            if spec.arity != 2 or two_qubit_encoding(u) is None:
                diagnostics.append(f"op {index} ({op.kind}): gate not encodable; decompose")
        else:
            try:
                kraus = kraus_set(op)
            except CircuitError as e:
                diagnostics.append(f"op {index} ({op.kind}): {e}")
                continue
            if not kraus.is_column_monomial():
                diagnostics.append(f"op {index} ({op.kind}): Kraus operators not column-monomial")
    return diagnostics


def _text_syntax() -> Dict[str, Tuple[str, str]]:
    syntax = {spec.text_name: ("gate", kind) for kind, spec in GATE_LIBRARY.items()}
    syntax.update({spec.text_name: ("noise", kind) for kind, spec in NOISE_LIBRARY.items()})
    return syntax


def _parse_number(token: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise CircuitParseError(f"expected a decimal number, got {token!r}", line_no)
    if not math.isfinite(value):
        raise CircuitParseError(f"number is not finite: {token!r}", line_no)
    return value


def _parse_index(token: str, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise CircuitParseError(f"expected a qubit index, got {token!r}", line_no)


def parse_circuit(text: str) -> Circuit:
    """Parse the line-based circuit format into a validated Circuit"""
    syntax = _text_syntax()
    num_qubits = None
    initial_state = None
    ops = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split('#', 1)[0].split()
        if not tokens:
            continue
        name, args = tokens[0].lower(), tokens[1:]

        if name == "qubits":
            if num_qubits is not None:
                raise CircuitParseError("duplicate 'qubits' statement", line_no)
            if len(args) != 1:
                raise CircuitParseError("usage: qubits N", line_no)
            num_qubits = _parse_index(args[0], line_no)
            if num_qubits < 1:
                raise CircuitParseError(f"qubit count must be positive, got {num_qubits}", line_no)
            continue

        if num_qubits is None:
            raise CircuitParseError("'qubits N' must come first", line_no)

        if name == "init":
            if initial_state is not None or len(args) != 1:
                raise CircuitParseError("usage: init BITSTRING (once)", line_no)
            initial_state = args[0]
            if len(initial_state) != num_qubits or set(initial_state) - {"0", "1"}:
                raise CircuitParseError(f"init needs a {num_qubits}-bit string", line_no)
            continue

        if name not in syntax:
            raise CircuitParseError(f"unknown gate or noise kind {name!r}", line_no)
        category, kind = syntax[name]

        if category == "gate":
            spec = GATE_LIBRARY[kind]
            arity, num_params = spec.arity, spec.num_params
        else:
            arity, num_params = 1, NOISE_LIBRARY[kind].num_params
        if len(args) != arity + num_params:
            raise CircuitParseError(
                f"arity mismatch: {name} takes {arity} qubit(s) and {num_params} parameter(s)", line_no)

        qubits = [_parse_index(tok, line_no) for tok in args[:arity]]
        for q in qubits:
            if not 0 <= q < num_qubits:
                raise CircuitParseError(f"qubit out of range: {q} (circuit has {num_qubits})", line_no)
        params = [_parse_number(tok, line_no) for tok in args[arity:]]

        try:
            if category == "gate":
                ops.append(GateApp(kind, tuple(qubits), tuple(params)))
            else:
                ops.append(NoiseApp(kind, qubits[0], tuple(params)))
        except CircuitError as e:
            raise CircuitParseError(str(e), line_no) from e

    if num_qubits is None:
        raise CircuitParseError("missing 'qubits N' statement", None)

    circuit = Circuit(num_qubits, tuple(ops), initial_state)
    logger.debug(f"Parsed circuit: {num_qubits} qubits, {len(ops)} ops")
    return circuit


def _format_number(value: float) -> str:
    return format(value, '.17g')


def serialize_circuit(c: Circuit) -> str:
    """Inverse of parse_circuit"""
    lines = [f"qubits {c.num_qubits}"]
    if c.initial_state != "0" * c.num_qubits:
        lines.append(f"init {c.initial_state}")
    for op in c.ops:
        if isinstance(op, GateApp):
            name = GATE_LIBRARY[op.kind].text_name
        else:
            name = NOISE_LIBRARY[op.kind].text_name
        tokens = [name] + [str(q) for q in op.qubits] + [_format_number(p) for p in op.params]
        lines.append(" ".join(tokens))
    return "\n".join(lines) + "\n"
