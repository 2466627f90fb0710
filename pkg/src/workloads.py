"""
Workloads - Benchmark circuit generators and noise injection
QAOA Max-Cut, VQE Ising grids, random circuit sampling and a small algorithm suite.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from src.circuit_ir import NOISE_LIBRARY, Circuit, GateApp, NoiseApp, Op
from src.errors import CircuitError, WorkloadError
from src.settings import get_config

logger = logging.getLogger(__name__)

MAX_RCS_QUBITS = 24
RCS_GATES = (("RX", (math.pi / 2,)), ("RY", (math.pi / 2,)), ("T", ()))


def _gate(kind: str, *qubits: int, params: Sequence[float] = ()) -> GateApp:
    return GateApp(kind, tuple(qubits), tuple(params))


def _per_layer(value: Union[float, Sequence[float], None], layers: int, default: float, name: str) -> List[float]:
    if value is None:
        values = [default] * layers
    elif isinstance(value, (int, float)):
        values = [float(value)] * layers
    else:
        values = [float(v) for v in value]
    if len(values) != layers:
        raise WorkloadError(f"{name} needs {layers} value(s), got {len(values)}")
    for v in values:
        if not math.isfinite(v):
            raise WorkloadError(f"{name} must be finite, got {v}")
    return values


def _zz(a: int, b: int, angle: float) -> List[Op]:
    return [_gate("CNOT", a, b), _gate("RZ", b, params=(angle,)), _gate("CNOT", a, b)]


def maxcut_graph(n: int, seed: int) -> nx.Graph:
    if n < 4 or n % 2:
        raise WorkloadError(f"3-regular Max-Cut graphs need an even vertex count >= 4, got {n}")
    return nx.random_regular_graph(3, n, seed=seed)


def build_qaoa_maxcut(n: int, p: int = 1, seed: int = 0, gamma=None, beta=None) -> Circuit:
    """H layer, then p rounds of ZZ cost terms per edge and an RX(2 beta) mixer"""
    if p < 0:
        raise WorkloadError(f"QAOA depth must be >= 0, got {p}")
    defaults = get_config().get('workloads', {})
    gammas = _per_layer(gamma, p, defaults.get('qaoa_gamma', 0.8), "gamma")
    betas = _per_layer(beta, p, defaults.get('qaoa_beta', 0.4), "beta")
    graph = maxcut_graph(n, seed)
    edges = sorted(tuple(sorted(e)) for e in graph.edges)

    ops: List[Op] = [_gate("H", q) for q in range(n)]
    for g, b in zip(gammas, betas):
        for u, v in edges:
            ops.extend(_zz(u, v, 2 * g))
        ops.extend(_gate("RX", q, params=(2 * b,)) for q in range(n))
    logger.debug(f"QAOA n={n} p={p} seed={seed}: {len(edges)} edges, {len(ops)} gates")
    return Circuit(n, tuple(ops))


def grid_edges(rows: int, cols: int) -> List[Tuple[int, int]]:
    edges = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c
            if c + 1 < cols:
                edges.append((q, q + 1))
            if r + 1 < rows:
                edges.append((q, q + cols))
    return edges


def build_vqe_ising(rows: int, cols: int, steps: int = 1, coupling=None, rx=None, rz=None) -> Circuit:
    """Nearest-neighbour ZZ couplings plus RX/RZ rotation layers, repeated per step"""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise WorkloadError(f"Ising grid needs at least two sites, got {rows}x{cols}")
    if steps < 0:
        raise WorkloadError(f"steps must be >= 0, got {steps}")
    defaults = get_config().get('workloads', {})
    couplings = _per_layer(coupling, steps, defaults.get('vqe_coupling', 0.6), "coupling")
    rx_angles = _per_layer(rx, steps, defaults.get('vqe_rx', 0.5), "rx")
    rz_angles = _per_layer(rz, steps, defaults.get('vqe_rz', 0.3), "rz")

    n = rows * cols
    edges = grid_edges(rows, cols)
    ops: List[Op] = []
    for j, x, z in zip(couplings, rx_angles, rz_angles):
        for a, b in edges:
            ops.extend(_zz(a, b, 2 * j))
        for q in range(n):
            ops.append(_gate("RX", q, params=(x,)))
            ops.append(_gate("RZ", q, params=(z,)))
    return Circuit(n, tuple(ops))


def build_rcs(n: int, depth: int, seed: int = 0) -> Circuit:
    """H layer, then alternating CZ chain layers with seeded random single-qubit gates"""
    if not 1 <= n <= MAX_RCS_QUBITS:
        raise WorkloadError(f"RCS width must be within 1..{MAX_RCS_QUBITS}, got {n}")
    if depth < 0:
        raise WorkloadError(f"RCS depth must be >= 0, got {depth}")

    rng = np.random.default_rng(seed)
    previous: Dict[int, Optional[int]] = {q: None for q in range(n)}
    ops: List[Op] = [_gate("H", q) for q in range(n)]
    for layer in range(depth):
        for a in range(layer % 2, n - 1, 2):
            ops.append(_gate("CZ", a, a + 1))
        for q in range(n):
            choices = [i for i in range(len(RCS_GATES)) if i != previous[q]]
            pick = choices[int(rng.integers(len(choices)))]
            kind, params = RCS_GATES[pick]
            ops.append(_gate(kind, q, params=params))
            previous[q] = pick
    return Circuit(n, tuple(ops))


def _bell() -> Circuit:
    return Circuit(2, (_gate("H", 0), _gate("CNOT", 0, 1)))


def _ghz(n: int = 3) -> Circuit:
    return Circuit(n, tuple([_gate("H", 0)] + [_gate("CNOT", q, q + 1) for q in range(n - 1)]))


def _teleport_core(theta: float = 1.1) -> Circuit:
    """Teleports RY(theta)|0> from qubit 0 to qubit 2 with coherent corrections"""
    return Circuit(3, (
        _gate("RY", 0, params=(theta,)),
        _gate("H", 1), _gate("CNOT", 1, 2),
        _gate("CNOT", 0, 1), _gate("H", 0),
        _gate("CNOT", 1, 2), _gate("CZ", 0, 2),
    ))


def _deutsch_jozsa(n: int = 3) -> Circuit:
    """Balanced parity oracle; inputs read all ones and the ancilla reads 1"""
    ancilla = n
    ops: List[Op] = [_gate("X", ancilla)]
    ops += [_gate("H", q) for q in range(n + 1)]
    ops += [_gate("CNOT", q, ancilla) for q in range(n)]
    ops += [_gate("H", q) for q in range(n + 1)]
    return Circuit(n + 1, tuple(ops))


def _phase_oracle(secret: str) -> List[Op]:
    return [_gate("Z", q) for q, bit in enumerate(secret) if bit == "1"]


def _bernstein_vazirani(secret: str = "1011") -> Circuit:
    n = len(secret)
    ops = [_gate("H", q) for q in range(n)] + _phase_oracle(secret) + [_gate("H", q) for q in range(n)]
    return Circuit(n, tuple(ops))


def _simon() -> Circuit:
    """Two input qubits with hidden period 11; inputs always read 00 or 11"""
    ops = [_gate("H", 0), _gate("H", 1),
           _gate("CNOT", 0, 2), _gate("CNOT", 1, 2),
           _gate("H", 0), _gate("H", 1)]
    return Circuit(4, tuple(ops))


def _hidden_shift(shift: str = "1011") -> Circuit:
    """Bent function x0 x1 + x2 x3, which is its own dual; the output is the shift"""
    if len(shift) != 4 or set(shift) - {"0", "1"}:
        raise WorkloadError(f"hidden shift must be a 4-bit string, got {shift!r}")
    flips = [_gate("X", q) for q, bit in enumerate(shift) if bit == "1"]
    bent = [_gate("CZ", 0, 1), _gate("CZ", 2, 3)]
    hadamards = [_gate("H", q) for q in range(4)]
    ops = hadamards + flips + bent + flips + hadamards + bent + hadamards
    return Circuit(4, tuple(ops))


def _qft(n: int = 3, initial_state: Optional[str] = None) -> Circuit:
    ops: List[Op] = []
    for j in range(n):
        ops.append(_gate("H", j))
        for k in range(j + 1, n):
            ops.append(_gate("CPHASE", k, j, params=(math.pi / 2 ** (k - j),)))
    for j in range(n // 2):
        ops.append(_gate("SWAP", j, n - 1 - j))
    return Circuit(n, tuple(ops), initial_state)


def _ccz(a: int, b: int, c: int) -> List[Op]:
    return [_gate("CPHASE", b, c, params=(math.pi / 2,)), _gate("CNOT", a, b),
            _gate("CPHASE", b, c, params=(-math.pi / 2,)), _gate("CNOT", a, b),
            _gate("CPHASE", a, c, params=(math.pi / 2,))]


def _grover(marked: str = "101", iterations: int = 2) -> Circuit:
    if len(marked) != 3 or set(marked) - {"0", "1"}:
        raise WorkloadError(f"grover marks a 3-bit item, got {marked!r}")
    zeros = [_gate("X", q) for q, bit in enumerate(marked) if bit == "0"]
    everything = [_gate("X", q) for q in range(3)]
    hadamards = [_gate("H", q) for q in range(3)]
    ops: List[Op] = list(hadamards)
    for _ in range(iterations):
        ops += zeros + _ccz(0, 1, 2) + zeros
        ops += hadamards + everything + _ccz(0, 1, 2) + everything + hadamards
    return Circuit(3, tuple(ops))


def _chsh(alice: float = 0.0, bob: float = math.pi / 4) -> Circuit:
    """Bell pair measured in bases rotated by the two settings"""
    return Circuit(2, (_gate("H", 0), _gate("CNOT", 0, 1),
                       _gate("RY", 0, params=(-alice,)), _gate("RY", 1, params=(-bob,))))


ALGORITHMS: Dict[str, Callable[..., Circuit]] = {
    "bell": _bell,
    "ghz": _ghz,
    "teleport-core": _teleport_core,
    "deutsch-jozsa": _deutsch_jozsa,
    "bernstein-vazirani": _bernstein_vazirani,
    "simon": _simon,
    "hidden-shift": _hidden_shift,
    "qft": _qft,
    "grover": _grover,
    "chsh": _chsh,
}


def build_algorithm(name: str, **options) -> Circuit:
    builder = ALGORITHMS.get(name)
    if builder is None:
        raise WorkloadError(f"Unknown algorithm {name!r}; choose from {', '.join(sorted(ALGORITHMS))}")
    try:
        return builder(**options)
    except TypeError as e:
        raise WorkloadError(f"Bad options for {name}: {e}") from e


def add_noise(c: Circuit, kind: str, p: Union[float, Sequence[float]]) -> Circuit:
    """Insert a noise application after every gate on each qubit it touches"""
    kind = kind.upper()
    aliases = {spec.text_name.upper(): name for name, spec in NOISE_LIBRARY.items()}
    kind = aliases.get(kind, kind)
    spec = NOISE_LIBRARY.get(kind)
    if spec is None:
        raise WorkloadError(f"Unknown noise kind {kind!r}")
    params = (float(p),) if isinstance(p, (int, float)) else tuple(float(x) for x in p)
    if len(params) != spec.num_params:
        raise WorkloadError(f"{kind} takes {spec.num_params} parameter(s), got {len(params)}")

    ops: List[Op] = []
    try:
        for op in c.ops:
            ops.append(op)
            if isinstance(op, GateApp):
                ops.extend(NoiseApp(kind, q, params) for q in op.qubits)
    except CircuitError as e:
        raise WorkloadError(str(e)) from e
    return c.with_ops(ops)


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    options: Dict[str, object] = field(default_factory=dict)

    def with_options(self, **options) -> 'WorkloadSpec':
        return replace(self, options={**self.options, **options})

    def label(self) -> str:
        if not self.options:
            return self.kind
        return self.kind + ":" + ",".join(f"{k}={v}" for k, v in sorted(self.options.items()))


_SPEC_DEFAULTS = {
    "qaoa": {"n": 8, "p": 1, "seed": 0},
    "vqe": {"rows": 2, "cols": 3, "steps": 1},
    "rcs": {"n": 5, "depth": 6, "seed": 0},
    "algo": {"name": "bell"},
}


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def parse_workload(text: str) -> WorkloadSpec:
    """'qaoa:n=8,p=1,seed=3', 'vqe:rows=3,cols=3', 'rcs:n=5,depth=10', 'algo:grover' or 'grover'"""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind in ALGORITHMS:
        kind, rest = "algo", f"name={kind}" + ("," + rest if rest else "")
    if kind not in _SPEC_DEFAULTS:
        raise WorkloadError(f"Unknown workload {text!r}")

    options = dict(_SPEC_DEFAULTS[kind])
    for item in filter(None, (part.strip() for part in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            if kind == "algo" and item in ALGORITHMS:
                options["name"] = item
                continue
            raise WorkloadError(f"Workload option {item!r} must look like key=value")
        options[key.strip()] = _coerce(value.strip())
    return WorkloadSpec(kind, options)


def build_workload(spec: WorkloadSpec) -> Circuit:
    options = dict(spec.options)
    noise = options.pop("noise", None)
    strength = options.pop("strength", 0.005)
    try:
        if spec.kind == "qaoa":
            circuit = build_qaoa_maxcut(**options)
        elif spec.kind == "vqe":
            circuit = build_vqe_ising(**options)
        elif spec.kind == "rcs":
            circuit = build_rcs(**options)
        elif spec.kind == "algo":
            circuit = build_algorithm(options.pop("name"), **options)
        else:
            raise WorkloadError(f"Unknown workload kind {spec.kind!r}")
    except TypeError as e:
        raise WorkloadError(f"Bad options for {spec.kind}: {e}") from e
    if noise:
        circuit = add_noise(circuit, str(noise), float(strength))
    return circuit
