"""
Oracle - Dense reference simulators and exhaustive weighted model counting
Shares no evaluation code with the compiled pipeline.
"""

import logging
from typing import Dict, Optional, Sequence

import numpy as np

from src.circuit_ir import Circuit, GateApp, NoiseApp, gate_unitary, kraus_set
from src.cnf import Indicator, Parameter, WeightedCnf
from src.errors import OracleError

logger = logging.getLogger(__name__)

MAX_STATEVECTOR_QUBITS = 20
MAX_DENSITY_QUBITS = 10
MAX_WMC_VARS = 24

_CHUNK = 1 << 16


def _apply(tensor: np.ndarray, matrix: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract a 2^k x 2^k matrix into the given tensor axes"""
    k = len(axes)
    op = matrix.reshape([2] * (2 * k))
    result = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(result, list(range(k)), list(axes))


def _basis_state(bits: str) -> np.ndarray:
    state = np.zeros([2] * len(bits), dtype=complex)
    state[tuple(int(b) for b in bits)] = 1.0
    return state


def statevector_simulate(c: Circuit, max_qubits: int = MAX_STATEVECTOR_QUBITS) -> np.ndarray:
    """Amplitudes indexed with qubit 0 as the most significant bit"""
    if c.is_noisy():
        raise OracleError("statevector_simulate needs a noise-free circuit")
    if c.num_qubits > max_qubits:
        raise OracleError(f"{c.num_qubits} qubits exceed the state-vector limit of {max_qubits}")

    state = _basis_state(c.initial_state)
    for op in c.ops:
        state = _apply(state, gate_unitary(op), op.qubits)
    return state.reshape(-1)


def density_matrix_simulate(c: Circuit, max_qubits: int = MAX_DENSITY_QUBITS) -> np.ndarray:
    if c.num_qubits > max_qubits:
        raise OracleError(f"{c.num_qubits} qubits exceed the density-matrix limit of {max_qubits}")

    n = c.num_qubits
    ket = _basis_state(c.initial_state)
    rho = np.multiply.outer(ket, ket.conj())

    for op in c.ops:
        rows = list(op.qubits)
        cols = [q + n for q in rows]
        if isinstance(op, GateApp):
            u = gate_unitary(op)
            rho = _apply(_apply(rho, u, rows), u.conj(), cols)
        elif isinstance(op, NoiseApp):
            rho = sum(_apply(_apply(rho, e, rows), e.conj(), cols) for e in kraus_set(op).operators)

    dim = 1 << n
    return rho.reshape(dim, dim)


def brute_force_wmc(cnf: WeightedCnf, evidence: Optional[Dict[str, int]] = None,
                    binding: Optional[Dict[int, complex]] = None, max_vars: int = MAX_WMC_VARS) -> complex:
    """Sum over satisfying assignments of the product of positive-literal weights"""
    evidence = evidence or {}
    free = cnf.vars
    if len(free) > max_vars:
        raise OracleError(f"{len(free)} free variables exceed the enumeration limit of {max_vars}")

    # weight of each variable when true; false always weighs 1
    true_weight: Dict[int, complex] = {}
    for var in range(1, cnf.num_vars + 1):
        meaning = cnf.meanings.get(var)
        if isinstance(meaning, Parameter):
            if binding is not None:
                true_weight[var] = complex(binding[meaning.param])
            else:
                true_weight[var] = cnf.weights[var]
        elif isinstance(meaning, Indicator) and meaning.node in evidence:
            true_weight[var] = 1.0 if evidence[meaning.node] == meaning.value else 0.0

    fixed_factor = 1 + 0j
    for var, value in cnf.fixed.items():
        if value:
            fixed_factor *= true_weight.get(var, 1.0)
    if fixed_factor == 0:
        return 0j

    column = {var: j for j, var in enumerate(free)}
    total = 0j
    count = 1 << len(free)
    shifts = np.arange(len(free), dtype=np.int64)
    for start in range(0, count, _CHUNK):
        index = np.arange(start, min(count, start + _CHUNK), dtype=np.int64)
        bits = ((index[:, None] >> shifts) & 1).astype(bool)

        def value_of(lit: int) -> np.ndarray:
            var = abs(lit)
            if var in column:
                values = bits[:, column[var]]
            else:
                values = np.full(len(index), cnf.fixed[var])
            return values if lit > 0 else ~values

        satisfied = np.ones(len(index), dtype=bool)
        for clause in cnf.clauses:
            clause_value = np.zeros(len(index), dtype=bool)
            for lit in clause:
                clause_value |= value_of(lit)
            satisfied &= clause_value

        weights = np.ones(len(index), dtype=complex)
        for var, j in column.items():
            w = true_weight.get(var)
            if w is not None and w != 1:
                weights *= np.where(bits[:, j], w, 1.0)
        total += complex(np.sum(weights[satisfied]))

    return total * fixed_factor
