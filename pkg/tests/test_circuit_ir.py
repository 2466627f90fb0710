#!/usr/bin/env python
"""
Test script for the circuit model and its text format
Covers parsing, gate matrices, Kraus sets, encodability checks and round trips
"""

import sys
import os
# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import logging
import math

import numpy as np
from hypothesis import given, settings, strategies as st

from src.circuit_ir import (Circuit, GateApp, NoiseApp, gate_unitary, kraus_set, parse_circuit,
                            register_gate, serialize_circuit, unregister_gate, validate_circuit)
from src.errors import CircuitError, CircuitParseError

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

NOISY_BELL = """
# H, phase damping, CNOT
qubits 2
h 0
pd 0 0.36
cnot 0 1
"""

SQRT_HALF = 1 / math.sqrt(2)


def test_parse_noisy_bell():
    """Parse the running noisy Bell example"""
    print("\n" + "="*60)
    print("Testing Circuit Parsing")
    print("="*60)

    c = parse_circuit(NOISY_BELL)
    print(f"  Parsed: {c.num_qubits} qubits, ops {[op.kind for op in c.ops]}")
    assert c.num_qubits == 2
    assert [op.kind for op in c.ops] == ["H", "PHASE_DAMPING", "CNOT"]
    assert c.ops[1] == NoiseApp("PHASE_DAMPING", 0, (0.36,))
    assert c.ops[2].qubits == (0, 1)
    assert c.initial_state == "00"
    assert c.is_noisy()

    empty = parse_circuit("qubits 1")
    assert empty.num_qubits == 1 and empty.ops == ()

    init = parse_circuit("qubits 3\ninit 101\nx 1")
    assert init.initial_state == "101"


def test_parse_errors():
    """Malformed circuit text reports the offending line"""
    print("\n" + "="*60)
    print("Testing Parse Errors")
    print("="*60)

    cases = [
        ("qubits 2\nh 5", 2, "qubit out of range"),
        ("qubits 2\ncnot 0", 2, "arity mismatch"),
        ("qubits 2\nfoo 0", 2, "unknown gate or noise kind"),
        ("h 0\nqubits 2", 1, "must come first"),
        ("qubits 1\nrx 0 abc", 2, "expected a decimal number"),
        ("qubits 1\npd 0 1.5", 2, "outside [0, 1]"),
        ("qubits 2\ncnot 1 1", 2, "distinct"),
    ]
    for text, line, fragment in cases:
        try:
            parse_circuit(text)
        except CircuitParseError as e:
            print(f"  {text!r:28} -> {e}")
            assert e.line == line, f"expected line {line}, got {e.line}"
            assert fragment in str(e)
        else:
            raise AssertionError(f"{text!r} parsed without error")


def test_gate_matrices():
    """Standard unitaries for the gate library"""
    print("\n" + "="*60)
    print("Testing Gate Matrices")
    print("="*60)

    h = gate_unitary(GateApp("H", (0,)))
    assert np.allclose(h, [[SQRT_HALF, SQRT_HALF], [SQRT_HALF, -SQRT_HALF]])

    cnot = gate_unitary(GateApp("CNOT", (0, 1)))
    assert np.array_equal(cnot.real, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])

    assert np.allclose(gate_unitary(GateApp("RZ", (0,), (0.0,))), np.eye(2))
    assert np.allclose(gate_unitary(GateApp("CPHASE", (0, 1), (math.pi,))), np.diag([1, 1, 1, -1]))

    try:
        GateApp("RX", (0,), (float("nan"),))
    except CircuitError:
        pass
    else:
        raise AssertionError("non-finite angle accepted")


def test_kraus_sets():
    """Kraus operators for the noise library"""
    print("\n" + "="*60)
    print("Testing Kraus Sets")
    print("="*60)

    pd = kraus_set(NoiseApp("PHASE_DAMPING", 0, (0.36,)))
    assert len(pd) == 2
    assert np.allclose(pd.operators[0], np.diag([1, 0.8]))
    assert np.allclose(pd.operators[1], [[0, 0], [0, 0.6]])
    assert pd.is_diagonal() and pd.is_column_monomial()

    bf = kraus_set(NoiseApp("BITFLIP", 0, (0.0,)))
    assert len(bf) == 1 and np.allclose(bf.operators[0], np.eye(2))

    dep = kraus_set(NoiseApp("DEPOLARIZING_SYM", 0, (0.005,)))
    assert len(dep) == 4
    assert math.isclose(abs(dep.operators[0][0, 0]), math.sqrt(0.995))
    for op in dep.operators[1:]:
        assert math.isclose(np.max(np.abs(op)), math.sqrt(0.005 / 3))
    assert dep.completeness_residual() < 1e-12

    gad = kraus_set(NoiseApp("GENERALIZED_AMPLITUDE_DAMPING", 0, (0.3, 0.7)))
    assert gad.completeness_residual() < 1e-12 and not gad.is_diagonal()

    try:
        NoiseApp("DEPOLARIZING_ASYM", 0, (0.5, 0.4, 0.3))
    except CircuitError:
        pass
    else:
        raise AssertionError("asymmetric depolarizing above 1 accepted")


def test_validate_circuit():
    """Encodability diagnostics"""
    print("\n" + "="*60)
    print("Testing Circuit Validation")
    print("="*60)

    assert validate_circuit(parse_circuit(NOISY_BELL)) == []
    assert validate_circuit(parse_circuit("qubits 3\nh 0\nswap 0 2\ncz 2 1")) == []

    dense = np.kron(gate_unitary(GateApp("H", (0,))), gate_unitary(GateApp("H", (0,))))
    register_gate("HH", 2, lambda: dense, description="H on both qubits")
    try:
        c = Circuit(2, (GateApp("H", (0,)), GateApp("HH", (0, 1))))
        diagnostics = validate_circuit(c)
        print(f"  Diagnostics: {diagnostics}")
        assert len(diagnostics) == 1
        assert "op 1 (HH)" in diagnostics[0] and "gate not encodable; decompose" in diagnostics[0]
    finally:
        unregister_gate("HH")


def test_serialize_examples():
    """Serialized text parses back to the same circuit"""
    print("\n" + "="*60)
    print("Testing Circuit Serialization")
    print("="*60)

    c = parse_circuit(NOISY_BELL)
    text = serialize_circuit(c)
    print(text)
    assert text == "qubits 2\nh 0\npd 0 0.35999999999999999\ncnot 0 1\n"
    assert parse_circuit(text) == c

    with_init = Circuit(2, (GateApp("RX", (1,), (0.1,)),), "10")
    assert "init 10" in serialize_circuit(with_init)
    assert parse_circuit(serialize_circuit(with_init)) == with_init


_one_qubit = st.sampled_from(["X", "Y", "Z", "H", "S", "T"])
_rotations = st.sampled_from(["RX", "RY", "RZ"])
_angles = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)
_strengths = st.floats(min_value=0, max_value=1, allow_nan=False)


@st.composite
def circuits(draw):
    n = draw(st.integers(min_value=2, max_value=4))
    qubit = st.integers(min_value=0, max_value=n - 1)
    ops = []
    for _ in range(draw(st.integers(min_value=0, max_value=12))):
        choice = draw(st.integers(min_value=0, max_value=3))
        if choice == 0:
            ops.append(GateApp(draw(_one_qubit), (draw(qubit),)))
        elif choice == 1:
            ops.append(GateApp(draw(_rotations), (draw(qubit),), (draw(_angles),)))
        elif choice == 2:
            a, b = draw(st.lists(qubit, min_size=2, max_size=2, unique=True))
            ops.append(GateApp(draw(st.sampled_from(["CNOT", "CZ", "SWAP"])), (a, b)))
        else:
            ops.append(NoiseApp(draw(st.sampled_from(["BITFLIP", "PHASE_DAMPING", "AMPLITUDE_DAMPING"])),
                                draw(qubit), (draw(_strengths),)))
    bits = draw(st.text(alphabet="01", min_size=n, max_size=n))
    return Circuit(n, tuple(ops), bits)


@settings(max_examples=100, deadline=None)
@given(circuits())
def test_serialize_round_trip(c):
    assert parse_circuit(serialize_circuit(c)) == c


def main():
    """Main test runner"""
    print("\n" + "="*70)
    print("      Circuit IR Test")
    print("="*70)

    tests = [
        ("Parse Noisy Bell", test_parse_noisy_bell),
        ("Parse Errors", test_parse_errors),
        ("Gate Matrices", test_gate_matrices),
        ("Kraus Sets", test_kraus_sets),
        ("Validate Circuit", test_validate_circuit),
        ("Serialize Examples", test_serialize_examples),
        ("Serialize Round Trip", test_serialize_round_trip),
    ]

    results = []
    for i, (name, test) in enumerate(tests, start=1):
        print(f"\n[{i}/{len(tests)}] {name}...")
        try:
            test()
            results.append((name, True))
        except AssertionError as e:
            print(f"  ❌ {e}")
            results.append((name, False))

    # Summary
    print("\n" + "="*70)
    print("                        TEST SUMMARY")
    print("="*70)

    for test_name, passed in results:
        status = "✅ PASSED" if passed else "❌ FAILED"
        print(f"{test_name:25} {status}")

    if all(passed for _, passed in results):
        print("\n🎉 All tests passed!")
    else:
        print("\n⚠️  Some tests failed. Please check the output above.")
    print("\n" + "="*70)


if __name__ == "__main__":
    main()
