#!/usr/bin/env python
"""
Test script for the circuit to Bayesian network conversion
Checks node sets, conditional amplitude tables and parameter rebinding
"""

import sys
import os
# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import cmath
import logging
import math

import numpy as np

from src.bayesnet import (ONE, ZERO, NodeKind, Param, ParamTable, binding_values, cat_from_controlled_gate,
                          cat_from_single_qubit_gate, cats_from_noise, cell_amplitudes, circuit_to_bn,
                          describe_bn)
from src.circuit_ir import (Circuit, GateApp, NoiseApp, gate_unitary, kraus_set, parse_circuit,
                            register_gate, unregister_gate)
from src.errors import BindingError, EncodingError

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

NOISY_BELL = "qubits 2\nh 0\npd 0 0.36\ncnot 0 1\n"
SQRT_HALF = 1 / math.sqrt(2)


def _unitary(kind, *params, qubits=(0,)):
    return gate_unitary(GateApp(kind, qubits, params))


def test_network_structure():
    """Node sets for the worked examples"""
    print("\n" + "="*60)
    print("Testing Network Structure")
    print("="*60)

    bn, params = circuit_to_bn(parse_circuit(NOISY_BELL))
    ids = [node.id for node in bn.nodes]
    print(f"  Noisy Bell nodes: {ids}")
    assert set(ids) == {"q0m0", "q1m0", "q0m1", "q0m2rv", "q1m3"}
    assert "q0m2" not in bn
    assert bn.outputs == ["q0m1", "q1m3"]
    assert bn.noise_events == ["q0m2rv"]
    assert bn.initial_evidence == {"q0m0": 0, "q1m0": 0}
    assert bn.node("q0m2rv").kind is NodeKind.NOISE_EVENT
    assert bn.node("q1m3").parents == ("q0m1", "q1m0")

    bn, _ = circuit_to_bn(parse_circuit("qubits 1"))
    assert [node.id for node in bn.nodes] == ["q0m0"]
    assert bn.initial_evidence == {"q0m0": 0}

    bn, _ = circuit_to_bn(parse_circuit("qubits 1\nh 0\nad 0 0.3"))
    assert {node.id for node in bn.nodes} == {"q0m0", "q0m1", "q0m2rv", "q0m2"}
    assert bn.outputs == ["q0m2"]

    bn, _ = circuit_to_bn(parse_circuit("qubits 2\nh 0\nswap 0 1"))
    assert bn.outputs == ["q1m0", "q0m1"]

    print(describe_bn(*circuit_to_bn(parse_circuit(NOISY_BELL))))


def test_single_qubit_tables():
    """Transpose rule and 0/1 folding for one-qubit gates"""
    print("\n" + "="*60)
    print("Testing Single-Qubit Tables")
    print("="*60)

    params = ParamTable()
    cat = cat_from_single_qubit_gate(_unitary("H"), params)
    assert len(params) == 2
    plus = cat.entry((0,), 0)
    assert isinstance(plus, Param)
    assert cat.entry((0,), 1) == plus and cat.entry((1,), 0) == plus
    minus = cat.entry((1,), 1)
    assert minus != plus
    assert cmath.isclose(params.entries[plus.pid], SQRT_HALF)
    assert cmath.isclose(params.entries[minus.pid], -SQRT_HALF)
    assert len(params.provenance[plus.pid]) == 3

    params = ParamTable()
    cat = cat_from_single_qubit_gate(_unitary("X"), params)
    assert cat.row_entries((0,)) == [ZERO, ONE]
    assert cat.row_entries((1,)) == [ONE, ZERO]
    assert cat.is_deterministic_row((0,)) and len(params) == 0

    params = ParamTable()
    cat = cat_from_single_qubit_gate(_unitary("T"), params)
    assert cat.row_entries((0,)) == [ONE, ZERO]
    assert cat.entry((1,), 0) is ZERO
    assert cmath.isclose(params.entries[cat.entry((1,), 1).pid], cmath.exp(0.25j * math.pi))


def test_controlled_tables():
    """Two-qubit monomial gates"""
    print("\n" + "="*60)
    print("Testing Controlled-Gate Tables")
    print("="*60)

    params = ParamTable()
    cat = cat_from_controlled_gate(_unitary("CNOT", qubits=(0, 1)), True, params)
    assert cat.row_entries((0, 0)) == [ONE, ZERO]
    assert cat.row_entries((0, 1)) == [ZERO, ONE]
    assert cat.row_entries((1, 0)) == [ZERO, ONE]
    assert cat.row_entries((1, 1)) == [ONE, ZERO]
    assert len(params) == 0

    params = ParamTable()
    cat = cat_from_controlled_gate(_unitary("CZ", qubits=(0, 1)), True, params)
    assert len(params) == 1
    assert isinstance(cat.entry((1, 1), 1), Param)
    assert params.entries[cat.entry((1, 1), 1).pid] == -1
    assert cat.row_entries((1, 0)) == [ONE, ZERO]

    params = ParamTable()
    cat = cat_from_controlled_gate(_unitary("CPHASE", 0.0, qubits=(0, 1)), True, params)
    assert len(params) == 0
    assert all(cat.is_deterministic_row(row) for row in cat.rows())

    try:
        cat_from_controlled_gate(_unitary("SWAP", qubits=(0, 1)), True, ParamTable())
    except EncodingError:
        pass
    else:
        raise AssertionError("SWAP accepted as a controlled gate")


def test_noise_tables():
    """Event and post-state tables for noise channels"""
    print("\n" + "="*60)
    print("Testing Noise Tables")
    print("="*60)

    params = ParamTable()
    event, post = cats_from_noise(kraus_set(NoiseApp("PHASE_DAMPING", 0, (0.36,))), params)
    assert post is None
    assert event.row_entries((0,)) == [ONE, ZERO]
    damped, jump = event.row_entries((1,))
    assert math.isclose(params.entries[damped.pid].real, 0.8)
    assert math.isclose(params.entries[jump.pid].real, 0.6)

    params = ParamTable()
    event, post = cats_from_noise(kraus_set(NoiseApp("BITFLIP", 0, (0.1,))), params)
    assert event.row_entries((0,)) == event.row_entries((1,))
    keep, flip = event.row_entries((0,))
    assert math.isclose(params.entries[keep.pid].real, math.sqrt(0.9))
    assert math.isclose(params.entries[flip.pid].real, math.sqrt(0.1))
    assert post.row_entries((0, 0)) == [ONE, ZERO]
    assert post.row_entries((1, 0)) == [ZERO, ONE]
    assert post.row_entries((0, 1)) == [ZERO, ONE]
    assert post.row_entries((1, 1)) == [ONE, ZERO]

    params = ParamTable()
    event, post = cats_from_noise(kraus_set(NoiseApp("AMPLITUDE_DAMPING", 0, (1.0,))), params)
    assert event.row_entries((1,)) == [ZERO, ONE]
    assert post.entry((1, 1), 0) is ONE
    assert post.entry((1, 1), 1) is ZERO


def test_cell_amplitudes():
    """Raw amplitudes before folding"""
    print("\n" + "="*60)
    print("Testing Raw Cell Amplitudes")
    print("="*60)

    raw = cell_amplitudes(parse_circuit(NOISY_BELL))
    event = raw["q0m2rv"]
    assert event[((0,), 0)] == 1 and event[((0,), 1)] == 0
    assert math.isclose(event[((1,), 0)].real, 0.8)
    assert math.isclose(event[((1,), 1)].real, 0.6)
    assert raw["q0m0"] == {((), 0): 1, ((), 1): 1}


def test_binding_values():
    """Rebinding from a structurally identical circuit"""
    print("\n" + "="*60)
    print("Testing Binding Values")
    print("="*60)

    compiled = parse_circuit("qubits 1\nrx 0 0.3\nrz 0 1.1")
    bn, params = circuit_to_bn(compiled)
    assert binding_values(bn, params, compiled) == params.values()

    moved = parse_circuit("qubits 1\nrx 0 0.7\nrz 0 -0.4")
    values = binding_values(bn, params, moved)
    assert set(values) == set(params.entries)
    fresh_bn, fresh_params = circuit_to_bn(moved)
    assert sorted(values.values(), key=lambda z: (z.real, z.imag)) == \
        sorted(fresh_params.values().values(), key=lambda z: (z.real, z.imag))

    # zero angles make RX an identity: its ONE/ZERO cells cannot take rotation values later
    cases = [
        ("qubits 1\nrx 0 0\nrz 0 1.1", "qubits 1\nrx 0 0.3\nrz 0 1.1"),
        ("qubits 1\nrx 0 0.3\nrz 0 1.1", "qubits 1\nrx 0 0.3"),
        ("qubits 1\nrx 0 0.3\nrz 0 1.1", "qubits 1\nrx 0 0.3\nrz 0 1.1\nx 0"),
    ]
    for compiled_text, bound_text in cases:
        bn, params = circuit_to_bn(parse_circuit(compiled_text))
        try:
            binding_values(bn, params, parse_circuit(bound_text))
        except BindingError as e:
            print(f"  {bound_text!r} -> {e}")
        else:
            raise AssertionError(f"{bound_text!r} bound without error")


def test_unencodable_gate():
    """Dense two-qubit gates are rejected before any table is built"""
    print("\n" + "="*60)
    print("Testing Unencodable Gate")
    print("="*60)

    dense = np.kron(_unitary("H"), _unitary("H"))
    register_gate("HH", 2, lambda: dense)
    try:
        circuit_to_bn(Circuit(2, (GateApp("HH", (0, 1)),)))
    except EncodingError as e:
        assert "decompose" in str(e)
    else:
        raise AssertionError("dense gate encoded")
    finally:
        unregister_gate("HH")


def main():
    """Main test runner"""
    print("\n" + "="*70)
    print("      Bayesian Network Encoding Test")
    print("="*70)

    tests = [
        ("Network Structure", test_network_structure),
        ("Single-Qubit Tables", test_single_qubit_tables),
        ("Controlled Tables", test_controlled_tables),
        ("Noise Tables", test_noise_tables),
        ("Cell Amplitudes", test_cell_amplitudes),
        ("Binding Values", test_binding_values),
        ("Unencodable Gate", test_unencodable_gate),
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
