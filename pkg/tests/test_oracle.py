#!/usr/bin/env python
"""
Test script for the dense reference simulators and brute-force model counting
"""

import sys
import os
# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import cmath
import logging
import math

import numpy as np

from src.bayesnet import circuit_to_bn
from src.circuit_ir import parse_circuit
from src.cnf import Indicator, WeightedCnf, bn_to_cnf, simplify_units
from src.errors import OracleError
from src.oracle import brute_force_wmc, density_matrix_simulate, statevector_simulate
from src.workloads import build_rcs

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

NOISY_BELL = "qubits 2\nh 0\npd 0 0.36\ncnot 0 1\n"
SQRT_HALF = 1 / math.sqrt(2)


def test_statevectors():
    """Small hand-checked state vectors"""
    print("\n" + "="*60)
    print("Testing State Vectors")
    print("="*60)

    assert np.allclose(statevector_simulate(parse_circuit("qubits 1\nh 0")), [SQRT_HALF, SQRT_HALF])
    assert np.allclose(statevector_simulate(parse_circuit("qubits 1\nx 0")), [0, 1])
    assert np.allclose(statevector_simulate(parse_circuit("qubits 1")), [1, 0])
    bell = statevector_simulate(parse_circuit("qubits 2\nh 0\ncnot 0 1"))
    assert np.allclose(bell, [SQRT_HALF, 0, 0, SQRT_HALF])
    # qubit 0 is the most significant bit
    assert np.allclose(statevector_simulate(parse_circuit("qubits 2\nx 0")), [0, 0, 1, 0])
    assert np.allclose(statevector_simulate(parse_circuit("qubits 2\ninit 01\nswap 0 1")), [0, 0, 1, 0])

    try:
        statevector_simulate(parse_circuit(NOISY_BELL))
    except OracleError:
        pass
    else:
        raise AssertionError("noisy circuit accepted by the state-vector simulator")

    try:
        statevector_simulate(build_rcs(3, 1), max_qubits=2)
    except OracleError:
        pass
    else:
        raise AssertionError("qubit limit ignored")


def test_density_matrices():
    """Kraus evolution of small density matrices"""
    print("\n" + "="*60)
    print("Testing Density Matrices")
    print("="*60)

    rho = density_matrix_simulate(parse_circuit(NOISY_BELL))
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 3] = 0.5
    expected[0, 3] = expected[3, 0] = 0.4
    print(np.round(rho.real, 6))
    assert np.allclose(rho, expected, atol=1e-12)

    dephased = density_matrix_simulate(parse_circuit("qubits 1\nh 0\npd 0 0.36"))
    assert np.allclose(dephased, [[0.5, 0.4], [0.4, 0.5]])

    identity = density_matrix_simulate(parse_circuit("qubits 1\nbf 0 0"))
    assert np.allclose(identity, [[1, 0], [0, 0]])

    circuit = build_rcs(3, 3, seed=4)
    sv = statevector_simulate(circuit)
    rho = density_matrix_simulate(circuit)
    assert np.allclose(np.diag(rho), np.abs(sv) ** 2)
    assert np.allclose(rho, np.outer(sv, sv.conj()))

    damped = density_matrix_simulate(parse_circuit("qubits 1\nx 0\nad 0 1"))
    assert np.allclose(damped, [[1, 0], [0, 0]])
    assert cmath.isclose(np.trace(density_matrix_simulate(parse_circuit("qubits 2\nh 0\ndep 0 0.2\ncnot 0 1"))), 1)


def test_brute_force_wmc():
    """Exhaustive weighted model counts"""
    print("\n" + "="*60)
    print("Testing Brute-Force WMC")
    print("="*60)

    cnf = simplify_units(bn_to_cnf(*circuit_to_bn(parse_circuit(NOISY_BELL))))
    evidence = {"q0m2rv": 0, "q0m1": 0, "q1m3": 0}
    assert cmath.isclose(brute_force_wmc(cnf, evidence), SQRT_HALF, abs_tol=1e-12)
    evidence = {"q0m2rv": 1, "q0m1": 1, "q1m3": 1}
    assert cmath.isclose(brute_force_wmc(cnf, evidence), 0.6 * SQRT_HALF, abs_tol=1e-12)
    assert abs(brute_force_wmc(cnf, {"q0m2rv": 1, "q0m1": 0, "q1m3": 0})) < 1e-12

    unsat = WeightedCnf(1, {1: Indicator("a", 1)}, [(1,), (-1,)], {})
    assert brute_force_wmc(unsat) == 0

    free = WeightedCnf(3, {v: Indicator(f"v{v}", 1) for v in (1, 2, 3)}, [], {})
    assert brute_force_wmc(free) == 8

    try:
        brute_force_wmc(free, max_vars=2)
    except OracleError:
        pass
    else:
        raise AssertionError("variable limit ignored")


def main():
    """Main test runner"""
    print("\n" + "="*70)
    print("      Reference Oracle Test")
    print("="*70)

    tests = [
        ("State Vectors", test_statevectors),
        ("Density Matrices", test_density_matrices),
        ("Brute-Force WMC", test_brute_force_wmc),
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
