#!/usr/bin/env python
"""
Test script for the benchmark workload generators
QAOA Max-Cut, Ising-model VQE, random circuit sampling and textbook algorithms
"""

import sys
import os
# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import logging
import math

import numpy as np

from src.circuit_ir import GateApp, NoiseApp, validate_circuit
from src.errors import WorkloadError
from src.oracle import density_matrix_simulate, statevector_simulate
from src.pipeline import PipelineManager
from src.query import bitstring, output_distribution
from src.settings import DEFAULT_CONFIG
from src.workloads import (ALGORITHMS, WorkloadSpec, add_noise, build_algorithm, build_qaoa_maxcut, build_rcs,
                           build_vqe_ising, build_workload, grid_edges, maxcut_graph, parse_workload)

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)


def _kinds(circuit):
    counts = {}
    for op in circuit.ops:
        counts[op.kind] = counts.get(op.kind, 0) + 1
    return counts


def _probabilities(circuit):
    sv = statevector_simulate(circuit)
    return {bitstring(x, circuit.num_qubits): float(p) for x, p in enumerate(np.abs(sv) ** 2) if p > 1e-20}


def test_qaoa():
    """Max-Cut QAOA structure and determinism"""
    print("\n" + "="*60)
    print("Testing QAOA Max-Cut")
    print("="*60)

    graph = maxcut_graph(8, seed=3)
    assert all(degree == 3 for _, degree in graph.degree())
    assert sorted(maxcut_graph(8, seed=3).edges) == sorted(graph.edges)

    circuit = build_qaoa_maxcut(4, p=1, seed=0)
    print(f"  n=4 p=1: {_kinds(circuit)}")
    assert circuit.num_qubits == 4
    assert _kinds(circuit) == {"H": 4, "CNOT": 12, "RZ": 6, "RX": 4}
    assert all(op.kind == "H" for op in circuit.ops[:4])
    rz = [op for op in circuit.ops if op.kind == "RZ"]
    assert all(math.isclose(op.params[0], 2 * DEFAULT_CONFIG["workloads"]["qaoa_gamma"]) for op in rz)

    assert _kinds(build_qaoa_maxcut(4, p=0)) == {"H": 4}
    assert len(build_qaoa_maxcut(6, p=2, gamma=[0.1, 0.2], beta=[0.3, 0.4]).ops) == 6 + 2 * (9 * 3 + 6)
    assert build_qaoa_maxcut(8, seed=5) == build_qaoa_maxcut(8, seed=5)

    for bad in (lambda: maxcut_graph(5, 0), lambda: maxcut_graph(2, 0),
                lambda: build_qaoa_maxcut(4, p=2, gamma=[0.1]), lambda: build_qaoa_maxcut(4, p=-1)):
        try:
            bad()
        except WorkloadError as e:
            print(f"  {e}")
        else:
            raise AssertionError("bad QAOA parameters accepted")


def test_vqe():
    """Ising-model VQE layers"""
    print("\n" + "="*60)
    print("Testing Ising VQE")
    print("="*60)

    assert grid_edges(1, 2) == [(0, 1)]
    assert len(grid_edges(3, 3)) == 12

    pair = build_vqe_ising(1, 2)
    assert _kinds(pair) == {"CNOT": 2, "RZ": 3, "RX": 2}
    assert len(pair.ops) == 7

    grid = build_vqe_ising(3, 3, steps=2)
    assert _kinds(grid)["CNOT"] == 2 * 2 * 12
    assert build_vqe_ising(2, 2, steps=0).ops == ()

    try:
        build_vqe_ising(1, 1)
    except WorkloadError:
        pass
    else:
        raise AssertionError("single-site grid accepted")


def test_rcs():
    """Seeded random circuits"""
    print("\n" + "="*60)
    print("Testing Random Circuit Sampling")
    print("="*60)

    assert _kinds(build_rcs(5, 0)) == {"H": 5}
    assert build_rcs(5, 6, seed=1) == build_rcs(5, 6, seed=1)
    assert build_rcs(5, 6, seed=1) != build_rcs(5, 6, seed=2)

    circuit = build_rcs(4, 4, seed=7)
    assert _kinds(circuit)["CZ"] == 2 + 1 + 2 + 1
    # a qubit never draws the same single-qubit gate twice in a row
    layers = [op for op in circuit.ops[4:] if op.kind != "CZ"]
    for q in range(4):
        picks = [(op.kind, op.params) for op in layers if op.qubits == (q,)]
        assert all(a != b for a, b in zip(picks, picks[1:]))

    for n, depth in ((0, 1), (25, 1), (3, -1)):
        try:
            build_rcs(n, depth)
        except WorkloadError:
            pass
        else:
            raise AssertionError(f"rcs n={n} depth={depth} accepted")


def test_algorithms():
    """Textbook algorithms produce their known outcomes"""
    print("\n" + "="*60)
    print("Testing Textbook Algorithms")
    print("="*60)

    def certain(name, outcome, **options):
        distribution = _probabilities(build_algorithm(name, **options))
        assert set(distribution) == {outcome}, f"{name}: {distribution}"
        assert math.isclose(distribution[outcome], 1.0)

    certain("bernstein-vazirani", "1011")
    certain("bernstein-vazirani", "0110", secret="0110")
    certain("deutsch-jozsa", "1111")
    certain("hidden-shift", "1011")
    certain("hidden-shift", "0100", shift="0100")

    simon = _probabilities(build_algorithm("simon"))
    assert {x[:2] for x in simon} == {"00", "11"}

    qft = _probabilities(build_algorithm("qft"))
    assert len(qft) == 8 and all(math.isclose(p, 1 / 8) for p in qft.values())

    grover = _probabilities(build_algorithm("grover"))
    print(f"  Grover P(101) = {grover['101']:.4f}")
    assert abs(grover["101"] - 0.9453) < 1e-3

    chsh = _probabilities(build_algorithm("chsh"))
    same = chsh.get("00", 0) + chsh.get("11", 0)
    assert math.isclose(same, math.cos(math.pi / 8) ** 2)

    teleport = _probabilities(build_algorithm("teleport-core"))
    p_one = sum(p for x, p in teleport.items() if x[2] == "1")
    assert math.isclose(p_one, math.sin(0.55) ** 2)

    ghz = _probabilities(build_algorithm("ghz", n=4))
    assert set(ghz) == {"0000", "1111"}

    for name in ("nope",):
        try:
            build_algorithm(name)
        except WorkloadError:
            pass
        else:
            raise AssertionError("unknown algorithm accepted")
    try:
        build_algorithm("bell", width=3)
    except WorkloadError:
        pass
    else:
        raise AssertionError("bad option accepted")


def test_compiled_algorithms():
    """Compiled distributions match the state-vector oracle"""
    print("\n" + "="*60)
    print("Testing Compiled Algorithms")
    print("="*60)

    manager = PipelineManager(DEFAULT_CONFIG)
    for name in sorted(ALGORITHMS):
        circuit = build_algorithm(name)
        assert validate_circuit(circuit) == [], name
        session = manager.open_session(manager.compile_circuit(circuit))
        compiled = output_distribution(session)
        reference = _probabilities(circuit)
        for x in set(compiled) | set(reference):
            assert abs(compiled.get(x, 0.0) - reference.get(x, 0.0)) < 1e-10, f"{name} {x}"
        print(f"  {name:20} ok")

    for circuit in (build_qaoa_maxcut(8), build_vqe_ising(3, 3), build_rcs(5, 6)):
        assert validate_circuit(circuit) == []


def test_add_noise():
    """Noise insertion after every gate"""
    print("\n" + "="*60)
    print("Testing Noise Insertion")
    print("="*60)

    bell = build_algorithm("bell")
    noisy = add_noise(bell, "dep", 0.005)
    assert len(noisy.ops) == 5
    assert [type(op) for op in noisy.ops] == [GateApp, NoiseApp, GateApp, NoiseApp, NoiseApp]
    assert all(op.kind == "DEPOLARIZING_SYM" for op in noisy.ops if isinstance(op, NoiseApp))
    assert add_noise(bell, "PHASE_DAMPING", 0.1).ops[1].qubit == 0

    clean = density_matrix_simulate(add_noise(bell, "dep", 0.0))
    assert abs(np.trace(clean @ clean) - 1) < 1e-12
    mixed = density_matrix_simulate(noisy)
    assert np.trace(mixed @ mixed).real < 1

    for kind, p in (("nope", 0.1), ("gad", 0.1), ("pd", 1.5)):
        try:
            add_noise(bell, kind, p)
        except WorkloadError as e:
            print(f"  {kind} {p} -> {e}")
        else:
            raise AssertionError(f"{kind} {p} accepted")


def test_parse_workload():
    """Workload strings from the command line"""
    print("\n" + "="*60)
    print("Testing Workload Parsing")
    print("="*60)

    spec = parse_workload("qaoa:n=8,p=1,seed=3")
    assert spec == WorkloadSpec("qaoa", {"n": 8, "p": 1, "seed": 3})
    assert spec.label() == "qaoa:n=8,p=1,seed=3"
    assert parse_workload("qaoa") == WorkloadSpec("qaoa", {"n": 8, "p": 1, "seed": 0})
    assert parse_workload("vqe:rows=3,cols=3").options == {"rows": 3, "cols": 3, "steps": 1}
    assert parse_workload("grover") == WorkloadSpec("algo", {"name": "grover"})
    assert parse_workload("algo:grover") == WorkloadSpec("algo", {"name": "grover"})
    assert parse_workload("rcs:n=4,depth=2").with_options(seed=9).options["seed"] == 9

    circuit = build_workload(parse_workload("vqe:rows=1,cols=2,noise=pd,strength=0.01"))
    assert sum(isinstance(op, NoiseApp) for op in circuit.ops) == 5 + 4
    assert build_workload(parse_workload("bell")) == build_algorithm("bell")

    for text in ("foo", "qaoa:n", "algo:nope", "qaoa:n=5", "rcs:width=3"):
        try:
            build_workload(parse_workload(text))
        except WorkloadError as e:
            print(f"  {text!r} -> {e}")
        else:
            raise AssertionError(f"{text!r} accepted")


def main():
    """Main test runner"""
    print("\n" + "="*70)
    print("      Workload Generator Test")
    print("="*70)

    tests = [
        ("QAOA Max-Cut", test_qaoa),
        ("Ising VQE", test_vqe),
        ("Random Circuits", test_rcs),
        ("Textbook Algorithms", test_algorithms),
        ("Compiled Algorithms", test_compiled_algorithms),
        ("Noise Insertion", test_add_noise),
        ("Workload Parsing", test_parse_workload),
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
