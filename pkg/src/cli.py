"""
CLI - Command-line driver for compiling and querying quantum circuits
Results go to stdout as JSON; logging and progress go to stderr.
"""

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from src.circuit_ir import Circuit, parse_circuit, validate_circuit
from src.cnf import emit_dimacs
from src.ddnnf import CompileOptions, VarOrder, check_ddnnf, serialize_ac
from src.errors import QkcError
from src.oracle import brute_force_wmc, density_matrix_simulate, statevector_simulate
from src.pipeline import CompiledCircuit, PipelineManager, get_pipeline_manager
from src.query import Session, bitstring, density_components, density_matrix, output_distribution
from src.sampler import SamplerConfig, direct_sample, kl_divergence, empirical_distribution, sample
from src.settings import load_config, setup_logging
from src.workloads import WorkloadSpec, build_workload, parse_workload

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1"
VALIDATE_TOLERANCE = 1e-8
SPOT_CHECK_TOLERANCE = 1e-12
MAX_SPOT_CHECKS = 10

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; usage problems here are status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _complex(value: complex) -> List[float]:
    return [float(value.real), float(value.imag)]


def _matrix(m: np.ndarray) -> List[List[List[float]]]:
    return [[_complex(x) for x in row] for row in m]


def _finite(value: Optional[float]):
    if value is None or math.isfinite(value):
        return value
    return "inf" if value > 0 else "-inf"


def _emit(payload: dict):
    payload = {"format_version": FORMAT_VERSION, **payload}
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=False) + "\n")
    sys.stdout.flush()


def _read_circuit(path: str) -> Circuit:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from e
    return parse_circuit(text)


def _load(manager: PipelineManager, path: str):
    if not Path(path).is_file():
        raise UsageError(f"no such file: {path}")
    try:
        return manager.load(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from e


def _parse_events(text: Optional[str]) -> List[int]:
    if not text:
        return []
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise UsageError(f"--events takes comma-separated integers, got {text!r}") from e


def cmd_compile(args, manager: PipelineManager) -> int:
    options = CompileOptions(var_order=args.order or manager.options.var_order,
                             elide_summed=manager.options.elide_summed and not args.no_elide,
                             cache_budget=manager.options.cache_budget)
    circuit = _read_circuit(args.circuit)
    compiled = manager.compile_circuit(circuit, options=options)

    if args.output:
        Path(args.output).write_text(serialize_ac(compiled.ac), encoding='utf-8')
        logger.info(f"Wrote arithmetic circuit to {args.output}")
    if args.cnf:
        Path(args.cnf).write_text(emit_dimacs(compiled.cnf), encoding='utf-8')
        logger.info(f"Wrote weighted CNF to {args.cnf}")

    payload = {
        "command": "compile",
        "circuit": args.circuit,
        "output": args.output,
        "cnf": args.cnf,
        "var_order": options.var_order.value,
        "elide_summed": options.elide_summed,
        "nodes": len(compiled.ac.nodes),
        "edges": compiled.ac.num_edges,
        "variables": compiled.cnf.num_vars,
        "clauses": len(compiled.cnf.clauses),
        "parameters": len(compiled.params),
    }
    if args.stats:
        payload["stats"] = compiled.stats.to_dict()
    _emit(payload)
    return EXIT_OK


def cmd_amplitude(args, manager: PipelineManager) -> int:
    session = manager.open_session(_load(manager, args.target))
    events = _parse_events(args.events)
    amplitude = session.basis_amplitude(args.outputs, events)
    _emit({
        "command": "amplitude",
        "outputs": args.outputs,
        "events": events,
        "amplitude": _complex(amplitude),
        "probability": float(abs(amplitude) ** 2),
    })
    return EXIT_OK


def cmd_density(args, manager: PipelineManager) -> int:
    session = manager.open_session(_load(manager, args.target))
    rho = density_matrix(session)
    payload = {
        "command": "density",
        "num_qubits": session.layout.num_qubits,
        "noise_events": list(session.layout.noise_events),
        "trace": _complex(np.trace(rho)),
        "matrix": _matrix(rho),
    }
    if args.components:
        payload["components"] = [{"events": list(v), "matrix": _matrix(m)}
                                  for v, m in density_components(session).items()]
    _emit(payload)
    return EXIT_OK


def cmd_sample(args, manager: PipelineManager) -> int:
    session = manager.open_session(_load(manager, args.target))
    cfg = SamplerConfig.from_config(manager.config, args.samples, burn_in=args.burn_in, seed=args.seed,
                                    chains=args.chains, scan=args.scan)
    exact = output_distribution(session) if (args.kl or args.direct) else None
    report = sample(session, cfg, exact if args.kl else None)

    result = report.to_dict()
    result["kl_to_exact"] = _finite(result["kl_to_exact"])
    payload = {"command": "sample", **result}
    if args.direct:
        counts = direct_sample(exact, args.samples, args.seed)
        payload["direct"] = {
            "counts": dict(sorted(counts.items())),
            "kl_to_exact": _finite(kl_divergence(empirical_distribution(counts), exact)),
        }
    _emit(payload)
    return EXIT_OK


def _check(name: str, error: float, tolerance: float = VALIDATE_TOLERANCE) -> dict:
    return {"name": name, "max_error": float(error), "tolerance": tolerance, "ok": bool(error <= tolerance)}


def _validate_compiled(compiled: CompiledCircuit, session: Session, manager: PipelineManager) -> List[dict]:
    circuit = compiled.circuit
    oracle_config = manager.config.get('oracle', {})
    checks = []

    if circuit.num_qubits <= oracle_config.get('max_density_qubits', 10):
        expected = density_matrix_simulate(circuit, oracle_config.get('max_density_qubits', 10))
        checks.append(_check("density_matrix", np.max(np.abs(density_matrix(session) - expected))))

    if not circuit.is_noisy() and circuit.num_qubits <= oracle_config.get('max_statevector_qubits', 20):
        expected = statevector_simulate(circuit, oracle_config.get('max_statevector_qubits', 20))
        width = circuit.num_qubits
        amplitudes = session.evaluate_batch([
            dict(zip(session.layout.outputs, (int(b) for b in bitstring(x, width))))
            for x in range(len(expected))
        ])
        checks.append(_check("statevector", np.max(np.abs(amplitudes - expected))))

    max_vars = oracle_config.get('max_wmc_vars', 24)
    if len(compiled.cnf.vars) <= max_vars:
        layout = session.layout
        worst = 0.0
        for x in range(min(4, 1 << circuit.num_qubits)):
            evidence = dict(zip(layout.outputs, (int(b) for b in bitstring(x, circuit.num_qubits))))
            evidence.update({node: 0 for node in layout.noise_events})
            expected = brute_force_wmc(compiled.cnf, evidence, session.binding, max_vars)
            worst = max(worst, abs(session.evaluate(evidence) - expected))
        checks.append(_check("weighted_model_count", worst, SPOT_CHECK_TOLERANCE))
    return checks


def cmd_validate(args, manager: PipelineManager) -> int:
    circuit = _read_circuit(args.circuit)
    diagnostics = validate_circuit(circuit)
    payload = {"command": "validate", "circuit": args.circuit, "diagnostics": diagnostics}
    if diagnostics:
        payload.update({"ddnnf": [], "checks": [], "ok": False})
        _emit(payload)
        return EXIT_FAILURE

    compiled = manager.compile_circuit(circuit)
    session = manager.open_session(compiled)
    ddnnf_problems = check_ddnnf(compiled.ac)
    checks = _validate_compiled(compiled, session, manager)
    ok = not ddnnf_problems and all(check["ok"] for check in checks)
    payload.update({"ddnnf": ddnnf_problems, "checks": checks, "ok": ok})
    _emit(payload)
    return EXIT_OK if ok else EXIT_FAILURE


def _sweep_spec(spec: WorkloadSpec, rng: np.random.Generator) -> WorkloadSpec:
    """Fresh angles for one rebinding; the structure stays fixed"""
    if spec.kind == "qaoa":
        p = int(spec.options.get("p", 1))
        return spec.with_options(gamma=list(rng.uniform(0.1, math.pi - 0.1, p)),
                                 beta=list(rng.uniform(0.1, math.pi / 2 - 0.1, p)))
    if spec.kind == "vqe":
        steps = int(spec.options.get("steps", 1))
        return spec.with_options(coupling=list(rng.uniform(0.1, 1.5, steps)),
                                 rx=list(rng.uniform(0.1, 1.5, steps)),
                                 rz=list(rng.uniform(0.1, 1.5, steps)))
    return spec


def _query_rows(session: Session, rng: np.random.Generator, count: int) -> List[str]:
    width = session.layout.num_qubits
    return [bitstring(int(x), width) for x in rng.integers(0, 1 << width, size=count)]


def _run_queries(session: Session, outputs: Sequence[str]) -> List[dict]:
    events = [0] * len(session.layout.noise_events)
    queries = []
    for bits in outputs:
        started = time.perf_counter()
        amplitude = session.basis_amplitude(bits, events)
        queries.append({"outputs": bits, "amplitude": _complex(amplitude),
                        "time": time.perf_counter() - started})
    return queries


def cmd_bench(args, manager: PipelineManager) -> int:
    spec = parse_workload(args.workload)
    if args.noise:
        spec = spec.with_options(noise=args.noise, strength=args.strength)
    bench_config = manager.config.get('bench', {})
    per_binding = args.queries or int(bench_config.get('queries_per_binding', 4))
    rng = np.random.default_rng(bench_config.get('sweep_seed', 2024))

    circuit = build_workload(spec)
    compiles_before, rebinds_before = manager.compile_count, manager.rebind_count
    compiled = manager.compile_circuit(circuit)
    session = manager.open_session(compiled)
    rebinds = spec.kind in ("qaoa", "vqe")

    records = []
    for index in tqdm(range(args.rebind_sweep), desc=f"bench {spec.kind}", unit="binding", disable=None):
        record = {"index": index}
        started = time.perf_counter()
        if rebinds:
            variant = _sweep_spec(spec, rng)
            manager.rebind_circuit(session, compiled, build_workload(variant))
            record["params"] = {k: variant.options[k] for k in ("gamma", "beta", "coupling", "rx", "rz")
                                if k in variant.options}
        record["rebind_time"] = time.perf_counter() - started
        record["queries"] = _run_queries(session, _query_rows(session, rng, per_binding))
        record["spec"] = variant.options if rebinds else None
        records.append(record)

    spot_checks = []
    if records:
        picks = sorted(set(np.linspace(0, len(records) - 1, min(MAX_SPOT_CHECKS, len(records))).astype(int)))
        fresh_manager = PipelineManager(manager.config)
        for index in picks:
            record = records[index]
            variant = WorkloadSpec(spec.kind, record["spec"]) if record["spec"] else spec
            fresh = fresh_manager.open_session(fresh_manager.compile_circuit(build_workload(variant)))
            worst = 0.0
            for query in record["queries"]:
                expected = fresh.basis_amplitude(query["outputs"], [0] * len(fresh.layout.noise_events))
                worst = max(worst, abs(complex(*query["amplitude"]) - expected))
            spot_checks.append({"index": int(index), "max_error": worst, "ok": worst <= SPOT_CHECK_TOLERANCE})

    for record in records:
        record.pop("spec")
    query_times = [q["time"] for record in records for q in record["queries"]]
    _emit({
        "command": "bench",
        "workload": spec.label(),
        "num_qubits": circuit.num_qubits,
        "num_ops": len(circuit.ops),
        "compile_count": manager.compile_count - compiles_before,
        "rebind_count": manager.rebind_count - rebinds_before,
        "compile": compiled.stats.to_dict(),
        "mean_query_time": float(np.mean(query_times)) if query_times else None,
        "records": records,
        "spot_checks": spot_checks,
    })
    return EXIT_OK if all(check["ok"] for check in spot_checks) else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="qkc", description="Quantum circuit simulation by knowledge compilation")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    parser.add_argument("--config", help="path to a config.json (default: repository config.json)")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_ArgumentParser)
    commands.required = True

    p = commands.add_parser("compile", help="compile a circuit into a smooth d-DNNF arithmetic circuit")
    p.add_argument("circuit")
    p.add_argument("-o", "--output", help="write the serialized arithmetic circuit here")
    p.add_argument("--order", choices=[o.value for o in VarOrder], help="variable ordering heuristic")
    p.add_argument("--no-elide", action="store_true", help="keep decisions on summed-out variables")
    p.add_argument("--stats", action="store_true", help="include compile statistics")
    p.add_argument("--cnf", help="also write the weighted CNF in extended DIMACS")
    p.set_defaults(handler=cmd_compile)

    p = commands.add_parser("amplitude", help="amplitude of one output bitstring and noise-event assignment")
    p.add_argument("target", help="circuit file or serialized arithmetic circuit")
    p.add_argument("--outputs", required=True, help="output bits, qubit 0 first")
    p.add_argument("--events", help="comma-separated noise-event values in circuit order")
    p.set_defaults(handler=cmd_amplitude)

    p = commands.add_parser("density", help="full output density matrix")
    p.add_argument("target")
    p.add_argument("--components", action="store_true", help="include per-noise-event components")
    p.set_defaults(handler=cmd_density)

    p = commands.add_parser("sample", help="Gibbs-sample output bitstrings")
    p.add_argument("target")
    p.add_argument("-n", "--samples", type=int, required=True)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int)
    p.add_argument("--scan", choices=["fixed", "random"])
    p.add_argument("--kl", action="store_true", help="report KL divergence to the exact distribution")
    p.add_argument("--direct", action="store_true", help="also draw the same number of ideal samples")
    p.set_defaults(handler=cmd_sample)

    p = commands.add_parser("validate", help="cross-check a circuit against the dense oracles")
    p.add_argument("circuit")
    p.set_defaults(handler=cmd_validate)

    p = commands.add_parser("bench", help="compile once, then rebind and query repeatedly")
    p.add_argument("workload", help="e.g. qaoa:n=8,p=1,seed=3 | vqe:rows=2,cols=3 | rcs:n=5,depth=10 | grover")
    p.add_argument("--rebind-sweep", type=int, default=0, metavar="K")
    p.add_argument("--queries", type=int, help="queries per binding")
    p.add_argument("--noise", help="noise kind added after every gate, e.g. dep")
    p.add_argument("--strength", type=float, default=0.005)
    p.set_defaults(handler=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = load_config(args.config)
    except QkcError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(config, args.verbose)

    manager = get_pipeline_manager(config)
    try:
        return args.handler(args, manager)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except QkcError as e:
        logger.debug("Computation failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
