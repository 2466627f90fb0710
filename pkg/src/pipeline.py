"""
Pipeline - Circuit to arithmetic circuit orchestration
Parses, encodes, compiles and smooths circuits, and opens query sessions on the result.
"""

import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

from src.bayesnet import BayesNet, ParamTable, binding_values, circuit_to_bn
from src.circuit_ir import Circuit, parse_circuit, validate_circuit
from src.cnf import WeightedCnf, bn_to_cnf, simplify_units
from src.ddnnf import ArithmeticCircuit, CompileOptions, CompileStats, compile_cnf, parse_ac, smooth
from src.errors import EncodingError
from src.query import CircuitLayout, Session
from src.settings import get_config

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[str, int], None]


@dataclass
class CompiledCircuit:
    circuit: Circuit
    bn: BayesNet
    params: ParamTable
    cnf: WeightedCnf
    ac: ArithmeticCircuit
    stats: CompileStats

    def layout(self) -> CircuitLayout:
        return CircuitLayout(list(self.bn.outputs), list(self.bn.noise_events), self.ac.query_nodes())


def _looks_like_ac(text: str) -> bool:
    for line in text.splitlines():
        tokens = line.split()
        if not tokens or tokens[0].startswith('#'):
            continue
        return tokens[0] == 'nnf'
    return False


class PipelineManager:
    def __init__(self, config: Optional[dict] = None):
        self.config = config or get_config()
        self.options = CompileOptions.from_config(self.config)
        self.compile_lock = threading.Lock()
        self.compile_count = 0
        self.rebind_count = 0

        logger.info(f"PipelineManager initialized, variable order: {self.options.var_order.value}, "
                    f"elide summed: {self.options.elide_summed}")

    def compile_circuit(self, circuit: Circuit, progress_callback: Optional[ProgressCallback] = None,
                        options: Optional[CompileOptions] = None) -> CompiledCircuit:
        opts = options or self.options
        with self.compile_lock:
            started = time.perf_counter()

            if progress_callback:
                progress_callback("Validating circuit...", 0)
            diagnostics = validate_circuit(circuit)
            if diagnostics:
                raise EncodingError("; ".join(diagnostics))

            if progress_callback:
                progress_callback("Building Bayesian network...", 10)
            bn, params = circuit_to_bn(circuit)

            if progress_callback:
                progress_callback("Encoding weighted CNF...", 30)
            cnf = simplify_units(bn_to_cnf(bn, params))

            if progress_callback:
                progress_callback("Compiling d-DNNF...", 50)
            ac = smooth(compile_cnf(cnf, opts))

            if progress_callback:
                progress_callback("Circuit compiled", 100)

            self.compile_count += 1
            logger.info(f"Compile #{self.compile_count}: {circuit.num_qubits} qubits, {len(circuit.ops)} ops -> "
                        f"{len(ac.nodes)} AC nodes in {time.perf_counter() - started:.3f}s")
            return CompiledCircuit(circuit, bn, params, cnf, ac, ac.stats)

    def load(self, path: Union[str, Path],
             progress_callback: Optional[ProgressCallback] = None) -> Union[CompiledCircuit, ArithmeticCircuit]:
        """Circuit text is compiled; serialized ACs are returned as-is"""
        text = Path(path).read_text(encoding='utf-8')
        if _looks_like_ac(text):
            logger.info(f"Loading arithmetic circuit from {path}")
            return parse_ac(text)
        logger.info(f"Loading circuit from {path}")
        return self.compile_circuit(parse_circuit(text), progress_callback)

    def open_session(self, target: Union[CompiledCircuit, ArithmeticCircuit]) -> Session:
        if isinstance(target, CompiledCircuit):
            return Session(target.ac, target.params.values(), self.config, target.layout())
        return Session(target, config=self.config)

    def rebind_circuit(self, session: Session, compiled: CompiledCircuit, circuit: Circuit) -> Session:
        """Bind values from a circuit with the compiled circuit's structure but new angles or strengths"""
        values = binding_values(compiled.bn, compiled.params, circuit)
        session.rebind_params(values)
        self.rebind_count += 1
        return session


_pipeline_manager = None


def get_pipeline_manager(config: Optional[dict] = None) -> PipelineManager:
    """Get or create the process-wide pipeline manager; a different config replaces it"""
    global _pipeline_manager
    if _pipeline_manager is None or (config is not None and config != _pipeline_manager.config):
        _pipeline_manager = PipelineManager(config)
    return _pipeline_manager
