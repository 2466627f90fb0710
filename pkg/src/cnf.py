"""
CNF - Weighted CNF encoding of Bayesian networks and the extended DIMACS format
Clauses carry the circuit structure; parameter variables carry its numbers.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

from src.bayesnet import ONE, ZERO, BayesNet, Param, ParamTable
from src.errors import DimacsParseError, InconsistentCnfError

logger = logging.getLogger(__name__)

Clause = Tuple[int, ...]


@dataclass(frozen=True)
class Indicator:
    node: str
    value: int


@dataclass(frozen=True)
class Parameter:
    param: int


Meaning = Union[Indicator, Parameter]


@dataclass
class WeightedCnf:
    num_vars: int
    meanings: Dict[int, Meaning]
    clauses: List[Clause]
    weights: Dict[int, complex]
    query_vars: FrozenSet[int] = frozenset()
    summed_vars: FrozenSet[int] = frozenset()
    fixed: Dict[int, bool] = field(default_factory=dict)
    outputs: Tuple[str, ...] = ()
    noise_events: Tuple[str, ...] = ()

    def __post_init__(self):
        self.outputs = tuple(self.outputs)
        self.noise_events = tuple(self.noise_events)
        self.query_vars = frozenset(self.query_vars)
        self.summed_vars = frozenset(self.summed_vars)
        self.clauses = [tuple(c) for c in self.clauses]

    @property
    def vars(self) -> List[int]:
        """Variables still free after unit resolution"""
        return [v for v in range(1, self.num_vars + 1) if v not in self.fixed]

    def var_of(self, meaning: Meaning) -> int:
        for var, m in self.meanings.items():
            if m == meaning:
                return var
        raise KeyError(meaning)

    def indicator_map(self) -> Dict[str, Dict[int, int]]:
        """node -> value -> var"""
        nodes: Dict[str, Dict[int, int]] = {}
        for var in sorted(self.meanings):
            m = self.meanings[var]
            if isinstance(m, Indicator):
                nodes.setdefault(m.node, {})[m.value] = var
        return nodes

    def param_vars(self) -> Dict[int, int]:
        """param id -> var"""
        return {m.param: var for var, m in sorted(self.meanings.items()) if isinstance(m, Parameter)}

    def query_nodes(self) -> Dict[str, int]:
        """node -> domain size, for nodes whose indicators are query vars"""
        domains: Dict[str, int] = {}
        for var in self.query_vars:
            m = self.meanings.get(var)
            if isinstance(m, Indicator):
                domains[m.node] = max(domains.get(m.node, 0), m.value + 1)
        return domains


def bn_to_cnf(bn: BayesNet, params: ParamTable) -> WeightedCnf:
    meanings: Dict[int, Meaning] = {}
    indicator: Dict[Tuple[str, int], int] = {}

    for node in bn.nodes:
        for value in range(node.domain_size):
            var = len(meanings) + 1
            meanings[var] = Indicator(node.id, value)
            indicator[(node.id, value)] = var

    param_var: Dict[int, int] = {}
    weights: Dict[int, complex] = {}
    for pid in sorted(params.entries):
        var = len(meanings) + 1
        meanings[var] = Parameter(pid)
        param_var[pid] = var
        weights[var] = params.entries[pid]

    clauses: List[Clause] = []
    for node in bn.nodes:
        values = [indicator[(node.id, v)] for v in range(node.domain_size)]
        clauses.append(tuple(values))
        clauses.extend((-a, -b) for a, b in itertools.combinations(values, 2))

    for node_id, value in bn.initial_evidence.items():
        clauses.append((indicator[(node_id, value)],))

    for node in bn.nodes:
        cat = node.cat
        negated: Dict[Tuple, Clause] = {}
        for row in cat.rows():
            parent_lits = tuple(-indicator[(p, b)] for p, b in zip(cat.parent_ids, row))
            deterministic = cat.is_deterministic_row(row)
            for value in range(cat.domain_size):
                own = indicator[(node.id, value)]
                cell_neg = parent_lits + (-own,)
                negated[(row, value)] = cell_neg
                entry = cat.entry(row, value)
                if entry is ZERO:
                    clauses.append(cell_neg)
                elif entry is ONE:
                    if deterministic:
                        clauses.append(parent_lits + (own,))
                else:
                    clauses.append(cell_neg + (param_var[entry.pid],))

        for pid in cat.param_ids():
            p = param_var[pid]
            for cell, cell_neg in negated.items():
                entry = cat.entries[cell]
                if not (isinstance(entry, Param) and entry.pid == pid):
                    clauses.append(cell_neg + (-p,))

    query_nodes = set(bn.outputs) | set(bn.noise_events)
    query_vars = frozenset(var for (node_id, _), var in indicator.items() if node_id in query_nodes)
    summed_vars = frozenset(var for (node_id, _), var in indicator.items() if node_id not in query_nodes)

    cnf = WeightedCnf(len(meanings), meanings, clauses, weights, query_vars, summed_vars, {},
                      tuple(bn.outputs), tuple(bn.noise_events))
    logger.info(f"Encoded CNF: {cnf.num_vars} vars ({len(weights)} weighted), {len(clauses)} clauses")
    return cnf


def simplify_units(cnf: WeightedCnf) -> WeightedCnf:
    """Unit resolution to fixpoint; fixed variables move to cnf.fixed"""
    assignment: Dict[int, bool] = dict(cnf.fixed)
    clauses = list(cnf.clauses)

    while True:
        reduced_clauses: List[Clause] = []
        units: List[int] = []
        for clause in clauses:
            reduced = []
            satisfied = False
            for lit in clause:
                value = assignment.get(abs(lit))
                if value is None:
                    reduced.append(lit)
                elif value == (lit > 0):
                    satisfied = True
                    break
            if satisfied:
                continue
            if not reduced:
                raise InconsistentCnfError(f"unit resolution derived the empty clause from {clause}")
            if len(reduced) == 1:
                units.append(reduced[0])
            else:
                reduced_clauses.append(tuple(reduced))

        clauses = reduced_clauses
        if not units:
            break
        for lit in units:
            var, value = abs(lit), lit > 0
            if assignment.get(var, value) != value:
                raise InconsistentCnfError(f"conflicting units on variable {var}")
            assignment[var] = value

    logger.debug(f"Unit resolution fixed {len(assignment) - len(cnf.fixed)} variables, "
                 f"{len(clauses)} clauses remain")
    return WeightedCnf(cnf.num_vars, dict(cnf.meanings), clauses, dict(cnf.weights),
                       cnf.query_vars, cnf.summed_vars, assignment, cnf.outputs, cnf.noise_events)


def format_real(value: float) -> str:
    return format(value, '.17g')


def meaning_lines(meanings: Dict[int, Meaning], weights: Dict[int, complex], query_vars: Iterable[int],
                  summed_vars: Iterable[int], outputs: Sequence[str] = (),
                  noise_events: Sequence[str] = ()) -> List[str]:
    """Comment lines shared by the DIMACS and AC text formats"""
    lines = []
    for var in sorted(meanings):
        m = meanings[var]
        if isinstance(m, Indicator):
            lines.append(f"c ind {var} {m.node} {m.value}")
        else:
            lines.append(f"c p {var} {m.param}")
    for var in sorted(weights):
        w = weights[var]
        lines.append(f"c w {var} {format_real(w.real)} {format_real(w.imag)}")
    lines.extend(f"c q {var}" for var in sorted(query_vars))
    lines.extend(f"c s {var}" for var in sorted(summed_vars))
    if outputs:
        lines.append("c outputs " + " ".join(outputs))
    if noise_events:
        lines.append("c events " + " ".join(noise_events))
    return lines


@dataclass
class MeaningReader:
    """Accumulates the comment lines written by meaning_lines"""
    num_vars: int
    error: type = DimacsParseError
    meanings: Dict[int, Meaning] = field(default_factory=dict)
    weights: Dict[int, complex] = field(default_factory=dict)
    query: Set[int] = field(default_factory=set)
    summed: Set[int] = field(default_factory=set)
    outputs: Tuple[str, ...] = ()
    noise_events: Tuple[str, ...] = ()

    def read_int(self, token: str, line_no: int) -> int:
        try:
            return int(token)
        except ValueError:
            raise self.error(f"line {line_no}: expected an integer, got {token!r}")

    def read_var(self, token: str, line_no: int) -> int:
        var = self.read_int(token, line_no)
        if not 1 <= var <= self.num_vars:
            raise self.error(f"line {line_no}: variable {var} outside 1..{self.num_vars}")
        return var

    def read(self, tag: str, args: List[str], line_no: int) -> bool:
        """Consume one comment line; False when the tag is not a meaning line"""
        usage = {'ind': 3, 'p': 2, 'w': 3, 'q': 1, 's': 1}
        if tag in usage and len(args) != usage[tag]:
            raise self.error(f"line {line_no}: 'c {tag}' takes {usage[tag]} fields")
        if tag == 'ind':
            self.meanings[self.read_var(args[0], line_no)] = Indicator(args[1], self.read_int(args[2], line_no))
        elif tag == 'p':
            self.meanings[self.read_var(args[0], line_no)] = Parameter(self.read_int(args[1], line_no))
        elif tag == 'w':
            var = self.read_var(args[0], line_no)
            try:
                self.weights[var] = complex(float(args[1]), float(args[2]))
            except ValueError:
                raise self.error(f"line {line_no}: non-numeric weight {args[1]!r} {args[2]!r}")
        elif tag == 'q':
            self.query.add(self.read_var(args[0], line_no))
        elif tag == 's':
            self.summed.add(self.read_var(args[0], line_no))
        elif tag == 'outputs':
            self.outputs = tuple(args)
        elif tag == 'events':
            self.noise_events = tuple(args)
        else:
            return False
        return True

    def finish(self):
        if self.query & self.summed:
            raise self.error(f"variables both query and summed: {sorted(self.query & self.summed)}")
        for var in range(1, self.num_vars + 1):
            if var not in self.meanings:
                self.meanings[var] = Parameter(var) if var in self.weights else Indicator(f"v{var}", 1)
        for var, m in self.meanings.items():
            if isinstance(m, Parameter) and var not in self.weights:
                raise self.error(f"parameter variable {var} has no 'c w' weight")
        self.meanings = dict(sorted(self.meanings.items()))


def emit_dimacs(cnf: WeightedCnf) -> str:
    lines = [f"p cnf {cnf.num_vars} {len(cnf.clauses)}"]
    lines.extend(meaning_lines(cnf.meanings, cnf.weights, cnf.query_vars, cnf.summed_vars,
                               cnf.outputs, cnf.noise_events))
    lines.extend(f"c fix {var if value else -var}" for var, value in sorted(cnf.fixed.items()))
    lines.extend(" ".join(str(lit) for lit in clause) + " 0" for clause in cnf.clauses)
    return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> WeightedCnf:
    """Inverse of emit_dimacs; plain DIMACS is accepted with generic indicator meanings"""
    reader: Optional[MeaningReader] = None
    num_clauses = 0
    fixed: Dict[int, bool] = {}
    clauses: List[Clause] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue

        if tokens[0] == 'p':
            if reader is not None or len(tokens) != 4 or tokens[1] != 'cnf':
                raise DimacsParseError(f"line {line_no}: malformed header {raw!r}")
            try:
                num_vars, num_clauses = int(tokens[2]), int(tokens[3])
            except ValueError:
                raise DimacsParseError(f"line {line_no}: malformed header {raw!r}")
            if num_vars < 0 or num_clauses < 0:
                raise DimacsParseError(f"line {line_no}: negative counts in header")
            reader = MeaningReader(num_vars)
            continue

        if tokens[0] == 'c':
            if reader is None or len(tokens) < 2:
                continue
            if tokens[1] == 'fix' and len(tokens) == 3:
                lit = reader.read_int(tokens[2], line_no)
                fixed[reader.read_var(str(abs(lit)), line_no)] = lit > 0
            else:
                reader.read(tokens[1], tokens[2:], line_no)
            continue

        if reader is None:
            raise DimacsParseError(f"line {line_no}: clause before 'p cnf' header")

        literals = [reader.read_int(tok, line_no) for tok in tokens]
        if literals[-1] != 0 or 0 in literals[:-1]:
            raise DimacsParseError(f"line {line_no}: clause must end with a single 0")
        clause = tuple(literals[:-1])
        if not clause:
            raise DimacsParseError(f"line {line_no}: empty clause")
        for lit in clause:
            reader.read_var(str(abs(lit)), line_no)
        clauses.append(clause)

    if reader is None:
        raise DimacsParseError("missing 'p cnf' header")
    if len(clauses) != num_clauses:
        raise DimacsParseError(f"header announces {num_clauses} clauses, found {len(clauses)}")
    reader.finish()

    return WeightedCnf(reader.num_vars, reader.meanings, clauses, reader.weights,
                       frozenset(reader.query), frozenset(reader.summed), dict(sorted(fixed.items())),
                       reader.outputs, reader.noise_events)
