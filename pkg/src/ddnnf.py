"""
d-DNNF Compiler - Exhaustive DPLL with component caching into smooth arithmetic circuits
"""

import hashlib
import logging
import re
import sys
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx

from src.cnf import Clause, Indicator, Meaning, MeaningReader, Parameter, WeightedCnf, meaning_lines
from src.errors import AcParseError, CompileError

logger = logging.getLogger(__name__)

# Decision depth grows with the variable count
_RECURSION_LIMIT = 50000


class VarOrder(Enum):
    MIN_FILL = "min-fill"
    LEXICOGRAPHIC = "lex"

    @classmethod
    def from_name(cls, name) -> 'VarOrder':
        if isinstance(name, VarOrder):
            return name
        for order in cls:
            if name in (order.value, order.name):
                return order
        raise CompileError(f"Unknown variable order: {name}")


@dataclass(frozen=True)
class CompileOptions:
    var_order: VarOrder = VarOrder.MIN_FILL
    elide_summed: bool = True
    cache_budget: int = 200000

    def __post_init__(self):
        object.__setattr__(self, 'var_order', VarOrder.from_name(self.var_order))
        if self.cache_budget < 0:
            raise CompileError(f"cache_budget must be >= 0, got {self.cache_budget}")

    @classmethod
    def from_config(cls, config: dict) -> 'CompileOptions':
        section = config.get('compile', {})
        return cls(var_order=section.get('var_order', 'min-fill'),
                   elide_summed=section.get('elide_summed', True),
                   cache_budget=section.get('cache_budget', 200000))


@dataclass(frozen=True)
class AcNode:
    """kind is one of T, F, L, A, O"""
    kind: str
    lit: int = 0
    children: Tuple[int, ...] = ()

    @property
    def var(self) -> int:
        return abs(self.lit)


@dataclass
class CompileStats:
    nodes: int = 0
    edges: int = 0
    cache_hits: int = 0
    cache_entries: int = 0
    cache_exhausted: bool = False
    decisions: int = 0
    wall_time: float = 0.0
    var_order: str = ""

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "edges": self.edges,
            "cache_hits": self.cache_hits,
            "cache_entries": self.cache_entries,
            "cache_exhausted": self.cache_exhausted,
            "decisions": self.decisions,
            "wall_time": self.wall_time,
            "var_order": self.var_order,
        }


@dataclass
class ArithmeticCircuit:
    nodes: List[AcNode]
    root: int
    num_vars: int
    meanings: Dict[int, Meaning]
    weights: Dict[int, complex]
    query_vars: FrozenSet[int] = frozenset()
    summed_vars: FrozenSet[int] = frozenset()
    stats: CompileStats = field(default_factory=CompileStats)
    outputs: Tuple[str, ...] = ()
    noise_events: Tuple[str, ...] = ()

    @property
    def var_index(self) -> Dict[int, List[int]]:
        """var -> indices of its leaf nodes"""
        index: Dict[int, List[int]] = {}
        for i, node in enumerate(self.nodes):
            if node.kind == 'L':
                index.setdefault(node.var, []).append(i)
        return index

    @property
    def num_edges(self) -> int:
        return sum(len(node.children) for node in self.nodes)

    def param_vars(self) -> Dict[int, int]:
        return {m.param: var for var, m in sorted(self.meanings.items()) if isinstance(m, Parameter)}

    def query_nodes(self) -> Dict[str, int]:
        domains: Dict[str, int] = {}
        for var in self.query_vars:
            m = self.meanings.get(var)
            if isinstance(m, Indicator):
                domains[m.node] = max(domains.get(m.node, 0), m.value + 1)
        return domains


class _NodeBuilder:
    """Hash-consed node store; children always precede parents"""

    def __init__(self):
        self.nodes: List[AcNode] = []
        self.unique: Dict[AcNode, int] = {}
        self.true_node = self._add(AcNode('T'))
        self.false_node = self._add(AcNode('F'))

    def _add(self, node: AcNode) -> int:
        index = self.unique.get(node)
        if index is None:
            index = len(self.nodes)
            self.nodes.append(node)
            self.unique[node] = index
        return index

    def literal(self, lit: int) -> int:
        return self._add(AcNode('L', lit))

    def conj(self, children: Iterable[int]) -> int:
        kept = set()
        for child in children:
            if child == self.false_node:
                return self.false_node
            if child != self.true_node:
                kept.add(child)
        if not kept:
            return self.true_node
        if len(kept) == 1:
            return kept.pop()
        return self._add(AcNode('A', 0, tuple(sorted(kept))))

    def decision(self, var: int, low: int, high: int) -> int:
        return self._add(AcNode('O', var, (low, high)))

    def exactly_one(self, variables: Sequence[int]) -> int:
        """Smooth gadget over one node's indicator variables"""
        head, rest = variables[0], list(variables[1:])
        if not rest:
            return self.literal(head)
        low = self.conj([self.literal(-head), self.exactly_one(rest)])
        high = self.conj([self.literal(head)] + [self.literal(-v) for v in rest])
        return self.decision(head, low, high)

    def extract(self, root: int) -> Tuple[List[AcNode], int]:
        """Reachable sub-DAG renumbered in topological order, FALSE branches pruned"""
        out = _NodeBuilder()
        mapping: Dict[int, int] = {}
        order = _topological(self.nodes, root)
        for index in order:
            node = self.nodes[index]
            if node.kind == 'T':
                mapping[index] = out.true_node
            elif node.kind == 'F':
                mapping[index] = out.false_node
            elif node.kind == 'L':
                mapping[index] = out.literal(node.lit)
            elif node.kind == 'A':
                mapping[index] = out.conj(mapping[c] for c in node.children)
            else:
                low, high = (mapping[c] for c in node.children)
                if low == out.false_node and high == out.false_node:
                    mapping[index] = out.false_node
                elif low == out.false_node:
                    mapping[index] = high
                elif high == out.false_node:
                    mapping[index] = low
                else:
                    mapping[index] = out.decision(node.lit, low, high)
        return _compact(out.nodes, mapping[root])


def _topological(nodes: Sequence[AcNode], root: int) -> List[int]:
    """Indices reachable from root, ascending (children have smaller indices)"""
    seen = {root}
    stack = [root]
    while stack:
        for child in nodes[stack.pop()].children:
            if child not in seen:
                seen.add(child)
                stack.append(child)
    return sorted(seen)


def _compact(nodes: Sequence[AcNode], root: int) -> Tuple[List[AcNode], int]:
    reachable = _topological(nodes, root)
    renumber = {old: new for new, old in enumerate(reachable)}
    compacted = [AcNode(nodes[old].kind, nodes[old].lit, tuple(renumber[c] for c in nodes[old].children))
                 for old in reachable]
    return compacted, renumber[root]


_NODE_LABEL = re.compile(r'^q(\d+)m(\d+)(rv)?$')


def _lex_key(meaning: Meaning, var: int):
    if isinstance(meaning, Indicator):
        match = _NODE_LABEL.match(meaning.node)
        if match:
            qubit, step, event = int(match.group(1)), int(match.group(2)), match.group(3)
            return 0, step, qubit, 0 if event else 1, meaning.value, var
        return 1, 0, 0, 0, meaning.value, var
    return 2, 0, 0, 0, 0, var


def _primal_graph(cnf: WeightedCnf) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(cnf.vars)
    for clause in cnf.clauses:
        variables = sorted({abs(lit) for lit in clause})
        graph.add_edges_from((a, b) for i, a in enumerate(variables) for b in variables[i + 1:])
    return graph


def _fill(graph: nx.Graph, v: int) -> int:
    neighbors = list(graph.adj[v])
    return sum(1 for i, a in enumerate(neighbors) for b in neighbors[i + 1:] if not graph.has_edge(a, b))


def min_fill_elimination(graph: nx.Graph) -> List[int]:
    """Greedy min-fill elimination order, ties by degree then index"""
    graph = graph.copy()
    fill = {v: _fill(graph, v) for v in graph.nodes}
    order = []
    while fill:
        v = min(fill, key=lambda u: (fill[u], graph.degree(u), u))
        neighbors = list(graph.adj[v])
        graph.add_edges_from((a, b) for i, a in enumerate(neighbors) for b in neighbors[i + 1:])
        graph.remove_node(v)
        del fill[v]
        order.append(v)
        affected = set(neighbors)
        for u in neighbors:
            affected.update(graph.adj[u])
        for u in affected:
            fill[u] = _fill(graph, u)
    return order


def count_fill_in(cnf: WeightedCnf, elimination_order: Sequence[int]) -> int:
    """Fill edges added when eliminating variables in the given order"""
    graph = _primal_graph(cnf)
    added = 0
    for v in elimination_order:
        neighbors = list(graph.adj[v])
        for i, a in enumerate(neighbors):
            for b in neighbors[i + 1:]:
                if not graph.has_edge(a, b):
                    graph.add_edge(a, b)
                    added += 1
        graph.remove_node(v)
    return added


def choose_var_order(cnf: WeightedCnf, heuristic=VarOrder.MIN_FILL, elide_summed: bool = False) -> List[int]:
    """Static decision order over the free variables of cnf"""
    heuristic = VarOrder.from_name(heuristic)
    if heuristic is VarOrder.MIN_FILL:
        order = list(reversed(min_fill_elimination(_primal_graph(cnf))))
    else:
        order = sorted(cnf.vars, key=lambda v: _lex_key(cnf.meanings.get(v), v))

    if elide_summed:
        order = [v for v in order if v in cnf.summed_vars] + [v for v in order if v not in cnf.summed_vars]
    return order


def _propagate(clauses: Sequence[Clause], units: Sequence[int]) -> Tuple[Optional[Dict[int, bool]], List[Clause]]:
    assignment: Dict[int, bool] = {}
    pending = list(units)
    while True:
        for lit in pending:
            var, value = abs(lit), lit > 0
            if assignment.setdefault(var, value) != value:
                return None, []
        reduced_clauses = []
        pending = []
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
                return None, []
            if len(reduced) == 1:
                pending.append(reduced[0])
            else:
                reduced_clauses.append(tuple(reduced))
        clauses = reduced_clauses
        if not pending:
            return assignment, clauses


def _components(clauses: Sequence[Clause]) -> List[List[Clause]]:
    parent: Dict[int, int] = {}

    def find(v):
        while parent.setdefault(v, v) != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for clause in clauses:
        first = find(abs(clause[0]))
        for lit in clause[1:]:
            other = find(abs(lit))
            if other != first:
                parent[other] = first

    groups: Dict[int, List[Clause]] = {}
    for clause in clauses:
        groups.setdefault(find(abs(clause[0])), []).append(clause)
    return list(groups.values())


def _clause_vars(clauses: Iterable[Clause]) -> Set[int]:
    return {abs(lit) for clause in clauses for lit in clause}


class _Compiler:
    def __init__(self, cnf: WeightedCnf, order: Sequence[int], opts: CompileOptions):
        self.cnf = cnf
        self.opts = opts
        self.position = {var: i for i, var in enumerate(order)}
        self.elided = cnf.summed_vars if opts.elide_summed else frozenset()
        self.builder = _NodeBuilder()
        self.cache: Dict[bytes, List[Tuple[Tuple[Clause, ...], int]]] = {}
        self.stats = CompileStats(var_order=opts.var_order.value)

    def _leaf(self, lit: int) -> Optional[int]:
        if abs(lit) in self.elided:
            return None
        return self.builder.literal(lit)

    def _free(self, var: int) -> int:
        if var in self.elided:
            return self.builder.decision(var, self.builder.true_node, self.builder.true_node)
        return self.builder.decision(var, self.builder.literal(-var), self.builder.literal(var))

    def compile(self, clauses: Sequence[Clause], scope: Set[int], units: Sequence[int] = ()) -> int:
        """Node over exactly the variables in scope"""
        assignment, residual = _propagate(clauses, units)
        if assignment is None:
            return self.builder.false_node

        children = []
        for var in sorted(assignment):
            leaf = self._leaf(var if assignment[var] else -var)
            if leaf is not None:
                children.append(leaf)

        remaining = _clause_vars(residual)
        for var in sorted(scope - remaining - set(assignment)):
            children.append(self._free(var))

        for component in _components(residual):
            child = self._compile_component(component)
            if child == self.builder.false_node:
                return child
            children.append(child)
        return self.builder.conj(children)

    def _compile_component(self, clauses: List[Clause]) -> int:
        key = tuple(sorted(tuple(sorted(c)) for c in clauses))
        digest = hashlib.blake2b(repr(key).encode('ascii'), digest_size=16).digest()
        for cached_key, node in self.cache.get(digest, ()):
            if cached_key == key:
                self.stats.cache_hits += 1
                return node

        scope = _clause_vars(clauses)
        var = min(scope, key=lambda v: (self.position.get(v, len(self.position)), v))
        self.stats.decisions += 1
        low = self.compile(clauses, scope, (-var,))
        high = self.compile(clauses, scope, (var,))
        node = self.builder.decision(var, low, high)

        if self.stats.cache_entries < self.opts.cache_budget:
            self.cache.setdefault(digest, []).append((key, node))
            self.stats.cache_entries += 1
        elif not self.stats.cache_exhausted:
            self.stats.cache_exhausted = True
            logger.warning(f"Component cache budget {self.opts.cache_budget} exhausted; continuing without caching")
        return node


def compile_cnf(cnf: WeightedCnf, opts: Optional[CompileOptions] = None) -> ArithmeticCircuit:
    """Compile a unit-simplified weighted CNF into a smooth d-DNNF arithmetic circuit"""
    opts = opts or CompileOptions()
    started = time.perf_counter()
    if sys.getrecursionlimit() < _RECURSION_LIMIT:
        sys.setrecursionlimit(_RECURSION_LIMIT)

    order = choose_var_order(cnf, opts.var_order, opts.elide_summed)
    compiler = _Compiler(cnf, order, opts)
    builder = compiler.builder

    fixed_leaves = []
    for var, value in sorted(cnf.fixed.items()):
        leaf = compiler._leaf(var if value else -var)
        if leaf is not None:
            fixed_leaves.append(leaf)

    body = compiler.compile(cnf.clauses, set(cnf.vars))
    root = builder.conj(fixed_leaves + [body])
    nodes, root = builder.extract(root)

    stats = compiler.stats
    stats.nodes = len(nodes)
    stats.edges = sum(len(node.children) for node in nodes)
    stats.wall_time = time.perf_counter() - started
    logger.info(f"Compiled AC: {stats.nodes} nodes, {stats.edges} edges, {stats.decisions} decisions, "
                f"{stats.cache_hits} cache hits in {stats.wall_time:.3f}s")

    return ArithmeticCircuit(nodes, root, cnf.num_vars, dict(cnf.meanings), dict(cnf.weights),
                             cnf.query_vars, cnf.summed_vars, stats, cnf.outputs, cnf.noise_events)


def _mentioned(nodes: Sequence[AcNode], positive_only: bool = False) -> List[FrozenSet[int]]:
    mentioned: List[FrozenSet[int]] = []
    for node in nodes:
        if node.kind == 'L' and positive_only and node.lit < 0:
            mentioned.append(frozenset())
        elif node.kind == 'L':
            mentioned.append(frozenset((node.var,)))
        elif node.kind in ('A', 'O'):
            mentioned.append(frozenset().union(*(mentioned[c] for c in node.children)))
        else:
            mentioned.append(frozenset())
    return mentioned


def smooth(ac: ArithmeticCircuit) -> ArithmeticCircuit:
    """Pad OR branches with gadgets for the query variables they do not mention"""
    mentioned = _mentioned(ac.nodes)
    asserted = _mentioned(ac.nodes, positive_only=True)
    node_vars: Dict[str, List[int]] = {}
    for var in sorted(ac.query_vars):
        m = ac.meanings.get(var)
        label = m.node if isinstance(m, Indicator) else f"#{var}"
        node_vars.setdefault(label, []).append(var)

    def gadgets(missing: Set[int], branch_true: FrozenSet[int]) -> List[int]:
        """Consistent completions of each node: one true indicator among its absent ones,
        or none when the branch already asserts one"""
        out = []
        for variables in node_vars.values():
            absent = [v for v in variables if v in missing]
            if not absent:
                continue
            if any(v in branch_true for v in variables):
                out.extend(builder.literal(-v) for v in absent)
            else:
                out.append(builder.exactly_one(absent))
        return out

    builder = _NodeBuilder()
    mapping: Dict[int, int] = {}
    padded = 0
    for index, node in enumerate(ac.nodes):
        if node.kind == 'T':
            mapping[index] = builder.true_node
        elif node.kind == 'F':
            mapping[index] = builder.false_node
        elif node.kind == 'L':
            mapping[index] = builder.literal(node.lit)
        elif node.kind == 'A':
            mapping[index] = builder.conj(mapping[c] for c in node.children)
        else:
            low, high = node.children
            low_q = mentioned[low] & ac.query_vars
            high_q = mentioned[high] & ac.query_vars
            new_low, new_high = mapping[low], mapping[high]
            if low_q != high_q:
                padded += 1
                new_low = builder.conj([new_low] + gadgets(high_q - low_q, asserted[low]))
                new_high = builder.conj([new_high] + gadgets(low_q - high_q, asserted[high]))
            mapping[index] = builder.decision(node.lit, new_low, new_high)

    if not padded:
        return ac
    nodes, root = _compact(builder.nodes, mapping[ac.root])
    logger.debug(f"Smoothing padded {padded} OR nodes")
    stats = CompileStats(**{**ac.stats.to_dict(), "nodes": len(nodes),
                            "edges": sum(len(n.children) for n in nodes)})
    return ArithmeticCircuit(nodes, root, ac.num_vars, dict(ac.meanings), dict(ac.weights),
                             ac.query_vars, ac.summed_vars, stats, ac.outputs, ac.noise_events)


def check_ddnnf(ac: ArithmeticCircuit) -> List[str]:
    """Diagnostics for decomposability, determinism, smoothness and ordering; empty when all hold"""
    diagnostics = []
    nodes = ac.nodes
    if not nodes:
        return ["empty circuit"]
    if ac.root != len(nodes) - 1:
        diagnostics.append(f"root {ac.root} is not the last node")

    for index, node in enumerate(nodes):
        for child in node.children:
            if not 0 <= child < index:
                diagnostics.append(f"node {index}: child {child} breaks topological order")
        if node.kind == 'L' and not 1 <= node.var <= ac.num_vars:
            diagnostics.append(f"node {index}: literal {node.lit} outside 1..{ac.num_vars}")
        if node.kind == 'O' and len(node.children) != 2:
            diagnostics.append(f"node {index}: OR must have two branches")
    if diagnostics:
        return diagnostics

    mentioned = _mentioned(nodes)
    # literals every model of the node satisfies; None means unsatisfiable
    implied: List[Optional[FrozenSet[int]]] = []
    for index, node in enumerate(nodes):
        if node.kind == 'T':
            implied.append(frozenset())
        elif node.kind == 'F':
            implied.append(None)
        elif node.kind == 'L':
            implied.append(frozenset((node.lit,)))
        elif node.kind == 'A':
            total = sum(len(mentioned[c]) for c in node.children)
            if total != len(mentioned[index]):
                diagnostics.append(f"node {index}: AND children share variables (not decomposable)")
            parts = [implied[c] for c in node.children]
            implied.append(None if any(p is None for p in parts) else frozenset().union(*parts))
        else:
            low, high = node.children
            var = node.var
            if var == 0:
                diagnostics.append(f"node {index}: OR without a decision variable")
            else:
                low_ok = implied[low] is None or -var in implied[low]
                high_ok = implied[high] is None or var in implied[high]
                elided = (var in ac.summed_vars and var not in mentioned[low] and var not in mentioned[high])
                if not elided and not (low_ok and high_ok):
                    diagnostics.append(f"node {index}: OR branches do not disagree on variable {var} "
                                       f"(not deterministic)")
            if (mentioned[low] & ac.query_vars) != (mentioned[high] & ac.query_vars):
                diagnostics.append(f"node {index}: OR branches mention different query variables (not smooth)")
            if implied[low] is None:
                implied.append(implied[high])
            elif implied[high] is None:
                implied.append(implied[low])
            else:
                implied.append(implied[low] & implied[high])
    return diagnostics


def serialize_ac(ac: ArithmeticCircuit) -> str:
    lines = [f"nnf {len(ac.nodes)} {ac.num_edges} {ac.num_vars}"]
    lines.extend(meaning_lines(ac.meanings, ac.weights, ac.query_vars, ac.summed_vars,
                               ac.outputs, ac.noise_events))
    for node in ac.nodes:
        if node.kind in ('T', 'F'):
            lines.append(node.kind)
        elif node.kind == 'L':
            lines.append(f"L {node.lit}")
        elif node.kind == 'A':
            lines.append(f"A {len(node.children)} " + " ".join(str(c) for c in node.children))
        else:
            lines.append(f"O {node.lit} 2 {node.children[0]} {node.children[1]}")
    return "\n".join(lines) + "\n"


def _parse_int(token: str, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise AcParseError(f"line {line_no}: expected an integer, got {token!r}")


def parse_ac(text: str) -> ArithmeticCircuit:
    header = None
    reader: Optional[MeaningReader] = None
    nodes: List[AcNode] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        tag = tokens[0]

        if tag == 'nnf':
            if header is not None or len(tokens) != 4:
                raise AcParseError(f"line {line_no}: malformed header {raw!r}")
            header = tuple(_parse_int(t, line_no) for t in tokens[1:])
            reader = MeaningReader(header[2], AcParseError)
            continue
        if header is None:
            raise AcParseError(f"line {line_no}: missing 'nnf N E V' header")

        if tag == 'c':
            if len(tokens) > 1:
                reader.read(tokens[1], tokens[2:], line_no)
            continue

        index = len(nodes)
        if tag in ('T', 'F') and len(tokens) == 1:
            nodes.append(AcNode(tag))
        elif tag == 'L' and len(tokens) == 2:
            lit = _parse_int(tokens[1], line_no)
            if lit == 0 or abs(lit) > header[2]:
                raise AcParseError(f"line {line_no}: literal {lit} outside 1..{header[2]}")
            nodes.append(AcNode('L', lit))
        elif tag == 'A' and len(tokens) >= 2:
            count = _parse_int(tokens[1], line_no)
            children = tuple(_parse_int(t, line_no) for t in tokens[2:])
            if count != len(children):
                raise AcParseError(f"line {line_no}: AND announces {count} children, lists {len(children)}")
            nodes.append(AcNode('A', 0, children))
        elif tag == 'O' and len(tokens) == 5:
            var, count, low, high = (_parse_int(t, line_no) for t in tokens[1:])
            if count != 2:
                raise AcParseError(f"line {line_no}: OR nodes must have exactly 2 branches")
            nodes.append(AcNode('O', var, (low, high)))
        else:
            raise AcParseError(f"line {line_no}: unrecognized node line {raw!r}")

        for child in nodes[-1].children:
            if not 0 <= child < index:
                raise AcParseError(f"line {line_no}: dangling child index {child}")

    if header is None:
        raise AcParseError("missing 'nnf N E V' header")
    num_nodes, num_edges, num_vars = header
    if num_nodes != len(nodes) or not nodes:
        raise AcParseError(f"header announces {num_nodes} nodes, found {len(nodes)}")
    edges = sum(len(n.children) for n in nodes)
    if edges != num_edges:
        raise AcParseError(f"header announces {num_edges} edges, found {edges}")

    reader.finish()
    stats = CompileStats(nodes=num_nodes, edges=num_edges)
    return ArithmeticCircuit(nodes, len(nodes) - 1, num_vars, reader.meanings, reader.weights,
                             frozenset(reader.query), frozenset(reader.summed), stats,
                             reader.outputs, reader.noise_events)


def compile_stats(ac: ArithmeticCircuit) -> CompileStats:
    stats = ac.stats
    stats.nodes = len(ac.nodes)
    stats.edges = ac.num_edges
    return stats
