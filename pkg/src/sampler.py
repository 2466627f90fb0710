"""
Sampler - Gibbs sampling of measurement outcomes from downward-pass derivatives
"""

import concurrent.futures
import itertools
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import rel_entr

from src.errors import SamplerError
from src.query import Session

logger = logging.getLogger(__name__)


class ScanOrder(Enum):
    FIXED = "fixed"
    RANDOM = "random"


@dataclass(frozen=True)
class SamplerConfig:
    samples: int
    burn_in: Optional[int] = None
    seed: int = 0
    scan: ScanOrder = ScanOrder.FIXED
    init_retries: int = 32
    restart_every: int = 0
    memo_size: int = 65536
    chains: int = 1
    burn_in_factor: int = 10

    def __post_init__(self):
        object.__setattr__(self, 'scan', ScanOrder(self.scan.value if isinstance(self.scan, ScanOrder)
                                                   else str(self.scan).lower()))
        if self.samples <= 0:
            raise SamplerError(f"samples must be positive, got {self.samples}")
        if self.burn_in is not None and self.burn_in < 0:
            raise SamplerError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.chains < 1:
            raise SamplerError(f"chains must be >= 1, got {self.chains}")
        if not 0 <= self.seed < 2 ** 64:
            raise SamplerError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @classmethod
    def from_config(cls, config: dict, samples: int, **overrides) -> 'SamplerConfig':
        section = config.get('sampler', {})
        values = {
            "scan": section.get('scan', 'fixed'),
            "init_retries": section.get('init_retries', 32),
            "restart_every": section.get('restart_every', 0),
            "memo_size": section.get('memo_size', 65536),
            "chains": section.get('chains', 1),
            "burn_in_factor": section.get('burn_in_factor', 10),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(samples=samples, **values)

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "scan": self.scan.value,
            "init_retries": self.init_retries,
            "restart_every": self.restart_every,
            "chains": self.chains,
        }


@dataclass
class ChainState:
    assignment: Dict[str, int]

    def key(self, order: Sequence[str]) -> Tuple[int, ...]:
        return tuple(self.assignment[node] for node in order)

    def output_bits(self, outputs: Sequence[str]) -> str:
        return "".join(str(self.assignment[node]) for node in outputs)

    def with_value(self, node: str, value: int) -> 'ChainState':
        assignment = dict(self.assignment)
        assignment[node] = value
        return ChainState(assignment)


@dataclass
class SampleReport:
    counts: Dict[str, int]
    samples: int
    burn_in: int
    seed: int
    config: dict = field(default_factory=dict)
    kl_to_exact: Optional[float] = None
    steps: int = 0
    moves: int = 0
    restarts: int = 0
    evaluations: int = 0

    @property
    def acceptance_rate(self) -> float:
        """Fraction of single-variable updates that changed the value"""
        return self.moves / self.steps if self.steps else 0.0

    def distribution(self) -> Dict[str, float]:
        return empirical_distribution(self.counts)

    def to_dict(self) -> dict:
        return {
            "counts": dict(sorted(self.counts.items())),
            "samples": self.samples,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "kl_to_exact": self.kl_to_exact,
            "config": self.config,
            "steps": self.steps,
            "moves": self.moves,
            "acceptance_rate": self.acceptance_rate,
            "restarts": self.restarts,
            "evaluations": self.evaluations,
        }


def chain_variables(s: Session) -> List[str]:
    """Systematic scan order: noise events first, then outputs by qubit"""
    layout = s.layout
    return list(layout.noise_events) + list(layout.outputs)


class _Chain:
    """One Gibbs chain; memoizes derivatives per visited state"""

    def __init__(self, s: Session, rng: np.random.Generator, memo_size: int):
        self.session = s
        self.rng = rng
        self.order = chain_variables(s)
        self.domains = s.layout.domains
        self.memo: "OrderedDict[Tuple[int, ...], Dict[Tuple[str, int], complex]]" = OrderedDict()
        self.memo_size = memo_size
        self.evaluations = 0

    def derivatives(self, state: ChainState) -> Dict[Tuple[str, int], complex]:
        key = state.key(self.order)
        cached = self.memo.get(key)
        if cached is not None:
            self.memo.move_to_end(key)
            return cached
        self.session.evaluate(state.assignment)
        derivatives = self.session.differentiate()
        self.evaluations += 1
        if self.memo_size:
            self.memo[key] = derivatives
            if len(self.memo) > self.memo_size:
                self.memo.popitem(last=False)
        return derivatives

    def conditional(self, state: ChainState, node: str) -> np.ndarray:
        derivatives = self.derivatives(state)
        weights = np.array([abs(derivatives[(node, b)]) ** 2 for b in range(self.domains[node])])
        total = weights.sum()
        if total <= 0:
            raise SamplerError(f"all conditional weights of {node} vanish at {state.assignment}")
        return weights / total

    def step(self, state: ChainState, node: str) -> ChainState:
        probabilities = self.conditional(state, node)
        u = self.rng.random()
        value = int(np.searchsorted(np.cumsum(probabilities), u, side='right'))
        value = min(value, len(probabilities) - 1)
        return state if value == state.assignment[node] else state.with_value(node, value)


def _random_state(s: Session, order: Sequence[str], rng: np.random.Generator) -> ChainState:
    domains = s.layout.domains
    return ChainState({node: int(rng.integers(domains[node])) for node in order})


def _construct_state(s: Session, order: Sequence[str]) -> ChainState:
    """Depth-first search over values ordered by derivative magnitude"""
    domains = s.layout.domains
    budget = [s.enumeration_limit]

    def search(partial: Dict[str, int], depth: int) -> Optional[Dict[str, int]]:
        budget[0] -= 1
        if budget[0] < 0:
            raise SamplerError("no nonzero-amplitude state found within the enumeration limit")
        if depth == len(order):
            return partial if abs(s.evaluate(partial)) > 0 else None
        node = order[depth]
        s.evaluate(partial)
        derivatives = s.differentiate()
        values = sorted(range(domains[node]), key=lambda b: (-abs(derivatives[(node, b)]), b))
        for value in values:
            found = search({**partial, node: value}, depth + 1)
            if found is not None:
                return found
        return None

    found = search({}, 0)
    if found is None:
        raise SamplerError("circuit has no nonzero-amplitude output state")
    return ChainState(found)


def init_chain(s: Session, seed=None, init_retries: int = 32) -> ChainState:
    """Uniform random start with retries, then sequential construction"""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = chain_variables(s)
    for _ in range(init_retries):
        state = _random_state(s, order, rng)
        if abs(s.evaluate(state.assignment)) > 0:
            return state
    logger.debug(f"No support state after {init_retries} random tries, constructing one")
    return _construct_state(s, order)


def conditional_distribution(s: Session, state: ChainState, node: str) -> np.ndarray:
    """Exact full conditional of node given the rest of state"""
    return _Chain(s, np.random.default_rng(0), 0).conditional(state, node)


def gibbs_step(s: Session, state: ChainState, node: str, rng: np.random.Generator) -> ChainState:
    return _Chain(s, rng, 0).step(state, node)


def _run_chain(s: Session, cfg: SamplerConfig, samples: int, burn_in: int,
               seed_seq: np.random.SeedSequence) -> SampleReport:
    rng = np.random.default_rng(seed_seq)
    chain = _Chain(s, rng, cfg.memo_size)
    outputs = s.layout.outputs
    state = init_chain(s, rng, cfg.init_retries)

    counts: Dict[str, int] = {}
    steps = moves = restarts = 0
    for sweep in range(burn_in + samples):
        if cfg.restart_every and sweep and sweep % cfg.restart_every == 0:
            state = init_chain(s, rng, cfg.init_retries)
            restarts += 1
        if cfg.scan is ScanOrder.RANDOM:
            order = [chain.order[i] for i in rng.permutation(len(chain.order))]
        else:
            order = chain.order
        for node in order:
            updated = chain.step(state, node)
            steps += 1
            if updated is not state:
                moves += 1
            state = updated
        if sweep >= burn_in:
            bits = state.output_bits(outputs)
            counts[bits] = counts.get(bits, 0) + 1

    return SampleReport(counts, samples, burn_in, cfg.seed, steps=steps, moves=moves,
                        restarts=restarts, evaluations=chain.evaluations)


def sample(s: Session, cfg: SamplerConfig, exact: Optional[Dict[str, float]] = None) -> SampleReport:
    """Gibbs sampling; seeded runs are reproducible for a fixed chain count"""
    order = chain_variables(s)
    burn_in = cfg.burn_in if cfg.burn_in is not None else cfg.burn_in_factor * len(order)
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)
    shares = [cfg.samples // cfg.chains + (1 if i < cfg.samples % cfg.chains else 0)
              for i in range(cfg.chains)]
    logger.info(f"Sampling {cfg.samples} outcomes over {cfg.chains} chain(s), burn-in {burn_in} sweeps")

    if cfg.chains == 1:
        reports = [_run_chain(s, cfg, shares[0], burn_in, streams[0])]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.chains) as executor:
            futures = [executor.submit(_run_chain, Session(s.ac, s.binding, s.config, s.layout),
                                       cfg, share, burn_in, stream)
                       for share, stream in zip(shares, streams) if share]
            reports = [future.result() for future in futures]

    counts: Dict[str, int] = {}
    for report in reports:
        for bits, count in report.counts.items():
            counts[bits] = counts.get(bits, 0) + count

    config_echo = cfg.to_dict()
    config_echo["burn_in"] = burn_in
    merged = SampleReport(dict(sorted(counts.items())), cfg.samples, burn_in, cfg.seed, config_echo,
                          steps=sum(r.steps for r in reports), moves=sum(r.moves for r in reports),
                          restarts=sum(r.restarts for r in reports),
                          evaluations=sum(r.evaluations for r in reports))
    if exact is not None:
        merged.kl_to_exact = kl_divergence(merged.distribution(), exact)
    return merged


def empirical_distribution(counts: Dict[str, int]) -> Dict[str, float]:
    total = sum(counts.values())
    return {bits: count / total for bits, count in counts.items()} if total else {}


def kl_divergence(empirical: Dict[str, float], exact: Dict[str, float]) -> float:
    """KL(empirical || exact); infinite when empirical has mass where exact has none"""
    support = sorted(set(empirical) | set(exact))
    p = np.array([empirical.get(x, 0.0) for x in support], dtype=float)
    q = np.array([exact.get(x, 0.0) for x in support], dtype=float)
    return float(np.sum(rel_entr(p, q)))


def direct_sample(distribution: Dict[str, float], samples: int, seed: int = 0) -> Dict[str, int]:
    """Independent draws from a fully known distribution"""
    outcomes = sorted(distribution)
    probabilities = np.array([distribution[x] for x in outcomes], dtype=float)
    probabilities = probabilities / probabilities.sum()
    draws = np.random.default_rng(seed).choice(len(outcomes), size=samples, p=probabilities)
    counts = np.bincount(draws, minlength=len(outcomes))
    return {outcomes[i]: int(c) for i, c in enumerate(counts) if c}


def support_states(s: Session) -> Tuple[List[Tuple[int, ...]], np.ndarray]:
    """All chain states with nonzero amplitude, with their normalized |amplitude|^2"""
    order = chain_variables(s)
    domains = s.layout.domains
    total = int(np.prod([domains[node] for node in order], dtype=np.int64)) if order else 1
    if total > s.enumeration_limit:
        raise SamplerError(f"{total} chain states exceed the enumeration limit")

    states = list(itertools.product(*(range(domains[node]) for node in order)))
    amplitudes = s.evaluate_batch([dict(zip(order, st)) for st in states])
    weights = np.abs(amplitudes) ** 2
    keep = weights > 0
    support = [st for st, k in zip(states, keep) if k]
    pi = weights[keep]
    return support, pi / pi.sum()


def scan_kernel(s: Session) -> Tuple[List[Tuple[int, ...]], np.ndarray]:
    """Exact transition matrix of one systematic sweep, over the support states"""
    order = chain_variables(s)
    support, _ = support_states(s)
    index = {st: i for i, st in enumerate(support)}
    chain = _Chain(s, np.random.default_rng(0), len(support) + 1)

    kernel = np.eye(len(support))
    for position, node in enumerate(order):
        single = np.zeros((len(support), len(support)))
        for i, st in enumerate(support):
            state = ChainState(dict(zip(order, st)))
            probabilities = chain.conditional(state, node)
            for value, p in enumerate(probabilities):
                if p > 0:
                    target = index.get(st[:position] + (value,) + st[position + 1:])
                    if target is None:
                        # rounding residue of an exactly cancelling path sum
                        if p > 1e-12:
                            raise SamplerError(f"kernel leaves the support from state {st}")
                        continue
                    single[i, target] += p
        kernel = kernel @ single
    return support, kernel
