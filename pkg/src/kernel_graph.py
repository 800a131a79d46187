"""
State space, edge structure and Markov kernels.

Houses the directed graph (X, E), kernels supported exactly on E, their
stationary distributions and edge measures p(x) w(y|x).
"""
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Optional, Sequence

import networkx as nx
import numpy as np

from .config import settings
from .errors import (
    ConvergenceFailure, InvalidInput, NotPositive, NotShiftInvariant,
    NotStronglyConnected, ZeroRow,
)

logger = logging.getLogger(__name__)


def _frozen_array(values, length: int, what: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.shape != (length,):
        raise InvalidInput(f"{what} must have length {length}", shape=list(array.shape))
    if not np.all(np.isfinite(array)):
        raise InvalidInput(f"{what} contains non-finite values")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class KernelGraph:
    """
    Ordered states plus an edge set, stored by dense state index.

    Edges are kept in canonical (source, target) lexicographic order so the
    vector form of every edge function is reproducible.
    """
    states: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        states = tuple(str(s) for s in self.states)
        edges = tuple(sorted((int(x), int(y)) for x, y in self.edges))
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "edges", edges)

        if len(states) < 2:
            raise InvalidInput("a graph needs at least 2 states", n_states=len(states))
        if len(set(states)) != len(states):
            raise InvalidInput("duplicate state identifiers", states=list(states))
        if not edges:
            raise InvalidInput("a graph needs at least one edge")
        if len(set(edges)) != len(edges):
            raise InvalidInput("duplicate edges")
        n = len(states)
        for x, y in edges:
            if not (0 <= x < n and 0 <= y < n):
                raise InvalidInput("edge references an unknown state", edge=[x, y])

    @classmethod
    def from_pairs(cls, states: Sequence[str], pairs: Iterable[tuple[str, str]]) -> "KernelGraph":
        """Build a graph from state identifiers and (from, to) identifier pairs."""
        index = {str(s): i for i, s in enumerate(states)}
        edges = []
        for a, b in pairs:
            if str(a) not in index or str(b) not in index:
                raise InvalidInput("edge references an unknown state", edge=[str(a), str(b)])
            edges.append((index[str(a)], index[str(b)]))
        return cls(tuple(states), tuple(edges))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def sources(self) -> np.ndarray:
        array = np.array([x for x, _ in self.edges], dtype=int)
        array.setflags(write=False)
        return array

    @cached_property
    def targets(self) -> np.ndarray:
        array = np.array([y for _, y in self.edges], dtype=int)
        array.setflags(write=False)
        return array

    @cached_property
    def edge_position(self) -> dict[tuple[int, int], int]:
        return {edge: k for k, edge in enumerate(self.edges)}

    @cached_property
    def _state_lookup(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    def state_index(self, identifier) -> int:
        try:
            return self._state_lookup[str(identifier)]
        except KeyError:
            raise InvalidInput("unknown state identifier", state=str(identifier)) from None

    def edge_labels(self) -> list[tuple[str, str]]:
        return [(self.states[x], self.states[y]) for x, y in self.edges]

    def incidence(self) -> np.ndarray:
        """|E| x |X| matrix B with (B kappa)(x, y) = kappa(y) - kappa(x)."""
        b = np.zeros((self.n_edges, self.n_states))
        rows = np.arange(self.n_edges)
        np.add.at(b, (rows, self.targets), 1.0)
        np.add.at(b, (rows, self.sources), -1.0)
        return b

    def to_dense(self, values: np.ndarray) -> np.ndarray:
        """Arrange per-edge values as an |X| x |X| matrix, zero off E."""
        matrix = np.zeros((self.n_states, self.n_states))
        matrix[self.sources, self.targets] = values
        return matrix

    def row_sums(self, values: np.ndarray) -> np.ndarray:
        return np.bincount(self.sources, weights=values, minlength=self.n_states)

    def column_sums(self, values: np.ndarray) -> np.ndarray:
        return np.bincount(self.targets, weights=values, minlength=self.n_states)

    def is_complete(self) -> bool:
        return self.n_edges == self.n_states ** 2


@lru_cache(maxsize=512)
def check_strong_connectivity(graph: KernelGraph) -> bool:
    """True iff every ordered pair of states is joined by a directed path through E."""
    digraph = nx.DiGraph()
    digraph.add_nodes_from(range(graph.n_states))
    digraph.add_edges_from(graph.edges)
    return nx.is_strongly_connected(digraph)


def require_strongly_connected(graph: KernelGraph) -> None:
    if not check_strong_connectivity(graph):
        raise NotStronglyConnected(
            "the directed graph (X, E) is not strongly connected",
            states=list(graph.states),
        )


def complete_graph(n: int) -> KernelGraph:
    states = tuple(str(i) for i in range(n))
    return KernelGraph(states, tuple((x, y) for x in range(n) for y in range(n)))


def cycle_graph(n: int) -> KernelGraph:
    states = tuple(str(i) for i in range(n))
    return KernelGraph(states, tuple((x, (x + 1) % n) for x in range(n)))


@dataclass(frozen=True, eq=False)
class MarkovKernel:
    """Row-stochastic kernel w(y|x), strictly positive exactly on E."""
    graph: KernelGraph
    probs: np.ndarray

    def __post_init__(self):
        require_strongly_connected(self.graph)
        probs = _frozen_array(self.probs, self.graph.n_edges, "kernel probabilities")
        if np.any(probs <= 0):
            bad = int(np.argmin(probs))
            raise NotPositive(
                "kernel entries must be strictly positive on E",
                edge=list(self.graph.edge_labels()[bad]),
                value=float(probs[bad]),
            )
        deviation = np.abs(self.graph.row_sums(probs) - 1.0)
        if np.max(deviation) > settings.stochastic_tol:
            raise InvalidInput(
                "kernel rows must sum to 1",
                state=self.graph.states[int(np.argmax(deviation))],
                deviation=float(np.max(deviation)),
            )
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_weights(cls, graph: KernelGraph, weights) -> "MarkovKernel":
        """Row-normalize positive per-edge weights into a kernel."""
        weights = np.asarray(weights, dtype=float)
        return cls(graph, weights / graph.row_sums(weights)[graph.sources])

    @property
    def log_probs(self) -> np.ndarray:
        return np.log(self.probs)

    @property
    def matrix(self) -> np.ndarray:
        return self.graph.to_dense(self.probs)

    def allclose(self, other: "MarkovKernel", atol: float = 1e-10) -> bool:
        return self.graph == other.graph and bool(np.max(np.abs(self.probs - other.probs)) <= atol)


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector on X."""
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidInput("distribution must be a non-empty vector")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InvalidInput("distribution entries must be finite and nonnegative")
        if abs(probs.sum() - 1.0) > settings.stochastic_tol:
            raise InvalidInput("distribution must sum to 1", total=float(probs.sum()))
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class EdgeMeasure:
    """Probability distribution on E; shift-invariant ones are the m-affine coordinates of W."""
    graph: KernelGraph
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen_array(self.probs, self.graph.n_edges, "edge measure")
        if np.any(probs < 0):
            raise NotPositive("edge measure entries must be nonnegative")
        if abs(probs.sum() - 1.0) > settings.stochastic_tol:
            raise InvalidInput("edge measure must sum to 1", total=float(probs.sum()))
        object.__setattr__(self, "probs", probs)

    def shift_residual(self) -> float:
        """max_x |p(+, x) - p(x, +)|."""
        gap = self.graph.column_sums(self.probs) - self.graph.row_sums(self.probs)
        return float(np.max(np.abs(gap)))

    def expectation(self, values: np.ndarray) -> np.ndarray:
        """Expectations of one edge function (1-d) or of columns of an |E| x d matrix."""
        return self.probs @ values


def _gth_solve(matrix: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman state reduction for an irreducible stochastic matrix."""
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    x = np.zeros(n)

    # Reduction
    for i in range(n - 1):
        scale = np.sum(a[i, i + 1:n])
        if scale <= 0:
            raise ConvergenceFailure("state reduction hit a closed class; kernel is reducible", step=i)
        a[i + 1:n, i] /= scale
        a[i + 1:n, i + 1:n] += np.outer(a[i + 1:n, i], a[i, i + 1:n])

    # Backward substitution
    x[n - 1] = 1.0
    for i in range(n - 2, -1, -1):
        x[i] = np.dot(x[i + 1:n], a[i + 1:n, i])

    return x / np.sum(x)


def stationary_distribution(w: MarkovKernel) -> Distribution:
    """Unique stationary law p with p W = p, by GTH elimination (no aperiodicity needed)."""
    matrix = w.matrix
    p = _gth_solve(matrix)
    residual = float(np.max(np.abs(p @ matrix - p)))
    if residual > settings.stationary_tol or np.any(p <= 0):
        raise ConvergenceFailure(
            "stationary solver residual exceeds tolerance",
            residual=residual,
            tolerance=settings.stationary_tol,
        )
    return Distribution(p)


def edge_measure(w: MarkovKernel) -> EdgeMeasure:
    """p_w^(2)(x, y) = p_w(x) w(y|x)."""
    p = stationary_distribution(w).probs
    return EdgeMeasure(w.graph, p[w.graph.sources] * w.probs)


def kernel_from_edge_measure(p2: EdgeMeasure) -> MarkovKernel:
    """Inverse of edge_measure on shift-invariant, strictly positive edge measures."""
    graph = p2.graph
    rows = graph.row_sums(p2.probs)
    if np.any(rows <= 0):
        raise ZeroRow(
            "edge measure has a state with zero outgoing mass",
            state=graph.states[int(np.argmin(rows))],
        )
    residual = p2.shift_residual()
    if residual > settings.shift_invariance_tol:
        raise NotShiftInvariant(
            "edge measure is not shift-invariant",
            residual=residual,
            tolerance=settings.shift_invariance_tol,
        )
    return MarkovKernel(graph, p2.probs / rows[graph.sources])


def random_strongly_connected_graph(
    n: int,
    rng: np.random.Generator,
    density: float = 0.5
) -> KernelGraph:
    """Directed n-cycle plus every other ordered pair with probability `density`."""
    edges = {(x, (x + 1) % n) for x in range(n)}
    for x in range(n):
        for y in range(n):
            if (x, y) not in edges and rng.random() < density:
                edges.add((x, y))
    return KernelGraph(tuple(str(i) for i in range(n)), tuple(edges))


def random_kernel(graph: KernelGraph, rng: np.random.Generator) -> MarkovKernel:
    return MarkovKernel.from_weights(graph, rng.uniform(0.1, 1.0, size=graph.n_edges))


def sample_path(
    w: MarkovKernel,
    length: int,
    rng: np.random.Generator,
    initial: Optional[str] = None
) -> list[str]:
    """
    Sample a trajectory of `length` states from w.

    Starts from `initial` when given, otherwise from the stationary law.
    """
    graph = w.graph
    if length < 1:
        raise InvalidInput("trajectory length must be positive", length=length)

    # Per-state cumulative transition tables
    targets = [graph.targets[graph.sources == x] for x in range(graph.n_states)]
    cumulative = [np.cumsum(w.probs[graph.sources == x]) for x in range(graph.n_states)]

    if initial is None:
        p = stationary_distribution(w).probs
        state = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        state = min(state, graph.n_states - 1)
    else:
        state = graph.state_index(initial)

    draws = rng.random(length - 1)
    path = [state]
    for u in draws:
        table = cumulative[state]
        k = min(int(np.searchsorted(table, u * table[-1], side="right")), len(table) - 1)
        state = int(targets[state][k])
        path.append(state)

    return [graph.states[s] for s in path]
