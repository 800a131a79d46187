"""
The linear space F(X, E) of edge functions.

Inner product, marginals, and the orthogonal decomposition F = F_S + F_A into
shift-invariant and anti-shift-invariant (potential difference) parts.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .config import settings
from .errors import GraphMismatch, InvalidInput, RankMismatch
from .kernel_graph import KernelGraph, _frozen_array


@dataclass(frozen=True, eq=False)
class EdgeFunction:
    """Real-valued function on E, stored in canonical edge order."""
    graph: KernelGraph
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", _frozen_array(self.values, self.graph.n_edges, "edge function")
        )

    @classmethod
    def zeros(cls, graph: KernelGraph) -> "EdgeFunction":
        return cls(graph, np.zeros(graph.n_edges))

    @classmethod
    def constant(cls, graph: KernelGraph, value: float) -> "EdgeFunction":
        return cls(graph, np.full(graph.n_edges, float(value)))

    @classmethod
    def indicator(cls, graph: KernelGraph, edge: tuple[int, int]) -> "EdgeFunction":
        """delta_{(x, y)} for an edge given by state indices."""
        if edge not in graph.edge_position:
            raise InvalidInput("indicator edge is not in E", edge=list(edge))
        values = np.zeros(graph.n_edges)
        values[graph.edge_position[edge]] = 1.0
        return cls(graph, values)

    def _check(self, other: "EdgeFunction") -> None:
        if self.graph != other.graph:
            raise GraphMismatch("edge functions live on different graphs")

    def __add__(self, other):
        if isinstance(other, EdgeFunction):
            self._check(other)
            return EdgeFunction(self.graph, self.values + other.values)
        return EdgeFunction(self.graph, self.values + float(other))

    def __sub__(self, other):
        if isinstance(other, EdgeFunction):
            self._check(other)
            return EdgeFunction(self.graph, self.values - other.values)
        return EdgeFunction(self.graph, self.values - float(other))

    def __mul__(self, scalar: float):
        return EdgeFunction(self.graph, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return EdgeFunction(self.graph, -self.values)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True, eq=False)
class StatePotential:
    """Real function kappa on X; kappa and kappa + c generate the same anti-shift-invariant function."""
    graph: KernelGraph
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", _frozen_array(self.values, self.graph.n_states, "state potential")
        )

    def gauged(self) -> "StatePotential":
        """Same class with kappa(first state) = 0."""
        return StatePotential(self.graph, self.values - self.values[0])


@dataclass(frozen=True)
class Decomposition:
    shift_part: EdgeFunction
    anti_part: EdgeFunction
    potential: StatePotential


class SubspaceDimensions(NamedTuple):
    dim_fs: int
    dim_fa: int


def marginals(f: EdgeFunction) -> tuple[StatePotential, StatePotential]:
    """(f(+, .), f(., +)): in-marginal and out-marginal over edges present in E."""
    graph = f.graph
    return (
        StatePotential(graph, graph.column_sums(f.values)),
        StatePotential(graph, graph.row_sums(f.values)),
    )


def shift_residual(f: EdgeFunction) -> float:
    incoming, outgoing = marginals(f)
    return float(np.max(np.abs(incoming.values - outgoing.values)))


def inner_product(f1: EdgeFunction, f2: EdgeFunction) -> float:
    if f1.graph != f2.graph:
        raise GraphMismatch("edge functions live on different graphs")
    return float(np.dot(f1.values, f2.values))


def anti_shift_from_potential(kappa: StatePotential) -> EdgeFunction:
    """g(x, y) = kappa(y) - kappa(x)."""
    graph = kappa.graph
    return EdgeFunction(graph, kappa.values[graph.targets] - kappa.values[graph.sources])


@lru_cache(maxsize=256)
def _potential_qr(graph: KernelGraph) -> tuple[np.ndarray, np.ndarray]:
    """Economic QR of the potential-difference basis with the first state dropped."""
    q, r = np.linalg.qr(graph.incidence()[:, 1:])
    q.setflags(write=False)
    r.setflags(write=False)
    return q, r


@lru_cache(maxsize=256)
def _gauge_basis(graph: KernelGraph) -> np.ndarray:
    """Orthonormal basis of F_A + constants (|X| columns on a strongly connected graph)."""
    columns = np.column_stack([graph.incidence()[:, 1:], np.ones(graph.n_edges)])
    q, _ = np.linalg.qr(columns)
    q.setflags(write=False)
    return q


def decompose(f: EdgeFunction) -> Decomposition:
    """
    Split f = f_S + f_A by least-squares projection onto F_A.

    The returned potential is gauged so that kappa(first state) = 0.
    """
    graph = f.graph
    q, r = _potential_qr(graph)
    coefficients = scipy.linalg.solve_triangular(r, q.T @ f.values)
    potential = StatePotential(graph, np.concatenate([[0.0], coefficients]))
    anti = anti_shift_from_potential(potential)
    shift = EdgeFunction(graph, f.values - anti.values)
    return Decomposition(shift_part=shift, anti_part=anti, potential=potential)


def gauge_residual(f: EdgeFunction) -> EdgeFunction:
    """Component of f orthogonal to F_A + constants; zero iff f is trivial in F / (F_A + R)."""
    q = _gauge_basis(f.graph)
    return EdgeFunction(f.graph, f.values - q @ (q.T @ f.values))


def shift_invariant_basis(graph: KernelGraph) -> np.ndarray:
    """Orthonormal basis of F_S as columns: the null space of the transposed incidence matrix."""
    return scipy.linalg.null_space(graph.incidence().T)


def subspace_dimensions(graph: KernelGraph) -> SubspaceDimensions:
    """(dim F_S, dim F_A) = (|E| - |X| + 1, |X| - 1), cross-checked by numerical ranks."""
    dim_fa = graph.n_states - 1
    dim_fs = graph.n_edges - graph.n_states + 1

    rank_fa = int(np.linalg.matrix_rank(graph.incidence()))
    rank_fs = int(shift_invariant_basis(graph).shape[1])
    if (rank_fs, rank_fa) != (dim_fs, dim_fa):
        raise RankMismatch(
            "numerical subspace ranks disagree with the dimension formulas",
            formula=[dim_fs, dim_fa],
            numerical=[rank_fs, rank_fa],
        )
    return SubspaceDimensions(dim_fs=dim_fs, dim_fa=dim_fa)


def numerical_rank(matrix: np.ndarray, reference: float = 1.0) -> int:
    """
    Rank with singular values cut at rank_tol relative to the largest.

    A matrix whose largest singular value is below rank_tol * reference
    (the scale of the data it was derived from) has rank 0.
    """
    if matrix.size == 0:
        return 0
    singular = np.linalg.svd(matrix, compute_uv=False)
    if singular[0] <= settings.rank_tol * max(reference, np.finfo(float).tiny):
        return 0
    return int(np.sum(singular > settings.rank_tol * singular[0]))
