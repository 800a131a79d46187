"""
Exponential families of Markov kernels.

log w_theta(y|x) = C(x, y) + sum_i theta^i F_i(x, y) + K_theta(y) - K_theta(x) - psi(theta),
evaluated through Delta(C + sum_i theta^i F_i). K_theta is recovered from the
Perron vector (gauge K_theta(first state) = 0) instead of being supplied.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .config import settings
from .errors import GraphMismatch, IdenticalKernels, InvalidInput
from .function_space import EdgeFunction, StatePotential, gauge_residual, numerical_rank, shift_invariant_basis
from .kernel_graph import KernelGraph, MarkovKernel, require_strongly_connected
from .pf_normalizer import delta_map, quotient_equal

logger = logging.getLogger(__name__)

# theta = (theta^i), length d
NaturalParameter = npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class ExponentialFamily:
    """Carrier C and basis F_1..F_d on a common graph."""
    graph: KernelGraph
    carrier: EdgeFunction
    basis: tuple[EdgeFunction, ...]

    def __post_init__(self):
        require_strongly_connected(self.graph)
        object.__setattr__(self, "basis", tuple(self.basis))
        for function in (self.carrier, *self.basis):
            if function.graph != self.graph:
                raise GraphMismatch("family functions must share the family graph")

    @property
    def dim(self) -> int:
        return len(self.basis)

    @cached_property
    def basis_matrix(self) -> np.ndarray:
        """|E| x d matrix with F_i as columns."""
        if not self.basis:
            return np.zeros((self.graph.n_edges, 0))
        matrix = np.column_stack([f.values for f in self.basis])
        matrix.setflags(write=False)
        return matrix

    def check_theta(self, theta) -> NaturalParameter:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.dim,):
            raise InvalidInput(
                f"natural parameter must have length {self.dim}", length=int(theta.size)
            )
        if not np.all(np.isfinite(theta)):
            raise InvalidInput("natural parameter must be finite")
        return theta

    def tilt(self, theta) -> EdgeFunction:
        """C + sum_i theta^i F_i."""
        theta = self.check_theta(theta)
        return EdgeFunction(self.graph, self.carrier.values + self.basis_matrix @ theta)


@dataclass(frozen=True)
class FamilyPoint:
    theta: NaturalParameter
    kernel: MarkovKernel
    psi: float
    kappa: StatePotential


def kernel_at(family: ExponentialFamily, theta) -> FamilyPoint:
    """(w_theta, psi(theta), K_theta) via Delta(C + sum_i theta^i F_i)."""
    theta = family.check_theta(theta)
    result = delta_map(family.tilt(theta))
    return FamilyPoint(
        theta=theta,
        kernel=result.kernel,
        psi=result.log_perron,
        kappa=result.potential,
    )


def log_partition(family: ExponentialFamily, theta) -> float:
    """psi(theta): log Perron root of exp(C + sum_i theta^i F_i) arranged on E."""
    return kernel_at(family, theta).psi


def _gauge_free_basis(family: ExponentialFamily) -> np.ndarray:
    if family.dim == 0:
        return np.zeros((family.graph.n_edges, 0))
    return np.column_stack([gauge_residual(f).values for f in family.basis])


def effective_dimension(family: ExponentialFamily) -> int:
    """Rank of the basis images in F / (F_A + R)."""
    if family.dim == 0:
        return 0
    reference = float(np.max(np.linalg.norm(family.basis_matrix, axis=0)))
    return numerical_rank(_gauge_free_basis(family), reference=reference)


def is_minimal(family: ExponentialFamily) -> bool:
    return effective_dimension(family) == family.dim


def full_family(graph: KernelGraph) -> ExponentialFamily:
    """
    W(X, E) as an exponential family of dimension |E| - |X|.

    Basis: an orthonormal basis of F_S orthogonal to the constants, a
    complement of F_A + R in F.
    """
    require_strongly_connected(graph)
    fs_basis = shift_invariant_basis(graph)
    constant_coordinates = fs_basis.T @ np.ones(graph.n_edges)
    complement = scipy.linalg.null_space(constant_coordinates[None, :])
    basis_matrix = fs_basis @ complement
    basis = tuple(EdgeFunction(graph, basis_matrix[:, i]) for i in range(basis_matrix.shape[1]))
    return ExponentialFamily(graph, EdgeFunction.zeros(graph), basis)


def complete_graph_family(graph: KernelGraph) -> ExponentialFamily:
    """
    Indicator family on a complete graph: carrier 0, basis delta_{i,j} for every
    i and every j other than the first state, d = |X|(|X| - 1).
    """
    if not graph.is_complete():
        raise InvalidInput("the indicator family needs the complete edge set X x X")
    n = graph.n_states
    basis = tuple(
        EdgeFunction.indicator(graph, (i, j)) for i in range(n) for j in range(1, n)
    )
    return ExponentialFamily(graph, EdgeFunction.zeros(graph), basis)


def complete_graph_coordinates(w: MarkovKernel) -> tuple[NaturalParameter, float]:
    """
    Closed-form (theta, psi) of w in complete_graph_family:
    theta_ij = log[w(j|i) w(0|j) / (w(0|i) w(0|0))], psi = -log w(0|0).
    """
    graph = w.graph
    if not graph.is_complete():
        raise InvalidInput("closed-form coordinates need the complete edge set X x X")
    log_w = np.log(w.matrix)
    n = graph.n_states
    theta = np.array([
        log_w[i, j] + log_w[j, 0] - log_w[i, 0] - log_w[0, 0]
        for i in range(n) for j in range(1, n)
    ])
    return theta, float(-log_w[0, 0])


def one_dim_family_through(w0: MarkovKernel, w1: MarkovKernel) -> ExponentialFamily:
    """The e-geodesic family C = log w0, F_1 = log w1 - log w0."""
    if w0.graph != w1.graph:
        raise GraphMismatch("kernels live on different graphs")
    log0 = EdgeFunction(w0.graph, w0.log_probs)
    log1 = EdgeFunction(w1.graph, w1.log_probs)
    if quotient_equal(log0, log1):
        raise IdenticalKernels("the two kernels coincide; no 1-dimensional family passes through them")
    return ExponentialFamily(w0.graph, log0, (log1 - log0,))


def in_family(family: ExponentialFamily, w: MarkovKernel) -> bool:
    """True iff log w - C lies in span{F_i} + F_A + R (within membership_tol)."""
    if w.graph != family.graph:
        return False
    target = gauge_residual(EdgeFunction(w.graph, w.log_probs) - family.carrier).values
    basis = _gauge_free_basis(family)
    if basis.shape[1]:
        coefficients, *_ = np.linalg.lstsq(basis, target, rcond=None)
        target = target - basis @ coefficients
    return bool(np.max(np.abs(target)) <= settings.membership_tol)


def make_family(
    graph: KernelGraph,
    carrier: Sequence[float],
    basis: Sequence[Sequence[float]]
) -> ExponentialFamily:
    """Build a family from raw per-edge vectors."""
    return ExponentialFamily(
        graph,
        EdgeFunction(graph, carrier),
        tuple(EdgeFunction(graph, row) for row in basis),
    )


def random_family(graph: KernelGraph, d: int, rng: np.random.Generator) -> ExponentialFamily:
    """Gaussian carrier (scale 0.5) and basis functions."""
    return make_family(
        graph,
        0.5 * rng.standard_normal(graph.n_edges),
        rng.standard_normal((d, graph.n_edges)),
    )
