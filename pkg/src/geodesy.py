"""
Geodesics and divergences on W(X, E).

e-geodesics are straight lines of log-kernels modulo F_A + R, m-geodesics are
straight lines of edge measures. The canonical divergence equals the KL
divergence rate between the two chains.
"""
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .config import settings
from .dual_geometry import (
    expectation_param, dual_potential, natural_coordinates, richardson_hessian,
    theta_from_eta,
)
from .errors import (
    ConvergenceFailure, GraphMismatch, InvalidInput, NotInFamily, NotPositive, NotShiftInvariant,
    UnsupportedTransition,
)
from .exp_family import ExponentialFamily, NaturalParameter, in_family, kernel_at, log_partition
from .function_space import EdgeFunction, decompose
from .kernel_graph import (
    Distribution, EdgeMeasure, KernelGraph, MarkovKernel, edge_measure,
    kernel_from_edge_measure,
)
from .pf_normalizer import delta_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeodesicSpec:
    w0: MarkovKernel
    w1: MarkovKernel
    kind: Literal["e", "m"]

    def __post_init__(self):
        if self.w0.graph != self.w1.graph:
            raise GraphMismatch("geodesic endpoints live on different graphs")
        if self.kind not in ("e", "m"):
            raise InvalidInput("geodesic kind must be 'e' or 'm'", kind=self.kind)

    def point(self, t: float) -> MarkovKernel:
        if self.kind == "e":
            return e_geodesic_point(self.w0, self.w1, t)
        return m_geodesic_point(self.w0, self.w1, t)


@dataclass(frozen=True)
class DivergenceReport:
    value: float
    form: Literal["direct", "bregman"]
    residual: Optional[float] = None


def _same_graph(*kernels: MarkovKernel) -> None:
    graph = kernels[0].graph
    if any(k.graph != graph for k in kernels[1:]):
        raise GraphMismatch("kernels live on different graphs")


def e_geodesic_point(w0: MarkovKernel, w1: MarkovKernel, t: float) -> MarkovKernel:
    """w_t = Gamma(w1^t w0^(1-t)), defined for every real t."""
    _same_graph(w0, w1)
    mixed = t * w1.log_probs + (1.0 - t) * w0.log_probs
    return delta_map(EdgeFunction(w0.graph, mixed)).kernel


def m_geodesic_point(w0: MarkovKernel, w1: MarkovKernel, t: float) -> MarkovKernel:
    """Kernel of the edge measure t p_w1 + (1 - t) p_w0; extrapolation allowed while positive."""
    _same_graph(w0, w1)
    mixed = t * edge_measure(w1).probs + (1.0 - t) * edge_measure(w0).probs
    if np.any(mixed <= 0):
        raise NotPositive(
            "mixed edge measure is not strictly positive at this t",
            t=t,
            min_entry=float(np.min(mixed)),
        )
    return kernel_from_edge_measure(EdgeMeasure(w0.graph, mixed / mixed.sum()))


def divergence_rate(w1: MarkovKernel, w2: MarkovKernel) -> float:
    """sum_E p^(2)_w1(x, y) log(w1(y|x) / w2(y|x)), in nats."""
    _same_graph(w1, w2)
    return float(edge_measure(w1).probs @ (w1.log_probs - w2.log_probs))


def bregman_divergence(
    family: ExponentialFamily,
    theta1: NaturalParameter,
    theta2: NaturalParameter
) -> float:
    """phi(w1) + psi(w2) - sum_i eta_i(w1) theta^i(w2)."""
    eta1 = expectation_param(family, theta1)
    return float(dual_potential(family, theta1) + log_partition(family, theta2) - eta1 @ theta2)


def divergence(
    w1: MarkovKernel,
    w2: MarkovKernel,
    family: Optional[ExponentialFamily] = None,
    form: Literal["direct", "bregman"] = "direct"
) -> DivergenceReport:
    """
    Canonical divergence D(w1 | w2).

    With a family, both forms are evaluated and the residual records their gap.
    """
    direct = divergence_rate(w1, w2)
    if family is None:
        if form == "bregman":
            raise InvalidInput("the Bregman form needs a family")
        return DivergenceReport(value=direct, form="direct")

    theta1 = natural_coordinates(family, w1)
    theta2 = natural_coordinates(family, w2)
    bregman = bregman_divergence(family, theta1, theta2)
    value = bregman if form == "bregman" else direct
    return DivergenceReport(value=value, form=form, residual=abs(direct - bregman))


def _row_kl(w1: MarkovKernel, w2: MarkovKernel) -> np.ndarray:
    return w1.graph.row_sums(w1.probs * (w1.log_probs - w2.log_probs))


def _kl(q1: np.ndarray, q2: np.ndarray) -> float:
    mask = q1 > 0
    return float(np.sum(q1[mask] * np.log(q1[mask] / q2[mask])))


def kl_joint(
    w1: MarkovKernel,
    w2: MarkovKernel,
    q1: Distribution,
    q2: Distribution,
    n: int
) -> float:
    """
    KL between the n-step joint laws q_i(x_1) w_i(x_2|x_1) ... w_i(x_n|x_{n-1}).

    Chain rule: KL(q1 || q2) + sum_{t=1}^{n-1} sum_x m_t(x) KL(w1(.|x) || w2(.|x)),
    with m_t the t-step marginal of (q1, w1).
    """
    _same_graph(w1, w2)
    if n < 1:
        raise InvalidInput("n must be at least 1", n=n)
    size = w1.graph.n_states
    if q1.probs.size != size or q2.probs.size != size:
        raise InvalidInput("initial distributions must live on the kernel states")
    if np.any(q1.probs <= 0) or np.any(q2.probs <= 0):
        raise NotPositive("initial distributions must be strictly positive")

    row_kl = _row_kl(w1, w2)
    transition = w1.matrix
    marginal = q1.probs.copy()
    total = _kl(q1.probs, q2.probs)
    for _ in range(n - 1):
        total += float(marginal @ row_kl)
        marginal = marginal @ transition
    return total


def joint_fisher(family: ExponentialFamily, theta, n: int, q: Distribution) -> np.ndarray:
    """G^(n)(theta): Hessian in theta' at theta' = theta of kl_joint(w_theta, w_theta', q, q, n)."""
    theta = family.check_theta(theta)
    base = kernel_at(family, theta).kernel
    hessian = richardson_hessian(
        lambda t: kl_joint(base, kernel_at(family, t).kernel, q, q, n),
        theta,
        settings.hessian_step,
    )
    return (hessian + hessian.T) / 2.0


def pythagorean_gap(
    w1: MarkovKernel,
    w2: MarkovKernel,
    w3: MarkovKernel,
    family: ExponentialFamily
) -> float:
    """
    D(w1|w2) + D(w2|w3) - D(w1|w3) - (eta(w1) - eta(w2)) . (theta(w3) - theta(w2)).

    The second term pairs the m-tangent at w2 (towards w1) with the e-tangent
    (towards w3) in dual coordinates.
    """
    _same_graph(w1, w2, w3)
    if not in_family(family, w1):
        raise NotInFamily("first kernel is not a member of the family")
    theta2 = natural_coordinates(family, w2)
    theta3 = natural_coordinates(family, w3, theta0=theta2)

    basis = family.basis_matrix
    eta1 = edge_measure(w1).probs @ basis
    eta2 = edge_measure(w2).probs @ basis

    lhs = divergence_rate(w1, w2) + divergence_rate(w2, w3) - divergence_rate(w1, w3)
    rhs = float((eta1 - eta2) @ (theta3 - theta2))
    return lhs - rhs


def fit_mle(family: ExponentialFamily, target: EdgeMeasure, theta0=None) -> NaturalParameter:
    """
    Moment-matching estimate: eta(theta_hat) = sum_E target(x, y) F_i(x, y).

    For a shift-invariant target this is the minimizer of D(w* | w_theta).
    """
    if target.graph != family.graph:
        raise GraphMismatch("target measure lives on a different graph")
    if np.any(target.probs <= 0):
        raise NotPositive("MLE target must be strictly positive on E")
    residual = target.shift_residual()
    if residual > settings.mle_shift_tol:
        raise NotShiftInvariant(
            "MLE target must be shift-invariant; symmetrize empirical counts first",
            residual=residual,
            tolerance=settings.mle_shift_tol,
        )
    return theta_from_eta(family, target.probs @ family.basis_matrix, theta0=theta0)


def shift_invariant_projection(graph: KernelGraph, weights) -> EdgeMeasure:
    """
    Nearest shift-invariant nonnegative measure to `weights`.

    Alternates least-squares projection onto F_S with clipping at zero, then
    renormalizes (a scalar rescaling keeps shift-invariance).
    """
    values = np.asarray(weights, dtype=float)
    clipped = False
    for _ in range(settings.projection_max_iters):
        values = decompose(EdgeFunction(graph, values)).shift_part.values
        # entries above -stochastic_tol are rounding noise around zero
        if np.all(values >= -settings.stochastic_tol):
            values = np.clip(values, 0.0, None)
            break
        clipped = True
        values = np.clip(values, 0.0, None)
    else:
        raise ConvergenceFailure(
            "alternating projection did not reach a nonnegative shift-invariant measure",
            iterations=settings.projection_max_iters,
            min_entry=float(np.min(decompose(EdgeFunction(graph, values)).shift_part.values)),
        )
    if clipped:
        logger.warning("Empirical edge measure needed clipping to stay nonnegative")
    total = values.sum()
    if total <= 0:
        raise InvalidInput("projected edge measure has no mass")
    return EdgeMeasure(graph, values / total)


def empirical_edge_measure(graph: KernelGraph, trajectory: Sequence[str]) -> EdgeMeasure:
    """Normalized transition-pair counts of a trajectory, projected to a shift-invariant measure."""
    if len(trajectory) < 2:
        raise InvalidInput("a trajectory needs at least 2 states", length=len(trajectory))
    counts = np.zeros(graph.n_edges)
    try:
        states = [graph.state_index(s) for s in trajectory]
    except InvalidInput as exc:
        raise UnsupportedTransition("trajectory visits an unknown state", **exc.context) from None
    for a, b in zip(states[:-1], states[1:]):
        position = graph.edge_position.get((a, b))
        if position is None:
            raise UnsupportedTransition(
                "trajectory uses a transition outside E",
                transition=[graph.states[a], graph.states[b]],
            )
        counts[position] += 1.0
    return shift_invariant_projection(graph, counts / counts.sum())
