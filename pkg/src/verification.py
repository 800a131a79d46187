"""
Invariant suites behind the `verify` command.

Each suite draws its instances from its own generator, spawned from a single
SeedSequence, so a report depends only on the seed and the sizes, never on
thread scheduling.
"""
import asyncio
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
import scipy.linalg

from .config import settings
from .dual_geometry import (
    central_jacobian, connection_coefficients, dual_potential, expectation_param,
    fisher_direct, fisher_dual, fisher_hessian, natural_coordinates, richardson_hessian,
    solve_theta, theta_from_eta,
)
from .errors import InfoGeoError, InvalidInput
from .exp_family import (
    ExponentialFamily, complete_graph_coordinates, complete_graph_family, effective_dimension,
    full_family, in_family, kernel_at, log_partition, make_family, one_dim_family_through,
    random_family,
)
from .function_space import (
    EdgeFunction, StatePotential, anti_shift_from_potential, decompose, inner_product,
    shift_residual, subspace_dimensions,
)
from .geodesy import (
    bregman_divergence, divergence, divergence_rate, e_geodesic_point, empirical_edge_measure,
    fit_mle, joint_fisher, kl_joint, m_geodesic_point, pythagorean_gap, shift_invariant_projection,
)
from .kernel_graph import (
    Distribution, KernelGraph, MarkovKernel, check_strong_connectivity, complete_graph,
    edge_measure, kernel_from_edge_measure, random_kernel, random_strongly_connected_graph,
    sample_path, stationary_distribution,
)
from .pf_normalizer import delta_map, gamma_normalize, quotient_equal

logger = logging.getLogger(__name__)

MAX_MESSAGES = 10

# Instances drawn per suite, independent of how many sizes are requested
RANDOM_KERNELS = 100
DIMENSION_GRAPHS = 10
FISHER_INSTANCES = 50
LEGENDRE_INSTANCES = 50
ROUND_TRIPS = 50
FLATNESS_INSTANCES = 20
PYTHAGOREAN_TRIPLES = 50
MINIMALITY_SAMPLES = 100


@dataclass
class SuiteResult:
    """Outcome of one invariant suite."""
    name: str
    checks: int = 0
    failures: int = 0
    worst_deviation: float = 0.0
    messages: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.checks > 0 and self.failures == 0

    def check(self, deviation: float, tolerance: float, label: str) -> None:
        """Record |observed - expected| against a tolerance; NaN always fails."""
        deviation = float(deviation)
        self.checks += 1
        if math.isfinite(deviation):
            self.worst_deviation = max(self.worst_deviation, deviation)
        if not deviation <= tolerance:
            self._fail(f"{label}: deviation {deviation:.3g} exceeds {tolerance:.3g}")

    def expect(self, condition: bool, label: str) -> None:
        self.checks += 1
        if not condition:
            self._fail(label)

    def record_error(self, exc: InfoGeoError) -> None:
        self.checks += 1
        self._fail(f"{exc.code}: {exc.message}")

    def _fail(self, message: str) -> None:
        self.failures += 1
        if len(self.messages) < MAX_MESSAGES:
            self.messages.append(message)

    def to_dict(self, timing: bool = False) -> dict:
        data = {
            "name": self.name,
            "passed": self.passed,
            "checks": self.checks,
            "failures": self.failures,
            "worst_deviation": self.worst_deviation,
            "messages": list(self.messages),
        }
        if timing:
            data["seconds"] = self.seconds
        return data


@dataclass
class VerificationReport:
    seed: int
    sizes: tuple[int, ...]
    suites: list[SuiteResult]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def to_dict(self, timing: bool = False) -> dict:
        return {
            "seed": self.seed,
            "sizes": list(self.sizes),
            "passed": self.passed,
            "suites": [s.to_dict(timing) for s in self.suites],
        }


def k2_indicator_family() -> ExponentialFamily:
    """K2 with carrier 0 and the single basis function delta_(0,1)."""
    return make_family(complete_graph(2), [0.0] * 4, [[0.0, 1.0, 0.0, 0.0]])


def _sup(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def _relative(a, b) -> float:
    b = np.asarray(b, dtype=float)
    return _sup(a, b) / max(1.0, float(np.max(np.abs(b))))


def _graphs(rng: np.random.Generator, sizes: Sequence[int]) -> list[KernelGraph]:
    """A complete graph and a sparse random strongly connected graph per size."""
    graphs = []
    for n in sizes:
        graphs.append(complete_graph(n))
        graphs.append(random_strongly_connected_graph(n, rng, density=0.4))
    return graphs


def _counted_graphs(
    rng: np.random.Generator, sizes: Sequence[int], count: int, with_family: bool = False
) -> Iterator[KernelGraph]:
    """
    `count` graphs cycling through the sizes, alternating complete and sparse
    random ones. with_family skips graphs where W(X, E) is a single kernel;
    complete graphs never are, so the draw always ends.
    """
    drawn = 0
    for n in itertools.cycle(sizes):
        for graph in (complete_graph(n), random_strongly_connected_graph(n, rng, density=0.4)):
            if drawn == count:
                return
            if with_family and _family_dim(graph) <= 0:
                continue
            drawn += 1
            yield graph


def _family_dim(graph: KernelGraph, cap: int = 2) -> int:
    return min(cap, graph.n_edges - graph.n_states)


def _random_instance(rng: np.random.Generator, graph: KernelGraph, cap: int = 2):
    """(family, theta) on graph, or None when W(X, E) is a single kernel."""
    d = _family_dim(graph, cap)
    if d <= 0:
        return None
    family = random_family(graph, d, rng)
    return family, 0.5 * rng.standard_normal(d)


def _instances(rng: np.random.Generator, sizes: Sequence[int], count: int, cap: int = 2):
    """`count` random (family, theta) pairs."""
    for graph in _counted_graphs(rng, sizes, count, with_family=True):
        yield _random_instance(rng, graph, cap)


def _psi_gradient(family: ExponentialFamily, theta: np.ndarray) -> np.ndarray:
    return central_jacobian(
        lambda t: np.array([log_partition(family, t)]), theta, settings.gradient_step
    )[0]


def gamma_idempotence(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for graph in _counted_graphs(rng, sizes, RANDOM_KERNELS):
        w = random_kernel(graph, rng)
        normalized = gamma_normalize(EdgeFunction(graph, w.probs))
        result.check(_sup(normalized.kernel.probs, w.probs), 1e-10, "Gamma(w) = w")
        result.check(abs(normalized.perron_root - 1.0), 1e-10, "Perron root of w is 1")


def stationary(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for graph in _counted_graphs(rng, sizes, RANDOM_KERNELS):
        w = random_kernel(graph, rng)
        p = stationary_distribution(w).probs
        result.check(_sup(p @ w.matrix, p), 1e-12, "pW = p")

        values, vectors = scipy.linalg.eig(w.matrix.T)
        oracle = np.real(vectors[:, int(np.argmin(np.abs(values - 1.0)))])
        result.check(_sup(p, oracle / oracle.sum()), 1e-10, "stationary law vs dense eigensolver")

        p2 = edge_measure(w)
        result.check(p2.shift_residual(), 1e-12, "edge measure is shift-invariant")
        result.check(_sup(kernel_from_edge_measure(p2).probs, w.probs), 1e-12, "kernel <- edge measure round trip")


def decomposition(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for graph in _graphs(rng, sizes):
        f = EdgeFunction(graph, rng.standard_normal(graph.n_edges))
        split = decompose(f)
        scale = 1.0 + f.norm()
        result.check(shift_residual(split.shift_part), 1e-10 * scale, "f_S is shift-invariant")
        result.check(abs(inner_product(split.shift_part, split.anti_part)), 1e-10 * scale ** 2, "f_S orthogonal to f_A")
        result.check(_sup(split.shift_part.values + split.anti_part.values, f.values), 1e-12 * scale, "f = f_S + f_A")

        kappa = StatePotential(graph, rng.standard_normal(graph.n_states))
        recovered = decompose(anti_shift_from_potential(kappa)).potential
        result.check(
            _sup(recovered.values, kappa.gauged().values), 1e-10 * (1.0 + np.max(np.abs(kappa.values))),
            "potential recovered up to a constant",
        )


def _reachability_oracle(graph: KernelGraph) -> bool:
    reach = (np.eye(graph.n_states) + graph.to_dense(np.ones(graph.n_edges)) > 0).astype(float)
    closure = np.linalg.matrix_power(reach, graph.n_states) > 0
    return bool(np.all(closure))


def dimensions(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for graph in _counted_graphs(rng, sizes, DIMENSION_GRAPHS):
        dims = subspace_dimensions(graph)
        result.check(abs(dims.dim_fs - (graph.n_edges - graph.n_states + 1)), 0, "dim F_S formula")
        result.check(abs(dims.dim_fa - (graph.n_states - 1)), 0, "dim F_A formula")
        family = full_family(graph)
        result.check(abs(effective_dimension(family) - (graph.n_edges - graph.n_states)), 0, "dim W = |E| - |X|")

        # A random edge subset is usually not strongly connected
        keep = [e for e in graph.edges if rng.random() < 0.5] or [graph.edges[0]]
        sub = KernelGraph(graph.states, tuple(keep))
        for candidate in (graph, sub):
            result.expect(
                check_strong_connectivity(candidate) == _reachability_oracle(candidate),
                "strong connectivity agrees with the reachability closure",
            )


def delta_gauge(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for graph in _graphs(rng, sizes):
        f = EdgeFunction(graph, rng.standard_normal(graph.n_edges))
        kappa = StatePotential(graph, rng.standard_normal(graph.n_states))
        c = float(rng.normal(scale=3.0))
        shifted = f + anti_shift_from_potential(kappa) + c

        base, moved = delta_map(f), delta_map(shifted)
        result.check(_sup(base.kernel.probs, moved.kernel.probs), 1e-10, "Delta ignores F_A + R")
        result.check(abs((moved.log_perron - base.log_perron) - c), 1e-10, "psi shifts by the constant")
        result.expect(quotient_equal(f, shifted), "quotient_equal(f, f + g + c)")

        w = random_kernel(graph, rng)
        at_log = delta_map(EdgeFunction(graph, w.log_probs))
        result.check(_sup(at_log.kernel.probs, w.probs), 1e-10, "Delta(log w) = w")
        result.check(abs(at_log.log_perron), 1e-10, "psi(log w) = 0")


def family_closed_form(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    family = k2_indicator_family()
    theta0 = np.zeros(1)
    result.check(abs(log_partition(family, theta0) - math.log(2.0)), 1e-7, "psi(0) = log 2")
    result.check(abs(expectation_param(family, theta0)[0] - 0.25), 1e-7, "eta(0) = 1/4")
    result.check(abs(fisher_direct(family, theta0).g[0, 0] - 1.0 / 16.0), 1e-7, "g(0) = 1/16 (score form)")
    result.check(abs(fisher_hessian(family, theta0).g[0, 0] - 1.0 / 16.0), 1e-7, "g(0) = 1/16 (Hessian form)")

    expected_w = math.exp(0.5) / (1.0 + math.exp(0.5))
    result.check(abs(kernel_at(family, [1.0]).kernel.probs[1] - expected_w), 1e-7, "w(1|0) at theta = 1")
    result.check(abs(log_partition(family, [2.0]) - math.log(1.0 + math.e)), 1e-7, "psi(2) = log(1 + e)")
    result.check(
        abs(fisher_hessian(family, [2.0]).g[0, 0] - math.e / (4.0 * (1.0 + math.e) ** 2)), 1e-7,
        "psi''(2)",
    )
    result.check(
        abs(theta_from_eta(family, [1.0 / 3.0])[0] - 2.0 * math.log(2.0)), 1e-7, "theta(eta = 1/3) = 2 ln 2"
    )
    result.check(abs(dual_potential(family, theta0) + math.log(2.0)), 1e-7, "phi(0) = -log 2")
    result.check(
        abs(dual_potential(family, [2.0 * math.log(2.0)]) - ((2.0 / 3.0) * math.log(2.0) - math.log(3.0))),
        1e-7,
        "phi(2 ln 2)",
    )


def fisher_cross(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for family, theta in _instances(rng, sizes, FISHER_INSTANCES):
        direct = fisher_direct(family, theta)
        hessian = fisher_hessian(family, theta)
        result.check(_sup(direct.g, hessian.g), 1e-5, "score-form and Hessian-form Fisher agree")
        result.check(_sup(direct.g, direct.g.T), 1e-12, "Fisher matrix is symmetric")
        result.expect(direct.is_positive_definite and hessian.is_positive_definite, "Fisher matrix is PD")


def legendre(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for family, theta in _instances(rng, sizes, LEGENDRE_INSTANCES):
        eta = expectation_param(family, theta)
        g = fisher_direct(family, theta).g

        result.check(_sup(_psi_gradient(family, theta), eta), 1e-4, "eta = grad psi")
        d_eta = central_jacobian(lambda t: expectation_param(family, t), theta, settings.gradient_step)
        result.check(_relative(d_eta, g), 1e-4, "d eta / d theta = G")

        def theta_of(e):
            return solve_theta(family, e, theta0=theta, tol=0.0).theta

        def phi_of(e):
            return dual_potential(family, theta_of(e))

        d_theta = central_jacobian(theta_of, eta, settings.gradient_step)
        g_dual = fisher_dual(family, theta).g
        result.check(_relative(d_theta, g_dual), 1e-4, "d theta / d eta = G^-1")

        grad_phi = central_jacobian(lambda e: np.array([phi_of(e)]), eta, settings.gradient_step)[0]
        result.check(_relative(grad_phi, theta), 1e-4, "theta = grad phi")
        result.check(
            _relative(richardson_hessian(phi_of, eta, settings.hessian_step), g_dual), 1e-4,
            "g^ij = Hessian of phi in eta",
        )


def newton_round_trip(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for family, theta in _instances(rng, sizes, ROUND_TRIPS, cap=6):
        recovered = theta_from_eta(family, expectation_param(family, theta))
        result.check(_sup(recovered, theta), 1e-8, "theta -> eta -> theta")


def geodesics(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    k2 = complete_graph(2)
    uniform = MarkovKernel(k2, [0.5] * 4)
    third = MarkovKernel(k2, [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0])
    result.check(abs(e_geodesic_point(uniform, third, 0.5).probs[1] - 1.0 / (1.0 + math.sqrt(2.0))), 1e-9, "K2 e-midpoint")
    result.check(abs(m_geodesic_point(uniform, third, 0.5).probs[1] - 5.0 / 12.0), 1e-9, "K2 m-midpoint")

    for graph in _graphs(rng, sizes):
        w0, w1 = random_kernel(graph, rng), random_kernel(graph, rng)
        for point in (e_geodesic_point, m_geodesic_point):
            result.check(_sup(point(w0, w1, 0.0).probs, w0.probs), 1e-12, f"{point.__name__} at t = 0")
            result.check(_sup(point(w0, w1, 1.0).probs, w1.probs), 1e-12, f"{point.__name__} at t = 1")

        t = float(rng.uniform(0.0, 1.0))
        mixed = t * edge_measure(w1).probs + (1.0 - t) * edge_measure(w0).probs
        result.check(_sup(edge_measure(m_geodesic_point(w0, w1, t)).probs, mixed), 1e-12, "m-geodesic is linear in p^(2)")

        if not w0.allclose(w1, atol=1e-12):
            through = one_dim_family_through(e_geodesic_point(w0, w1, 0.25), e_geodesic_point(w0, w1, 0.75))
            result.expect(in_family(through, e_geodesic_point(w0, w1, 0.5)), "reparametrized e-geodesic keeps its points")
            result.expect(in_family(through, w0), "reparametrized e-geodesic extends to t = 0")


def divergence_suite(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    k2 = complete_graph(2)
    uniform = MarkovKernel(k2, [0.5] * 4)
    third = MarkovKernel(k2, [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0])
    result.check(abs(divergence_rate(uniform, third) - 0.5 * math.log(9.0 / 8.0)), 1e-12, "K2 divergence")

    for graph in _graphs(rng, sizes):
        w1, w2 = random_kernel(graph, rng), random_kernel(graph, rng)
        result.expect(divergence_rate(w1, w2) >= -1e-15, "D >= 0")
        result.check(abs(divergence_rate(w1, w1)), 1e-12, "D(w | w) = 0")

        instance = _random_instance(rng, graph)
        if instance is None:
            continue
        family, theta1 = instance
        theta2 = 0.5 * rng.standard_normal(family.dim)
        a, b = kernel_at(family, theta1).kernel, kernel_at(family, theta2).kernel
        report = divergence(a, b, family=family)
        result.check(report.residual, 1e-9, "direct and Bregman forms agree")
        result.check(
            abs(bregman_divergence(family, theta1, theta2) - divergence_rate(a, b)), 1e-9,
            "Bregman form at known coordinates",
        )


def kl_limit(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    # complete graphs keep the chains aperiodic so m_t converges
    for n in sizes:
        graph = complete_graph(n)
        w1, w2 = random_kernel(graph, rng), random_kernel(graph, rng)
        rate = divergence_rate(w1, w2)

        p1, p2 = stationary_distribution(w1), stationary_distribution(w2)
        kl_one = kl_joint(w1, w2, p1, p2, 1)
        for steps in (2, 16, 64):
            exact = kl_one + (steps - 1) * rate
            result.check(
                abs(kl_joint(w1, w2, p1, p2, steps) - exact), 1e-12 * (1.0 + abs(exact)),
                "stationary start: KL_n = KL_1 + (n - 1) D",
            )

        q = Distribution.uniform(n)
        deviation = {m: abs(kl_joint(w1, w2, q, q, m) / m - rate) for m in (128, 256)}
        if deviation[128] > 1e-13:
            result.check(deviation[256] / deviation[128], 0.55, "|KL_n / n - D| halves as n doubles")


def fisher_limit(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for n in sizes:
        graph = complete_graph(n)
        instance = _random_instance(rng, graph)
        if instance is None:
            continue
        family, theta = instance
        g = fisher_direct(family, theta).g
        q = stationary_distribution(kernel_at(family, theta).kernel)

        deviation = {}
        for steps in (64, 128, 256):
            g_n = joint_fisher(family, theta, steps, q)
            result.check(_relative(g_n, (steps - 1) * g), 1e-5 * steps, f"G^({steps}) = (n - 1) G")
            deviation[steps] = float(np.max(np.abs(g_n / steps - g)))
        result.check(deviation[128] / deviation[64], 0.55, "||G^(n)/n - G|| halves (64 -> 128)")
        result.check(deviation[256] / deviation[128], 0.55, "||G^(n)/n - G|| halves (128 -> 256)")


def flatness(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for family, theta in _instances(rng, sizes, FLATNESS_INSTANCES):
        e_theta = connection_coefficients(family, theta, which="e", coordinates="theta")
        result.check(e_theta.max_abs(), 2e-4, "e-connection vanishes in theta")
        m_eta = connection_coefficients(family, theta, which="m", coordinates="eta")
        result.check(m_eta.max_abs(), 2e-4, "m-connection vanishes in eta")


def pythagorean(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for graph in _counted_graphs(rng, sizes, PYTHAGOREAN_TRIPLES, with_family=True):
        full = full_family(graph)
        w1, w2, w3 = (random_kernel(graph, rng) for _ in range(3))
        result.check(abs(pythagorean_gap(w1, w2, w3, full)), 1e-8, "generalized Pythagorean relation")
        result.check(abs(pythagorean_gap(w1, w1, w3, full)), 1e-12, "w1 = w2 gives a zero gap")

        # Orthogonal foot: w2 is the m-projection of w1 onto an e-flat subfamily holding w3
        sub = random_family(graph, _family_dim(graph, cap=1), rng)
        foot = kernel_at(sub, fit_mle(sub, edge_measure(w1))).kernel
        w3 = kernel_at(sub, 0.5 * rng.standard_normal(sub.dim)).kernel
        lhs = divergence_rate(w1, foot) + divergence_rate(foot, w3) - divergence_rate(w1, w3)
        result.check(abs(lhs), 1e-8, "D(w1|w2) + D(w2|w3) = D(w1|w3) at the m-projection")
        result.check(abs(pythagorean_gap(w1, foot, w3, full)), 1e-8, "gap at the m-projection")


def mle(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for graph in _graphs(rng, sizes):
        instance = _random_instance(rng, graph)
        if instance is None:
            continue
        family, theta = instance
        exact = fit_mle(family, edge_measure(kernel_at(family, theta).kernel))
        result.check(_sup(exact, theta), 1e-8, "exact edge measure recovers theta")

        target = random_kernel(graph, rng)
        theta_hat = fit_mle(family, edge_measure(target))
        gradient = central_jacobian(
            lambda t: np.array([divergence_rate(target, kernel_at(family, t).kernel)]),
            theta_hat,
            settings.gradient_step,
        )[0]
        result.check(float(np.max(np.abs(gradient))), 1e-6, "divergence is stationary at the MLE")

        # perturbed, re-symmetrized target: no sampled point beats the MLE
        noisy = edge_measure(kernel_at(family, theta).kernel).probs + rng.uniform(0.0, 1e-3, graph.n_edges)
        projected = shift_invariant_projection(graph, noisy)
        w_star = kernel_from_edge_measure(projected)
        best = divergence_rate(w_star, kernel_at(family, fit_mle(family, projected)).kernel)
        for _ in range(MINIMALITY_SAMPLES):
            other = theta + rng.normal(scale=0.5, size=family.dim)
            margin = best - divergence_rate(w_star, kernel_at(family, other).kernel)
            result.check(max(0.0, margin), 1e-12, "MLE minimizes D(w* | w_theta)")

    family = k2_indicator_family()
    theta = np.array([1.0])
    steps = 100_000
    path = sample_path(kernel_at(family, theta).kernel, steps, rng)
    estimate = fit_mle(family, empirical_edge_measure(family.graph, path))
    standard_error = np.sqrt(np.diag(fisher_dual(family, theta).g) / steps)
    result.check(float(np.max(np.abs(estimate - theta) / standard_error)), 3.0, "trajectory MLE within 3 standard errors")


def e_closure(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for graph in _graphs(rng, sizes):
        instance = _random_instance(rng, graph)
        if instance is None:
            continue
        family, theta1 = instance
        theta2 = 0.5 * rng.standard_normal(family.dim)
        w1, w2 = kernel_at(family, theta1).kernel, kernel_at(family, theta2).kernel
        for t in (-0.5, 0.25, 0.5, 1.5):
            point = e_geodesic_point(w1, w2, t)
            result.expect(in_family(family, point), f"e-geodesic point at t = {t} stays in the family")
            expected = kernel_at(family, (1.0 - t) * theta1 + t * theta2).kernel
            result.check(_sup(point.probs, expected.probs), 1e-10, "e-geodesic is a line in theta")


def complete_graph_coordinates_suite(result: SuiteResult, rng: np.random.Generator, sizes: Sequence[int]) -> None:
    for n in sizes:
        graph = complete_graph(n)
        family = complete_graph_family(graph)
        w = random_kernel(graph, rng)
        theta, psi = complete_graph_coordinates(w)
        point = kernel_at(family, theta)
        result.check(_sup(point.kernel.probs, w.probs), 1e-10, "closed-form coordinates reproduce w")
        result.check(abs(point.psi - psi), 1e-10, "closed-form psi")
        result.check(abs(family.dim - n * (n - 1)), 0, "indicator family has d = |X|(|X| - 1)")

        full = full_family(graph)
        reached = kernel_at(full, natural_coordinates(full, w)).kernel
        result.check(_sup(reached.probs, w.probs), 1e-8, "full family reaches every kernel")


SUITES: dict[str, Callable[[SuiteResult, np.random.Generator, Sequence[int]], None]] = {
    "gamma_idempotence": gamma_idempotence,
    "stationary": stationary,
    "decomposition": decomposition,
    "dimensions": dimensions,
    "delta_gauge": delta_gauge,
    "family_closed_form": family_closed_form,
    "fisher_cross": fisher_cross,
    "legendre": legendre,
    "newton_round_trip": newton_round_trip,
    "geodesics": geodesics,
    "divergence": divergence_suite,
    "kl_limit": kl_limit,
    "fisher_limit": fisher_limit,
    "flatness": flatness,
    "pythagorean": pythagorean,
    "mle": mle,
    "e_closure": e_closure,
    "complete_graph_coordinates": complete_graph_coordinates_suite,
}


def run_suite(name: str, rng: np.random.Generator, sizes: Sequence[int]) -> SuiteResult:
    result = SuiteResult(name=name)
    started = time.perf_counter()
    try:
        SUITES[name](result, rng, sizes)
    except InfoGeoError as exc:
        logger.error(f"Suite {name} aborted: {exc.code}: {exc.message}")
        result.record_error(exc)
    result.seconds = time.perf_counter() - started
    logger.info(
        f"Suite {name}: {result.checks} checks, {result.failures} failures "
        f"in {result.seconds:.2f}s"
    )
    return result


async def run_verification(
    seed: int,
    sizes: Sequence[int],
    workers: Optional[int] = None,
    suites: Optional[Sequence[str]] = None,
) -> VerificationReport:
    """Run the selected suites (all by default) on a pool of worker threads."""
    sizes = tuple(int(n) for n in sizes)
    if not sizes or min(sizes) < 2:
        raise InvalidInput("sizes must be integers >= 2", sizes=list(sizes))
    names = list(SUITES) if suites is None else list(suites)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise InvalidInput("unknown verification suites", suites=unknown)

    # One child per registered suite, so a subset run sees the same streams
    children = dict(zip(SUITES, np.random.SeedSequence(seed).spawn(len(SUITES))))
    limit = asyncio.Semaphore(max(1, workers or settings.verify_workers))

    async def run_one(name: str) -> SuiteResult:
        async with limit:
            return await asyncio.to_thread(run_suite, name, np.random.default_rng(children[name]), sizes)

    results = await asyncio.gather(*(run_one(name) for name in names))
    return VerificationReport(seed=seed, sizes=sizes, suites=list(results))
