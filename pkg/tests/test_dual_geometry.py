import math

import numpy as np
import pytest

from src.config import settings
from src.dual_geometry import (
    central_jacobian, connection_coefficients, dual_potential, expectation_param,
    fisher_direct, fisher_dual, fisher_hessian, natural_coordinates, richardson_hessian,
    solve_theta, theta_from_eta,
)
from src.errors import InvalidInput, NoConvergence, NotInFamily, NotMinimal
from src.exp_family import kernel_at, log_partition, make_family, random_family
from src.kernel_graph import complete_graph, random_strongly_connected_graph
from tests.conftest import k2_kernel


def psi_second_derivative(theta: float) -> float:
    u = math.exp(theta / 2.0)
    return u / (4.0 * (1.0 + u) ** 2)


@pytest.fixture
def random_instance(rng):
    graph = random_strongly_connected_graph(4, rng, density=0.7)
    family = random_family(graph, 2, rng)
    return family, 0.5 * rng.standard_normal(2)


class TestFisher:
    def test_direct_at_origin(self, k2_family):
        assert fisher_direct(k2_family, [0.0]).g[0, 0] == pytest.approx(1.0 / 16.0, abs=1e-7)

    @pytest.mark.parametrize("theta", [0.0, 2.0, -1.5])
    def test_hessian_closed_form(self, k2_family, theta):
        g = fisher_hessian(k2_family, [theta]).g[0, 0]
        assert g == pytest.approx(psi_second_derivative(theta), abs=1e-7)

    def test_hessian_at_two(self, k2_family):
        g = fisher_hessian(k2_family, [2.0]).g[0, 0]
        assert g == pytest.approx(psi_second_derivative(2.0), abs=1e-7)
        # e / (4 (1 + e)^2)
        assert g == pytest.approx(0.0491530, abs=1e-6)

    def test_direct_and_hessian_agree(self, random_instance):
        family, theta = random_instance
        direct = fisher_direct(family, theta)
        hessian = fisher_hessian(family, theta)
        np.testing.assert_allclose(direct.g, hessian.g, atol=1e-5)
        np.testing.assert_allclose(direct.g, direct.g.T, atol=1e-14)
        assert direct.is_positive_definite

    def test_degenerate_family(self, k2):
        family = make_family(k2, [0.0] * 4, [[0.0, 1.0, -1.0, 0.0]])
        fisher = fisher_direct(family, [0.3])
        assert fisher.is_degenerate
        with pytest.raises(NotMinimal):
            fisher.inverse()

    def test_dual_metric_is_inverse(self, random_instance):
        family, theta = random_instance
        product = fisher_dual(family, theta).g @ fisher_direct(family, theta).g
        np.testing.assert_allclose(product, np.eye(2), atol=1e-10)


class TestExpectation:
    def test_origin(self, k2_family):
        assert expectation_param(k2_family, [0.0])[0] == pytest.approx(0.25, abs=1e-14)

    def test_large_theta_approaches_half(self, k2_family):
        expected = 0.5 * math.exp(5.0) / (1.0 + math.exp(5.0))
        assert expectation_param(k2_family, [10.0])[0] == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.49665, abs=1e-5)

    def test_gradient_of_psi(self, random_instance):
        family, theta = random_instance
        gradient = central_jacobian(
            lambda t: np.array([log_partition(family, t)]), theta, settings.gradient_step
        )[0]
        np.testing.assert_allclose(gradient, expectation_param(family, theta), atol=1e-8)


class TestNewton:
    def test_origin(self, k2_family):
        assert theta_from_eta(k2_family, [0.25])[0] == pytest.approx(0.0, abs=1e-10)

    def test_third(self, k2_family):
        assert theta_from_eta(k2_family, [1.0 / 3.0])[0] == pytest.approx(2.0 * math.log(2.0), abs=1e-9)

    def test_round_trip(self, rng):
        for _ in range(5):
            graph = random_strongly_connected_graph(6, rng, density=0.5)
            d = min(6, graph.n_edges - graph.n_states)
            family = random_family(graph, d, rng)
            theta = 0.5 * rng.standard_normal(d)
            recovered = theta_from_eta(family, expectation_param(family, theta))
            np.testing.assert_allclose(recovered, theta, atol=1e-8)

    def test_round_trip_from_origin_stays_off_the_boundary(self, rng):
        # default start theta = 0, no warm initial guess
        graph = random_strongly_connected_graph(6, rng, density=0.5)
        d = min(6, graph.n_edges - graph.n_states)
        family = random_family(graph, d, rng)
        theta = 0.5 * rng.standard_normal(d)
        result = solve_theta(family, expectation_param(family, theta))
        assert result.residual <= settings.newton_tol
        assert result.iterations < settings.newton_max_iters
        np.testing.assert_allclose(result.theta, theta, atol=1e-8)

    def test_target_near_moment_boundary(self, k2_family):
        # eta = 0.49 needs u / (1 + u) = 0.98 with u = exp(theta / 2)
        assert theta_from_eta(k2_family, [0.49])[0] == pytest.approx(2.0 * math.log(49.0), abs=1e-8)

    def test_smaller_step_cap_takes_more_iterations(self, k2_family, monkeypatch):
        default = solve_theta(k2_family, [0.49])
        monkeypatch.setattr(settings, "newton_max_step", 0.25)
        result = solve_theta(k2_family, [0.49])
        assert result.iterations > default.iterations
        assert result.theta[0] == pytest.approx(2.0 * math.log(49.0), abs=1e-8)

    def test_diagnostics(self, k2_family):
        result = solve_theta(k2_family, [0.3], theta0=[0.5])
        assert result.residual <= settings.newton_tol
        assert result.iterations >= 1

    def test_unrealizable_moment(self, k2_family):
        with pytest.raises(NoConvergence):
            theta_from_eta(k2_family, [0.6])

    def test_non_minimal_family(self, k2):
        family = make_family(k2, [0.0] * 4, [[0.0, 1.0, -1.0, 0.0]])
        with pytest.raises(NotMinimal):
            theta_from_eta(family, [0.0])

    def test_wrong_length(self, k2_family):
        with pytest.raises(InvalidInput):
            theta_from_eta(k2_family, [0.2, 0.1])


class TestDualPotential:
    def test_origin(self, k2_family):
        assert dual_potential(k2_family, [0.0]) == pytest.approx(-math.log(2.0), abs=1e-13)

    def test_closed_form(self, k2_family):
        expected = (2.0 / 3.0) * math.log(2.0) - math.log(3.0)
        assert dual_potential(k2_family, [2.0 * math.log(2.0)]) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(-0.636514, abs=1e-6)

    def test_legendre_gradient(self, k2_family):
        theta = np.array([0.9])
        eta = expectation_param(k2_family, theta)
        gradient = central_jacobian(
            lambda e: np.array([dual_potential(k2_family, solve_theta(k2_family, e, theta0=theta, tol=0.0).theta)]),
            eta,
            settings.gradient_step,
        )[0]
        np.testing.assert_allclose(gradient, theta, atol=1e-4)


class TestNaturalCoordinates:
    def test_member(self, k2_family):
        w = kernel_at(k2_family, [1.7]).kernel
        assert natural_coordinates(k2_family, w)[0] == pytest.approx(1.7, abs=1e-9)

    def test_non_member(self, k2_family):
        with pytest.raises(NotInFamily):
            natural_coordinates(k2_family, k2_kernel(0.3, 0.6))


class TestConnections:
    def test_e_connection_flat_in_theta(self, random_instance):
        family, theta = random_instance
        coefficients = connection_coefficients(family, theta, which="e", coordinates="theta")
        assert coefficients.coeffs.shape == (2, 2, 2)
        assert coefficients.max_abs() <= 2e-4

    def test_m_connection_flat_in_eta(self, random_instance):
        family, theta = random_instance
        assert connection_coefficients(family, theta, which="m", coordinates="eta").max_abs() <= 2e-4

    def test_m_connection_curved_in_theta(self, k2_family):
        # psi''' is nonzero away from theta = 0 on the K2 family
        assert connection_coefficients(k2_family, [2.0], which="m", coordinates="theta").max_abs() > 1e-3

    def test_symmetric_in_first_pair(self, random_instance):
        family, theta = random_instance
        coeffs = connection_coefficients(family, theta, which="m", coordinates="theta").coeffs
        np.testing.assert_allclose(coeffs, coeffs.transpose(1, 0, 2), atol=1e-12)

    def test_metric_derivative_splits_into_dual_pair(self, random_instance):
        family, theta = random_instance
        e = connection_coefficients(family, theta, which="e").coeffs
        m = connection_coefficients(family, theta, which="m").coeffs
        dg = central_jacobian(lambda t: fisher_direct(family, t).g.ravel(), theta, 1e-3).reshape(2, 2, 2)
        # d_k g_ij = Gamma(e)_{ki,j} + Gamma(m)_{kj,i}
        expected = np.einsum("kij->ijk", e) + np.einsum("kji->ijk", m)
        np.testing.assert_allclose(dg, expected, atol=1e-4)

    def test_unknown_coordinates(self, k2_family):
        with pytest.raises(InvalidInput):
            connection_coefficients(k2_family, [0.0], coordinates="phi")


def test_richardson_hessian_of_quadratic():
    a = np.array([[2.0, 0.5], [0.5, 1.0]])
    hessian = richardson_hessian(lambda x: 0.5 * x @ a @ x, np.array([0.3, -0.2]), 1e-3)
    np.testing.assert_allclose(hessian, a, atol=1e-8)
