import math

import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from src.config import settings
from src.errors import ConvergenceFailure, NotPositive, Overflow
from src.function_space import EdgeFunction, StatePotential, anti_shift_from_potential
from src.kernel_graph import complete_graph, cycle_graph, random_kernel, random_strongly_connected_graph
from src.pf_normalizer import delta_map, gamma_normalize, perron_pair, quotient_equal


class TestGammaNormalize:
    def test_all_ones(self, k2):
        result = gamma_normalize(EdgeFunction.constant(k2, 1.0))
        np.testing.assert_allclose(result.kernel.probs, [0.5] * 4, atol=1e-15)
        assert result.perron_root == pytest.approx(2.0, abs=1e-14)
        np.testing.assert_allclose(result.gamma, [1.0, 1.0], atol=1e-14)

    def test_scaled_kernel(self, rng):
        w = random_kernel(complete_graph(4), rng)
        result = gamma_normalize(EdgeFunction(w.graph, 3.5 * w.probs))
        assert result.kernel.allclose(w, atol=1e-12)
        assert result.perron_root == pytest.approx(3.5, rel=1e-12)

    def test_two_state_closed_form(self, k2):
        f = EdgeFunction(k2, [1.0, math.e, 1.0, 1.0])
        result = gamma_normalize(f)
        root = 1.0 + math.exp(0.5)
        assert result.perron_root == pytest.approx(root, rel=1e-13)
        np.testing.assert_allclose(result.gamma, [1.0, math.exp(-0.5)], rtol=1e-12)
        expected = math.exp(0.5) / root
        assert result.kernel.probs[1] == pytest.approx(expected, abs=1e-13)
        assert result.kernel.probs[2] == pytest.approx(expected, abs=1e-13)

    def test_kernel_is_fixed_point(self, rng):
        graph = random_strongly_connected_graph(6, rng)
        w = random_kernel(graph, rng)
        result = gamma_normalize(EdgeFunction(graph, w.probs))
        assert result.kernel.allclose(w, atol=1e-10)
        assert result.log_perron == pytest.approx(0.0, abs=1e-12)

    def test_periodic_support(self):
        graph = cycle_graph(3)
        result = gamma_normalize(EdgeFunction(graph, [2.0, 3.0, 4.0]))
        np.testing.assert_allclose(result.kernel.probs, [1.0, 1.0, 1.0])
        assert result.perron_root == pytest.approx(24.0 ** (1.0 / 3.0), rel=1e-12)

    def test_requires_positive_function(self, k2):
        with pytest.raises(NotPositive):
            gamma_normalize(EdgeFunction(k2, [1.0, -0.5, 1.0, 1.0]))


class TestDeltaMap:
    def test_zero_function(self, k2):
        result = delta_map(EdgeFunction.zeros(k2))
        np.testing.assert_allclose(result.kernel.probs, [0.5] * 4, atol=1e-15)
        assert result.log_perron == pytest.approx(math.log(2.0), abs=1e-14)

    def test_log_kernel(self, third_k2):
        result = delta_map(EdgeFunction(third_k2.graph, third_k2.log_probs))
        assert result.kernel.allclose(third_k2, atol=1e-13)
        assert result.log_perron == pytest.approx(0.0, abs=1e-13)

    def test_gauge_and_constant_invariance(self, rng):
        graph = random_strongly_connected_graph(5, rng)
        f = EdgeFunction(graph, rng.standard_normal(graph.n_edges))
        kappa = StatePotential(graph, rng.standard_normal(graph.n_states))
        base = delta_map(f)
        moved = delta_map(f + anti_shift_from_potential(kappa) + 2.75)
        assert moved.kernel.allclose(base.kernel, atol=1e-10)
        assert moved.log_perron - base.log_perron == pytest.approx(2.75, abs=1e-10)

    def test_large_offsets_are_exact(self, k2):
        result = delta_map(EdgeFunction.constant(k2, 500.0))
        assert result.log_perron == pytest.approx(500.0 + math.log(2.0), abs=1e-10)

    def test_unrepresentable_spread(self, k2):
        with pytest.raises(Overflow):
            delta_map(EdgeFunction(k2, [0.0, 800.0, 0.0, 0.0]))


class TestQuotientEqual:
    def test_constant_shift(self, rng, k2):
        f = EdgeFunction(k2, rng.standard_normal(4))
        assert quotient_equal(f, f + 3.7)

    def test_indicator_is_not_trivial(self, rng, k2):
        f = EdgeFunction(k2, rng.standard_normal(4))
        assert not quotient_equal(f, f + EdgeFunction.indicator(k2, (0, 1)))

    def test_distinct_kernels(self, uniform_k2, third_k2):
        f1 = EdgeFunction(uniform_k2.graph, uniform_k2.log_probs)
        f2 = EdgeFunction(third_k2.graph, third_k2.log_probs)
        assert not quotient_equal(f1, f2)

    @hypothesis_settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 5), related=st.booleans())
    def test_matches_delta_kernels(self, seed, n, related):
        rng = np.random.default_rng(seed)
        graph = random_strongly_connected_graph(n, rng)
        f1 = EdgeFunction(graph, rng.standard_normal(graph.n_edges))
        if related:
            kappa = StatePotential(graph, rng.standard_normal(n))
            f2 = f1 + anti_shift_from_potential(kappa) + float(rng.normal())
        else:
            f2 = f1 + EdgeFunction(graph, rng.standard_normal(graph.n_edges))
        same_kernel = delta_map(f1).kernel.allclose(delta_map(f2).kernel, atol=1e-9)
        assert quotient_equal(f1, f2) == same_kernel
        if related:
            assert same_kernel


def test_perron_pair_iteration_cap(monkeypatch):
    monkeypatch.setattr(settings, "max_iters", 1)
    monkeypatch.setattr(settings, "polish_steps", 0)
    matrix = np.arange(1.0, 10.0).reshape(3, 3)
    with pytest.raises(ConvergenceFailure):
        perron_pair(matrix)


def test_perron_pair_matches_dense_eigensolver(rng):
    matrix = rng.uniform(0.1, 2.0, size=(5, 5))
    root, vector, _, residual = perron_pair(matrix)
    assert root == pytest.approx(np.max(np.abs(np.linalg.eigvals(matrix))), rel=1e-12)
    assert vector[0] == pytest.approx(1.0, abs=1e-15)
    assert residual <= 1e-12
