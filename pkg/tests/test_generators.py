import json

import numpy as np
import pytest
from scipy.integrate import simpson
from scipy.linalg import expm

from freezemc import (
    Connectivity,
    complete_graph_generator,
    generator_from_dict,
    generator_from_json,
    poisson_residual,
    poisson_solution,
    spectral_gap,
    spectral_gap_stochastic,
    stationary_distribution,
    validate_generator,
)
from freezemc.errors import (
    DecomposableError,
    NegativeOffDiagonalError,
    NotIrreducibleError,
    RowSumNotZeroError,
    RowSumOutOfRangeError,
)

from conftest import Q3, THETA_125, random_irreducible

# transition matrix that is indecomposable but not irreducible
INDECOMPOSABLE_P = np.array(
    [
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
        [1 / 3, 1 / 3, 1 / 3],
    ]
)


class TestValidate:
    def test_complete_graph_is_irreducible(self):
        gen = complete_graph_generator(THETA_125)
        assert gen.connectivity is Connectivity.IRREDUCIBLE
        assert gen.recurrent_states == frozenset({0, 1, 2})
        # reachability brute force on the 3-node graph
        adj = gen.q > 0
        reach_all = all(adj[i, j] for i in range(3) for j in range(3) if i != j)
        assert reach_all

    def test_indecomposable_classification(self):
        q = INDECOMPOSABLE_P - np.eye(3)
        gen = validate_generator(q)
        assert gen.connectivity is Connectivity.INDECOMPOSABLE
        assert gen.recurrent_states == frozenset({0, 1})

    def test_zero_matrix_decomposable(self):
        with pytest.raises(DecomposableError):
            validate_generator(np.zeros((2, 2)))

    def test_negative_off_diagonal(self):
        q = np.array([[0.5, -0.5], [1.0, -1.0]])
        with pytest.raises(NegativeOffDiagonalError):
            validate_generator(q)

    def test_row_sum_not_zero(self):
        q = np.array([[-1.0, 1.1], [1.0, -1.0]])
        with pytest.raises(RowSumNotZeroError):
            validate_generator(q)

    def test_row_sum_out_of_range(self):
        q = np.array([[-2.0, 2.0], [1.0, -1.0]])
        with pytest.raises(RowSumOutOfRangeError):
            validate_generator(q)

    def test_diagonal_stored_exactly(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            gen = random_irreducible(rng, int(rng.integers(2, 8)))
            off = gen.q.copy()
            np.fill_diagonal(off, 0.0)
            assert np.all(np.diag(gen.q) == -off.sum(axis=1))
            assert np.max(np.abs(gen.q.sum(axis=1))) < 1e-15


class TestStationary:
    def test_complete_graph_closed_form(self, gen125):
        nu = stationary_distribution(gen125)
        np.testing.assert_allclose(nu, [0.125, 0.25, 0.625], atol=1e-12)

    def test_two_state_symmetric(self):
        gen = complete_graph_generator(np.array([1.0, 1.0]))
        np.testing.assert_allclose(stationary_distribution(gen), [0.5, 0.5], atol=1e-13)

    def test_against_power_iteration(self, gen3):
        nu = stationary_distribution(gen3)
        # oracle: power iteration of the aperiodic stochastic matrix Id + q/2
        p = np.eye(3) + Q3 / 2.0
        v = np.full(3, 1 / 3)
        for _ in range(20_000):
            v = v @ p
        np.testing.assert_allclose(nu, v, atol=1e-10)
        assert np.max(np.abs(nu @ gen3.q)) < 1e-10

    def test_indecomposable_supported_on_recurrent_class(self):
        gen = validate_generator(INDECOMPOSABLE_P - np.eye(3))
        nu = stationary_distribution(gen)
        np.testing.assert_allclose(nu, [0.5, 0.5, 0.0], atol=1e-10)


class TestPoisson:
    def test_complete_graph_closed_form_residual(self, gen125):
        nu = stationary_distribution(gen125)
        h_closed = np.eye(3) / THETA_125.sum()
        assert poisson_residual(gen125.q, nu, h_closed) < 1e-12

    def test_residual_postcondition(self, gen3):
        nu = stationary_distribution(gen3)
        for gauge in ("nu-mean-zero", "raw"):
            h = poisson_solution(gen3, nu, gauge=gauge)
            assert poisson_residual(gen3.q, nu, h) < 1e-10

    def test_two_state_difference(self):
        # solving the 2x2 system by hand gives h[0,0] - h[0,1] = 1/(t1+t2)
        t1, t2 = 0.3, 0.6
        gen = validate_generator(np.array([[-t2, t2], [t1, -t1]]))
        nu = stationary_distribution(gen)
        h = poisson_solution(gen, nu)
        assert h[0, 0] - h[0, 1] == pytest.approx(1.0 / (t1 + t2), abs=1e-12)

    def test_nu_mean_zero_gauge(self, gen3):
        nu = stationary_distribution(gen3)
        h = poisson_solution(gen3, nu, gauge="nu-mean-zero")
        np.testing.assert_allclose(h @ nu, 0.0, atol=1e-12)

    def test_gauges_differ_by_constant_rows(self, gen3):
        nu = stationary_distribution(gen3)
        h0 = poisson_solution(gen3, nu, gauge="nu-mean-zero")
        h1 = poisson_solution(gen3, nu, gauge="raw")
        diff = h0 - h1
        assert np.max(np.abs(diff - diff[:, [0]])) < 1e-10

    def test_deviation_matrix_quadrature_oracle(self, gen3):
        # independent construction: h[k,i] = integral of (e^{tq} - 1 nu^T)[i,k]
        nu = stationary_distribution(gen3)
        ts = np.linspace(0.0, 80.0, 4001)
        vals = np.stack([expm(t * Q3) - np.outer(np.ones(3), nu) for t in ts])
        m = simpson(vals, x=ts, axis=0)
        h_oracle = m.T
        assert poisson_residual(Q3, nu, h_oracle) < 1e-8
        h = poisson_solution(gen3, nu)
        diff = h - h_oracle
        assert np.max(np.abs(diff - diff[:, [0]])) < 1e-6

    def test_rejects_indecomposable(self):
        gen = validate_generator(INDECOMPOSABLE_P - np.eye(3))
        with pytest.raises(NotIrreducibleError):
            poisson_solution(gen)


class TestSpectralGap:
    def test_complete_graph(self, gen125):
        # eigenvalues are 0 and -|theta| with multiplicity D-1
        assert spectral_gap(gen125) == pytest.approx(1.0, abs=1e-12)

    def test_two_state_closed_form(self):
        t1, t2 = 0.3, 0.6
        gen = validate_generator(np.array([[-t2, t2], [t1, -t1]]))
        assert spectral_gap(gen) == pytest.approx(t1 + t2, abs=1e-12)

    def test_scaling_homogeneity(self, gen3):
        half = validate_generator(0.5 * Q3)
        assert spectral_gap(half) == pytest.approx(0.5 * spectral_gap(gen3), rel=1e-12)

    def test_characteristic_polynomial_oracle(self, gen3):
        roots = np.roots(np.poly(Q3))
        nonzero = roots[np.abs(roots) > 1e-9]
        expected = float(np.min(-nonzero.real))
        assert spectral_gap(gen3) == pytest.approx(expected, rel=1e-9)

    def test_positive_for_random_irreducible(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            gen = random_irreducible(rng, int(rng.integers(2, 9)))
            assert spectral_gap(gen) > 0.0

    def test_stochastic_variant(self, gen125):
        # Id + q for the complete graph has eigenvalues 1 and 1 - |theta|
        assert spectral_gap_stochastic(gen125) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_indecomposable(self):
        gen = validate_generator(INDECOMPOSABLE_P - np.eye(3))
        with pytest.raises(NotIrreducibleError):
            spectral_gap(gen)


class TestCompleteGraph:
    def test_two_state_entries(self):
        gen = complete_graph_generator(np.array([1.0, 1.0]))
        np.testing.assert_array_equal(gen.q, [[-1.0, 1.0], [1.0, -1.0]])

    def test_unrescaled_rejected(self):
        with pytest.raises(RowSumOutOfRangeError):
            complete_graph_generator(np.array([1.0, 2.0, 5.0]))

    def test_positive_required(self):
        with pytest.raises(ValueError):
            complete_graph_generator(np.array([1.0, 0.0]))


class TestIO:
    def test_from_dict_matrix(self):
        gen = generator_from_dict({"dim": 3, "q": Q3.tolist()})
        np.testing.assert_allclose(gen.q, Q3, atol=1e-15)

    def test_from_dict_theta(self):
        gen = generator_from_dict({"complete_graph_theta": THETA_125.tolist()})
        assert gen.dim == 3

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            generator_from_dict({"dim": 2, "q": Q3.tolist()})

    def test_from_json(self, tmp_path):
        path = tmp_path / "gen.json"
        path.write_text(json.dumps({"q": Q3.tolist()}))
        gen = generator_from_json(path)
        assert gen.connectivity is Connectivity.IRREDUCIBLE
