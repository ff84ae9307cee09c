import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refgame.errors import ConfigError, DistributionError, NumericError, ShapeError
from refgame.nn import (
    DenseParams,
    GibbsConfig,
    PairConvParams,
    dense_backward,
    dense_forward,
    flatten_params,
    gibbs,
    gibbs_logprob_grad,
    glorot_dense,
    pair_conv_backward,
    pair_conv_forward,
    sample_categorical,
    sgd_apply,
    sigmoid_backward,
    sigmoid_forward,
    zeros_like_params,
)

from conftest import assert_close, fd_grad


class TestDense:
    def test_zero_weights_returns_bias(self):
        p = DenseParams(np.zeros((3, 2)), np.array([1.0, -2.0, 0.5]))
        y, _ = dense_forward(p, np.array([4.0, 5.0]))
        np.testing.assert_array_equal(y, p.bias)

    def test_identity_weights(self):
        p = DenseParams(np.eye(3), np.zeros(3))
        x = np.array([0.3, -1.2, 7.0])
        y, _ = dense_forward(p, x)
        np.testing.assert_array_equal(y, x)

    def test_random_case_against_index_loops(self):
        rng = np.random.default_rng(3)
        w = rng.normal(size=(3, 2))
        b = rng.normal(size=3)
        x = rng.normal(size=2)
        y, _ = dense_forward(DenseParams(w, b), x)
        expected = np.zeros(3)
        for i in range(3):
            expected[i] = b[i]
            for j in range(2):
                expected[i] += w[i, j] * x[j]
        np.testing.assert_allclose(y, expected, rtol=0, atol=1e-15)

    def test_shape_mismatch_reports_both_dims(self):
        p = DenseParams(np.zeros((3, 2)), np.zeros(3))
        with pytest.raises(ShapeError, match="2"):
            dense_forward(p, np.zeros(5))

    def test_zero_upstream_gives_zero_grads(self):
        p = DenseParams(np.ones((2, 2)), np.ones(2))
        _, cache = dense_forward(p, np.array([1.0, 2.0]))
        grads, downstream = dense_backward(cache, np.zeros(2))
        assert not grads.weights.any() and not grads.bias.any() and not downstream.any()

    def test_scalar_layer_grad_is_upstream_times_input(self):
        p = DenseParams(np.array([[2.0]]), np.array([0.5]))
        _, cache = dense_forward(p, np.array([3.0]))
        grads, downstream = dense_backward(cache, np.array([1.5]))
        assert grads.weights[0, 0] == 1.5 * 3.0
        assert grads.bias[0] == 1.5
        assert downstream[0] == 2.0 * 1.5

    def test_finite_difference_through_sigmoid(self):
        rng = np.random.default_rng(5)
        p = DenseParams(rng.normal(size=(4, 3)), rng.normal(size=4))
        x = rng.normal(size=3)
        u = rng.normal(size=4)  # treat L = u . sigmoid(Wx + b)

        def loss():
            y, _ = dense_forward(p, x)
            s, _ = sigmoid_forward(y)
            return float(u @ s)

        y, dcache = dense_forward(p, x)
        s, scache = sigmoid_forward(y)
        grads, dx = dense_backward(dcache, sigmoid_backward(scache, u))
        assert_close(grads.weights, fd_grad(loss, p.weights))
        assert_close(grads.bias, fd_grad(loss, p.bias))
        assert_close(dx, fd_grad(loss, x))


class TestSigmoid:
    def test_zero_maps_to_half(self):
        y, _ = sigmoid_forward(np.zeros(3))
        np.testing.assert_array_equal(y, np.full(3, 0.5))

    def test_saturation_at_forty(self):
        y, cache = sigmoid_forward(np.array([40.0]))
        assert abs(y[0] - 1.0) < 1e-15
        assert sigmoid_backward(cache, np.ones(1))[0] < 1e-15

    def test_no_overflow_at_extremes(self):
        y, _ = sigmoid_forward(np.array([-1000.0, 1000.0]))
        assert y[0] == 0.0 and y[1] == 1.0


class TestPairConv:
    def test_zero_filters_give_constant_half_maps(self):
        p = PairConvParams(np.zeros((3, 2)), np.array([1.0, 2.0, -0.5]))
        out, cache = pair_conv_forward(p, np.array([1.0, 2.0, 3.0, 4.0]), np.ones(4))
        _, _, _, maps = cache
        np.testing.assert_array_equal(maps, np.full((3, 4), 0.5))
        np.testing.assert_allclose(out, np.full(4, 0.5 * p.combiner.sum()))

    def test_single_filter_reduces_to_sigmoid(self):
        p = PairConvParams(np.array([[0.7, -0.3]]), np.array([1.0]))
        a = np.array([0.5, -1.0])
        b = np.array([2.0, 0.25])
        out, _ = pair_conv_forward(p, a, b)
        expected, _ = sigmoid_forward(0.7 * a - 0.3 * b)
        np.testing.assert_allclose(out, expected)

    def test_random_case_against_triple_loop_oracle(self):
        rng = np.random.default_rng(11)
        d, f = 4, 3
        p = PairConvParams(rng.normal(size=(f, 2)), rng.normal(size=f))
        a = rng.normal(size=d)
        b = rng.normal(size=d)
        out, _ = pair_conv_forward(p, a, b)
        expected = np.zeros(d)
        for j in range(d):
            for k in range(f):
                pre = p.filters[k, 0] * a[j] + p.filters[k, 1] * b[j]
                expected[j] += p.combiner[k] / (1.0 + np.exp(-pre))
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    def test_finite_difference_backward(self):
        rng = np.random.default_rng(13)
        d, f = 5, 4
        p = PairConvParams(rng.normal(size=(f, 2)), rng.normal(size=f))
        a = rng.normal(size=d)
        b = rng.normal(size=d)
        u = rng.normal(size=d)

        def loss():
            out, _ = pair_conv_forward(p, a, b)
            return float(u @ out)

        _, cache = pair_conv_forward(p, a, b)
        grads, da, db = pair_conv_backward(cache, u)
        assert_close(grads.filters, fd_grad(loss, p.filters))
        assert_close(grads.combiner, fd_grad(loss, p.combiner))
        assert_close(da, fd_grad(loss, a))
        assert_close(db, fd_grad(loss, b))


class TestGibbs:
    def test_equal_scores_are_uniform(self):
        probs = gibbs(np.full(7, 3.25), GibbsConfig(10.0))
        np.testing.assert_allclose(probs, np.full(7, 1 / 7), rtol=1e-14)

    def test_scale_invariance_of_exponent(self):
        rng = np.random.default_rng(2)
        s = rng.normal(size=6)
        for c in (0.5, 3.0, 42.0):
            np.testing.assert_allclose(
                gibbs(c * s, GibbsConfig(10.0 * c)), gibbs(s, GibbsConfig(10.0)), rtol=1e-12
            )

    def test_closed_form_two_scores(self):
        # exp(1), exp(0) -> e/(e+1), 1/(e+1)
        probs = gibbs(np.array([10.0, 0.0]), GibbsConfig(10.0))
        np.testing.assert_allclose(probs, [0.7310585786300049, 0.2689414213699951], atol=1e-12)

    def test_multiply_convention(self):
        s = np.array([0.1, 0.3])
        np.testing.assert_allclose(
            gibbs(s, GibbsConfig(2.0, exponent="multiply")),
            gibbs(s, GibbsConfig(0.5, exponent="divide")),
            rtol=1e-14,
        )

    def test_widely_separated_scores_stay_valid(self):
        probs = gibbs(np.array([1000.0, 0.0, -1000.0]), GibbsConfig(1.0))
        assert np.isfinite(probs).all()
        assert abs(probs.sum() - 1.0) < 1e-12

    def test_rejects_non_finite(self):
        with pytest.raises(NumericError):
            gibbs(np.array([np.inf, 0.0]), GibbsConfig(1.0))

    def test_rejects_bad_tau(self):
        with pytest.raises(ConfigError, match="tau"):
            GibbsConfig(0.0)

    @given(st.lists(st.floats(-500, 500), min_size=1, max_size=12))
    @settings(max_examples=60, deadline=None)
    def test_always_a_distribution(self, scores):
        probs = gibbs(np.array(scores), GibbsConfig(10.0))
        assert (probs >= 0).all()
        assert abs(probs.sum() - 1.0) < 1e-12

    def test_logprob_grad_formula(self):
        probs = gibbs(np.array([1.0, 2.0, -0.5]), GibbsConfig(10.0))
        grad = gibbs_logprob_grad(probs, 1, GibbsConfig(10.0))
        expected = (np.array([0.0, 1.0, 0.0]) - probs) / 10.0
        np.testing.assert_allclose(grad, expected, rtol=1e-14)


class TestSampleCategorical:
    def test_deterministic_on_point_mass(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            assert sample_categorical(np.array([1.0, 0.0, 0.0]), rng) == 0

    def test_fair_coin_binomial_bound(self):
        rng = np.random.default_rng(123)
        n = 100_000
        draws = sum(sample_categorical(np.array([0.5, 0.5]), rng) for _ in range(n))
        sigma = np.sqrt(n * 0.25)
        assert abs(draws - n / 2) < 4 * sigma

    def test_chi_square_goodness_of_fit(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(7)
        probs = np.array([0.2, 0.3, 0.5])
        n = 100_000
        counts = np.zeros(3)
        for _ in range(n):
            counts[sample_categorical(probs, rng)] += 1
        stat = float(((counts - n * probs) ** 2 / (n * probs)).sum())
        p_value = float(scipy_stats.chi2.sf(stat, df=2))
        assert p_value > 0.001

    def test_rejects_unnormalized(self):
        with pytest.raises(DistributionError):
            sample_categorical(np.array([0.7, 0.7]), np.random.default_rng(0))


class TestSgdApply:
    def test_zero_lr_is_identity(self):
        p = DenseParams(np.ones((2, 2)), np.ones(2))
        g = DenseParams(np.full((2, 2), 3.0), np.full(2, 3.0))
        out = sgd_apply(p, g, 0.0)
        np.testing.assert_array_equal(out.weights, p.weights)
        np.testing.assert_array_equal(out.bias, p.bias)

    def test_zero_grads_is_identity(self):
        p = DenseParams(np.ones((2, 2)), np.ones(2))
        out = sgd_apply(p, zeros_like_params(p), 0.7)
        np.testing.assert_array_equal(out.weights, p.weights)

    def test_scalar_arithmetic(self):
        p = DenseParams(np.array([[1.0]]), np.array([0.0]))
        g = DenseParams(np.array([[2.0]]), np.array([0.0]))
        assert sgd_apply(p, g, 0.1).weights[0, 0] == pytest.approx(0.8)

    def test_flatten_matches_field_order(self):
        rng = np.random.default_rng(1)
        p = glorot_dense(rng, 2, 3)
        flat = flatten_params(p)
        np.testing.assert_array_equal(flat, np.concatenate([p.weights.ravel(), p.bias.ravel()]))


@given(
    out_dim=st.integers(1, 4),
    in_dim=st.integers(1, 4),
    seed=st.integers(0, 2**16),
)
@settings(max_examples=25, deadline=None)
def test_dense_sigmoid_backward_matches_finite_differences(out_dim, in_dim, seed):
    """Randomized-shape gradient check (eps 1e-5, rel tol 1e-4)."""
    rng = np.random.default_rng(seed)
    p = DenseParams(rng.normal(size=(out_dim, in_dim)), rng.normal(size=out_dim))
    x = rng.normal(size=in_dim)
    u = rng.normal(size=out_dim)

    def loss():
        y, _ = dense_forward(p, x)
        s, _ = sigmoid_forward(y)
        return float(u @ s)

    y, dcache = dense_forward(p, x)
    s, scache = sigmoid_forward(y)
    grads, _ = dense_backward(dcache, sigmoid_backward(scache, u))
    assert_close(grads.weights, fd_grad(loss, p.weights))
    assert_close(grads.bias, fd_grad(loss, p.bias))
