import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coss import nn
from coss.errors import ConfigError, InputError, NumericError, ShapeError, StateError

from oracles import finite_diff_check, naive_conv1d


def _const(arr):
    return nn.Tensor(np.asarray(arr, dtype=np.float64))


class TestConv1d:
    def test_hand_example(self):
        x = _const([[[1.0, 2.0, 3.0]]])
        w = nn.Parameter(np.array([[[1.0, 1.0]]]))
        b = nn.Parameter(np.zeros(1))
        out = nn.conv1d(x, w, b)
        np.testing.assert_allclose(out.data, [[[3.0, 5.0]]])

    def test_zero_weight_gives_zero_output(self):
        x = _const(np.random.default_rng(0).normal(size=(2, 3, 7)))
        out = nn.conv1d(x, nn.Parameter(np.zeros((4, 3, 2))), nn.Parameter(np.zeros(4)))
        assert out.shape == (2, 4, 6)
        assert np.all(out.data == 0.0)

    def test_identity_kernel(self):
        x = _const(np.random.default_rng(1).normal(size=(2, 1, 5)))
        out = nn.conv1d(x, nn.Parameter(np.ones((1, 1, 1))), nn.Parameter(np.zeros(1)))
        np.testing.assert_array_equal(out.data, x.data)

    def test_matches_naive_triple_loop(self):
        rng = np.random.default_rng(7)
        for b, ci, co, n, ks in [(1, 1, 1, 4, 2), (2, 3, 4, 9, 3), (3, 2, 5, 12, 5)]:
            x = rng.normal(size=(b, ci, n))
            w = rng.normal(size=(co, ci, ks))
            bias = rng.normal(size=co)
            out = nn.conv1d(_const(x), nn.Parameter(w), nn.Parameter(bias))
            np.testing.assert_allclose(out.data, naive_conv1d(x, w, bias), atol=1e-12)

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            nn.conv1d(_const(np.zeros((1, 2, 5))), nn.Parameter(np.zeros((1, 3, 2))), nn.Parameter(np.zeros(1)))
        with pytest.raises(ShapeError):
            nn.conv1d(_const(np.zeros((1, 1, 2))), nn.Parameter(np.zeros((1, 1, 5))), nn.Parameter(np.zeros(1)))

    def test_nonfinite_output_raises(self):
        x = _const(np.full((1, 1, 3), 1e308))
        with pytest.raises(NumericError):
            nn.conv1d(x, nn.Parameter(np.full((1, 1, 2), 1e308)), nn.Parameter(np.zeros(1)))


class TestSimpleOps:
    def test_relu(self):
        out = nn.relu(_const([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])

    def test_global_max_pool(self):
        out = nn.global_max_pool(_const([[[1.0, 5.0, 3.0]]]))
        np.testing.assert_array_equal(out.data, [[5.0]])

    def test_dense(self):
        x = _const([[1.0, 2.0]])
        w = nn.Parameter(np.array([[3.0, 4.0], [5.0, 6.0]]))
        b = nn.Parameter(np.array([1.0, -1.0]))
        np.testing.assert_allclose(nn.dense(x, w, b).data, [[12.0, 16.0]])

    def test_softmax_uniform(self):
        np.testing.assert_allclose(nn.softmax(_const([0.0, 0.0, 0.0])).data, np.ones(3) / 3, atol=1e-15)

    def test_softmax_hand_value(self):
        np.testing.assert_allclose(nn.softmax(_const([math.log(2), 0.0])).data, [2 / 3, 1 / 3], atol=1e-12)

    @given(st.lists(st.floats(min_value=-200, max_value=200), min_size=1, max_size=12))
    @settings(max_examples=200, deadline=None)
    def test_softmax_sums_to_one_and_positive(self, xs):
        out = nn.softmax(_const(xs)).data
        assert abs(out.sum() - 1.0) < 1e-12
        assert np.all(out > 0.0)

    def test_weighted_sum_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nn.weighted_sum([_const(np.zeros((1, 2))), _const(np.zeros((1, 3)))], _const([0.5, 0.5]))

    def test_weighted_sum_empty(self):
        with pytest.raises(StateError):
            nn.weighted_sum([], _const([]))

    def test_select_gathers(self):
        out = nn.select(_const([1.0, 2.0, 3.0]), [2, 0])
        np.testing.assert_array_equal(out.data, [3.0, 1.0])


class TestBatchNorm:
    def test_identical_rows_map_to_zero(self):
        st_ = nn.BatchNormState(2)
        x = _const(np.tile(np.array([[1.0, -2.0]]), (4, 1)))
        out = nn.batch_norm(x, st_)
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)

    def test_batch_of_one_in_training_raises(self):
        st_ = nn.BatchNormState(2)
        with pytest.raises(NumericError):
            nn.batch_norm(_const(np.zeros((1, 2, 5))), st_)

    def test_inference_uses_running_stats(self):
        st_ = nn.BatchNormState(1)
        st_.running_mean[:] = 2.0
        st_.running_var[:] = 4.0
        st_.training = False
        out = nn.batch_norm(_const([[4.0]]), st_)
        np.testing.assert_allclose(out.data, [[(4.0 - 2.0) / math.sqrt(4.0 + st_.epsilon)]])

    def test_training_normalizes_batch(self):
        st_ = nn.BatchNormState(1)
        x = _const(np.array([[1.0], [3.0]]))
        out = nn.batch_norm(x, st_)
        np.testing.assert_allclose(out.data.mean(), 0.0, atol=1e-12)
        # running stats moved toward the batch statistics
        assert st_.running_mean[0] == pytest.approx(0.1 * 2.0)
        assert st_.running_var[0] == pytest.approx(0.9 * 1.0 + 0.1 * 2.0)  # unbiased var = 2


class TestCrossEntropy:
    def test_uniform_logits_18_classes(self):
        logits = _const(np.zeros((4, 18)))
        loss = nn.cross_entropy(logits, np.array([0, 5, 17, 3]))
        assert loss.item() == pytest.approx(math.log(18.0), abs=1e-12)

    def test_label_out_of_range(self):
        with pytest.raises(InputError):
            nn.cross_entropy(_const(np.zeros((1, 3))), np.array([3]))

    def test_single_class_rejected(self):
        with pytest.raises(ShapeError):
            nn.cross_entropy(_const(np.zeros((1, 1))), np.array([0]))


class TestBackward:
    def test_dense_ce_grad_has_outer_product_structure(self):
        x = np.array([[0.5, -1.0, 2.0]])
        w = nn.Parameter(np.zeros((2, 3)))
        b = nn.Parameter(np.zeros(2))
        logits = nn.dense(_const(x), w, b)
        loss = nn.cross_entropy(logits, np.array([0]))
        nn.backward(loss)
        probs = np.array([0.5, 0.5])
        coeff = probs - np.array([1.0, 0.0])
        np.testing.assert_allclose(w.grad, np.outer(coeff, x[0]), atol=1e-12)

    def test_unused_parameter_gets_zero_grad(self):
        used = nn.Parameter(np.zeros((2, 2)))
        unused = nn.Parameter(np.ones((3, 3)))
        loss = nn.cross_entropy(nn.dense(_const(np.ones((1, 2))), used, nn.Parameter(np.zeros(2))), np.array([0]))
        nn.backward(loss)
        assert np.all(unused.grad == 0.0)

    def test_backward_twice_raises(self):
        w = nn.Parameter(np.zeros((2, 2)))
        loss = nn.cross_entropy(nn.dense(_const(np.ones((1, 2))), w, nn.Parameter(np.zeros(2))), np.array([0]))
        nn.backward(loss)
        with pytest.raises(StateError):
            nn.backward(loss)

    def test_backward_needs_scalar(self):
        with pytest.raises(InputError):
            nn.backward(nn.relu(_const([1.0, 2.0])))

    def test_grads_accumulate_until_zeroed(self):
        w = nn.Parameter(np.zeros((2, 2)))
        for _ in range(2):
            loss = nn.cross_entropy(
                nn.dense(_const(np.ones((1, 2))), w, nn.Parameter(np.zeros(2))), np.array([0])
            )
            nn.backward(loss)
        doubled = w.grad.copy()
        nn.zero_grad([w])
        loss = nn.cross_entropy(nn.dense(_const(np.ones((1, 2))), w, nn.Parameter(np.zeros(2))), np.array([0]))
        nn.backward(loss)
        np.testing.assert_allclose(doubled, 2.0 * w.grad, atol=1e-14)


class TestGradientsAgainstFiniteDifferences:
    """Central finite differences (h=1e-5) vs analytic grads, rel err < 1e-4."""

    def _check_chain(self, params, build_loss):
        worst = finite_diff_check(build_loss, params, h=1e-5, rtol=1e-4)
        assert worst < 1e-4

    def test_conv_pool_dense_chain(self):
        rng = np.random.default_rng(3)
        x = nn.Parameter(rng.normal(size=(3, 2, 8)), "x")
        w = nn.Parameter(rng.normal(size=(4, 2, 3)), "w")
        b = nn.Parameter(rng.normal(size=4), "b")
        wd = _const(rng.normal(size=(3, 4)))
        labels = np.array([0, 2, 1])

        def build():
            h = nn.relu(nn.conv1d(x, w, b))
            return nn.cross_entropy(nn.dense(nn.global_max_pool(h), wd, _const(np.zeros(3))), labels)

        self._check_chain([x, w, b], build)

    def test_batch_norm_training_chain(self):
        rng = np.random.default_rng(4)
        x = nn.Parameter(rng.normal(size=(4, 3, 6)), "x")
        state = nn.BatchNormState(3)
        state.gamma.data[:] = rng.normal(1.0, 0.2, size=3)
        state.beta.data[:] = rng.normal(size=3)
        wd = _const(rng.normal(size=(2, 3)))
        labels = np.array([0, 1, 0, 1])

        def build():
            h = nn.batch_norm(x, state)
            return nn.cross_entropy(nn.dense(nn.global_max_pool(h), wd, _const(np.zeros(2))), labels)

        self._check_chain([x, state.gamma, state.beta], build)

    def test_batch_norm_inference_chain(self):
        rng = np.random.default_rng(5)
        x = nn.Parameter(rng.normal(size=(2, 3, 5)), "x")
        state = nn.BatchNormState(3)
        state.running_mean[:] = rng.normal(size=3)
        state.running_var[:] = rng.uniform(0.5, 2.0, size=3)
        state.training = False
        wd = _const(rng.normal(size=(2, 3)))
        labels = np.array([1, 0])

        def build():
            h = nn.batch_norm(x, state)
            return nn.cross_entropy(nn.dense(nn.global_max_pool(h), wd, _const(np.zeros(2))), labels)

        self._check_chain([x, state.gamma, state.beta], build)

    def test_softmax_chain(self):
        rng = np.random.default_rng(6)
        x = nn.Parameter(rng.normal(size=(3, 4)), "x")
        wd = _const(rng.normal(size=(3, 4)))
        labels = np.array([2, 0, 1])

        def build():
            return nn.cross_entropy(nn.dense(nn.softmax(x), wd, _const(np.zeros(3))), labels)

        self._check_chain([x], build)

    def test_gate_chain_select_softmax_weighted_sum(self):
        rng = np.random.default_rng(8)
        alphas = nn.Parameter(rng.normal(size=4), "alphas")
        feats = [nn.Parameter(rng.normal(size=(3, 5)), f"f{i}") for i in range(3)]
        wd = _const(rng.normal(size=(2, 5)))
        labels = np.array([0, 1, 1])

        def build():
            w = nn.softmax(nn.select(alphas, [0, 2, 3]))
            mixed = nn.weighted_sum(feats, w)
            return nn.cross_entropy(nn.dense(mixed, wd, _const(np.zeros(2))), labels)

        self._check_chain([alphas, *feats], build)

    def test_cross_entropy_logits(self):
        rng = np.random.default_rng(9)
        logits = nn.Parameter(rng.normal(size=(5, 4)), "logits")
        labels = np.array([0, 3, 1, 2, 2])
        self._check_chain([logits], lambda: nn.cross_entropy(logits, labels))


class TestSgd:
    def test_vanilla_step(self):
        p = nn.Parameter(np.array([1.0, 2.0]))
        p.grad[:] = np.array([0.5, -0.5])
        nn.sgd_step([p], nn.SgdConfig(learning_rate=1.0, momentum=0.0, weight_decay=0.0))
        np.testing.assert_allclose(p.data, [0.5, 2.5])
        assert np.all(p.grad == 0.0)

    def test_zero_grad_zero_buffer_no_change(self):
        p = nn.Parameter(np.array([3.0]))
        nn.sgd_step([p], nn.SgdConfig(learning_rate=0.1, momentum=0.5, weight_decay=0.0))
        np.testing.assert_allclose(p.data, [3.0])

    def test_momentum_two_step_displacement(self):
        lr, g = 0.1, 2.0
        p = nn.Parameter(np.array([0.0]))
        for _ in range(2):
            p.grad[:] = g
            nn.sgd_step([p], nn.SgdConfig(learning_rate=lr, momentum=0.9, weight_decay=0.0))
        np.testing.assert_allclose(p.data, [-lr * (g + 1.9 * g)], atol=1e-15)

    def test_weight_decay_pulls_toward_zero(self):
        p = nn.Parameter(np.array([10.0]))
        nn.sgd_step([p], nn.SgdConfig(learning_rate=0.1, momentum=0.0, weight_decay=0.5))
        np.testing.assert_allclose(p.data, [10.0 - 0.1 * 5.0])

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            nn.SgdConfig(learning_rate=0.0)
        with pytest.raises(ConfigError):
            nn.SgdConfig(momentum=1.0)
        with pytest.raises(ConfigError):
            nn.SgdConfig(weight_decay=-1e-3)


class TestNoGrad:
    def test_no_graph_is_built(self):
        with nn.no_grad():
            out = nn.relu(_const([1.0, -1.0]))
        assert out._backward is None and out._parents == ()

    def test_dtype_guard(self):
        with pytest.raises(ConfigError):
            nn.set_default_dtype(np.int32)
