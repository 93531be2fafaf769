import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from waveverify import nn
from waveverify.errors import DomainError, NumericError, ShapeError
from waveverify.nn.tensor import Parameter


def finite_floats(n, lo=-5.0, hi=5.0):
    return st.lists(st.floats(lo, hi, allow_nan=False), min_size=n, max_size=n)


class TestConv1d:
    def test_identity_kernel(self):
        x = np.linspace(-1, 1, 7).reshape(7, 1)
        y = nn.conv1d(x, np.ones((1, 1, 1)), np.zeros(1), stride=1, padding=nn.VALID)
        np.testing.assert_array_equal(y.values, x)

    def test_strided_length(self):
        x = np.zeros((9, 1))
        y = nn.conv1d(x, np.zeros((3, 1, 2)), np.zeros(2), stride=3, padding=nn.VALID)
        assert y.shape == (3, 2)

    def test_direct_summation_oracle(self):
        # y[t] = sum_k x[t+k] * w[k], frozen from the difference kernel
        x = np.array([1.0, 2, 3, 4, 5, 6]).reshape(6, 1)
        w = np.array([1.0, 0.0, -1.0]).reshape(3, 1, 1)
        y = nn.conv1d(x, w, np.zeros(1), stride=1, padding=nn.VALID)
        np.testing.assert_array_equal(y.values.ravel(), [-2.0, -2.0, -2.0, -2.0])

    def test_same_padding_preserves_length(self):
        x = np.random.default_rng(0).normal(size=(11, 3))
        y = nn.conv1d(x, np.random.default_rng(1).normal(size=(3, 3, 5)), np.zeros(5),
                      stride=1, padding=nn.SAME)
        assert y.shape == (11, 5)

    def test_same_requires_stride_one(self):
        with pytest.raises(DomainError):
            nn.conv1d(np.zeros((5, 1)), np.zeros((3, 1, 1)), np.zeros(1), stride=2, padding=nn.SAME)

    def test_valid_needs_long_enough_input(self):
        with pytest.raises(ShapeError):
            nn.conv1d(np.zeros((2, 1)), np.zeros((3, 1, 1)), np.zeros(1), stride=1, padding=nn.VALID)

    def test_channel_mismatch_lists_shapes(self):
        with pytest.raises(ShapeError) as err:
            nn.conv1d(np.zeros((5, 2)), np.zeros((3, 4, 1)), np.zeros(1))
        assert "(3, 4, 1)" in str(err.value)

    def test_batched_matches_single(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 10, 2))
        w, b = rng.normal(size=(3, 2, 3)), rng.normal(size=3)
        batched = nn.conv1d(x, w, b, stride=2, padding=nn.VALID).values
        for i in range(4):
            single = nn.conv1d(x[i], w, b, stride=2, padding=nn.VALID).values
            np.testing.assert_allclose(batched[i], single, rtol=0, atol=0)


class TestMaxpool:
    def test_example(self):
        x = np.array([1.0, 3, 2, 5, 4, 6]).reshape(6, 1)
        y = nn.maxpool1d(x, pool=3, stride=3)
        np.testing.assert_array_equal(y.values.ravel(), [3.0, 6.0])

    def test_identity(self):
        x = np.random.default_rng(0).normal(size=(5, 2))
        np.testing.assert_array_equal(nn.maxpool1d(x, 1, 1).values, x)

    def test_constant_ties_route_to_first_index(self):
        x = Parameter(np.ones((6, 1)))
        y = nn.maxpool1d(x, pool=3, stride=3)
        nn.tsum(y).backward()
        np.testing.assert_array_equal(x.grad.ravel(), [1, 0, 0, 1, 0, 0])

    def test_pool_larger_than_input(self):
        with pytest.raises(ShapeError):
            nn.maxpool1d(np.zeros((2, 1)), pool=3, stride=1)

    def test_overlapping_windows(self):
        x = np.array([0.0, 2.0, 1.0, 3.0]).reshape(4, 1)
        y = nn.maxpool1d(x, pool=2, stride=1)
        np.testing.assert_array_equal(y.values.ravel(), [2, 2, 3])


class TestActivations:
    def test_lrelu_positive_identity(self):
        x = np.array([0.0, 1.0, 2.5])
        np.testing.assert_array_equal(nn.lrelu(x, 0.3).values, x)

    def test_lrelu_zero_alpha_is_relu(self):
        x = np.array([-2.0, -0.5, 0.5])
        np.testing.assert_array_equal(nn.lrelu(x, 0.0).values, [0, 0, 0.5])

    def test_lrelu_negative_slope(self):
        assert nn.lrelu(np.array([-2.0]), 0.3).values[0] == pytest.approx(-0.6)

    def test_lrelu_alpha_domain(self):
        with pytest.raises(DomainError):
            nn.lrelu(np.zeros(3), alpha=1.0)

    def test_sigmoid_extremes_stable(self):
        v = nn.sigmoid(np.array([-1e6, 0.0, 1e6])).values
        np.testing.assert_allclose(v, [0.0, 0.5, 1.0], atol=1e-12)


class TestDense:
    def test_identity(self):
        x = np.array([1.0, -2.0, 3.0])
        y = nn.dense(x, np.eye(3), np.zeros(3))
        np.testing.assert_array_equal(y.values, x)

    def test_zero_input_gives_bias(self):
        b = np.array([0.5, -1.5])
        y = nn.dense(np.zeros(3), np.zeros((3, 2)), b)
        np.testing.assert_array_equal(y.values, b)

    def test_matrix_product_oracle(self):
        x = np.array([1.0, 2.0, -1.0])
        w = np.array([[1.0, 0.5], [2.0, -1.0], [0.0, 3.0]])
        b = np.array([0.1, 0.2])
        # explicit summation oracle
        expected = [sum(x[i] * w[i, j] for i in range(3)) + b[j] for j in range(2)]
        np.testing.assert_allclose(nn.dense(x, w, b).values, expected, rtol=0, atol=0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nn.dense(np.zeros(3), np.zeros((4, 2)), np.zeros(2))


class TestGru:
    PARAMS_KEYS = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")

    @staticmethod
    def zero_params(d, h):
        shapes = {"w": (d, h), "u": (h, h), "b": (h,)}
        return {
            f"{kind}_{gate}": nn.as_tensor(np.zeros(shapes[kind]))
            for gate in "zrh"
            for kind in ("w", "u", "b")
        }

    def test_zero_params_fixed_point(self):
        p = self.zero_params(2, 3)
        h = nn.gru_step(np.array([1.0, -1.0]), np.zeros(3), p)
        np.testing.assert_array_equal(h.values, np.zeros(3))

    def test_closed_update_gate_keeps_state(self):
        p = self.zero_params(2, 3)
        p["b_z"] = nn.as_tensor(np.full(3, -1e6))
        h_prev = np.array([0.3, -0.7, 0.1])
        h = nn.gru_step(np.array([5.0, 5.0]), h_prev, p)
        np.testing.assert_allclose(h.values, h_prev, atol=1e-12)

    def test_scalar_arithmetic_oracle(self):
        # independent evaluation of the update equations with math.* only
        d = h = 2
        rng = np.random.default_rng(5)
        p = {k: nn.as_tensor(rng.uniform(-0.5, 0.5, s)) for k, s in
             [("w_z", (d, h)), ("u_z", (h, h)), ("b_z", (h,)),
              ("w_r", (d, h)), ("u_r", (h, h)), ("b_r", (h,)),
              ("w_h", (d, h)), ("u_h", (h, h)), ("b_h", (h,))]}
        x = np.array([0.4, -0.3])
        h_prev = np.array([0.2, 0.1])

        def sig(v):
            return 1.0 / (1.0 + math.exp(-v))

        expected = []
        vals = {k: t.values for k, t in p.items()}
        for j in range(h):
            z = sig(sum(x[i] * vals["w_z"][i, j] for i in range(d))
                    + sum(h_prev[i] * vals["u_z"][i, j] for i in range(h)) + vals["b_z"][j])
            r_all = [sig(sum(x[i] * vals["w_r"][i, jj] for i in range(d))
                         + sum(h_prev[i] * vals["u_r"][i, jj] for i in range(h)) + vals["b_r"][jj])
                     for jj in range(h)]
            cand = math.tanh(sum(x[i] * vals["w_h"][i, j] for i in range(d))
                             + sum(r_all[i] * h_prev[i] * vals["u_h"][i, j] for i in range(h))
                             + vals["b_h"][j])
            expected.append((1.0 - z) * h_prev[j] + z * cand)
        got = nn.gru_step(x, h_prev, p)
        np.testing.assert_allclose(got.values, expected, rtol=1e-14)

    def test_sequence_single_step_equals_step(self):
        rng = np.random.default_rng(9)
        p = {k: nn.as_tensor(rng.uniform(-0.5, 0.5, s)) for k, s in
             [("w_z", (2, 3)), ("u_z", (3, 3)), ("b_z", (3,)),
              ("w_r", (2, 3)), ("u_r", (3, 3)), ("b_r", (3,)),
              ("w_h", (2, 3)), ("u_h", (3, 3)), ("b_h", (3,))]}
        x = rng.uniform(-1, 1, (1, 2))
        seq = nn.gru_sequence(x, p)
        step = nn.gru_step(x[0], np.zeros(3), p)
        np.testing.assert_allclose(seq.values, step.values, atol=0)

    def test_sequence_matches_chained_steps(self):
        rng = np.random.default_rng(11)
        p = {k: nn.as_tensor(rng.uniform(-0.5, 0.5, s)) for k, s in
             [("w_z", (2, 3)), ("u_z", (3, 3)), ("b_z", (3,)),
              ("w_r", (2, 3)), ("u_r", (3, 3)), ("b_r", (3,)),
              ("w_h", (2, 3)), ("u_h", (3, 3)), ("b_h", (3,))]}
        x = rng.uniform(-1, 1, (3, 2))
        h = np.zeros(3)
        for t in range(3):
            h = nn.gru_step(x[t], h, p).values
        np.testing.assert_allclose(nn.gru_sequence(x, p).values, h, atol=0)

    def test_empty_sequence_rejected(self):
        p = self.zero_params(2, 3)
        with pytest.raises(DomainError):
            nn.gru_sequence(np.zeros((0, 2)), p)


class TestSoftmax:
    def test_uniform_logits(self):
        p = nn.softmax(np.zeros(5)).values
        np.testing.assert_allclose(p, np.full(5, 0.2), atol=1e-15)

    def test_shift_invariance(self):
        rng = np.random.default_rng(2)
        logits = rng.normal(size=7)
        a = nn.softmax(logits).values
        b = nn.softmax(logits + 123.456).values
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_two_class_value(self):
        # scalar exp oracle: e^2/(e^2+1)
        p = nn.softmax(np.array([2.0, 0.0])).values
        expected = math.exp(2) / (math.exp(2) + 1)
        np.testing.assert_allclose(p, [expected, 1 - expected], rtol=1e-15)

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            nn.softmax(np.array([1.0, np.inf]))

    @given(finite_floats(6, -30, 30))
    def test_sums_to_one(self, logits):
        p = nn.softmax(np.array(logits)).values
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.all(p >= 0)


class TestSoftCrossEntropy:
    def test_matching_one_hot_is_zero(self):
        p = np.array([0.0, 1.0, 0.0])
        assert nn.soft_cross_entropy(p, p).item() == pytest.approx(0.0, abs=1e-9)

    def test_uniform_self_entropy(self):
        p = np.full(8, 1 / 8)
        assert nn.soft_cross_entropy(p, p).item() == pytest.approx(math.log(8), abs=1e-9)

    def test_frozen_example(self):
        # -0.7 ln 0.5 - 0.3 ln 0.5 = ln 2 (epsilon clamp shifts it by ~2e-12)
        val = nn.soft_cross_entropy(np.array([0.7, 0.3]), np.array([0.5, 0.5])).item()
        assert val == pytest.approx(math.log(2), abs=1e-9)

    def test_rejects_non_distribution(self):
        with pytest.raises(DomainError):
            nn.soft_cross_entropy(np.array([0.7, 0.7]), np.array([0.5, 0.5]))
        with pytest.raises(DomainError):
            nn.soft_cross_entropy(np.array([-0.1, 1.1]), np.array([0.5, 0.5]))

    @given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=8))
    def test_floor_is_teacher_entropy(self, raw):
        p = np.array(raw) / np.sum(raw)
        gap = nn.soft_cross_entropy(p, p).item() - float(nn.entropy(p))
        assert 0.0 <= gap < 1e-9


class TestDistances:
    def test_cosine_identical(self):
        a = np.array([0.3, -0.4, 1.0])
        assert nn.cosine_distance(a, a).item() == pytest.approx(0.0, abs=1e-15)

    def test_cosine_orthogonal(self):
        assert nn.cosine_distance(np.array([1.0, 0.0]), np.array([0.0, 2.0])).item() == pytest.approx(1.0)

    def test_cosine_opposite(self):
        a = np.array([0.5, -1.0])
        assert nn.cosine_distance(a, -a).item() == pytest.approx(2.0, abs=1e-12)

    def test_cosine_zero_norm_rejected(self):
        with pytest.raises(DomainError):
            nn.cosine_distance(np.zeros(3), np.ones(3))

    @given(finite_floats(4, -3, 3), finite_floats(4, -3, 3))
    def test_cosine_bounds(self, a, b):
        a, b = np.array(a), np.array(b)
        if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
            return
        d = nn.cosine_distance(a, b).item()
        assert -1e-12 <= d <= 2.0 + 1e-12

    @given(finite_floats(4, -3, 3), st.floats(0.01, 50.0))
    def test_cosine_scale_invariant(self, a, c):
        a = np.array(a)
        if np.linalg.norm(a) == 0:
            return
        assert nn.cosine_distance(a, c * a).item() == pytest.approx(0.0, abs=1e-9)

    def test_mse_examples(self):
        assert nn.mse(np.array([1.0, 1.0]), np.array([0.0, 0.0])).item() == pytest.approx(1.0)
        assert nn.mse(np.array([3.0, -1.0]), np.array([1.0, 1.0])).item() == pytest.approx(4.0)
        a = np.array([0.1, 0.2])
        assert nn.mse(a, a).item() == 0.0

    def test_mse_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nn.mse(np.zeros(3), np.zeros(4))


class TestBackwardContracts:
    def test_sum_gradient_is_ones(self):
        w = Parameter(np.random.default_rng(0).normal(size=(3, 4)))
        nn.tsum(w).backward()
        np.testing.assert_array_equal(w.grad, np.ones((3, 4)))

    def test_frozen_parameter_untouched(self):
        w = Parameter(np.ones(3), trainable=False)
        v = Parameter(np.ones(3))
        nn.tsum(nn.mul(w, v)).backward()
        np.testing.assert_array_equal(w.grad, np.zeros(3))
        np.testing.assert_array_equal(v.grad, np.ones(3))

    def test_gradients_accumulate_across_backwards(self):
        w = Parameter(np.array([2.0]))
        nn.tsum(w).backward()
        nn.tsum(w).backward()
        np.testing.assert_array_equal(w.grad, [2.0])

    def test_no_grad_blocks_tape(self):
        w = Parameter(np.ones(3))
        with nn.no_grad():
            y = nn.tsum(nn.mul(w, 2.0))
        assert not y.requires_grad

    def test_backward_requires_scalar(self):
        w = Parameter(np.ones(3))
        with pytest.raises(ShapeError):
            nn.mul(w, 1.0).backward()

    def test_shared_subgraph_grads_add(self):
        w = Parameter(np.array([3.0]))
        y = nn.add(nn.mul(w, w), w)  # w^2 + w -> dy/dw = 2w + 1
        nn.tsum(y).backward()
        np.testing.assert_allclose(w.grad, [7.0])


class TestFiniteDifference:
    def test_quadratic(self):
        store = nn.ParamStore()
        store.add("theta", np.array([3.0]))
        grads = nn.finite_difference_grad(lambda s: float(s["theta"].values[0] ** 2), store)
        assert grads["theta"][0] == pytest.approx(6.0, abs=1e-8)

    def test_sine_at_zero(self):
        store = nn.ParamStore()
        store.add("theta", np.array([0.0]))
        grads = nn.finite_difference_grad(lambda s: math.sin(s["theta"].values[0]), store)
        assert grads["theta"][0] == pytest.approx(1.0, abs=1e-9)

    def test_composite_stack_matches_backward(self):
        # conv -> lrelu -> dense -> softmax -> cross entropy
        rng = np.random.default_rng(21)
        store = nn.ParamStore()
        store.add("x", rng.uniform(-1, 1, (6, 2)))
        store.add("w", rng.uniform(-1, 1, (3, 2, 2)))
        store.add("b", rng.uniform(-0.2, 0.2, 2))
        store.add("wd", rng.uniform(-1, 1, (8, 5)))
        store.add("bd", rng.uniform(-0.2, 0.2, 5))
        target = stream_target = np.array([0.1, 0.2, 0.3, 0.25, 0.15])

        def forward(s):
            h = nn.conv1d(s["x"], s["w"], s["b"], stride=1, padding=nn.VALID)
            h = nn.lrelu(h, 0.3)
            h = nn.reshape(h, (8,))
            h = nn.dense(h, s["wd"], s["bd"])
            return nn.soft_cross_entropy(stream_target, nn.softmax(h))

        assert nn.compare_grads(forward, store) < 1e-4


class TestSgdMomentum:
    def test_plain_sgd_when_momentum_zero(self):
        store = nn.ParamStore()
        p = store.add("w", np.array([1.0]))
        p.grad[...] = 2.0
        nn.sgd_momentum_step(store, lr=0.1, momentum=0.0)
        np.testing.assert_allclose(p.values, [0.8])

    def test_zero_gradient_no_change(self):
        store = nn.ParamStore()
        p = store.add("w", np.array([1.0, -1.0]))
        nn.sgd_momentum_step(store, lr=0.1, momentum=0.9)
        np.testing.assert_array_equal(p.values, [1.0, -1.0])

    def test_two_step_recurrence(self):
        # frozen hand recurrence: v=-0.1 then -0.19; theta=-0.1 then -0.29
        store = nn.ParamStore()
        p = store.add("w", np.array([0.0]))
        p.grad[...] = 1.0
        nn.sgd_momentum_step(store, lr=0.1, momentum=0.9)
        np.testing.assert_allclose(p.values, [-0.1], atol=1e-15)
        np.testing.assert_allclose(p.velocity, [-0.1], atol=1e-15)
        p.grad[...] = 1.0
        nn.sgd_momentum_step(store, lr=0.1, momentum=0.9)
        np.testing.assert_allclose(p.values, [-0.29], atol=1e-15)
        np.testing.assert_allclose(p.velocity, [-0.19], atol=1e-15)

    def test_gradients_zeroed_after_step(self):
        store = nn.ParamStore()
        p = store.add("w", np.array([1.0]))
        p.grad[...] = 5.0
        nn.sgd_momentum_step(store, lr=0.1, momentum=0.5)
        np.testing.assert_array_equal(p.grad, [0.0])

    def test_frozen_params_skipped(self):
        store = nn.ParamStore()
        p = store.add("w", np.array([1.0]))
        p.grad[...] = 5.0
        store.freeze()
        nn.sgd_momentum_step(store, lr=0.1, momentum=0.5)
        np.testing.assert_array_equal(p.values, [1.0])


class TestParamStore:
    def test_sorted_iteration(self):
        store = nn.ParamStore()
        for name in ("zeta", "alpha", "mid"):
            store.add(name, np.zeros(1))
        assert [n for n, _ in store.items()] == ["alpha", "mid", "zeta"]

    def test_copy_is_deep_and_trainable(self):
        store = nn.ParamStore()
        store.add("w", np.array([1.0]))
        store.freeze()
        dup = store.copy()
        assert not dup.frozen and dup["w"].trainable
        dup["w"].values[...] = 9.0
        assert store["w"].values[0] == 1.0

    def test_state_hash_tracks_values(self):
        store = nn.ParamStore()
        store.add("w", np.array([1.0]))
        h0 = store.state_hash()
        store["w"].values[...] = 2.0
        assert store.state_hash() != h0

    def test_duplicate_name_rejected(self):
        store = nn.ParamStore()
        store.add("w", np.zeros(1))
        with pytest.raises(ShapeError):
            store.add("w", np.zeros(1))
