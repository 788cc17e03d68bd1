"""Unit tests for the reverse-mode differentiation engine and Adam."""

import numpy as np
import pytest

from fuzzformer import autodiff as ad
from fuzzformer.autodiff import Adam, Tensor, backward, forward_eval, parameter
from fuzzformer.exceptions import NonFiniteError, PositiveDefinitenessError, ShapeError

from gradcheck import check_gradients, max_rel_err


class TestForward:
    def test_identity_matmul(self):
        v = Tensor([[3.0], [4.0]])
        out = ad.matmul(np.eye(2), v)
        assert np.array_equal(forward_eval(out), [[3.0], [4.0]])

    def test_softmax_uniform(self):
        out = ad.softmax(Tensor([0.0, 0.0, 0.0]))
        np.testing.assert_allclose(out.data, [1 / 3] * 3, atol=1e-15)

    def test_zero_fixed_point(self):
        out = ad.tanh(ad.mul(ad.sigmoid(Tensor(0.0)), Tensor(0.0)))
        assert forward_eval(out) == 0.0

    def test_forward_determinism_bit_identical(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(4, 5))
        w = rng.normal(size=(5, 3))

        def run():
            t = ad.softmax(ad.matmul(Tensor(x), ad.tanh(Tensor(w))))
            return forward_eval(t).copy()

        a, b = run(), run()
        assert np.array_equal(a, b)

    def test_shape_mismatch_names_operation(self):
        with pytest.raises(ShapeError, match="matmul"):
            ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))
        with pytest.raises(ShapeError, match="add"):
            ad.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))

    def test_non_finite_detection(self):
        with pytest.raises(NonFiniteError, match="exp"):
            ad.exp(Tensor([1000.0]))
        with pytest.raises(NonFiniteError, match="log"):
            ad.log(Tensor([-1.0]))


class TestBackward:
    def test_quadratic_gradient(self):
        x = parameter([1.0, 2.0, 3.0])
        out = ad.tsum(ad.mul(x, x))
        backward(out)
        np.testing.assert_allclose(x.grad, [2.0, 4.0, 6.0])

    def test_softmax_sum_is_constant(self):
        x = parameter([0.3, -1.2, 2.0, 0.0])
        out = ad.tsum(ad.softmax(x))
        backward(out)
        np.testing.assert_allclose(x.grad, 0.0, atol=1e-12)

    def test_random_small_graph_matches_finite_difference(self):
        rng = np.random.default_rng(11)
        a = parameter(rng.normal(size=(3, 4)))
        b = parameter(rng.normal(size=(4, 2)))

        def build():
            h = ad.tanh(ad.matmul(a, b))
            s = ad.softmax(h, axis=1)
            return ad.tsum(ad.mul(s, h))

        check_gradients(build, [a, b], h=1e-5, tol=1e-4)

    def test_fanout_accumulates(self):
        x = parameter([2.0])
        y = ad.add(ad.mul(x, x), ad.mul(Tensor(3.0), x))  # x^2 + 3x
        backward(ad.tsum(y))
        np.testing.assert_allclose(x.grad, [7.0])

    def test_unused_leaf_has_zero_gradient(self):
        x = parameter([1.0, 2.0])
        unused = parameter([5.0])
        backward(ad.tsum(ad.mul(x, x)))
        assert np.array_equal(unused.gradient, [0.0])

    def test_backward_requires_scalar_root(self):
        x = parameter([1.0, 2.0])
        with pytest.raises(ShapeError, match="scalar"):
            backward(ad.mul(x, x))

    def test_no_grad_blocks_recording(self):
        x = parameter([1.0, 2.0])
        with ad.no_grad():
            out = ad.mul(x, x)
        assert not out.requires_grad and out._parents == ()


def _rand(rng, *shape):
    return rng.normal(size=shape)


PRIMITIVES = {
    "matmul": lambda a, b: ad.matmul(a, b),
    "add": lambda a, b: ad.add(a, b),
    "multiply": lambda a, b: ad.mul(a, b),
    "subtract": lambda a, b: ad.sub(a, b),
    "divide": lambda a, b: ad.div(a, b),
}

UNARY = {
    "sigmoid": ad.sigmoid,
    "tanh": ad.tanh,
    "softmax": lambda t: ad.softmax(t, axis=-1),
    "exponential": ad.exp,
    "sum": lambda t: ad.tsum(t, axis=0),
    "mean": lambda t: ad.tmean(t, axis=1),
    "slice": lambda t: t[1:3, :2],
    "swapaxes": lambda t: ad.swapaxes(t, 0, 1),
    "reshape": lambda t: ad.reshape(t, (-1,)),
    "neg": ad.neg,
    "clip_min": lambda t: ad.clip_min(t, 0.1),
}


class TestPrimitiveGradients:
    @pytest.mark.parametrize("name", sorted(PRIMITIVES))
    def test_binary_op(self, name):
        rng = np.random.default_rng(hash(name) % 2**32)
        if name == "matmul":
            a = parameter(_rand(rng, 3, 4))
            b = parameter(_rand(rng, 4, 2))
        else:
            a = parameter(_rand(rng, 3, 4))
            b = parameter(_rand(rng, 3, 4) + 3.0)  # keep divisor away from 0
        op = PRIMITIVES[name]
        check_gradients(lambda: ad.tsum(ad.tanh(op(a, b))), [a, b])

    @pytest.mark.parametrize("name", sorted(UNARY))
    def test_unary_op(self, name):
        rng = np.random.default_rng(hash(name) % 2**32)
        x = parameter(_rand(rng, 4, 3) + 0.5)
        op = UNARY[name]
        check_gradients(lambda: ad.tsum(ad.mul(op(x), op(x))), [x])

    def test_logarithm(self):
        rng = np.random.default_rng(5)
        x = parameter(np.abs(_rand(rng, 4, 3)) + 0.5)
        check_gradients(lambda: ad.tsum(ad.log(x)), [x])

    def test_concatenate(self):
        rng = np.random.default_rng(6)
        a = parameter(_rand(rng, 2, 3))
        b = parameter(_rand(rng, 4, 3))
        check_gradients(lambda: ad.tsum(ad.tanh(ad.concat([a, b], axis=0))), [a, b])

    def test_stack(self):
        rng = np.random.default_rng(8)
        a = parameter(_rand(rng, 3))
        b = parameter(_rand(rng, 3))
        check_gradients(lambda: ad.tsum(ad.mul(ad.stack([a, b], axis=1), 2.0)), [a, b])

    def test_gather_with_repeats(self):
        rng = np.random.default_rng(9)
        x = parameter(_rand(rng, 5, 2))
        idx = np.array([0, 3, 3, 1])
        check_gradients(lambda: ad.tsum(ad.mul(x[idx], x[idx])), [x])

    def test_broadcast_binary(self):
        rng = np.random.default_rng(10)
        a = parameter(_rand(rng, 4, 1, 3))
        b = parameter(_rand(rng, 5, 1))
        check_gradients(lambda: ad.tsum(ad.tanh(ad.mul(a, b))), [a, b])

    def test_batched_matmul_broadcast(self):
        rng = np.random.default_rng(12)
        a = parameter(_rand(rng, 6, 3, 4))
        b = parameter(_rand(rng, 4, 2))
        check_gradients(lambda: ad.tsum(ad.tanh(ad.matmul(a, b))), [a, b])

    def test_solve_vec(self):
        rng = np.random.default_rng(13)
        m = _rand(rng, 3, 3)
        a = parameter(m @ m.T + 3.0 * np.eye(3))
        b = parameter(_rand(rng, 3))
        check_gradients(lambda: ad.tsum(ad.mul(ad.solve_vec(a, b), b)), [a, b])

    def test_solve_vec_batched_broadcast(self):
        rng = np.random.default_rng(14)
        mats = _rand(rng, 4, 2, 2)
        spd = np.einsum("cij,ckj->cik", mats, mats) + 2.0 * np.eye(2)
        a = parameter(spd)
        b = parameter(_rand(rng, 5, 4, 2))
        check_gradients(
            lambda: ad.tsum(ad.tanh(ad.solve_vec(a, b))), [a, b], max_coords=8,
            rng=np.random.default_rng(0),
        )

    def test_logdet(self):
        rng = np.random.default_rng(15)
        mats = _rand(rng, 3, 2, 2)
        spd = np.einsum("cij,ckj->cik", mats, mats) + 2.0 * np.eye(2)
        a = parameter(spd)
        check_gradients(lambda: ad.tsum(ad.logdet(a)), [a])

    def test_logdet_rejects_indefinite(self):
        with pytest.raises(PositiveDefinitenessError):
            ad.logdet(Tensor([[-1.0, 0.0], [0.0, 1.0]]))


class TestDropout:
    def test_eval_mode_identity(self):
        x = parameter([1.0, 2.0])
        assert ad.dropout(x, 0.5, None, training=False) is x

    def test_rate_one_zeroes(self):
        x = parameter([1.0, 2.0])
        out = ad.dropout(x, 1.0, np.random.default_rng(0), training=True)
        assert np.array_equal(out.data, [0.0, 0.0])

    def test_inverted_scaling_preserves_mean(self):
        rng = np.random.default_rng(0)
        x = Tensor(np.ones(200_00))
        out = ad.dropout(x, 0.25, rng, training=True)
        assert abs(out.data.mean() - 1.0) < 0.02


class TestAdam:
    def test_zero_gradient_leaves_parameter_unchanged(self):
        p = parameter([1.0, -2.0])
        opt = Adam([p])
        p.grad = np.zeros(2)
        opt.step()
        np.testing.assert_allclose(p.data, [1.0, -2.0])
        assert opt.step_count == 1

    def test_first_step_bias_corrected_value(self):
        p = parameter([0.0])
        opt = Adam([p], learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8)
        p.grad = np.array([1.0])
        opt.step()
        # m_hat = 1, v_hat = 1 -> delta = -lr / (1 + eps)
        assert abs(p.data[0] + 1e-3) < 1e-9

    def test_identical_params_get_identical_updates(self):
        rng = np.random.default_rng(3)
        vals = rng.normal(size=4)
        g = rng.normal(size=4)
        p1, p2 = parameter(vals.copy()), parameter(vals.copy())
        opt = Adam([p1, p2], learning_rate=0.01)
        for _ in range(5):
            p1.grad, p2.grad = g.copy(), g.copy()
            opt.step()
        assert np.array_equal(p1.data, p2.data)

    def test_moments_zero_initialized_and_grads_cleared(self):
        p = parameter([1.0])
        opt = Adam([p])
        assert opt.step_count == 0
        assert np.array_equal(opt.first_moment[0], [0.0])
        assert np.array_equal(opt.second_moment[0], [0.0])
        p.grad = np.array([0.5])
        opt.step()
        assert p.grad is None


class TestGradcheckOracle:
    def test_oracle_catches_a_wrong_gradient(self):
        # A deliberately broken derivative must fail the FD comparison.
        x = parameter([0.7])

        def build():
            out = ad.tanh(x)
            # sabotage: double the recorded backward
            orig = out._backward

            def bad():
                orig()
                x.grad *= 2.0

            out._backward = bad
            return ad.tsum(out)

        with pytest.raises(AssertionError):
            check_gradients(build, [x])

    def test_rel_err_helper(self):
        assert max_rel_err(np.array([1.0]), np.array([1.0])) == 0.0
        assert max_rel_err(np.array([0.0]), np.array([0.0])) == 0.0
