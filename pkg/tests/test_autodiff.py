import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fmresynth import autodiff as ad
from fmresynth.autodiff import AutodiffError, Tensor


class TestGradientChecks:
    @pytest.mark.parametrize("op", ad.OP_KINDS)
    def test_all_ops_match_finite_differences(self, op):
        for seed in range(3):
            err = ad.gradient_check(op, seed=seed)
            assert err < 1e-4, f"{op} seed {seed}: rel err {err}"

    def test_step_bounds_enforced(self):
        with pytest.raises(AutodiffError):
            ad.gradient_check("add", step=1e-2)
        with pytest.raises(AutodiffError):
            ad.gradient_check("add", step=1e-8)

    def test_unknown_op_rejected(self):
        with pytest.raises(AutodiffError):
            ad.gradient_check("softmax")


class TestBackwardContract:
    def test_non_scalar_loss_rejected(self):
        x = ad.parameter(np.ones(3))
        y = ad.mul(x, x)
        with pytest.raises(AutodiffError):
            ad.backward(y)

    def test_double_backward_rejected(self):
        x = ad.parameter(2.0)
        y = ad.mul(x, x)
        ad.backward(y)
        with pytest.raises(AutodiffError):
            ad.backward(y)

    def test_detached_tensor_rejected(self):
        with pytest.raises(AutodiffError):
            ad.backward(ad.constant(1.0))

    def test_grad_accumulates_across_uses(self):
        x = ad.parameter(3.0)
        y = ad.add(ad.mul(x, x), x)  # d/dx (x^2 + x) = 2x + 1
        ad.backward(y)
        assert np.isclose(x.grad, 7.0)

    def test_constants_get_no_grad(self):
        c = ad.constant(np.ones(4))
        x = ad.parameter(np.ones(4))
        ad.backward(ad.reduce_sum(ad.mul(c, x)))
        assert c.grad is None
        assert np.allclose(x.grad, 1.0)

    def test_broadcast_gradients_reduce_correctly(self):
        a = ad.parameter(np.ones((3, 1)))
        b = ad.parameter(np.ones(4))
        ad.backward(ad.reduce_sum(ad.add(a, b)))
        assert a.grad.shape == (3, 1) and np.allclose(a.grad, 4.0)
        assert b.grad.shape == (4,) and np.allclose(b.grad, 3.0)

    def test_incompatible_shapes_rejected(self):
        with pytest.raises(AutodiffError):
            ad.add(ad.constant(np.ones(3)), ad.constant(np.ones(4)))

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3),
           st.floats(0.5, 2), st.floats(0.5, 2))
    def test_backward_is_linear_in_loss_terms(self, xv, yv, a, b):
        # grad of a*f + b*g equals a*grad(f) + b*grad(g)
        def grad_of(coeff_a, coeff_b):
            x = ad.parameter(xv)
            y = ad.parameter(yv)
            loss = ad.add(ad.mul(ad.constant(coeff_a), ad.sin(x)),
                          ad.mul(ad.constant(coeff_b), ad.mul(x, y)))
            ad.backward(loss)
            return x.grad
        combined = grad_of(a, b)
        expected = a * grad_of(1.0, 0.0) + b * grad_of(0.0, 1.0)
        assert np.allclose(combined, expected, atol=1e-12)


class TestOpValues:
    def test_cumulative_sum_matches_numpy(self):
        x = np.arange(12.0).reshape(3, 4)
        assert np.array_equal(ad.cumulative_sum(Tensor(x)).values,
                              np.cumsum(x, axis=-1))

    def test_matmul_matches_numpy(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal((3, 5)), rng.standard_normal((5, 2))
        assert np.allclose(ad.matmul(Tensor(a), Tensor(b)).values, a @ b)

    def test_conv1d_causal(self):
        # output at t must not change when future input changes
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 20))
        w = rng.standard_normal((3, 2, 3))
        base = ad.conv1d_dilated(Tensor(x), Tensor(w), dilation=2).values
        x2 = x.copy()
        x2[:, 10:] += 5.0
        bumped = ad.conv1d_dilated(Tensor(x2), Tensor(w), dilation=2).values
        assert np.allclose(base[:, :10], bumped[:, :10])
        assert base.shape == (3, 20)

    def test_conv1d_matches_direct_sum(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((1, 9))
        w = rng.standard_normal((1, 1, 3))
        d = 2
        out = ad.conv1d_dilated(Tensor(x), Tensor(w), dilation=d).values[0]
        pad = np.concatenate([np.zeros(2 * d), x[0]])
        expected = np.array([
            sum(w[0, 0, k] * pad[t + k * d] for k in range(3))
            for t in range(9)
        ])
        assert np.allclose(out, expected)

    def test_linear_upsample_endpoints_and_length(self):
        x = np.array([1.0, 3.0, 2.0])
        up = ad.linear_upsample(Tensor(x), 4).values
        assert up.shape == (12,)
        assert up[0] == 1.0 and up[4] == 3.0 and up[8] == 2.0
        assert np.isclose(up[2], 2.0)  # midpoint of 1 and 3
        assert np.all(up[8:] == 2.0)   # final frame held

    def test_stft_magnitude_sine_peak(self):
        sr, n = 1024, 256
        t = np.arange(1024) / sr
        x = np.sin(2 * np.pi * 64 * t)  # bin 16 of a 256 window
        mag = ad.stft_magnitude(Tensor(x), n, 64).values
        assert mag.shape == ((1024 - 256) // 64 + 1, 129)
        assert np.all(np.argmax(mag, axis=1) == 16)

    def test_stft_rejects_short_input(self):
        with pytest.raises(AutodiffError):
            ad.stft_magnitude(Tensor(np.zeros(63)), 64, 16)

    def test_fft_convolve_matches_numpy(self):
        rng = np.random.default_rng(3)
        x, h = rng.standard_normal(50), rng.standard_normal(7)
        out = ad.fft_convolve(Tensor(x), Tensor(h)).values
        assert np.allclose(out, np.convolve(x, h)[:50])

    def test_dropout_inference_scale(self):
        x = Tensor(np.ones(10000))
        out = ad.dropout(x, 0.5, np.random.default_rng(0)).values
        # inverted dropout preserves the mean
        assert abs(out.mean() - 1.0) < 0.05
        assert set(np.round(np.unique(out), 6)) == {0.0, 2.0}

    def test_log_rejects_non_positive(self):
        with pytest.raises(AutodiffError):
            ad.log(Tensor(np.array([1.0, 0.0])))

    def test_concat_and_slice_roundtrip(self):
        a = ad.parameter(np.arange(3.0))
        b = ad.parameter(np.arange(4.0))
        joined = ad.concat([a, b])
        ad.backward(ad.reduce_sum(ad.mul(joined, joined)))
        assert np.allclose(a.grad, 2 * a.values)
        assert np.allclose(b.grad, 2 * b.values)
