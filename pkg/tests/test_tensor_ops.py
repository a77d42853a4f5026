"""Layer ops against the naive oracles in oracles.py.

The oracles were written first; every derived expectation here is computed
by them at test time, never copied from the implementation.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percival.nn import Tensor, ops
from percival.nn.spec import ConvSpec, FireSpec, SpecError

import oracles


def conv_spec(w, b, stride=1, padding=0):
    w = np.asarray(w, dtype=np.float32)
    return ConvSpec(
        in_channels=w.shape[1], out_channels=w.shape[0],
        kernel=(w.shape[2], w.shape[3]), stride=stride, padding=padding,
        weights=w, bias=np.asarray(b, dtype=np.float32),
    )


class TestTensor:
    def test_flat_data_matches_product_of_dims(self):
        t = Tensor(np.arange(24, dtype=np.float32).reshape(2, 3, 4))
        assert t.dims == (2, 3, 4)
        assert len(t.data) == 24

    def test_rank_bounds(self):
        with pytest.raises(ValueError):
            Tensor(np.zeros((1, 1, 1, 1), dtype=np.float32))
        with pytest.raises(ValueError):
            Tensor(np.float32(3.0))

    def test_row_major_width_fastest(self):
        t = Tensor([[[1, 2], [3, 4]]])
        assert list(t.data) == [1, 2, 3, 4]


class TestConv2d:
    def test_1x1_identity(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.random((1, 5, 5), dtype=np.float32))
        spec = conv_spec(np.ones((1, 1, 1, 1)), [0.0])
        out = ops.conv2d(x, spec)
        np.testing.assert_array_equal(out.array, x.array)

    def test_zero_weights_constant_bias(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.random((3, 6, 6), dtype=np.float32))
        spec = conv_spec(np.zeros((2, 3, 3, 3)), [1.5, -2.0])
        out = ops.conv2d(x, spec)
        assert out.dims == (2, 4, 4)
        np.testing.assert_array_equal(out.array[0], np.full((4, 4), 1.5, np.float32))
        np.testing.assert_array_equal(out.array[1], np.full((4, 4), -2.0, np.float32))

    def test_random_1x4x4_vs_scalar_loop_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.random((1, 4, 4), dtype=np.float32)
        w = np.array([[[[0.5, -1.0, 0.25], [2.0, 0.0, -0.5], [1.0, 1.0, -1.0]]]],
                     dtype=np.float32)
        b = np.array([0.1], dtype=np.float32)
        got = ops.conv2d(Tensor(x), conv_spec(w, b)).array
        want = oracles.naive_conv2d_scalar(x, w, b, stride=1, padding=0)
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-6)

    def test_oracle_agreement_many_instances(self):
        """>=100 seeded random small instances vs the window-scan oracle."""
        rng = np.random.default_rng(42)
        for i in range(110):
            ic = int(rng.integers(1, 5))
            oc = int(rng.integers(1, 5))
            k = int(rng.integers(1, 4))
            stride = int(rng.integers(1, 3))
            padding = int(rng.integers(0, 2))
            h = int(rng.integers(max(1, k - 2 * padding), 9))
            w_ = int(rng.integers(max(1, k - 2 * padding), 9))
            if h + 2 * padding < k or w_ + 2 * padding < k:
                continue
            x = (rng.random((ic, h, w_), dtype=np.float32) - 0.5) * 2
            w = (rng.random((oc, ic, k, k), dtype=np.float32) - 0.5) * 2
            b = (rng.random(oc, dtype=np.float32) - 0.5) * 2
            got = ops.conv2d(Tensor(x), conv_spec(w, b, stride, padding)).array
            want = oracles.naive_conv2d(x, w, b, stride, padding)
            np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-6,
                                       err_msg=f"instance {i}")
            if i < 20:
                scalar = oracles.naive_conv2d_scalar(x, w, b, stride, padding)
                np.testing.assert_allclose(want, scalar, rtol=1e-6, atol=1e-7)

    def test_channel_mismatch_names_layer_and_dims(self):
        x = Tensor(np.zeros((3, 5, 5), np.float32))
        spec = conv_spec(np.zeros((1, 2, 1, 1)), [0.0])
        with pytest.raises(ops.ShapeError, match=r"entry_conv.*2 input channels.*got 3"):
            ops.conv2d(x, spec, label="entry_conv")

    def test_input_smaller_than_kernel(self):
        x = Tensor(np.zeros((1, 2, 2), np.float32))
        spec = conv_spec(np.zeros((1, 1, 3, 3)), [0.0])
        with pytest.raises(ops.ShapeError, match="smaller"):
            ops.conv2d(x, spec)
        # padding can make the same input legal
        ok = ops.conv2d(x, conv_spec(np.zeros((1, 1, 3, 3)), [0.0], padding=1))
        assert ok.dims == (1, 2, 2)

    def test_output_shape_formula(self):
        x = Tensor(np.zeros((2, 11, 13), np.float32))
        spec = conv_spec(np.zeros((4, 2, 3, 3)), np.zeros(4), stride=2, padding=1)
        out = ops.conv2d(x, spec)
        assert out.dims == (4, (11 + 2 - 3) // 2 + 1, (13 + 2 - 3) // 2 + 1)


class TestRelu:
    def test_basic(self):
        t = ops.relu(Tensor([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(t.array, [0.0, 0.0, 2.0])

    def test_all_negative(self):
        t = ops.relu(Tensor(np.full((2, 3, 3), -4.0, np.float32)))
        assert not t.array.any()

    @settings(deadline=None, max_examples=50)
    @given(st.lists(st.floats(-1e6, 1e6, width=32), min_size=1, max_size=64))
    def test_idempotent(self, values):
        once = ops.relu(Tensor(values))
        twice = ops.relu(once)
        np.testing.assert_array_equal(once.array, twice.array)


class TestMaxPool:
    def test_constant_input(self):
        t = ops.maxpool2d(Tensor(np.full((2, 6, 6), 7.0, np.float32)), 3, 2)
        assert t.dims == (2, 2, 2)
        assert (t.array == 7.0).all()

    def test_single_window(self):
        t = ops.maxpool2d(Tensor([[[1.0, 2.0], [3.0, 4.0]]]), 2, 2)
        np.testing.assert_array_equal(t.array, [[[4.0]]])

    def test_random_3x9x9_vs_oracle(self):
        rng = np.random.default_rng(5)
        x = rng.random((3, 9, 9), dtype=np.float32)
        got = ops.maxpool2d(Tensor(x), 3, 2).array
        want = oracles.naive_maxpool2d(x, 3, 2)
        np.testing.assert_array_equal(got, want)

    def test_oracle_agreement_many_instances(self):
        rng = np.random.default_rng(43)
        for i in range(110):
            c = int(rng.integers(1, 4))
            k = int(rng.integers(1, 4))
            stride = int(rng.integers(1, 4))
            h = int(rng.integers(k, 10))
            w = int(rng.integers(k, 10))
            x = (rng.random((c, h, w), dtype=np.float32) - 0.5) * 10
            got = ops.maxpool2d(Tensor(x), k, stride).array
            want = oracles.naive_maxpool2d(x, k, stride)
            np.testing.assert_array_equal(got, want, err_msg=f"instance {i}")

    def test_overrunning_windows_dropped(self):
        # H=5, k=2, stride=2 -> positions 0 and 2 only; row 4 unreachable
        x = np.zeros((1, 5, 5), np.float32)
        x[0, 4, :] = 99.0
        out = ops.maxpool2d(Tensor(x), 2, 2)
        assert out.dims == (1, 2, 2)
        assert (out.array < 99.0).all()

    def test_bad_k_or_stride(self):
        t = Tensor(np.zeros((1, 4, 4), np.float32))
        with pytest.raises(ValueError):
            ops.maxpool2d(t, 0, 1)
        with pytest.raises(ValueError):
            ops.maxpool2d(t, 2, 0)


class TestGlobalAvgPool:
    def test_constant_channel(self):
        t = ops.global_avgpool(Tensor(np.full((3, 4, 5), 2.5, np.float32)))
        np.testing.assert_allclose(t.array, [2.5, 2.5, 2.5], rtol=0, atol=0)

    def test_small_exact(self):
        t = ops.global_avgpool(Tensor([[[1.0, 3.0], [5.0, 7.0]]]))
        np.testing.assert_allclose(t.array, [4.0])

    def test_oracle_agreement_many_instances(self):
        rng = np.random.default_rng(44)
        for i in range(110):
            c = int(rng.integers(1, 5))
            h = int(rng.integers(1, 9))
            w = int(rng.integers(1, 9))
            x = (rng.random((c, h, w), dtype=np.float32) - 0.5) * 100
            got = ops.global_avgpool(Tensor(x)).array
            want = oracles.naive_global_avgpool(x)
            np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-6,
                                       err_msg=f"instance {i}")


class TestChannelConcat:
    def test_concat_empty_is_identity(self):
        rng = np.random.default_rng(6)
        x = Tensor(rng.random((3, 4, 4), dtype=np.float32))
        empty = Tensor(np.zeros((0, 4, 4), np.float32))
        out = ops.channel_concat(x, empty)
        np.testing.assert_array_equal(out.array, x.array)

    def test_shapes(self):
        a = Tensor(np.zeros((16, 5, 5), np.float32))
        b = Tensor(np.zeros((48, 5, 5), np.float32))
        assert ops.channel_concat(a, b).dims == (64, 5, 5)

    def test_spatial_mismatch(self):
        a = Tensor(np.zeros((1, 4, 4), np.float32))
        b = Tensor(np.zeros((1, 5, 4), np.float32))
        with pytest.raises(ops.ShapeError):
            ops.channel_concat(a, b)

    @settings(deadline=None, max_examples=30)
    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 3), st.integers(42, 60))
    def test_b_channels_land_after_a(self, ca, cb, i, seed):
        rng = np.random.default_rng(seed)
        a = rng.random((ca, 3, 3), dtype=np.float32)
        b = rng.random((cb, 3, 3), dtype=np.float32)
        out = ops.channel_concat(Tensor(a), Tensor(b)).array
        np.testing.assert_array_equal(out[ca + (i % cb)], b[i % cb])


class TestSoftmax:
    def test_symmetry(self):
        out = ops.softmax(Tensor([0.0, 0.0]))
        np.testing.assert_allclose(out.array, [0.5, 0.5], atol=1e-7)

    def test_extreme_logit_no_overflow(self):
        out = ops.softmax(Tensor([1000.0, 0.0])).array
        assert np.isfinite(out).all()
        assert out[0] > 0.999
        assert out[1] < 1e-6

    def test_matches_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            logits = (rng.random(int(rng.integers(1, 8))) - 0.5) * 20
            got = ops.softmax(Tensor(logits.astype(np.float32))).array
            want = oracles.naive_softmax(logits.astype(np.float32))
            np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-7)

    @settings(deadline=None, max_examples=60)
    @given(
        st.lists(st.floats(-100, 100), min_size=2, max_size=8),
        st.floats(-50, 50),
    )
    def test_shift_invariance(self, logits, shift):
        a = ops.softmax(Tensor(np.array(logits, np.float32))).array
        b = ops.softmax(Tensor(np.array(logits, np.float32) + np.float32(shift))).array
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_sums_to_one_with_extreme_magnitudes(self):
        rng = np.random.default_rng(8)
        for i in range(1000):
            n = int(rng.integers(1, 6))
            scale = 1e4 if i % 5 == 0 else 10.0
            logits = ((rng.random(n) - 0.5) * 2 * scale).astype(np.float32)
            out = ops.softmax(Tensor(logits)).array
            assert np.isfinite(out).all()
            assert abs(float(out.sum()) - 1.0) <= 1e-6
            assert (out >= 0).all()


class TestFire:
    @staticmethod
    def random_fire(rng, in_c, sq, ex):
        def cs(o, i, k, pad=0):
            return conv_spec((rng.random((o, i, k, k), dtype=np.float32) - 0.5),
                             (rng.random(o, dtype=np.float32) - 0.5), padding=pad)
        return FireSpec(squeeze=cs(sq, in_c, 1), expand1=cs(ex, sq, 1),
                        expand3=cs(ex, sq, 3, pad=1))

    def test_zero_fire_outputs_zeros(self):
        spec = FireSpec(
            squeeze=ConvSpec(8, 2, (1, 1)),
            expand1=ConvSpec(2, 4, (1, 1)),
            expand3=ConvSpec(2, 4, (3, 3), padding=1),
        )
        out = ops.fire_forward(Tensor(np.random.default_rng(9).random((8, 6, 6), dtype=np.float32)), spec)
        assert out.dims == (8, 6, 6)
        assert not out.array.any()

    def test_channel_count_and_spatial_preserved(self):
        rng = np.random.default_rng(10)
        spec = self.random_fire(rng, 8, 2, 4)
        out = ops.fire_forward(Tensor(rng.random((8, 6, 6), dtype=np.float32)), spec)
        assert out.dims == (4 + 4, 6, 6)

    def test_matches_oracle_composition(self):
        rng = np.random.default_rng(11)
        for i in range(100):
            in_c = int(rng.integers(1, 9))
            sq = int(rng.integers(1, 5))
            ex = int(rng.integers(1, 6))
            h = int(rng.integers(3, 8))
            spec = self.random_fire(rng, in_c, sq, ex)
            x = (rng.random((in_c, h, h), dtype=np.float32) - 0.5) * 2
            got = ops.fire_forward(Tensor(x), spec).array
            want = oracles.naive_fire(
                x,
                spec.squeeze.weights, spec.squeeze.bias,
                spec.expand1.weights, spec.expand1.bias,
                spec.expand3.weights, spec.expand3.bias,
            )
            np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-6,
                                       err_msg=f"instance {i}")

    def test_bad_expand3_rejected_at_construction(self):
        with pytest.raises(SpecError):
            FireSpec(
                squeeze=ConvSpec(8, 2, (1, 1)),
                expand1=ConvSpec(2, 4, (1, 1)),
                expand3=ConvSpec(2, 4, (3, 3), padding=0),
            )
