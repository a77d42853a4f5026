"""Decode / bypass / preprocess / classify behavior, with the bilinear
resample checked against the hand-computed grid and the naive oracle.
"""

import numpy as np
import pytest

from percival import classifier
from percival.nn.backend import kernels
from percival.nn.spec import reference_architecture, seeded_random_parameters

import imagegen
import oracles


class TestDecode:
    def test_one_pixel_red_png(self):
        bitmap = classifier.decode_image(imagegen.solid_png(1, 1, (255, 0, 0, 255)))
        assert (bitmap.width, bitmap.height) == (1, 1)
        np.testing.assert_array_equal(bitmap.pixels[0, 0], [255, 0, 0, 255])

    def test_corrupt_header_is_decode_error(self):
        with pytest.raises(classifier.CorruptImageError):
            classifier.decode_image(imagegen.corrupt_png())

    def test_truncated_stream_is_decode_error(self):
        with pytest.raises(classifier.CorruptImageError):
            classifier.decode_image(imagegen.truncated_png())

    def test_unknown_signature_is_unsupported(self):
        with pytest.raises(classifier.UnsupportedFormatError):
            classifier.decode_image(b"not an image at all")

    def test_webp_is_unsupported_not_corrupt(self):
        with pytest.raises(classifier.UnsupportedFormatError):
            classifier.decode_image(imagegen.webp_header_blob())

    def test_errors_share_a_base_class(self):
        assert issubclass(classifier.UnsupportedFormatError, classifier.DecodeError)
        assert issubclass(classifier.CorruptImageError, classifier.DecodeError)

    def test_constant_gray_jpeg_within_tolerance(self):
        data = imagegen.gray_jpeg(32, 24, value=128)
        bitmap = classifier.decode_image(data)
        assert (bitmap.width, bitmap.height) == (32, 24)
        rgb = bitmap.pixels[..., :3].astype(np.int16)
        assert np.abs(rgb - 128).max() <= 2
        assert (bitmap.pixels[..., 3] == 255).all()

    def test_jpeg_alpha_filled_opaque(self):
        bitmap = classifier.decode_image(imagegen.gray_jpeg(8, 8))
        assert (bitmap.pixels[..., 3] == 255).all()

    def test_gif_first_frame(self):
        bitmap = classifier.decode_image(imagegen.solid_gif(10, 6, (0, 128, 255)))
        assert (bitmap.width, bitmap.height) == (10, 6)
        np.testing.assert_array_equal(bitmap.pixels[0, 0], [0, 128, 255, 255])

    def test_hint_rescues_signatureless_stream_as_corrupt(self):
        # hints select the decoder; a broken stream is then "corrupt"
        with pytest.raises(classifier.CorruptImageError):
            classifier.decode_image(b"\x00\x01\x02\x03", hinted_format="image/png")

    def test_hint_for_unsupported_format(self):
        with pytest.raises(classifier.UnsupportedFormatError):
            classifier.decode_image(b"\x00\x01\x02\x03", hinted_format="image/webp")


class TestBypass:
    @pytest.mark.parametrize(
        "dims,expected",
        [((99, 500), True), ((500, 99), True), ((100, 100), False),
         ((1, 1), True), ((100, 99), True), ((101, 101), False)],
    )
    def test_threshold(self, dims, expected):
        assert classifier.should_bypass(*dims) is expected


class TestBitmap:
    def test_buffer_length_enforced(self):
        with pytest.raises(ValueError):
            classifier.Bitmap(4, 4, np.zeros((4, 3, 4), np.uint8))

    def test_positive_dims(self):
        with pytest.raises(ValueError):
            classifier.Bitmap(0, 4, np.zeros((4, 0, 4), np.uint8))


class TestPreprocess:
    def test_constant_color_any_size(self):
        for w, h in ((13, 7), (224, 224), (300, 250)):
            pixels = np.empty((h, w, 4), np.uint8)
            pixels[:] = (200, 100, 50, 255)
            t = classifier.preprocess(classifier.Bitmap(w, h, pixels))
            assert t.dims == (4, 224, 224)
            for ch, val in enumerate((200, 100, 50, 255)):
                np.testing.assert_allclose(
                    t.array[ch], np.full((224, 224), val / 255, np.float32),
                    rtol=0, atol=1e-6,
                )

    def test_identity_at_224(self):
        rng = np.random.default_rng(21)
        pixels = rng.integers(0, 256, size=(224, 224, 4), dtype=np.uint8)
        t = classifier.preprocess(classifier.Bitmap(224, 224, pixels))
        expected = pixels.transpose(2, 0, 1).astype(np.float32) / np.float32(255.0)
        np.testing.assert_allclose(t.array, expected, rtol=0, atol=1e-6)

    def test_values_in_unit_interval(self):
        rng = np.random.default_rng(22)
        pixels = rng.integers(0, 256, size=(33, 57, 4), dtype=np.uint8)
        t = classifier.preprocess(classifier.Bitmap(57, 33, pixels))
        assert float(t.array.min()) >= 0.0
        assert float(t.array.max()) <= 1.0

    def test_checkerboard_2x2_to_4x4_hand_grid(self):
        """Half-pixel centers for a 2->4 upscale sample at source coords
        -0.25, 0.25, 0.75, 1.25 (clamped), giving weights 0.75/0.25."""
        grid = np.array([[255, 0], [0, 255]], np.uint8)
        pixels = np.stack([grid] * 4, axis=-1)
        out = kernels.bilinear_resize_rgba(pixels, 4, 4)
        expected = np.array([
            [255.0, 191.25, 63.75, 0.0],
            [191.25, 159.375, 95.625, 63.75],
            [63.75, 95.625, 159.375, 191.25],
            [0.0, 63.75, 191.25, 255.0],
        ], np.float32)
        for ch in range(4):
            np.testing.assert_allclose(out[..., ch], expected, rtol=0, atol=1e-4)
        # and the loop oracle agrees
        np.testing.assert_allclose(
            oracles.naive_bilinear_rgba(pixels, 4, 4)[..., 0], expected, rtol=0, atol=1e-4
        )

    def test_resize_matches_oracle_on_random_sizes(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            h, w = int(rng.integers(1, 50)), int(rng.integers(1, 50))
            oh, ow = int(rng.integers(1, 50)), int(rng.integers(1, 50))
            src = rng.integers(0, 256, size=(h, w, 4), dtype=np.uint8)
            got = kernels.bilinear_resize_rgba(src, oh, ow)
            want = oracles.naive_bilinear_rgba(src, oh, ow)
            np.testing.assert_allclose(got, want, rtol=0, atol=1e-3)


class TestClassify:
    @staticmethod
    @pytest.fixture(scope="class")
    def zero_model():
        return reference_architecture()

    @staticmethod
    @pytest.fixture(scope="class")
    def random_model():
        return reference_architecture(seeded_random_parameters(5))

    @staticmethod
    def bitmap(w=128, h=128, seed=1):
        rng = np.random.default_rng(seed)
        return classifier.Bitmap(w, h, rng.integers(0, 256, (h, w, 4), dtype=np.uint8))

    def test_zero_model_forces_ad_at_default_threshold(self, zero_model):
        v = classifier.classify(self.bitmap(), zero_model, threshold=0.5)
        assert v.p_ad == pytest.approx(0.5, abs=1e-6)
        assert v.is_ad is True  # >= comparison
        assert v.bypassed is False

    def test_small_image_bypassed(self, zero_model):
        v = classifier.classify(self.bitmap(40, 40), zero_model)
        assert v.bypassed is True
        assert v.is_ad is False
        assert v.p_ad == 0.0

    def test_boundary_100_is_classified(self, zero_model):
        v = classifier.classify(self.bitmap(100, 100), zero_model)
        assert v.bypassed is False

    def test_bypass_opt_out(self, zero_model):
        v = classifier.classify(self.bitmap(40, 40), zero_model, bypass=False)
        assert v.bypassed is False
        assert v.p_ad == pytest.approx(0.5, abs=1e-6)

    def test_same_bitmap_same_verdict(self, random_model):
        b = self.bitmap(seed=9)
        v1 = classifier.classify(b, random_model)
        v2 = classifier.classify(b, random_model)
        assert (v1.is_ad, v1.p_ad, v1.bypassed) == (v2.is_ad, v2.p_ad, v2.bypassed)

    def test_threshold_rule(self, random_model):
        b = self.bitmap(seed=10)
        v = classifier.classify(b, random_model, threshold=0.0)
        assert v.is_ad is True
        v = classifier.classify(b, random_model, threshold=1.0000001)
        assert v.is_ad is False

    def test_inference_time_recorded(self, random_model):
        v = classifier.classify(self.bitmap(seed=11), random_model)
        assert v.inference_micros > 0
