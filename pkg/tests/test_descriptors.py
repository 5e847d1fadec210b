import numpy as np
import pytest

from endlessloop.descriptors import (
    ConvLayer,
    DescriptorBackend,
    DescriptorConfigError,
    compute_descriptors,
    descriptor_distance,
    load_conv_weights,
    save_conv_weights,
)
from endlessloop.raster import RasterImage
from tests.conftest import make_stripes


class TestPatchBackend:
    def test_constant_image_uniform_descriptors(self):
        img = RasterImage(np.full((20, 20, 3), 0.3))
        field = compute_descriptors(img)
        assert np.allclose(field.data, field.data[0, 0])
        # gradient entries (last 6) are zero
        assert np.allclose(field.data[..., -6:], 0.0)

    def test_dim_is_153_at_radius_3(self):
        img = RasterImage(np.random.default_rng(0).random((10, 10, 3)))
        field = compute_descriptors(img)
        assert field.dim == 7 * 7 * 3 + 6

    def test_unit_norm_or_zero(self):
        img = RasterImage(np.random.default_rng(1).random((15, 15, 3)))
        field = compute_descriptors(img)
        norms = np.linalg.norm(field.data, axis=2)
        assert np.allclose(norms, 1.0, atol=1e-9)
        zero = compute_descriptors(RasterImage(np.zeros((8, 8, 3))))
        assert np.allclose(np.linalg.norm(zero.data, axis=2), 0.0)

    def test_periodicity(self):
        img = make_stripes(width=160, height=40, period=20)
        field = compute_descriptors(img)
        a = field.data[20, 30:110]
        b = field.data[20, 50:130]
        assert np.allclose(a, b, atol=1e-9)

    def test_translation_equivariance_interior(self):
        rng = np.random.default_rng(4)
        base = rng.random((30, 40, 3))
        shifted = np.roll(base, 5, axis=1)
        fa = compute_descriptors(RasterImage(base)).data
        fb = compute_descriptors(RasterImage(shifted)).data
        assert np.allclose(fa[10:20, 10:25], fb[10:20, 15:30], atol=1e-12)

    def test_rejects_bad_radius(self):
        with pytest.raises(DescriptorConfigError):
            DescriptorBackend(kind="patch", patch_radius=0)


class TestDescriptorDistance:
    def test_zero_iff_equal(self):
        v = np.array([0.3, -1.0, 2.0])
        assert descriptor_distance(v, v) == 0.0

    def test_orthonormal_pair(self):
        e1 = np.array([1.0, 0.0])
        e2 = np.array([0.0, 1.0])
        assert descriptor_distance(e1, e2) == pytest.approx(2.0)

    def test_matches_brute_force_sum(self):
        rng = np.random.default_rng(8)
        a, b = rng.random(64), rng.random(64)
        brute = sum((float(x) - float(y)) ** 2 for x, y in zip(a, b))
        assert descriptor_distance(a, b) == pytest.approx(brute, abs=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            descriptor_distance(np.zeros(3), np.zeros(4))


class TestConvBackend:
    def _passthrough_file(self, tmp_path):
        # layer 1: pick out the red channel; layer 2: identity on it
        w1 = np.zeros((1, 3, 3, 3))
        w1[0, 0, 1, 1] = 1.0
        w2 = np.zeros((1, 1, 3, 3))
        w2[0, 0, 1, 1] = 1.0
        path = tmp_path / "weights.elcw"
        save_conv_weights(path, [ConvLayer(w1, np.zeros(1)), ConvLayer(w2, np.zeros(1))])
        return path

    def test_passthrough_reproduces_intensity(self, tmp_path):
        path = self._passthrough_file(tmp_path)
        rng = np.random.default_rng(3)
        img = RasterImage(rng.random((12, 14, 3)))
        backend = DescriptorBackend(kind="conv-weights", weights_path=str(path))
        field = compute_descriptors(img, backend)
        assert field.dim == 2
        # inputs are nonnegative, so ReLU is the identity here
        assert np.allclose(field.data[..., 0], img.data[..., 0], atol=1e-12)
        assert np.allclose(field.data[..., 1], img.data[..., 0], atol=1e-12)

    def test_roundtrip_weights(self, tmp_path):
        rng = np.random.default_rng(11)
        layers = [
            ConvLayer(rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4)),
            ConvLayer(rng.standard_normal((5, 4, 3, 3)), rng.standard_normal(5)),
        ]
        path = tmp_path / "w.elcw"
        save_conv_weights(path, layers)
        loaded = load_conv_weights(path)
        assert len(loaded) == 2
        for a, b in zip(layers, loaded):
            assert np.allclose(a.weights, b.weights, atol=1e-6)
            assert np.allclose(a.biases, b.biases, atol=1e-6)

    def test_missing_file_is_config_error(self):
        backend = DescriptorBackend(kind="conv-weights", weights_path="/nonexistent.elcw")
        img = RasterImage(np.zeros((4, 4, 3)))
        with pytest.raises(DescriptorConfigError):
            compute_descriptors(img, backend)

    def test_corrupt_file_is_config_error(self, tmp_path):
        path = tmp_path / "bad.elcw"
        path.write_bytes(b"ELCWxxxxgarbage")
        with pytest.raises(DescriptorConfigError):
            load_conv_weights(path)

    def test_backend_requires_weights_path(self):
        with pytest.raises(DescriptorConfigError):
            DescriptorBackend(kind="conv-weights")
