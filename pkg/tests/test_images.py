import numpy as np
import pytest
from PIL import Image

from burncnn.data import AugmentationVariant, enumerate_variants
from burncnn.errors import ContractViolation, DecodeError
from burncnn.images import (CHANNEL_MEANS, augment, bilinear_resize,
                            center_crop, decode_image, prepare_image)


def grid(h, w, channels=1):
    return np.arange(h * w * channels, dtype=np.uint8).reshape(h, w, channels)


class TestAugment:
    def test_identity_variant(self, rng):
        raster = rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)
        out = augment(raster, AugmentationVariant(0, False, "full"))
        assert np.array_equal(out, raster)

    def test_rot90_ccw_permutation(self):
        raster = np.array([["a", "b"], ["c", "d"]], dtype=object)
        out = augment(raster, AugmentationVariant(90, False, "full"))
        assert out.tolist() == [["b", "d"], ["a", "c"]]

    def test_rot180_twice_is_identity(self, rng):
        raster = rng.integers(0, 256, (4, 6, 3), dtype=np.uint8)
        v = AugmentationVariant(180, False, "full")
        assert np.array_equal(augment(augment(raster, v), v), raster)

    def test_hflip_mirrors_columns(self):
        raster = grid(2, 3)
        out = augment(raster, AugmentationVariant(0, True, "full"))
        assert np.array_equal(out, raster[:, ::-1])

    def test_non_crop_variants_preserve_pixel_multiset(self, rng):
        raster = rng.integers(0, 256, (5, 8, 3), dtype=np.uint8)
        for v in enumerate_variants():
            if v.crop == "full":
                out = augment(raster, v)
                assert sorted(out.ravel()) == sorted(raster.ravel())

    def test_sixteen_variants_give_distinct_rasters(self, rng):
        raster = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        outputs = {augment(raster, v).tobytes() for v in enumerate_variants()}
        assert len(outputs) == 16

    def test_center_crop_keeps_seven_eighths(self):
        raster = grid(16, 32)
        out = center_crop(raster)
        assert out.shape[:2] == (14, 28)

    def test_degenerate_crop_rejected(self):
        with pytest.raises(ContractViolation, match="degenerate"):
            augment(grid(1, 1), AugmentationVariant(0, False, "center"))

    def test_empty_image_rejected(self):
        with pytest.raises(ContractViolation, match="empty"):
            augment(np.zeros((0, 3, 3), dtype=np.uint8),
                    AugmentationVariant(0, False, "full"))


class TestBilinearResize:
    def test_constant_preserved_on_downscale(self):
        raster = np.full((2, 2, 3), 37.0)
        out = bilinear_resize(raster, 1, 1)
        assert np.allclose(out, 37.0)

    def test_identity_when_same_size(self, rng):
        raster = rng.random((5, 5, 3)) * 255
        out = bilinear_resize(raster, 5, 5)
        assert np.allclose(out, raster)

    def test_linear_ramp_preserved(self):
        # a linear function is reproduced exactly by bilinear interpolation
        x = np.linspace(0, 10, 8)
        raster = np.tile(x[None, :, None], (8, 1, 1))
        out = bilinear_resize(raster, 8, 4)
        expected = (np.arange(4) + 0.5) * 2 - 0.5
        expected = np.interp(expected, np.arange(8), x)
        assert np.allclose(out[0, :, 0], expected)

    def test_output_range_bounded(self, rng):
        raster = rng.random((9, 13, 3)) * 255
        out = bilinear_resize(raster, 227, 227)
        assert out.min() >= raster.min() - 1e-9
        assert out.max() <= raster.max() + 1e-9


class TestPrepareImage:
    def test_shape_contract(self, rng):
        raster = rng.integers(0, 256, (12, 9, 3), dtype=np.uint8)
        prepared = prepare_image(raster, AugmentationVariant(0, False, "full"),
                                 sample_id="x")
        assert prepared.tensor.shape == (3, 227, 227)
        assert prepared.tensor.dtype == np.float32
        assert prepared.source_id == "x"
        assert prepared.variant == 0

    def test_mean_gray_maps_to_near_zero(self):
        raster = np.zeros((8, 8, 3), dtype=np.float64)
        raster[:, :] = CHANNEL_MEANS
        prepared = prepare_image(raster, AugmentationVariant(0, False, "full"))
        assert np.allclose(prepared.tensor.data, 0.0, atol=1e-4)

    def test_file_round_trip(self, tmp_path, rng):
        raster = rng.integers(0, 256, (10, 10, 3), dtype=np.uint8)
        path = tmp_path / "img.bmp"
        Image.fromarray(raster, "RGB").save(path)
        from_file = prepare_image(str(path), AugmentationVariant(0, False, "full"))
        from_array = prepare_image(raster, AugmentationVariant(0, False, "full"))
        assert np.array_equal(from_file.tensor.data, from_array.tensor.data)

    def test_jpeg_decodes(self, tmp_path, rng):
        raster = rng.integers(0, 256, (20, 20, 3), dtype=np.uint8)
        path = tmp_path / "img.jpg"
        Image.fromarray(raster, "RGB").save(path, quality=95)
        prepared = prepare_image(str(path), AugmentationVariant(90, True, "center"))
        assert prepared.tensor.shape == (3, 227, 227)

    def test_undecodable_raises_with_path(self, tmp_path):
        path = tmp_path / "junk.bmp"
        path.write_bytes(b"this is not an image")
        with pytest.raises(DecodeError, match="junk.bmp"):
            decode_image(path)

    def test_variant_index_recorded(self, rng):
        raster = rng.integers(0, 256, (10, 10, 3), dtype=np.uint8)
        v = enumerate_variants()[11]
        prepared = prepare_image(raster, v)
        assert prepared.variant == 11
