"""Image decoding, deterministic augmentation, resizing, normalization.

Rotation and flips are exact pixel permutations; the only resampling
step is the final bilinear resize to the network input size. Channel
means are the published ImageNet RGB means, which keeps transfer from
public pretrained weights meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .data import AugmentationVariant, variant_index
from .errors import ContractViolation, DecodeError
from .tensor import Tensor

INPUT_HEIGHT = 227
INPUT_WIDTH = 227
CHANNEL_MEANS = (123.68, 116.78, 103.94)    # RGB, 0..255 scale
CROP_KEEP_NUM = 7                            # center crop keeps 7/8 per side
CROP_KEEP_DEN = 8


@dataclass(frozen=True)
class PreparedImage:
    tensor: Tensor              # (3, 227, 227) float32, mean-subtracted
    source_id: str
    variant: int


def decode_image(path) -> np.ndarray:
    """Decode an image file to an 8-bit RGB raster (H, W, 3)."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc


def center_crop(raster: np.ndarray) -> np.ndarray:
    """Center crop retaining 7/8 of each side (floor)."""
    h, w = raster.shape[:2]
    nh = (h * CROP_KEEP_NUM) // CROP_KEEP_DEN
    nw = (w * CROP_KEEP_NUM) // CROP_KEEP_DEN
    if nh < 1 or nw < 1:
        raise ContractViolation(f"center crop of {h}x{w} image is degenerate")
    top = (h - nh) // 2
    left = (w - nw) // 2
    return raster[top:top + nh, left:left + nw]


def augment(raster: np.ndarray, variant: AugmentationVariant) -> np.ndarray:
    """Apply one variant: CCW rotation, then horizontal flip, then crop."""
    if raster.size == 0:
        raise ContractViolation("cannot augment an empty image")
    out = np.rot90(raster, k=variant.rotation // 90)
    if variant.horizontal_flip:
        out = np.flip(out, axis=1)
    if variant.crop == "center":
        out = center_crop(out)
    return np.ascontiguousarray(out)


def bilinear_resize(raster: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers; returns float64 (H, W, C)."""
    src = raster.astype(np.float64)
    if src.ndim == 2:
        src = src[:, :, None]
    h, w = src.shape[:2]

    def axis_coords(n_in: int, n_out: int):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1.0)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis_coords(h, out_h)
    x0, x1, fx = axis_coords(w, out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def prepare_image(source, variant: AugmentationVariant,
                  sample_id: str = "") -> PreparedImage:
    """Decode (if needed), augment, resize to 227x227, and normalize.

    `source` is a file path or an already decoded (H, W, 3) raster with
    values on the 0..255 scale. Output channels are RGB, mean-subtracted.
    """
    if isinstance(source, np.ndarray):
        raster = source
    else:
        raster = decode_image(source)
    raster = augment(raster, variant)
    resized = bilinear_resize(raster, INPUT_HEIGHT, INPUT_WIDTH)
    if resized.shape[2] != 3:
        raise ContractViolation(
            f"expected 3 channels after decode, got {resized.shape[2]}")
    normalized = resized - np.asarray(CHANNEL_MEANS, dtype=np.float64)
    chw = normalized.transpose(2, 0, 1).astype(np.float32)
    return PreparedImage(tensor=Tensor._wrap(chw), source_id=sample_id,
                         variant=variant_index(variant))
