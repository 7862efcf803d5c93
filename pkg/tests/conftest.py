import csv

import numpy as np
import pytest
from PIL import Image

from burncnn.data import DatasetManifest, Sample

CLASS_PLAN = (("ft", "full-thickness", 20),
              ("dd", "deep-dermal", 32),
              ("sd", "superficial-dermal", 42))


def make_reference_manifest(root="") -> DatasetManifest:
    """Synthetic manifest with the reference class counts 20/32/42."""
    samples = []
    for prefix, label, count in CLASS_PLAN:
        for i in range(1, count + 1):
            sid = f"{prefix}{i:02d}"
            path = f"{root}/{sid}.bmp" if root else f"{sid}.bmp"
            samples.append(Sample(id=sid, image_path=path, burn_class=label))
    return DatasetManifest(samples=samples, provenance="synthetic reference")


def write_manifest_csv(manifest: DatasetManifest, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "path", "burn_class"])
        for s in manifest.samples:
            w.writerow([s.id, s.image_path, s.burn_class])


def write_image_files(manifest: DatasetManifest, size=(16, 16), seed=7) -> None:
    """Create a small random BMP for every manifest entry."""
    rng = np.random.default_rng(seed)
    for s in manifest.samples:
        raster = rng.integers(0, 256, size=(size[0], size[1], 3), dtype=np.uint8)
        Image.fromarray(raster, "RGB").save(s.image_path)


@pytest.fixture
def reference_manifest():
    return make_reference_manifest()


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
