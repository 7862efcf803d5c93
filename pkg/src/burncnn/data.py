"""Dataset manifests, deterministic stratified splits, label mapping,
and the 16-variant augmentation bookkeeping.

The reference dataset is 94 burn-wound images: 20 full-thickness,
32 deep-dermal, 42 superficial-dermal. Splits only ever record ids;
pixel work lives in :mod:`burncnn.images`.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, InfeasibleSplit, ManifestError

BURN_CLASSES = ("full-thickness", "deep-dermal", "superficial-dermal")
GRAFT = "graft"
NON_GRAFT = "non-graft"
BINARY_CLASSES = (GRAFT, NON_GRAFT)
SPLITS = ("train", "validation", "test")

REFERENCE_COUNTS = {"full-thickness": 20, "deep-dermal": 32,
                    "superficial-dermal": 42}

MANIFEST_HEADER = ["id", "path", "burn_class"]
TABLE_HEADER = ["id", "variant", "split", "label"]


@dataclass(frozen=True)
class Sample:
    id: str
    image_path: str
    burn_class: str


@dataclass
class DatasetManifest:
    samples: list[Sample]
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.samples)

    def by_id(self) -> dict[str, Sample]:
        return {s.id: s for s in self.samples}

    def class_counts(self) -> dict[str, int]:
        counts = {c: 0 for c in BURN_CLASSES}
        for s in self.samples:
            counts[s.burn_class] += 1
        return counts

    def ids_by_class(self) -> dict[str, list[str]]:
        groups: dict[str, list[str]] = {c: [] for c in BURN_CLASSES}
        for s in self.samples:
            groups[s.burn_class].append(s.id)
        return groups


def map_binary_label(burn_class: str) -> str:
    """Graft/non-graft grouping: wounds needing a skin graft vs not."""
    if burn_class in ("full-thickness", "deep-dermal"):
        return GRAFT
    if burn_class == "superficial-dermal":
        return NON_GRAFT
    raise ContractViolation(f"unknown burn class {burn_class!r}")


def load_manifest(path) -> DatasetManifest:
    """Parse a manifest CSV (header `id,path,burn_class`, UTF-8)."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != MANIFEST_HEADER:
        raise ManifestError(
            f"expected header {','.join(MANIFEST_HEADER)!r}", line=1)
    samples: list[Sample] = []
    seen: set[str] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ManifestError(f"expected 3 fields, got {len(row)}", line=lineno)
        sid, img_path, label = (v.strip() for v in row)
        if not sid:
            raise ManifestError("empty id", line=lineno)
        if sid in seen:
            raise ManifestError(f"duplicate id {sid!r}", line=lineno)
        if not img_path:
            raise ManifestError(f"missing file reference for id {sid!r}",
                                line=lineno)
        if label not in BURN_CLASSES:
            raise ManifestError(
                f"unknown label {label!r} (expected one of "
                f"{', '.join(BURN_CLASSES)})", line=lineno)
        seen.add(sid)
        samples.append(Sample(id=sid, image_path=img_path, burn_class=label))
    return DatasetManifest(samples=samples, provenance=str(path))


@dataclass
class SplitAssignment:
    seed: int
    mode: str                                # "three-class" | "binary"
    assignments: dict[str, str] = field(default_factory=dict)

    def ids_for(self, split: str) -> list[str]:
        return [i for i, s in self.assignments.items() if s == split]

    def split_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in SPLITS}
        for s in self.assignments.values():
            counts[s] += 1
        return counts

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "mode": self.mode,
                           "assignments": self.assignments},
                          sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SplitAssignment":
        d = json.loads(text)
        bad = [v for v in d["assignments"].values() if v not in SPLITS]
        if bad:
            raise ContractViolation(f"unknown split name {bad[0]!r}")
        return cls(seed=int(d["seed"]), mode=str(d["mode"]),
                   assignments=dict(d["assignments"]))


def _shuffled(ids: list[str], rng: np.random.Generator) -> list[str]:
    # sort first so the draw depends only on (membership, seed)
    out = sorted(ids)
    rng.shuffle(out)
    return out


def split_three_class(manifest: DatasetManifest, seed: int) -> SplitAssignment:
    """Stratified split holding out 3 validation + 3 test images per class.

    On the reference manifest this yields sizes 76/9/9 and train counts
    14/26/36 (full/deep/superficial). Deterministic given the seed.
    """
    rng = np.random.default_rng(seed)
    assignment = SplitAssignment(seed=seed, mode="three-class")
    for cls in BURN_CLASSES:
        ids = manifest.ids_by_class()[cls]
        if len(ids) < 6:
            raise InfeasibleSplit(
                f"class {cls!r} has {len(ids)} samples, too small for a "
                f"3+3 validation/test holdout")
        order = _shuffled(ids, rng)
        for i in order[:3]:
            assignment.assignments[i] = "validation"
        for i in order[3:6]:
            assignment.assignments[i] = "test"
        for i in order[6:]:
            assignment.assignments[i] = "train"
    return assignment


def split_binary(manifest: DatasetManifest, seed: int) -> SplitAssignment:
    """Binary (graft/non-graft) split mirroring the prior-work protocol:
    74 test images, 17 train (9 graft + 8 non-graft), 3 validation.

    Only defined for the reference-shaped manifest (class counts
    20/32/42); anything else is an infeasible split.
    """
    if manifest.class_counts() != REFERENCE_COUNTS:
        raise InfeasibleSplit(
            f"binary split requires the reference manifest with class counts "
            f"{REFERENCE_COUNTS}, got {manifest.class_counts()}")
    rng = np.random.default_rng(seed)
    groups: dict[str, list[str]] = {GRAFT: [], NON_GRAFT: []}
    for s in manifest.samples:
        groups[map_binary_label(s.burn_class)].append(s.id)

    # train 9 graft + 8 non-graft; validation 2 graft + 1 non-graft
    plan = {GRAFT: (9, 2), NON_GRAFT: (8, 1)}
    assignment = SplitAssignment(seed=seed, mode="binary")
    for label in (GRAFT, NON_GRAFT):
        n_train, n_val = plan[label]
        order = _shuffled(groups[label], rng)
        for i in order[:n_train]:
            assignment.assignments[i] = "train"
        for i in order[n_train:n_train + n_val]:
            assignment.assignments[i] = "validation"
        for i in order[n_train + n_val:]:
            assignment.assignments[i] = "test"
    return assignment


ROTATIONS = (0, 90, 180, 270)
CROPS = ("full", "center")


@dataclass(frozen=True)
class AugmentationVariant:
    rotation: int            # counter-clockwise degrees
    horizontal_flip: bool
    crop: str                # "full" | "center" (87.5% center crop)

    def __post_init__(self):
        if self.rotation not in ROTATIONS:
            raise ContractViolation(f"rotation {self.rotation} not a right angle")
        if self.crop not in CROPS:
            raise ContractViolation(f"unknown crop {self.crop!r}")


def enumerate_variants() -> list[AugmentationVariant]:
    """The 16 deterministic variants in canonical order:
    rotation-major, then flip, then crop."""
    return [AugmentationVariant(rot, flip, crop)
            for rot in ROTATIONS
            for flip in (False, True)
            for crop in CROPS]


def variant_index(variant: AugmentationVariant) -> int:
    return (ROTATIONS.index(variant.rotation) * 4
            + int(variant.horizontal_flip) * 2
            + CROPS.index(variant.crop))


@dataclass(frozen=True)
class AugmentedRow:
    id: str
    variant: int
    split: str
    label: str


def augment_split(manifest: DatasetManifest,
                  assignment: SplitAssignment) -> list[AugmentedRow]:
    """Expand every training sample into its 16 variants.

    Validation and test images are never augmented and never appear in
    the returned table. Row order follows manifest order, variant-minor.
    """
    binary = assignment.mode == "binary"
    rows: list[AugmentedRow] = []
    for s in manifest.samples:
        if assignment.assignments.get(s.id) != "train":
            continue
        label = map_binary_label(s.burn_class) if binary else s.burn_class
        for v in range(16):
            rows.append(AugmentedRow(id=s.id, variant=v, split="train",
                                     label=label))
    return rows


def table_label_counts(rows: list[AugmentedRow]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for r in rows:
        counts[r.label] = counts.get(r.label, 0) + 1
    return counts


def write_table_csv(rows: list[AugmentedRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for r in rows:
            w.writerow([r.id, r.variant, r.split, r.label])


def read_table_csv(path) -> list[AugmentedRow]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != TABLE_HEADER:
        raise ManifestError(f"expected header {','.join(TABLE_HEADER)!r}", line=1)
    return [AugmentedRow(id=r[0], variant=int(r[1]), split=r[2], label=r[3])
            for r in rows[1:] if r]
