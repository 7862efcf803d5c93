"""Bridges manifests/split tables to network-ready (tensor, label) pairs.

Decoded rasters are cached per image id; prepared tensors are built on
demand so a full augmented epoch never has to sit in memory at once.
"""
from __future__ import annotations

import numpy as np

from .data import (AugmentedRow, DatasetManifest, SplitAssignment,
                   enumerate_variants, map_binary_label)
from .errors import ContractViolation
from .images import prepare_image
from .metrics import class_order_for


class PreparedDataset:
    """Sequence of (input Tensor, label index) over augmented-table rows."""

    def __init__(self, manifest: DatasetManifest, rows: list[AugmentedRow],
                 mode: str):
        self._by_id = manifest.by_id()
        self._rows = rows
        self._order = class_order_for(mode)
        self._variants = enumerate_variants()
        self._raster_cache: dict[str, np.ndarray] = {}
        for row in rows:
            if row.id not in self._by_id:
                raise ContractViolation(f"table row id {row.id!r} not in manifest")

    def __len__(self) -> int:
        return len(self._rows)

    def __getitem__(self, i: int):
        row = self._rows[int(i)]
        raster = self._raster_cache.get(row.id)
        if raster is None:
            from .images import decode_image
            raster = decode_image(self._by_id[row.id].image_path)
            self._raster_cache[row.id] = raster
        prepared = prepare_image(raster, self._variants[row.variant],
                                 sample_id=row.id)
        return prepared.tensor, self._order.index(row.label)


def _label_for(sample, mode: str) -> str:
    return map_binary_label(sample.burn_class) if mode == "binary" \
        else sample.burn_class


def rows_for_split(manifest: DatasetManifest, assignment: SplitAssignment,
                   split: str) -> list[AugmentedRow]:
    """Unaugmented (variant 0) rows for a validation or test split."""
    rows = []
    for s in manifest.samples:
        if assignment.assignments.get(s.id) == split:
            rows.append(AugmentedRow(id=s.id, variant=0, split=split,
                                     label=_label_for(s, assignment.mode)))
    return rows


def eval_pairs(manifest: DatasetManifest, assignment: SplitAssignment,
               split: str):
    """(tensor, label-name) pairs for metrics.evaluate()."""
    order = class_order_for(assignment.mode)
    return [(x, order[y]) for x, y in indexed_pairs(manifest, assignment, split)]


def indexed_pairs(manifest: DatasetManifest, assignment: SplitAssignment,
                  split: str):
    """(tensor, label-index) pairs for trainer validation."""
    ds = PreparedDataset(manifest, rows_for_split(manifest, assignment, split),
                         assignment.mode)
    return [ds[i] for i in range(len(ds))]
