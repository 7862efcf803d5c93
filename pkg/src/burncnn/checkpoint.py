"""Checkpoint persistence in the BWCK binary format.

Layout (all integers unsigned 32-bit little-endian):

    magic "BWCK" | version | entry count
    per entry: name length, UTF-8 name, rank, dims..., raw float32 LE
               values in row-major order
    trailing:  metadata length, UTF-8 JSON (network spec + training info)

Round-trips are bit-exact: loading a saved checkpoint reproduces the
parameter bytes and the network spec identically.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointFormatError, UnsupportedVersionError
from .network import (LayerParams, LayerSpec, NetworkSpec, ParameterSet,
                      check_params)
from .ops import ConvParams, LrnParams
from .tensor import Tensor

MAGIC = b"BWCK"
FORMAT_VERSION = 1


@dataclass
class TrainingMeta:
    epochs_completed: int = 0
    seed: int = 0
    config_digest: str = ""


@dataclass
class Checkpoint:
    spec: NetworkSpec
    params: ParameterSet
    meta: TrainingMeta
    version: int = FORMAT_VERSION


def _layer_to_json(layer: LayerSpec) -> dict:
    d: dict = {"kind": layer.kind}
    if layer.kind == "conv":
        p = layer.conv
        d.update(name=layer.name, kernel=[p.kernel_height, p.kernel_width],
                 stride=p.stride, padding=p.padding, in_channels=p.input_channels,
                 out_channels=p.output_channels, groups=p.groups,
                 trainable=layer.trainable)
    elif layer.kind == "lrn":
        q = layer.lrn
        d.update(depth=q.depth, bias=q.bias, alpha=q.alpha, beta=q.beta)
    elif layer.kind == "maxpool":
        d.update(window=layer.window, stride=layer.stride)
    elif layer.kind == "linear":
        d.update(name=layer.name, in_features=layer.in_features,
                 out_features=layer.out_features, trainable=layer.trainable)
    elif layer.kind == "dropout":
        d.update(rate=layer.rate)
    return d


def _layer_from_json(d: dict) -> LayerSpec:
    kind = d["kind"]
    if kind == "conv":
        kh, kw = d["kernel"]
        return LayerSpec("conv", name=d["name"],
                         conv=ConvParams(kh, kw, d["stride"], d["padding"],
                                         d["in_channels"], d["out_channels"],
                                         d["groups"]),
                         trainable=bool(d.get("trainable", True)))
    if kind == "lrn":
        return LayerSpec("lrn", lrn=LrnParams(d["depth"], d["bias"],
                                              d["alpha"], d["beta"]))
    if kind == "maxpool":
        return LayerSpec("maxpool", window=d["window"], stride=d["stride"])
    if kind == "linear":
        return LayerSpec("linear", name=d["name"], in_features=d["in_features"],
                         out_features=d["out_features"],
                         trainable=bool(d.get("trainable", True)))
    if kind == "dropout":
        return LayerSpec("dropout", rate=d["rate"])
    return LayerSpec(kind)


def spec_to_json(spec: NetworkSpec) -> dict:
    return {"input_size": list(spec.input_size),
            "num_classes": spec.num_classes,
            "layers": [_layer_to_json(l) for l in spec.layers]}


def spec_from_json(d: dict) -> NetworkSpec:
    return NetworkSpec(tuple(d["input_size"]),
                       tuple(_layer_from_json(l) for l in d["layers"]),
                       d["num_classes"])


def make_checkpoint(spec: NetworkSpec, params: ParameterSet,
                    meta: TrainingMeta | None = None) -> Checkpoint:
    check_params(spec, params)
    return Checkpoint(spec=spec, params=params, meta=meta or TrainingMeta())


def save_checkpoint(chk: Checkpoint, path) -> None:
    meta = {"spec": spec_to_json(chk.spec),
            "training": {"epochs_completed": chk.meta.epochs_completed,
                         "seed": chk.meta.seed,
                         "config_digest": chk.meta.config_digest}}
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()

    entries: list[tuple[str, Tensor]] = []
    for layer in chk.spec.param_layers():
        lp = chk.params[layer.name]
        entries.append((f"{layer.name}.weight", lp.weights))
        entries.append((f"{layer.name}.bias", lp.bias))

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", chk.version, len(entries)))
        for name, tensor in entries:
            name_b = name.encode()
            f.write(struct.pack("<I", len(name_b)))
            f.write(name_b)
            f.write(struct.pack("<I", tensor.ndim))
            f.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            f.write(tensor.data.astype("<f4", copy=False).tobytes())
        f.write(struct.pack("<I", len(meta_bytes)))
        f.write(meta_bytes)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointFormatError(f"truncated while reading {what}", self.pos)
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        blob = f.read()
    r = _Reader(blob)

    if r.take(4, "magic") != MAGIC:
        raise CheckpointFormatError("bad magic bytes, not a BWCK file", 0)
    version = r.u32("format version")
    if version > FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"format version {version} newer than supported {FORMAT_VERSION}", 4)
    count = r.u32("entry count")

    tensors: dict[str, Tensor] = {}
    offsets: dict[str, int] = {}
    for _ in range(count):
        entry_at = r.pos
        name_len = r.u32("entry name length")
        name = r.take(name_len, "entry name").decode()
        rank = r.u32(f"rank of {name}")
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, f"dims of {name}"))
        n_values = int(np.prod(dims)) if rank else 1
        raw = r.take(4 * n_values, f"values of {name}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)
        if name in tensors:
            raise CheckpointFormatError(f"duplicate entry {name}", entry_at)
        tensors[name] = Tensor._wrap(arr)
        offsets[name] = entry_at

    meta_at = r.pos
    meta_len = r.u32("metadata length")
    meta_raw = r.take(meta_len, "metadata JSON")
    if r.pos != len(blob):
        raise CheckpointFormatError("unexpected trailing data", r.pos)
    try:
        meta = json.loads(meta_raw.decode())
        spec = spec_from_json(meta["spec"])
        training = meta.get("training", {})
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointFormatError(f"bad metadata block: {exc}", meta_at) from exc

    params = ParameterSet()
    for layer in spec.param_layers():
        wkey, bkey = f"{layer.name}.weight", f"{layer.name}.bias"
        for key in (wkey, bkey):
            if key not in tensors:
                raise CheckpointFormatError(f"missing tensor entry {key}", meta_at)
        params[layer.name] = LayerParams(tensors.pop(wkey), tensors.pop(bkey))
    if tensors:
        stray = next(iter(tensors))
        raise CheckpointFormatError(f"entry {stray} matches no spec layer",
                                    offsets[stray])
    try:
        check_params(spec, params)
    except Exception as exc:
        raise CheckpointFormatError(f"tensor/spec mismatch: {exc}", meta_at) from exc

    return Checkpoint(spec=spec, params=params,
                      meta=TrainingMeta(
                          epochs_completed=int(training.get("epochs_completed", 0)),
                          seed=int(training.get("seed", 0)),
                          config_digest=str(training.get("config_digest", ""))),
                      version=version)
