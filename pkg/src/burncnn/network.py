"""Network description, parameter container, forward/backward orchestration,
and transfer-learning head surgery for the canonical AlexNet stack.

The layer chain is fixed at build time; forward/backward hand-chain the
primitives in :mod:`burncnn.ops` rather than running a general autodiff
graph.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .errors import ContractViolation, IncompatibleCheckpoint
from .ops import (ConvParams, LrnParams, conv2d_backward, conv2d_forward,
                  dropout_backward, dropout_forward, linear_backward,
                  linear_forward, lrn_backward, lrn_forward, maxpool_backward,
                  maxpool_forward, relu_backward, relu_forward)
from .tensor import Tensor

LAYER_KINDS = ("conv", "relu", "lrn", "maxpool", "linear", "dropout",
               "softmax-output")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the stack. Only the fields for `kind` are meaningful."""

    kind: str
    name: str = ""                      # parameter key for conv/linear layers
    conv: ConvParams | None = None
    lrn: LrnParams | None = None
    window: int = 0                     # maxpool
    stride: int = 0                     # maxpool
    in_features: int = 0                # linear
    out_features: int = 0               # linear
    rate: float = 0.0                   # dropout
    trainable: bool = True

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ContractViolation(f"unknown layer kind {self.kind!r}")
        if self.kind in ("conv", "linear") and not self.name:
            raise ContractViolation(f"{self.kind} layer needs a parameter name")

    @property
    def has_params(self) -> bool:
        return self.kind in ("conv", "linear")


@dataclass(frozen=True)
class NetworkSpec:
    input_size: tuple[int, int, int]    # (channels, height, width)
    layers: tuple[LayerSpec, ...]
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_size", tuple(self.input_size))
        final = self.shape_chain()[-1]
        if final != (self.num_classes,):
            raise ContractViolation(
                f"final layer produces shape {final}, expected ({self.num_classes},)")

    def shape_chain(self) -> list[tuple[int, ...]]:
        """Per-layer output shapes (excluding batch), validating the chain."""
        shape = self.input_size
        chain = [shape]
        for i, layer in enumerate(self.layers):
            where = f"layer {i} ({layer.kind} {layer.name})".rstrip()
            if layer.kind == "conv":
                p = layer.conv
                if len(shape) != 3 or shape[0] != p.input_channels:
                    raise ContractViolation(
                        f"{where}: expects {p.input_channels} input channels, "
                        f"gets shape {shape}")
                oh, ow = p.output_hw(shape[1], shape[2])
                shape = (p.output_channels, oh, ow)
            elif layer.kind == "maxpool":
                if len(shape) != 3:
                    raise ContractViolation(f"{where}: needs a spatial input")
                oh = (shape[1] - layer.window) // layer.stride + 1
                ow = (shape[2] - layer.window) // layer.stride + 1
                if oh < 1 or ow < 1:
                    raise ContractViolation(f"{where}: window exceeds input {shape}")
                shape = (shape[0], oh, ow)
            elif layer.kind == "linear":
                flat = int(np.prod(shape))
                if flat != layer.in_features:
                    raise ContractViolation(
                        f"{where}: expects {layer.in_features} features, "
                        f"gets {flat} from shape {shape}")
                shape = (layer.out_features,)
            elif layer.kind == "lrn" and len(shape) != 3:
                raise ContractViolation(f"{where}: needs a channel axis")
            chain.append(shape)
        return chain

    def param_layers(self) -> list[LayerSpec]:
        return [l for l in self.layers if l.has_params]


@dataclass
class LayerParams:
    weights: Tensor
    bias: Tensor


class ParameterSet:
    """Ordered map layer-name -> (weights, bias)."""

    def __init__(self, entries: dict[str, LayerParams] | None = None):
        self._entries: dict[str, LayerParams] = dict(entries or {})

    def __getitem__(self, name: str) -> LayerParams:
        return self._entries[name]

    def __setitem__(self, name: str, value: LayerParams) -> None:
        self._entries[name] = value

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def items(self) -> Iterator[tuple[str, LayerParams]]:
        return iter(self._entries.items())

    def names(self) -> list[str]:
        return list(self._entries)

    def copy(self) -> "ParameterSet":
        return ParameterSet({k: LayerParams(v.weights, v.bias)
                             for k, v in self._entries.items()})

    def count(self) -> int:
        """Total number of scalar parameters."""
        return sum(v.weights.size + v.bias.size for v in self._entries.values())


def check_params(spec: NetworkSpec, params: ParameterSet) -> None:
    """Every param layer must have exactly one entry with matching shapes."""
    names = [l.name for l in spec.param_layers()]
    if sorted(names) != sorted(params.names()):
        raise ContractViolation(
            f"parameter names {sorted(params.names())} do not match "
            f"spec layers {sorted(names)}")
    for layer in spec.param_layers():
        entry = params[layer.name]
        if layer.kind == "conv":
            p = layer.conv
            wshape = (p.output_channels, p.input_channels // p.groups,
                      p.kernel_height, p.kernel_width)
            bshape = (p.output_channels,)
        else:
            wshape = (layer.in_features, layer.out_features)
            bshape = (layer.out_features,)
        if entry.weights.shape != wshape:
            raise ContractViolation(
                f"{layer.name}: weights shape {entry.weights.shape} != {wshape}")
        if entry.bias.shape != bshape:
            raise ContractViolation(
                f"{layer.name}: bias shape {entry.bias.shape} != {bshape}")


def _alexnet_layers(widths: tuple[int, ...], fc_width: int,
                    num_classes: int) -> tuple[LayerSpec, ...]:
    c1, c2, c3, c4, c5 = widths
    lrn = LrnParams()
    flat = c5 * 6 * 6
    return (
        LayerSpec("conv", "conv1", conv=ConvParams(11, 11, 4, 0, 3, c1, 1)),
        LayerSpec("relu"),
        LayerSpec("lrn", lrn=lrn),
        LayerSpec("maxpool", window=3, stride=2),
        LayerSpec("conv", "conv2", conv=ConvParams(5, 5, 1, 2, c1, c2, 2)),
        LayerSpec("relu"),
        LayerSpec("lrn", lrn=lrn),
        LayerSpec("maxpool", window=3, stride=2),
        LayerSpec("conv", "conv3", conv=ConvParams(3, 3, 1, 1, c2, c3, 1)),
        LayerSpec("relu"),
        LayerSpec("conv", "conv4", conv=ConvParams(3, 3, 1, 1, c3, c4, 2)),
        LayerSpec("relu"),
        LayerSpec("conv", "conv5", conv=ConvParams(3, 3, 1, 1, c4, c5, 2)),
        LayerSpec("relu"),
        LayerSpec("maxpool", window=3, stride=2),
        LayerSpec("linear", "fc6", in_features=flat, out_features=fc_width),
        LayerSpec("relu"),
        LayerSpec("dropout", rate=0.5),
        LayerSpec("linear", "fc7", in_features=fc_width, out_features=fc_width),
        LayerSpec("relu"),
        LayerSpec("dropout", rate=0.5),
        LayerSpec("linear", "fc8", in_features=fc_width, out_features=num_classes),
    )


def init_params(spec: NetworkSpec, seed: int) -> ParameterSet:
    """He-normal weights, zero biases, deterministic in layer order."""
    rng = np.random.default_rng(seed)
    params = ParameterSet()
    for layer in spec.param_layers():
        if layer.kind == "conv":
            p = layer.conv
            cg = p.input_channels // p.groups
            fan_in = cg * p.kernel_height * p.kernel_width
            wshape = (p.output_channels, cg, p.kernel_height, p.kernel_width)
            bshape = (p.output_channels,)
        else:
            fan_in = layer.in_features
            wshape = (layer.in_features, layer.out_features)
            bshape = (layer.out_features,)
        std = np.sqrt(2.0 / fan_in)
        w = (rng.standard_normal(wshape) * std).astype(np.float32)
        params[layer.name] = LayerParams(Tensor._wrap(w), Tensor.zeros(bshape))
    return params


def build_alexnet(num_classes: int, seed: int = 0) -> tuple[NetworkSpec, ParameterSet]:
    """Canonical AlexNet (input 3x227x227) with a `num_classes`-wide head.

    The 1000-class build carries ~6.1e7 trainable scalars.
    """
    if num_classes < 2:
        raise ContractViolation(f"num_classes must be >= 2, got {num_classes}")
    spec = NetworkSpec((3, 227, 227),
                       _alexnet_layers((96, 256, 384, 384, 256), 4096, num_classes),
                       num_classes)
    return spec, init_params(spec, seed)


def build_reduced_alexnet(num_classes: int, seed: int = 0) -> tuple[NetworkSpec, ParameterSet]:
    """Width-reduced twin of the canonical stack for desk-scale tests.

    Same layer sequence; conv widths divided by 16 and FC widths 128.
    Keeps grouping, LRN, and dropout so whole-network checks exercise
    every structural feature.
    """
    if num_classes < 2:
        raise ContractViolation(f"num_classes must be >= 2, got {num_classes}")
    spec = NetworkSpec((3, 227, 227),
                       _alexnet_layers((6, 16, 24, 24, 16), 128, num_classes),
                       num_classes)
    return spec, init_params(spec, seed)


@dataclass
class ActivationCache:
    """Values saved by forward() that backward() consumes.

    Holds object identity of the spec/params it was produced with so a
    stale or mismatched cache is rejected.
    """

    spec: NetworkSpec
    params: ParameterSet
    batch_size: int
    entries: list = field(default_factory=list)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(0 if rng is None else rng)


def forward(spec: NetworkSpec, params: ParameterSet, batch: Tensor,
            mode: str = "infer", rng=None) -> tuple[Tensor, ActivationCache]:
    """Run the stack, returning logits and the cache for backward().

    `mode` is "train" (dropout active, masks drawn from `rng`) or
    "infer" (dropout is the identity).
    """
    if mode not in ("train", "infer"):
        raise ContractViolation(f"mode must be 'train' or 'infer', got {mode!r}")
    if batch.ndim != 4 or batch.shape[1:] != spec.input_size:
        raise ContractViolation(
            f"batch shape {batch.shape} does not match input size "
            f"(N, {', '.join(map(str, spec.input_size))})")
    gen = _as_generator(rng)
    training = mode == "train"

    cache = ActivationCache(spec=spec, params=params, batch_size=batch.shape[0])
    x = batch
    for layer in spec.layers:
        if layer.kind == "conv":
            lp = params[layer.name]
            cache.entries.append(("conv", x))
            x = conv2d_forward(x, lp.weights, lp.bias, layer.conv)
        elif layer.kind == "relu":
            cache.entries.append(("relu", x))
            x = relu_forward(x)
        elif layer.kind == "lrn":
            cache.entries.append(("lrn", x))
            x = lrn_forward(x, layer.lrn)
        elif layer.kind == "maxpool":
            in_shape = x.shape
            x, idx = maxpool_forward(x, layer.window, layer.stride)
            cache.entries.append(("maxpool", idx, in_shape))
        elif layer.kind == "linear":
            unflattened = x.shape if x.ndim == 4 else None
            if unflattened is not None:
                x = x.reshape(x.shape[0], -1)
            lp = params[layer.name]
            cache.entries.append(("linear", x, unflattened))
            x = linear_forward(x, lp.weights, lp.bias)
        elif layer.kind == "dropout":
            x, mask = dropout_forward(x, layer.rate, gen, training)
            cache.entries.append(("dropout", mask))
        else:  # softmax-output marker: identity here, loss applies softmax
            cache.entries.append(("softmax-output",))
    return x, cache


@dataclass
class LayerGrads:
    weights: Tensor
    bias: Tensor
    frozen: bool = False


class GradientSet:
    """Gradient tensor per trainable parameter, keyed like ParameterSet."""

    def __init__(self):
        self._entries: dict[str, LayerGrads] = {}

    def __getitem__(self, name: str) -> LayerGrads:
        return self._entries[name]

    def __setitem__(self, name: str, value: LayerGrads) -> None:
        self._entries[name] = value

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def items(self):
        return iter(self._entries.items())

    def names(self) -> list[str]:
        return list(self._entries)


def backward(spec: NetworkSpec, params: ParameterSet, cache: ActivationCache,
             grad_logits: Tensor) -> GradientSet:
    """Backpropagate grad_logits through the cached forward pass.

    Frozen layers receive zero-filled gradients flagged frozen; the
    input gradient still flows through them.
    """
    if cache.spec is not spec or cache.params is not params:
        raise ContractViolation("activation cache does not belong to this "
                                "spec/params pair")
    if len(cache.entries) != len(spec.layers):
        raise ContractViolation("activation cache is stale: entry count "
                                "does not match layer count")
    if grad_logits.shape != (cache.batch_size, spec.num_classes):
        raise ContractViolation(
            f"grad_logits shape {grad_logits.shape} != "
            f"({cache.batch_size}, {spec.num_classes})")

    grads = GradientSet()
    g = grad_logits
    for layer, entry in zip(reversed(spec.layers), reversed(cache.entries)):
        if layer.kind == "conv":
            _, saved_in = entry
            lp = params[layer.name]
            if layer.trainable:
                g, gw, gb = conv2d_backward(g, saved_in, lp.weights, layer.conv)
                grads[layer.name] = LayerGrads(gw, gb)
            else:
                g, _, _ = conv2d_backward(g, saved_in, lp.weights, layer.conv)
                grads[layer.name] = LayerGrads(
                    Tensor.zeros(lp.weights.shape, dtype=lp.weights.dtype),
                    Tensor.zeros(lp.bias.shape, dtype=lp.bias.dtype),
                    frozen=True)
        elif layer.kind == "relu":
            _, saved_in = entry
            g = relu_backward(g, saved_in)
        elif layer.kind == "lrn":
            _, saved_in = entry
            g = lrn_backward(g, saved_in, layer.lrn)
        elif layer.kind == "maxpool":
            _, idx, in_shape = entry
            g = maxpool_backward(g, idx, in_shape)
        elif layer.kind == "linear":
            _, saved_in, unflattened = entry
            lp = params[layer.name]
            gi, gw, gb = linear_backward(g, saved_in, lp.weights)
            if layer.trainable:
                grads[layer.name] = LayerGrads(gw, gb)
            else:
                grads[layer.name] = LayerGrads(
                    Tensor.zeros(lp.weights.shape, dtype=lp.weights.dtype),
                    Tensor.zeros(lp.bias.shape, dtype=lp.bias.dtype),
                    frozen=True)
            g = gi.reshape(unflattened) if unflattened is not None else gi
        elif layer.kind == "dropout":
            _, mask = entry
            g = dropout_backward(g, mask)
        # softmax-output marker: gradient passes through unchanged
    return grads


FREEZE_POLICIES = ("none", "all-but-head")


def parse_freeze_policy(policy: str) -> tuple[str, int]:
    """Normalize a policy string: none | all-but-head | first-<k>."""
    if policy in FREEZE_POLICIES:
        return policy, 0
    if policy.startswith("first-"):
        try:
            k = int(policy[len("first-"):])
        except ValueError:
            k = -1
        if k >= 0:
            return "first-k", k
    raise ContractViolation(f"unknown freeze policy {policy!r}")


def apply_freeze_policy(spec: NetworkSpec, policy: str) -> NetworkSpec:
    """Return a spec with trainable flags set per the freeze policy.

    "first-<k>" freezes the first k weight-bearing layers in stack order.
    """
    kind, k = parse_freeze_policy(policy)
    param_names = [l.name for l in spec.param_layers()]
    if kind == "none":
        frozen = set()
    elif kind == "all-but-head":
        frozen = set(param_names[:-1])
    else:
        frozen = set(param_names[:k])
    layers = tuple(replace(l, trainable=l.name not in frozen) if l.has_params else l
                   for l in spec.layers)
    return NetworkSpec(spec.input_size, layers, spec.num_classes)


def transfer_surgery(pretrained, num_classes: int, freeze_policy: str = "none",
                     seed: int = 0) -> tuple[NetworkSpec, ParameterSet]:
    """Replace a pretrained checkpoint's head with a fresh `num_classes` one.

    Every non-head parameter is copied bit-exactly. The new head is
    drawn from N(0, 0.01^2) with zero bias, unconditionally: the head is
    re-initialized even when num_classes matches the pretrained width.
    """
    parse_freeze_policy(freeze_policy)
    src_spec: NetworkSpec = pretrained.spec
    canonical, _ = build_alexnet(src_spec.num_classes, seed=0)
    if src_spec.input_size != canonical.input_size:
        raise IncompatibleCheckpoint(
            f"input size {src_spec.input_size} != canonical {canonical.input_size}")
    if len(src_spec.layers) != len(canonical.layers):
        raise IncompatibleCheckpoint(
            f"layer count {len(src_spec.layers)} != canonical "
            f"{len(canonical.layers)}")
    for i, (got, want) in enumerate(zip(src_spec.layers, canonical.layers)):
        if replace(got, trainable=True) != replace(want, trainable=True):
            raise IncompatibleCheckpoint(
                f"layer {i} differs from canonical AlexNet: got "
                f"{got.kind} {got.name}, expected {want.kind} {want.name}".rstrip())

    head = canonical.param_layers()[-1].name
    layers = tuple(
        replace(l, out_features=num_classes) if l.name == head else l
        for l in canonical.layers)
    spec = NetworkSpec(canonical.input_size, layers, num_classes)

    params = ParameterSet()
    for name, lp in pretrained.params.items():
        if name != head:
            params[name] = LayerParams(lp.weights, lp.bias)
    rng = np.random.default_rng(seed)
    head_layer = [l for l in spec.layers if l.name == head][0]
    w = (rng.standard_normal((head_layer.in_features, num_classes)) * 0.01)
    params[head] = LayerParams(Tensor._wrap(w.astype(np.float32)),
                               Tensor.zeros((num_classes,)))
    spec = apply_freeze_policy(spec, freeze_policy)
    check_params(spec, params)
    return spec, params
