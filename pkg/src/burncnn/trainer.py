"""Mini-batch SGD fine-tuning loop with momentum.

Update rule (gradient-accumulation form, pinned for bit-exact tests):

    v' = momentum * v + g + weight_decay * w
    w' = w - learning_rate * v'

The loop is deterministic: shuffling and dropout masks derive from the
config seed, so identical (seed, config, data) reproduce bit-identical
parameters.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint, TrainingMeta, make_checkpoint
from .errors import ContractViolation, DivergenceError
from .network import (GradientSet, LayerParams, NetworkSpec, ParameterSet,
                      apply_freeze_policy, backward, check_params, forward,
                      init_params, parse_freeze_policy)
from .ops import softmax_cross_entropy
from .tensor import Tensor

HISTORY_HEADER = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float
    epochs: int
    batch_size: int
    momentum: float = 0.9
    weight_decay: float = 0.0
    seed: int = 0
    freeze_policy: str = "none"
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ContractViolation("learning_rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractViolation("epochs and batch_size must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ContractViolation("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ContractViolation("weight_decay must be >= 0")
        parse_freeze_policy(self.freeze_policy)

    def digest(self) -> str:
        text = (f"lr={self.learning_rate!r};epochs={self.epochs};"
                f"batch={self.batch_size};momentum={self.momentum!r};"
                f"decay={self.weight_decay!r};seed={self.seed};"
                f"freeze={self.freeze_policy};shuffle={self.shuffle}")
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def binary_preset(seed: int = 0, freeze_policy: str = "none") -> TrainingConfig:
    """Graft/non-graft experiment: lr 1e-4, 10 epochs, batch 64."""
    return TrainingConfig(learning_rate=1e-4, epochs=10, batch_size=64,
                          seed=seed, freeze_policy=freeze_policy)


def three_class_preset(seed: int = 0, freeze_policy: str = "none") -> TrainingConfig:
    """Burn-depth experiment: lr 1e-6, 5 epochs, batch 10."""
    return TrainingConfig(learning_rate=1e-6, epochs=5, batch_size=10,
                          seed=seed, freeze_policy=freeze_policy)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def final(self) -> EpochRecord:
        return self.records[-1]


def write_history_csv(history: TrainingHistory, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for r in history.records:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.train_acc),
                        repr(r.val_loss), repr(r.val_acc)])


class VelocityState:
    """Per-parameter momentum buffers; all-zeros at step 0."""

    def __init__(self, entries: dict[str, LayerParams]):
        self._entries = entries

    @classmethod
    def zeros_like(cls, params: ParameterSet) -> "VelocityState":
        return cls({name: LayerParams(
            Tensor.zeros(lp.weights.shape, dtype=lp.weights.dtype),
            Tensor.zeros(lp.bias.shape, dtype=lp.bias.dtype))
            for name, lp in params.items()})

    def __getitem__(self, name: str) -> LayerParams:
        return self._entries[name]

    def items(self):
        return iter(self._entries.items())


def sgd_step(params: ParameterSet, grads: GradientSet, velocity: VelocityState,
             config: TrainingConfig) -> tuple[ParameterSet, VelocityState]:
    """One momentum-SGD update. Frozen entries pass through untouched."""
    new_params: dict[str, LayerParams] = {}
    new_vel: dict[str, LayerParams] = {}
    lr = config.learning_rate
    mu = config.momentum
    wd = config.weight_decay
    for name, lp in params.items():
        g = grads[name]
        if g.frozen:
            new_params[name] = lp
            new_vel[name] = velocity[name]
            continue
        if g.weights.shape != lp.weights.shape or g.bias.shape != lp.bias.shape:
            raise ContractViolation(
                f"{name}: gradient shapes {g.weights.shape}/{g.bias.shape} do "
                f"not match parameter shapes {lp.weights.shape}/{lp.bias.shape}")
        v = velocity[name]
        dt = lp.weights.dtype.type
        vw = dt(mu) * v.weights.data + g.weights.data + dt(wd) * lp.weights.data
        vb = dt(mu) * v.bias.data + g.bias.data + dt(wd) * lp.bias.data
        new_params[name] = LayerParams(
            Tensor._wrap(lp.weights.data - dt(lr) * vw),
            Tensor._wrap(lp.bias.data - dt(lr) * vb))
        new_vel[name] = LayerParams(Tensor._wrap(vw), Tensor._wrap(vb))
    return ParameterSet(new_params), VelocityState(new_vel)


def _stack_batch(data, indices) -> tuple[Tensor, np.ndarray]:
    xs = np.stack([data[i][0].data for i in indices])
    ys = np.asarray([data[i][1] for i in indices], dtype=np.int64)
    return Tensor._wrap(xs), ys


def evaluate_dataset(spec: NetworkSpec, params: ParameterSet, data,
                     batch_size: int) -> tuple[float, float]:
    """(mean loss, accuracy) over a dataset of (input, label) pairs."""
    if len(data) == 0:
        return float("nan"), float("nan")
    total_loss = 0.0
    correct = 0
    for start in range(0, len(data), batch_size):
        idx = range(start, min(len(data), start + batch_size))
        batch, labels = _stack_batch(data, idx)
        logits, _ = forward(spec, params, batch, mode="infer")
        loss, probs, _ = softmax_cross_entropy(logits, labels)
        total_loss += loss * len(labels)
        correct += int((probs.data.argmax(axis=1) == labels).sum())
    return total_loss / len(data), correct / len(data)


@dataclass
class TrainResult:
    best: Checkpoint
    final: Checkpoint
    history: TrainingHistory


def train(spec: NetworkSpec, params: ParameterSet, train_data, val_data,
          config: TrainingConfig, on_epoch=None,
          _stop_at_train_acc: float | None = None) -> TrainResult:
    """Fine-tune `params` on (input, label-index) pairs.

    Shuffles per epoch from the config seed, processes the final partial
    batch at its actual size, and selects the checkpoint with the
    highest validation accuracy (ties resolved to the earliest epoch).
    The result carries that best checkpoint, the final-epoch checkpoint,
    and the full history.
    """
    if len(train_data) == 0:
        raise ContractViolation("training table is empty")
    spec = apply_freeze_policy(spec, config.freeze_policy)
    check_params(spec, params)

    n = len(train_data)
    shuffle_rng = np.random.default_rng(config.seed)
    velocity = VelocityState.zeros_like(params)
    history = TrainingHistory()
    best_acc = -1.0
    best_epoch = 0
    best_params = params

    for epoch in range(1, config.epochs + 1):
        order = np.arange(n)
        if config.shuffle:
            shuffle_rng.shuffle(order)
        epoch_loss = 0.0
        epoch_correct = 0
        for step, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            batch, labels = _stack_batch(train_data, idx)
            drop_rng = np.random.default_rng(
                np.random.SeedSequence(config.seed, spawn_key=(epoch, step)))
            logits, cache = forward(spec, params, batch, mode="train",
                                    rng=drop_rng)
            loss, probs, grad_logits = softmax_cross_entropy(logits, labels)
            if not np.isfinite(loss):
                raise DivergenceError(epoch, step, loss)
            epoch_loss += loss * len(labels)
            epoch_correct += int((probs.data.argmax(axis=1) == labels).sum())
            grads = backward(spec, params, cache, grad_logits)
            params, velocity = sgd_step(params, grads, velocity, config)

        val_loss, val_acc = evaluate_dataset(spec, params, val_data,
                                             config.batch_size)
        train_acc = epoch_correct / n
        history.records.append(EpochRecord(
            epoch=epoch, train_loss=epoch_loss / n, train_acc=train_acc,
            val_loss=val_loss, val_acc=val_acc))
        if on_epoch is not None:
            on_epoch(history.records[-1])
        if len(val_data) > 0 and val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_params = params
        if _stop_at_train_acc is not None and train_acc >= _stop_at_train_acc:
            break

    if len(val_data) == 0:
        best_epoch = history.final().epoch
        best_params = params
    best = make_checkpoint(spec, best_params, TrainingMeta(
        epochs_completed=best_epoch, seed=config.seed,
        config_digest=config.digest()))
    final = make_checkpoint(spec, params, TrainingMeta(
        epochs_completed=history.final().epoch, seed=config.seed,
        config_digest=config.digest()))
    return TrainResult(best=best, final=final, history=history)


@dataclass
class ProbeResult:
    history: TrainingHistory
    memorized: bool
    epochs_to_memorize: int | None


def overfit_probe(spec_scaled: NetworkSpec, dataset,
                  config: TrainingConfig) -> ProbeResult:
    """Sanity harness: a width-reduced network must memorize a tiny set.

    Initializes from scratch with the config seed and trains until
    training accuracy hits 100% or the epoch budget runs out. Dropout
    rates are forced to 0 so the probe is a pure function of the seed
    (and so zero-learning-rate runs have constant loss).
    """
    if len(dataset) > 16:
        raise ContractViolation(
            f"overfit probe takes at most 16 samples, got {len(dataset)}")
    from dataclasses import replace
    probe_spec = NetworkSpec(
        spec_scaled.input_size,
        tuple(replace(l, rate=0.0) if l.kind == "dropout" else l
              for l in spec_scaled.layers),
        spec_scaled.num_classes)
    params = init_params(probe_spec, config.seed)
    result = train(probe_spec, params, dataset, [], config,
                   _stop_at_train_acc=1.0)
    history = result.history
    hit = next((r.epoch for r in history.records if r.train_acc >= 1.0), None)
    return ProbeResult(history=history, memorized=hit is not None,
                       epochs_to_memorize=hit)
