"""Burn wound image classification toolkit.

From-scratch CNN primitives, a canonical AlexNet stack with
transfer-learning surgery, a deterministic data pipeline with
16-variant augmentation, an SGD fine-tuning loop, and full classifier
evaluation (confusion matrix, precision/recall/F1, ROC/AUC).
"""
from .tensor import Tensor
from .ops import ConvParams, LrnParams
from .network import (LayerSpec, NetworkSpec, ParameterSet, build_alexnet,
                      build_reduced_alexnet, forward, backward,
                      transfer_surgery)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import (DatasetManifest, Sample, SplitAssignment, load_manifest,
                   map_binary_label, split_binary, split_three_class,
                   enumerate_variants, augment_split)
from .images import PreparedImage, prepare_image
from .trainer import (TrainingConfig, TrainingHistory, train, sgd_step,
                      overfit_probe, binary_preset, three_class_preset)
from .metrics import (ConfusionMatrix, EvalReport, RocCurve, confusion,
                      accuracy, precision, recall, f1, roc_and_auc, evaluate)

__version__ = "0.1.0"

__all__ = [
    "Tensor", "ConvParams", "LrnParams",
    "LayerSpec", "NetworkSpec", "ParameterSet",
    "build_alexnet", "build_reduced_alexnet", "forward", "backward",
    "transfer_surgery",
    "Checkpoint", "load_checkpoint", "save_checkpoint",
    "DatasetManifest", "Sample", "SplitAssignment", "load_manifest",
    "map_binary_label", "split_binary", "split_three_class",
    "enumerate_variants", "augment_split",
    "PreparedImage", "prepare_image",
    "TrainingConfig", "TrainingHistory", "train", "sgd_step",
    "overfit_probe", "binary_preset", "three_class_preset",
    "ConfusionMatrix", "EvalReport", "RocCurve", "confusion", "accuracy",
    "precision", "recall", "f1", "roc_and_auc", "evaluate",
]
