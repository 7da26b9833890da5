"""Reference unlearning procedures runnable under the same one-shot constraints.

Three comparison rows: returning the pretrained model untouched, the
retrain-from-scratch oracle, and gradient ascent of the task loss on the
support set (the minimal data-free competitor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .classifier import (
    ClassifierState,
    TrainConfig,
    as_feature_tensor,
    as_label_tensor,
    forward_params,
    retrain_oracle,
    task_loss,
)

BASELINE_KINDS = ("pretrain-noop", "retrain-oracle", "neg-grad-support")


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    steps: int = 1
    step_size: float = 0.05

    def __post_init__(self) -> None:
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"kind must be one of {BASELINE_KINDS}")
        if self.kind == "neg-grad-support":
            if self.steps < 1:
                raise ValueError("neg-grad-support needs steps >= 1")
            if not (math.isfinite(self.step_size) and self.step_size > 0):
                raise ValueError("neg-grad-support needs a positive step size")


def _neg_grad_on_support(
    classifier: ClassifierState, support, steps: int, step_size: float
) -> ClassifierState:
    """Gradient ascent of the task loss on the support samples only."""
    params = {k: v.detach().clone().requires_grad_(True) for k, v in classifier.params.items()}
    inputs = as_feature_tensor(support)
    labels = as_label_tensor(support.labels, classifier.arch.task_kind)
    for _ in range(steps):
        _, logits = forward_params(classifier.arch, params, inputs)
        loss = task_loss(logits, labels, classifier.arch.task_kind)
        grads = torch.autograd.grad(loss, list(params.values()))
        with torch.no_grad():
            for (name, tensor), grad in zip(params.items(), grads):
                tensor += step_size * grad
    return ClassifierState(
        arch=classifier.arch,
        params={k: v.detach().clone() for k, v in params.items()},
        seed=classifier.seed,
        epochs_trained=classifier.epochs_trained,
    )


def run_baseline(
    spec: BaselineSpec,
    classifier: ClassifierState,
    request,
    bundle,
    cfg: TrainConfig,
) -> ClassifierState:
    """Run one baseline; support-only kinds read nothing but request.support."""
    if spec.kind == "pretrain-noop":
        return classifier.clone()
    if spec.kind == "retrain-oracle":
        return retrain_oracle(bundle, request, cfg, arch=classifier.arch)
    return _neg_grad_on_support(classifier, request.support, spec.steps, spec.step_size)
