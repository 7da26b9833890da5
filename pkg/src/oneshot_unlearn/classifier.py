"""Downstream classifier: a small feed-forward network in double precision.

The forward pass is written functionally over a plain dict of parameter
tensors so gradients can flow through parameters themselves; this is what the
one-step unlearning update differentiates through. The penultimate hidden
activations double as the feature embedding used by the meta-loss and by the
distance analyses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import torch

from .data import MULTI_LABEL, TASK_KINDS, Dataset

DTYPE = torch.float64


@dataclass(frozen=True)
class Architecture:
    """Layer widths of the classifier; feature_dim -> hidden -> num_outputs."""

    feature_dim: int
    num_outputs: int
    hidden: tuple[int, ...] = (64, 32)
    task_kind: str = MULTI_LABEL

    def __post_init__(self) -> None:
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task_kind {self.task_kind!r}")
        if not self.hidden:
            raise ValueError("at least one hidden layer is required")

    @property
    def embedding_dim(self) -> int:
        """Width of the penultimate features exposed by the forward pass."""
        return self.hidden[-1]

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        widths = (self.feature_dim, *self.hidden)
        for i in range(len(self.hidden)):
            shapes[f"layer{i}.weight"] = (widths[i + 1], widths[i])
            shapes[f"layer{i}.bias"] = (widths[i + 1],)
        shapes["head.weight"] = (self.num_outputs, self.hidden[-1])
        shapes["head.bias"] = (self.num_outputs,)
        return shapes


@dataclass(eq=False)
class ClassifierState:
    """Parameters plus metadata; params may be graph tensors mid-meta-step."""

    arch: Architecture
    params: dict[str, torch.Tensor]
    seed: int
    epochs_trained: int = 0

    def __post_init__(self) -> None:
        expected = self.arch.parameter_shapes()
        if set(self.params) != set(expected):
            raise ValueError("parameter names do not match the architecture")
        for name, shape in expected.items():
            if tuple(self.params[name].shape) != shape:
                raise ValueError(f"parameter {name} has shape {tuple(self.params[name].shape)}, expected {shape}")

    def clone(self) -> "ClassifierState":
        return replace(self, params={k: v.detach().clone() for k, v in self.params.items()})


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.0
    batch_size: int = 64
    seed: int = 0
    warmup_epochs: int = 2
    cosine_schedule: bool = True

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lr) and self.lr > 0):
            raise ValueError("lr must be positive and finite")
        if self.momentum < 0 or not math.isfinite(self.momentum):
            raise ValueError("momentum must be non-negative and finite")
        if self.weight_decay < 0 or not math.isfinite(self.weight_decay):
            raise ValueError("weight_decay must be non-negative and finite")
        if self.batch_size < 1 or self.epochs < 0 or self.warmup_epochs < 0:
            raise ValueError("epochs/batch_size/warmup_epochs out of range")


def init_classifier(arch: Architecture, seed: int) -> ClassifierState:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init, deterministic in seed."""
    generator = torch.Generator().manual_seed(seed)
    shapes = arch.parameter_shapes()
    params: dict[str, torch.Tensor] = {}
    for name, shape in shapes.items():
        fan_in = shapes[name.replace("bias", "weight")][1]
        bound = 1.0 / math.sqrt(fan_in)
        params[name] = (torch.rand(shape, generator=generator, dtype=DTYPE) * 2 - 1) * bound
    return ClassifierState(arch=arch, params=params, seed=seed, epochs_trained=0)


def as_feature_tensor(batch) -> torch.Tensor:
    """Accept a Dataset(-like), numpy array, or tensor; return (n, F) float64."""
    if hasattr(batch, "features") and not isinstance(batch, (np.ndarray, torch.Tensor)):
        batch = batch.features
    if isinstance(batch, torch.Tensor):
        return batch.to(DTYPE)
    return torch.as_tensor(np.asarray(batch), dtype=DTYPE)


def as_label_tensor(labels, task_kind: str) -> torch.Tensor:
    if isinstance(labels, torch.Tensor):
        tensor = labels
    else:
        tensor = torch.as_tensor(np.asarray(labels))
    return tensor.to(DTYPE) if task_kind == MULTI_LABEL else tensor.to(torch.long)


def forward_params(
    arch: Architecture, params: dict[str, torch.Tensor], inputs: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Differentiable forward; returns (features, logits)."""
    if inputs.shape[-1] != arch.feature_dim:
        raise ValueError(f"expected feature dimension {arch.feature_dim}, got {inputs.shape[-1]}")
    hidden = inputs
    for i in range(len(arch.hidden)):
        hidden = torch.nn.functional.gelu(
            hidden @ params[f"layer{i}.weight"].T + params[f"layer{i}.bias"]
        )
    logits = hidden @ params["head.weight"].T + params["head.bias"]
    return hidden, logits


def forward(state: ClassifierState, batch) -> tuple[np.ndarray, np.ndarray]:
    """Inference-mode forward pass; returns (features, logits) as numpy arrays."""
    inputs = as_feature_tensor(batch)
    with torch.no_grad():
        features, logits = forward_params(state.arch, state.params, inputs)
    return features.numpy(), logits.numpy()


def task_loss(logits: torch.Tensor, labels: torch.Tensor, task_kind: str) -> torch.Tensor:
    """Mean BCE over samples and attributes (multi-label) or mean CE (multi-class)."""
    if torch.isnan(logits).any():
        raise ValueError("logits contain NaN")
    if task_kind == MULTI_LABEL:
        if logits.shape != labels.shape:
            raise ValueError("logits and labels shapes disagree")
        return torch.nn.functional.binary_cross_entropy_with_logits(logits, labels.to(DTYPE))
    if logits.shape[0] != labels.shape[0]:
        raise ValueError("logits and labels shapes disagree")
    return torch.nn.functional.cross_entropy(logits, labels.to(torch.long))


def dataset_loss(state: ClassifierState, dataset) -> float:
    """Mean task loss of a dataset under `state`, as a float."""
    inputs = as_feature_tensor(dataset)
    labels = as_label_tensor(dataset.labels, state.arch.task_kind)
    with torch.no_grad():
        _, logits = forward_params(state.arch, state.params, inputs)
        return float(task_loss(logits, labels, state.arch.task_kind))


def _epoch_lr(cfg: TrainConfig, epoch: int) -> float:
    if cfg.warmup_epochs and epoch < cfg.warmup_epochs:
        return cfg.lr * (epoch + 1) / cfg.warmup_epochs
    if not cfg.cosine_schedule:
        return cfg.lr
    span = max(cfg.epochs - cfg.warmup_epochs, 1)
    progress = (epoch - cfg.warmup_epochs) / span
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def train(init: ClassifierState, data: Dataset, cfg: TrainConfig) -> ClassifierState:
    """SGD-with-momentum minimization of the task loss; returns a new state.

    Deterministic given cfg.seed; the input state is left untouched. Aborts
    with a diagnostic if the loss turns non-finite.
    """
    if len(data) == 0:
        raise ValueError("training data is empty")
    state = init.clone()
    if cfg.epochs == 0:
        return state

    params = {k: v.requires_grad_(True) for k, v in state.params.items()}
    optimizer = torch.optim.SGD(
        list(params.values()),
        lr=cfg.lr,
        momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
    )
    inputs = as_feature_tensor(data)
    labels = as_label_tensor(data.labels, init.arch.task_kind)
    rng = np.random.default_rng(cfg.seed)

    for epoch in range(cfg.epochs):
        lr = _epoch_lr(cfg, epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        order = rng.permutation(len(data))
        for start in range(0, len(data), cfg.batch_size):
            batch = torch.as_tensor(order[start : start + cfg.batch_size])
            optimizer.zero_grad()
            _, logits = forward_params(init.arch, params, inputs[batch])
            try:
                loss = task_loss(logits, labels[batch], init.arch.task_kind)
            except ValueError as err:
                raise RuntimeError(
                    f"training diverged: {err} at epoch {epoch} (seed {cfg.seed})"
                ) from None
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch} (seed {cfg.seed})"
                )
            loss.backward()
            optimizer.step()

    trained = {k: v.detach().clone() for k, v in params.items()}
    return ClassifierState(
        arch=init.arch, params=trained, seed=cfg.seed, epochs_trained=cfg.epochs
    )


def retrain_oracle(
    bundle, request, cfg: TrainConfig, arch: Architecture | None = None
) -> ClassifierState:
    """Train from scratch on the retain set only; the gold-standard reference."""
    if len(request.d_r) == 0:
        raise ValueError("retain set is empty; cannot retrain")
    if arch is None:
        arch = Architecture(
            feature_dim=request.d_r.feature_dim,
            num_outputs=request.d_r.num_labels,
            task_kind=request.d_r.task_kind,
        )
    return train(init_classifier(arch, cfg.seed), request.d_r, cfg)


def save_classifier(state: ClassifierState, path) -> None:
    torch.save(
        {
            "arch": {
                "feature_dim": state.arch.feature_dim,
                "num_outputs": state.arch.num_outputs,
                "hidden": list(state.arch.hidden),
                "task_kind": state.arch.task_kind,
            },
            "params": {k: v.detach().clone() for k, v in state.params.items()},
            "seed": state.seed,
            "epochs_trained": state.epochs_trained,
        },
        path,
    )


def load_classifier(path) -> ClassifierState:
    payload = torch.load(path, weights_only=True)
    arch = Architecture(
        feature_dim=payload["arch"]["feature_dim"],
        num_outputs=payload["arch"]["num_outputs"],
        hidden=tuple(payload["arch"]["hidden"]),
        task_kind=payload["arch"]["task_kind"],
    )
    return ClassifierState(
        arch=arch,
        params=payload["params"],
        seed=payload["seed"],
        epochs_trained=payload["epochs_trained"],
    )
