"""Meta-learned unlearning loss.

A small MLP maps per-sample classifier outputs (logits, penultimate features,
an identity embedding, and the ground-truth targets) to a non-negative scalar.
Unlearning is a single gradient step of the classifier against the mean of
that scalar over the support set. The MLP is trained bilevel-style: simulate
an unlearning request, take the inner step, measure how well the forget-set
loss aligns with unseen-data loss, and backpropagate through the inner step
(second order) into the MLP parameters.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .classifier import (
    DTYPE,
    ClassifierState,
    as_feature_tensor,
    as_label_tensor,
    forward_params,
    task_loss,
)
from .data import MULTI_LABEL, Dataset, SplitBundle
from .evaluation import score_from_logits

log = logging.getLogger(__name__)

AUX_TERMS = ("first", "second", "both")
KERNELS = ("squared", "smooth-l1")


@dataclass(frozen=True)
class MetaInputs:
    """Which classifier outputs feed the meta-loss (one row of the input ablation)."""

    logits: bool = True
    features: bool = True
    identity: bool = True
    targets: bool = True

    def width(self, num_outputs: int, feature_dim: int, embed_dim: int) -> int:
        return (
            num_outputs * self.logits
            + feature_dim * self.features
            + embed_dim * self.identity
            + num_outputs * self.targets
        )


@dataclass(frozen=True)
class AuxLossConfig:
    """Term selection and scaling of the outer (unlearning-quality) objective."""

    terms: str = "both"
    accuracy_scaling: bool = True
    kernel: str = "squared"

    def __post_init__(self) -> None:
        if self.terms not in AUX_TERMS:
            raise ValueError(f"terms must be one of {AUX_TERMS}")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}")


@dataclass(frozen=True)
class MetaTrainConfig:
    epochs: int = 3
    outer_lr: float = 1e-3
    inner_lr: float = 0.1
    hidden: int = 64
    embed_dim: int = 16
    dropout: float = 0.5
    inputs: MetaInputs = field(default_factory=MetaInputs)
    aux: AuxLossConfig = field(default_factory=AuxLossConfig)
    seed: int = 0
    amsgrad: bool = True
    cosine_schedule: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("outer_lr", "inner_lr"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must lie in [0, 1)")


@dataclass(eq=False)
class MetaLossState:
    """Parameters of the meta-loss network plus its wiring metadata."""

    inputs: MetaInputs
    hidden: int
    embed_dim: int
    dropout: float
    eta: float
    train_identities: tuple[int, ...]
    num_outputs: int
    feature_dim: int
    task_kind: str
    params: dict[str, torch.Tensor]
    outer_lr: float = 0.0

    def __post_init__(self) -> None:
        if self.input_width == 0:
            raise ValueError("at least one meta-loss input must be enabled")
        if tuple(self.params["embed.weight"].shape) != (len(self.train_identities), self.embed_dim):
            raise ValueError("identity embedding table shape mismatch")
        if tuple(self.params["enc.weight"].shape) != (self.hidden, self.input_width):
            raise ValueError("encoder width does not match the enabled inputs")

    @property
    def input_width(self) -> int:
        return self.inputs.width(self.num_outputs, self.feature_dim, self.embed_dim)

    def identity_row(self) -> dict[int, int]:
        return {ident: row for row, ident in enumerate(self.train_identities)}

    def detached(self) -> "MetaLossState":
        return replace(self, params={k: v.detach().clone() for k, v in self.params.items()})


def init_metaloss(
    classifier_arch,
    train_identities,
    cfg: MetaTrainConfig,
) -> MetaLossState:
    """Deterministic initialization; linear layers uniform, embeddings normal."""
    train_identities = tuple(sorted(int(i) for i in train_identities))
    width = cfg.inputs.width(
        classifier_arch.num_outputs, classifier_arch.embedding_dim, cfg.embed_dim
    )
    if width == 0:
        raise ValueError("at least one meta-loss input must be enabled")
    generator = torch.Generator().manual_seed(cfg.seed)

    def uniform(shape: tuple[int, ...], fan_in: int) -> torch.Tensor:
        bound = 1.0 / math.sqrt(fan_in)
        return (torch.rand(shape, generator=generator, dtype=DTYPE) * 2 - 1) * bound

    h = cfg.hidden
    params = {
        "enc.weight": uniform((h, width), width),
        "enc.bias": uniform((h,), width),
        "ln1.weight": torch.ones(h, dtype=DTYPE),
        "ln1.bias": torch.zeros(h, dtype=DTYPE),
        "mid.weight": uniform((h, h), h),
        "mid.bias": uniform((h,), h),
        "ln2.weight": torch.ones(h, dtype=DTYPE),
        "ln2.bias": torch.zeros(h, dtype=DTYPE),
        "out.weight": uniform((1, h), h),
        "out.bias": uniform((1,), h),
        "embed.weight": torch.randn(
            (len(train_identities), cfg.embed_dim), generator=generator, dtype=DTYPE
        ),
    }
    return MetaLossState(
        inputs=cfg.inputs,
        hidden=h,
        embed_dim=cfg.embed_dim,
        dropout=cfg.dropout,
        eta=cfg.inner_lr,
        train_identities=train_identities,
        num_outputs=classifier_arch.num_outputs,
        feature_dim=classifier_arch.embedding_dim,
        task_kind=classifier_arch.task_kind,
        params=params,
    )


def _dropout(
    x: torch.Tensor, p: float, training: bool, generator: torch.Generator | None
) -> torch.Tensor:
    if not training or p == 0.0:
        return x
    mask = (torch.rand(x.shape, generator=generator, dtype=x.dtype) >= p).to(x.dtype)
    return x * mask / (1.0 - p)


def _meta_net(
    meta: MetaLossState,
    inputs: torch.Tensor,
    *,
    training: bool,
    dropout_generator: torch.Generator | None,
) -> torch.Tensor:
    """Per-sample non-negative scalars for a (n, input_width) batch."""
    p = meta.params
    x = inputs @ p["enc.weight"].T + p["enc.bias"]
    x = torch.nn.functional.layer_norm(x, (meta.hidden,), p["ln1.weight"], p["ln1.bias"])
    x = x @ p["mid.weight"].T + p["mid.bias"]
    x = torch.nn.functional.gelu(x)
    x = _dropout(x, meta.dropout, training, dropout_generator)
    x = torch.nn.functional.layer_norm(x, (meta.hidden,), p["ln2.weight"], p["ln2.bias"])
    x = x @ p["out.weight"].T + p["out.bias"]
    return torch.nn.functional.softplus(x).squeeze(-1)


def _targets_as_float(batch, num_outputs: int, task_kind: str) -> torch.Tensor:
    labels = as_label_tensor(batch.labels, task_kind)
    if task_kind == MULTI_LABEL:
        return labels
    return torch.nn.functional.one_hot(labels, num_classes=num_outputs).to(DTYPE)


def metaloss_forward(
    meta: MetaLossState,
    classifier: ClassifierState,
    batch,
    *,
    classifier_params: dict[str, torch.Tensor] | None = None,
    training: bool = False,
    dropout_generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Mean meta-loss over the batch; differentiable in both parameter sets."""
    params = classifier.params if classifier_params is None else classifier_params
    features, logits = forward_params(classifier.arch, params, as_feature_tensor(batch))
    pieces = []
    if meta.inputs.logits:
        pieces.append(logits)
    if meta.inputs.features:
        pieces.append(features)
    if meta.inputs.identity:
        row_of = meta.identity_row()
        try:
            rows = torch.as_tensor([row_of[int(i)] for i in batch.identities])
        except KeyError as err:
            raise ValueError(f"identity {err} has no embedding row") from None
        pieces.append(meta.params["embed.weight"][rows])
    if meta.inputs.targets:
        pieces.append(_targets_as_float(batch, meta.num_outputs, meta.task_kind))
    if not pieces:
        raise ValueError("all meta-loss inputs are disabled")
    per_sample = _meta_net(
        meta,
        torch.cat(pieces, dim=1),
        training=training,
        dropout_generator=dropout_generator,
    )
    return per_sample.mean()


def unlearn_step(
    classifier: ClassifierState,
    meta: MetaLossState,
    support,
    *,
    create_graph: bool = False,
    training: bool = False,
    dropout_generator: torch.Generator | None = None,
) -> ClassifierState:
    """One gradient step of the classifier against the meta-loss on the support.

    With create_graph the returned parameters keep their differentiable
    dependence on the meta-loss parameters, which is what meta-training
    backpropagates through.
    """
    theta = {k: v.detach().clone().requires_grad_(True) for k, v in classifier.params.items()}
    objective = metaloss_forward(
        meta,
        classifier,
        support,
        classifier_params=theta,
        training=training,
        dropout_generator=dropout_generator,
    )
    if objective.requires_grad:
        grads = torch.autograd.grad(
            objective, list(theta.values()), create_graph=create_graph, allow_unused=True
        )
    else:
        # objective is constant in every parameter (theta-independent inputs)
        grads = [None] * len(theta)
    updated: dict[str, torch.Tensor] = {}
    for (name, tensor), grad in zip(theta.items(), grads):
        if grad is None:
            grad = torch.zeros_like(tensor)
        elif not torch.isfinite(grad).all():
            raise RuntimeError(f"non-finite unlearning gradient in {name}")
        updated[name] = tensor - meta.eta * grad
    return ClassifierState(
        arch=classifier.arch,
        params=updated,
        seed=classifier.seed,
        epochs_trained=classifier.epochs_trained,
    )


def apply_unlearning(classifier: ClassifierState, meta: MetaLossState, support) -> ClassifierState:
    """Forget every identity in the support at once, in a single update.

    Reads nothing but the support samples and the model parameters; dropout
    is disabled so the result is deterministic.
    """
    return unlearn_step(classifier, meta, support, create_graph=False, training=False).clone()


def _kernel(diff: torch.Tensor, kind: str) -> torch.Tensor:
    if kind == "squared":
        return diff * diff
    absd = diff.abs()
    return torch.where(absd < 1.0, 0.5 * diff * diff, absd - 0.5)


def alignment_terms(
    loss_f_u: torch.Tensor,
    loss_v_u: torch.Tensor,
    loss_v_o: torch.Tensor,
    cfg: AuxLossConfig,
) -> torch.Tensor:
    """Combine the (possibly pre-scaled) scalar losses into the outer objective."""
    total = torch.zeros((), dtype=DTYPE)
    if cfg.terms in ("first", "both"):
        total = total + _kernel(loss_f_u - loss_v_u, cfg.kernel)
    if cfg.terms in ("second", "both"):
        total = total + _kernel(loss_f_u - loss_v_o, cfg.kernel)
    return total


def auxiliary_loss(
    theta_u: ClassifierState,
    theta: ClassifierState,
    d_f,
    d_v,
    cfg: AuxLossConfig,
) -> torch.Tensor:
    """Alignment of forget-set loss with unseen-data loss after unlearning.

    First term compares the forget and validation losses of the unlearned
    model; the second compares the forget loss of the unlearned model with
    the validation loss of the original model (held constant). With accuracy
    scaling each loss is premultiplied by one minus the performance of its
    own (dataset, parameters) pair, as a constant factor.
    """
    if len(d_f) == 0 or len(d_v) == 0:
        raise ValueError("d_f and d_v must be non-empty")
    arch = theta_u.arch
    xf, yf = as_feature_tensor(d_f), as_label_tensor(d_f.labels, arch.task_kind)
    xv, yv = as_feature_tensor(d_v), as_label_tensor(d_v.labels, arch.task_kind)

    _, logits_f_u = forward_params(arch, theta_u.params, xf)
    _, logits_v_u = forward_params(arch, theta_u.params, xv)
    with torch.no_grad():
        _, logits_v_o = forward_params(arch, theta.params, xv)

    loss_f_u = task_loss(logits_f_u, yf, arch.task_kind)
    loss_v_u = task_loss(logits_v_u, yv, arch.task_kind)
    loss_v_o = task_loss(logits_v_o, yv, arch.task_kind)

    if cfg.accuracy_scaling:

        def one_minus_perf(logits: torch.Tensor, labels) -> float:
            # performance is undefined when no attribute has a positive;
            # fall back to an unscaled operand rather than aborting
            try:
                return 1.0 - score_from_logits(logits.detach().numpy(), labels, arch.task_kind)
            except ValueError:
                return 1.0

        loss_f_u = one_minus_perf(logits_f_u, d_f.labels) * loss_f_u
        loss_v_u = one_minus_perf(logits_v_u, d_v.labels) * loss_v_u
        loss_v_o = one_minus_perf(logits_v_o, d_v.labels) * loss_v_o

    return alignment_terms(loss_f_u, loss_v_u, loss_v_o, cfg)


def epoch_request_plan(identities, n_s: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle identities and cut them into without-replacement chunks of n_s."""
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    ids = np.asarray(sorted(int(i) for i in identities), dtype=np.int64)
    order = ids[rng.permutation(len(ids))]
    return [order[start : start + n_s] for start in range(0, len(order), n_s)]


def simulate_request(
    d_tr: Dataset, chunk: np.ndarray, rng: np.random.Generator
) -> tuple[Dataset, Dataset]:
    """Withhold one support sample per identity in `chunk`; rest is the forget set.

    Identities left with a single training sample contribute only a support
    sample (their simulated forget slice is empty).
    """
    support_positions: list[int] = []
    forget_positions: list[int] = []
    index = d_tr.identity_index
    for ident in chunk:
        positions = index.get(int(ident))
        if positions is None or len(positions) == 0:
            raise ValueError(f"identity {int(ident)} has no training samples")
        pick = int(positions[rng.integers(len(positions))])
        support_positions.append(pick)
        forget_positions.extend(int(p) for p in positions if p != pick)
    support = d_tr.subset(np.asarray(sorted(support_positions), dtype=np.int64))
    forget = d_tr.subset(np.asarray(sorted(forget_positions), dtype=np.int64))
    return support, forget


def _identity_hash(chunk: np.ndarray) -> str:
    return hashlib.sha1(",".join(str(int(i)) for i in chunk).encode()).hexdigest()[:10]


def meta_train(
    classifier: ClassifierState,
    bundle: SplitBundle,
    n_s: int,
    cfg: MetaTrainConfig,
) -> MetaLossState:
    """Train the meta-loss by simulating unlearning requests on the training set.

    Every epoch consumes all training identities in without-replacement
    chunks of n_s. Each chunk is unlearned with one inner step, scored by the
    auxiliary loss on the simulated forget set and the validation set, and the
    error is backpropagated through the inner step into the meta parameters,
    which are updated with AMSGrad Adam under cosine-annealed learning rate.
    """
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    meta = init_metaloss(classifier.arch, bundle.i_tr, cfg)
    if cfg.epochs == 0:
        return meta

    for tensor in meta.params.values():
        tensor.requires_grad_(True)
    phi = list(meta.params.values())

    rng = np.random.default_rng(cfg.seed)
    dropout_generator = torch.Generator().manual_seed(cfg.seed)
    requests_per_epoch = math.ceil(len(bundle.i_tr) / n_s)
    total_steps = cfg.epochs * requests_per_epoch

    optimizer = torch.optim.Adam(phi, lr=cfg.outer_lr, amsgrad=cfg.amsgrad)
    scheduler = (
        torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=total_steps)
        if cfg.cosine_schedule
        else None
    )

    for epoch in range(cfg.epochs):
        for request_idx, chunk in enumerate(epoch_request_plan(bundle.i_tr, n_s, rng)):
            support, d_f = simulate_request(bundle.d_tr, chunk, rng)
            if len(d_f) == 0:
                raise RuntimeError(
                    f"simulated request has an empty forget set "
                    f"(seed {cfg.seed}, identities {chunk.tolist()})"
                )
            theta_u = unlearn_step(
                classifier,
                meta,
                support,
                create_graph=True,
                training=True,
                dropout_generator=dropout_generator,
            )
            aux = auxiliary_loss(theta_u, classifier, d_f, bundle.d_v, cfg.aux)
            if not torch.isfinite(aux):
                raise RuntimeError(
                    f"non-finite auxiliary loss at epoch {epoch} request {request_idx} "
                    f"(seed {cfg.seed}, identities {chunk.tolist()})"
                )
            grads = torch.autograd.grad(aux, phi, allow_unused=True)
            optimizer.zero_grad()
            for tensor, grad in zip(phi, grads):
                tensor.grad = torch.zeros_like(tensor) if grad is None else grad
            optimizer.step()
            if scheduler is not None:
                scheduler.step()
            log.info(
                "epoch=%d request=%d aux=%.6g ids=%s",
                epoch,
                request_idx,
                float(aux.detach()),
                _identity_hash(chunk),
            )

    return meta.detached()


def save_metaloss(meta: MetaLossState, path) -> None:
    torch.save(
        {
            "inputs": {
                "logits": meta.inputs.logits,
                "features": meta.inputs.features,
                "identity": meta.inputs.identity,
                "targets": meta.inputs.targets,
            },
            "hidden": meta.hidden,
            "embed_dim": meta.embed_dim,
            "dropout": meta.dropout,
            "eta": meta.eta,
            "train_identities": list(meta.train_identities),
            "num_outputs": meta.num_outputs,
            "feature_dim": meta.feature_dim,
            "task_kind": meta.task_kind,
            "params": {k: v.detach().clone() for k, v in meta.params.items()},
        },
        path,
    )


def load_metaloss(path) -> MetaLossState:
    payload = torch.load(path, weights_only=True)
    return MetaLossState(
        inputs=MetaInputs(**payload["inputs"]),
        hidden=payload["hidden"],
        embed_dim=payload["embed_dim"],
        dropout=payload["dropout"],
        eta=payload["eta"],
        train_identities=tuple(payload["train_identities"]),
        num_outputs=payload["num_outputs"],
        feature_dim=payload["feature_dim"],
        task_kind=payload["task_kind"],
        params=payload["params"],
    )
