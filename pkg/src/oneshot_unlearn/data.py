"""Identity-structured synthetic data.

Samples are grouped by identity: every identity has a latent prototype, its
samples are noisy copies of that prototype, and its attribute labels derive
from a fixed random linear map of the prototype (so labels are identity
consistent up to per-sample label noise). On top of the generator this module
provides identity-disjoint train/val/test splits and the construction of
unlearning requests, where one sample per forget identity is withheld into a
support set that the trained model never sees.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

TASK_KINDS = ("multi-label", "multi-class")

MULTI_LABEL = "multi-label"
MULTI_CLASS = "multi-class"


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the synthetic identity dataset."""

    num_identities: int = 200
    samples_per_identity: int = 10
    feature_dim: int = 16
    num_labels: int = 8
    task_kind: str = MULTI_LABEL
    prototype_scale: float = 1.0
    sample_noise: float = 0.25
    label_noise: float = 0.1


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    labels: np.ndarray | int
    identity: int
    sample_id: int


@dataclass(eq=False)
class Dataset:
    """Columnar store of (features, labels, identity, sample_id) records.

    `labels` is an (N, C) array of {0,1} in multi-label mode and an (N,)
    array of class indices in multi-class mode; `num_labels` always carries C
    explicitly because subsets may not exhibit every class.
    """

    features: np.ndarray
    labels: np.ndarray
    identities: np.ndarray
    sample_ids: np.ndarray
    task_kind: str
    num_labels: int

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        self.identities = np.asarray(self.identities, dtype=np.int64)
        self.sample_ids = np.asarray(self.sample_ids, dtype=np.int64)
        n = self.features.shape[0]
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite entries")
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task_kind {self.task_kind!r}")
        if self.task_kind == MULTI_LABEL:
            if self.labels.shape != (n, self.num_labels):
                raise ValueError("multi-label labels must have shape (N, C)")
            if not np.isin(self.labels, (0, 1)).all():
                raise ValueError("multi-label labels must be 0/1")
        else:
            if self.labels.shape != (n,):
                raise ValueError("multi-class labels must have shape (N,)")
            if n and (self.labels.min() < 0 or self.labels.max() >= self.num_labels):
                raise ValueError("class index out of range")
        if self.identities.shape != (n,) or self.sample_ids.shape != (n,):
            raise ValueError("identities/sample_ids must have shape (N,)")
        if n and self.identities.min() < 0:
            raise ValueError("identity ids must be non-negative")
        if len(np.unique(self.sample_ids)) != n:
            raise ValueError("sample_ids must be unique")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def identity_index(self) -> dict[int, np.ndarray]:
        """Map identity -> ascending row positions; covers each row once."""
        index: dict[int, list[int]] = {}
        for pos, ident in enumerate(self.identities):
            index.setdefault(int(ident), []).append(pos)
        return {k: np.asarray(v, dtype=np.int64) for k, v in index.items()}

    def subset(self, positions: np.ndarray) -> "Dataset":
        positions = np.asarray(positions, dtype=np.int64)
        return Dataset(
            features=self.features[positions],
            labels=self.labels[positions],
            identities=self.identities[positions],
            sample_ids=self.sample_ids[positions],
            task_kind=self.task_kind,
            num_labels=self.num_labels,
        )

    def sample(self, position: int) -> Sample:
        label = self.labels[position]
        return Sample(
            features=self.features[position],
            labels=label.copy() if isinstance(label, np.ndarray) else int(label),
            identity=int(self.identities[position]),
            sample_id=int(self.sample_ids[position]),
        )


@dataclass(eq=False)
class SplitBundle:
    """Identity-disjoint train/validation/test datasets plus their id sets."""

    d_tr: Dataset
    d_v: Dataset
    d_te: Dataset
    i_tr: tuple[int, ...]
    i_v: tuple[int, ...]
    i_te: tuple[int, ...]

    def __post_init__(self) -> None:
        tr, v, te = set(self.i_tr), set(self.i_v), set(self.i_te)
        if tr & v or tr & te or v & te:
            raise ValueError("split identity sets must be pairwise disjoint")
        for ds, ids in ((self.d_tr, tr), (self.d_v, v), (self.d_te, te)):
            if not set(np.unique(ds.identities)).issubset(ids):
                raise ValueError("sample identity outside its split's identity set")

    def with_train(self, d_tr: Dataset) -> "SplitBundle":
        """Same bundle with the training dataset replaced (e.g. support removed)."""
        return replace(self, d_tr=d_tr)


@dataclass(eq=False)
class UnlearningRequest:
    """Forget identities, their support set, and the induced forget/retain split."""

    i_f: tuple[int, ...]
    support: Dataset
    d_f: Dataset
    d_r: Dataset

    def __post_init__(self) -> None:
        forget = set(self.i_f)
        support_ids = [int(i) for i in self.support.identities]
        if len(self.support) != len(forget) or set(support_ids) != forget:
            raise ValueError("support must hold exactly one sample per forget identity")
        if len(set(support_ids)) != len(support_ids):
            raise ValueError("support holds multiple samples of one identity")
        s = set(self.support.sample_ids.tolist())
        if s & set(self.d_f.sample_ids.tolist()) or s & set(self.d_r.sample_ids.tolist()):
            raise ValueError("support samples must not appear in d_f or d_r")
        if not set(np.unique(self.d_f.identities)).issubset(forget):
            raise ValueError("d_f contains identities outside i_f")
        if set(np.unique(self.d_r.identities)) & forget:
            raise ValueError("d_r contains forget identities")


def generate_dataset(config: GeneratorConfig, seed: int) -> Dataset:
    """Draw an identity-clustered dataset; deterministic in (config, seed).

    Each identity k gets a prototype p_k ~ N(0, prototype_scale^2 I); its
    samples are p_k plus N(0, sample_noise^2 I) noise. Labels come from a
    fixed random linear map of p_k thresholded at 0 (multi-label) or taken at
    its argmax (multi-class), with a `label_noise` fraction of label entries
    resampled uniformly per sample.
    """
    if config.num_identities < 4:
        raise ValueError("num_identities must be >= 4")
    if config.samples_per_identity < 2:
        raise ValueError("samples_per_identity must be >= 2")
    if config.feature_dim < 2:
        raise ValueError("feature_dim must be >= 2")
    if config.num_labels < 1:
        raise ValueError("num_labels must be >= 1")
    if config.task_kind not in TASK_KINDS:
        raise ValueError(f"unknown task_kind {config.task_kind!r}")
    for name in ("prototype_scale", "sample_noise", "label_noise"):
        value = getattr(config, name)
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"{name} must be finite and non-negative")
    if config.label_noise > 1:
        raise ValueError("label_noise is a fraction in [0, 1]")

    k, m = config.num_identities, config.samples_per_identity
    f, c = config.feature_dim, config.num_labels
    n = k * m
    rng = np.random.default_rng(seed)

    prototypes = rng.normal(0.0, config.prototype_scale, size=(k, f))
    label_map = rng.normal(0.0, 1.0, size=(c, f))
    noise = rng.normal(0.0, 1.0, size=(n, f)) * config.sample_noise

    features = np.repeat(prototypes, m, axis=0) + noise
    identities = np.repeat(np.arange(k, dtype=np.int64), m)
    scores = prototypes @ label_map.T

    if config.task_kind == MULTI_LABEL:
        proto_labels = (scores > 0).astype(np.int8)
        labels = np.repeat(proto_labels, m, axis=0)
        resample = rng.random(size=(n, c)) < config.label_noise
        fresh = rng.integers(0, 2, size=(n, c), dtype=np.int8)
        labels = np.where(resample, fresh, labels)
    else:
        proto_labels = scores.argmax(axis=1).astype(np.int64)
        labels = np.repeat(proto_labels, m)
        resample = rng.random(size=n) < config.label_noise
        fresh = rng.integers(0, c, size=n, dtype=np.int64)
        labels = np.where(resample, fresh, labels)

    return Dataset(
        features=features,
        labels=labels,
        identities=identities,
        sample_ids=np.arange(n, dtype=np.int64),
        task_kind=config.task_kind,
        num_labels=c,
    )


def _largest_remainder_counts(total: int, fractions: tuple[float, ...]) -> list[int]:
    exact = [frac * total for frac in fractions]
    counts = [int(np.floor(x)) for x in exact]
    remainders = [x - c for x, c in zip(exact, counts)]
    leftover = total - sum(counts)
    order = sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def split_by_identity(
    dataset: Dataset, fractions: tuple[float, float, float], seed: int
) -> SplitBundle:
    """Partition identities (not samples) into train/val/test by `fractions`.

    Identities are shuffled with `seed` and partitioned with largest-remainder
    rounding; every sample follows its identity.
    """
    if len(fractions) != 3:
        raise ValueError("fractions must be (train, val, test)")
    if any(frac <= 0 for frac in fractions):
        raise ValueError("all split fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")

    ids = np.asarray(sorted(dataset.identity_index), dtype=np.int64)
    rng = np.random.default_rng(seed)
    permuted = ids[rng.permutation(len(ids))]
    counts = _largest_remainder_counts(len(ids), tuple(fractions))
    if any(count == 0 for count in counts):
        raise ValueError("a split received zero identities")

    slices = []
    start = 0
    for count in counts:
        slices.append(permuted[start : start + count])
        start += count

    def take(id_group: np.ndarray) -> Dataset:
        members = np.isin(dataset.identities, id_group)
        return dataset.subset(np.flatnonzero(members))

    i_tr, i_v, i_te = (tuple(sorted(int(i) for i in group)) for group in slices)
    return SplitBundle(
        d_tr=take(slices[0]),
        d_v=take(slices[1]),
        d_te=take(slices[2]),
        i_tr=i_tr,
        i_v=i_v,
        i_te=i_te,
    )


def build_unlearning_request(
    bundle: SplitBundle, n_s: int, seed: int
) -> tuple[UnlearningRequest, Dataset]:
    """Sample a forget request and withhold one support sample per identity.

    Returns the request plus the reduced training dataset with the support
    removed, so the support is unseen by any model trained on it.
    """
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    if n_s > len(bundle.i_tr):
        raise ValueError(f"n_s={n_s} exceeds the {len(bundle.i_tr)} training identities")

    rng = np.random.default_rng(seed)
    train_ids = np.asarray(bundle.i_tr, dtype=np.int64)
    chosen = rng.choice(train_ids, size=n_s, replace=False)

    d_tr = bundle.d_tr
    withheld = []
    for ident in chosen:
        positions = d_tr.identity_index[int(ident)]
        if len(positions) < 2:
            raise ValueError(f"identity {int(ident)} has fewer than 2 training samples")
        withheld.append(int(positions[rng.integers(len(positions))]))

    withheld_arr = np.asarray(sorted(withheld), dtype=np.int64)
    support = d_tr.subset(withheld_arr)

    keep = np.setdiff1d(np.arange(len(d_tr), dtype=np.int64), withheld_arr)
    reduced = d_tr.subset(keep)

    forget_mask = np.isin(reduced.identities, chosen)
    d_f = reduced.subset(np.flatnonzero(forget_mask))
    d_r = reduced.subset(np.flatnonzero(~forget_mask))

    request = UnlearningRequest(
        i_f=tuple(sorted(int(i) for i in chosen)),
        support=support,
        d_f=d_f,
        d_r=d_r,
    )
    return request, reduced


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset to a single .npz file; round-trips bit-exactly."""
    np.savez(
        path,
        features=dataset.features,
        labels=dataset.labels,
        identities=dataset.identities,
        sample_ids=dataset.sample_ids,
        task_kind=np.str_(dataset.task_kind),
        num_labels=np.int64(dataset.num_labels),
    )


def load_dataset(path) -> Dataset:
    with np.load(path) as archive:
        return Dataset(
            features=archive["features"],
            labels=archive["labels"],
            identities=archive["identities"],
            sample_ids=archive["sample_ids"],
            task_kind=str(archive["task_kind"]),
            num_labels=int(archive["num_labels"]),
        )


class AccessLog:
    """Records which named datasets had their contents read."""

    def __init__(self) -> None:
        self.events: list[tuple[str, str]] = []

    def record(self, name: str, attribute: str) -> None:
        self.events.append((name, attribute))

    def touched(self) -> set[str]:
        return {name for name, _ in self.events}


class AccessLoggedDataset:
    """Dataset proxy that logs every access to sample contents.

    Used to audit data-absence contracts: wrap each dataset handed to an
    unlearning operation and check afterwards which of them were read.
    """

    _DATA_ATTRS = ("features", "labels", "identities", "sample_ids", "identity_index")

    def __init__(self, inner: Dataset, name: str, log: AccessLog) -> None:
        object.__setattr__(self, "_inner", inner)
        object.__setattr__(self, "_name", name)
        object.__setattr__(self, "_log", log)

    def __getattr__(self, attribute: str):
        if attribute in self._DATA_ATTRS:
            self._log.record(self._name, attribute)
        return getattr(self._inner, attribute)

    def __len__(self) -> int:
        return len(self._inner)

    def subset(self, positions) -> Dataset:
        self._log.record(self._name, "subset")
        return self._inner.subset(positions)

    def sample(self, position: int) -> Sample:
        self._log.record(self._name, "sample")
        return self._inner.sample(position)
