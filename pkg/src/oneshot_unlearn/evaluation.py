"""Metrics and analyses: performance scores, tug-of-war, likelihood-ratio
membership inference at a fixed false-positive rate, and the distance-binned
hardness/drop diagnostics."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .classifier import ClassifierState, as_feature_tensor, forward, forward_params
from .data import MULTI_LABEL, Dataset, Sample, UnlearningRequest

LIKELIHOOD_FLOOR = 1e-12


@dataclass(frozen=True)
class MiaConfig:
    gamma: float = 1.0
    target_fpr: float = 1e-4
    population_size: int = 200
    reference_recipe: str = "retrain-then-unlearn"

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not (0 < self.target_fpr <= 1):
            raise ValueError("target_fpr must lie in (0, 1]")
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")


@dataclass(frozen=True)
class EvalPerf:
    """Performance triple on the retain / forget / test splits."""

    retain: float
    forget: float
    test: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.retain, self.forget, self.test)


@dataclass
class EvalReport:
    method: str
    seed: int
    perf: EvalPerf
    tow: float | None = None
    mia_tpr: float | None = None
    per_identity: list[tuple[int, float, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        for value in self.perf.as_tuple():
            if not (0.0 <= value <= 1.0):
                raise ValueError("performance scores must lie in [0, 1]")
        if self.tow is not None and not (0.0 <= self.tow <= 1.0):
            raise ValueError("tow must lie in [0, 1]")


def average_precision(scores: np.ndarray, positives: np.ndarray) -> float:
    """AP = mean of precision at each positive's rank, scores ranked descending.

    Ties are broken by stable sample order (lower index ranks first).
    """
    order = np.argsort(-scores, kind="stable")
    hits = positives[order].astype(np.float64)
    total = hits.sum()
    if total == 0:
        raise ValueError("average precision undefined without positives")
    cumulative = np.cumsum(hits)
    ranks = np.arange(1, len(hits) + 1)
    return float(((cumulative / ranks) * hits).sum() / total)


def score_from_logits(logits: np.ndarray, labels: np.ndarray, task_kind: str) -> float:
    """mAP over attributes (multi-label) or top-1 accuracy (multi-class)."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if task_kind == MULTI_LABEL:
        aps = []
        for attribute in range(labels.shape[1]):
            positives = labels[:, attribute] == 1
            if not positives.any():
                continue
            aps.append(average_precision(logits[:, attribute], positives))
        if not aps:
            raise ValueError("every attribute lacks positives; mAP undefined")
        return float(np.mean(aps))
    return float(np.mean(logits.argmax(axis=1) == labels))


def performance_score(state: ClassifierState, data) -> float:
    if len(data) == 0:
        raise ValueError("cannot score an empty dataset")
    _, logits = forward(state, data)
    return score_from_logits(logits, data.labels, state.arch.task_kind)


def eval_perf(state: ClassifierState, d_r, d_f, d_te) -> EvalPerf:
    return EvalPerf(
        retain=performance_score(state, d_r),
        forget=performance_score(state, d_f),
        test=performance_score(state, d_te),
    )


def tow(unlearned: EvalPerf, retrained: EvalPerf) -> float:
    """Product of (1 - |score gap vs the retrained model|) over the three splits."""
    result = 1.0
    for u, r in zip(unlearned.as_tuple(), retrained.as_tuple()):
        if not (0.0 <= u <= 1.0 and 0.0 <= r <= 1.0):
            raise ValueError("tow inputs must lie in [0, 1]")
        result *= 1.0 - abs(u - r)
    return result


def log_likelihoods(state: ClassifierState, data) -> np.ndarray:
    """Per-sample log Pr(labels | model), floored at log(1e-12).

    Multi-label: product of per-attribute Bernoulli likelihoods, accumulated
    in the log domain. Multi-class: softmax probability of the true class.
    """
    inputs = as_feature_tensor(data)
    labels = data.labels
    with torch.no_grad():
        _, logits = forward_params(state.arch, state.params, inputs)
        if state.arch.task_kind == MULTI_LABEL:
            target = torch.as_tensor(np.asarray(labels), dtype=torch.float64)
            per_bit = -torch.nn.functional.binary_cross_entropy_with_logits(
                logits, target, reduction="none"
            )
            out = per_bit.sum(dim=1)
        else:
            target = torch.as_tensor(np.asarray(labels), dtype=torch.long)
            out = torch.log_softmax(logits, dim=1).gather(1, target[:, None]).squeeze(1)
    return np.maximum(out.numpy(), np.log(LIKELIHOOD_FLOOR))


def _likelihood_ratios(
    target: ClassifierState,
    reference: ClassifierState,
    samples,
    population,
) -> np.ndarray:
    """LR matrix of shape (len(samples), len(population))."""
    sample_gap = log_likelihoods(target, samples) - log_likelihoods(reference, samples)
    population_gap = log_likelihoods(target, population) - log_likelihoods(reference, population)
    return np.exp(sample_gap[:, None] - population_gap[None, :])


def mia_scores(
    target: ClassifierState,
    reference: ClassifierState,
    samples,
    population,
    gamma: float,
) -> np.ndarray:
    """Per-sample membership score: fraction of population z with LR >= gamma."""
    if len(population) == 0:
        raise ValueError("population must be non-empty")
    ratios = _likelihood_ratios(target, reference, samples, population)
    return (ratios >= gamma).mean(axis=1)


def mia_score(
    target: ClassifierState,
    reference: ClassifierState,
    x: Sample,
    population,
    gamma: float,
) -> float:
    if x.sample_id in set(int(s) for s in population.sample_ids):
        raise ValueError("population must be disjoint from the target sample")
    singleton = Dataset(
        features=x.features[None, :],
        labels=np.asarray([x.labels]),
        identities=np.asarray([x.identity]),
        sample_ids=np.asarray([x.sample_id]),
        task_kind=population.task_kind,
        num_labels=population.num_labels,
    )
    return float(mia_scores(target, reference, singleton, population, gamma)[0])


def select_threshold(nonmember_scores: np.ndarray, target_fpr: float) -> float:
    """Smallest observed score (or max + margin) with empirical FPR <= target.

    With fewer nonmembers than 1/target_fpr no observed score can satisfy the
    constraint, so the threshold falls back to just above the maximum
    nonmember score (and a warning is emitted).
    """
    scores = np.asarray(nonmember_scores, dtype=np.float64)
    if len(scores) == 0:
        raise ValueError("nonmember scores are empty")
    if len(scores) < 1.0 / target_fpr:
        warnings.warn(
            f"{len(scores)} nonmembers cannot resolve FPR {target_fpr}; "
            "thresholding above the maximum nonmember score",
            stacklevel=2,
        )
    candidates = np.unique(scores)
    fprs = (scores[None, :] >= candidates[:, None]).mean(axis=1)
    feasible = np.flatnonzero(fprs <= target_fpr)
    if len(feasible):
        return float(candidates[feasible[0]])
    return float(candidates[-1] + 1e-9)


def mia_attack(
    target: ClassifierState,
    reference: ClassifierState,
    members,
    nonmembers,
    population,
    cfg: MiaConfig,
) -> tuple[float, float]:
    """True-positive rate at the configured false-positive rate, plus threshold."""
    member_scores = mia_scores(target, reference, members, population, cfg.gamma)
    nonmember_scores = mia_scores(target, reference, nonmembers, population, cfg.gamma)
    beta = select_threshold(nonmember_scores, cfg.target_fpr)
    tpr = float((member_scores >= beta).mean())
    return tpr, beta


def embed(extractor: ClassifierState, data) -> np.ndarray:
    features, _ = forward(extractor, data)
    return features


def _slice_score(state: ClassifierState, data, positions: np.ndarray) -> float | None:
    """Performance on a per-identity slice; None when undefined (no positives)."""
    subset = data.subset(positions)
    try:
        return performance_score(state, subset)
    except ValueError:
        return None


def identity_hardness_rows(
    theta_u: ClassifierState,
    theta_r: ClassifierState,
    request: UnlearningRequest,
    feature_extractor: ClassifierState,
) -> list[tuple[int, float, float]]:
    """Per forget identity: (identity, support-to-centroid distance, perf gap).

    Distance is Euclidean in the extractor's feature space between the
    identity's support sample and the centroid of its forget samples; the gap
    is perf(theta_u) - perf(theta_r) on that identity's forget slice.
    """
    support_feats = embed(feature_extractor, request.support)
    forget_feats = embed(feature_extractor, request.d_f)
    support_ids = request.support.identities
    rows: list[tuple[int, float, float]] = []
    forget_index = request.d_f.identity_index
    for position, ident in enumerate(support_ids):
        ident = int(ident)
        slots = forget_index.get(ident)
        if slots is None or len(slots) == 0:
            continue
        centroid = forget_feats[slots].mean(axis=0)
        distance = float(np.linalg.norm(support_feats[position] - centroid))
        perf_u = _slice_score(theta_u, request.d_f, slots)
        perf_r = _slice_score(theta_r, request.d_f, slots)
        if perf_u is None or perf_r is None:
            continue
        rows.append((ident, distance, perf_u - perf_r))
    return rows


def identity_drop_rows(
    theta_u: ClassifierState,
    theta_pre: ClassifierState,
    request: UnlearningRequest,
    feature_extractor: ClassifierState,
) -> list[tuple[int, float, float]]:
    """Per retain identity: (identity, min distance to a forget centroid, drop).

    Drop is perf(theta_pre) - perf(theta_u) on the identity's retain samples.
    """
    forget_feats = embed(feature_extractor, request.d_f)
    forget_centroids = np.stack(
        [forget_feats[slots].mean(axis=0) for slots in request.d_f.identity_index.values()]
    )
    retain_feats = embed(feature_extractor, request.d_r)
    rows: list[tuple[int, float, float]] = []
    for ident, slots in request.d_r.identity_index.items():
        centroid = retain_feats[slots].mean(axis=0)
        distance = float(np.linalg.norm(forget_centroids - centroid, axis=1).min())
        perf_pre = _slice_score(theta_pre, request.d_r, slots)
        perf_u = _slice_score(theta_u, request.d_r, slots)
        if perf_pre is None or perf_u is None:
            continue
        rows.append((int(ident), distance, perf_pre - perf_u))
    return rows


def bin_rows(
    rows: list[tuple[int, float, float]], num_bins: int
) -> list[tuple[float, float, float, int]]:
    """Group (identity, distance, gap) rows into equal-width distance bins.

    Returns (bin_low, bin_high, mean_gap, count) sorted by ascending distance;
    empty bins are omitted. Degenerate all-equal distances occupy one bin.
    """
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    if not rows:
        return []
    distances = np.asarray([r[1] for r in rows], dtype=np.float64)
    gaps = np.asarray([r[2] for r in rows], dtype=np.float64)
    low, high = float(distances.min()), float(distances.max())
    if high == low:
        return [(low, high, float(gaps.mean()), len(rows))]
    edges = np.linspace(low, high, num_bins + 1)
    assignment = np.clip(np.searchsorted(edges, distances, side="right") - 1, 0, num_bins - 1)
    table = []
    for b in range(num_bins):
        mask = assignment == b
        if not mask.any():
            continue
        table.append((float(edges[b]), float(edges[b + 1]), float(gaps[mask].mean()), int(mask.sum())))
    return table


def hardness_analysis(
    theta_u: ClassifierState,
    theta_r: ClassifierState,
    request: UnlearningRequest,
    feature_extractor: ClassifierState,
    num_bins: int,
) -> list[tuple[float, float, float, int]]:
    return bin_rows(identity_hardness_rows(theta_u, theta_r, request, feature_extractor), num_bins)


def drop_analysis(
    theta_u: ClassifierState,
    theta_pre: ClassifierState,
    request: UnlearningRequest,
    feature_extractor: ClassifierState,
    num_bins: int,
) -> list[tuple[float, float, float, int]]:
    return bin_rows(identity_drop_rows(theta_u, theta_pre, request, feature_extractor), num_bins)


REPORT_COLUMNS = ("method", "seed", "perf_retain", "perf_forget", "perf_test", "tow", "mia_tpr")


def _fmt(value: float | None) -> str:
    # repr round-trips float64 exactly through the CSV
    return "" if value is None else repr(float(value))


def write_report_csv(report: EvalReport, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        writer.writerow(
            [
                report.method,
                report.seed,
                _fmt(report.perf.retain),
                _fmt(report.perf.forget),
                _fmt(report.perf.test),
                _fmt(report.tow),
                _fmt(report.mia_tpr),
            ]
        )


def read_report_csv(path) -> EvalReport:
    with open(path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    if len(rows) != 1:
        raise ValueError(f"report file {path} must hold exactly one row")
    row = rows[0]
    return EvalReport(
        method=row["method"],
        seed=int(row["seed"]),
        perf=EvalPerf(
            retain=float(row["perf_retain"]),
            forget=float(row["perf_forget"]),
            test=float(row["perf_test"]),
        ),
        tow=float(row["tow"]) if row["tow"] else None,
        mia_tpr=float(row["mia_tpr"]) if row["mia_tpr"] else None,
    )


def write_per_identity_csv(rows: list[tuple[int, float, float]], path) -> None:
    """Rows are (identity, perf_diff vs reference, support-centroid distance)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["identity", "perf_diff", "distance"])
        for ident, diff, distance in rows:
            writer.writerow([ident, _fmt(diff), _fmt(distance)])


def write_binned_csv(table: list[tuple[float, float, float, int]], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["bin_low", "bin_high", "mean_gap", "count"])
        for low, high, gap, count in table:
            writer.writerow([_fmt(low), _fmt(high), _fmt(gap), count])
