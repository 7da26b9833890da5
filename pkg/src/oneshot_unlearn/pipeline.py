"""End-to-end orchestration: staged per-seed runs with content-addressed
artifacts, report aggregation, and the ablation sweeps."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .baselines import run_baseline
from .classifier import (
    Architecture,
    ClassifierState,
    init_classifier,
    load_classifier,
    retrain_oracle,
    save_classifier,
    train,
)
from .config import ExperimentConfig, config_hash, save_config
from .data import Dataset, SplitBundle, build_unlearning_request, load_dataset, save_dataset
from .evaluation import (
    EvalPerf,
    EvalReport,
    bin_rows,
    eval_perf,
    identity_drop_rows,
    identity_hardness_rows,
    mia_attack,
    read_report_csv,
    tow,
    write_binned_csv,
    write_per_identity_csv,
    write_report_csv,
)
from .metaunlearn import MetaLossState, apply_unlearning, load_metaloss, meta_train, save_metaloss

log = logging.getLogger(__name__)

METAUNLEARN = "metaunlearn"


def file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class StageRecord:
    artifacts: dict[str, str]
    hashes: dict[str, str]
    wall_clock: float


@dataclass
class RunManifest:
    """Per-seed ledger of stage artifacts and their content hashes."""

    config_hash: str
    seed: int
    stages: dict[str, StageRecord] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "stages": {
                name: {
                    "artifacts": record.artifacts,
                    "hashes": record.hashes,
                    "wall_clock": record.wall_clock,
                }
                for name, record in self.stages.items()
            },
        }

    @classmethod
    def from_json(cls, payload: dict) -> "RunManifest":
        manifest = cls(config_hash=payload["config_hash"], seed=payload["seed"])
        for name, record in payload.get("stages", {}).items():
            manifest.stages[name] = StageRecord(
                artifacts=dict(record["artifacts"]),
                hashes=dict(record["hashes"]),
                wall_clock=float(record["wall_clock"]),
            )
        return manifest


class SeedWorkspace:
    """Runs stages inside seed_<k>/, skipping any whose artifacts verify."""

    def __init__(self, root: Path, seed: int, cfg_hash: str) -> None:
        self.dir = Path(root) / f"seed_{seed}"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.seed = seed
        self.manifest_path = self.dir / "manifest.json"
        self.skipped: set[str] = set()
        self.manifest = RunManifest(config_hash=cfg_hash, seed=seed)
        if self.manifest_path.exists():
            previous = RunManifest.from_json(json.loads(self.manifest_path.read_text()))
            if previous.config_hash == cfg_hash:
                self.manifest = previous

    def _verify(self, record: StageRecord) -> bool:
        for key, rel in record.artifacts.items():
            path = self.dir / rel
            if not path.exists() or file_hash(path) != record.hashes.get(key):
                return False
        return True

    def _save_manifest(self) -> None:
        self.manifest_path.write_text(json.dumps(self.manifest.to_json(), indent=2))

    def run_stage(self, name: str, artifacts: dict[str, str], compute, load):
        """`compute(paths)` writes the artifact files; `load(paths)` reads them back."""
        paths = {key: self.dir / rel for key, rel in artifacts.items()}
        record = self.manifest.stages.get(name)
        if record is not None and record.artifacts == artifacts and self._verify(record):
            self.skipped.add(name)
            log.info("seed=%d stage=%s skipped (artifacts verified)", self.seed, name)
            return load(paths)
        for path in paths.values():
            path.parent.mkdir(parents=True, exist_ok=True)
        started = time.perf_counter()
        compute(paths)
        wall = time.perf_counter() - started
        self.manifest.stages[name] = StageRecord(
            artifacts=dict(artifacts),
            hashes={key: file_hash(path) for key, path in paths.items()},
            wall_clock=wall,
        )
        self._save_manifest()
        log.info("seed=%d stage=%s completed in %.2fs", self.seed, name, wall)
        return load(paths)


@dataclass
class SeedArtifacts:
    dataset: Dataset
    bundle: SplitBundle
    request: object
    reduced_train: Dataset
    pretrained: ClassifierState
    retrained: ClassifierState

    @property
    def train_bundle(self) -> SplitBundle:
        """Bundle whose training set is what the classifier actually saw."""
        return self.bundle.with_train(self.reduced_train)


def classifier_arch(cfg: ExperimentConfig) -> Architecture:
    return Architecture(
        feature_dim=cfg.generator.feature_dim,
        num_outputs=cfg.generator.num_labels,
        task_kind=cfg.generator.task_kind,
    )


def _save_bundle(bundle: SplitBundle, paths: dict[str, Path]) -> None:
    save_dataset(bundle.d_tr, paths["d_tr"])
    save_dataset(bundle.d_v, paths["d_v"])
    save_dataset(bundle.d_te, paths["d_te"])
    paths["ids"].write_text(
        json.dumps({"i_tr": list(bundle.i_tr), "i_v": list(bundle.i_v), "i_te": list(bundle.i_te)})
    )


def _load_bundle(paths: dict[str, Path]) -> SplitBundle:
    ids = json.loads(paths["ids"].read_text())
    return SplitBundle(
        d_tr=load_dataset(paths["d_tr"]),
        d_v=load_dataset(paths["d_v"]),
        d_te=load_dataset(paths["d_te"]),
        i_tr=tuple(ids["i_tr"]),
        i_v=tuple(ids["i_v"]),
        i_te=tuple(ids["i_te"]),
    )


def prepare_seed(cfg: ExperimentConfig, seed: int, ws: SeedWorkspace, n_s: int | None = None) -> SeedArtifacts:
    """Stages dataset -> split -> request -> pretrain -> retrain, all cached.

    The classifier is pretrained on the reduced training set (support
    withheld), so the support stays unseen by every model.
    """
    from .data import generate_dataset, split_by_identity  # local to keep module import light

    n_s = cfg.n_s if n_s is None else n_s
    dataset = ws.run_stage(
        "dataset",
        {"dataset": "dataset.npz"},
        compute=lambda p: save_dataset(generate_dataset(cfg.generator, seed), p["dataset"]),
        load=lambda p: load_dataset(p["dataset"]),
    )
    bundle = ws.run_stage(
        "split",
        {
            "d_tr": "bundle/d_tr.npz",
            "d_v": "bundle/d_v.npz",
            "d_te": "bundle/d_te.npz",
            "ids": "bundle/identities.json",
        },
        compute=lambda p: _save_bundle(split_by_identity(dataset, cfg.split_fractions, seed), p),
        load=_load_bundle,
    )

    def compute_request(paths: dict[str, Path]) -> None:
        request, reduced = build_unlearning_request(bundle, n_s, seed)
        save_dataset(request.support, paths["support"])
        save_dataset(request.d_f, paths["d_f"])
        save_dataset(request.d_r, paths["d_r"])
        save_dataset(reduced, paths["reduced"])
        paths["i_f"].write_text(json.dumps({"i_f": list(request.i_f)}))

    def load_request(paths: dict[str, Path]):
        from .data import UnlearningRequest

        meta = json.loads(paths["i_f"].read_text())
        request = UnlearningRequest(
            i_f=tuple(meta["i_f"]),
            support=load_dataset(paths["support"]),
            d_f=load_dataset(paths["d_f"]),
            d_r=load_dataset(paths["d_r"]),
        )
        return request, load_dataset(paths["reduced"])

    prefix = f"request_ns{n_s}"
    request, reduced = ws.run_stage(
        prefix,
        {
            "support": f"{prefix}/support.npz",
            "d_f": f"{prefix}/d_f.npz",
            "d_r": f"{prefix}/d_r.npz",
            "reduced": f"{prefix}/d_tr_reduced.npz",
            "i_f": f"{prefix}/identities.json",
        },
        compute=compute_request,
        load=load_request,
    )

    arch = classifier_arch(cfg)
    train_cfg = replace(cfg.classifier, seed=seed)
    pretrained = ws.run_stage(
        f"pretrain_ns{n_s}",
        {"model": f"classifier_pretrain_ns{n_s}.pt"},
        compute=lambda p: save_classifier(
            train(init_classifier(arch, seed), reduced, train_cfg), p["model"]
        ),
        load=lambda p: load_classifier(p["model"]),
    )
    retrained = ws.run_stage(
        f"retrain_ns{n_s}",
        {"model": f"classifier_retrain_ns{n_s}.pt"},
        compute=lambda p: save_classifier(
            retrain_oracle(bundle, request, train_cfg, arch=arch), p["model"]
        ),
        load=lambda p: load_classifier(p["model"]),
    )
    return SeedArtifacts(
        dataset=dataset,
        bundle=bundle,
        request=request,
        reduced_train=reduced,
        pretrained=pretrained,
        retrained=retrained,
    )


def metaloss_stage(
    cfg: ExperimentConfig,
    seed: int,
    ws: SeedWorkspace,
    arts: SeedArtifacts,
    *,
    train_n_s: int | None = None,
    tag: str = "main",
    **overrides,
) -> MetaLossState:
    """Meta-train (cached); overrides patch MetaTrainConfig fields for ablations."""
    meta_cfg = replace(cfg.meta, seed=seed, **overrides)
    n_s = cfg.n_s if train_n_s is None else train_n_s
    rel = "metaloss.pt" if tag == "main" else f"ablate/metaloss_{tag}.pt"
    return ws.run_stage(
        f"metaloss_{tag}",
        {"model": rel},
        compute=lambda p: save_metaloss(
            meta_train(arts.pretrained, arts.train_bundle, n_s, meta_cfg), p["model"]
        ),
        load=lambda p: load_metaloss(p["model"]),
    )


def _population(cfg: ExperimentConfig, seed: int, bundle: SplitBundle) -> Dataset:
    rng = np.random.default_rng(seed)
    size = min(cfg.mia.population_size, len(bundle.d_v))
    positions = np.sort(rng.choice(len(bundle.d_v), size=size, replace=False))
    return bundle.d_v.subset(positions)


def unlearned_model(
    cfg: ExperimentConfig,
    method: str,
    base: ClassifierState,
    arts: SeedArtifacts,
    meta: MetaLossState | None,
    seed: int,
) -> ClassifierState:
    """Apply `method` to `base` (the pretrained model, or the retrained one
    when building the membership-inference reference)."""
    if method == METAUNLEARN:
        if meta is None:
            raise ValueError("metaunlearn requires a trained meta-loss")
        return apply_unlearning(base, meta, arts.request.support)
    spec = next(s for s in cfg.baselines if s.kind == method)
    train_cfg = replace(cfg.classifier, seed=seed)
    return run_baseline(spec, base, arts.request, arts.bundle, train_cfg)


def evaluate_method(
    cfg: ExperimentConfig,
    seed: int,
    method: str,
    theta_u: ClassifierState,
    arts: SeedArtifacts,
    mia_reference: ClassifierState | None,
) -> EvalReport:
    perf = eval_perf(theta_u, arts.request.d_r, arts.request.d_f, arts.bundle.d_te)
    if method == "retrain-oracle":
        tow_value = None
        tpr = None
        per_identity: list[tuple[int, float, float]] = []
    else:
        retr_perf = eval_perf(arts.retrained, arts.request.d_r, arts.request.d_f, arts.bundle.d_te)
        tow_value = tow(perf, retr_perf)
        tpr, _ = mia_attack(
            theta_u,
            mia_reference,
            members=arts.request.d_f,
            nonmembers=arts.bundle.d_te,
            population=_population(cfg, seed, arts.bundle),
            cfg=cfg.mia,
        )
        per_identity = [
            (ident, gap, distance)
            for ident, distance, gap in identity_hardness_rows(
                theta_u, arts.retrained, arts.request, arts.pretrained
            )
        ]
    return EvalReport(
        method=method,
        seed=seed,
        perf=perf,
        tow=tow_value,
        mia_tpr=tpr,
        per_identity=per_identity,
    )


def method_order(cfg: ExperimentConfig) -> list[str]:
    return [spec.kind for spec in cfg.baselines] + [METAUNLEARN]


def run_seed(
    cfg: ExperimentConfig,
    seed: int,
    root: Path,
    methods: list[str] | None = None,
    with_reports: bool = True,
) -> dict:
    """All stages for one seed; returns reports and analysis rows."""
    ws = SeedWorkspace(root, seed, config_hash(cfg))
    arts = prepare_seed(cfg, seed, ws)
    meta = metaloss_stage(cfg, seed, ws, arts)

    reports: dict[str, EvalReport] = {}
    hardness_rows: list[tuple[int, float, float]] = []
    drop_rows: list[tuple[int, float, float]] = []
    for method in methods if methods is not None else method_order(cfg):
        safe = method.replace("/", "_")

        def compute_unlearned(paths: dict[str, Path], method=method) -> None:
            save_classifier(
                unlearned_model(cfg, method, arts.pretrained, arts, meta, seed), paths["model"]
            )

        theta_u = ws.run_stage(
            f"unlearn_{safe}",
            {"model": f"unlearned/{safe}.pt"},
            compute=compute_unlearned,
            load=lambda p: load_classifier(p["model"]),
        )
        if not with_reports:
            continue
        if method == "retrain-oracle":
            reference = None
        else:

            def compute_reference(paths: dict[str, Path], method=method) -> None:
                save_classifier(
                    unlearned_model(cfg, method, arts.retrained, arts, meta, seed), paths["model"]
                )

            reference = ws.run_stage(
                f"miaref_{safe}",
                {"model": f"mia_reference/{safe}.pt"},
                compute=compute_reference,
                load=lambda p: load_classifier(p["model"]),
            )

        def compute_report(paths: dict[str, Path], method=method, theta_u=theta_u, reference=reference) -> None:
            report = evaluate_method(cfg, seed, method, theta_u, arts, reference)
            write_report_csv(report, paths["report"])
            write_per_identity_csv(report.per_identity, paths["per_identity"])

        report = ws.run_stage(
            f"report_{safe}",
            {"report": f"reports/{safe}.csv", "per_identity": f"reports/{safe}_per_identity.csv"},
            compute=compute_report,
            load=lambda p: read_report_csv(p["report"]),
        )
        reports[method] = report

        # Pool the distance analyses over the support-only unlearning methods,
        # the way the paper averages its best methods per figure.
        if method in (METAUNLEARN, "neg-grad-support"):
            hardness_rows += identity_hardness_rows(
                theta_u, arts.retrained, arts.request, arts.pretrained
            )
            method_drop = identity_drop_rows(theta_u, arts.pretrained, arts.request, arts.pretrained)
            drop_rows += method_drop
            write_per_identity_csv(
                [(i, g, d) for i, d, g in method_drop],
                ws.dir / "reports" / f"{safe}_drop_rows.csv",
            )

    return {
        "reports": reports,
        "hardness_rows": hardness_rows,
        "drop_rows": drop_rows,
        "manifest": ws.manifest,
    }


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return float(arr.mean()), std


@dataclass
class MethodSummary:
    method: str
    seeds: int
    perf_retain: tuple[float, float]
    perf_forget: tuple[float, float]
    perf_test: tuple[float, float]
    tow: tuple[float, float] | None
    mia: tuple[float, float] | None


def aggregate_reports(cfg: ExperimentConfig, per_seed: dict[int, dict[str, EvalReport]]) -> list[MethodSummary]:
    summaries = []
    for method in method_order(cfg):
        rows = [per_seed[s][method] for s in sorted(per_seed) if method in per_seed[s]]
        if not rows:
            continue
        tows = [r.tow for r in rows if r.tow is not None]
        mias = [r.mia_tpr for r in rows if r.mia_tpr is not None]
        summaries.append(
            MethodSummary(
                method=method,
                seeds=len(rows),
                perf_retain=_mean_std([r.perf.retain for r in rows]),
                perf_forget=_mean_std([r.perf.forget for r in rows]),
                perf_test=_mean_std([r.perf.test for r in rows]),
                tow=_mean_std(tows) if tows else None,
                mia=_mean_std(mias) if mias else None,
            )
        )
    return summaries


def write_summary(
    summaries: list[MethodSummary], failures: list[tuple[int, str]], root: Path
) -> tuple[Path, Path]:
    csv_path = root / "summary.csv"
    md_path = root / "summary.md"
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "method",
                "seeds",
                "perf_retain_mean",
                "perf_retain_std",
                "perf_forget_mean",
                "perf_forget_std",
                "perf_test_mean",
                "perf_test_std",
                "tow_mean",
                "tow_std",
                "mia_mean",
                "mia_std",
            ]
        )
        for s in summaries:
            row = [s.method, s.seeds]
            for pair in (s.perf_retain, s.perf_forget, s.perf_test):
                row += [f"{pair[0]:.6f}", f"{pair[1]:.6f}"]
            for pair in (s.tow, s.mia):
                row += ([f"{pair[0]:.6f}", f"{pair[1]:.6f}"] if pair else ["", ""])
            writer.writerow(row)

    def cell(pair: tuple[float, float] | None) -> str:
        return "-" if pair is None else f"{pair[0]:.4f}±{pair[1]:.4f}"

    lines = [
        "| Method | Retain | Forget | Test | ToW | MIA TPR |",
        "|---|---|---|---|---|---|",
    ]
    for s in summaries:
        lines.append(
            f"| {s.method} | {cell(s.perf_retain)} | {cell(s.perf_forget)} "
            f"| {cell(s.perf_test)} | {cell(s.tow)} | {cell(s.mia)} |"
        )
    if failures:
        lines.append("")
        lines.append("Failed seeds:")
        for seed, message in failures:
            lines.append(f"- seed {seed}: {message}")
    md_path.write_text("\n".join(lines) + "\n")
    return csv_path, md_path


@dataclass
class PipelineResult:
    manifests: list[RunManifest]
    reports: dict[int, dict[str, EvalReport]]
    failures: list[tuple[int, str]]
    summary_csv: Path
    summary_md: Path


def run_pipeline(cfg: ExperimentConfig) -> PipelineResult:
    """Run every seed end to end; continue past per-seed failures."""
    torch.set_num_threads(1)
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    save_config(cfg, root / "config.yaml")

    manifests: list[RunManifest] = []
    reports: dict[int, dict[str, EvalReport]] = {}
    failures: list[tuple[int, str]] = []
    hardness_rows: list[tuple[int, float, float]] = []
    drop_rows: list[tuple[int, float, float]] = []
    for seed in cfg.seeds:
        try:
            outcome = run_seed(cfg, seed, root)
        except Exception as err:  # noqa: BLE001 - seed isolation is the contract
            log.exception("seed %d failed", seed)
            failures.append((seed, f"{type(err).__name__}: {err}"))
            continue
        reports[seed] = outcome["reports"]
        manifests.append(outcome["manifest"])
        hardness_rows.extend(outcome["hardness_rows"])
        drop_rows.extend(outcome["drop_rows"])

    summaries = aggregate_reports(cfg, reports)
    summary_csv, summary_md = write_summary(summaries, failures, root)
    write_binned_csv(bin_rows(hardness_rows, cfg.analysis_bins), root / "analysis_hardness.csv")
    write_binned_csv(bin_rows(drop_rows, cfg.analysis_bins), root / "analysis_drop.csv")
    return PipelineResult(
        manifests=manifests,
        reports=reports,
        failures=failures,
        summary_csv=summary_csv,
        summary_md=summary_md,
    )


AUX_ABLATION_ROWS: tuple[tuple[str, dict], ...] = (
    ("first", {"terms": "first", "accuracy_scaling": False, "kernel": "squared"}),
    ("first+acc", {"terms": "first", "accuracy_scaling": True, "kernel": "squared"}),
    ("second", {"terms": "second", "accuracy_scaling": False, "kernel": "squared"}),
    ("second+acc", {"terms": "second", "accuracy_scaling": True, "kernel": "squared"}),
    ("first+second", {"terms": "both", "accuracy_scaling": False, "kernel": "squared"}),
    ("first+second+acc", {"terms": "both", "accuracy_scaling": True, "kernel": "squared"}),
    ("first+second+acc+smooth-l1", {"terms": "both", "accuracy_scaling": True, "kernel": "smooth-l1"}),
)

INPUT_ABLATION_ROWS: tuple[tuple[str, dict], ...] = (
    ("logits", {"logits": True, "features": False, "identity": False, "targets": False}),
    ("logits+features", {"logits": True, "features": True, "identity": False, "targets": False}),
    ("logits+features+ids", {"logits": True, "features": True, "identity": True, "targets": False}),
    ("logits+features+ids+targets", {"logits": True, "features": True, "identity": True, "targets": True}),
)


def metaunlearn_tow(
    cfg: ExperimentConfig,
    seed: int,
    ws: SeedWorkspace,
    arts: SeedArtifacts,
    *,
    tag: str,
    train_n_s: int | None = None,
    **overrides,
) -> float:
    """ToW of a meta-trained variant against the retrain oracle."""
    meta = metaloss_stage(cfg, seed, ws, arts, train_n_s=train_n_s, tag=tag, **overrides)
    theta_u = apply_unlearning(arts.pretrained, meta, arts.request.support)
    perf = eval_perf(theta_u, arts.request.d_r, arts.request.d_f, arts.bundle.d_te)
    retr = eval_perf(arts.retrained, arts.request.d_r, arts.request.d_f, arts.bundle.d_te)
    return tow(perf, retr)


def _write_ablation_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def run_ablations(cfg: ExperimentConfig) -> dict[str, Path]:
    """Sweep the auxiliary-loss rows, the meta-loss input rows, and the
    matched/mismatched request sizes; one ToW table per axis."""
    torch.set_num_threads(1)
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    cfg_hash = config_hash(cfg)

    workspaces = {seed: SeedWorkspace(root, seed, cfg_hash) for seed in cfg.seeds}
    artifacts = {seed: prepare_seed(cfg, seed, workspaces[seed]) for seed in cfg.seeds}

    from .metaunlearn import AuxLossConfig, MetaInputs

    aux_rows = []
    for label, kwargs in AUX_ABLATION_ROWS:
        tows = [
            metaunlearn_tow(
                cfg, seed, workspaces[seed], artifacts[seed],
                tag=f"aux_{label}", aux=AuxLossConfig(**kwargs),
            )
            for seed in cfg.seeds
        ]
        mean, std = _mean_std(tows)
        aux_rows.append([label, f"{mean:.6f}", f"{std:.6f}"])

    input_rows = []
    for label, kwargs in INPUT_ABLATION_ROWS:
        tows = [
            metaunlearn_tow(
                cfg, seed, workspaces[seed], artifacts[seed],
                tag=f"inputs_{label}", inputs=MetaInputs(**kwargs),
            )
            for seed in cfg.seeds
        ]
        mean, std = _mean_std(tows)
        input_rows.append([label, f"{mean:.6f}", f"{std:.6f}"])

    size_rows = []
    for eval_n_s in cfg.ablation_n_s_pair:
        eval_arts = {
            seed: prepare_seed(cfg, seed, workspaces[seed], n_s=eval_n_s) for seed in cfg.seeds
        }
        for train_n_s in cfg.ablation_n_s_pair:
            tows = [
                metaunlearn_tow(
                    cfg, seed, workspaces[seed], eval_arts[seed],
                    tag=f"sizes_eval{eval_n_s}_train{train_n_s}", train_n_s=train_n_s,
                )
                for seed in cfg.seeds
            ]
            mean, std = _mean_std(tows)
            size_rows.append(
                [eval_n_s, train_n_s, str(eval_n_s == train_n_s).lower(), f"{mean:.6f}", f"{std:.6f}"]
            )

    paths = {
        "aux": root / "ablation_aux.csv",
        "inputs": root / "ablation_inputs.csv",
        "sizes": root / "ablation_sizes.csv",
    }
    _write_ablation_csv(paths["aux"], ["loss", "tow_mean", "tow_std"], aux_rows)
    _write_ablation_csv(paths["inputs"], ["inputs", "tow_mean", "tow_std"], input_rows)
    _write_ablation_csv(
        paths["sizes"], ["eval_n_s", "train_n_s", "matched", "tow_mean", "tow_std"], size_rows
    )
    return paths
