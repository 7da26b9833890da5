import time
from dataclasses import replace

import pytest
import torch

from oneshot_unlearn.baselines import run_baseline
from oneshot_unlearn.classifier import Architecture, init_classifier
from oneshot_unlearn.config import default_config
from oneshot_unlearn.data import (
    GeneratorConfig,
    build_unlearning_request,
    generate_dataset,
    split_by_identity,
)
from oneshot_unlearn.evaluation import eval_perf, tow
from oneshot_unlearn.metaunlearn import AuxLossConfig, apply_unlearning
from oneshot_unlearn.pipeline import SeedWorkspace, metaloss_stage, prepare_seed

torch.set_num_threads(1)

SEEDS = (0, 1, 2)


def toy_setup(seed=0, num_identities=12, samples=4, feature_dim=4, num_labels=3,
              task_kind="multi-label", n_s=3):
    """Small dataset + split + request for unit tests."""
    gen = GeneratorConfig(
        num_identities=num_identities,
        samples_per_identity=samples,
        feature_dim=feature_dim,
        num_labels=num_labels,
        task_kind=task_kind,
    )
    dataset = generate_dataset(gen, seed)
    bundle = split_by_identity(dataset, (0.6, 0.2, 0.2), seed)
    request, reduced = build_unlearning_request(bundle, n_s, seed)
    return dataset, bundle, request, reduced


class BenchmarkRuns:
    """Lazily computed artifacts of the desk-scale benchmark (3 seeds).

    Uses the pipeline's disk-cached stages inside a session temp directory so
    repeated requests within a test session are cheap.
    """

    def __init__(self, root) -> None:
        self.cfg = replace(default_config(), output_dir=str(root))
        self._ws: dict[int, SeedWorkspace] = {}
        self._arts: dict[tuple[int, int], object] = {}
        self._meta: dict[tuple, object] = {}
        self.elapsed = 0.0

    def _timed(self, fn):
        started = time.perf_counter()
        value = fn()
        self.elapsed += time.perf_counter() - started
        return value

    def workspace(self, seed: int) -> SeedWorkspace:
        if seed not in self._ws:
            from oneshot_unlearn.config import config_hash

            self._ws[seed] = SeedWorkspace(self.cfg.output_dir, seed, config_hash(self.cfg))
        return self._ws[seed]

    def arts(self, seed: int, n_s: int | None = None):
        n_s = self.cfg.n_s if n_s is None else n_s
        key = (seed, n_s)
        if key not in self._arts:
            self._arts[key] = self._timed(
                lambda: prepare_seed(self.cfg, seed, self.workspace(seed), n_s=n_s)
            )
        return self._arts[key]

    def meta(self, seed: int, *, eval_n_s: int | None = None, train_n_s: int | None = None,
             aux: AuxLossConfig | None = None, label: str = "default"):
        eval_n_s = self.cfg.n_s if eval_n_s is None else eval_n_s
        train_n_s = eval_n_s if train_n_s is None else train_n_s
        key = (seed, eval_n_s, train_n_s, label)
        if key not in self._meta:
            arts = self.arts(seed, eval_n_s)
            overrides = {} if aux is None else {"aux": aux}
            tag = f"bench_{eval_n_s}_{train_n_s}_{label}"
            self._meta[key] = self._timed(
                lambda: metaloss_stage(
                    self.cfg, seed, self.workspace(seed), arts,
                    train_n_s=train_n_s, tag=tag, **overrides,
                )
            )
        return self._meta[key]

    def unlearned(self, seed: int, *, eval_n_s: int | None = None, train_n_s: int | None = None,
                  aux: AuxLossConfig | None = None, label: str = "default"):
        arts = self.arts(seed, eval_n_s)
        meta = self.meta(seed, eval_n_s=eval_n_s, train_n_s=train_n_s, aux=aux, label=label)
        return apply_unlearning(arts.pretrained, meta, arts.request.support)

    def neg_grad(self, seed: int):
        arts = self.arts(seed)
        spec = next(s for s in self.cfg.baselines if s.kind == "neg-grad-support")
        return run_baseline(
            spec, arts.pretrained, arts.request, arts.bundle, replace(self.cfg.classifier, seed=seed)
        )

    def triple(self, seed: int, state, n_s: int | None = None):
        arts = self.arts(seed, n_s)
        return eval_perf(state, arts.request.d_r, arts.request.d_f, arts.bundle.d_te)

    def tow_of(self, seed: int, state, n_s: int | None = None) -> float:
        arts = self.arts(seed, n_s)
        return tow(self.triple(seed, state, n_s), self.triple(seed, arts.retrained, n_s))


@pytest.fixture(scope="session")
def bench(tmp_path_factory) -> BenchmarkRuns:
    return BenchmarkRuns(tmp_path_factory.mktemp("benchmark"))


@pytest.fixture()
def tiny_classifier():
    arch = Architecture(feature_dim=4, num_outputs=3, hidden=(8, 6))
    return arch, init_classifier(arch, seed=0)
