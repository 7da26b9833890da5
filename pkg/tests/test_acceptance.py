"""Acceptance criteria for the benchmark harness.

Each test prints one PASS/FAIL line; tolerances are fixed here and nowhere
else. The heavyweight end-to-end artifacts are shared through the session
`bench` fixture (its compute time counts toward the runtime budgets).
"""

import itertools
import time
import warnings
from dataclasses import replace

import numpy as np
import torch

from oneshot_unlearn.classifier import Architecture, dataset_loss, init_classifier
from oneshot_unlearn.data import (
    AccessLog,
    AccessLoggedDataset,
    GeneratorConfig,
    build_unlearning_request,
    generate_dataset,
    split_by_identity,
)
from oneshot_unlearn.evaluation import EvalPerf, average_precision, select_threshold, tow
from oneshot_unlearn.metaunlearn import (
    AuxLossConfig,
    MetaTrainConfig,
    apply_unlearning,
    auxiliary_loss,
    init_metaloss,
    unlearn_step,
)

from conftest import SEEDS, toy_setup
from oracles import (
    brute_force_average_precision,
    exchangeable_tpr_trials,
    finite_difference_gradient,
    flatten_tensors,
    relative_error,
    unflatten_tensors,
)

FIRST_ONLY = AuxLossConfig(terms="first", accuracy_scaling=False)


def check(number: int, description: str, ok: bool) -> None:
    print(f"ACCEPTANCE {number} [{description}]: {'PASS' if ok else 'FAIL'}")
    assert ok, f"acceptance criterion {number} failed: {description}"


def test_criterion_1_benchmark_invariants():
    started = time.perf_counter()
    rng = np.random.default_rng(2024)
    draws = 0
    ok = True
    while draws < 1000:
        cfg = GeneratorConfig(
            num_identities=int(rng.integers(6, 16)),
            samples_per_identity=int(rng.integers(2, 6)),
            feature_dim=int(rng.integers(2, 7)),
            num_labels=int(rng.integers(1, 5)),
            task_kind=("multi-label", "multi-class")[int(rng.integers(2))],
            sample_noise=float(rng.uniform(0.0, 0.5)),
            label_noise=float(rng.uniform(0.0, 0.3)),
        )
        seed = int(rng.integers(1 << 31))
        dataset = generate_dataset(cfg, seed)
        bundle = split_by_identity(dataset, (0.6, 0.2, 0.2), seed)
        n_s = int(rng.integers(1, len(bundle.i_tr) + 1))
        request, reduced = build_unlearning_request(bundle, n_s, seed)
        draws += 1

        tr, v, te = set(bundle.i_tr), set(bundle.i_v), set(bundle.i_te)
        ok &= not (tr & v or tr & te or v & te)
        support_identities = request.support.identities.tolist()
        ok &= sorted(support_identities) == list(request.i_f)
        ok &= len(set(support_identities)) == len(support_identities)
        support_ids = set(request.support.sample_ids.tolist())
        ok &= not support_ids & set(reduced.sample_ids.tolist())
        ok &= not support_ids & set(request.d_f.sample_ids.tolist())
        ok &= not support_ids & set(request.d_r.sample_ids.tolist())
        ok &= len(request.d_f) + len(request.d_r) + len(request.support) == len(bundle.d_tr)
        if not ok:
            break
    elapsed = time.perf_counter() - started
    check(1, f"1000 randomized draws in {elapsed:.1f}s", ok and elapsed < 60.0)


def test_criterion_2_second_order_gradient_check():
    started = time.perf_counter()
    _, bundle, request, _ = toy_setup()
    arch = Architecture(feature_dim=4, num_outputs=3, hidden=(8, 6))
    classifier = init_classifier(arch, seed=2)
    assert sum(v.numel() for v in classifier.params.values()) <= 500

    meta_cfg = MetaTrainConfig(hidden=8, embed_dim=2, inner_lr=0.1, seed=1, dropout=0.5)
    meta = init_metaloss(arch, bundle.i_tr, meta_cfg)
    assert sum(v.numel() for v in meta.params.values()) <= 300

    phi_names = sorted(meta.params)
    flat, spec = flatten_tensors(meta.params)
    variants = [
        AuxLossConfig(terms="both", accuracy_scaling=False, kernel="squared"),
        AuxLossConfig(terms="both", accuracy_scaling=True, kernel="squared"),
        AuxLossConfig(terms="both", accuracy_scaling=False, kernel="smooth-l1"),
        AuxLossConfig(terms="both", accuracy_scaling=True, kernel="smooth-l1"),
    ]
    rng = np.random.default_rng(5)
    worst = 0.0
    for aux in variants:
        live = {name: meta.params[name].clone().requires_grad_(True) for name in phi_names}
        live_meta = replace(meta, params=live)
        theta_u = unlearn_step(classifier, live_meta, request.support, create_graph=True)
        objective = auxiliary_loss(theta_u, classifier, request.d_f, bundle.d_v, aux)
        grads = torch.autograd.grad(objective, [live[n] for n in phi_names], allow_unused=True)
        analytic = np.concatenate(
            [
                (torch.zeros_like(live[n]) if g is None else g).detach().numpy().ravel()
                for n, g in zip(phi_names, grads)
            ]
        )

        def objective_at(vector):
            rebuilt = replace(meta, params=unflatten_tensors(vector, spec))
            theta = unlearn_step(classifier, rebuilt, request.support)
            return float(auxiliary_loss(theta, classifier, request.d_f, bundle.d_v, aux).detach())

        coords = rng.choice(len(flat), size=50, replace=False)
        for coord in coords:
            numeric = finite_difference_gradient(objective_at, flat, eps=1e-5, indices=[coord])[coord]
            worst = max(worst, relative_error(analytic[coord], numeric))
    elapsed = time.perf_counter() - started
    check(2, f"second-order grad rel err {worst:.2e} in {elapsed:.1f}s", worst <= 1e-3 and elapsed < 120.0)


def test_criterion_3_metric_oracles():
    a = EvalPerf(retain=0.913, forget=0.205, test=0.77)
    exact_identity = tow(a, a) == 1.0

    hand = tow(EvalPerf(0.91, 0.85, 0.70), EvalPerf(0.90, 0.80, 0.70))
    hand_ok = abs(hand - 0.9405) <= 1e-12

    published = tow(
        EvalPerf(retain=0.848, forget=0.830, test=0.807),
        EvalPerf(retain=0.847, forget=0.786, test=0.808),
    )
    published_ok = abs(published - 0.955) <= 0.01

    ap_ok = True
    templates = [(0.15, 0.5, 0.9, 0.3, 0.7, 0.2), (0.5, 0.5, 0.9, 0.1, 0.5, 0.9)]
    for n in range(1, 7):
        for template in templates:
            for scores in set(itertools.permutations(template[:n])):
                for mask in itertools.product([0, 1], repeat=n):
                    if not any(mask):
                        continue
                    fast = average_precision(np.array(scores), np.array(mask, dtype=bool))
                    slow = brute_force_average_precision(list(scores), list(mask))
                    ap_ok &= abs(fast - slow) <= 1e-12
            if not ap_ok:
                break

    check(3, "tow identity/hand/published + AP brute force", exact_identity and hand_ok and published_ok and ap_ok)


def test_criterion_4_mia_calibration():
    rng = np.random.default_rng(99)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rates = exchangeable_tpr_trials(
            rng, num_trials=20, n_members=2000, n_nonmembers=2000,
            target_fpr=1e-4, select_threshold=select_threshold,
        )
    exchangeable_ok = float(np.mean(rates)) <= 0.01

    scores = np.random.default_rng(3).random(10_000)
    minimal_ok = True
    for target in (0.2, 0.01, 1e-3):
        beta = select_threshold(scores, target)
        minimal_ok &= (scores >= beta).mean() <= target
        candidates = np.unique(scores)
        for candidate in candidates[candidates < beta]:
            if (scores >= candidate).mean() <= target:
                minimal_ok = False
                break

    members = np.full(64, 0.9)
    nonmembers = np.full(64, 0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        beta = select_threshold(nonmembers, 1e-4)
    separation_ok = float((members >= beta).mean()) == 1.0

    check(4, "exchangeable TPR / threshold minimality / separation", exchangeable_ok and minimal_ok and separation_ok)


def test_criterion_5_end_to_end_efficacy(bench):
    started = time.perf_counter()
    noop_tows, meta_tows, pre_gaps, unl_gaps = [], [], [], []
    for seed in SEEDS:
        arts = bench.arts(seed)
        theta_u = bench.unlearned(seed)
        noop_tows.append(bench.tow_of(seed, arts.pretrained))
        meta_tows.append(bench.tow_of(seed, theta_u))
        pre_gaps.append(
            abs(dataset_loss(arts.pretrained, arts.request.d_f) - dataset_loss(arts.pretrained, arts.bundle.d_v))
        )
        unl_gaps.append(
            abs(dataset_loss(theta_u, arts.request.d_f) - dataset_loss(theta_u, arts.bundle.d_v))
        )
    elapsed = bench.elapsed + (time.perf_counter() - started)
    tow_ok = float(np.mean(meta_tows)) >= float(np.mean(noop_tows)) - 0.002
    gap_ok = float(np.mean(unl_gaps)) <= float(np.mean(pre_gaps))
    check(
        5,
        f"ToW {np.mean(meta_tows):.4f} vs noop {np.mean(noop_tows):.4f}, "
        f"gap {np.mean(unl_gaps):.4f} vs {np.mean(pre_gaps):.4f}, {elapsed:.0f}s",
        tow_ok and gap_ok and elapsed < 900.0,
    )


def test_criterion_6_ablation_direction(bench):
    both = [bench.tow_of(seed, bench.unlearned(seed)) for seed in SEEDS]
    first = [
        bench.tow_of(seed, bench.unlearned(seed, aux=FIRST_ONLY, label="first-only"))
        for seed in SEEDS
    ]
    check(
        6,
        f"first-only {np.mean(first):.4f} < both+acc {np.mean(both):.4f}",
        float(np.mean(first)) < float(np.mean(both)),
    )


def test_criterion_7_request_size_robustness(bench):
    pair = bench.cfg.ablation_n_s_pair
    gaps = []
    for eval_n_s in pair:
        matched = [
            bench.tow_of(seed, bench.unlearned(seed, eval_n_s=eval_n_s, train_n_s=eval_n_s), n_s=eval_n_s)
            for seed in SEEDS
        ]
        other = pair[1] if eval_n_s == pair[0] else pair[0]
        mismatched = [
            bench.tow_of(seed, bench.unlearned(seed, eval_n_s=eval_n_s, train_n_s=other), n_s=eval_n_s)
            for seed in SEEDS
        ]
        gaps.append(abs(float(np.mean(matched)) - float(np.mean(mismatched))))
    check(7, f"matched-vs-mismatched gaps {[f'{g:.4f}' for g in gaps]}", max(gaps) <= 0.02)


def test_criterion_8_data_absence_contract(bench):
    from oneshot_unlearn.baselines import run_baseline
    from oneshot_unlearn.data import SplitBundle
    from dataclasses import replace as dc_replace

    arts = bench.arts(0)
    meta = bench.meta(0)
    log = AccessLog()
    support = AccessLoggedDataset(arts.request.support, "support", log)
    wrapped_request = dc_replace(
        arts.request,
        support=support,
        d_f=AccessLoggedDataset(arts.request.d_f, "d_f", log),
        d_r=AccessLoggedDataset(arts.request.d_r, "d_r", log),
    )
    wrapped_bundle = SplitBundle(
        d_tr=AccessLoggedDataset(arts.reduced_train, "d_tr", log),
        d_v=AccessLoggedDataset(arts.bundle.d_v, "d_v", log),
        d_te=AccessLoggedDataset(arts.bundle.d_te, "d_te", log),
        i_tr=arts.bundle.i_tr,
        i_v=arts.bundle.i_v,
        i_te=arts.bundle.i_te,
    )
    log.events.clear()

    apply_unlearning(arts.pretrained, meta, support)
    unlearn_reads = log.touched()
    log.events.clear()

    spec = next(s for s in bench.cfg.baselines if s.kind == "neg-grad-support")
    run_baseline(spec, arts.pretrained, wrapped_request, wrapped_bundle, bench.cfg.classifier)
    baseline_reads = log.touched()

    check(
        8,
        f"apply_unlearning read {sorted(unlearn_reads)}, neg-grad read {sorted(baseline_reads)}",
        unlearn_reads == {"support"} and baseline_reads == {"support"},
    )


def test_criterion_9_run_all_determinism(tmp_path):
    from oneshot_unlearn.cli import main
    from oneshot_unlearn.config import save_config
    from test_harness import tiny_config

    first_dir = tmp_path / "a"
    second_dir = tmp_path / "b"
    cfg_path = tmp_path / "cfg.yaml"
    save_config(tiny_config(first_dir, seeds=(0, 1)), cfg_path)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert main(["run-all", "--config", str(cfg_path)]) == 0
        assert main(["run-all", "--config", str(cfg_path), "--out", str(second_dir)]) == 0
    a = (first_dir / "summary.csv").read_bytes()
    b = (second_dir / "summary.csv").read_bytes()
    check(9, "summary.csv byte-identical across runs", a == b)


def _spearman(table) -> float:
    from scipy.stats import spearmanr

    return float(spearmanr(range(len(table)), [gap for _, _, gap, _ in table]).statistic)


def test_hardness_direction_matches_reported_trend(bench):
    from oneshot_unlearn.evaluation import bin_rows, identity_hardness_rows

    rows = []
    for seed in SEEDS:
        arts = bench.arts(seed)
        for state in (bench.unlearned(seed), bench.neg_grad(seed)):
            rows += identity_hardness_rows(state, arts.retrained, arts.request, arts.pretrained)
    table = bin_rows(rows, bench.cfg.analysis_bins)
    assert len(table) >= 2
    assert _spearman(table) >= 0.0


def test_drop_direction_matches_reported_trend(bench):
    from oneshot_unlearn.evaluation import bin_rows, identity_drop_rows

    rows = []
    for seed in SEEDS:
        arts = bench.arts(seed)
        for state in (bench.unlearned(seed), bench.neg_grad(seed)):
            rows += identity_drop_rows(state, arts.pretrained, arts.request, arts.pretrained)
    table = bin_rows(rows, bench.cfg.analysis_bins)
    assert len(table) >= 2
    assert _spearman(table) <= 0.0
