import pytest
import torch

from oneshot_unlearn.baselines import BaselineSpec, run_baseline
from oneshot_unlearn.classifier import (
    Architecture,
    TrainConfig,
    dataset_loss,
    init_classifier,
    retrain_oracle,
    train,
)
from oneshot_unlearn.data import AccessLog, AccessLoggedDataset, SplitBundle

from conftest import toy_setup


def _pretrained(seed=0):
    _, bundle, request, reduced = toy_setup(seed=seed)
    arch = Architecture(feature_dim=4, num_outputs=3)
    cfg = TrainConfig(epochs=4, lr=0.05, seed=seed)
    state = train(init_classifier(arch, seed), reduced, cfg)
    return bundle, request, reduced, state, cfg


def test_spec_validation():
    with pytest.raises(ValueError):
        BaselineSpec(kind="ssd")
    with pytest.raises(ValueError):
        BaselineSpec(kind="neg-grad-support", steps=0)
    with pytest.raises(ValueError):
        BaselineSpec(kind="neg-grad-support", step_size=0.0)


def test_noop_returns_bit_identical_parameters():
    bundle, request, _, state, cfg = _pretrained()
    out = run_baseline(BaselineSpec(kind="pretrain-noop"), state, request, bundle, cfg)
    assert out is not state
    for name in state.params:
        assert torch.equal(out.params[name], state.params[name])


def test_neg_grad_increases_support_loss_at_small_step():
    bundle, request, _, state, cfg = _pretrained()
    spec = BaselineSpec(kind="neg-grad-support", steps=1, step_size=1e-4)
    out = run_baseline(spec, state, request, bundle, cfg)
    assert dataset_loss(out, request.support) > dataset_loss(state, request.support)


def test_retrain_oracle_delegation_bit_exact():
    bundle, request, _, state, cfg = _pretrained()
    via_baseline = run_baseline(BaselineSpec(kind="retrain-oracle"), state, request, bundle, cfg)
    direct = retrain_oracle(bundle, request, cfg, arch=state.arch)
    for name in direct.params:
        assert torch.equal(via_baseline.params[name], direct.params[name])


@pytest.mark.parametrize("kind", ["pretrain-noop", "neg-grad-support"])
def test_support_only_baselines_read_nothing_else(kind):
    bundle, request, reduced, state, cfg = _pretrained()
    log = AccessLog()
    from dataclasses import replace

    wrapped_request = replace(
        request,
        support=AccessLoggedDataset(request.support, "support", log),
        d_f=AccessLoggedDataset(request.d_f, "d_f", log),
        d_r=AccessLoggedDataset(request.d_r, "d_r", log),
    )
    wrapped_bundle = SplitBundle(
        d_tr=AccessLoggedDataset(reduced, "d_tr", log),
        d_v=AccessLoggedDataset(bundle.d_v, "d_v", log),
        d_te=AccessLoggedDataset(bundle.d_te, "d_te", log),
        i_tr=bundle.i_tr,
        i_v=bundle.i_v,
        i_te=bundle.i_te,
    )
    log.events.clear()  # drop the reads made by the wrappers' own validation
    spec = BaselineSpec(kind=kind, steps=2, step_size=0.05)
    run_baseline(spec, state, wrapped_request, wrapped_bundle, cfg)
    assert log.touched() <= {"support"}
