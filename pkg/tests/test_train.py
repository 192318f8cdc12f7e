import json
from pathlib import Path

import pytest
import torch

from fontfits.batching import record_batch
from fontfits.data import synth_corpus
from fontfits.errors import InvalidArgumentError
from fontfits.losses import LossWeights
from fontfits.networks import ModelConfig, create_bundle, load_checkpoint
from fontfits.train import (
    TrainConfig,
    TrainState,
    _Shuffler,
    ablation_model_config,
    fit,
    train_config_from_dict,
    train_step,
)

FAST_MODEL = dict(base_channels=8, use_perception=False)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    synth_corpus(root, count=6, seed=5, eval_count=2)
    return root


def _cfg(corpus, out, **over):
    model = ModelConfig(**over.pop("model", FAST_MODEL))
    return TrainConfig(
        corpus=str(corpus), out_dir=str(out), iterations=over.pop("iterations", 3),
        batch_size=over.pop("batch_size", 2), seed=over.pop("seed", 0),
        deterministic=True, model=model, **over,
    )


def _snapshot(params):
    return [p.detach().clone() for p in params]


def _changed(before, after):
    return any(not torch.equal(a, b) for a, b in zip(before, after))


def _make_state(bundle, cfg, n_records):
    state = TrainState()
    state.opt_g = cfg.optimizer.build(bundle.generation_parameters())
    if bundle.config.use_discriminator:
        state.opt_d = cfg.optimizer.build(bundle.discriminator.parameters())
    state.sampler = _Shuffler(n_records, cfg.batch_size, cfg.seed)
    return state


def test_step_updates_all_generation_parameters(corpus, tmp_path, synth_records):
    cfg = _cfg(corpus, tmp_path, model=dict(base_channels=8, random_perception=True))
    bundle = create_bundle(cfg.model, 0)
    state = _make_state(bundle, cfg, len(synth_records))
    batch = record_batch(synth_records[:2])
    before = _snapshot(bundle.generation_parameters())
    report, state = train_step(bundle, batch, state, cfg)
    after = _snapshot(bundle.generation_parameters())
    pairs = list(zip(before, after))
    n_updated = sum(1 for a, b in pairs if not torch.equal(a, b))
    assert n_updated == len(pairs)
    assert report.total > 0


def test_step_without_discriminator_leaves_it_unchanged(corpus, tmp_path, synth_records):
    cfg = _cfg(corpus, tmp_path, model=dict(base_channels=8, use_perception=False,
                                            use_discriminator=False))
    bundle = create_bundle(cfg.model, 0)
    state = _make_state(bundle, cfg, 4)
    batch = record_batch(synth_records[:2])
    before = _snapshot(bundle.discriminator.parameters())
    report, _ = train_step(bundle, batch, state, cfg)
    after = _snapshot(bundle.discriminator.parameters())
    assert not _changed(before, after)
    assert report.adversarial == 0.0
    assert report.disc == 0.0


def test_discriminator_phase_does_not_touch_generators(corpus, tmp_path, synth_records):
    # zero generation weights in the total: the G step becomes a no-op update
    cfg = _cfg(corpus, tmp_path, model=dict(base_channels=8, use_perception=False),
               weights=LossWeights(w1=0.0, w2=0.0, w3=0.0, w4=0.0, w5=0.0))
    bundle = create_bundle(cfg.model, 0)
    state = _make_state(bundle, cfg, 4)
    batch = record_batch(synth_records[:2])
    before_g = _snapshot(bundle.generation_parameters())
    before_d = _snapshot(bundle.discriminator.parameters())
    train_step(bundle, batch, state, cfg)
    assert not _changed(before_g, _snapshot(bundle.generation_parameters()))
    assert _changed(before_d, _snapshot(bundle.discriminator.parameters()))


def test_baseline_logs_single_loss_term(corpus, tmp_path):
    cfg = _cfg(corpus, tmp_path / "base", iterations=2,
               model=dict(base_channels=8, use_context=False, use_skeleton=False,
                          use_discriminator=False, use_perception=False))
    result = fit(cfg)
    lines = [json.loads(l) for l in Path(result.log_path).read_text().splitlines()]
    assert len(lines) == 2
    for line in lines:
        losses = line["losses"]
        assert losses["reconst"] > 0
        for k in ("skeleton", "adversarial", "content", "style"):
            assert losses[k] == 0.0


def test_fit_iterations_one_gives_one_log_line(corpus, tmp_path):
    cfg = _cfg(corpus, tmp_path / "one", iterations=1)
    result = fit(cfg)
    lines = Path(result.log_path).read_text().splitlines()
    assert len(lines) == 1
    assert result.checkpoint_path.is_file()


def test_fit_empty_corpus_rejected(tmp_path):
    synth_corpus(tmp_path / "c", count=1, seed=0)
    cfg = _cfg(tmp_path / "c", tmp_path / "o", split="eval")
    with pytest.raises(Exception):
        fit(cfg)


def test_deterministic_runs_identical_logs(corpus, tmp_path):
    cfg_a = _cfg(corpus, tmp_path / "a", iterations=10)
    cfg_b = _cfg(corpus, tmp_path / "b", iterations=10)
    ra, rb = fit(cfg_a), fit(cfg_b)
    la = Path(ra.log_path).read_text().splitlines()
    lb = Path(rb.log_path).read_text().splitlines()
    for a, b in zip(la, lb):
        assert json.loads(a)["losses"] == json.loads(b)["losses"]


def test_log_totals_satisfy_weighted_sum(corpus, tmp_path):
    w = LossWeights(w1=2.0, w2=0.5, w3=1e-2, w4=1.0, w5=10.0)
    cfg = _cfg(corpus, tmp_path / "w", iterations=4,
               model=dict(base_channels=8, random_perception=True), weights=w)
    result = fit(cfg)
    for line in Path(result.log_path).read_text().splitlines():
        losses = json.loads(line)["losses"]
        expect = (w.w1 * losses["reconst"] + w.w2 * losses["skeleton"]
                  + w.w3 * losses["adversarial"] + w.w4 * losses["content"]
                  + w.w5 * losses["style"])
        assert losses["total"] == pytest.approx(expect, rel=1e-5)


def test_resume_matches_uninterrupted_run(corpus, tmp_path):
    full_cfg = _cfg(corpus, tmp_path / "full", iterations=14)
    full = fit(full_cfg)

    part_cfg = _cfg(corpus, tmp_path / "part", iterations=4, checkpoint_every=4)
    fit(part_cfg)
    resumed_cfg = _cfg(corpus, tmp_path / "part", iterations=14)
    resumed = fit(resumed_cfg, resume_from=tmp_path / "part" / "checkpoint_000004.pt")

    full_lines = [json.loads(l) for l in Path(full.log_path).read_text().splitlines()]
    part_lines = [json.loads(l) for l in Path(resumed.log_path).read_text().splitlines()]
    assert [l["losses"] for l in part_lines] == [l["losses"] for l in full_lines]

    a, _ = load_checkpoint(full.checkpoint_path)
    b, _ = load_checkpoint(resumed.checkpoint_path)
    for pa, pb in zip(a.state_dict().values(), b.state_dict().values()):
        assert torch.equal(pa, pb)


def test_perception_frozen_across_fit(corpus, tmp_path):
    cfg = _cfg(corpus, tmp_path / "frozen", iterations=3,
               model=dict(base_channels=8, random_perception=True))
    result = fit(cfg)
    fresh = create_bundle(cfg.model, cfg.seed)
    trained, _ = load_checkpoint(result.checkpoint_path)
    for (ka, pa), (kb, pb) in zip(
        sorted(fresh.perception.state_dict().items()),
        sorted(trained.perception.state_dict().items()),
    ):
        assert ka == kb
        assert torch.equal(pa, pb), f"perception weight {ka} changed during training"


def test_early_stop_on_target(corpus, tmp_path):
    cfg = _cfg(corpus, tmp_path / "stop", iterations=500, target_reconst=10.0)
    result = fit(cfg)
    assert result.stopped_early
    assert result.iterations_run == 1


def test_ablation_model_config_switches():
    base = ModelConfig(base_channels=8, random_perception=True)
    b = ablation_model_config("baseline", base)
    assert not (b.use_context or b.use_skeleton or b.use_discriminator or b.use_perception)
    nc = ablation_model_config("no_context", base)
    assert not nc.use_context and nc.use_skeleton
    with pytest.raises(InvalidArgumentError):
        ablation_model_config("bogus", base)


def test_train_config_from_dict_names_bad_field():
    with pytest.raises(InvalidArgumentError, match="wrongo"):
        train_config_from_dict({"corpus": "c", "out_dir": "o", "wrongo": 3})


def test_shuffler_state_round_trip():
    a = _Shuffler(10, 3, seed=7)
    seen = [a.next_batch() for _ in range(4)]
    state = a.state()
    b = _Shuffler(10, 3, seed=0)
    b.load_state(state)
    assert [a.next_batch() for _ in range(5)] == [b.next_batch() for _ in range(5)]
    assert seen  # consumed without error
