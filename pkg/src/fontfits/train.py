"""Alternating adversarial training with ablation switches and
deterministic, resumable desk-scale runs.

One iteration is: (a) a discriminator update on the real/fake objective,
then (b) one joint update of both encoders and both generators on the
weighted total. Disabled branches contribute nothing to either phase.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from .batching import record_batch
from .data import load_corpus, load_manifest
from .errors import ConfigurationError, InvalidArgumentError, TrainingDivergenceError
from .losses import (
    LossReport,
    LossWeights,
    dice_skeleton_loss,
    perceptual_losses,
    reconstruction_l1,
    total_loss,
)
from .metrics import EvalReport, evaluate_corpus
from .networks import ModelBundle, ModelConfig, create_bundle, load_checkpoint, save_checkpoint

PROB_EPS = 1e-7

# §-style ablation variants: label -> ModelConfig switch overrides
VARIANTS = {
    "baseline": dict(use_context=False, use_skeleton=False,
                     use_discriminator=False, use_perception=False),
    "proposed": {},
    "no_context": dict(use_context=False),
    "no_discriminator": dict(use_discriminator=False),
    "no_perception": dict(use_perception=False),
    "no_skeleton": dict(use_skeleton=False),
}

VARIANT_LABELS = {
    "baseline": "Baseline",
    "proposed": "Proposed",
    "no_context": "w/o Context Encoder",
    "no_discriminator": "w/o Discriminator",
    "no_perception": "w/o Perception Network",
    "no_skeleton": "w/o Skeleton Generator",
}


@dataclass
class OptimizerConfig:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999

    def __post_init__(self):
        if self.lr <= 0:
            raise InvalidArgumentError(f"lr must be > 0, got {self.lr}")
        for b in (self.beta1, self.beta2):
            if not 0.0 <= b < 1.0:
                raise InvalidArgumentError(f"betas must be in [0, 1), got {b}")

    def build(self, params) -> torch.optim.Adam:
        return torch.optim.Adam(params, lr=self.lr, betas=(self.beta1, self.beta2))


@dataclass
class TrainConfig:
    corpus: str
    out_dir: str
    iterations: int = 5000
    batch_size: int = 8
    seed: int = 0
    split: str = "train"
    weights: LossWeights = field(default_factory=LossWeights)
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    checkpoint_every: int = 0     # 0: only the final checkpoint
    eval_every: int = 0           # 0: no mid-run eval snapshots
    deterministic: bool = False
    target_reconst: float | None = None  # early stop once reached
    cache_perception: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidArgumentError("iterations must be >= 1")
        if self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be >= 1")


def train_config_from_dict(d: dict) -> TrainConfig:
    """Build a TrainConfig from parsed JSON, naming any bad field."""
    d = dict(d)
    try:
        if "weights" in d:
            d["weights"] = LossWeights(**d["weights"])
        if "model" in d:
            d["model"] = ModelConfig(**d["model"])
        if "optimizer" in d:
            d["optimizer"] = OptimizerConfig(**d["optimizer"])
        return TrainConfig(**d)
    except TypeError as e:
        raise InvalidArgumentError(f"bad training config: {e}") from e


class _Shuffler:
    """Epoch-shuffled batch indices with checkpointable state."""

    def __init__(self, n: int, batch_size: int, seed: int):
        self.n = n
        self.batch_size = batch_size
        self.generator = torch.Generator().manual_seed(seed)
        self.queue: list[int] = []

    def next_batch(self) -> list[int]:
        while len(self.queue) < self.batch_size:
            self.queue.extend(torch.randperm(self.n, generator=self.generator).tolist())
        out, self.queue = self.queue[: self.batch_size], self.queue[self.batch_size :]
        return out

    def state(self) -> dict:
        return {"generator": self.generator.get_state(), "queue": list(self.queue)}

    def load_state(self, state: dict):
        self.generator.set_state(state["generator"])
        self.queue = list(state["queue"])


@dataclass
class TrainState:
    iteration: int = 0
    opt_g: torch.optim.Optimizer | None = None
    opt_d: torch.optim.Optimizer | None = None
    sampler: _Shuffler | None = None
    running: dict = field(default_factory=dict)

    def update_running(self, report: LossReport, alpha: float = 0.05):
        for k, v in report.as_dict().items():
            prev = self.running.get(k)
            self.running[k] = v if prev is None else (1 - alpha) * prev + alpha * v


def _d_probs(bundle, i_t, title):
    return bundle.discriminator(i_t, title).clamp(PROB_EPS, 1.0 - PROB_EPS)


def train_step(bundle: ModelBundle, batch: dict, state: TrainState, cfg: TrainConfig,
               t_feats: list | None = None) -> tuple[LossReport, TrainState]:
    """One alternation: discriminator phase, then joint generation phase.

    ``t_feats`` may carry precomputed perception features of the batch's
    ground-truth titles (they are constants of the frozen extractor).
    """
    mcfg = bundle.config
    bundle.train()
    i_t, cover, mask = batch["i_t"], batch["cover"], batch["mask"]
    t_t, t_sk = batch["t_t"], batch["t_sk"]

    o_t, o_sk = bundle.generate(i_t, cover, mask)

    d_value = 0.0
    if mcfg.use_discriminator:
        state.opt_d.zero_grad(set_to_none=True)
        d_loss = -(
            torch.log(_d_probs(bundle, i_t, t_t)).mean()
            + torch.log(1.0 - _d_probs(bundle, i_t, o_t.detach())).mean()
        )
        if not math.isfinite(d_loss.item()):
            raise TrainingDivergenceError("disc", d_loss.item())
        d_loss.backward()
        state.opt_d.step()
        d_value = float(d_loss.detach())

    parts: dict = {"reconst": reconstruction_l1(t_t, o_t)}
    if mcfg.use_skeleton:
        parts["skeleton"] = dice_skeleton_loss(t_sk, o_sk)
    if mcfg.use_discriminator:
        parts["adversarial"] = -torch.log(_d_probs(bundle, i_t, o_t)).mean()
    if mcfg.use_perception:
        feats_t = t_feats if t_feats is not None else bundle.perception(t_t)
        feats_o = bundle.perception(o_t)
        content, style = perceptual_losses(feats_t, feats_o)
        parts["content"] = content
        parts["style"] = style

    total, report = total_loss(parts, cfg.weights)
    state.opt_g.zero_grad(set_to_none=True)
    total.backward()
    state.opt_g.step()

    report.disc = d_value
    state.iteration += 1
    state.update_running(report)
    return report, state


@dataclass
class FitResult:
    checkpoint_path: Path
    log_path: Path
    iterations_run: int
    stopped_early: bool
    final: LossReport


def _perception_cache(bundle, t_t: torch.Tensor, chunk: int = 8) -> list[torch.Tensor]:
    feats = None
    with torch.no_grad():
        for i in range(0, t_t.shape[0], chunk):
            taps = bundle.perception(t_t[i : i + chunk])
            if feats is None:
                feats = [[t] for t in taps]
            else:
                for acc, t in zip(feats, taps):
                    acc.append(t)
    return [torch.cat(acc, dim=0) for acc in feats]


def _train_state_payload(state: TrainState) -> dict:
    return {
        "iteration": state.iteration,
        "opt_g": state.opt_g.state_dict(),
        "opt_d": state.opt_d.state_dict() if state.opt_d else None,
        "sampler": state.sampler.state(),
        "torch_rng": torch.get_rng_state(),
        "running": dict(state.running),
    }


def fit(cfg: TrainConfig, resume_from=None, log=None) -> FitResult:
    """Run the training loop over a corpus split; returns checkpoint + log paths.

    Training state rides inside the checkpoint, so a resumed run continues
    the interrupted one exactly (bit-compatible in deterministic mode).
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(cfg.corpus)
    records = list(load_corpus(manifest, cfg.split))
    if not records:
        raise InvalidArgumentError(f"corpus split {cfg.split!r} is empty")

    if cfg.deterministic:
        torch.use_deterministic_algorithms(True)
    torch.manual_seed(cfg.seed)

    state = TrainState()
    if resume_from:
        bundle, extra = load_checkpoint(resume_from)
        ts = extra.get("train_state")
        if ts is None:
            raise ConfigurationError(f"{resume_from} has no training state to resume")
        bundle.train()
        state.iteration = ts["iteration"]
        state.running = dict(ts.get("running", {}))
    else:
        bundle = create_bundle(cfg.model, cfg.seed)

    state.opt_g = cfg.optimizer.build(bundle.generation_parameters())
    state.opt_d = (
        cfg.optimizer.build(bundle.discriminator.parameters())
        if cfg.model.use_discriminator
        else None
    )
    state.sampler = _Shuffler(len(records), cfg.batch_size, cfg.seed + 1)
    if resume_from:
        state.opt_g.load_state_dict(ts["opt_g"])
        if state.opt_d is not None and ts["opt_d"] is not None:
            state.opt_d.load_state_dict(ts["opt_d"])
        state.sampler.load_state(ts["sampler"])
        torch.set_rng_state(ts["torch_rng"])

    tensors = record_batch(records)
    t_feats_all = None
    if cfg.model.use_perception and cfg.cache_perception:
        t_feats_all = _perception_cache(bundle, tensors["t_t"])

    (out_dir / "train_config.json").write_text(json.dumps(_config_json(cfg), indent=1))
    log_path = out_dir / "train_log.jsonl"
    ck_path = out_dir / "checkpoint_final.pt"
    eval_records = None
    stopped_early = False
    report = LossReport()

    mode = "a" if resume_from else "w"
    with open(log_path, mode) as log_fh:
        while state.iteration < cfg.iterations:
            idx = state.sampler.next_batch()
            batch = {k: v[idx] for k, v in tensors.items()}
            t_feats = [f[idx] for f in t_feats_all] if t_feats_all is not None else None
            t0 = time.time()
            report, state = train_step(bundle, batch, state, cfg, t_feats=t_feats)
            line = {
                "iter": state.iteration,
                "losses": report.as_dict(),
                "wall_time": round(time.time() - t0, 4),
            }
            log_fh.write(json.dumps(line) + "\n")
            log_fh.flush()
            if log and (state.iteration % 100 == 0 or state.iteration == 1):
                log(f"iter {state.iteration}/{cfg.iterations} "
                    f"total {report.total:.4f} reconst {report.reconst:.4f}")

            if cfg.checkpoint_every and state.iteration % cfg.checkpoint_every == 0:
                save_checkpoint(bundle, out_dir / f"checkpoint_{state.iteration:06d}.pt",
                                extra={"train_state": _train_state_payload(state)})
            if cfg.eval_every and state.iteration % cfg.eval_every == 0 \
                    and "eval" in manifest.splits:
                if eval_records is None:
                    eval_records = list(load_corpus(manifest, "eval"))
                snap = evaluate_corpus(bundle, eval_records, variant="snapshot")
                with open(out_dir / "eval_log.jsonl", "a") as ev:
                    ev.write(json.dumps({"iter": state.iteration, "means": snap.means}) + "\n")
                bundle.train()
            if cfg.target_reconst is not None and report.reconst < cfg.target_reconst:
                stopped_early = True
                break

    save_checkpoint(bundle, ck_path, extra={"train_state": _train_state_payload(state)})
    return FitResult(
        checkpoint_path=ck_path,
        log_path=log_path,
        iterations_run=state.iteration,
        stopped_early=stopped_early,
        final=report,
    )


def _config_json(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["out_dir"] = str(cfg.out_dir)
    d["corpus"] = str(cfg.corpus)
    return d


def ablation_model_config(variant: str, base: ModelConfig) -> ModelConfig:
    if variant not in VARIANTS:
        raise InvalidArgumentError(
            f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}"
        )
    d = asdict(base)
    d.update(VARIANTS[variant])
    return ModelConfig(**d)


def run_ablation_suite(cfg: TrainConfig, variants=None, classifier=None,
                       train_if_missing: bool = True, log=None) -> dict[str, EvalReport]:
    """Train (or load) every ablation variant and score it on the eval split."""
    variants = list(variants or VARIANTS)
    manifest = load_manifest(cfg.corpus)
    if "eval" not in manifest.splits:
        raise InvalidArgumentError("ablation suite needs an 'eval' split")
    eval_records = list(load_corpus(manifest, "eval"))

    reports: dict[str, EvalReport] = {}
    for variant in variants:
        vdir = Path(cfg.out_dir) / variant
        ck = vdir / "checkpoint_final.pt"
        if not ck.is_file():
            if not train_if_missing:
                raise ConfigurationError(f"missing checkpoint for variant {variant!r}: {ck}")
            vcfg = TrainConfig(**{**asdict_shallow(cfg),
                                  "out_dir": str(vdir),
                                  "model": ablation_model_config(variant, cfg.model)})
            if log:
                log(f"training variant {variant}")
            fit(vcfg, log=log)
        bundle, _ = load_checkpoint(ck)
        reports[variant] = evaluate_corpus(
            bundle, eval_records, classifier=classifier, variant=VARIANT_LABELS[variant]
        )
    return reports


def asdict_shallow(cfg: TrainConfig) -> dict:
    """Dataclass fields without recursing into the nested configs."""
    return {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}


def ablation_table(reports: dict[str, EvalReport]) -> str:
    order = [v for v in ("baseline", "proposed", "no_context", "no_discriminator",
                         "no_perception", "no_skeleton") if v in reports]
    lines = [EvalReport.table_header()]
    lines += [reports[v].table_row() for v in order]
    return "\n".join(lines)
