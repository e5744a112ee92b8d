"""Training loop: Adam + OneCycle (max LR 1e-3) on the composite objective.

Per-step data protocol: draw a batch of pairs from the train split,
histogram-match each chosen input patch to its full-aperture target, then
apply one shared dihedral transform per sample (matching before augmenting
keeps the matched distributions aligned with the geometric transform). SI
draws one look index per sample and step; MF permutes the look order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .losses import LossWeights, composite_loss
from .models import build_model
from .records import PairDataset


@dataclass
class TrainConfig:
    mode: str = "si"                   # 'si' or 'mf'
    steps: int = 200
    batch_size: int = 4
    max_lr: float = 1e-3
    base_width: int = 16
    augment: bool = True
    histogram_match: bool = True
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    split: str = "train"

    def to_dict(self):
        return {
            "mode": self.mode, "steps": self.steps,
            "batch_size": self.batch_size, "max_lr": self.max_lr,
            "base_width": self.base_width, "augment": self.augment,
            "histogram_match": self.histogram_match, "seed": self.seed,
            "weights": [self.weights.alpha, self.weights.beta,
                        self.weights.gamma],
            "split": self.split,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        weights = d.pop("weights", None)
        config = cls(**d)
        if weights is not None:
            config.weights = LossWeights(*weights)
        return config


def dihedral_np(patch: np.ndarray, element: int) -> np.ndarray:
    """element = flip * 4 + quarter-turns, applied as flip then rot90."""
    out = patch
    if element >= 4:
        out = np.fliplr(out)
    return np.rot90(out, k=element % 4).copy()


def match_histogram_np(source: np.ndarray, reference: np.ndarray,
                       levels: int = 256) -> np.ndarray:
    """Quantile mapping of source values onto the reference distribution."""
    ref_min, ref_max = float(reference.min()), float(reference.max())
    if ref_max - ref_min < 1e-12:
        return np.full_like(source, ref_min)
    quantiles = np.linspace(0.0, 1.0, levels)
    src_q = np.quantile(source, quantiles)
    ref_q = np.quantile(reference, quantiles)
    src_q = np.maximum.accumulate(src_q)
    matched = np.interp(source.ravel(), src_q, ref_q)
    return matched.reshape(source.shape).astype(source.dtype)


def _make_batch(dataset: PairDataset, config: TrainConfig,
                rng: np.random.Generator):
    """Returns (inputs (B, C, S, S), targets (B, 1, S, S)) float32 arrays."""
    idx = rng.integers(len(dataset), size=config.batch_size)
    xs, ys = [], []
    for i in idx:
        target = dataset.targets[i]
        if config.mode == "si":
            look = int(rng.integers(dataset.num_looks))
            chosen = dataset.inputs[i, look:look + 1]
        else:
            order = rng.permutation(dataset.num_looks)
            chosen = dataset.inputs[i][order]
        if config.histogram_match:
            chosen = np.stack([match_histogram_np(c, target)
                               for c in chosen])
        if config.augment:
            element = int(rng.integers(8))
            chosen = np.stack([dihedral_np(c, element) for c in chosen])
            target = dihedral_np(target, element)
        xs.append(chosen)
        ys.append(target[None])
    return (np.stack(xs).astype(np.float32),
            np.stack(ys).astype(np.float32))


def train(data_dir: str, config: TrainConfig, out_dir: str) -> dict:
    """Train a toy enhancer; saves model.pt, train_config.json, and the
    loss curve. Returns {'loss_curve': [...], 'model_dir': out_dir}."""
    dataset = PairDataset(data_dir, split=config.split)
    dataset.assert_single_split()

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    model = build_model(config.mode, dataset.num_looks, config.base_width)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.max_lr / 25)
    scheduler = torch.optim.lr_scheduler.OneCycleLR(
        optimizer, max_lr=config.max_lr, total_steps=config.steps)

    model.train()
    curve = []
    for step in range(config.steps):
        xs, ys = _make_batch(dataset, config, rng)
        inputs = torch.from_numpy(xs)
        targets = torch.from_numpy(ys)
        optimizer.zero_grad()
        pred = model(inputs)
        loss, _ = composite_loss(pred, targets, config.weights)
        if not torch.isfinite(loss):
            raise RuntimeError(
                f"non-finite loss at step {step}: {loss.item()!r}; "
                f"lr={scheduler.get_last_lr()[0]:.2e}"
            )
        loss.backward()
        optimizer.step()
        scheduler.step()
        curve.append(float(loss.item()))

    os.makedirs(out_dir, exist_ok=True)
    torch.save(model.state_dict(), os.path.join(out_dir, "model.pt"))
    meta = config.to_dict()
    meta["num_looks"] = dataset.num_looks
    meta["patch_size"] = dataset.patch_size
    with open(os.path.join(out_dir, "train_config.json"), "w",
              encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "loss_curve.json"), "w",
              encoding="utf-8") as fh:
        json.dump(curve, fh)
    return {"loss_curve": curve, "model_dir": out_dir}


def load_model(model_dir: str):
    with open(os.path.join(model_dir, "train_config.json"), "r",
              encoding="utf-8") as fh:
        meta = json.load(fh)
    model = build_model(meta["mode"], meta["num_looks"],
                        meta["base_width"])
    state = torch.load(os.path.join(model_dir, "model.pt"),
                       weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, meta
