"""Training loop: L1 objective summed over all decoders, Adam, halving lr.

An epoch is one pass over every (image, patch-slot) pair of the dataset;
the patch stream shuffles those pairs across images, crops aligned
quadruples and applies geometric augmentation, all driven by one seeded
rng so runs are reproducible. Mini-batches may mix white-balance settings
freely.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .model import NetConfig, WbNet, save_weights
from .synthdata import TrainExample, augment, sample_patches
from .tensor import NumericalError, Tensor4, adam_step, add, l1_loss


@dataclass
class TrainConfig:
    lr0: float = 1e-4
    lr_halving_epochs: int = 25
    batch_size: int = 32
    iterations: int = 1000
    patch: int = 128
    patches_per_image: int = 4
    seed: int = 0
    loss_reduction: str = "mean"   # "sum" is the literal objective; mean keeps lr scale-free
    checkpoint_every: int = 0      # 0 disables checkpoints
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if min(self.lr_halving_epochs, self.batch_size, self.patch,
               self.patches_per_image) < 1 or self.iterations < 0:
            raise ValueError("counts must be positive")
        if self.lr0 <= 0:
            raise ValueError(f"lr0 must be > 0, got {self.lr0}")
        if self.loss_reduction not in ("sum", "mean"):
            raise ValueError(f"loss_reduction must be 'sum' or 'mean', got {self.loss_reduction!r}")


def desk_profile() -> tuple[NetConfig, TrainConfig]:
    """Small configuration that trains to a usable model on one CPU in minutes."""
    net_cfg = NetConfig(levels=4, base_channels=8)
    train_cfg = TrainConfig(lr0=1e-3, lr_halving_epochs=150, batch_size=8,
                            iterations=2000, patch=64, patches_per_image=4)
    return net_cfg, train_cfg


def full_profile() -> tuple[NetConfig, TrainConfig]:
    """Full-scale configuration (days of CPU time; provided for completeness)."""
    net_cfg = NetConfig(levels=4, base_channels=24)
    train_cfg = TrainConfig(lr0=1e-4, lr_halving_epochs=25, batch_size=32,
                            iterations=165_000, patch=128, patches_per_image=4)
    return net_cfg, train_cfg


@dataclass
class LossRecord:
    iteration: int
    lr: float
    total: float
    per_decoder: dict[str, float]


@dataclass
class TrainState:
    net: WbNet
    iteration: int = 0
    epoch: int = 0
    loss_history: list[LossRecord] = field(default_factory=list)


def lr_schedule(cfg: TrainConfig, epoch: int) -> float:
    """lr0 halved once per lr_halving_epochs completed epochs."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return cfg.lr0 * 0.5 ** (epoch // cfg.lr_halving_epochs)


def _to_tensor(images: list[np.ndarray]) -> Tensor4:
    return Tensor4(np.stack([img.transpose(2, 0, 1) for img in images]).astype(np.float32))


def train_step(state: TrainState, batch: list[TrainExample], cfg: TrainConfig) -> LossRecord:
    """One forward/backward/Adam update over a batch of patch quadruples."""
    net = state.net
    inputs = _to_tensor([p.input for p in batch])
    outputs = net.forward_all(inputs)

    per_decoder: dict[str, float] = {}
    total_loss = None
    for d in net.config.decoder_ids:
        target = _to_tensor([p.targets[d] for p in batch])
        loss = l1_loss(outputs[d], target, reduction=cfg.loss_reduction)
        per_decoder[d] = loss.item()
        total_loss = loss if total_loss is None else add(total_loss, loss)

    lr = lr_schedule(cfg, state.epoch)
    total = total_loss.item()
    if not np.isfinite(total):
        raise NumericalError(
            f"non-finite loss at iteration {state.iteration} (lr={lr:g}, "
            f"per-decoder={per_decoder})")

    net.zero_grad()
    total_loss.backward()
    adam_step(net.parameters(), lr=lr)

    state.iteration += 1
    record = LossRecord(iteration=state.iteration, lr=lr, total=total,
                        per_decoder=per_decoder)
    state.loss_history.append(record)
    return record


def _patch_stream(dataset: list[TrainExample], cfg: TrainConfig, rng: np.random.Generator):
    """Infinite stream of augmented patches; one epoch covers every (image, slot) pair."""
    while True:
        order = rng.permutation(len(dataset) * cfg.patches_per_image)
        for k in order:
            example = dataset[int(k) % len(dataset)]
            patch = sample_patches(example, patch=cfg.patch, count=1, rng=rng)[0]
            yield augment(patch, rng)


def fit(net: WbNet, dataset: list[TrainExample], cfg: TrainConfig,
        log_every: int = 0, stop_condition=None,
        check_every: int = 100) -> tuple[WbNet, list[LossRecord]]:
    """Run up to cfg.iterations training steps over the dataset's patch stream.

    ``stop_condition(loss_history) -> bool``, evaluated every ``check_every``
    iterations, ends the run early (e.g. once a loss target is reached).
    """
    if not dataset:
        raise ValueError("dataset is empty")
    state = TrainState(net=net)
    rng = np.random.default_rng(cfg.seed)
    stream = _patch_stream(dataset, cfg, rng)
    epoch_size = len(dataset) * cfg.patches_per_image
    patches_seen = 0

    for _ in range(cfg.iterations):
        batch = [next(stream) for _ in range(cfg.batch_size)]
        record = train_step(state, batch, cfg)
        patches_seen += cfg.batch_size
        state.epoch = patches_seen // epoch_size
        if log_every and record.iteration % log_every == 0:
            print(f"iter {record.iteration:6d} lr {record.lr:.2e} "
                  f"loss {record.total:.5f}", flush=True)
        if (cfg.checkpoint_every and cfg.checkpoint_dir
                and record.iteration % cfg.checkpoint_every == 0):
            write_checkpoint(state, os.path.join(
                cfg.checkpoint_dir, f"ckpt_{record.iteration:07d}.dwbe"))
        if (stop_condition is not None and record.iteration % check_every == 0
                and stop_condition(state.loss_history)):
            break
    return net, state.loss_history


def write_checkpoint(state: TrainState, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    save_weights(state.net, path,
                 train_state={"iteration": state.iteration, "epoch": state.epoch})


def save_loss_history(history: list[LossRecord], path: str,
                      decoder_ids: tuple[str, ...] = ("awb", "tungsten", "shade")) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "lr", "loss_total"]
                   + [f"loss_{d}" for d in decoder_ids])
        for rec in history:
            w.writerow([rec.iteration, f"{rec.lr:.8g}", f"{rec.total:.8g}"]
                       + [f"{rec.per_decoder[d]:.8g}" for d in decoder_ids])


def smoothed_losses(history: list[LossRecord], window: int = 100) -> np.ndarray:
    """Moving average of the total loss over the given window."""
    totals = np.array([r.total for r in history], dtype=np.float64)
    if totals.size == 0:
        return totals
    window = min(window, totals.size)
    kernel = np.ones(window) / window
    return np.convolve(totals, kernel, mode="valid")
