"""Mini-batch training, split evaluation and inference-vs-oracle timing."""
from __future__ import annotations

import io
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels, nn, oracle
from .dataset import Dataset
from .errors import EmptySplit
from .model import Model

OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 50
    lr: float = 5e-5
    epochs: int = 100
    seed: int = 0
    optimizer: str = "adam"
    shuffle: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr >= 0 or not np.isfinite(self.lr):
            raise ValueError(f"lr must be finite and >= 0, got {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")

    def to_dict(self):
        return {"batch_size": self.batch_size, "lr": self.lr, "epochs": self.epochs,
                "seed": self.seed, "optimizer": self.optimizer, "shuffle": self.shuffle}


@dataclass
class MetricsHistory:
    """Per-epoch train MSE (batch mean), valid MSE (infer mode) and seconds."""

    train_mse: list = field(default_factory=list)
    valid_mse: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def __len__(self):
        return len(self.train_mse)

    def append(self, train_mse, valid_mse, seconds):
        if not (np.isfinite(train_mse) and np.isfinite(valid_mse)):
            raise FloatingPointError(f"non-finite loss: train {train_mse}, valid {valid_mse}")
        self.train_mse.append(float(train_mse))
        self.valid_mse.append(float(valid_mse))
        self.seconds.append(float(seconds))

    @property
    def best_epoch(self) -> int:
        """1-based epoch of the lowest validation MSE (earliest on ties)."""
        if not self.valid_mse:
            raise ValueError("empty history")
        return int(np.argmin(self.valid_mse)) + 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("epoch,train_mse,valid_mse,seconds\n")
        for e, (t, v, s) in enumerate(zip(self.train_mse, self.valid_mse, self.seconds), start=1):
            buf.write(f"{e},{t:.17g},{v:.17g},{s:.17g}\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_csv())


@dataclass
class TrainResult:
    model: Model
    best_model: Model
    history: MetricsHistory


def _tensors(ds: Dataset, split: str, model: Model):
    idx = ds.indices(split)
    if not idx:
        raise EmptySplit(f"{split} split is empty")
    return ds.images(idx), model.normalize_labels(ds.targets(idx))


def normalized_mse(model: Model, x, y) -> float:
    pred = model.predict(x)
    return nn.mse_loss(pred, y)[0]


def train(model: Model, ds: Dataset, config: TrainConfig = TrainConfig(), *,
          record_time: bool = True, stop=None, on_epoch=None) -> TrainResult:
    """Train ``model`` in place on the train split, monitoring the valid split.

    Labels are standardized with the dataset's train statistics, which are
    copied into the model. ``stop(epoch, history)`` returning True ends
    training after that epoch; ``on_epoch(epoch, history)`` is a progress hook.
    With ``record_time`` off the seconds column is all zeros, which makes the
    history byte-reproducible.
    """
    if ds.stats is None:
        raise EmptySplit("dataset has no split assignment or an empty train split")
    model.label_mean = ds.stats.mean
    model.label_std = ds.stats.std
    xt, yt = _tensors(ds, "train", model)
    xv, yv = _tensors(ds, "valid", model)
    rng = np.random.default_rng(config.seed)
    state = nn.AdamState()
    step = nn.adam_step if config.optimizer == "adam" else nn.sgd_step
    history = MetricsHistory()
    best, best_valid = model.copy(), np.inf
    n = len(xt)
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        losses = []
        for lo in range(0, n, config.batch_size):
            sel = order[lo:lo + config.batch_size]
            out = model.forward(xt[sel], train=True)
            loss, dout = nn.mse_loss(out, yt[sel])
            grads = model.backward(dout)
            step(model.params, grads, state, config.lr)
            losses.append(loss)
        valid = normalized_mse(model, xv, yv)
        history.append(float(np.mean(losses)), valid,
                       time.perf_counter() - t0 if record_time else 0.0)
        if valid < best_valid:
            best, best_valid = model.copy(), valid
        if on_epoch is not None:
            on_epoch(epoch, history)
        if stop is not None and stop(epoch, history):
            break
    return TrainResult(model, best, history)


def evaluate(model: Model, ds: Dataset, split: str = "test"):
    """(mse, [(truth, prediction), ...]) over ``split`` in raw label units."""
    idx = ds.indices(split)
    if not idx:
        raise EmptySplit(f"{split} split is empty")
    truth = ds.targets(idx)[:, 0]
    pred = model.predict_denormalized(ds.images(idx))
    resid = pred - truth
    mse = float(np.mean(resid * resid))
    return mse, [(float(t), float(p)) for t, p in zip(truth, pred)]


@dataclass
class TimingReport:
    nn_batched: float
    nn_single: float
    oracle: float
    count: int
    panels: int
    hardware: str

    @property
    def speedup(self) -> float:
        return self.oracle / self.nn_batched

    def lines(self):
        return [
            f"samples: {self.count}",
            f"nn batched s/sample: {self.nn_batched:.6g}",
            f"nn single s/sample: {self.nn_single:.6g}",
            f"oracle s/sample (n={self.panels}): {self.oracle:.6g}",
            f"oracle/nn ratio: {self.speedup:.3g}",
            f"hardware: {self.hardware}",
        ]


def hardware_note() -> str:
    return (f"{platform.machine()} {platform.processor() or 'cpu'}, {os.cpu_count()} logical cores, "
            f"python {platform.python_version()}, kernels={kernels.BACKEND}")


def time_comparison(model: Model, ds: Dataset, indices=None, *, geometries=None,
                    panels: int = 200, repeats: int = 1,
                    config: oracle.OracleConfig | None = None) -> TimingReport:
    """Mean wall-clock seconds per sample: batched NN, single-sample NN, oracle.

    ``geometries`` maps airfoil id to its normalized section, needed to rerun
    the oracle. A warm-up pass of each path is excluded from the timings.
    """
    idx = list(range(len(ds))) if indices is None else list(indices)
    if len(idx) < 10:
        raise ValueError(f"need at least 10 samples for timing, got {len(idx)}")
    if geometries is None:
        raise ValueError("geometries are required to time the oracle")
    cfg = config or oracle.OracleConfig(panels=panels)
    x = ds.images(idx)
    meta = [(geometries[ds.sample(i).airfoil_id], ds.sample(i).aoa_deg,
             ds.sample(i).ground_clearance) for i in idx]

    def run_oracle():
        for g, a, h in meta:
            oracle.label(g, a, h, cfg.panels, ground_effect=cfg.ground_effect, polar=cfg.polar)

    def run_single():
        for k in range(len(x)):
            model.forward(x[k:k + 1])

    def run_batched():
        model.predict(x)

    timings = {}
    for name, fn in (("batched", run_batched), ("single", run_single), ("oracle", run_oracle)):
        fn()
        best = np.inf
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        timings[name] = best / len(idx)
    return TimingReport(timings["batched"], timings["single"], timings["oracle"], len(idx),
                        cfg.panels, hardware_note())

