"""Data preparation, the multi-horizon training loop, evaluation and checkpoints."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .checkpoint import load_arrays, save_arrays
from .config import TrainConfig
from .data import (
    AlignedFrame,
    Standardizer,
    apply_standardizer,
    chronological_split,
    fit_standardizer,
    impute,
    make_windows,
)
from .errors import ContractError, FormatError, NumericError, ShapeError, TrainingError
from .metrics import MetricsReport
from .model import SemfModel
from .optim import Adam
from .timefreq import render_batch

log = logging.getLogger(__name__)


@dataclass
class Features:
    images: np.ndarray  # (N, n_scales, L)
    exo: np.ndarray  # (N, L, D-1)
    targets: np.ndarray  # (N, 6) standardised
    raw_targets: np.ndarray  # (N, 6)
    anchor_levels: np.ndarray  # (N,) last observed target value

    def __len__(self) -> int:
        return self.targets.shape[0]


def featurize(samples, cfg: TrainConfig) -> Features:
    samples = list(samples)
    if not samples:
        raise ContractError("cannot featurize an empty split")
    histories = np.stack([s.history for s in samples])
    return Features(
        images=render_batch(histories, cfg.image_kind, cfg.n_scales),
        exo=np.stack([s.exo_window for s in samples]),
        targets=np.stack([s.targets for s in samples]),
        raw_targets=np.stack([s.raw_targets for s in samples]),
        anchor_levels=histories[:, -1].copy(),
    )


@dataclass
class DataSplits:
    train: list
    val: list
    test: list
    standardizer: Standardizer
    n_vars: int  # exogenous variable count, D - 1


def prepare_splits(frame: AlignedFrame, cfg: TrainConfig) -> DataSplits:
    """Impute, window, split 65/15/20, fit target scaling on train only."""
    frame = impute(frame)
    windows = make_windows(frame, cfg.seq_len)
    train, val, test = chronological_split(windows)
    if cfg.train_limit:
        train = train[-cfg.train_limit :]
    std = fit_standardizer(train, relative=cfg.relative_targets)
    return DataSplits(
        apply_standardizer(train, std),
        apply_standardizer(val, std),
        apply_standardizer(test, std),
        std,
        frame.exogenous.shape[1],
    )


def mse_multi_horizon(pred, target) -> T.Tensor:
    """Mean squared error over the batch and all horizons."""
    pred, target = T.as_tensor(pred), T.as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} does not match target shape {target.shape}")
    return T.mse(pred, target)


@dataclass
class EpochRecord:
    epoch: int
    train_mse: float
    val_mse: float


@dataclass
class TrainResult:
    model: SemfModel
    standardizer: Standardizer
    log: list = field(default_factory=list)
    best_epoch: int = 0
    # eval-mode training MSE when the loop ended; only measured with stop_below
    final_train_mse: float | None = None

    @property
    def best_val_mse(self) -> float:
        return min(r.val_mse for r in self.log)

    def log_csv(self) -> str:
        lines = ["epoch,train_mse,val_mse"]
        lines.extend(f"{r.epoch},{r.train_mse!r},{r.val_mse!r}" for r in self.log)
        return "\n".join(lines) + "\n"


def predict_standardized(model: SemfModel, feats: Features, batch_size: int | None = None) -> np.ndarray:
    """Eval-mode predictions in fixed batch order."""
    batch_size = batch_size or model.cfg.batch_size
    out = [model.predict(feats.images[i : i + batch_size], feats.exo[i : i + batch_size]) for i in range(0, len(feats), batch_size)]
    return np.concatenate(out, axis=0)


def _split_mse(model, feats: Features) -> float:
    pred = predict_standardized(model, feats)
    return float(np.mean((pred - feats.targets) ** 2))


def train(cfg: TrainConfig, splits: DataSplits, stop_below: float | None = None) -> TrainResult:
    """Adam on multi-horizon MSE with best-validation early stopping.

    Only ``splits.train`` and ``splits.val`` are read. With ``stop_below``
    set, training also ends once the eval-mode training MSE drops below it.
    """
    if len(splits.train) == 0 or len(splits.val) == 0:
        raise ContractError("train and validation splits must be non-empty")
    train_f = featurize(splits.train, cfg)
    val_f = featurize(splits.val, cfg)
    model = SemfModel(cfg, splits.n_vars)
    opt = Adam(model.parameters(), lr=cfg.learning_rate)
    shuffle_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed).spawn(3)[2]))
    result = TrainResult(model, splits.standardizer)
    best_state, best_val, stale = None, math.inf, 0
    n = len(train_f)
    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        order = shuffle_rng.permutation(n)
        total = 0.0
        try:
            for i in range(0, n, cfg.batch_size):
                idx = np.sort(order[i : i + cfg.batch_size])
                loss = mse_multi_horizon(model(train_f.images[idx], train_f.exo[idx]), train_f.targets[idx])
                loss.backward()
                opt.step()
                total += loss.item() * idx.size
            val_mse = _split_mse(model, val_f)
        except NumericError as exc:
            raise TrainingError(f"epoch {epoch}: training diverged ({exc})") from exc
        train_mse = total / n
        if not (math.isfinite(train_mse) and math.isfinite(val_mse)):
            raise TrainingError(f"epoch {epoch}: loss is not finite")
        result.log.append(EpochRecord(epoch, train_mse, val_mse))
        log.info("epoch %d train_mse %.6f val_mse %.6f", epoch, train_mse, val_mse)
        if val_mse < best_val:
            best_val, stale = val_mse, 0
            best_state = model.state_dict()
            result.best_epoch = epoch
        else:
            stale += 1
        if stop_below is not None:
            result.final_train_mse = _split_mse(model, train_f)
            if result.final_train_mse < stop_below:
                break
        if stale >= cfg.patience:
            break
    model.load_state_dict(best_state)
    model.eval()
    return result


def evaluate(model: SemfModel, split, standardizer: Standardizer) -> MetricsReport:
    """Metrics in price units; dropout off, no parameter changes."""
    if standardizer is None:
        raise ContractError("evaluate needs the training standardizer")
    samples = list(split)
    if not samples:
        raise ContractError("cannot evaluate on an empty split")
    feats = featurize(samples, model.cfg)
    pred = standardizer.inverse(predict_standardized(model, feats), feats.anchor_levels)
    return MetricsReport.from_predictions(feats.raw_targets, pred)


def persistence_baseline(split) -> MetricsReport:
    """Forecast every horizon with the last observed value."""
    samples = list(split)
    if not samples:
        raise ContractError("cannot evaluate on an empty split")
    raw = np.stack([s.raw_targets for s in samples])
    last = np.array([s.last_value for s in samples])
    return MetricsReport.from_predictions(raw, np.repeat(last[:, None], raw.shape[1], axis=1))


# ------------------------------------------------------------------ checkpoints

_STD_MEAN = "standardizer.mean"
_STD_STD = "standardizer.std"
_STD_REL = "standardizer.relative"
_N_VARS = "meta.n_vars"


def save_model(path, model: SemfModel, standardizer: Standardizer) -> None:
    arrays = {f"param.{k}": v for k, v in model.state_dict().items()}
    arrays[_STD_MEAN] = standardizer.per_horizon_mean
    arrays[_STD_STD] = standardizer.per_horizon_std
    arrays[_STD_REL] = np.array([float(standardizer.relative)])
    arrays[_N_VARS] = np.array([float(model.n_vars)])
    save_arrays(path, arrays)


def load_model(path, cfg: TrainConfig) -> tuple:
    arrays = load_arrays(path)
    try:
        n_vars = int(arrays[_N_VARS][0])
        std = Standardizer(arrays[_STD_MEAN], arrays[_STD_STD], bool(arrays[_STD_REL][0]))
    except KeyError as exc:
        raise FormatError(f"{path}: missing entry {exc}") from None
    model = SemfModel(cfg, n_vars)
    state = {k[len("param.") :]: v for k, v in arrays.items() if k.startswith("param.")}
    try:
        model.load_state_dict(state)
    except (KeyError, ShapeError) as exc:
        raise FormatError(f"{path}: checkpoint does not match config ({exc})") from None
    model.eval()
    return model, std


def write_run_artifacts(out_dir, result: TrainResult, report: MetricsReport, cfg: TrainConfig) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "config": out / "config.txt",
        "checkpoint": out / "model.semf",
        "log": out / "train_log.csv",
        "metrics": out / "test_metrics.csv",
        "table": out / "test_metrics.txt",
    }
    cfg.save(paths["config"])
    save_model(paths["checkpoint"], result.model, result.standardizer)
    paths["log"].write_text(result.log_csv())
    paths["metrics"].write_text(report.to_csv())
    paths["table"].write_text(report.to_table() + "\n")
    return paths
