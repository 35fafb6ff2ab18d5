"""Ablation grids: image kind, exogenous encoder, fusion, patch x scale, sequence length."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import TrainConfig
from .data import AlignedFrame
from .errors import UsageError
from .metrics import MetricsReport, comparison_table
from .training import evaluate, prepare_splits, train

log = logging.getLogger(__name__)

# axis -> (row label headers, [(labels, config overrides)])
AXES = {
    "image": (
        ("Image",),
        [((k,), {"image_kind": k}) for k in ("line", "stft", "cmor", "morlet")],
    ),
    "exo_encoder": (
        ("Exogenous encoder",),
        [(("MLP",), {"exo_encoder_kind": "mlp"}), (("Transformer",), {"exo_encoder_kind": "transformer"})],
    ),
    "fusion": (
        ("Fusion",),
        [(("Single CA",), {"fusion_kind": "single"}), (("Bi-CA",), {"fusion_kind": "bi"})],
    ),
    "patch_scale": (
        ("Patch", "Scales"),
        [((p, s), {"patch_size": p, "n_scales": s}) for p, s in ((8, 64), (16, 64), (8, 128), (16, 128))],
    ),
    "seq_len": (
        ("Seq len",),
        [((n,), {"seq_len": n}) for n in (30, 60, 90, 120)],
    ),
}


@dataclass
class CellResult:
    labels: tuple
    config: TrainConfig
    report: MetricsReport


def axis_cells(axis: str, base: TrainConfig) -> list:
    """``[(labels, config)]`` for one axis; every cell keeps the base seed."""
    if axis not in AXES:
        raise UsageError(f"unknown ablation axis {axis!r}; valid: {', '.join(AXES)}")
    return [(labels, base.replace(**overrides)) for labels, overrides in AXES[axis][1]]


def run_cell(cfg: TrainConfig, frame: AlignedFrame) -> MetricsReport:
    """Train on the frame's train/val splits and report on its test split.

    This is the same path the ``train`` command takes, so a cell can be
    reproduced by running that command with the cell's config.
    """
    splits = prepare_splits(frame, cfg)
    result = train(cfg, splits)
    return evaluate(result.model, splits.test, splits.standardizer)


def _cell_job(args):
    cfg, frame = args
    return run_cell(cfg, frame)


def thread_cap() -> int:
    raw = os.environ.get("SEMF_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"SEMF_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"SEMF_THREADS must be a positive integer, got {raw!r}")
    return n


def run_axis(axis: str, base: TrainConfig, frame: AlignedFrame, workers: int | None = None) -> list:
    """Run every cell of ``axis`` on one shared frame; returns rows in table order."""
    cells = axis_cells(axis, base)
    workers = min(workers or thread_cap(), len(cells))
    if workers == 1:
        reports = []
        for labels, cfg in cells:
            log.info("ablation %s cell %s", axis, labels)
            reports.append(run_cell(cfg, frame))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_cell_job, [(cfg, frame) for _, cfg in cells]))
    return [CellResult(labels, cfg, rep) for (labels, cfg), rep in zip(cells, reports)]


def axis_table(axis: str, results) -> str:
    headers = AXES[axis][0]
    return comparison_table([(r.labels, r.report) for r in results], headers)
