"""Forecast error metrics, computed per horizon and then averaged."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .data import HORIZONS
from .errors import ContractError, ShapeError

DENOM_FLOOR = 1e-8
METRIC_NAMES = ("rmse", "rmae", "mape", "r2")

# Marker for R^2 on a constant target; NaN so it can never pass for 0 or 1.
UNDEFINED = math.nan


def _pair(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ShapeError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    if y.size < 1:
        raise ContractError("metrics need at least one observation")
    return y, y_hat


def rmse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def rmae(y, y_hat) -> float:
    """Mean absolute error relative to the mean absolute level of ``y``."""
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)) / max(np.mean(np.abs(y)), DENOM_FLOOR))


def mape(y, y_hat, percent: bool = False) -> float:
    """Mean absolute percentage error; a fraction unless ``percent``."""
    y, y_hat = _pair(y, y_hat)
    value = float(np.mean(np.abs(y - y_hat) / np.maximum(np.abs(y), DENOM_FLOOR)))
    return 100.0 * value if percent else value


def r2(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    if y.size < 2:
        raise ContractError("r2 needs at least two observations")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return UNDEFINED
    return 1.0 - float(np.sum((y - y_hat) ** 2)) / ss_tot


def is_undefined(value: float) -> bool:
    return isinstance(value, float) and math.isnan(value)


@dataclass(frozen=True)
class MetricsReport:
    per_horizon: tuple  # one {metric: value} dict per horizon, in HORIZONS order
    averaged: dict
    n_samples: int
    horizons: tuple = HORIZONS
    units: str = "price"

    @classmethod
    def from_predictions(cls, y_true, y_pred, horizons=HORIZONS) -> "MetricsReport":
        """``y_true``/``y_pred`` are (N, n_horizons) in price units."""
        y_true = np.asarray(y_true, dtype=np.float64)
        y_pred = np.asarray(y_pred, dtype=np.float64)
        if y_true.shape != y_pred.shape or y_true.ndim != 2 or y_true.shape[1] != len(horizons):
            raise ShapeError(f"expected matching (N, {len(horizons)}) arrays, got {y_true.shape} and {y_pred.shape}")
        if y_true.shape[0] == 0:
            raise ContractError("cannot report on an empty split")
        rows = []
        for k in range(len(horizons)):
            y, p = y_true[:, k], y_pred[:, k]
            rows.append(
                {
                    "rmse": rmse(y, p),
                    "rmae": rmae(y, p),
                    "mape": mape(y, p),
                    "r2": r2(y, p) if y.size >= 2 else UNDEFINED,
                }
            )
        averaged = {m: float(np.mean([r[m] for r in rows])) for m in METRIC_NAMES}
        return cls(tuple(rows), averaged, int(y_true.shape[0]), tuple(horizons))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("horizon,rmse,rmae,mape,r2\n")
        for h, row in zip(self.horizons, self.per_horizon):
            buf.write(f"{h}," + ",".join(repr(row[m]) for m in METRIC_NAMES) + "\n")
        buf.write("avg," + ",".join(repr(self.averaged[m]) for m in METRIC_NAMES) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MetricsReport":
        lines = [ln for ln in text.strip().splitlines()[1:] if ln]
        rows, horizons, averaged = [], [], None
        for ln in lines:
            key, *vals = ln.split(",")
            values = dict(zip(METRIC_NAMES, map(float, vals)))
            if key == "avg":
                averaged = values
            else:
                horizons.append(int(key))
                rows.append(values)
        return cls(tuple(rows), averaged, 0, tuple(horizons))

    def to_table(self, percent_mape: bool = False) -> str:
        scale = 100.0 if percent_mape else 1.0
        out = [f"{'Horizon':>8} {'RMSE':>10} {'RMAE':>8} {'MAPE':>8} {'R2':>8}"]
        for h, row in zip(self.horizons, self.per_horizon):
            out.append(f"{h:>8} {row['rmse']:>10.4f} {row['rmae']:>8.4f} {row['mape'] * scale:>8.4f} {row['r2']:>8.4f}")
        a = self.averaged
        out.append(f"{'avg':>8} {a['rmse']:>10.4f} {a['rmae']:>8.4f} {a['mape'] * scale:>8.4f} {a['r2']:>8.4f}")
        return "\n".join(out)

    def same_values(self, other: "MetricsReport") -> bool:
        """Bit-level equality of every metric (NaN equals NaN)."""
        a = np.array([[r[m] for m in METRIC_NAMES] for r in self.per_horizon])
        b = np.array([[r[m] for m in METRIC_NAMES] for r in other.per_horizon])
        return a.shape == b.shape and np.array_equal(a, b, equal_nan=True)


def comparison_table(rows, label_headers) -> str:
    """Aligned text table: label columns followed by RMSE, RMAE, MAPE, R2 averages."""
    headers = list(label_headers) + ["RMSE", "RMAE", "MAPE", "R2"]
    body = []
    for labels, report in rows:
        a = report.averaged
        body.append([str(x) for x in labels] + [f"{a['rmse']:.4f}", f"{a['rmae']:.4f}", f"{a['mape']:.4f}", f"{a['r2']:.4f}"])
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in body)
    return "\n".join(lines)
