"""Daily multivariate series: CSV ingestion, gap filling, windowing, splits,
per-horizon target standardisation and a synthetic stand-in dataset."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ContractError, ImputationError, ParseError, SchemaError, SizingError, SplitError

HORIZONS = (1, 3, 7, 14, 21, 35)
SPLIT_RATIOS = (0.65, 0.15, 0.20)
STD_FLOOR = 1e-8

EXOGENOUS_COLUMNS = (
    "us10y",  # US 10-year Treasury yield
    "us2y",  # US 2-year Treasury yield
    "us3m",  # US 3-month T-bill yield
    "dxy",  # US Dollar Index
    "usdcny",
    "usdjpy",
    "usdkrw",
    "spx",  # S&P 500
    "vix",  # S&P 500 volatility index
    "lme",  # LME commodity index
)


@dataclass(frozen=True)
class AlignedFrame:
    dates: tuple
    target: np.ndarray
    exogenous: np.ndarray
    column_names: tuple
    target_name: str = "target"

    def __post_init__(self):
        n = len(self.dates)
        if self.target.shape != (n,):
            raise SchemaError(f"target has shape {self.target.shape}, expected ({n},)")
        if self.exogenous.ndim != 2 or self.exogenous.shape[0] != n:
            raise SchemaError(f"exogenous has shape {self.exogenous.shape}, expected ({n}, k)")
        if self.exogenous.shape[1] != len(self.column_names):
            raise SchemaError("column_names does not match the number of exogenous columns")

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def n_vars(self) -> int:
        """D, the target plus the exogenous variables."""
        return 1 + self.exogenous.shape[1]

    def n_gaps(self) -> int:
        return int(np.isnan(self.target).sum() + np.isnan(self.exogenous).sum())

    def to_csv(self, path=None) -> str:
        """Serialise with the documented schema; returns the text as well."""
        buf = io.StringIO()
        buf.write(",".join(["date", self.target_name, *self.column_names]) + "\n")
        for i, day in enumerate(self.dates):
            cells = [day.isoformat(), _fmt(self.target[i])]
            cells.extend(_fmt(v) for v in self.exogenous[i])
            buf.write(",".join(cells) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def load_csv(path) -> AlignedFrame:
    """Read ``date,target,<exo...>``; empty cells become NaN gaps."""
    text = Path(path).read_text()
    if not text.strip():
        raise ParseError(f"{path}: empty file")
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if len(header) < 3:
        raise SchemaError(f"{path}: need a date column, a target column and at least one exogenous column; got {header}")
    if header[0].strip().lower() != "date":
        raise SchemaError(f"{path}: first column must be 'date', got {header[0]!r}")
    width = len(header)
    dates, rows = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != width:
            raise ParseError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        try:
            day = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad date {row[0]!r}") from None
        values = []
        for cell in row[1:]:
            cell = cell.strip()
            if cell == "":
                values.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad number {cell!r}") from None
            if not math.isfinite(v):
                raise ParseError(f"{path}:{lineno}: non-finite number {cell!r}")
            values.append(v)
        dates.append(day)
        rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    if len(set(dates)) != len(dates):
        seen, dup = set(), None
        for d in dates:
            if d in seen:
                dup = d
                break
            seen.add(d)
        raise SchemaError(f"{path}: duplicate date {dup.isoformat()}")
    order = sorted(range(len(dates)), key=dates.__getitem__)
    values = np.array(rows, dtype=np.float64)[order]
    return AlignedFrame(
        dates=tuple(dates[i] for i in order),
        target=values[:, 0].copy(),
        exogenous=values[:, 1:].copy(),
        column_names=tuple(h.strip() for h in header[2:]),
        target_name=header[1].strip(),
    )


def _fill_column(col: np.ndarray, name: str) -> np.ndarray:
    observed = ~np.isnan(col)
    if not observed.any():
        raise ImputationError(f"column {name!r} has no observed values")
    idx = np.where(observed, np.arange(col.size), 0)
    np.maximum.accumulate(idx, out=idx)
    filled = col[idx]
    first = int(np.argmax(observed))
    filled[:first] = col[first]
    return filled


def impute(frame: AlignedFrame) -> AlignedFrame:
    """Forward-fill every column; leading gaps take the first observed value."""
    target = _fill_column(frame.target, frame.target_name)
    exo = np.column_stack([_fill_column(frame.exogenous[:, j], name) for j, name in enumerate(frame.column_names)])
    return replace(frame, target=target, exogenous=exo.reshape(frame.exogenous.shape))


@dataclass(frozen=True)
class WindowSample:
    history: np.ndarray  # (L,) target values ending at anchor_index
    exo_window: np.ndarray  # (L, D-1)
    targets: np.ndarray  # (6,) standardised once a Standardizer is applied
    raw_targets: np.ndarray  # (6,) price units
    anchor_index: int

    @property
    def last_value(self) -> float:
        return float(self.history[-1])


def min_days(seq_len: int, horizons=HORIZONS) -> int:
    return seq_len + max(horizons)


def make_windows(frame: AlignedFrame, seq_len: int, horizons=HORIZONS) -> list:
    if seq_len < 2:
        raise SizingError(f"seq_len must be at least 2, got {seq_len}")
    need = min_days(seq_len, horizons)
    if frame.n_days < need:
        raise SizingError(f"series has {frame.n_days} rows; need at least {need} for seq_len={seq_len} and horizon {max(horizons)}")
    if frame.n_gaps():
        raise ContractError("frame still has gaps; impute before windowing")
    h = np.asarray(horizons)
    out = []
    for t in range(seq_len - 1, frame.n_days - max(horizons)):
        lo = t - seq_len + 1
        raw = frame.target[t + h]
        out.append(
            WindowSample(
                history=frame.target[lo : t + 1],
                exo_window=frame.exogenous[lo : t + 1],
                targets=raw.copy(),
                raw_targets=raw,
                anchor_index=t,
            )
        )
    return out


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple = SPLIT_RATIOS

    def sizes(self, n: int) -> tuple:
        """Train and test are floored (at least one each); validation takes the rest."""
        if n < 3:
            raise SplitError(f"need at least 3 samples to split, got {n}")
        r_train, _, r_test = self.ratios
        n_train = max(1, math.floor(r_train * n + 1e-9))
        n_test = max(1, math.floor(r_test * n + 1e-9))
        n_val = n - n_train - n_test
        if n_val < 1:
            raise SplitError(f"ratios {self.ratios} leave no validation samples for n={n}")
        return n_train, n_val, n_test

    def boundaries(self, n: int) -> tuple:
        n_train, n_val, _ = self.sizes(n)
        return n_train, n_train + n_val


def chronological_split(samples, spec: SplitSpec = SplitSpec()) -> tuple:
    samples = list(samples)
    anchors = [s.anchor_index for s in samples]
    if any(b <= a for a, b in zip(anchors, anchors[1:])):
        raise SplitError("samples must be strictly ordered by anchor_index")
    a, b = spec.boundaries(len(samples))
    return samples[:a], samples[a:b], samples[b:]


@dataclass(frozen=True)
class Standardizer:
    """Per-horizon affine target scaling fit on the training split.

    With ``relative`` set, the scaled quantity is the move from the window's
    last observed value, ``raw - history[-1]``, and the inverse adds it back.
    """

    per_horizon_mean: np.ndarray
    per_horizon_std: np.ndarray
    relative: bool = False

    def _offset(self, anchor_levels):
        if not self.relative:
            return 0.0
        if anchor_levels is None:
            raise ContractError("relative standardizer needs the anchor levels")
        return np.asarray(anchor_levels, dtype=np.float64)[..., None]

    def transform(self, raw, anchor_levels=None) -> np.ndarray:
        return (np.asarray(raw) - self._offset(anchor_levels) - self.per_horizon_mean) / self.per_horizon_std

    def inverse(self, standardized, anchor_levels=None) -> np.ndarray:
        return np.asarray(standardized) * self.per_horizon_std + self.per_horizon_mean + self._offset(anchor_levels)

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(self.per_horizon_mean.tobytes())
        h.update(self.per_horizon_std.tobytes())
        h.update(bytes([self.relative]))
        return h.hexdigest()


def fit_standardizer(train, relative: bool = False) -> Standardizer:
    train = list(train)
    if not train:
        raise ContractError("cannot fit a standardizer on an empty training split")
    raw = np.stack([s.raw_targets for s in train])
    if relative:
        raw = raw - np.array([s.last_value for s in train])[:, None]
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    low = std < STD_FLOOR
    if low.any():
        warnings.warn(f"zero-variance targets at horizon positions {np.flatnonzero(low).tolist()}; std clamped to {STD_FLOOR}", RuntimeWarning, stacklevel=2)
    return Standardizer(mean, np.maximum(std, STD_FLOOR), relative)


def apply_standardizer(samples, s: Standardizer) -> list:
    out = []
    for w in samples:
        targets = s.transform(w.raw_targets[None, :], [w.last_value])[0]
        out.append(replace(w, targets=targets))
    return out


class TrackedSplit:
    """Sequence wrapper counting element accesses, for leakage audits."""

    def __init__(self, samples, name: str = "split"):
        self._samples = list(samples)
        self.name = name
        self.accesses = 0

    def __len__(self):
        return len(self._samples)

    def __getitem__(self, i):
        self.accesses += 1
        return self._samples[i]

    def __iter__(self):
        for s in self._samples:
            self.accesses += 1
            yield s


# ------------------------------------------------------------------ synthetic data


@dataclass(frozen=True)
class SyntheticSpec:
    """Generating constants for :func:`synthesize_dataset`."""

    base_level: float = 100.0
    trend_per_day: float = 0.004
    seasonal: tuple = ((18.0, 1.0), (60.0, 1.5))  # (period days, amplitude)
    # (exogenous column, lag in days, price units per stationary std)
    drivers: tuple = (("us10y", 40, 4.0), ("dxy", 50, -3.5), ("vix", 60, 3.0))
    noise_std: float = 0.3
    gap_fraction: float = 0.02
    # column -> (mean, stationary std, AR coefficient)
    exo_processes: dict = field(
        default_factory=lambda: {
            "us10y": (2.5, 0.8, 0.96),
            "us2y": (2.0, 0.9, 0.995),
            "us3m": (1.5, 1.0, 0.995),
            "dxy": (95.0, 5.0, 0.96),
            "usdcny": (6.7, 0.3, 0.995),
            "usdjpy": (120.0, 10.0, 0.99),
            "usdkrw": (1200.0, 80.0, 0.99),
            "spx": (3500.0, 600.0, 0.995),
            "vix": (18.0, 6.0, 0.95),
            "lme": (3000.0, 400.0, 0.99),
        }
    )


MIN_SYNTH_DAYS = 160
SYNTH_START = dt.date(2013, 4, 1)


def synthesize_exogenous(rng: np.random.Generator, n: int, spec: SyntheticSpec) -> np.ndarray:
    """AR(1) columns started from their stationary distribution; shape (n, 10)."""
    out = np.empty((n, len(EXOGENOUS_COLUMNS)))
    for j, name in enumerate(EXOGENOUS_COLUMNS):
        mean, sd, phi = spec.exo_processes[name]
        eps = rng.standard_normal(n) * sd * math.sqrt(1.0 - phi * phi)
        z = np.empty(n)
        z[0] = mean + sd * rng.standard_normal()
        for t in range(1, n):
            z[t] = mean + phi * (z[t - 1] - mean) + eps[t]
        out[:, j] = z
    return out


def synthetic_components(seed: int, n_days: int, spec: SyntheticSpec = SyntheticSpec()) -> dict:
    """Noise-free building blocks plus the drawn noise and gap mask.

    ``exogenous_full`` carries a burn-in prefix of ``burn_in`` days so that
    lagged drivers are defined from day 0.
    """
    if n_days < MIN_SYNTH_DAYS:
        raise SizingError(f"n_days must be at least {MIN_SYNTH_DAYS}, got {n_days}")
    rng = np.random.Generator(np.random.Philox(seed))
    burn_in = max(lag for _, lag, _ in spec.drivers)
    exo_full = synthesize_exogenous(rng, n_days + burn_in, spec)
    t = np.arange(n_days, dtype=np.float64)
    trend = spec.base_level + spec.trend_per_day * t
    seasonal = sum(amp * np.sin(2.0 * np.pi * t / period) for period, amp in spec.seasonal)
    driven = np.zeros(n_days)
    for name, lag, weight in spec.drivers:
        j = EXOGENOUS_COLUMNS.index(name)
        mean, sd, _ = spec.exo_processes[name]
        lagged = exo_full[burn_in - lag : burn_in - lag + n_days, j]
        driven += weight * (lagged - mean) / sd
    noise = rng.standard_normal(n_days) * spec.noise_std
    gaps = rng.random((n_days, 1 + len(EXOGENOUS_COLUMNS))) < spec.gap_fraction
    return {
        "trend": trend,
        "seasonal": seasonal,
        "driven": driven,
        "noise": noise,
        "exogenous_full": exo_full,
        "burn_in": burn_in,
        "gaps": gaps,
    }


def synthesize_dataset(seed: int, n_days: int, spec: SyntheticSpec = SyntheticSpec()) -> AlignedFrame:
    """Deterministic synthetic frame whose target depends on lagged exogenous columns."""
    c = synthetic_components(seed, n_days, spec)
    target = c["trend"] + c["seasonal"] + c["driven"] + c["noise"]
    exo = c["exogenous_full"][c["burn_in"] :].copy()
    target[c["gaps"][:, 0]] = np.nan
    exo[c["gaps"][:, 1:]] = np.nan
    dates = tuple(SYNTH_START + dt.timedelta(days=i) for i in range(n_days))
    return AlignedFrame(dates, target, exo, EXOGENOUS_COLUMNS)
