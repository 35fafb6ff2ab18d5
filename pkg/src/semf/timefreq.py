"""Time-frequency images of a target window.

The Morlet transform follows the Torrence & Compo convention with unit
sampling step::

    W[j, n] = s_j ** -0.5 * sum_n' x[n'] * conj(psi0((n' - n) / s_j))

evaluated by FFT convolution with zero padding. All image kinds come out as
``(n_scales, L)`` standardised real matrices so the downstream encoder is
shared between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, NumericError, SizingError, UsageError

IMAGE_KINDS = ("line", "stft", "cmor", "morlet")
ENVELOPE_CUTOFF = 1e-8
LOG_EPS = 1e-8


@dataclass(frozen=True)
class MorletParams:
    omega0: float = 6.0
    n_scales: int = 128
    s_min: float = 2.0
    s_max: float = 64.0
    epsilon: float = LOG_EPS

    def __post_init__(self):
        if self.omega0 < 5:
            raise UsageError(f"omega0 must be >= 5 for admissibility, got {self.omega0}")
        if self.n_scales < 2:
            raise UsageError(f"n_scales must be >= 2, got {self.n_scales}")
        if not 0 < self.s_min < self.s_max:
            raise UsageError(f"need 0 < s_min < s_max, got {self.s_min}, {self.s_max}")

    def scales(self) -> np.ndarray:
        return np.geomspace(self.s_min, self.s_max, self.n_scales)

    @property
    def fourier_factor(self) -> float:
        """Equivalent Fourier period of a unit scale."""
        return 4.0 * math.pi / (self.omega0 + math.sqrt(2.0 + self.omega0**2))


@dataclass(frozen=True)
class CmorParams:
    bandwidth: float = 1.5
    center: float = 1.0
    n_scales: int = 128
    s_min: float = 2.0
    s_max: float = 64.0
    epsilon: float = LOG_EPS

    def scales(self) -> np.ndarray:
        return np.geomspace(self.s_min, self.s_max, self.n_scales)


@dataclass(frozen=True)
class Spectrogram:
    values: np.ndarray  # (n_rows, L)
    scales: np.ndarray  # row coordinates: scale in samples, STFT bin, or pixel level
    kind: str

    @property
    def shape(self) -> tuple:
        return self.values.shape


def morlet_kernel(eta: np.ndarray, omega0: float) -> np.ndarray:
    return math.pi**-0.25 * np.exp(1j * omega0 * eta) * np.exp(-0.5 * eta * eta)


def cmor_kernel(eta: np.ndarray, bandwidth: float, center: float) -> np.ndarray:
    return (math.pi * bandwidth) ** -0.5 * np.exp(2j * math.pi * center * eta) * np.exp(-eta * eta / bandwidth)


def _check_series(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 2:
        raise SizingError(f"series must have at least 2 samples, got {x.shape[-1]}")
    if not np.isfinite(x).all():
        raise NumericError("series contains non-finite values")
    return x


def _cwt_fft(x: np.ndarray, scales: np.ndarray, wavelet, half_width) -> np.ndarray:
    """Correlate ``x`` (..., L) with ``conj(wavelet(m / s)) / sqrt(s)`` for each scale.

    ``half_width(s)`` gives the truncation radius in samples; offsets beyond
    ``L - 1`` never overlap the signal so the kernel is cut there too.
    """
    x = _check_series(x)
    L = x.shape[-1]
    M = L - 1
    m = np.arange(-M, M + 1, dtype=np.float64)
    kernels = np.empty((scales.size, m.size), dtype=np.complex128)
    for j, s in enumerate(scales):
        k = np.conj(wavelet(m / s)) / math.sqrt(s)
        k[np.abs(m) > half_width(s)] = 0.0
        kernels[j] = k
    # correlation == convolution with the reversed kernel; output index n + M
    n_fft = 1 << int(math.ceil(math.log2(L + 2 * M)))
    kf = np.fft.fft(kernels[:, ::-1], n_fft)
    xf = np.fft.fft(x, n_fft)[..., None, :]
    full = np.fft.ifft(xf * kf, n_fft)
    return full[..., M : M + L]


def morlet_cwt(x, p: MorletParams = MorletParams()) -> np.ndarray:
    """Complex Morlet coefficients, shape ``(..., n_scales, L)``."""
    cut = math.sqrt(-2.0 * math.log(ENVELOPE_CUTOFF))
    return _cwt_fft(x, p.scales(), lambda eta: morlet_kernel(eta, p.omega0), lambda s: cut * s)


def cmor_cwt(x, p: CmorParams = CmorParams()) -> np.ndarray:
    """Complex Morlet with separate bandwidth and centre frequency."""
    cut = math.sqrt(-p.bandwidth * math.log(ENVELOPE_CUTOFF))
    return _cwt_fft(x, p.scales(), lambda eta: cmor_kernel(eta, p.bandwidth, p.center), lambda s: cut * s)


def standardize_image(values: np.ndarray) -> np.ndarray:
    """Joint zero-mean/unit-variance over the last two axes; near-constant -> zeros."""
    mu = values.mean(axis=(-2, -1), keepdims=True)
    centered = values - mu
    var = (centered * centered).mean(axis=(-2, -1), keepdims=True)
    degenerate = var < 1e-12
    out = centered / np.sqrt(np.where(degenerate, 1.0, var))
    return np.where(degenerate, 0.0, out)


def log_amplitude(W: np.ndarray, epsilon: float = LOG_EPS) -> np.ndarray:
    if not np.isfinite(W).all():
        raise NumericError("coefficients contain non-finite values")
    return standardize_image(np.log(np.abs(W) + epsilon))


def log_amplitude_normalize(W: np.ndarray, epsilon: float = LOG_EPS, scales=None, kind: str = "morlet") -> Spectrogram:
    values = log_amplitude(W, epsilon)
    if scales is None:
        scales = np.arange(values.shape[-2], dtype=np.float64)
    return Spectrogram(values, np.asarray(scales), kind)


def stft_magnitudes(x, window_len: int = 32, hop: int = 4) -> np.ndarray:
    """Hann-windowed DFT magnitudes, shape ``(window_len // 2 + 1, n_frames)``; row k is bin k."""
    x = _check_series(x)
    if x.ndim != 1:
        raise SizingError("stft_magnitudes expects a 1-D series")
    if window_len > x.size:
        raise SizingError(f"window_len {window_len} exceeds series length {x.size}")
    if hop < 1:
        raise SizingError(f"hop must be positive, got {hop}")
    window = np.hanning(window_len + 1)[:-1]  # periodic Hann
    starts = np.arange(0, x.size - window_len + 1, hop)
    frames = np.stack([x[s : s + window_len] for s in starts]) * window
    return np.abs(np.fft.rfft(frames, axis=1)).T


def _resample(image: np.ndarray, row_pos: np.ndarray, col_pos: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    """Bilinear resampling from positioned grid samples onto an integer grid."""
    cols = np.arange(n_cols, dtype=np.float64)
    tmp = np.stack([np.interp(cols, col_pos, row) for row in image])
    rows = np.linspace(row_pos[0], row_pos[-1], n_rows)
    return np.stack([np.interp(rows, row_pos, tmp[:, c]) for c in range(n_cols)], axis=1)


def stft_spectrogram(x, window_len: int = 32, hop: int = 4, n_scales: int = 128, epsilon: float = LOG_EPS) -> Spectrogram:
    x = _check_series(x)
    mags = stft_magnitudes(x, window_len, hop)
    n_bins, n_frames = mags.shape
    centers = np.arange(n_frames) * hop + (window_len - 1) / 2.0
    bins = np.arange(n_bins, dtype=np.float64)
    logmag = np.log(mags + epsilon)
    if n_frames == 1:
        logmag = np.repeat(logmag, 2, axis=1)
        centers = np.array([0.0, x.size - 1.0])
    image = _resample(logmag, bins, centers, n_scales, x.size)
    return Spectrogram(standardize_image(image), np.linspace(0.0, n_bins - 1.0, n_scales), "stft")


def _bresenham(r0: int, c0: int, r1: int, c1: int):
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 > r0 else -1
    sc = 1 if c1 > c0 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        yield r, c
        if r == r1 and c == c1:
            return
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


def line_rows(x, height: int) -> np.ndarray:
    """Pixel row of each sample; larger values sit nearer row 0 (top)."""
    x = _check_series(x)
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        return np.full(x.size, (height - 1) // 2, dtype=np.int64)
    level = np.floor((x - lo) / (hi - lo) * (height - 1) + 0.5).astype(np.int64)
    return (height - 1) - level


def line_canvas(x, height: int = 128) -> np.ndarray:
    """Binary ``height x L`` polyline raster."""
    rows = line_rows(x, height)
    canvas = np.zeros((height, rows.size))
    canvas[rows[0], 0] = 1.0
    for n in range(rows.size - 1):
        for r, c in _bresenham(int(rows[n]), n, int(rows[n + 1]), n + 1):
            canvas[r, c] = 1.0
    return canvas


def line_raster(x, height: int = 128) -> Spectrogram:
    canvas = line_canvas(x, height)
    return Spectrogram(standardize_image(canvas), np.arange(height, dtype=np.float64)[::-1], "line")


def render(x, kind: str = "morlet", n_scales: int = 128) -> Spectrogram:
    """One standardised image of kind ``kind`` for a single window."""
    if kind == "morlet":
        p = MorletParams(n_scales=n_scales)
        return log_amplitude_normalize(morlet_cwt(x, p), p.epsilon, p.scales(), "morlet")
    if kind == "cmor":
        p = CmorParams(n_scales=n_scales)
        return log_amplitude_normalize(cmor_cwt(x, p), p.epsilon, p.scales(), "cmor")
    if kind == "stft":
        return stft_spectrogram(x, n_scales=n_scales)
    if kind == "line":
        return line_raster(x, height=n_scales)
    raise UsageError(f"unknown image kind {kind!r}; valid kinds: {', '.join(IMAGE_KINDS)}")


def render_batch(histories: np.ndarray, kind: str = "morlet", n_scales: int = 128, chunk: int = 64) -> np.ndarray:
    """Images for a stack of windows ``(B, L)`` -> ``(B, n_scales, L)``."""
    histories = np.asarray(histories, dtype=np.float64)
    if kind not in IMAGE_KINDS:
        raise UsageError(f"unknown image kind {kind!r}; valid kinds: {', '.join(IMAGE_KINDS)}")
    out = np.empty((histories.shape[0], n_scales, histories.shape[1]))
    if kind in ("morlet", "cmor"):
        if kind == "morlet":
            p = MorletParams(n_scales=n_scales)
            cwt = lambda h: morlet_cwt(h, p)  # noqa: E731
        else:
            p = CmorParams(n_scales=n_scales)
            cwt = lambda h: cmor_cwt(h, p)  # noqa: E731
        for i in range(0, histories.shape[0], chunk):
            out[i : i + chunk] = log_amplitude(cwt(histories[i : i + chunk]), p.epsilon)
        return out
    for i, h in enumerate(histories):
        out[i] = render(h, kind, n_scales).values
    return out


# ------------------------------------------------------------------ file output


def to_gray(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.rint((values - lo) / (hi - lo) * 255.0).astype(np.uint8)


def write_pgm(path, values: np.ndarray) -> None:
    """Binary P5 greyscale, min..max mapped linearly to 0..255."""
    rows, cols = values.shape
    Path(path).write_bytes(f"P5 {cols} {rows} 255\n".encode("ascii") + to_gray(values).tobytes())


def read_pgm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while buf[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not buf[pos : pos + 1].isspace():
            pos += 1
        tokens.append(buf[start:pos].decode("ascii"))
    pos += 1
    magic, cols, rows, _ = tokens
    if magic != "P5":
        raise FormatError(f"not a binary PGM: {magic}")
    return np.frombuffer(buf, dtype=np.uint8, offset=pos).reshape(int(rows), int(cols))


def write_matrix_csv(path, values: np.ndarray) -> None:
    lines = [",".join(repr(float(v)) for v in row) for row in values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
