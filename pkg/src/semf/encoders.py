"""Spectrogram (patch attention) and exogenous (RevIN + attention) encoders."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .nn import Dropout, LayerNorm, Linear, Module, Parameter
from .tensor import Tensor

REVIN_FLOOR = 1e-8


# ------------------------------------------------------------------ configs


@dataclass(frozen=True)
class VitConfig:
    patch_size: int = 8
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    image_shape: tuple = (128, 120)
    dropout: float = 0.1
    ff_mult: int = 2

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ShapeError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")

    @property
    def padded_shape(self) -> tuple:
        p = self.patch_size
        return tuple(-(-n // p) * p for n in self.image_shape)

    @property
    def grid(self) -> tuple:
        p = self.patch_size
        rows, cols = self.padded_shape
        return rows // p, cols // p

    @property
    def n_patches(self) -> int:
        r, c = self.grid
        return r * c


@dataclass(frozen=True)
class ExoConfig:
    n_vars: int = 10
    seq_len: int = 120
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    revin_affine: bool = False
    dropout: float = 0.1
    ff_mult: int = 2

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ShapeError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")


# ------------------------------------------------------------------ RevIN


@dataclass(frozen=True)
class RevinStats:
    mean: np.ndarray  # (..., 1, V)
    std: np.ndarray  # (..., 1, V), floored
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None


def revin_normalize(window: np.ndarray, gamma=None, beta=None) -> tuple:
    """Standardise each variable over the time axis (second to last).

    The std is floored; exactly constant columns use their value as the mean
    so they map to exact zeros and still invert.
    """
    window = np.asarray(window, dtype=np.float64)
    first = window[..., :1, :]
    const = np.all(window == first, axis=-2, keepdims=True)
    mean = np.where(const, first, window.mean(axis=-2, keepdims=True))
    std = np.maximum(window.std(axis=-2, keepdims=True), REVIN_FLOOR)
    out = (window - mean) / std
    if gamma is not None:
        out = out * gamma + (beta if beta is not None else 0.0)
    return out, RevinStats(mean, std, gamma, beta)


def revin_denormalize(window: np.ndarray, stats: RevinStats) -> np.ndarray:
    x = np.asarray(window, dtype=np.float64)
    if stats.gamma is not None:
        x = (x - (stats.beta if stats.beta is not None else 0.0)) / stats.gamma
    return x * stats.std + stats.mean


# ------------------------------------------------------------------ patches


def pad_to_patches(images: np.ndarray, patch_size: int) -> np.ndarray:
    """Zero-pad (..., H, W) so both sides are multiples of ``patch_size``.

    Extra rows go after the last scale row; extra columns go before the
    oldest time step so the newest samples stay aligned to a patch edge.
    """
    h, w = images.shape[-2:]
    ph = -(-h // patch_size) * patch_size - h
    pw = -(-w // patch_size) * patch_size - w
    if ph == 0 and pw == 0:
        return images
    pad = [(0, 0)] * (images.ndim - 2) + [(0, ph), (pw, 0)]
    return np.pad(images, pad)


def patchify(image, patch_size: int) -> np.ndarray:
    """(..., H, W) -> (..., n_patches, patch_size**2), row-major at both levels."""
    values = getattr(image, "values", image)
    values = np.asarray(values)
    h, w = values.shape[-2:]
    p = patch_size
    if h % p or w % p:
        raise ShapeError(f"image shape {(h, w)} is not divisible by patch size {p}")
    lead = values.shape[:-2]
    x = values.reshape(*lead, h // p, p, w // p, p)
    x = np.moveaxis(x, -3, -2)  # (..., gh, gw, p, p)
    return x.reshape(*lead, (h // p) * (w // p), p * p)


def unpatchify(tokens: np.ndarray, patch_size: int, image_shape: tuple) -> np.ndarray:
    h, w = image_shape
    p = patch_size
    lead = tokens.shape[:-2]
    x = tokens.reshape(*lead, h // p, w // p, p, p)
    x = np.moveaxis(x, -2, -3)
    return x.reshape(*lead, h, w)


def sinusoidal_encoding(length: int, d_model: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    i = np.arange(0, d_model, 2)[None, :]
    angle = pos / np.power(10000.0, i / d_model)
    pe = np.zeros((length, d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : d_model // 2])
    return pe


# ------------------------------------------------------------------ attention blocks


class MultiHeadAttention(Module):
    """Scaled dot-product attention; queries and keys/values may differ.

    ``last_probs`` keeps the most recent probability tensor (B, heads, Nq, Nk)
    for inspection.
    """

    def __init__(self, rng, d_model: int, n_heads: int):
        self.n_heads = n_heads
        self.q = Linear(rng, d_model, d_model)
        self.k = Linear(rng, d_model, d_model)
        self.v = Linear(rng, d_model, d_model)
        self.o = Linear(rng, d_model, d_model)
        self.last_probs = None

    def _heads(self, x: Tensor) -> Tensor:
        b, n, d = x.shape
        return T.transpose(T.reshape(x, (b, n, self.n_heads, d // self.n_heads)), (0, 2, 1, 3))

    def __call__(self, query: Tensor, context: Tensor) -> Tensor:
        if query.shape[-1] != context.shape[-1]:
            raise ShapeError(f"attention width mismatch: query {query.shape}, context {context.shape}")
        b, nq, d = query.shape
        scale = 1.0 / math.sqrt(d // self.n_heads)
        q = self._heads(self.q(query) * scale)
        k = self._heads(self.k(context))
        v = self._heads(self.v(context))
        probs = T.softmax_lastdim(q @ T.swapaxes(k, -1, -2))
        self.last_probs = probs.data
        ctx = T.reshape(T.transpose(probs @ v, (0, 2, 1, 3)), (b, nq, d))
        return self.o(ctx)


class EncoderBlock(Module):
    """Pre-norm: x + attn(LN(x)), then x + FFN(LN(x))."""

    def __init__(self, rng, d_model: int, n_heads: int, dropout: float, ff_mult: int = 2):
        self.norm1 = LayerNorm(d_model)
        self.attn = MultiHeadAttention(rng, d_model, n_heads)
        self.norm2 = LayerNorm(d_model)
        self.ff1 = Linear(rng, d_model, ff_mult * d_model)
        self.ff2 = Linear(rng, ff_mult * d_model, d_model)
        self.drop = Dropout(dropout, rng)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.norm1(x)
        x = x + self.drop(self.attn(h, h))
        h = self.ff2(T.gelu(self.ff1(self.norm2(x))))
        return x + self.drop(h)


# ------------------------------------------------------------------ encoders


class SpectrogramEncoder(Module):
    """Patch tokens -> linear projection, CLS token, learned positions, blocks."""

    def __init__(self, cfg: VitConfig, rng):
        self.cfg = cfg
        d = cfg.d_model
        self.patch_proj = Linear(rng, cfg.patch_size**2, d)
        self.cls_token = Parameter(rng.normal(0.0, 0.02, size=(1, 1, d)))
        self.pos_table = Parameter(rng.normal(0.0, 0.02, size=(cfg.n_patches + 1, d)))
        self.blocks = [EncoderBlock(rng, d, cfg.n_heads, cfg.dropout, cfg.ff_mult) for _ in range(cfg.n_layers)]
        self.norm = LayerNorm(d)

    def tokens(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        if images.ndim == 2:
            images = images[None]
        if images.shape[-2:] != tuple(self.cfg.image_shape):
            raise ShapeError(f"expected images of shape {tuple(self.cfg.image_shape)}, got {images.shape[-2:]}")
        return patchify(pad_to_patches(images, self.cfg.patch_size), self.cfg.patch_size)

    def encode_tokens(self, tokens) -> tuple:
        tokens = T.as_tensor(tokens)
        if tokens.ndim != 3 or tokens.shape[1:] != (self.cfg.n_patches, self.cfg.patch_size**2):
            raise ShapeError(f"expected tokens (B, {self.cfg.n_patches}, {self.cfg.patch_size ** 2}), got {tokens.shape}")
        b = tokens.shape[0]
        x = self.patch_proj(tokens)
        cls = self.cls_token + T.Tensor(np.zeros((b, 1, self.cfg.d_model)))
        x = T.concat([cls, x], axis=1)
        x = x + T.embedding_lookup(self.pos_table, np.arange(self.cfg.n_patches + 1))
        for block in self.blocks:
            x = block(x)
        x = self.norm(x)
        return x[:, 0, :], x[:, 1:, :]

    def __call__(self, images: np.ndarray) -> tuple:
        """Return ``(cls_vector (B, d), patch_sequence (B, n_patches, d))``."""
        return self.encode_tokens(self.tokens(images))


class ExogenousEncoder(Module):
    """RevIN -> per-step projection + sinusoidal positions -> blocks; mean-pooled summary."""

    def __init__(self, cfg: ExoConfig, rng):
        self.cfg = cfg
        d = cfg.d_model
        if cfg.revin_affine:
            self.revin_gamma = Parameter(np.ones(cfg.n_vars))
            self.revin_beta = Parameter(np.zeros(cfg.n_vars))
        self.in_proj = Linear(rng, cfg.n_vars, d)
        self.blocks = [EncoderBlock(rng, d, cfg.n_heads, cfg.dropout, cfg.ff_mult) for _ in range(cfg.n_layers)]
        self.norm = LayerNorm(d)
        self._pe = sinusoidal_encoding(cfg.seq_len, d)

    def normalize(self, windows: np.ndarray) -> Tensor:
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim == 2:
            windows = windows[None]
        if windows.shape[1:] != (self.cfg.seq_len, self.cfg.n_vars):
            raise ShapeError(f"expected exogenous windows (B, {self.cfg.seq_len}, {self.cfg.n_vars}), got {windows.shape}")
        z, _ = revin_normalize(windows)
        z = T.Tensor(z)
        if self.cfg.revin_affine:
            z = z * self.revin_gamma + self.revin_beta
        return z

    def encode_normalized(self, z: Tensor) -> tuple:
        x = self.in_proj(z) + self._pe
        for block in self.blocks:
            x = block(x)
        x = self.norm(x)
        return T.mean(x, axis=1), x

    def __call__(self, windows: np.ndarray) -> tuple:
        """Return ``(summary (B, d), tokens (B, L, d))``."""
        return self.encode_normalized(self.normalize(windows))


class MlpExogenousEncoder(Module):
    """Ablation encoder: flattened-window MLP summary plus a per-step MLP for tokens."""

    def __init__(self, cfg: ExoConfig, rng):
        self.cfg = cfg
        d = cfg.d_model
        hidden = cfg.ff_mult * d
        if cfg.revin_affine:
            self.revin_gamma = Parameter(np.ones(cfg.n_vars))
            self.revin_beta = Parameter(np.zeros(cfg.n_vars))
        self.flat1 = Linear(rng, cfg.seq_len * cfg.n_vars, hidden)
        self.flat2 = Linear(rng, hidden, d)
        self.step1 = Linear(rng, cfg.n_vars, hidden)
        self.step2 = Linear(rng, hidden, d)

    normalize = ExogenousEncoder.normalize

    def encode_normalized(self, z: Tensor) -> tuple:
        b = z.shape[0]
        summary = self.flat2(T.gelu(self.flat1(T.reshape(z, (b, -1)))))
        tokens = self.step2(T.gelu(self.step1(z)))
        return summary, tokens

    def __call__(self, windows: np.ndarray) -> tuple:
        return self.encode_normalized(self.normalize(windows))
