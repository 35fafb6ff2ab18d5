"""Cross-modal fusion and the shared multi-horizon prediction head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .data import HORIZONS, Standardizer
from .encoders import MultiHeadAttention
from .errors import ContractError, ShapeError, UsageError
from .nn import Dropout, LayerNorm, Linear, Module
from .tensor import Tensor

FUSION_KINDS = ("single", "bi")


class CrossAttention(Module):
    """One query vector attends over a sequence; output is LN(query + attention)."""

    def __init__(self, rng, d_model: int, n_heads: int):
        self.attn = MultiHeadAttention(rng, d_model, n_heads)
        self.norm = LayerNorm(d_model)

    def attend(self, query: Tensor, sequence: Tensor) -> Tensor:
        """Raw attention output before the residual, shape (B, d)."""
        query, sequence = T.as_tensor(query), T.as_tensor(sequence)
        if sequence.ndim != 3 or sequence.shape[1] == 0:
            raise ContractError(f"cross-attention needs a non-empty (B, N, d) sequence, got {sequence.shape}")
        if query.ndim != 2 or query.shape[-1] != sequence.shape[-1] or query.shape[0] != sequence.shape[0]:
            raise ShapeError(f"query {query.shape} does not match sequence {sequence.shape}")
        b, d = query.shape
        out = self.attn(T.reshape(query, (b, 1, d)), sequence)
        return T.reshape(out, (b, d))

    def __call__(self, query: Tensor, sequence: Tensor) -> Tensor:
        query = T.as_tensor(query)
        return self.norm(query + self.attend(query, sequence))


class BiCrossAttentionFusion(Module):
    """Spectrogram CLS queries exogenous tokens; exogenous summary queries patches."""

    def __init__(self, rng, d_model: int, n_heads: int):
        self.spec_to_exo = CrossAttention(rng, d_model, n_heads)
        self.exo_to_spec = CrossAttention(rng, d_model, n_heads)
        self.proj = Linear(rng, 2 * d_model, d_model)

    def __call__(self, cls_vec, patch_seq, exo_summary, exo_seq) -> Tensor:
        a = self.spec_to_exo(cls_vec, exo_seq)
        b = self.exo_to_spec(exo_summary, patch_seq)
        return self.proj(T.concat([a, b], axis=-1))


class SingleCrossAttentionFusion(Module):
    """Only the spectrogram-queries-exogenous direction."""

    def __init__(self, rng, d_model: int, n_heads: int):
        self.spec_to_exo = CrossAttention(rng, d_model, n_heads)
        self.proj = Linear(rng, d_model, d_model)

    def __call__(self, cls_vec, patch_seq, exo_summary, exo_seq) -> Tensor:
        return self.proj(self.spec_to_exo(cls_vec, exo_seq))


def make_fusion(kind: str, rng, d_model: int, n_heads: int) -> Module:
    if kind == "bi":
        return BiCrossAttentionFusion(rng, d_model, n_heads)
    if kind == "single":
        return SingleCrossAttentionFusion(rng, d_model, n_heads)
    raise UsageError(f"unknown fusion kind {kind!r}; valid: {FUSION_KINDS}")


class PredictionHead(Module):
    """LayerNorm -> Linear -> GELU -> Dropout -> Linear to one output per horizon."""

    def __init__(self, rng, d_model: int, n_outputs: int = len(HORIZONS), hidden: int | None = None, dropout: float = 0.1):
        hidden = hidden or 2 * d_model
        self.norm = LayerNorm(d_model)
        self.fc1 = Linear(rng, d_model, hidden)
        self.drop = Dropout(dropout, rng)
        self.fc2 = Linear(rng, hidden, n_outputs)

    def __call__(self, fused: Tensor) -> Tensor:
        return self.fc2(self.drop(T.gelu(self.fc1(self.norm(fused)))))


@dataclass(frozen=True)
class HorizonPrediction:
    standardized: np.ndarray  # (B, 6), horizon order HORIZONS
    destandardized: np.ndarray  # (B, 6), price units


def predict_horizons(fused, head: PredictionHead, standardizer: Standardizer | None, anchor_levels=None) -> HorizonPrediction:
    if standardizer is None:
        raise ContractError("predict_horizons needs a fitted standardizer")
    with T.no_grad():
        out = head(T.as_tensor(fused)).data
    return HorizonPrediction(out, standardizer.inverse(out, anchor_levels))
