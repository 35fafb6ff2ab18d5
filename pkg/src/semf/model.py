"""The assembled forecaster: two encoders, fusion, shared head."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .config import TrainConfig
from .data import HORIZONS
from .encoders import ExoConfig, ExogenousEncoder, MlpExogenousEncoder, MultiHeadAttention, SpectrogramEncoder, VitConfig
from .fusion import PredictionHead, make_fusion
from .nn import Dropout, Module
from .tensor import Tensor


def _streams(seed: int):
    init, drop = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.Philox(init)), np.random.Generator(np.random.Philox(drop))


class SemfModel(Module):
    def __init__(self, cfg: TrainConfig, n_vars: int):
        self.cfg = cfg
        self.n_vars = n_vars
        init_rng, self.dropout_rng = _streams(cfg.seed)
        self.vit_cfg = VitConfig(
            patch_size=cfg.patch_size,
            d_model=cfg.d_model,
            n_heads=cfg.n_heads,
            n_layers=cfg.n_layers,
            image_shape=(cfg.n_scales, cfg.seq_len),
            dropout=cfg.dropout,
            ff_mult=cfg.ff_mult,
        )
        self.exo_cfg = ExoConfig(
            n_vars=n_vars,
            seq_len=cfg.seq_len,
            d_model=cfg.d_model,
            n_heads=cfg.n_heads,
            n_layers=cfg.n_layers,
            revin_affine=cfg.revin_affine,
            dropout=cfg.dropout,
            ff_mult=cfg.ff_mult,
        )
        self.spec_encoder = SpectrogramEncoder(self.vit_cfg, init_rng)
        exo_cls = MlpExogenousEncoder if cfg.exo_encoder_kind == "mlp" else ExogenousEncoder
        self.exo_encoder = exo_cls(self.exo_cfg, init_rng)
        self.fusion = make_fusion(cfg.fusion_kind, init_rng, cfg.d_model, cfg.n_heads)
        self.head = PredictionHead(init_rng, cfg.d_model, len(HORIZONS), 2 * cfg.d_model, cfg.dropout)
        for m in self.modules():
            if isinstance(m, Dropout):
                m.rng = self.dropout_rng

    def fuse(self, images: np.ndarray, exo_windows: np.ndarray) -> Tensor:
        cls_vec, patch_seq = self.spec_encoder(images)
        exo_summary, exo_seq = self.exo_encoder(exo_windows)
        return self.fusion(cls_vec, patch_seq, exo_summary, exo_seq)

    def __call__(self, images: np.ndarray, exo_windows: np.ndarray) -> Tensor:
        """Standardised predictions, shape (B, 6)."""
        return self.head(self.fuse(images, exo_windows))

    def predict(self, images: np.ndarray, exo_windows: np.ndarray) -> np.ndarray:
        was_training = self.training
        self.eval()
        try:
            with T.no_grad():
                return self(images, exo_windows).data
        finally:
            self.train(was_training)

    def attention_modules(self) -> list:
        return [m for m in self.modules() if isinstance(m, MultiHeadAttention)]
