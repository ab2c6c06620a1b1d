"""Trainable embedding denoisers and their MSE training loop.

Architecture zoo: stacked pre-norm transformer blocks (vit1/vit3), LSTM
and BLSTM stacks with 768<->256 projections, a gated-residual two-layer
MLP (mlp2), and vit3 wrapped in 100<->768 adapters (mlp_vit3). Every
variant maps (frames, dim) embeddings to the same shape. Parameter
counts are pinned by closed forms and verified exactly in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import AdamW, Tensor, backward, constant
from .checkpoint import Checkpoint, save_checkpoint
from .dsp import Waveform
from .encoders import EmbeddingSequence, encoder_descriptor, lms_encode
from .layers import (
    DTYPE,
    BiLstmLayer,
    LayerNorm,
    Linear,
    LstmLayer,
    Module,
    TransformerBlock,
)
from .mixer import DEFAULT_SNR_RANGE_DB, Manifest, MixingLoader

VARIANTS = ("vit3", "vit1", "blstm3", "lstm3", "mlp2", "mlp_vit3")

_VIT_DIM = 768
_VIT_HEADS = 8
_VIT_MLP_RATIO = 2.0
_LSTM_HIDDEN = 256
_MLP_HIDDEN = 768
_ADAPTER_DIM = 100


class DenoiserConfigError(ValueError):
    """Raised for invalid architecture descriptions."""


@dataclass(frozen=True)
class DenoiserArch:
    variant: str
    embed_dim: int
    heads: int = _VIT_HEADS
    mlp_ratio: float = _VIT_MLP_RATIO
    hidden: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DenoiserConfigError(
                f"unknown variant {self.variant!r}, expected one of {VARIANTS}"
            )
        if self.variant in ("vit1", "vit3"):
            if self.embed_dim != _VIT_DIM or self.heads != _VIT_HEADS:
                raise DenoiserConfigError(
                    f"{self.variant} requires embed_dim={_VIT_DIM} and heads={_VIT_HEADS}, "
                    f"got ({self.embed_dim}, {self.heads})"
                )
        if self.variant in ("lstm3", "blstm3") and self.hidden != _LSTM_HIDDEN:
            raise DenoiserConfigError(
                f"{self.variant} requires hidden={_LSTM_HIDDEN}, got {self.hidden}"
            )
        if self.variant == "mlp2" and self.hidden != _MLP_HIDDEN:
            raise DenoiserConfigError(
                f"mlp2 requires hidden={_MLP_HIDDEN}, got {self.hidden}"
            )
        if self.variant == "mlp_vit3" and self.embed_dim != _ADAPTER_DIM:
            raise DenoiserConfigError(
                f"mlp_vit3 adapts a {_ADAPTER_DIM}-dim embedding, got {self.embed_dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.embed_dim

    def to_config(self) -> dict:
        return asdict(self)


def canonical_arch(variant: str, embed_dim: int | None = None) -> DenoiserArch:
    """Reference configuration for a variant.

    embed_dim can be overridden for mlp2/lstm3/blstm3 so they can denoise
    the 100-dim LMS embedding; vit variants are fixed at 768.
    """
    if variant in ("vit1", "vit3"):
        return DenoiserArch(variant, _VIT_DIM, _VIT_HEADS, _VIT_MLP_RATIO)
    if variant in ("lstm3", "blstm3"):
        return DenoiserArch(variant, embed_dim or _VIT_DIM, hidden=_LSTM_HIDDEN)
    if variant == "mlp2":
        return DenoiserArch(variant, embed_dim or _VIT_DIM, hidden=_MLP_HIDDEN)
    if variant == "mlp_vit3":
        return DenoiserArch(variant, _ADAPTER_DIM, _VIT_HEADS, _VIT_MLP_RATIO)
    raise DenoiserConfigError(f"unknown variant {variant!r}")


def _linear_count(i, o):
    return i * o + o


def _vit_block_count(d, ratio):
    inner = int(d * ratio)
    return 4 * d + 4 * _linear_count(d, d) + _linear_count(d, inner) + _linear_count(inner, d)


def _lstm_count(i, h):
    return i * 4 * h + h * 4 * h + 8 * h


def closed_form_param_count(arch: DenoiserArch) -> int:
    """Analytic parameter count; the builders must match this exactly."""
    d = arch.embed_dim
    if arch.variant == "vit1":
        return _vit_block_count(d, arch.mlp_ratio)
    if arch.variant == "vit3":
        return 3 * _vit_block_count(d, arch.mlp_ratio)
    if arch.variant == "mlp_vit3":
        adapters = _linear_count(_ADAPTER_DIM, _VIT_DIM) + _linear_count(_VIT_DIM, _ADAPTER_DIM)
        return 3 * _vit_block_count(_VIT_DIM, arch.mlp_ratio) + adapters
    if arch.variant == "mlp2":
        return _linear_count(d, arch.hidden) + _linear_count(arch.hidden, d) + d
    if arch.variant == "lstm3":
        h = arch.hidden
        return (_linear_count(d, h) + _lstm_count(h, h) + 2 * _lstm_count(h, h)
                + _linear_count(h, d))
    if arch.variant == "blstm3":
        h = arch.hidden
        return (_linear_count(d, h) + 2 * _lstm_count(h, h) + 2 * 2 * _lstm_count(2 * h, h)
                + _linear_count(2 * h, d))
    raise DenoiserConfigError(f"unknown variant {arch.variant!r}")


class _VitCore(Module):
    """Pre-norm transformer stack with a parameter-free closing norm."""

    def __init__(self, n_blocks, dim, heads, ratio, rng):
        self.blocks = [TransformerBlock(dim, heads, ratio, rng) for _ in range(n_blocks)]
        self.final_norm = LayerNorm(dim, affine=False)

    def __call__(self, x):
        for block in self.blocks:
            x = block(x)
        return self.final_norm(x)


class _GatedResidualMlp(Module):
    """x + gate * MLP(x); the per-dim gate makes identity representable."""

    def __init__(self, dim, hidden, rng):
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)
        self.gate = ad.parameter(np.ones(dim, dtype=DTYPE))

    def __call__(self, x):
        return ad.add(x, ad.mul(self.fc2(ad.gelu(self.fc1(x))), self.gate))


class _LstmStack(Module):
    def __init__(self, dim, hidden, rng):
        self.in_proj = Linear(dim, hidden, rng)
        self.layers = [LstmLayer(hidden, hidden, rng) for _ in range(3)]
        self.out_proj = Linear(hidden, dim, rng)

    def __call__(self, x):
        h = self.in_proj(x)
        for layer in self.layers:
            h = layer(h)
        return self.out_proj(h)


class _BiLstmStack(Module):
    def __init__(self, dim, hidden, rng):
        self.in_proj = Linear(dim, hidden, rng)
        self.layers = [
            BiLstmLayer(hidden, hidden, rng),
            BiLstmLayer(2 * hidden, hidden, rng),
            BiLstmLayer(2 * hidden, hidden, rng),
        ]
        self.out_proj = Linear(2 * hidden, dim, rng)

    def __call__(self, x):
        h = self.in_proj(x)
        for layer in self.layers:
            h = layer(h)
        return self.out_proj(h)


class _AdaptedVit(Module):
    def __init__(self, heads, ratio, rng):
        self.up = Linear(_ADAPTER_DIM, _VIT_DIM, rng)
        self.core = _VitCore(3, _VIT_DIM, heads, ratio, rng)
        self.down = Linear(_VIT_DIM, _ADAPTER_DIM, rng)

    def __call__(self, x):
        return self.down(self.core(self.up(x)))


class DenoiserModel(Module):
    """An embedding denoiser: arch description plus its parameters."""

    def __init__(self, arch: DenoiserArch, seed: int):
        self.arch = arch
        self.seed = seed
        rng = np.random.default_rng(seed)
        if arch.variant in ("vit1", "vit3"):
            self.net = _VitCore(1 if arch.variant == "vit1" else 3,
                                arch.embed_dim, arch.heads, arch.mlp_ratio, rng)
        elif arch.variant == "mlp_vit3":
            self.net = _AdaptedVit(arch.heads, arch.mlp_ratio, rng)
        elif arch.variant == "mlp2":
            self.net = _GatedResidualMlp(arch.embed_dim, arch.hidden, rng)
        elif arch.variant == "lstm3":
            self.net = _LstmStack(arch.embed_dim, arch.hidden, rng)
        elif arch.variant == "blstm3":
            self.net = _BiLstmStack(arch.embed_dim, arch.hidden, rng)

    def forward(self, x: Tensor) -> Tensor:
        """Denoise a (batch, frames, dim) tensor inside the tape."""
        if x.shape[-1] != self.arch.input_dim:
            raise DenoiserConfigError(
                f"denoiser expects dim {self.arch.input_dim}, got {x.shape[-1]}"
            )
        return self.net(x)

    def denoise(self, emb: EmbeddingSequence) -> EmbeddingSequence:
        """Denoise one embedding sequence (inference, no tape)."""
        if emb.dim != self.arch.input_dim:
            raise DenoiserConfigError(
                f"denoiser expects dim {self.arch.input_dim}, got {emb.dim}"
            )
        with ad.no_grad():
            out = self.forward(constant(emb.data[None].astype(DTYPE)))
        return EmbeddingSequence(out.value[0], emb.frame_rate_hz, emb.encoder_id)

    def save(self, path, step: int = 0) -> None:
        save_checkpoint(path, self.arch.variant, self.arch.to_config(),
                        self.seed, step, self.state())


def build_denoiser(arch: DenoiserArch, seed: int = 0) -> DenoiserModel:
    model = DenoiserModel(arch, seed)
    actual = model.param_count()
    expected = closed_form_param_count(arch)
    if actual != expected:
        raise DenoiserConfigError(
            f"{arch.variant}: built {actual} parameters, closed form says {expected}"
        )
    return model


def load_denoiser(ckpt: Checkpoint) -> DenoiserModel:
    arch = DenoiserArch(**ckpt.config)
    model = build_denoiser(arch, ckpt.seed)
    model.load_state(ckpt.tensors)
    return model


@dataclass
class DenoiseTrainConfig:
    lr: float = 1e-4
    batch_size: int = 8
    max_steps: int = 2000
    seed: int = 0
    snr_range_db: tuple = DEFAULT_SNR_RANGE_DB
    eval_interval: int = 100

    def __post_init__(self):
        low, high = self.snr_range_db
        if not low < high:
            raise DenoiserConfigError(f"SNR range must satisfy low < high, got {self.snr_range_db}")


@dataclass
class DenoiseTrainResult:
    model: DenoiserModel
    loss_trace: list  # (step, mse) pairs
    final_loss: float


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    return ad.mean(ad.square(ad.sub(pred, target)))


def train_denoiser(cfg: DenoiseTrainConfig, arch: DenoiserArch, manifest: Manifest,
                   encoder_id: str = "lms", log=None) -> DenoiseTrainResult:
    """Minimize MSE between denoised noisy embeddings and clean embeddings.

    The encoder is frozen by construction: embeddings are computed outside
    the tape and enter as constants.
    """
    desc = encoder_descriptor(encoder_id)
    if desc.source != "builtin_lms":
        raise DenoiserConfigError(
            f"on-the-fly training runs on the builtin lms encoder; {encoder_id!r} "
            "embeddings are interfaced through EMB1 files"
        )
    if arch.input_dim != desc.dim:
        raise DenoiserConfigError(
            f"arch input dim {arch.input_dim} does not match encoder dim {desc.dim}"
        )

    loader = MixingLoader(manifest, cfg.seed, cfg.snr_range_db)
    model = build_denoiser(arch, cfg.seed)
    opt = AdamW(model.named_parameters(), lr=cfg.lr)

    trace = []
    for step in range(cfg.max_steps):
        noisy_batch = []
        clean_batch = []
        for j in range(cfg.batch_size):
            sample = loader.mixture(step * cfg.batch_size + j)
            noisy_batch.append(lms_encode(Waveform(sample.mixture, 16000)).data)
            clean_batch.append(lms_encode(Waveform(sample.clean, 16000)).data)
        noisy = constant(np.stack(noisy_batch).astype(DTYPE))
        clean = constant(np.stack(clean_batch).astype(DTYPE))

        opt.zero_grad()
        loss = mse_loss(model.forward(noisy), clean)
        loss_val = float(loss.value)
        if not np.isfinite(loss_val):
            raise ad.NumericError(f"train_denoiser: non-finite loss at step {step}")
        backward(loss)
        opt.step()

        if step % cfg.eval_interval == 0 or step == cfg.max_steps - 1:
            trace.append((step, loss_val))
            if log:
                log(f"step {step}: mse {loss_val:.6f}")
    return DenoiseTrainResult(model=model, loss_trace=trace, final_loss=trace[-1][1])
