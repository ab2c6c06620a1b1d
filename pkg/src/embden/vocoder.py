"""ConvNeXt-backbone vocoder with an ISTFT head, plus its GAN training.

The generator upsamples embeddings to the STFT frame rate, predicts
log-magnitude and phase angle per bin (head width n_fft + 2), and
synthesizes audio by inverse STFT with squared-window overlap-add — all
inside the autodiff tape so reconstruction and adversarial losses
backpropagate through synthesis. Discriminators: period-strided
waveform views (MPD, periods 2/3/5/7/11) and magnitude spectrograms at
three resolutions (MRD). Hinge adversarial losses by default with a
least-squares option, plus feature matching and log-mel L1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import AdamW, Tensor, backward, clip_global_norm, constant
from .checkpoint import Checkpoint, save_checkpoint
from .dsp import INTERNAL_RATE_HZ, MelConfig, StftConfig, Waveform, hann_window, mel_filterbank
from .encoders import EmbeddingSequence, LMS_MEL, LMS_STFT, lms_encode
from .layers import DTYPE, Conv1d, DepthwiseConv1d, LayerNorm, Linear, Module
from .mixer import Manifest, MixingLoader

MPD_PERIODS = (2, 3, 5, 7, 11)
MRD_RESOLUTIONS = ((1024, 256), (2048, 512), (512, 128))
LOG_MAG_CEILING = float(np.log(1e3))


class VocoderConfigError(ValueError):
    """Raised for invalid vocoder configurations or inputs."""


@dataclass(frozen=True)
class VocoderConfig:
    input_dim: int = 100
    input_frame_rate_hz: float = 62.5
    hidden_dim: int = 128
    n_blocks: int = 4
    intermediate_dim: int = 384
    stft: StftConfig = field(default_factory=StftConfig)

    @property
    def head_width(self) -> int:
        return self.stft.n_fft + 2

    def to_config(self) -> dict:
        d = asdict(self)
        d["stft"] = {"n_fft": self.stft.n_fft, "hop": self.stft.hop,
                     "window": self.stft.window, "center": self.stft.center}
        return d

    @staticmethod
    def from_config(d: dict) -> "VocoderConfig":
        d = dict(d)
        d["stft"] = StftConfig(**d["stft"])
        return VocoderConfig(**d)


FULL_SIZE = dict(hidden_dim=512, n_blocks=8, intermediate_dim=1536)


class _ConvNeXtBlock(Module):
    def __init__(self, dim, intermediate, rng):
        self.dwconv = DepthwiseConv1d(dim, 7, rng)
        self.norm = LayerNorm(dim)
        self.pw1 = Linear(dim, intermediate, rng)
        self.pw2 = Linear(intermediate, dim, rng)
        self.gamma = ad.parameter(np.full(dim, 1e-1, dtype=DTYPE))

    def __call__(self, x):  # (B, C, T)
        h = self.dwconv(x)
        h = ad.transpose(h, (0, 2, 1))
        h = self.norm(h)
        h = self.pw2(ad.gelu(self.pw1(h)))
        h = ad.mul(h, self.gamma)
        return ad.add(x, ad.transpose(h, (0, 2, 1)))


def _nearest_index(n_in: int, rate_in: float, rate_out: float) -> np.ndarray:
    # half-up rounding throughout so frame counts match the analysis side
    n_out = int(np.floor(n_in * rate_out / rate_in + 0.5))
    idx = np.floor(np.arange(n_out) * rate_in / rate_out + 0.5).astype(int)
    return np.minimum(idx, n_in - 1)


class VocoderModel(Module):
    """Embeddings (B, T, D) -> waveform (B, T_frames * hop)."""

    def __init__(self, cfg: VocoderConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.embed = Conv1d(cfg.input_dim, cfg.hidden_dim, 7, rng)
        self.norm_pre = LayerNorm(cfg.hidden_dim)
        self.blocks = [_ConvNeXtBlock(cfg.hidden_dim, cfg.intermediate_dim, rng)
                       for _ in range(cfg.n_blocks)]
        self.norm_post = LayerNorm(cfg.hidden_dim)
        self.head = Linear(cfg.hidden_dim, cfg.head_width, rng)

        n_fft, hop = cfg.stft.n_fft, cfg.stft.hop
        self._window = hann_window(n_fft).astype(DTYPE)
        # crop must mirror the center=true analysis padding (n_fft/2) so the
        # synthesis grid lines up with the encoder's frame centers; feeding
        # true STFT coefficients through this path reconstructs the input
        self._crop = n_fft // 2

    def _phase_rotation(self, n_frames: int) -> np.ndarray:
        n_fft, hop = self.cfg.stft.n_fft, self.cfg.stft.hop
        k = np.arange(self.cfg.stft.bins)
        t = np.arange(n_frames)[:, None]
        return (2.0 * np.pi * hop / n_fft * (t * k)).astype(DTYPE)

    def _wsq_inverse(self, n_frames: int) -> np.ndarray:
        n_fft, hop = self.cfg.stft.n_fft, self.cfg.stft.hop
        w2 = self._window.astype(np.float64) ** 2
        total = (n_frames - 1) * hop + n_fft
        wsq = np.zeros(total)
        for t in range(n_frames):
            wsq[t * hop : t * hop + n_fft] += w2
        return (1.0 / np.maximum(wsq, 1e-8)).astype(DTYPE)

    def forward(self, emb: Tensor, frame_rate_hz: float) -> Tensor:
        """Differentiable synthesis of a (B, T, D) embedding batch."""
        if emb.shape[-1] != self.cfg.input_dim:
            raise VocoderConfigError(
                f"vocoder expects dim {self.cfg.input_dim}, got {emb.shape[-1]}"
            )
        if abs(frame_rate_hz - self.cfg.input_frame_rate_hz) > 1e-6:
            raise VocoderConfigError(
                f"vocoder trained at {self.cfg.input_frame_rate_hz} Hz embeddings, "
                f"got {frame_rate_hz} Hz"
            )
        stft_rate = INTERNAL_RATE_HZ / self.cfg.stft.hop
        idx = _nearest_index(emb.shape[1], frame_rate_hz, stft_rate)

        h = ad.transpose(emb, (0, 2, 1))                    # (B, D, T)
        h = ad.take_last(h, idx)                            # upsample to STFT rate
        h = self.embed(h)
        h = ad.transpose(h, (0, 2, 1))
        h = self.norm_pre(h)
        h = ad.transpose(h, (0, 2, 1))
        for block in self.blocks:
            h = block(h)
        h = ad.transpose(h, (0, 2, 1))                      # (B, F, C)
        h = self.norm_post(h)
        coeffs = self.head(h)                               # (B, F, n_fft + 2)

        bins = self.cfg.stft.bins
        log_mag = ad.minimum_const(ad.narrow_last(coeffs, 0, bins), LOG_MAG_CEILING)
        phase = ad.narrow_last(coeffs, bins, bins)
        # the natural STFT phase of bin k advances by 2*pi*k*hop/n_fft per
        # frame; adding that rotation as a fixed bias means the head predicts
        # phase in the derotated frame, where coherent synthesis is the
        # zero-offset default
        phase = ad.add(phase, constant(self._phase_rotation(coeffs.shape[1])))
        mag = ad.exp(log_mag)
        re = ad.mul(mag, ad.cos(phase))
        im = ad.mul(mag, ad.sin(phase))
        return self._istft_same(re, im)

    def _istft_same(self, re: Tensor, im: Tensor) -> Tensor:
        n_fft, hop = self.cfg.stft.n_fft, self.cfg.stft.hop
        b, n_frames, _ = re.shape
        frames = ad.irfft_pair(re, im, n_fft)               # (B, F, n_fft)
        frames = ad.mul(frames, constant(self._window))
        total = (n_frames - 1) * hop + n_fft
        positions = (np.arange(n_frames)[:, None] * hop
                     + np.arange(n_fft)[None, :]).reshape(-1)
        flat = ad.reshape(frames, (b, n_frames * n_fft))
        signal = ad.scatter_add_last(flat, positions, total)
        signal = ad.mul(signal, constant(self._wsq_inverse(n_frames)))
        return ad.narrow_last(signal, self._crop, n_frames * hop)

    def synthesize(self, emb: EmbeddingSequence) -> Waveform:
        """Inference-mode synthesis of one embedding sequence."""
        with ad.no_grad():
            out = self.forward(constant(emb.data[None].astype(DTYPE)), emb.frame_rate_hz)
        return Waveform(out.value[0], INTERNAL_RATE_HZ)

    def save(self, path, step: int = 0) -> None:
        save_checkpoint(path, "vocos_g", self.cfg.to_config(), self.seed, step, self.state())


def build_vocoder(cfg: VocoderConfig, seed: int = 0) -> VocoderModel:
    return VocoderModel(cfg, seed)


def load_vocoder(ckpt: Checkpoint) -> VocoderModel:
    if ckpt.arch_id != "vocos_g":
        raise VocoderConfigError(f"expected a vocos_g checkpoint, got {ckpt.arch_id!r}")
    model = VocoderModel(VocoderConfig.from_config(ckpt.config), ckpt.seed)
    model.load_state(ckpt.tensors)
    return model


# ---------------------------------------------------------------------------
# discriminators


@dataclass
class DiscriminatorOutput:
    logits: list          # one Tensor per sub-discriminator
    features: list        # one ordered list of Tensors per sub-discriminator


class _PeriodDiscriminator(Module):
    """Strided convolutions over one period-folded waveform view.

    The first conv keeps stride 1 so the leading feature maps retain full
    waveform resolution; feature matching on them then supervises fine
    temporal structure, not just envelopes.
    """

    def __init__(self, period, channels, rng):
        self.period = period
        convs = []
        prev = 1
        for i, ch in enumerate(channels):
            convs.append(Conv1d(prev, ch, 5, rng, stride=1 if i == 0 else 3, padding=2))
            prev = ch
        self.convs = convs
        self.post = Conv1d(prev, 1, 3, rng)

    def __call__(self, x: Tensor):
        (t,) = x.shape
        p = self.period
        pad = (-t) % p
        if pad:
            x = ad.pad_last(x, 0, pad)
        folded = ad.reshape(x, ((t + pad) // p, p))
        folded = ad.reshape(ad.swap_last2(folded), (p, 1, (t + pad) // p))
        feats = []
        h = folded
        for conv in self.convs:
            h = ad.leaky_relu(conv(h), 0.1)
            feats.append(h)
        logits = self.post(h)
        feats.append(logits)
        return logits, feats


class MultiPeriodDiscriminator(Module):
    def __init__(self, seed, periods=MPD_PERIODS, channels=(16, 32, 64)):
        rng = np.random.default_rng(seed)
        self.periods = tuple(periods)
        self.subs = [_PeriodDiscriminator(p, channels, rng) for p in periods]
        self.seed = seed

    def __call__(self, w: Tensor) -> DiscriminatorOutput:
        if w.value.size == 0:
            raise VocoderConfigError("discriminator input waveform is empty")
        logits, features = [], []
        for sub in self.subs:
            lg, ft = sub(w)
            logits.append(lg)
            features.append(ft)
        return DiscriminatorOutput(logits, features)

    def save(self, path, step: int = 0) -> None:
        save_checkpoint(path, "vocos_mpd", {"periods": list(self.periods)},
                        self.seed, step, self.state())


class _ResolutionDiscriminator(Module):
    """Convolutions over time on a magnitude spectrogram (bins as channels)."""

    def __init__(self, n_fft, hop, channels, rng):
        self.n_fft = n_fft
        self.hop = hop
        self._window = hann_window(n_fft).astype(DTYPE)
        convs = []
        prev = n_fft // 2 + 1
        for ch in channels:
            convs.append(Conv1d(prev, ch, 5, rng, stride=2, padding=2))
            prev = ch
        self.convs = convs
        self.post = Conv1d(prev, 1, 3, rng)

    def _magnitude(self, x: Tensor) -> Tensor:
        (t,) = x.shape
        pad = self.n_fft // 2
        padded = ad.pad_last(ad.reshape(x, (1, t)), pad, pad)
        n_frames = 1 + (t + 2 * pad - self.n_fft) // self.hop
        idx = (np.arange(n_frames)[:, None] * self.hop
               + np.arange(self.n_fft)[None, :])
        frames = ad.take_last(padded, idx)                  # (1, F, n_fft)
        frames = ad.mul(frames, constant(self._window))
        re, im = ad.rfft_pair(frames)
        power = ad.add(ad.square(re), ad.square(im))
        mag = ad.sqrt(ad.add(power, 1e-9))
        return ad.transpose(mag, (0, 2, 1))                 # (1, bins, F)

    def __call__(self, x: Tensor):
        h = self._magnitude(x)
        feats = []
        for conv in self.convs:
            h = ad.leaky_relu(conv(h), 0.1)
            feats.append(h)
        logits = self.post(h)
        feats.append(logits)
        return logits, feats


class MultiResolutionDiscriminator(Module):
    def __init__(self, seed, resolutions=MRD_RESOLUTIONS, channels=(32, 32, 32)):
        rng = np.random.default_rng(seed)
        self.resolutions = tuple(tuple(r) for r in resolutions)
        self.subs = [_ResolutionDiscriminator(n, h, channels, rng)
                     for n, h in self.resolutions]
        self.seed = seed

    def __call__(self, w: Tensor) -> DiscriminatorOutput:
        if w.value.size == 0:
            raise VocoderConfigError("discriminator input waveform is empty")
        logits, features = [], []
        for sub in self.subs:
            lg, ft = sub(w)
            logits.append(lg)
            features.append(ft)
        return DiscriminatorOutput(logits, features)

    def save(self, path, step: int = 0) -> None:
        save_checkpoint(path, "vocos_mrd", {"resolutions": [list(r) for r in self.resolutions]},
                        self.seed, step, self.state())


def discriminate(disc, w: Waveform) -> DiscriminatorOutput:
    """Run a discriminator on a plain waveform (no gradient tracking)."""
    if w.sample_rate_hz != INTERNAL_RATE_HZ:
        raise VocoderConfigError(f"discriminators expect {INTERNAL_RATE_HZ} Hz input")
    with ad.no_grad():
        return disc(constant(np.asarray(w.samples, dtype=DTYPE)))


# ---------------------------------------------------------------------------
# losses


@dataclass
class VocoderLossReport:
    adv_g: float
    adv_d: float
    feature_matching: float
    mel_reconstruction: float


def _pool_logits(outputs: DiscriminatorOutput) -> Tensor:
    flat = [ad.reshape(lg, (int(np.prod(lg.shape)),)) for lg in outputs.logits]
    return ad.concat_last(flat)


def hinge_d_loss(real: DiscriminatorOutput, fake: DiscriminatorOutput) -> Tensor:
    r = _pool_logits(real)
    f = _pool_logits(fake)
    return ad.add(ad.mean(ad.relu(ad.sub(1.0, r))), ad.mean(ad.relu(ad.add(1.0, f))))


def hinge_g_loss(fake: DiscriminatorOutput) -> Tensor:
    return ad.mean(ad.neg(_pool_logits(fake)))


def least_squares_d_loss(real: DiscriminatorOutput, fake: DiscriminatorOutput) -> Tensor:
    r = _pool_logits(real)
    f = _pool_logits(fake)
    return ad.add(ad.mean(ad.square(ad.sub(1.0, r))), ad.mean(ad.square(f)))


def least_squares_g_loss(fake: DiscriminatorOutput) -> Tensor:
    return ad.mean(ad.square(ad.sub(1.0, _pool_logits(fake))))


def feature_matching_loss(real: DiscriminatorOutput, fake: DiscriminatorOutput) -> Tensor:
    """Mean over layers of the L1 distance between feature maps."""
    if len(real.features) != len(fake.features):
        raise VocoderConfigError(
            f"feature lists differ: {len(real.features)} vs {len(fake.features)} sub-discriminators"
        )
    terms = []
    for rf, ff in zip(real.features, fake.features):
        if len(rf) != len(ff):
            raise VocoderConfigError(
                f"feature lists differ in depth: {len(rf)} vs {len(ff)} layers"
            )
        for r, f in zip(rf, ff):
            terms.append(ad.mean(ad.abs_(ad.sub(r, f))))
    acc = terms[0]
    for t in terms[1:]:
        acc = ad.add(acc, t)
    return ad.mul(acc, 1.0 / len(terms))


def gan_losses(real: DiscriminatorOutput, fake: DiscriminatorOutput,
               adversarial: str = "hinge"):
    """Adversarial and feature-matching terms for one discriminator set.

    Returns (d_loss, g_loss, feature_matching) tensors; hinge by default,
    least-squares behind the flag.
    """
    if adversarial == "hinge":
        d_loss, g_loss = hinge_d_loss(real, fake), hinge_g_loss(fake)
    elif adversarial == "least_squares":
        d_loss, g_loss = least_squares_d_loss(real, fake), least_squares_g_loss(fake)
    else:
        raise VocoderConfigError(f"unknown adversarial loss {adversarial!r}")
    return d_loss, g_loss, feature_matching_loss(real, fake)


_MEL_FB = None


def _mel_fb() -> np.ndarray:
    global _MEL_FB
    if _MEL_FB is None:
        _MEL_FB = mel_filterbank(INTERNAL_RATE_HZ, LMS_STFT.n_fft, LMS_MEL).T.astype(DTYPE)
    return _MEL_FB


def _log_mel_tape(x: Tensor) -> Tensor:
    """Differentiable 100-bin log-mel of a 1-D waveform tensor (reflect-padded
    framing identical to dsp.log_mel)."""
    (t,) = x.shape
    n_fft, hop = LMS_STFT.n_fft, LMS_STFT.hop
    pad = n_fft // 2
    if t < pad + 1:
        raise VocoderConfigError(f"waveform of {t} samples too short for mel loss")
    reflect = np.concatenate([np.arange(pad, 0, -1),
                              np.arange(t),
                              t - 2 - np.arange(pad)])
    padded = ad.take_last(ad.reshape(x, (1, t)), reflect)
    n_frames = 1 + (t + 2 * pad - n_fft) // hop
    idx = np.arange(n_frames)[:, None] * hop + np.arange(n_fft)[None, :]
    frames = ad.mul(ad.take_last(padded, idx), constant(hann_window(n_fft).astype(DTYPE)))
    re, im = ad.rfft_pair(frames)
    power = ad.add(ad.square(re), ad.square(im))
    mel = ad.matmul(power, constant(_mel_fb().astype(power.dtype)))
    return ad.log(ad.maximum_const(mel, LMS_MEL.log_floor))


def mel_reconstruction_loss(ref, est) -> Tensor:
    """L1 distance between 100-bin log-mel spectrograms.

    `ref` and `est` may be Waveforms or 1-D tensors; est is cropped or
    zero-padded to the reference length. Differentiable in `est`.
    """
    if isinstance(ref, Waveform):
        ref = constant(np.asarray(ref.samples, dtype=DTYPE))
    if isinstance(est, Waveform):
        est = constant(np.asarray(est.samples, dtype=DTYPE))
    (t_ref,), (t_est,) = ref.shape, est.shape
    if t_est > t_ref:
        est = ad.narrow_last(est, 0, t_ref)
    elif t_est < t_ref:
        est = ad.pad_last(est, 0, t_ref - t_est)
    return ad.mean(ad.abs_(ad.sub(_log_mel_tape(ref), _log_mel_tape(est))))


# ---------------------------------------------------------------------------
# training


@dataclass
class VocoderTrainConfig:
    lr: float = 2e-4
    betas: tuple = (0.8, 0.99)
    max_steps: int = 3000
    seed: int = 0
    eval_interval: int = 100
    lambda_fm: float = 2.0
    lambda_mel: float = 45.0
    use_discriminators: bool = True
    adversarial: str = "hinge"  # or "least_squares"
    grad_clip: float = 10.0
    vocoder: VocoderConfig = field(default_factory=VocoderConfig)

    def __post_init__(self):
        if self.adversarial not in ("hinge", "least_squares"):
            raise VocoderConfigError(f"unknown adversarial loss {self.adversarial!r}")


@dataclass
class VocoderTrainResult:
    generator: VocoderModel
    mpd: MultiPeriodDiscriminator | None
    mrd: MultiResolutionDiscriminator | None
    traces: dict  # name -> list of (step, value)


def train_vocoder(cfg: VocoderTrainConfig, manifest: Manifest, log=None,
                  freeze_generator: bool = False) -> VocoderTrainResult:
    """Self-supervised vocoder training on clean speech only.

    Resynthesizes LMS embeddings of clean crops; generator loss is
    adv + lambda_fm * feature_matching + lambda_mel * mel L1. One
    discriminator step per generator step. The encoder stays frozen
    (embeddings are tape constants).
    """
    manifest.require_clean()
    loader = MixingLoader(manifest, cfg.seed)
    gen = build_vocoder(cfg.vocoder, cfg.seed)
    g_opt = AdamW(gen.named_parameters(), lr=cfg.lr, betas=cfg.betas)

    mpd = mrd = None
    d_opt = None
    if cfg.use_discriminators:
        mpd = MultiPeriodDiscriminator(cfg.seed + 1)
        mrd = MultiResolutionDiscriminator(cfg.seed + 2)
        d_params = {f"mpd.{k}": v for k, v in mpd.named_parameters().items()}
        d_params.update({f"mrd.{k}": v for k, v in mrd.named_parameters().items()})
        d_opt = AdamW(d_params, lr=cfg.lr, betas=cfg.betas)

    d_loss_fn = hinge_d_loss if cfg.adversarial == "hinge" else least_squares_d_loss
    g_loss_fn = hinge_g_loss if cfg.adversarial == "hinge" else least_squares_g_loss

    traces = {"g_total": [], "mel": [], "adv_g": [], "adv_d": [], "fm": []}

    def record(name, step, value):
        if not np.isfinite(value):
            raise ad.NumericError(f"train_vocoder: non-finite {name} loss at step {step}")
        if step % cfg.eval_interval == 0 or step == cfg.max_steps - 1:
            traces[name].append((step, value))

    frame_rate = INTERNAL_RATE_HZ / LMS_STFT.hop
    for step in range(cfg.max_steps):
        clean = loader.clean_crop(step)
        emb = lms_encode(clean)
        emb_t = constant(emb.data[None].astype(DTYPE))
        real = constant(np.asarray(clean.samples, dtype=DTYPE))

        if freeze_generator:
            with ad.no_grad():
                fake_wave = gen.forward(emb_t, frame_rate)
        else:
            fake_wave = gen.forward(emb_t, frame_rate)
        fake_1d = ad.reshape(fake_wave, (fake_wave.shape[-1],))
        # synthesis covers whole frames and runs up to one hop longer than
        # the crop; align so discriminators compare equal-length signals
        n_real = real.shape[0]
        if fake_1d.shape[0] > n_real:
            fake_1d = ad.narrow_last(fake_1d, 0, n_real)
        elif fake_1d.shape[0] < n_real:
            fake_1d = ad.pad_last(fake_1d, 0, n_real - fake_1d.shape[0])

        adv_d_val = adv_g_val = fm_val = 0.0
        if cfg.use_discriminators:
            # discriminator phase on the detached waveform
            fake_detached = fake_1d.detach()
            d_loss = ad.add(
                d_loss_fn(mpd(real), mpd(fake_detached)),
                d_loss_fn(mrd(real), mrd(fake_detached)),
            )
            adv_d_val = float(d_loss.value)
            record("adv_d", step, adv_d_val)
            d_opt.zero_grad()
            backward(d_loss)
            clip_global_norm(d_opt.params, cfg.grad_clip)
            d_opt.step()

        if not freeze_generator:
            mel = mel_reconstruction_loss(real, fake_1d)
            g_total = ad.mul(mel, cfg.lambda_mel)
            if cfg.use_discriminators:
                with ad.no_grad():
                    real_out_mpd = mpd(real)
                    real_out_mrd = mrd(real)
                fake_out_mpd = mpd(fake_1d)
                fake_out_mrd = mrd(fake_1d)
                adv_g = ad.add(g_loss_fn(fake_out_mpd), g_loss_fn(fake_out_mrd))
                fm = ad.add(
                    feature_matching_loss(real_out_mpd, fake_out_mpd),
                    feature_matching_loss(real_out_mrd, fake_out_mrd),
                )
                adv_g_val, fm_val = float(adv_g.value), float(fm.value)
                record("adv_g", step, adv_g_val)
                record("fm", step, fm_val)
                g_total = ad.add(g_total, ad.add(adv_g, ad.mul(fm, cfg.lambda_fm)))

            mel_val = float(mel.value)
            total_val = float(g_total.value)
            record("mel", step, mel_val)
            record("g_total", step, total_val)
            g_opt.zero_grad()
            if cfg.use_discriminators:
                d_opt.zero_grad()  # discard generator-phase leakage into D
            backward(g_total)
            clip_global_norm(g_opt.params, cfg.grad_clip)
            g_opt.step()
            if log and (step % cfg.eval_interval == 0 or step == cfg.max_steps - 1):
                log(f"step {step}: mel {mel_val:.4f} adv_g {adv_g_val:.4f} "
                    f"fm {fm_val:.4f} adv_d {adv_d_val:.4f}")

    return VocoderTrainResult(generator=gen, mpd=mpd, mrd=mrd, traces=traces)
