"""Embedding-domain speech enhancement at desk scale.

Encode audio into frame-level embeddings, denoise the embeddings with a
compact trainable network, and resynthesize with a ConvNeXt vocoder that
predicts Fourier coefficients recovered through the inverse STFT.
"""

from .dsp import (
    ComplexSpectrogram,
    MelConfig,
    StftConfig,
    Waveform,
    istft,
    log_mel,
    resample,
    stft,
)
from .encoders import EmbeddingSequence, lms_encode, read_embeddings, write_embeddings
from .denoiser import (
    DenoiseTrainConfig,
    DenoiserArch,
    build_denoiser,
    canonical_arch,
    train_denoiser,
)
from .metrics import MetricReport, cosine_similarity, lsd, si_snr, stoi
from .mixer import MixingLoader, gain_for_snr, load_manifest, mix, sample_snr
from .pipeline import Enhancer, PipelineConfig, evaluate_pairs, load_pairs
from .vocoder import (
    VocoderConfig,
    VocoderTrainConfig,
    build_vocoder,
    mel_reconstruction_loss,
    train_vocoder,
)

__version__ = "0.1.0"
