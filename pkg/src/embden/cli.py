"""Command-line surface.

Subcommands: mix, train-denoiser, train-vocoder, enhance, evaluate,
count-params, emb export / emb import. Every subcommand accepts --config
(single JSON document, flags override) and echoes the effective
configuration into its output directory. Exit codes: 0 success,
2 config/validation error, 3 numeric failure, 4 I/O or format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .autodiff import NumericError
from .checkpoint import CheckpointFormatError
from .denoiser import (
    VARIANTS,
    DenoiseTrainConfig,
    DenoiserConfigError,
    canonical_arch,
    closed_form_param_count,
    train_denoiser,
)
from .dsp import INTERNAL_RATE_HZ, DspError, Waveform, resample
from .encoders import (
    EmbeddingFormatError,
    encoder_descriptor,
    lms_encode,
    read_embeddings,
    write_embeddings,
)
from .metrics import MetricError
from .mixer import MixerError, MixingLoader, load_manifest
from .pipeline import (
    Enhancer,
    PipelineConfig,
    PipelineConfigError,
    evaluate_pairs,
    load_pairs,
)
from .reporting import save_loss_figure, save_metric_report, save_traces_csv
from .vocoder import VocoderConfig, VocoderConfigError, VocoderTrainConfig, train_vocoder
from .wavio import WavFormatError, read_wav, write_wav

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_CONFIG_SECTIONS = ("pipeline", "mix", "train_denoiser", "train_vocoder")


def _load_config(path) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise PipelineConfigError(f"{path}: config must be a JSON object")
    return doc


def _section(config: dict, name: str) -> dict:
    if name in config:
        return dict(config[name])
    if name == "pipeline":
        return {k: v for k, v in config.items() if k not in _CONFIG_SECTIONS}
    return {}


def _echo_config(out_dir: Path, effective: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "effective_config.json").write_text(
        json.dumps(effective, indent=2, sort_keys=True, default=str)
    )


def _pipeline_config(args) -> PipelineConfig:
    section = _section(_load_config(args.config), "pipeline")
    cfg = PipelineConfig(**{k: tuple(v) if k == "metrics" else v
                            for k, v in section.items()})
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    return cfg


def _cmd_mix(args) -> int:
    section = _section(_load_config(args.config), "mix")
    snr_min = args.snr_min if args.snr_min is not None else section.get("snr_min", -10.0)
    snr_max = args.snr_max if args.snr_max is not None else section.get("snr_max", 25.0)
    seed = args.seed if args.seed is not None else section.get("seed", 0)
    count = args.count if args.count is not None else section.get("count", 16)

    manifest = load_manifest(args.manifest)
    loader = MixingLoader(manifest, seed, (snr_min, snr_max))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    import csv as _csv

    pair_lines = []
    snrs = []
    with open(out / "mixes.csv", "w", newline="") as f:
        writer = _csv.writer(f)
        writer.writerow(["id", "snr_db", "gain"])
        for i in range(count):
            sample = loader.mixture(i)
            noisy_path = out / f"noisy_{i:04d}.wav"
            clean_path = out / f"clean_{i:04d}.wav"
            write_wav(noisy_path, sample.mixture, INTERNAL_RATE_HZ)
            write_wav(clean_path, sample.clean, INTERNAL_RATE_HZ)
            writer.writerow([i, f"{sample.snr_db:.4f}", f"{sample.gain:.6g}"])
            snrs.append(sample.snr_db)
            pair_lines.append(json.dumps(
                {"id": f"{i:04d}", "clean": clean_path.name, "processed": noisy_path.name}
            ))
    (out / "pairs.jsonl").write_text("\n".join(pair_lines))

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist(snrs, bins=min(20, max(5, count)), color="#4878d0", edgecolor="white")
    ax.set_xlabel("target SNR (dB)")
    ax.set_ylabel("mixtures")
    fig.tight_layout()
    fig.savefig(out / "snr_hist.png", dpi=120)
    plt.close(fig)

    _echo_config(out, {"mix": {"manifest": str(args.manifest), "snr_min": snr_min,
                               "snr_max": snr_max, "seed": seed, "count": count}})
    print(f"wrote {count} (noisy, clean) pairs to {out}")
    return EXIT_OK


def _cmd_train_denoiser(args) -> int:
    section = _section(_load_config(args.config), "train_denoiser")
    manifest_path = args.manifest or section.get("manifest")
    if not manifest_path:
        raise PipelineConfigError("train-denoiser needs --manifest or config.train_denoiser.manifest")
    encoder_id = section.get("encoder_id", "lms")
    cfg = DenoiseTrainConfig(
        lr=args.lr if args.lr is not None else section.get("lr", 1e-4),
        batch_size=args.batch_size if args.batch_size is not None else section.get("batch_size", 8),
        max_steps=args.steps if args.steps is not None else section.get("max_steps", 2000),
        seed=args.seed if args.seed is not None else section.get("seed", 0),
        snr_range_db=tuple(section.get("snr_range_db", (-10.0, 25.0))),
        eval_interval=section.get("eval_interval", 100),
    )
    arch = canonical_arch(args.arch, embed_dim=encoder_descriptor(encoder_id).dim)
    manifest = load_manifest(manifest_path)

    out = Path(args.out or section.get("out_dir", "runs/denoiser"))
    out.mkdir(parents=True, exist_ok=True)
    result = train_denoiser(cfg, arch, manifest, encoder_id=encoder_id, log=print)

    ckpt_path = out / f"denoiser_{args.arch}.ckpt"
    result.model.save(ckpt_path, step=cfg.max_steps)
    traces = {"mse": result.loss_trace}
    save_traces_csv(traces, out / "loss_trace.csv")
    save_loss_figure(traces, out / "loss_curve.png", title=f"denoiser {args.arch} training")
    _echo_config(out, {"train_denoiser": {**cfg.__dict__, "arch": args.arch,
                                          "encoder_id": encoder_id,
                                          "manifest": str(manifest_path)}})
    print(f"final mse {result.final_loss:.6f}; checkpoint {ckpt_path}")
    return EXIT_OK


def _cmd_train_vocoder(args) -> int:
    section = _section(_load_config(args.config), "train_vocoder")
    manifest_path = args.manifest or section.get("manifest")
    if not manifest_path:
        raise PipelineConfigError("train-vocoder needs --manifest or config.train_vocoder.manifest")
    vocoder_cfg = VocoderConfig(
        input_dim=section.get("input_dim", 100),
        input_frame_rate_hz=section.get("input_frame_rate_hz", 62.5),
        hidden_dim=section.get("hidden_dim", 128),
        n_blocks=section.get("n_blocks", 4),
        intermediate_dim=section.get("intermediate_dim", 384),
    )
    use_disc = not args.no_discriminators and section.get("use_discriminators", True)
    cfg = VocoderTrainConfig(
        lr=args.lr if args.lr is not None else section.get("lr", 2e-4),
        max_steps=args.steps if args.steps is not None else section.get("max_steps", 3000),
        seed=args.seed if args.seed is not None else section.get("seed", 0),
        eval_interval=section.get("eval_interval", 100),
        lambda_fm=section.get("lambda_fm", 2.0),
        lambda_mel=section.get("lambda_mel", 45.0),
        use_discriminators=use_disc,
        adversarial=section.get("adversarial", "hinge"),
        vocoder=vocoder_cfg,
    )
    manifest = load_manifest(manifest_path)
    out = Path(args.out or section.get("out_dir", "runs/vocoder"))
    out.mkdir(parents=True, exist_ok=True)
    result = train_vocoder(cfg, manifest, log=print)

    gen_path = out / "vocoder.ckpt"
    result.generator.save(gen_path, step=cfg.max_steps)
    if result.mpd is not None:
        result.mpd.save(out / "vocoder_mpd.ckpt", step=cfg.max_steps)
    if result.mrd is not None:
        result.mrd.save(out / "vocoder_mrd.ckpt", step=cfg.max_steps)
    save_traces_csv(result.traces, out / "loss_trace.csv")
    save_loss_figure(result.traces, out / "loss_curve.png", title="vocoder training")
    effective = {**{k: v for k, v in cfg.__dict__.items() if k != "vocoder"},
                 "vocoder": vocoder_cfg.to_config(), "manifest": str(manifest_path)}
    _echo_config(out, {"train_vocoder": effective})
    print(f"checkpoint {gen_path}")
    return EXIT_OK


def _cmd_enhance(args) -> int:
    cfg = _pipeline_config(args)
    enhancer = Enhancer.from_config(cfg)
    samples, rate = read_wav(args.input)
    enhanced = enhancer.enhance(Waveform(samples, rate))
    out = Path(args.output)
    if out.parent != Path("."):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_wav(out, enhanced.samples, enhanced.sample_rate_hz)
    print(f"enhanced {args.input} -> {out} ({len(enhanced)} samples)")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = _pipeline_config(args)
    metric_names = tuple(args.metrics.split(",")) if args.metrics else cfg.metrics
    pairs = load_pairs(args.pairs)
    report = evaluate_pairs(pairs, metric_names, workers=cfg.workers)
    written = save_metric_report(report, args.report)
    _echo_config(Path(args.report).parent,
                 {"pipeline": cfg.to_dict(), "metrics": list(metric_names),
                  "pairs": str(args.pairs)})
    agg = report.aggregates
    print(json.dumps({"aggregates": agg,
                      "counts": report.to_dict()["counts"]}, indent=2, sort_keys=True))
    print("wrote " + ", ".join(str(p) for p in written))
    return EXIT_OK


def _cmd_count_params(args) -> int:
    variants = [args.arch] if args.arch else list(VARIANTS)
    for variant in variants:
        count = closed_form_param_count(canonical_arch(variant))
        print(f"{variant:10s} {count:>12,} ({count / 1e6:.1f} M)")
    return EXIT_OK


def _cmd_emb(args) -> int:
    if args.emb_command == "export":
        if args.encoder != "lms":
            raise PipelineConfigError(
                f"builtin export supports the lms encoder; {args.encoder!r} embeddings "
                "come from the external export helper"
            )
        samples, rate = read_wav(args.input)
        w = resample(Waveform(samples, rate), INTERNAL_RATE_HZ)
        write_embeddings(lms_encode(w), args.output)
        print(f"wrote lms embeddings {args.output}")
        return EXIT_OK
    seq = read_embeddings(args.input)
    print(json.dumps({"encoder_id": seq.encoder_id, "dim": seq.dim,
                      "frames": seq.frames, "frame_rate_hz": seq.frame_rate_hz}))
    if args.reexport:
        write_embeddings(seq, args.reexport)
        print(f"re-exported to {args.reexport}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embden",
        description="Embedding-domain speech enhancement: mixing, training, "
                    "enhancement, and objective evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mix", help="materialize (noisy, clean) WAV pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--snr-min", type=float, default=None)
    p.add_argument("--snr-max", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_mix)

    p = sub.add_parser("train-denoiser", help="train an embedding denoiser (MSE)")
    p.add_argument("--config", default=None)
    p.add_argument("--arch", required=True, choices=VARIANTS)
    p.add_argument("--manifest", default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_train_denoiser)

    p = sub.add_parser("train-vocoder", help="train the ISTFT-head vocoder")
    p.add_argument("--config", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-discriminators", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_train_vocoder)

    p = sub.add_parser("enhance", help="enhance a noisy WAV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_enhance)

    p = sub.add_parser("evaluate", help="score (clean, processed) pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--metrics", default=None,
                   help="comma-separated subset of stoi,sisnr,lsd,embmse,speaker")
    p.add_argument("--report", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("count-params", help="closed-form parameter budgets")
    p.add_argument("--arch", choices=VARIANTS, default=None)
    p.set_defaults(func=_cmd_count_params)

    p = sub.add_parser("emb", help="EMB1 utilities")
    emb_sub = p.add_subparsers(dest="emb_command", required=True)
    pe = emb_sub.add_parser("export", help="encode a WAV to EMB1")
    pe.add_argument("--input", required=True)
    pe.add_argument("--output", required=True)
    pe.add_argument("--encoder", default="lms")
    pe.set_defaults(func=_cmd_emb)
    pi = emb_sub.add_parser("import", help="validate / inspect an EMB1 file")
    pi.add_argument("--input", required=True)
    pi.add_argument("--reexport", default=None)
    pi.set_defaults(func=_cmd_emb)

    return parser


_CONFIG_ERRORS = (MixerError, DenoiserConfigError, VocoderConfigError,
                  PipelineConfigError, DspError, MetricError, ValueError)
_IO_ERRORS = (FileNotFoundError, WavFormatError, EmbeddingFormatError,
              CheckpointFormatError, OSError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except _IO_ERRORS as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except _CONFIG_ERRORS as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
