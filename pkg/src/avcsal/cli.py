"""Command-line harness: eval, gate-experiment, mel, synth, validate.

Exit codes: 0 success, 1 internal error, 2 validation or input failure.
All behavior is controlled by flags; environment variables are never
consulted, so a fixed seed reproduces byte-identical outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .audio import MelConfig, compute_mel, read_wav
from .datasets import (
    REFERENCE_SET_STATS,
    load_manifest,
    synthesize_dataset,
    validate_manifest,
)
from .errors import AvcsalError, PairingError
from .experiment import (
    ExperimentConfig,
    SynthSpec,
    ablation_text,
    pool_reports,
    run_gate_experiment,
)
from .formats import (
    NamedReport,
    format_comparison_table,
    format_metric_table,
    load_saliency_map,
    read_fixation_csv,
    read_image,
    write_matrix,
    write_metric_report_csv,
)
from .metrics import METRIC_NAMES, evaluate_sequence, fixation_density


def _parse_mix(text: str) -> dict[str, float]:
    mix = {}
    for part in text.split(","):
        name, sep, frac = part.partition("=")
        if not sep:
            raise AvcsalError(f"bad mix component {part!r}; use name=fraction")
        try:
            mix[name.strip()] = float(frac)
        except ValueError:
            raise AvcsalError(f"bad mix fraction {frac!r}") from None
    return mix


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise AvcsalError(f"bad size {text!r}; use WIDTHxHEIGHT, e.g. 64x64") from None


def _metric_list(text: str) -> tuple[str, ...]:
    names = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in names if m not in METRIC_NAMES]
    if bad:
        raise AvcsalError(f"unknown metrics {bad}; valid: {METRIC_NAMES}")
    return names


# ---------------------------------------------------------------------------
# subcommands


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    pred_root = Path(args.pred_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = _metric_list(args.metrics)

    per_video = []
    for video in manifest.videos:
        vdir = pred_root / video.id
        if not vdir.is_dir():
            raise PairingError(f"no prediction directory for video {video.id!r} at {vdir}")
        files = sorted(p for p in vdir.iterdir() if p.is_file())
        if len(files) != video.frame_count:
            raise PairingError(
                f"video {video.id!r}: {len(files)} prediction files for "
                f"{video.frame_count} frames ({[f.name for f in files[:5]]}...)")
        preds = [load_saliency_map(p) for p in files]

        frame_files = sorted(p for p in manifest.resolve(video.frame_dir).iterdir()
                             if p.suffix in (".pgm", ".ppm"))
        first = read_image(frame_files[0])
        frame_size = (first.shape[1], first.shape[0])
        fixations = read_fixation_csv(manifest.resolve(video.fixations),
                                      video.frame_count, frame_size)
        gt = [(f, fixation_density(f, args.density_sigma)) for f in fixations]
        report = evaluate_sequence(preds, gt, metrics=metrics,
                                   sauc_splits=args.sauc_splits, seed=args.seed)
        write_metric_report_csv(out_dir / f"{video.id}_metrics.csv", report)
        per_video.append(NamedReport(video.id, report))

    pooled = pool_reports([r.report for r in per_video], metrics)
    write_metric_report_csv(out_dir / "all_frames_metrics.csv", pooled)
    table = format_metric_table(pooled, row_label="all frames")
    (out_dir / "summary.txt").write_text(table + "\n", encoding="utf-8")
    print(format_comparison_table(per_video))
    print()
    print(table)
    return 0


def cmd_gate_experiment(args) -> int:
    synth = None
    if args.manifest is None:
        width, height = _parse_size(args.size)
        synth = SynthSpec(n_clips=args.clips, mix=_parse_mix(args.mix),
                          n_frames=args.frames, height=height, width=width,
                          fps=args.fps)
    cfg = ExperimentConfig(manifest_path=args.manifest, synth=synth,
                           scheme=args.scheme, seed=args.seed,
                           train_frac=args.train_frac, epochs=args.epochs,
                           lr=args.lr, metrics=_metric_list(args.metrics),
                           sauc_splits=args.sauc_splits,
                           feature_smooth=args.feature_smooth,
                           decision_smoothing=args.decision_smoothing,
                           audio_weight=args.audio_weight,
                           blur_radius=args.blur_radius,
                           aggregate=args.aggregate, out_dir=args.out_dir)
    result = run_gate_experiment(cfg)
    print(ablation_text(result))
    return 0


def cmd_mel(args) -> int:
    clip = read_wav(args.wav)
    cfg = MelConfig(sample_rate=args.sr, window=args.window, hop=args.hop,
                    n_mels=args.mels, f_min=args.fmin, f_max=args.fmax,
                    log_floor=args.floor, window_fn=args.window_fn)
    mel = compute_mel(clip, cfg)
    write_matrix(args.out, mel.values)
    summary = "\n".join([
        f"input: {args.wav} ({clip.duration_s:.3f}s at {clip.sample_rate} Hz)",
        f"mel matrix: {mel.frames} frames x {mel.n_mels} bands -> {args.out}",
        f"params: sample_rate={cfg.sample_rate} window={cfg.window} hop={cfg.hop} "
        f"n_mels={cfg.n_mels} f_min={cfg.f_min} f_max={cfg.f_max} "
        f"log_floor={cfg.log_floor} window_fn={cfg.window_fn}",
    ])
    Path(str(args.out) + ".txt").write_text(summary + "\n", encoding="utf-8")
    print(summary)
    return 0


def cmd_synth(args) -> int:
    width, height = _parse_size(args.size)
    manifest = synthesize_dataset(args.out_dir, _parse_mix(args.mix), args.clips,
                                  seed=args.seed, n_frames=args.frames,
                                  name=args.name, height=height, width=width,
                                  fps=args.fps)
    report = validate_manifest(manifest)
    if not report.ok:
        for v in report.violations:
            print(str(v), file=sys.stderr)
        return 2
    print(f"wrote {manifest.declared_video_count} clips, "
          f"{manifest.declared_frame_count} frames -> {Path(args.out_dir) / 'manifest.txt'}")
    return 0


def cmd_validate(args) -> int:
    manifest = load_manifest(args.manifest)
    reference = REFERENCE_SET_STATS if args.reference else None
    report = validate_manifest(manifest, reference=reference,
                               check_media=not args.no_media)
    if report.ok:
        print(f"{manifest.name}: ok ({manifest.declared_video_count} videos, "
              f"{manifest.declared_frame_count} frames)")
        return 0
    for v in report.violations:
        print(str(v))
    return 2


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avcsal",
        description="Audio-visual consistency gated saliency toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="score saliency predictions against fixation GT")
    p.add_argument("--pred-dir", required=True,
                   help="directory with one subdirectory of map files per video")
    p.add_argument("--manifest", required=True, help="dataset manifest path")
    p.add_argument("--out-dir", required=True, help="where to write CSV reports")
    p.add_argument("--metrics", default=",".join(METRIC_NAMES))
    p.add_argument("--sauc-splits", type=int, default=100)
    p.add_argument("--density-sigma", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gate-experiment",
                       help="four-way gating ablation (v_only / always_fuse / "
                            "gated_predicted / gated_ideal)")
    p.add_argument("--manifest", help="dataset manifest; omit to synthesize")
    p.add_argument("--clips", type=int, default=40, help="synthetic clip count")
    p.add_argument("--mix", default="on_screen_sounding=0.5,off_screen_audio=0.5")
    p.add_argument("--frames", type=int, default=40, help="frames per synthetic clip")
    p.add_argument("--size", default="64x64", help="synthetic frame size WxH")
    p.add_argument("--fps", type=float, default=8.0)
    p.add_argument("--scheme", default="spatial_align",
                   choices=("concat", "spatial_align", "bilinear"))
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--metrics", default=",".join(METRIC_NAMES))
    p.add_argument("--sauc-splits", type=int, default=50)
    p.add_argument("--aggregate", default="frame", choices=("frame", "clip"))
    p.add_argument("--feature-smooth", type=int, default=2,
                   help="half-width of the moving average over per-frame features")
    p.add_argument("--decision-smoothing", default="clip_vote",
                   choices=("none", "clip_vote"))
    p.add_argument("--audio-weight", type=float, default=0.2)
    p.add_argument("--blur-radius", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", help="write ablation.csv/.txt and classifier files here")
    p.set_defaults(fn=cmd_gate_experiment)

    p = sub.add_parser("mel", help="extract a log-mel spectrogram from a WAV file")
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True, help="output raw float-matrix path")
    p.add_argument("--sr", type=int, default=16000)
    p.add_argument("--window", type=int, default=512)
    p.add_argument("--hop", type=int, default=160)
    p.add_argument("--mels", type=int, default=64)
    p.add_argument("--fmin", type=float, default=0.0)
    p.add_argument("--fmax", type=float, default=8000.0)
    p.add_argument("--floor", type=float, default=1e-10)
    p.add_argument("--window-fn", default="hann", choices=("hann", "rect"))
    p.set_defaults(fn=cmd_mel)

    p = sub.add_parser("synth", help="generate a synthetic audio-visual dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--clips", type=int, default=4)
    p.add_argument("--mix", default="on_screen_sounding=0.5,off_screen_audio=0.5")
    p.add_argument("--frames", type=int, default=40)
    p.add_argument("--size", default="64x64")
    p.add_argument("--fps", type=float, default=8.0)
    p.add_argument("--name", default="synthetic")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("validate", help="check a dataset manifest and its media")
    p.add_argument("--manifest", required=True)
    p.add_argument("--reference", action="store_true",
                   help="also compare counts against the published statistics table")
    p.add_argument("--no-media", action="store_true",
                   help="skip per-file media checks")
    p.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except AvcsalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal faults
        print(f"internal error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
