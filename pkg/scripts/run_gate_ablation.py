#!/usr/bin/env python3
"""Gate ablation on the synthetic audio-visual benchmark.

Runs the four-way comparison (v_only / always_fuse / gated_predicted /
gated_ideal) on a freshly synthesized in-memory benchmark and prints the
pooled metric table.  With --seeds > 1 the whole experiment is repeated
with shifted seeds and per-mode mean +/- sd of NSS and CC are reported,
which is the quickest way to see whether a decoder or gating change is
real or seed noise.

Typical invocations:

    python3 scripts/run_gate_ablation.py
    python3 scripts/run_gate_ablation.py --clips 60 --frames 48 --seeds 5
    python3 scripts/run_gate_ablation.py --mix on_screen_sounding=0.7,off_screen_audio=0.3
"""

import argparse
import sys

import numpy as np

sys.path.insert(0, "src")   # runnable from a checkout without installing

from avcsal.experiment import (
    GATE_MODES,
    ExperimentConfig,
    SynthSpec,
    ablation_text,
    run_gate_experiment,
)


def parse_mix(text: str) -> dict[str, float]:
    mix = {}
    for part in text.split(","):
        name, _, frac = part.partition("=")
        mix[name.strip()] = float(frac)
    return mix


def build_config(args: argparse.Namespace, seed: int) -> ExperimentConfig:
    h, w = (int(v) for v in args.size.split("x"))
    return ExperimentConfig(
        synth=SynthSpec(n_clips=args.clips, mix=parse_mix(args.mix),
                        n_frames=args.frames, height=h, width=w, fps=args.fps),
        scheme=args.scheme,
        seed=seed,
        epochs=args.epochs,
        sauc_splits=args.sauc_splits,
        decision_smoothing=args.decision_smoothing,
        out_dir=args.out_dir if seed == args.seed else None,
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--clips", type=int, default=40)
    ap.add_argument("--frames", type=int, default=40)
    ap.add_argument("--size", default="64x64")
    ap.add_argument("--fps", type=float, default=8.0)
    ap.add_argument("--mix", default="on_screen_sounding=0.5,off_screen_audio=0.5")
    ap.add_argument("--scheme", default="spatial_align",
                    choices=("concat", "spatial_align", "bilinear"))
    ap.add_argument("--epochs", type=int, default=400)
    ap.add_argument("--sauc-splits", type=int, default=50)
    ap.add_argument("--decision-smoothing", default="clip_vote",
                    choices=("none", "clip_vote"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--seeds", type=int, default=1,
                    help="repeat with seed, seed+1, ... and aggregate")
    ap.add_argument("--out-dir", default=None,
                    help="write ablation.csv etc. for the first seed")
    args = ap.parse_args(argv)

    per_mode: dict[str, dict[str, list[float]]] = {
        m: {"nss": [], "cc": []} for m in GATE_MODES}
    accs = []
    for seed in range(args.seed, args.seed + args.seeds):
        result = run_gate_experiment(build_config(args, seed))
        if seed == args.seed:
            print(ablation_text(result))
        accs.append(result.table.classifier_test_accuracy)
        for row in result.table.rows:
            per_mode[row.mode]["nss"].append(row.means["nss"])
            per_mode[row.mode]["cc"].append(row.means["cc"])

    if args.seeds > 1:
        print(f"\nacross {args.seeds} seeds "
              f"(classifier acc {np.mean(accs):.3f} +/- {np.std(accs):.3f}):")
        for mode in GATE_MODES:
            nss = np.asarray(per_mode[mode]["nss"])
            cc = np.asarray(per_mode[mode]["cc"])
            print(f"  {mode:16s} NSS {nss.mean():6.3f} +/- {nss.std():.3f}   "
                  f"CC {cc.mean():.3f} +/- {cc.std():.3f}")

    pred = np.mean(per_mode["gated_predicted"]["nss"])
    fuse = np.mean(per_mode["always_fuse"]["nss"])
    rel = (pred - fuse) / abs(fuse) if fuse else float("inf")
    print(f"\ngated_predicted vs always_fuse: {rel:+.1%} relative NSS")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
