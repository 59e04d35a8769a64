#!/usr/bin/env python3
"""How gating quality degrades with classifier accuracy.

Instead of training classifiers of varying quality, true correspondence
labels are flipped at controlled rates (nested seeded flips, so the 95 %
flip set is a subset of the 80 % one) and the pipeline is re-gated per
accuracy level.  Prints pooled metric means per accuracy plus the
ideal-label ceiling; the useful signal is whether the metrics are
monotone in accuracy and where they cross the always_fuse baseline.

    python3 scripts/sweep_classifier_accuracy.py
    python3 scripts/sweep_classifier_accuracy.py --accuracies 0.5,0.7,0.9,1.0
"""

import argparse
import sys

sys.path.insert(0, "src")

from avcsal.experiment import ExperimentConfig, SynthSpec, accuracy_sweep
from avcsal.metrics import METRIC_NAMES


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--clips", type=int, default=40)
    ap.add_argument("--frames", type=int, default=40)
    ap.add_argument("--size", default="64x64")
    ap.add_argument("--mix", default="on_screen_sounding=0.5,off_screen_audio=0.5")
    ap.add_argument("--accuracies", default="0.6,0.8,0.95,1.0")
    ap.add_argument("--sauc-splits", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    h, w = (int(v) for v in args.size.split("x"))
    mix = {}
    for part in args.mix.split(","):
        name, _, frac = part.partition("=")
        mix[name.strip()] = float(frac)
    cfg = ExperimentConfig(
        synth=SynthSpec(n_clips=args.clips, mix=mix, n_frames=args.frames,
                        height=h, width=w),
        seed=args.seed, sauc_splits=args.sauc_splits)
    accuracies = tuple(float(a) for a in args.accuracies.split(","))

    rows = accuracy_sweep(cfg, accuracies)
    header = "accuracy  " + "  ".join(f"{m:>8s}" for m in METRIC_NAMES)
    print(header)
    print("-" * len(header))
    for acc, means in rows:
        cells = "  ".join(f"{means[m]:8.4f}" for m in METRIC_NAMES)
        print(f"{acc:8.2f}  {cells}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
