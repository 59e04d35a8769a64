"""Fixation-prediction metrics: CC, SIM, NSS, AUC-Judd, shuffled AUC.

Conventions used throughout:

* Saliency maps and fixation densities are 2-D float arrays indexed
  ``[row, col]`` (= ``[y, x]``); fixation points are ``(x, y)`` pairs.
* CC and NSS use population statistics (divide by N), which keeps both
  metrics invariant under positive affine rescaling of the prediction.
* All AUC variants give ties between positive and negative values half
  credit, so a constant map scores exactly 0.5.

Every function here is pure: no global state, no hidden randomness.  The
only stochastic metric, ``s_auc``, takes an explicit seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllFixatedError,
    EmptyFixationsError,
    LengthMismatchError,
    NoNegativePoolError,
    ShapeMismatchError,
    ZeroMassError,
    ZeroVarianceError,
)

# Pixel radius standing in for one degree of visual angle at desk scale.
# Real eye-tracking data should override this from the viewing geometry.
DEFAULT_DENSITY_SIGMA_PX = 2.0

METRIC_NAMES = ("auc_j", "sim", "s_auc", "cc", "nss")


def _as_map(values, name: str = "map") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ShapeMismatchError(f"{name} must be a non-empty 2-D grid, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatchError(f"{name} contains non-finite values")
    return arr


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class FixationSet:
    """Ground-truth eye fixations for one frame.

    points are (x, y) pixel coordinates, frame_size is (width, height).
    Duplicates and out-of-bounds points are rejected at construction.
    """

    points: tuple[tuple[int, int], ...]
    frame_size: tuple[int, int]

    def __post_init__(self):
        w, h = self.frame_size
        if w < 1 or h < 1:
            raise ShapeMismatchError(f"bad frame size {self.frame_size}")
        pts = tuple((int(x), int(y)) for x, y in self.points)
        seen = set()
        for x, y in pts:
            if not (0 <= x < w and 0 <= y < h):
                raise ShapeMismatchError(f"fixation ({x},{y}) outside {w}x{h} frame")
            if (x, y) in seen:
                raise ShapeMismatchError(f"duplicate fixation ({x},{y})")
            seen.add((x, y))
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def to_mask(self) -> np.ndarray:
        """Binary fixation map, shape (height, width)."""
        w, h = self.frame_size
        mask = np.zeros((h, w), dtype=bool)
        for x, y in self.points:
            mask[y, x] = True
        return mask


def _check_frame_size(s: np.ndarray, fix: FixationSet) -> None:
    w, h = fix.frame_size
    if s.shape != (h, w):
        raise ShapeMismatchError(
            f"saliency map {s.shape} does not match fixation frame {h}x{w}"
        )


def normalize_density(values) -> np.ndarray:
    """Rescale a non-negative map so its mass sums to 1."""
    arr = _as_map(values)
    if np.any(arr < 0):
        raise ZeroMassError("density input must be non-negative")
    total = float(arr.sum())
    if total <= 0.0:
        raise ZeroMassError("cannot normalize an all-zero map")
    return arr / total


def fixation_density(fix: FixationSet, sigma_px: float = DEFAULT_DENSITY_SIGMA_PX) -> np.ndarray:
    """Gaussian-blurred fixation map, normalized to unit mass.

    Each fixation contributes an isotropic Gaussian of width sigma_px,
    evaluated exactly on the pixel grid (no FFT, no boundary artifacts).
    """
    if len(fix) == 0:
        raise EmptyFixationsError("cannot build a density from zero fixations")
    if sigma_px <= 0:
        raise ZeroMassError("sigma_px must be positive")
    w, h = fix.frame_size
    ys = np.arange(h, dtype=np.float64)[:, None]
    xs = np.arange(w, dtype=np.float64)[None, :]
    dens = np.zeros((h, w), dtype=np.float64)
    inv = 1.0 / (2.0 * sigma_px * sigma_px)
    for px, py in fix.points:
        dens += np.exp(-((xs - px) ** 2 + (ys - py) ** 2) * inv)
    return dens / dens.sum()


def cc(s, gt) -> float:
    """Pearson linear correlation between a prediction and a density map.

    Uses population statistics: cov(S,GT) / (sigma(S) * sigma(GT)) with
    all moments divided by N.
    """
    s = _as_map(s, "s")
    gt = _as_map(gt, "gt")
    _check_same_shape(s, gt)
    ds = s - s.mean()
    dg = gt - gt.mean()
    var_s = float((ds * ds).mean())
    var_g = float((dg * dg).mean())
    if var_s <= 0.0 or var_g <= 0.0:
        raise ZeroVarianceError("cc undefined for a constant map")
    return float((ds * dg).mean() / math.sqrt(var_s * var_g))


def sim(s, gt) -> float:
    """Histogram-intersection similarity of two maps viewed as distributions.

    Both inputs are normalized to unit mass, then the per-pixel minimum
    is summed; the result lies in [0, 1].
    """
    s = _as_map(s, "s")
    gt = _as_map(gt, "gt")
    _check_same_shape(s, gt)
    return float(np.minimum(normalize_density(s), normalize_density(gt)).sum())


def nss(s, fix: FixationSet) -> float:
    """Mean z-scored saliency at the fixated pixels.

    The map is standardized with population mean/std, then averaged over
    the M fixation locations.
    """
    s = _as_map(s, "s")
    _check_frame_size(s, fix)
    if len(fix) == 0:
        raise EmptyFixationsError("nss needs at least one fixation")
    mu = s.mean()
    sd = s.std()  # population std
    if sd <= 0.0:
        raise ZeroVarianceError("nss undefined for a constant map")
    z = (s - mu) / sd
    return float(np.mean([z[y, x] for x, y in fix.points]))


def _auc_from_values(pos: np.ndarray, neg: np.ndarray) -> float:
    """ROC area for positive vs negative saliency samples, ties at half credit.

    Sweeps thresholds at the distinct positive values; at each threshold the
    ROC point just before the jump (strict >) and just after it (>=) are both
    kept, so trapezoidal integration reproduces the exhaustive threshold
    sweep exactly.
    """
    n_pos = pos.size
    n_neg = neg.size
    if n_pos == 0:
        raise EmptyFixationsError("no positive samples")
    if n_neg == 0:
        raise AllFixatedError("no negative samples")

    tpr = [0.0]
    fpr = [0.0]
    for t in np.unique(pos)[::-1]:
        tpr.append(float(np.count_nonzero(pos > t)) / n_pos)
        fpr.append(float(np.count_nonzero(neg > t)) / n_neg)
        tpr.append(float(np.count_nonzero(pos >= t)) / n_pos)
        fpr.append(float(np.count_nonzero(neg >= t)) / n_neg)
    tpr.append(1.0)
    fpr.append(1.0)

    area = 0.0
    for i in range(1, len(tpr)):
        area += (fpr[i] - fpr[i - 1]) * (tpr[i] + tpr[i - 1]) / 2.0
    return area


def auc_judd(s, fix: FixationSet) -> float:
    """ROC area with positives at fixations and negatives at all other pixels."""
    s = _as_map(s, "s")
    _check_frame_size(s, fix)
    if len(fix) == 0:
        raise EmptyFixationsError("auc_judd needs at least one fixation")
    mask = fix.to_mask()
    if mask.all():
        raise AllFixatedError("auc_judd needs at least one non-fixated pixel")
    return _auc_from_values(s[mask], s[~mask])


def s_auc(
    s,
    fix: FixationSet,
    other_fixations: list[FixationSet],
    splits: int = 100,
    seed: int = 0,
) -> float:
    """Shuffled AUC: negatives drawn from other frames' fixation locations.

    For each split, ``len(fix)`` negatives are sampled with replacement from
    the union of the other frames' fixations (minus this frame's positives),
    an ROC area is computed as in auc_judd restricted to that sample, and
    the mean over splits is returned.  Fully deterministic in ``seed``.
    """
    s = _as_map(s, "s")
    _check_frame_size(s, fix)
    if len(fix) == 0:
        raise EmptyFixationsError("s_auc needs at least one fixation")
    if splits < 1:
        raise NoNegativePoolError("splits must be >= 1")

    positives = set(fix.points)
    pool = set()
    for other in other_fixations:
        if other.frame_size != fix.frame_size:
            raise ShapeMismatchError(
                f"pool frame size {other.frame_size} != {fix.frame_size}"
            )
        pool.update(other.points)
    pool -= positives
    if not pool:
        raise NoNegativePoolError("negative pool is empty")

    pool_vals = np.array(sorted(s[y, x] for x, y in pool), dtype=np.float64)
    pos_vals = np.array([s[y, x] for x, y in fix.points], dtype=np.float64)

    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(splits):
        idx = rng.integers(0, pool_vals.size, size=len(fix))
        total += _auc_from_values(pos_vals, pool_vals[idx])
    return total / splits


@dataclass
class FrameMetrics:
    frame_index: int
    auc_j: float | None = None
    sim: float | None = None
    s_auc: float | None = None
    cc: float | None = None
    nss: float | None = None

    def value(self, name: str) -> float | None:
        return getattr(self, name)


@dataclass
class MetricReport:
    """Per-frame metric values plus their arithmetic means.

    Frames where a metric was undefined (constant map, empty fixations,
    empty shuffle pool) hold None and are counted in ``skipped``.
    """

    per_frame: list[FrameMetrics] = field(default_factory=list)
    skipped: dict[str, int] = field(default_factory=dict)

    @property
    def frame_count(self) -> int:
        return len(self.per_frame)

    def values(self, name: str) -> list[float]:
        return [v for f in self.per_frame if (v := f.value(name)) is not None]

    def mean(self, name: str) -> float:
        vals = self.values(name)
        return float(np.mean(vals)) if vals else math.nan

    @property
    def auc_j(self) -> float:
        return self.mean("auc_j")

    @property
    def sim(self) -> float:
        return self.mean("sim")

    @property
    def s_auc(self) -> float:
        return self.mean("s_auc")

    @property
    def cc(self) -> float:
        return self.mean("cc")

    @property
    def nss(self) -> float:
        return self.mean("nss")


def evaluate_sequence(
    predictions: list,
    gt: list[tuple[FixationSet, np.ndarray]],
    metrics: tuple[str, ...] = METRIC_NAMES,
    sauc_splits: int = 100,
    seed: int = 0,
) -> MetricReport:
    """Score a prediction sequence frame by frame and average.

    ``gt`` pairs each frame's FixationSet with its blurred density map.
    The shuffled-AUC negative pool for frame i is the union of all other
    frames' fixations.  Degenerate frames are skipped per metric and
    counted, never aborting the sequence.
    """
    if len(predictions) != len(gt):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(gt)} ground-truth frames"
        )
    report = MetricReport(skipped={m: 0 for m in metrics})
    skippable = (ZeroVarianceError, EmptyFixationsError, ZeroMassError,
                 NoNegativePoolError, AllFixatedError)
    for i, (pred, (fix, density)) in enumerate(zip(predictions, gt)):
        frame = FrameMetrics(frame_index=i)
        for name in metrics:
            try:
                if name == "cc":
                    frame.cc = cc(pred, density)
                elif name == "sim":
                    frame.sim = sim(pred, density)
                elif name == "nss":
                    frame.nss = nss(pred, fix)
                elif name == "auc_j":
                    frame.auc_j = auc_judd(pred, fix)
                elif name == "s_auc":
                    others = [g[0] for j, g in enumerate(gt) if j != i]
                    frame.s_auc = s_auc(pred, fix, others, splits=sauc_splits,
                                        seed=seed + i)
                else:
                    raise ValueError(f"unknown metric {name!r}")
            except skippable:
                report.skipped[name] += 1
        report.per_frame.append(frame)
    return report
