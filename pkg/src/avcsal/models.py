"""Desk-scale model stand-ins: contrast saliency, a 3-feature logistic
consistency classifier, and the training losses.

None of this pretends to be a deep network.  The point is that the gating
protocol is agnostic to what produces the saliency maps and the
consistency scores, so small deterministic models are enough to exercise
the full pipeline and its failure modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .audio import MelSpectrogram
from .errors import (
    BadRangeError,
    DivergedError,
    ShapeMismatchError,
    SingleClassError,
    TooSmallError,
)
from .fusion import GateDecision

CE_EPS = 1e-7
KL_EPS = 1e-8
DEFAULT_SCALES = (1, 2, 4)
EMBED_POOL_BINS = 8


# ---------------------------------------------------------------------------
# visual saliency toy


def _box_mean(img: np.ndarray, r: int) -> np.ndarray:
    """Mean over the (2r+1)^2 window centered at each pixel, window clipped
    at the borders (no padding bias)."""
    h, w = img.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.float64)
    ii[1:, 1:] = np.cumsum(np.cumsum(img, axis=0), axis=1)
    y0 = np.maximum(np.arange(h) - r, 0)
    y1 = np.minimum(np.arange(h) + r + 1, h)
    x0 = np.maximum(np.arange(w) - r, 0)
    x1 = np.minimum(np.arange(w) + r + 1, w)
    sums = (ii[y1[:, None], x1[None, :]] - ii[y0[:, None], x1[None, :]]
            - ii[y1[:, None], x0[None, :]] + ii[y0[:, None], x0[None, :]])
    areas = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return sums / areas


def box_blur(img: np.ndarray, r: int, passes: int = 1) -> np.ndarray:
    """Repeated clipped box filtering; two passes approximate a triangular
    kernel of reach 2r."""
    out = np.asarray(img, dtype=np.float64)
    for _ in range(passes):
        out = _box_mean(out, r)
    return out


def contrast_map(frame: np.ndarray, scales=DEFAULT_SCALES) -> np.ndarray:
    """Center-surround contrast: |local mean - surround mean| averaged over
    scales, surround radius twice the center radius."""
    acc = np.zeros_like(frame, dtype=np.float64)
    for r in scales:
        acc += np.abs(_box_mean(frame, r) - _box_mean(frame, 2 * r))
    return acc / len(scales)


def center_prior(h: int, w: int, sigma_frac: float = 0.25) -> np.ndarray:
    """Isotropic Gaussian centered on the frame, sigma = sigma_frac*min(h,w)."""
    sigma = sigma_frac * min(h, w)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys = np.arange(h, dtype=np.float64)[:, None]
    xs = np.arange(w, dtype=np.float64)[None, :]
    return np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2.0 * sigma * sigma))


def predict_visual_saliency(frame, scales=DEFAULT_SCALES,
                            contrast_weight: float = 0.7,
                            prior_weight: float = 0.3,
                            prior_sigma_frac: float = 0.25) -> np.ndarray:
    """Contrast-plus-center-bias saliency, max-normalized to [0, 1].

    A uniform frame has zero contrast everywhere, so the output collapses
    to the normalized center prior.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2 or frame.shape[0] < 8 or frame.shape[1] < 8:
        raise TooSmallError(f"frame must be at least 8x8, got {frame.shape}")
    if not np.all(np.isfinite(frame)):
        raise BadRangeError("frame contains non-finite values")
    con = contrast_map(frame, scales)
    peak = con.max()
    if peak > 0.0:
        con = con / peak
    sal = contrast_weight * con + prior_weight * center_prior(*frame.shape, prior_sigma_frac)
    return sal / sal.max()


# ---------------------------------------------------------------------------
# consistency features and classifier


@dataclass(frozen=True)
class AvcFeature:
    """Audio-visual agreement evidence for one frame's context window."""

    audio_energy_corr: float
    embed_cos: float
    onset_coincidence: float

    def __post_init__(self):
        vals = (self.audio_energy_corr, self.embed_cos, self.onset_coincidence)
        if not all(math.isfinite(v) for v in vals):
            raise BadRangeError(f"non-finite feature values {vals}")
        if not (-1.0 <= self.embed_cos <= 1.0):
            raise BadRangeError(f"embed_cos must lie in [-1,1], got {self.embed_cos}")
        if not (0.0 <= self.onset_coincidence <= 1.0):
            raise BadRangeError(
                f"onset_coincidence must lie in [0,1], got {self.onset_coincidence}"
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.audio_energy_corr, self.embed_cos,
                         self.onset_coincidence], dtype=np.float64)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    # defined as 0 when either side is constant: no co-variation evidence
    dx = x - x.mean()
    dy = y - y.mean()
    nx = math.sqrt(float(dx @ dx))
    ny = math.sqrt(float(dy @ dy))
    if nx < 1e-12 or ny < 1e-12:
        return 0.0
    return float(np.clip(dx @ dy / (nx * ny), -1.0, 1.0))


def _cosine(x: np.ndarray, y: np.ndarray) -> float:
    nx = math.sqrt(float(x @ x))
    ny = math.sqrt(float(y @ y))
    if nx < 1e-12 or ny < 1e-12:
        return 0.0
    return float(np.clip(x @ y / (nx * ny), -1.0, 1.0))


def _resample(series: np.ndarray, n: int) -> np.ndarray:
    """Length-n view of a series.  Downsampling uses block means (the n
    chunks tile the span, matching quantities defined over intervals such
    as per-step motion); upsampling interpolates linearly."""
    if series.size == n:
        return series
    if series.size > n:
        return np.array([c.mean() for c in np.array_split(series, n)])
    src = np.linspace(0.0, 1.0, series.size) if series.size > 1 else np.array([0.5])
    return np.interp(np.linspace(0.0, 1.0, n), src, series)


def energy_envelope(mel_slice: MelSpectrogram, n_points: int | None = None) -> np.ndarray:
    """RMS band-energy envelope of a mel slice (log compression undone),
    optionally resampled to n_points by linear interpolation."""
    env = np.sqrt(np.exp(mel_slice.values).mean(axis=1))
    return env if n_points is None else _resample(env, n_points)


def _onsets(series: np.ndarray) -> np.ndarray:
    """Indices of jumps larger than half the biggest jump; empty when the
    series is flat or nearly so (dynamic range under 5% of its level), so
    estimation ripple on a steady signal never counts as onsets."""
    if series.size < 2:
        return np.array([], dtype=int)
    span = float(series.max() - series.min())
    if span <= 0.05 * max(float(np.abs(series).mean()), 1e-12):
        return np.array([], dtype=int)
    jumps = np.diff(series)
    top = jumps.max()
    if top <= 1e-12:
        return np.array([], dtype=int)
    return np.flatnonzero(jumps > 0.5 * top) + 1


def extract_avc_features(mel_slice: MelSpectrogram, frames) -> AvcFeature:
    """Consistency evidence from one aligned mel slice and its visual
    context window (>= 2 frames; a bare frame pair is the minimal case,
    though correlation needs a longer window to be informative).

    * audio_energy_corr: Pearson correlation of the RMS band-energy
      envelope with per-step motion energy (mean absolute inter-frame
      difference), envelope resampled to the motion rate.
    * embed_cos: cosine similarity of both temporal profiles pooled to a
      fixed number of bins (uncentered counterpart of the correlation).
    * onset_coincidence: fraction of audio onsets with a motion onset
      within one step; 0 when the audio never rises.
    """
    frame_list = [np.asarray(f, dtype=np.float64) for f in frames]
    if len(frame_list) < 2:
        raise ShapeMismatchError("need at least 2 frames of visual context")
    shape = frame_list[0].shape
    if any(f.shape != shape or f.ndim != 2 for f in frame_list):
        raise ShapeMismatchError("context frames must share one 2-D shape")
    if mel_slice.frames < 1:
        raise ShapeMismatchError("mel slice has no frames")

    motion = np.array([np.abs(b - a).mean()
                       for a, b in zip(frame_list, frame_list[1:])])
    envelope = energy_envelope(mel_slice)
    env_m = _resample(envelope, motion.size)

    corr = _pearson(env_m, motion)
    pooled_a = _resample(envelope, EMBED_POOL_BINS)
    pooled_v = _resample(motion, EMBED_POOL_BINS)
    cos = _cosine(pooled_a, pooled_v)

    a_on = _onsets(env_m)
    if a_on.size == 0:
        coincidence = 0.0
    else:
        v_on = _onsets(motion)
        hits = sum(1 for t in a_on if v_on.size and np.min(np.abs(v_on - t)) <= 1)
        coincidence = hits / a_on.size
    return AvcFeature(audio_energy_corr=corr, embed_cos=cos,
                      onset_coincidence=coincidence)


@dataclass(frozen=True)
class AvcClassifier:
    """Logistic model over the 3 consistency features; weights holds the
    feature coefficients followed by the bias."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (4,):
            raise ShapeMismatchError(f"expected 4 weights (3 features + bias), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise BadRangeError("classifier weights must be finite")
        object.__setattr__(self, "weights", w)


@dataclass
class TrainStep:
    epoch: int
    loss: float
    accuracy: float


@dataclass
class TrainResult:
    classifier: AvcClassifier
    accuracy: float
    history: list[TrainStep] = field(default_factory=list)


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _design_matrix(features) -> np.ndarray:
    rows = [f.as_array() for f in features]
    x = np.vstack(rows)
    return np.hstack([x, np.ones((x.shape[0], 1))])


def classifier_loss(weights: np.ndarray, features, labels) -> float:
    """Mean cross-entropy of the logistic model over a feature set."""
    x = _design_matrix(features)
    y = np.asarray(labels, dtype=np.float64)
    p = _sigmoid(x @ np.asarray(weights, dtype=np.float64))
    p = np.clip(p, CE_EPS, 1.0 - CE_EPS)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean())


def classifier_gradient(weights: np.ndarray, features, labels) -> np.ndarray:
    """Analytic gradient of the (unclamped) mean cross-entropy:
    X^T (sigma(Xw) - y) / n.  The clamp in classifier_loss only guards
    the log numerically and never binds at moderate scores."""
    x = _design_matrix(features)
    y = np.asarray(labels, dtype=np.float64)
    p = _sigmoid(x @ np.asarray(weights, dtype=np.float64))
    return x.T @ (p - y) / x.shape[0]


def train_avc_classifier(data, epochs: int = 500, lr: float = 0.5,
                         seed: int = 0) -> TrainResult:
    """Fit the logistic consistency classifier by full-batch gradient
    descent.  Deterministic in the seed (which only sets the tiny random
    initialization).  Loss and accuracy are logged every epoch."""
    if lr <= 0:
        raise BadRangeError(f"lr must be positive, got {lr}")
    if epochs < 1:
        raise BadRangeError(f"epochs must be >= 1, got {epochs}")
    features = [f for f, _ in data]
    labels = [int(lab) for _, lab in data]
    if any(lab not in (0, 1) for lab in labels):
        raise BadRangeError("labels must be 0 or 1")
    if len(set(labels)) < 2:
        raise SingleClassError("training data must contain both classes")

    x = _design_matrix(features)
    y = np.asarray(labels, dtype=np.float64)
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, size=4)

    history: list[TrainStep] = []
    for epoch in range(epochs):
        p = _sigmoid(x @ w)
        loss = float(-(y * np.log(np.clip(p, CE_EPS, 1.0)) +
                       (1.0 - y) * np.log(np.clip(1.0 - p, CE_EPS, 1.0))).mean())
        if not math.isfinite(loss):
            raise DivergedError(f"training loss became non-finite at epoch {epoch}")
        acc = float(((p >= 0.5).astype(int) == y.astype(int)).mean())
        history.append(TrainStep(epoch=epoch, loss=loss, accuracy=acc))
        w = w - lr * (x.T @ (p - y) / x.shape[0])

    clf = AvcClassifier(weights=w)
    final_acc = float(((_sigmoid(x @ w) >= 0.5).astype(int) == y.astype(int)).mean())
    return TrainResult(classifier=clf, accuracy=final_acc, history=history)


def avc_score(clf: AvcClassifier, f: AvcFeature) -> float:
    """Sigmoid consistency score in (0, 1)."""
    z = float(clf.weights[:3] @ f.as_array() + clf.weights[3])
    return float(_sigmoid(z))


def predict_avc(clf: AvcClassifier, f: AvcFeature, threshold: float = 0.5) -> GateDecision:
    """Binarize the consistency score; a score exactly at the threshold
    counts as consistent (>= rule)."""
    if not (0.0 < threshold < 1.0):
        raise BadRangeError(f"threshold must lie in (0,1), got {threshold}")
    return GateDecision(lc=1 if avc_score(clf, f) >= threshold else 0,
                        source="predicted")


def synthetic_feature_set(n: int, seed: int = 0, margin: float = 0.5):
    """Linearly separable consistency features for classifier tests.

    Consistent samples cluster high in all three features, inconsistent
    ones low, with at least ``margin`` of empty space along each axis
    between the clusters.  Returns a list of (AvcFeature, label), half
    each class (n even required).
    """
    if n < 2 or n % 2:
        raise BadRangeError(f"n must be even and >= 2, got {n}")
    if not (0.0 < margin < 0.9):
        raise BadRangeError(f"margin must lie in (0, 0.9), got {margin}")
    rng = np.random.default_rng(seed)
    lo_hi = 0.5 - margin / 2.0   # top of the inconsistent cluster
    hi_lo = 0.5 + margin / 2.0   # bottom of the consistent cluster
    out = []
    for i in range(n):
        label = i % 2
        if label == 1:
            corr = rng.uniform(hi_lo, 0.98)
            cos = rng.uniform(hi_lo, 0.98)
            onset = rng.uniform(hi_lo, 1.0)
        else:
            corr = rng.uniform(-0.3, lo_hi)
            cos = rng.uniform(-0.3, lo_hi)
            onset = rng.uniform(0.0, max(lo_hi, 0.0))
        out.append((AvcFeature(corr, cos, onset), label))
    return out


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True)
class LossConfig:
    """Balance between the classification and saliency terms; the combined
    objective is (1 - rho) * l_cls + rho * l_avsd."""

    rho: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.rho <= 1.0):
            raise BadRangeError(f"rho must lie in [0,1], got {self.rho}")


def kl_loss(pred, gt, eps: float = KL_EPS) -> float:
    """KL divergence from the prediction to the ground-truth density.

    Both maps get eps added to every cell and are renormalized to unit
    mass, so empty bins never produce infinities.  Returns
    sum(gt_hat * ln(gt_hat / pred_hat)) >= 0.
    """
    if eps <= 0:
        raise BadRangeError(f"eps must be positive, got {eps}")
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeMismatchError(f"shape mismatch: {p.shape} vs {g.shape}")
    if p.size == 0:
        raise ShapeMismatchError("empty maps")
    if np.any(p < 0) or np.any(g < 0) or not (np.all(np.isfinite(p)) and np.all(np.isfinite(g))):
        raise BadRangeError("kl_loss inputs must be non-negative and finite")
    ph = (p + eps).ravel()
    gh = (g + eps).ravel()
    ph = ph / ph.sum()
    gh = gh / gh.sum()
    return float(np.sum(gh * np.log(gh / ph)))


def cross_entropy_loss(score: float, label: int, eps: float = CE_EPS) -> float:
    """Binary cross-entropy with the score clamped to [eps, 1-eps]."""
    if label not in (0, 1):
        raise BadRangeError(f"label must be 0 or 1, got {label!r}")
    s = min(max(float(score), eps), 1.0 - eps)
    return -(label * math.log(s) + (1 - label) * math.log(1.0 - s))


def combined_loss(l_cls: float, l_avsd: float, cfg: LossConfig = LossConfig()) -> float:
    """Weighted sum of the two training objectives:
    (1 - rho) * l_cls + rho * l_avsd."""
    if not (math.isfinite(l_cls) and math.isfinite(l_avsd)) or l_cls < 0 or l_avsd < 0:
        raise BadRangeError("losses must be finite and non-negative")
    return (1.0 - cfg.rho) * l_cls + cfg.rho * l_avsd
