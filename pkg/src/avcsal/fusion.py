"""Audio-visual fusion schemes and the binary consistency gate.

The gate implements OUTPUT <- lc * Fuse(AV, V) + (1 - lc) * V with a hard
binary lc, realized as selection rather than arithmetic so the chosen
stream passes through bit-identically (arithmetic would already disturb
signed zeros).  Three fusion operators are provided: channel
concatenation, spatially tiled multiplicative alignment with an optional
residual path, and a bilinear form through a dimension-transform matrix.
What "Fuse" means downstream is the caller's business: the pipeline
accepts the saliency decoder as a closure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadRangeError,
    ChannelMismatchError,
    PipelineError,
    ShapeMismatchError,
)

GATE_SOURCES = ("predicted", "label")


@dataclass(frozen=True)
class FeatureTensor:
    """Dense feature block, values shaped (channels, height, width)."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3 or min(vals.shape) < 1:
            raise ShapeMismatchError(
                f"feature tensor must be (C,H,W) with all dims >= 1, got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ShapeMismatchError("feature tensor contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 1:
            raise ShapeMismatchError(f"feature vector must be 1-D non-empty, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ShapeMismatchError("feature vector contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def length(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class BilinearTransform:
    """Dimension-transform matrix M, shape (audio length, visual length)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or min(m.shape) < 1:
            raise ShapeMismatchError(f"transform must be a 2-D matrix, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ShapeMismatchError("transform contains non-finite values")
        object.__setattr__(self, "matrix", m)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class GateDecision:
    """One binary consistency switch: lc in {0,1}, tagged by where it came
    from (a classifier prediction or a ground-truth label)."""

    lc: int
    source: str

    def __post_init__(self):
        if self.lc not in (0, 1):
            raise BadRangeError(f"gate lc must be 0 or 1, got {self.lc!r}")
        if self.source not in GATE_SOURCES:
            raise BadRangeError(f"gate source must be one of {GATE_SOURCES}, got {self.source!r}")


def binarize_score(score: float, threshold: float = 0.5) -> GateDecision:
    """Turn a soft consistency score into a hard predicted gate; scores at
    the threshold count as consistent."""
    if not (0.0 <= score <= 1.0):
        raise BadRangeError(f"score must lie in [0,1], got {score}")
    return GateDecision(lc=1 if score >= threshold else 0, source="predicted")


def gate_output(decision: GateDecision, fused_av: np.ndarray, v_only: np.ndarray) -> np.ndarray:
    """Select the fused stream when lc = 1, the visual-only stream when
    lc = 0.  Never blends: the winning map is returned untouched."""
    fused_av = np.asarray(fused_av, dtype=np.float64)
    v_only = np.asarray(v_only, dtype=np.float64)
    if fused_av.shape != v_only.shape:
        raise ShapeMismatchError(
            f"fused {fused_av.shape} vs visual {v_only.shape} shape mismatch"
        )
    return fused_av if decision.lc == 1 else v_only


def fuse_concat(v: FeatureTensor, a: FeatureVector) -> FeatureTensor:
    """Stack the visual tensor with the audio vector tiled to its grid.

    Output has 2C channels: channels [0, C) are v unchanged, channel C+c
    holds a[c] at every spatial position.  Lossless by construction.
    """
    if a.length != v.channels:
        raise ChannelMismatchError(
            f"audio length {a.length} != visual channels {v.channels}"
        )
    tiled = np.broadcast_to(a.values[:, None, None], v.values.shape)
    return FeatureTensor(values=np.concatenate([v.values, tiled], axis=0))


def fuse_spatial_align(v: FeatureTensor, a: FeatureVector, residual: bool = False) -> FeatureTensor:
    """Tile the audio vector across the spatial grid and multiply.

    Channels where the audio response is strong are amplified, the rest
    suppressed.  With residual on, the product is added back onto v so
    the visual stream is preserved and the fusion acts as a correction:
    v + v * tile(a).
    """
    if a.length != v.channels:
        raise ChannelMismatchError(
            f"audio length {a.length} != visual channels {v.channels}"
        )
    prod = v.values * a.values[:, None, None]
    return FeatureTensor(values=v.values + prod if residual else prod)


def fuse_bilinear(v_flat: FeatureVector, a: FeatureVector, m: BilinearTransform) -> FeatureVector:
    """output_j = sum_i a_i * M_ij * v_j.

    The matrix absorbs the dimension gap, so the audio and visual vectors
    need not be the same length.
    """
    if m.rows != a.length:
        raise ShapeMismatchError(f"transform rows {m.rows} != audio length {a.length}")
    if m.cols != v_flat.length:
        raise ShapeMismatchError(f"transform cols {m.cols} != visual length {v_flat.length}")
    return FeatureVector(values=(a.values @ m.matrix) * v_flat.values)


@dataclass
class PipelineResult:
    """The three saliency streams one pass produces: gated per the supplied
    decisions, plus the two constant-policy baselines for ablation."""

    gated: list[np.ndarray]
    v_only: list[np.ndarray]
    always_fuse: list[np.ndarray]
    decisions: list[GateDecision]


def run_gated_pipeline(frames, decoder) -> PipelineResult:
    """Drive a saliency decoder over (visual, audio, decision) triples.

    ``decoder(v, a)`` must return a 2-D saliency map; it is called once
    with ``a=None`` for the visual-only stream and once with the audio
    vector for the fused stream, then the gate selects per frame.  Any
    exception a decoder raises is rethrown as PipelineError tagged with
    the frame index; partial output is discarded.
    """
    gated: list[np.ndarray] = []
    v_streams: list[np.ndarray] = []
    f_streams: list[np.ndarray] = []
    decisions: list[GateDecision] = []
    for i, (v, a, decision) in enumerate(frames):
        try:
            v_map = np.asarray(decoder(v, None), dtype=np.float64)
            f_map = np.asarray(decoder(v, a), dtype=np.float64)
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(i, f"decoder failed at frame {i}: {exc}") from exc
        gated.append(gate_output(decision, f_map, v_map))
        v_streams.append(v_map)
        f_streams.append(f_map)
        decisions.append(decision)
    return PipelineResult(gated=gated, v_only=v_streams,
                          always_fuse=f_streams, decisions=decisions)


def regate(result: PipelineResult, decisions: list[GateDecision]) -> list[np.ndarray]:
    """Re-run only the gate over an existing pipeline result with a new
    decision track (e.g. ideal labels instead of predictions); the decoder
    is not invoked again."""
    if len(decisions) != len(result.v_only):
        raise ShapeMismatchError(
            f"{len(decisions)} decisions for {len(result.v_only)} frames"
        )
    return [gate_output(d, f, v)
            for d, f, v in zip(decisions, result.always_fuse, result.v_only)]
