"""The four-way gating ablation: v_only / always_fuse / gated_predicted /
gated_ideal over one dataset, with a consistency classifier trained on a
held-out split.

The saliency decoder here is deliberately small.  The visual branch
scores contrast, windowed motion, and a center prior.  The audio-visual
branch reweights that map by where local motion co-varies with the audio
envelope over the context window, computed through the package's fusion
operators.  When sound tracks the on-screen motion the reweighting
sharpens the map onto the sounding region; when it does not, it injects
an arbitrary spatial mask and hurts.  That asymmetry is exactly what the
binary gate exploits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import MelConfig, compute_mel, frame_align
from .datasets import (
    DatasetManifest,
    SyntheticClip,
    load_manifest,
    load_video_media,
    scenario_sequence,
    synthesize_clip,
)
from .errors import BadRangeError, ShapeMismatchError
from .formats import (
    NamedReport,
    format_comparison_table,
    write_comparison_csv,
    write_training_log,
    write_weights_csv,
)
from .fusion import (
    BilinearTransform,
    FeatureTensor,
    FeatureVector,
    GateDecision,
    fuse_bilinear,
    fuse_concat,
    fuse_spatial_align,
    regate,
    run_gated_pipeline,
)
from .metrics import (
    METRIC_NAMES,
    FixationSet,
    FrameMetrics,
    MetricReport,
    evaluate_sequence,
    fixation_density,
)
from .models import (
    AvcClassifier,
    AvcFeature,
    TrainResult,
    box_blur,
    center_prior,
    contrast_map,
    energy_envelope,
    extract_avc_features,
    predict_avc,
    train_avc_classifier,
)

FUSION_SCHEMES = ("concat", "spatial_align", "bilinear")
GATE_MODES = ("v_only", "always_fuse", "gated_predicted", "gated_ideal")


@dataclass
class SynthSpec:
    """In-memory synthetic benchmark description."""

    n_clips: int = 40
    mix: dict[str, float] = field(default_factory=lambda: {
        "on_screen_sounding": 0.5, "off_screen_audio": 0.5})
    n_frames: int = 40
    height: int = 64
    width: int = 64
    fps: float = 8.0


@dataclass
class ExperimentConfig:
    """Everything a gate ablation run depends on; with a fixed seed the
    whole run is deterministic."""

    manifest_path: str | None = None
    synth: SynthSpec | None = None
    scheme: str = "spatial_align"
    seed: int = 0
    train_frac: float = 0.7
    epochs: int = 400
    lr: float = 0.5
    threshold: float = 0.5
    metrics: tuple[str, ...] = METRIC_NAMES
    sauc_splits: int = 50
    context_frames: int = 4
    density_sigma: float = 2.0
    feature_smooth: int = 2
    decision_smoothing: str = "clip_vote"   # or "none": raw per-frame decisions
    audio_weight: float = 0.2
    blur_radius: int = 2
    aggregate: str = "frame"   # "frame" pools frames; "clip" averages per-clip means
    out_dir: str | None = None

    def validate(self) -> None:
        if (self.manifest_path is None) == (self.synth is None):
            raise BadRangeError("config needs exactly one of manifest_path / synth")
        if self.scheme not in FUSION_SCHEMES:
            raise BadRangeError(f"scheme must be one of {FUSION_SCHEMES}, got {self.scheme!r}")
        if not (0.0 < self.train_frac < 1.0):
            raise BadRangeError(f"train_frac must lie in (0,1), got {self.train_frac}")
        if self.aggregate not in ("frame", "clip"):
            raise BadRangeError(f"aggregate must be 'frame' or 'clip', got {self.aggregate!r}")
        if not (0.0 <= self.audio_weight < 1.0):
            raise BadRangeError(f"audio_weight must lie in [0,1), got {self.audio_weight}")
        if self.feature_smooth < 0:
            raise BadRangeError(f"feature_smooth must be >= 0, got {self.feature_smooth}")
        if self.decision_smoothing not in ("none", "clip_vote"):
            raise BadRangeError(
                f"decision_smoothing must be 'none' or 'clip_vote', got {self.decision_smoothing!r}")
        unknown = [m for m in self.metrics if m not in METRIC_NAMES]
        if unknown:
            raise BadRangeError(f"unknown metrics {unknown}; valid: {METRIC_NAMES}")


# ---------------------------------------------------------------------------
# per-clip preparation


@dataclass
class ClipData:
    """One clip, fully prepared for the pipeline: decoder inputs, features
    for the classifier, and evaluation ground truth."""

    clip_id: str
    labels: tuple[int, ...]
    fixations: list[FixationSet]
    densities: list[np.ndarray]
    features: list[AvcFeature]
    tensors: list[FeatureTensor]
    vectors: list[FeatureVector]

    @property
    def n_frames(self) -> int:
        return len(self.labels)


def _trim_slice(mel_slice, rel_lo: float, rel_hi: float, rows_per_frame: float):
    """Cut a centered mel slice down to the rows covering the relative
    video-frame range [rel_lo, rel_hi] (in frames around the slice center),
    so a window clipped at a clip boundary is compared against the same
    time span of audio rather than against the silence padding."""
    from .audio import MelSpectrogram
    half = mel_slice.frames // 2
    r0 = max(0, half + int(round(rel_lo * rows_per_frame)))
    r1 = min(mel_slice.frames, half + int(round(rel_hi * rows_per_frame)))
    r1 = max(r1, r0 + 1)
    return MelSpectrogram(values=mel_slice.values[r0:r1],
                          floor_log=mel_slice.floor_log)


def prepare_clip(clip_id: str, frames, mel_slices, fixations, labels,
                 context_frames: int = 4, density_sigma: float = 2.0,
                 rows_per_frame: float | None = None,
                 feature_smooth: int = 2) -> ClipData:
    n = len(frames)
    if not (n == len(mel_slices) == len(fixations) == len(labels)):
        raise ShapeMismatchError(
            f"{clip_id}: {n} frames vs {len(mel_slices)} slices, "
            f"{len(fixations)} fixation sets, {len(labels)} labels")
    if rows_per_frame is None:
        # slice width covers 2*context_frames video frames by construction
        rows_per_frame = mel_slices[0].frames / (2 * context_frames)
    prior = center_prior(*frames[0].shape)
    densities = [fixation_density(f, density_sigma) for f in fixations]
    features, tensors, vectors = [], [], []
    for i in range(n):
        lo, hi = max(0, i - context_frames), min(n, i + context_frames + 1)
        trimmed = _trim_slice(mel_slices[i], lo - i, hi - 1 - i, rows_per_frame)
        features.append(extract_avc_features(trimmed, frames[lo:hi]))
        # clamped fixed-width window keeps the channel count constant;
        # out-of-range steps repeat the edge frame and so contribute zero
        # motion
        idx = np.clip(np.arange(i - context_frames, i + context_frames + 1), 0, n - 1)
        window = [frames[j] for j in idx]
        diffs = np.stack([np.abs(b - a) for a, b in zip(window, window[1:])])
        tensors.append(FeatureTensor(values=np.concatenate(
            [frames[i][None], contrast_map(frames[i])[None], prior[None], diffs])))
        vectors.append(FeatureVector(values=energy_envelope(mel_slices[i],
                                                            diffs.shape[0])))
    if feature_smooth > 0:
        # a frame's correspondence statistics are noisy near clip edges,
        # where the context window is short; a small moving average over
        # neighbouring frames restores the class gap without leaking
        # anything across clips
        raw = np.array([f.as_array() for f in features])
        features = []
        for i in range(n):
            lo, hi = max(0, i - feature_smooth), min(n, i + feature_smooth + 1)
            m = raw[lo:hi].mean(axis=0)
            features.append(AvcFeature(audio_energy_corr=float(m[0]),
                                       embed_cos=float(m[1]),
                                       onset_coincidence=float(m[2])))
    return ClipData(clip_id=clip_id, labels=tuple(int(v) for v in labels),
                    fixations=list(fixations), densities=densities,
                    features=features, tensors=tensors, vectors=vectors)


def prepare_synthetic_clip(clip: SyntheticClip, clip_id: str,
                           mel_cfg: MelConfig = MelConfig(),
                           context_frames: int = 4,
                           density_sigma: float = 2.0,
                           feature_smooth: int = 2) -> ClipData:
    mel = compute_mel(clip.audio, mel_cfg)
    slices = frame_align(mel, clip.fps, mel_cfg.hop, mel_cfg.sample_rate,
                         len(clip.frames))
    rpf = mel_cfg.sample_rate / (clip.fps * mel_cfg.hop)
    return prepare_clip(clip_id, clip.frames, slices, clip.gt_fixations,
                        clip.gt_avc.labels, context_frames, density_sigma,
                        rows_per_frame=rpf, feature_smooth=feature_smooth)


# ---------------------------------------------------------------------------
# the toy decoder


def _peak_norm(x: np.ndarray) -> np.ndarray:
    peak = x.max()
    return x / peak if peak > 0 else x


def audio_motion_covariance(scheme: str, diffs: np.ndarray,
                            envelope: np.ndarray) -> np.ndarray:
    """Where does local motion co-vary with the audio envelope?

    diffs holds the per-step absolute frame differences (K, H, W) of the
    context window, envelope the K audio energies.  All three fusion
    schemes compute the same covariance map, each routed through its own
    operator: sum_t (e_t - mean(e)) * diffs_t at every pixel.
    """
    w = envelope - envelope.mean()
    if scheme == "spatial_align":
        fused = fuse_spatial_align(FeatureTensor(diffs), FeatureVector(w))
        return fused.values.sum(axis=0)
    if scheme == "concat":
        fused = fuse_concat(FeatureTensor(diffs), FeatureVector(w))
        k = diffs.shape[0]
        return (fused.values[:k] * fused.values[k:]).sum(axis=0)
    if scheme == "bilinear":
        k, h, wd = diffs.shape
        transform = BilinearTransform(matrix=diffs.reshape(k, h * wd))
        ones = FeatureVector(values=np.ones(h * wd))
        out = fuse_bilinear(ones, FeatureVector(w), transform)
        return out.values.reshape(h, wd)
    raise BadRangeError(f"scheme must be one of {FUSION_SCHEMES}, got {scheme!r}")


def make_decoder(scheme: str = "spatial_align", audio_weight: float = 0.2,
                 blur_radius: int = 2, mask_floor: float = 0.15,
                 contrast_weight: float = 0.5, motion_weight: float = 0.2,
                 prior_weight: float = 0.3):
    """Build the saliency decoder closure for run_gated_pipeline.

    With a=None: contrast + windowed motion + center prior (visual only).
    With audio: the visual map is sharpened by the covariance mask and a
    small additive audio peak is stacked on top,

        fused = base * (floor + (1-floor) * amap) + audio_weight * amap

    where amap is the blurred positive part of the audio-motion
    covariance, peak-normalized.  When the envelope tracks on-screen
    motion the covariance peaks on the sounding motion, where the
    fixations are, so both terms reinforce the fixated peak.  When it
    does not, the mask emphasizes stale motion elsewhere in the context
    window: the product suppresses the fixated peak and the additive term
    raises a competing false one.  A flat envelope yields amap = 0 and
    the fused map degrades to an affine rescale of the visual map
    (rank-identical, so rank-based metrics tie).
    """

    def decode(v: FeatureTensor, a: FeatureVector | None) -> np.ndarray:
        contrast, prior = v.values[1], v.values[2]
        diffs = v.values[3:]
        base = (contrast_weight * _peak_norm(contrast)
                + motion_weight * _peak_norm(diffs.mean(axis=0))
                + prior_weight * prior)
        if a is None:
            return base
        cov = audio_motion_covariance(scheme, diffs, a.values)
        amap = _peak_norm(box_blur(np.maximum(cov, 0.0), blur_radius, passes=2))
        return base * (mask_floor + (1.0 - mask_floor) * amap) + audio_weight * amap

    return decode


# ---------------------------------------------------------------------------
# label-noise injection (classifier-quality sweeps)


def degrade_labels(labels, accuracy: float, seed: int = 0) -> list[GateDecision]:
    """Simulate a classifier of the given accuracy: flip a seeded random
    subset of the true labels, exactly round((1-accuracy)*n) of them.

    The flip set is a prefix of one seeded permutation, so sweeping
    accuracy upward shrinks the flip set monotonically (nested noise).
    """
    if not (0.0 <= accuracy <= 1.0):
        raise BadRangeError(f"accuracy must lie in [0,1], got {accuracy}")
    labels = [int(v) for v in labels]
    n = len(labels)
    flip = np.random.default_rng(seed).permutation(n)[:round((1.0 - accuracy) * n)]
    out = []
    flip_set = set(int(i) for i in flip)
    for i, v in enumerate(labels):
        lc = 1 - v if i in flip_set else v
        out.append(GateDecision(lc=lc, source="predicted"))
    return out


# ---------------------------------------------------------------------------
# aggregation


def pool_reports(reports: list[MetricReport],
                 metrics: tuple[str, ...] = METRIC_NAMES) -> MetricReport:
    """Concatenate per-frame rows across clips into one report."""
    agg = MetricReport(skipped={m: 0 for m in metrics})
    for r in reports:
        for f in r.per_frame:
            agg.per_frame.append(FrameMetrics(
                frame_index=len(agg.per_frame), auc_j=f.auc_j, sim=f.sim,
                s_auc=f.s_auc, cc=f.cc, nss=f.nss))
        for k, v in r.skipped.items():
            agg.skipped[k] = agg.skipped.get(k, 0) + v
    return agg


def clip_means(reports: list[MetricReport], name: str) -> float:
    vals = [r.mean(name) for r in reports if not np.isnan(r.mean(name))]
    return float(np.mean(vals)) if vals else float("nan")


@dataclass
class AblationRow:
    mode: str
    means: dict[str, float]
    deltas: dict[str, float]


@dataclass
class AblationTable:
    """One row per gate mode; columns in the fixed metric order AUC-J,
    SIM, s-AUC, CC, NSS, with per-metric deltas against v_only."""

    rows: list[AblationRow]
    aggregate: str
    classifier_train_accuracy: float
    classifier_test_accuracy: float

    def row(self, mode: str) -> AblationRow:
        for r in self.rows:
            if r.mode == mode:
                return r
        raise KeyError(mode)


@dataclass
class GateExperimentResult:
    table: AblationTable
    train_result: TrainResult
    per_clip: dict[str, dict[str, MetricReport]]   # clip id -> mode -> report
    pooled: dict[str, MetricReport]                # mode -> pooled report
    config: ExperimentConfig
    elapsed_s: float


# ---------------------------------------------------------------------------
# the experiment


def _load_clips(cfg: ExperimentConfig) -> list[ClipData]:
    mel_cfg = MelConfig()
    if cfg.synth is not None:
        spec = cfg.synth
        order = scenario_sequence(spec.mix, spec.n_clips)
        clips = []
        for i, scenario in enumerate(order):
            raw = synthesize_clip(scenario, spec.n_frames, seed=cfg.seed + i,
                                  height=spec.height, width=spec.width,
                                  fps=spec.fps, sample_rate=mel_cfg.sample_rate)
            clips.append(prepare_synthetic_clip(raw, f"clip{i:04d}", mel_cfg,
                                                cfg.context_frames, cfg.density_sigma,
                                                cfg.feature_smooth))
        return clips
    manifest = load_manifest(cfg.manifest_path)
    clips = []
    for v in manifest.videos:
        frames, slices, fixations, track = load_video_media(manifest, v, mel_cfg)
        rpf = mel_cfg.sample_rate / (v.fps * mel_cfg.hop)
        clips.append(prepare_clip(v.id, frames, slices, fixations, track.labels,
                                  cfg.context_frames, cfg.density_sigma,
                                  rows_per_frame=rpf,
                                  feature_smooth=cfg.feature_smooth))
    return clips


def split_clips(clips: list[ClipData], train_frac: float, seed: int):
    """Per-clip split, stratified by whether the clip is majority
    consistent, so both classes land in the training set whenever the
    dataset has both."""
    rng = np.random.default_rng(seed)
    groups: dict[int, list[ClipData]] = {0: [], 1: []}
    for c in clips:
        groups[int(np.mean(c.labels) >= 0.5)].append(c)
    train: list[ClipData] = []
    test: list[ClipData] = []
    for key in (0, 1):
        group = groups[key]
        order = rng.permutation(len(group))
        n_train = int(round(train_frac * len(group)))
        if len(group) >= 2:
            n_train = min(max(n_train, 1), len(group) - 1)
        for j, pos in enumerate(order):
            (train if j < n_train else test).append(group[pos])
    train.sort(key=lambda c: c.clip_id)
    test.sort(key=lambda c: c.clip_id)
    return train, test


def run_gate_experiment(cfg: ExperimentConfig) -> GateExperimentResult:
    cfg.validate()
    t0 = time.monotonic()
    clips = _load_clips(cfg)
    train_clips, test_clips = split_clips(clips, cfg.train_frac, cfg.seed)
    if not test_clips:
        raise BadRangeError("split left no test clips; add clips or lower train_frac")

    train_data = [(f, lab) for c in train_clips for f, lab in zip(c.features, c.labels)]
    train_classes = {lab for _, lab in train_data}
    if len(train_classes) == 1:
        # degenerate benchmark: a single scenario class leaves no boundary
        # to learn, so gate with the constant prediction of that class
        bias = 20.0 if train_classes == {1} else -20.0
        tr = TrainResult(classifier=AvcClassifier(weights=np.array([0.0, 0.0, 0.0, bias])),
                         accuracy=1.0, history=[])
    else:
        tr = train_avc_classifier(train_data, epochs=cfg.epochs, lr=cfg.lr, seed=cfg.seed)

    decoder = make_decoder(cfg.scheme, cfg.audio_weight, cfg.blur_radius)
    per_clip: dict[str, dict[str, MetricReport]] = {}
    mode_reports: dict[str, list[MetricReport]] = {m: [] for m in GATE_MODES}
    correct = 0
    total = 0
    for c in test_clips:
        predicted = [predict_avc(tr.classifier, f, cfg.threshold) for f in c.features]
        # accuracy is the raw frame-level classifier quality, before any
        # temporal smoothing of the gate decisions
        correct += sum(1 for d, lab in zip(predicted, c.labels) if d.lc == lab)
        total += c.n_frames
        if cfg.decision_smoothing == "clip_vote":
            # correspondence is temporally coherent, so isolated frame
            # flips (accidental correlation in inconsistent clips) are
            # outvoted by the rest of the clip
            lc = 1 if 2 * sum(d.lc for d in predicted) > len(predicted) else 0
            predicted = [GateDecision(lc=lc, source="predicted") for _ in predicted]
        triples = list(zip(c.tensors, c.vectors, predicted))
        result = run_gated_pipeline(triples, decoder)
        ideal = [GateDecision(lc=lab, source="label") for lab in c.labels]
        streams = {
            "v_only": result.v_only,
            "always_fuse": result.always_fuse,
            "gated_predicted": result.gated,
            "gated_ideal": regate(result, ideal),
        }
        gt = list(zip(c.fixations, c.densities))
        per_clip[c.clip_id] = {}
        for mode, maps in streams.items():
            report = evaluate_sequence(maps, gt, metrics=cfg.metrics,
                                       sauc_splits=cfg.sauc_splits, seed=cfg.seed)
            per_clip[c.clip_id][mode] = report
            mode_reports[mode].append(report)

    pooled = {mode: pool_reports(reports, cfg.metrics)
              for mode, reports in mode_reports.items()}

    def mode_means(mode: str) -> dict[str, float]:
        if cfg.aggregate == "clip":
            return {m: clip_means(mode_reports[mode], m) for m in cfg.metrics}
        return {m: pooled[mode].mean(m) for m in cfg.metrics}

    base = mode_means("v_only")
    rows = []
    for mode in GATE_MODES:
        means = mode_means(mode)
        rows.append(AblationRow(mode=mode, means=means,
                                deltas={m: means[m] - base[m] for m in cfg.metrics}))
    table = AblationTable(rows=rows, aggregate=cfg.aggregate,
                          classifier_train_accuracy=tr.accuracy,
                          classifier_test_accuracy=correct / total if total else float("nan"))
    result = GateExperimentResult(table=table, train_result=tr, per_clip=per_clip,
                                  pooled=pooled, config=cfg,
                                  elapsed_s=time.monotonic() - t0)
    if cfg.out_dir is not None:
        _write_outputs(result)
    return result


def accuracy_sweep(cfg: ExperimentConfig,
                   accuracies=(0.6, 0.8, 0.95)) -> list[tuple[float, dict[str, float]]]:
    """Gate with synthetic classifiers of controlled accuracy.

    True labels are degraded by nested seeded flips (degrade_labels) and
    the pipeline is re-gated; the decoder runs once per clip.  Returns
    (accuracy, pooled metric means) per requested accuracy, in call
    order.  Uses every clip: no classifier is trained, so there is
    nothing to hold out.
    """
    cfg.validate()
    clips = _load_clips(cfg)
    decoder = make_decoder(cfg.scheme, cfg.audio_weight, cfg.blur_radius)
    pipeline_results = []
    all_labels: list[int] = []
    for c in clips:
        dummy = [GateDecision(lc=lab, source="label") for lab in c.labels]
        pipeline_results.append(
            run_gated_pipeline(list(zip(c.tensors, c.vectors, dummy)), decoder))
        all_labels.extend(c.labels)
    out = []
    for acc in accuracies:
        decisions = degrade_labels(all_labels, acc, cfg.seed)
        pos = 0
        reports = []
        for c, pr in zip(clips, pipeline_results):
            dec = decisions[pos:pos + c.n_frames]
            pos += c.n_frames
            maps = regate(pr, dec)
            reports.append(evaluate_sequence(
                maps, list(zip(c.fixations, c.densities)),
                metrics=cfg.metrics, sauc_splits=cfg.sauc_splits, seed=cfg.seed))
        pooled = pool_reports(reports, cfg.metrics)
        out.append((acc, {m: pooled.mean(m) for m in cfg.metrics}))
    return out


def ablation_text(result: GateExperimentResult) -> str:
    named = [NamedReport(mode, result.pooled[mode]) for mode in GATE_MODES]
    lines = [format_comparison_table(named, baseline="v_only"),
             "",
             f"classifier train accuracy: {result.table.classifier_train_accuracy:.4f}",
             f"classifier test accuracy:  {result.table.classifier_test_accuracy:.4f}",
             f"aggregate: {result.table.aggregate}   elapsed: {result.elapsed_s:.2f}s"]
    return "\n".join(lines)


def _write_outputs(result: GateExperimentResult) -> None:
    out = Path(result.config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    named = [NamedReport(mode, result.pooled[mode]) for mode in GATE_MODES]
    write_comparison_csv(out / "ablation.csv", named, baseline="v_only")
    (out / "ablation.txt").write_text(ablation_text(result) + "\n", encoding="utf-8")
    write_weights_csv(out / "classifier_weights.csv", result.train_result.classifier)
    write_training_log(out / "training_log.csv", result.train_result.history)
