"""Gate-ablation harness tests.  The heavyweight end-to-end guarantees
(benchmark chains, classifier floor, runtime) live in the acceptance
suite; here we pin the pieces: covariance equivalence across fusion
schemes, decoder algebra, label degradation, splits, pooling, and the
two exact boundary cases where gating collapses onto a baseline."""

import numpy as np
import pytest

from avcsal.experiment import (
    ClipData,
    ExperimentConfig,
    SynthSpec,
    ablation_text,
    accuracy_sweep,
    audio_motion_covariance,
    degrade_labels,
    make_decoder,
    pool_reports,
    prepare_synthetic_clip,
    run_gate_experiment,
    split_clips,
)
from avcsal.datasets import synthesize_clip
from avcsal.fusion import FeatureTensor, FeatureVector
from avcsal.metrics import FrameMetrics, MetricReport
from avcsal.models import box_blur, center_prior, contrast_map
from avcsal.errors import BadRangeError


def make_window(seed, k=8, h=10, w=12):
    rng = np.random.default_rng(seed)
    diffs = rng.uniform(0, 1, (k, h, w))
    envelope = rng.uniform(0, 1, k)
    return diffs, envelope


class TestAudioMotionCovariance:
    def test_all_schemes_agree(self):
        diffs, env = make_window(0)
        maps = [audio_motion_covariance(s, diffs, env)
                for s in ("spatial_align", "concat", "bilinear")]
        np.testing.assert_allclose(maps[0], maps[1], atol=1e-10)
        np.testing.assert_allclose(maps[0], maps[2], atol=1e-10)

    def test_matches_direct_formula(self):
        diffs, env = make_window(1)
        got = audio_motion_covariance("spatial_align", diffs, env)
        w = env - env.mean()
        want = np.einsum("k,khw->hw", w, diffs)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_flat_envelope_gives_zero_map(self):
        diffs, _ = make_window(2)
        got = audio_motion_covariance("spatial_align", diffs, np.full(8, 0.7))
        np.testing.assert_allclose(got, np.zeros_like(got), atol=1e-12)

    def test_unknown_scheme(self):
        diffs, env = make_window(3)
        with pytest.raises(BadRangeError):
            audio_motion_covariance("stack", diffs, env)


def make_tensor(seed, k=8, h=10, w=12):
    rng = np.random.default_rng(seed)
    frame = rng.uniform(0, 1, (h, w))
    diffs = rng.uniform(0, 1, (k, h, w))
    tensor = FeatureTensor(values=np.concatenate(
        [frame[None], contrast_map(frame)[None], center_prior(h, w)[None], diffs]))
    return tensor, frame, diffs


def peak_norm(x):
    return x / x.max() if x.max() > 0 else x


class TestDecoder:
    def test_visual_only_composition(self):
        tensor, frame, diffs = make_tensor(0)
        decode = make_decoder()
        base = decode(tensor, None)
        want = (0.5 * peak_norm(contrast_map(frame))
                + 0.2 * peak_norm(diffs.mean(axis=0))
                + 0.3 * center_prior(10, 12))
        np.testing.assert_allclose(base, want, atol=1e-12)

    def test_fused_composition(self):
        tensor, frame, diffs = make_tensor(1)
        rng = np.random.default_rng(9)
        env = FeatureVector(values=rng.uniform(0, 1, 8))
        decode = make_decoder(audio_weight=0.2, blur_radius=2, mask_floor=0.15)
        base = decode(tensor, None)
        fused = decode(tensor, env)
        cov = audio_motion_covariance("spatial_align", diffs, env.values)
        amap = peak_norm(box_blur(np.maximum(cov, 0.0), 2, passes=2))
        want = base * (0.15 + 0.85 * amap) + 0.2 * amap
        np.testing.assert_allclose(fused, want, atol=1e-12)

    def test_flat_envelope_fuses_to_rescaled_base(self):
        # zero covariance: the fused map is base * mask_floor, an order-
        # preserving rescale, so rank metrics cannot change
        tensor, _, _ = make_tensor(2)
        env = FeatureVector(values=np.full(8, 0.4))
        decode = make_decoder(mask_floor=0.15)
        base = decode(tensor, None)
        fused = decode(tensor, env)
        np.testing.assert_allclose(fused, 0.15 * base, atol=1e-12)

    def test_schemes_produce_identical_fused_maps(self):
        tensor, _, _ = make_tensor(3)
        rng = np.random.default_rng(4)
        env = FeatureVector(values=rng.uniform(0, 1, 8))
        outs = [make_decoder(scheme=s)(tensor, env)
                for s in ("spatial_align", "concat", "bilinear")]
        np.testing.assert_allclose(outs[0], outs[1], atol=1e-10)
        np.testing.assert_allclose(outs[0], outs[2], atol=1e-10)


class TestDegradeLabels:
    def test_exact_flip_count(self):
        labels = [1] * 100
        for acc in (1.0, 0.95, 0.8, 0.5, 0.0):
            out = degrade_labels(labels, acc, seed=0)
            errors = sum(d.lc != 1 for d in out)
            assert errors == round((1 - acc) * 100)

    def test_perfect_accuracy_is_identity(self):
        labels = [0, 1, 1, 0, 1]
        out = degrade_labels(labels, 1.0, seed=3)
        assert [d.lc for d in out] == labels
        assert all(d.source == "predicted" for d in out)

    def test_noise_is_nested_across_accuracies(self):
        labels = [1] * 200
        flips_80 = {i for i, d in enumerate(degrade_labels(labels, 0.8, seed=5))
                    if d.lc == 0}
        flips_95 = {i for i, d in enumerate(degrade_labels(labels, 0.95, seed=5))
                    if d.lc == 0}
        assert flips_95 <= flips_80

    def test_deterministic_in_seed(self):
        labels = [i % 2 for i in range(50)]
        a = degrade_labels(labels, 0.7, seed=2)
        b = degrade_labels(labels, 0.7, seed=2)
        assert [d.lc for d in a] == [d.lc for d in b]

    def test_validation(self):
        with pytest.raises(BadRangeError):
            degrade_labels([1, 0], 1.5)


def stub_clip(clip_id, label, n=4):
    return ClipData(clip_id=clip_id, labels=tuple([label] * n), fixations=[],
                    densities=[], features=[], tensors=[], vectors=[])


class TestSplitClips:
    def test_both_classes_reach_training_set(self):
        clips = ([stub_clip(f"on{i}", 1) for i in range(6)]
                 + [stub_clip(f"off{i}", 0) for i in range(6)])
        for seed in range(10):
            train, test = split_clips(clips, 0.7, seed)
            train_classes = {c.labels[0] for c in train}
            test_classes = {c.labels[0] for c in test}
            assert train_classes == {0, 1}
            assert test_classes == {0, 1}

    def test_split_sizes(self):
        clips = ([stub_clip(f"on{i}", 1) for i in range(10)]
                 + [stub_clip(f"off{i}", 0) for i in range(10)])
        train, test = split_clips(clips, 0.7, 0)
        assert len(train) == 14 and len(test) == 6

    def test_deterministic_and_disjoint(self):
        clips = ([stub_clip(f"on{i}", 1) for i in range(5)]
                 + [stub_clip(f"off{i}", 0) for i in range(5)])
        a_train, a_test = split_clips(clips, 0.7, 1)
        b_train, b_test = split_clips(clips, 0.7, 1)
        assert [c.clip_id for c in a_train] == [c.clip_id for c in b_train]
        ids_train = {c.clip_id for c in a_train}
        ids_test = {c.clip_id for c in a_test}
        assert ids_train.isdisjoint(ids_test)
        assert len(ids_train | ids_test) == 10


class TestPoolReports:
    def test_concatenates_frames_and_sums_skips(self):
        r1 = MetricReport(per_frame=[FrameMetrics(frame_index=0, nss=1.0),
                                     FrameMetrics(frame_index=1, nss=3.0)],
                          skipped={"cc": 1})
        r2 = MetricReport(per_frame=[FrameMetrics(frame_index=0, nss=5.0)],
                          skipped={"cc": 2, "nss": 1})
        pooled = pool_reports([r1, r2])
        assert pooled.frame_count == 3
        assert pooled.mean("nss") == pytest.approx(3.0)
        assert pooled.skipped["cc"] == 3
        assert pooled.skipped["nss"] == 1
        assert [f.frame_index for f in pooled.per_frame] == [0, 1, 2]


def tiny_synth(mix, n_clips=4, seed=0):
    return ExperimentConfig(
        synth=SynthSpec(n_clips=n_clips, mix=mix, n_frames=12,
                        height=32, width=32),
        seed=seed, epochs=60, sauc_splits=8)


class TestGateExperimentBoundaries:
    def test_all_consistent_ideal_equals_always_fuse(self):
        cfg = tiny_synth({"on_screen_sounding": 1.0})
        res = run_gate_experiment(cfg)
        ideal = res.table.row("gated_ideal").means
        fuse = res.table.row("always_fuse").means
        for m in cfg.metrics:
            assert ideal[m] == fuse[m], m     # exact: same selected maps

    def test_all_inconsistent_ideal_equals_v_only(self):
        cfg = tiny_synth({"silent": 1.0})
        res = run_gate_experiment(cfg)
        ideal = res.table.row("gated_ideal").means
        vonly = res.table.row("v_only").means
        for m in cfg.metrics:
            assert ideal[m] == vonly[m], m

    def test_table_has_all_modes_and_deltas(self):
        cfg = tiny_synth({"on_screen_sounding": 0.5, "off_screen_audio": 0.5})
        res = run_gate_experiment(cfg)
        modes = [r.mode for r in res.table.rows]
        assert modes == ["v_only", "always_fuse", "gated_predicted",
                         "gated_ideal"]
        v_means = res.table.row("v_only").means
        for r in res.table.rows:
            for m in cfg.metrics:
                assert r.deltas[m] == pytest.approx(r.means[m] - v_means[m])
        assert 0.0 <= res.table.classifier_test_accuracy <= 1.0
        assert res.elapsed_s > 0.0
        text = ablation_text(res)
        assert "gated_ideal" in text and "NSS" in text

    def test_per_clip_reports_cover_test_split(self):
        cfg = tiny_synth({"on_screen_sounding": 0.5, "off_screen_audio": 0.5},
                         n_clips=6)
        res = run_gate_experiment(cfg)
        for clip_id, by_mode in res.per_clip.items():
            assert set(by_mode) == {"v_only", "always_fuse",
                                    "gated_predicted", "gated_ideal"}
            n = {m: r.frame_count for m, r in by_mode.items()}
            assert len(set(n.values())) == 1   # same frame count per mode


class TestAccuracySweep:
    def test_monotone_structure_and_shape(self):
        cfg = tiny_synth({"on_screen_sounding": 0.5, "off_screen_audio": 0.5},
                         n_clips=4)
        rows = accuracy_sweep(cfg, accuracies=(0.6, 0.95))
        assert [a for a, _ in rows] == [0.6, 0.95]
        for _, means in rows:
            assert set(means) == set(cfg.metrics)


class TestConfigValidation:
    def test_needs_exactly_one_source(self):
        with pytest.raises(BadRangeError):
            ExperimentConfig().validate()
        with pytest.raises(BadRangeError):
            ExperimentConfig(manifest_path="x", synth=SynthSpec()).validate()

    def test_field_ranges(self):
        good = dict(synth=SynthSpec())
        ExperimentConfig(**good).validate()
        with pytest.raises(BadRangeError):
            ExperimentConfig(**good, scheme="stack").validate()
        with pytest.raises(BadRangeError):
            ExperimentConfig(**good, train_frac=1.0).validate()
        with pytest.raises(BadRangeError):
            ExperimentConfig(**good, aggregate="video").validate()
        with pytest.raises(BadRangeError):
            ExperimentConfig(**good, audio_weight=1.0).validate()
        with pytest.raises(BadRangeError):
            ExperimentConfig(**good, feature_smooth=-1).validate()
        with pytest.raises(BadRangeError):
            ExperimentConfig(**good, decision_smoothing="kalman").validate()
        with pytest.raises(BadRangeError):
            ExperimentConfig(**good, metrics=("nss", "psnr")).validate()


class TestPrepareSyntheticClip:
    def test_channel_layout_and_counts(self):
        clip = synthesize_clip("on_screen_sounding", 12, seed=0,
                               height=32, width=32)
        data = prepare_synthetic_clip(clip, "c0", context_frames=4)
        assert len(data.tensors) == 12
        assert len(data.features) == 12
        assert len(data.vectors) == 12
        for t in data.tensors:
            assert t.channels == 3 + 8     # frame, contrast, prior, 8 diffs
        for v in data.vectors:
            assert v.length == 8
        assert data.labels == tuple([1] * 12)

    def test_consistent_clip_features_separate_from_silent(self):
        on = prepare_synthetic_clip(
            synthesize_clip("on_screen_sounding", 16, seed=1), "on")
        off = prepare_synthetic_clip(
            synthesize_clip("off_screen_audio", 16, seed=1), "off")
        on_corr = np.mean([f.audio_energy_corr for f in on.features])
        off_corr = np.mean([f.audio_energy_corr for f in off.features])
        assert on_corr > 0.9
        assert off_corr < on_corr - 0.3
