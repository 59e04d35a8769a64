"""End-to-end runs of every subcommand in temp directories, checking exit
codes, emitted files, and parity between the CLI and the library calls it
wraps."""

import math

import numpy as np
import pytest

from avcsal.audio import AudioClip, MelConfig, compute_mel, read_wav, write_wav
from avcsal.cli import main
from avcsal.datasets import load_manifest, load_avc_labels, iterate_instances
from avcsal.formats import read_matrix, write_matrix
from avcsal.metrics import evaluate_sequence, fixation_density


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def synth_dir(tmp_path):
    out = tmp_path / "ds"
    code = run(["synth", "--out-dir", out, "--clips", 4, "--frames", 10,
                "--size", "32x32", "--seed", 0])
    assert code == 0
    return out


class TestSynth:
    def test_writes_validating_dataset(self, synth_dir, capsys):
        m = load_manifest(synth_dir / "manifest.txt")
        assert len(m.videos) == 4
        assert sum(v.frame_count for v in m.videos) == 40

    def test_mix_quota(self, synth_dir):
        m = load_manifest(synth_dir / "manifest.txt")
        consistent = 0
        for v in m.videos:
            track = load_avc_labels(m.resolve(v.avc), v.frame_count, v.id)
            assert len(set(track.labels)) == 1      # one scenario per clip
            consistent += track.labels[0]
        assert consistent == 2                       # 50/50 of 4 clips

    def test_byte_identical_regeneration(self, tmp_path):
        for sub in ("a", "b"):
            assert run(["synth", "--out-dir", tmp_path / sub, "--clips", 2,
                        "--frames", 8, "--size", "32x32", "--seed", 3]) == 0
        files = sorted(p.relative_to(tmp_path / "a")
                       for p in (tmp_path / "a").rglob("*") if p.is_file())
        for rel in files:
            assert (tmp_path / "a" / rel).read_bytes() == \
                   (tmp_path / "b" / rel).read_bytes(), rel

    def test_bad_mix_exits_2(self, tmp_path, capsys):
        code = run(["synth", "--out-dir", tmp_path / "x", "--mix",
                    "on_screen_sounding=0.7"])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestValidate:
    def test_clean_set_exits_0(self, synth_dir, capsys):
        assert run(["validate", "--manifest", synth_dir / "manifest.txt"]) == 0
        assert ": ok" in capsys.readouterr().out

    def test_corruption_exits_2_and_lists_violation(self, synth_dir, capsys):
        avc = synth_dir / "clips" / "clip0000" / "avc.csv"
        lines = avc.read_text().splitlines()
        lines[1] = lines[1].split(",")[0] + ",7"     # invalid label value
        avc.write_text("\n".join(lines) + "\n")
        assert run(["validate", "--manifest", synth_dir / "manifest.txt"]) == 2
        assert "InvalidLabel" in capsys.readouterr().out

    def test_reference_flag(self, synth_dir, capsys):
        # synthetic sets are not in the published table
        code = run(["validate", "--manifest", synth_dir / "manifest.txt",
                    "--reference", "--no-media"])
        assert code == 2
        assert "UnknownReference" in capsys.readouterr().out


class TestMel:
    def test_silence_hits_floor(self, tmp_path, capsys):
        wav = tmp_path / "s.wav"
        write_wav(wav, AudioClip(samples=np.zeros(16000), sample_rate=16000))
        out = tmp_path / "mel.bin"
        assert run(["mel", "--wav", wav, "--out", out]) == 0
        mat = read_matrix(out)
        # the matrix container stores float32, so the floor is exact at
        # that precision
        assert np.all(mat == np.float32(math.log(1e-10)))
        summary = capsys.readouterr().out
        assert "window=512" in summary and "hop=160" in summary
        assert "n_mels=64" in summary
        assert (tmp_path / "mel.bin.txt").exists()

    def test_tone_peaks_in_band_holding_440(self, tmp_path):
        from avcsal.audio import build_mel_filterbank
        t = np.arange(16000) / 16000
        wav = tmp_path / "t.wav"
        write_wav(wav, AudioClip(samples=0.5 * np.sin(2 * np.pi * 440 * t),
                                 sample_rate=16000))
        out = tmp_path / "mel.bin"
        assert run(["mel", "--wav", wav, "--out", out]) == 0
        mat = read_matrix(out)
        band = int(mat.mean(axis=0).argmax())
        fb = build_mel_filterbank(64, 257, 16000)
        lo = fb.centers_hz[band - 1] if band > 0 else 0.0
        hi = fb.centers_hz[band + 1] if band < 63 else 8000.0
        assert lo < 440.0 < hi

    def test_matrix_matches_library(self, tmp_path):
        rng = np.random.default_rng(0)
        wav = tmp_path / "n.wav"
        clip = AudioClip(samples=rng.uniform(-0.5, 0.5, 8000), sample_rate=16000)
        write_wav(wav, clip)
        out = tmp_path / "mel.bin"
        assert run(["mel", "--wav", wav, "--out", out]) == 0
        lib = compute_mel(read_wav(wav), MelConfig())
        np.testing.assert_allclose(read_matrix(out), lib.values, atol=1e-6)

    def test_missing_wav_exits_2(self, tmp_path, capsys):
        assert run(["mel", "--wav", tmp_path / "no.wav",
                    "--out", tmp_path / "o.bin"]) == 2
        assert "error:" in capsys.readouterr().err


class TestEval:
    def write_predictions(self, synth_dir, pred_dir, constant=None):
        """Predictions per clip: GT density (perfect) or a constant map."""
        m = load_manifest(synth_dir / "manifest.txt")
        from avcsal.formats import read_fixation_csv, read_image
        for v in m.videos:
            vdir = pred_dir / v.id
            vdir.mkdir(parents=True)
            frame_files = sorted(m.resolve(v.frame_dir).iterdir())
            first = read_image(frame_files[0])
            fixations = read_fixation_csv(m.resolve(v.fixations), v.frame_count,
                                          (first.shape[1], first.shape[0]))
            for i, fx in enumerate(fixations):
                if constant is None:
                    pred = fixation_density(fx, 2.0)
                else:
                    pred = np.full(first.shape, constant)
                write_matrix(vdir / f"p{i:04d}.bin", pred)
        return m

    def test_perfect_predictions_score_cc_one(self, synth_dir, tmp_path, capsys):
        pred = tmp_path / "pred"
        self.write_predictions(synth_dir, pred)
        out = tmp_path / "rep"
        code = run(["eval", "--pred-dir", pred, "--manifest",
                    synth_dir / "manifest.txt", "--out-dir", out,
                    "--sauc-splits", 10])
        assert code == 0
        rows = (out / "all_frames_metrics.csv").read_text().splitlines()
        header = rows[0].split(",")
        mean = rows[-1].split(",")
        assert mean[0] == "mean"
        cc = float(mean[header.index("cc")])
        assert cc == pytest.approx(1.0, abs=1e-9)
        # per-frame cc cells are 1.0 too (float32 container round trip)
        for row in rows[1:-1]:
            assert float(row.split(",")[header.index("cc")]) == pytest.approx(
                1.0, abs=1e-6)

    def test_constant_predictions_score_half_auc(self, synth_dir, tmp_path):
        pred = tmp_path / "pred"
        self.write_predictions(synth_dir, pred, constant=0.25)
        out = tmp_path / "rep"
        code = run(["eval", "--pred-dir", pred, "--manifest",
                    synth_dir / "manifest.txt", "--out-dir", out,
                    "--metrics", "auc_j,sim", "--sauc-splits", 5])
        assert code == 0
        rows = (out / "all_frames_metrics.csv").read_text().splitlines()
        header = rows[0].split(",")
        mean = rows[-1].split(",")
        assert float(mean[header.index("auc_j")]) == pytest.approx(0.5, abs=1e-12)

    def test_cli_matches_library_eval(self, synth_dir, tmp_path):
        pred = tmp_path / "pred"
        m = self.write_predictions(synth_dir, pred)
        out = tmp_path / "rep"
        assert run(["eval", "--pred-dir", pred, "--manifest",
                    synth_dir / "manifest.txt", "--out-dir", out,
                    "--sauc-splits", 10, "--seed", 0]) == 0
        v = m.videos[0]
        maps = [read_matrix(p) for p in sorted((pred / v.id).iterdir())]
        gt = []
        for inst in iterate_instances(m):
            if inst.video_id == v.id:
                gt.append((inst.fixations, fixation_density(inst.fixations, 2.0)))
        lib = evaluate_sequence(maps, gt, sauc_splits=10, seed=0)
        rows = (out / f"{v.id}_metrics.csv").read_text().splitlines()
        header = rows[0].split(",")
        for i, row in enumerate(rows[1:-1]):
            cells = row.split(",")
            for name in ("auc_j", "sim", "s_auc", "cc", "nss"):
                lib_v = lib.per_frame[i].value(name)
                cell = cells[header.index(name)]
                if lib_v is None:
                    assert cell == ""
                else:
                    assert float(cell) == pytest.approx(lib_v, abs=5e-7)

    def test_missing_prediction_dir_exits_2(self, synth_dir, tmp_path, capsys):
        pred = tmp_path / "pred"
        self.write_predictions(synth_dir, pred)
        import shutil
        shutil.rmtree(pred / "clip0003")
        code = run(["eval", "--pred-dir", pred, "--manifest",
                    synth_dir / "manifest.txt", "--out-dir", tmp_path / "rep"])
        assert code == 2
        assert "clip0003" in capsys.readouterr().err


class TestGateExperiment:
    def test_synthetic_run_writes_artifacts(self, tmp_path, capsys):
        out = tmp_path / "abl"
        code = run(["gate-experiment", "--clips", 4, "--frames", 12,
                    "--size", "32x32", "--epochs", 60, "--sauc-splits", 8,
                    "--seed", 0, "--out-dir", out])
        assert code == 0
        text = capsys.readouterr().out
        for mode in ("v_only", "always_fuse", "gated_predicted", "gated_ideal"):
            assert mode in text
        assert (out / "ablation.csv").exists()
        assert (out / "ablation.txt").exists()
        assert (out / "classifier_weights.csv").exists()
        assert (out / "training_log.csv").exists()
        header = (out / "ablation.csv").read_text().splitlines()[0]
        assert header.startswith("mode,auc_j,sim,s_auc,cc,nss")

    def test_manifest_input_runs(self, synth_dir, tmp_path):
        code = run(["gate-experiment", "--manifest", synth_dir / "manifest.txt",
                    "--epochs", 40, "--sauc-splits", 5, "--seed", 1])
        assert code == 0

    def test_bad_scheme_exits_2(self, tmp_path, capsys):
        code = run(["gate-experiment", "--clips", 4, "--frames", 12,
                    "--train-frac", "1.5"])
        assert code == 2
        assert "train_frac" in capsys.readouterr().err
