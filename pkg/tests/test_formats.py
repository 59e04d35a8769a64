"""Container round trips: graymaps, raw float matrices, and the CSV
sidecars (fixations, gate tracks, classifier weights, metric reports)."""

import math

import numpy as np
import pytest

from avcsal.formats import (
    NamedReport,
    format_comparison_table,
    format_metric_table,
    load_saliency_map,
    read_fixation_csv,
    read_gate_csv,
    read_image,
    read_matrix,
    read_weights_csv,
    write_comparison_csv,
    write_fixation_csv,
    write_gate_csv,
    write_matrix,
    write_metric_report_csv,
    write_pgm,
    write_training_log,
    write_weights_csv,
)
from avcsal.fusion import GateDecision
from avcsal.metrics import FixationSet, FrameMetrics, MetricReport
from avcsal.models import AvcClassifier, TrainStep
from avcsal.errors import BadRangeError, DecodeError, ShapeMismatchError


class TestGraymap:
    def test_8bit_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 1, (6, 9))
        p = tmp_path / "m.pgm"
        write_pgm(p, img)
        back = read_image(p)
        assert back.shape == img.shape
        np.testing.assert_allclose(back, img, atol=0.5 / 255)

    def test_16bit_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 1, (5, 4))
        p = tmp_path / "m.pgm"
        write_pgm(p, img, maxval=65535)
        back = read_image(p)
        np.testing.assert_allclose(back, img, atol=0.5 / 65535)

    def test_quantization_is_exact_on_grid(self, tmp_path):
        img = np.array([[0.0, 1.0], [128 / 255, 37 / 255]])
        p = tmp_path / "m.pgm"
        write_pgm(p, img)
        np.testing.assert_array_equal(read_image(p), img)

    def test_header_comments_skipped(self, tmp_path):
        p = tmp_path / "c.pgm"
        raster = bytes([0, 128, 255, 64])
        p.write_bytes(b"P5\n# made by hand\n2 2\n# another\n255\n" + raster)
        img = read_image(p)
        np.testing.assert_allclose(img, np.array([[0, 128], [255, 64]]) / 255)

    def test_pixmap_averages_channels(self, tmp_path):
        p = tmp_path / "c.ppm"
        raster = bytes([255, 0, 0, 0, 255, 0])    # red px, green px
        p.write_bytes(b"P6\n2 1\n255\n" + raster)
        img = read_image(p)
        np.testing.assert_allclose(img, [[1 / 3, 1 / 3]], atol=1e-9)

    def test_truncated_raster(self, tmp_path):
        p = tmp_path / "t.pgm"
        p.write_bytes(b"P5\n4 4\n255\n" + bytes(10))
        with pytest.raises(DecodeError):
            read_image(p)

    def test_wrong_magic(self, tmp_path):
        p = tmp_path / "x.pgm"
        p.write_bytes(b"P2\n2 2\n255\n0 0 0 0")
        with pytest.raises(DecodeError):
            read_image(p)

    def test_write_rejects_out_of_range(self, tmp_path):
        with pytest.raises(BadRangeError):
            write_pgm(tmp_path / "x.pgm", np.array([[1.5]]))
        with pytest.raises(ShapeMismatchError):
            write_pgm(tmp_path / "x.pgm", np.zeros(4))


class TestMatrix:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        m = rng.normal(size=(7, 3)).astype(np.float32).astype(np.float64)
        p = tmp_path / "m.bin"
        write_matrix(p, m)
        np.testing.assert_array_equal(read_matrix(p), m)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "m.bin"
        write_matrix(p, np.ones((4, 4)))
        blob = p.read_bytes()
        p.write_bytes(blob[:-8])
        with pytest.raises(DecodeError):
            read_matrix(p)

    def test_short_header(self, tmp_path):
        p = tmp_path / "m.bin"
        p.write_bytes(b"\x01\x00")
        with pytest.raises(DecodeError):
            read_matrix(p)

    def test_loader_dispatches_on_magic(self, tmp_path):
        img = np.array([[0.25, 0.5], [0.75, 1.0]])
        gp = tmp_path / "s.pgm"
        write_pgm(gp, img, maxval=65535)
        mp = tmp_path / "s.bin"
        write_matrix(mp, img)
        np.testing.assert_allclose(load_saliency_map(gp), img, atol=1e-4)
        np.testing.assert_allclose(load_saliency_map(mp), img, atol=1e-7)


class TestFixationCsv:
    def test_round_trip(self, tmp_path):
        fsets = [FixationSet(points=((1, 2), (3, 4)), frame_size=(8, 6)),
                 FixationSet(points=(), frame_size=(8, 6)),
                 FixationSet(points=((0, 0),), frame_size=(8, 6))]
        p = tmp_path / "f.csv"
        write_fixation_csv(p, fsets)
        back = read_fixation_csv(p, 3, (8, 6))
        assert back == fsets

    def test_bad_header(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("frame,x,y\n0,1,1\n")
        with pytest.raises(DecodeError):
            read_fixation_csv(p, 1, (4, 4))

    def test_frame_out_of_range(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("frame_index,x,y\n9,1,1\n")
        with pytest.raises(DecodeError):
            read_fixation_csv(p, 2, (4, 4))

    def test_point_outside_frame(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("frame_index,x,y\n0,7,1\n")
        with pytest.raises(DecodeError):
            read_fixation_csv(p, 1, (4, 4))


class TestGateCsv:
    def test_round_trip(self, tmp_path):
        track = [GateDecision(lc=1, source="predicted"),
                 GateDecision(lc=0, source="label"),
                 GateDecision(lc=1, source="label")]
        p = tmp_path / "g.csv"
        write_gate_csv(p, track)
        assert read_gate_csv(p) == track

    def test_rejects_index_gap(self, tmp_path):
        p = tmp_path / "g.csv"
        p.write_text("frame_index,lc,source\n0,1,label\n2,0,label\n")
        with pytest.raises(DecodeError):
            read_gate_csv(p)

    def test_rejects_soft_gate(self, tmp_path):
        p = tmp_path / "g.csv"
        p.write_text("frame_index,lc,source\n0,0.7,label\n")
        with pytest.raises(DecodeError):
            read_gate_csv(p)


class TestWeightsCsv:
    def test_round_trip_is_exact(self, tmp_path):
        clf = AvcClassifier(weights=np.array([0.1, -2.5, 1e-17, 3.7]))
        p = tmp_path / "w.csv"
        write_weights_csv(p, clf)
        back = read_weights_csv(p)
        np.testing.assert_array_equal(back.weights, clf.weights)

    def test_rejects_wrong_names(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text("name,value\nalpha,1.0\n")
        with pytest.raises(DecodeError):
            read_weights_csv(p)


def small_report():
    return MetricReport(
        per_frame=[FrameMetrics(frame_index=0, auc_j=0.9, sim=0.5,
                                s_auc=0.8, cc=0.7, nss=1.5),
                   FrameMetrics(frame_index=1, auc_j=0.7, sim=0.3,
                                s_auc=None, cc=None, nss=2.5)],
        skipped={"s_auc": 1, "cc": 1})


class TestReports:
    def test_metric_report_csv(self, tmp_path):
        p = tmp_path / "r.csv"
        write_metric_report_csv(p, small_report())
        lines = p.read_text().splitlines()
        assert lines[0] == "frame_index,auc_j,sim,s_auc,cc,nss"
        assert lines[1] == "0,0.900000,0.500000,0.800000,0.700000,1.500000"
        # skipped metrics leave empty cells, not zeros
        assert lines[2] == "1,0.700000,0.300000,,,2.500000"
        # mean row ignores skipped frames
        assert lines[3] == "mean,0.800000,0.400000,0.800000,0.700000,2.000000"

    def test_metric_table_shows_means_and_skips(self):
        text = format_metric_table(small_report())
        assert "AUC_J" in text
        assert "0.800000" in text                    # auc_j mean
        assert "skipped: cc=1, s_auc=1" in text

    def test_comparison_table_deltas(self):
        a = small_report()
        b = MetricReport(per_frame=[FrameMetrics(frame_index=0, auc_j=0.6,
                                                 sim=0.2, s_auc=0.5, cc=0.1,
                                                 nss=1.0)])
        text = format_comparison_table([NamedReport("v_only", b),
                                        NamedReport("gated", a)],
                                       baseline="v_only")
        assert "v_only" in text and "gated" in text
        assert "+0.200000" in text      # auc_j delta 0.8 - 0.6

    def test_comparison_csv(self, tmp_path):
        a = small_report()
        b = MetricReport(per_frame=[FrameMetrics(frame_index=0, auc_j=0.6,
                                                 sim=0.2, s_auc=0.5, cc=0.1,
                                                 nss=1.0)])
        p = tmp_path / "c.csv"
        write_comparison_csv(p, [NamedReport("v_only", b),
                                 NamedReport("gated", a)], baseline="v_only")
        lines = p.read_text().splitlines()
        assert lines[0] == "mode,auc_j,sim,s_auc,cc,nss,d_auc_j,d_sim,d_s_auc,d_cc,d_nss"
        assert lines[1].startswith("v_only,0.600000")
        assert lines[1].endswith(",,,,,")     # baseline has no deltas
        assert lines[2].startswith("gated,0.800000")
        assert lines[2].split(",")[6] == "0.200000"

    def test_training_log(self, tmp_path):
        hist = [TrainStep(epoch=0, loss=0.693, accuracy=0.5),
                TrainStep(epoch=1, loss=0.64, accuracy=0.75)]
        p = tmp_path / "t.csv"
        write_training_log(p, hist)
        lines = p.read_text().splitlines()
        assert lines[0] == "epoch,loss,accuracy"
        assert lines[1] == "0,0.693,0.5"
        assert lines[2] == "1,0.64,0.75"
