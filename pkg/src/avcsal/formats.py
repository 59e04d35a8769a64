"""On-disk formats: portable gray/pixmaps, raw float matrices, and the
CSV sidecar files (fixations, gate decisions, classifier weights,
training logs, metric reports).

Everything here is deliberately plain: text headers, little-endian
binary payloads, one-line CSV headers.  Readers validate hard and raise
DecodeError with the offending path; writers produce canonical bytes so
identical inputs give identical files.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadRangeError, DecodeError, ShapeMismatchError
from .fusion import GATE_SOURCES, GateDecision
from .metrics import METRIC_NAMES, FixationSet, MetricReport
from .models import AvcClassifier, TrainStep

WEIGHT_NAMES = ("w_audio_energy_corr", "w_embed_cos", "w_onset_coincidence", "bias")


# ---------------------------------------------------------------------------
# portable graymap / pixmap


def _read_pnm_tokens(blob: bytes, path, n_tokens: int):
    """Pull header tokens (magic already stripped), honoring # comments;
    returns the tokens and the offset where the raster starts."""
    tokens = []
    i = 0
    while len(tokens) < n_tokens:
        if i >= len(blob):
            raise DecodeError(f"{path}: truncated header")
        c = blob[i:i + 1]
        if c in b" \t\r\n":
            i += 1
        elif c == b"#":
            while i < len(blob) and blob[i:i + 1] != b"\n":
                i += 1
        else:
            j = i
            while j < len(blob) and blob[j:j + 1] not in b" \t\r\n":
                j += 1
            tokens.append(blob[i:j])
            i = j
    return tokens, i + 1  # single whitespace byte separates header from raster


def read_image(path) -> np.ndarray:
    """Load a binary graymap (P5) or pixmap (P6) as floats in [0, 1];
    pixmap channels are averaged down to one gray plane."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] not in (b"P5", b"P6"):
        raise DecodeError(f"{path}: not a binary graymap/pixmap (magic {blob[:2]!r})")
    color = blob[:2] == b"P6"
    try:
        tokens, start = _read_pnm_tokens(blob[2:], path, 3)
        width, height, maxval = (int(t) for t in tokens)
    except (ValueError, DecodeError) as exc:
        raise DecodeError(f"{path}: bad header: {exc}") from exc
    if width < 1 or height < 1 or maxval < 1 or maxval > 65535:
        raise DecodeError(f"{path}: bad dimensions {width}x{height} maxval {maxval}")
    raster = blob[2 + start:]
    channels = 3 if color else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * channels * dtype.itemsize
    if len(raster) < need:
        raise DecodeError(f"{path}: raster truncated ({len(raster)} < {need} bytes)")
    data = np.frombuffer(raster[:need], dtype=dtype).astype(np.float64) / maxval
    if color:
        return data.reshape(height, width, 3).mean(axis=2)
    return data.reshape(height, width)


def write_pgm(path, values, maxval: int = 255) -> None:
    """Write floats in [0, 1] as a binary graymap; maxval 255 or 65535."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"image must be 2-D, got shape {arr.shape}")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise BadRangeError("image values must lie in [0, 1]")
    if maxval not in (255, 65535):
        raise BadRangeError(f"maxval must be 255 or 65535, got {maxval}")
    q = np.round(arr * maxval)
    raster = q.astype(">u2").tobytes() if maxval > 255 else q.astype("u1").tobytes()
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + raster)


# ---------------------------------------------------------------------------
# raw float matrix: 8-byte header (uint32 LE height, width), float32 LE body


def write_matrix(path, values) -> None:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"matrix must be 2-D, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        fh.write(arr.astype("<f4").tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8:
        raise DecodeError(f"{path}: shorter than the 8-byte header")
    height, width = struct.unpack("<II", blob[:8])
    need = 4 * height * width
    if height < 1 or width < 1:
        raise DecodeError(f"{path}: bad dimensions {height}x{width}")
    if len(blob) - 8 != need:
        raise DecodeError(f"{path}: payload {len(blob) - 8} bytes, expected {need}")
    return np.frombuffer(blob[8:], dtype="<f4").reshape(height, width).astype(np.float64)


def load_saliency_map(path) -> np.ndarray:
    """Read a prediction from either accepted container: graymap (.pgm)
    or raw float matrix (anything else)."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic in (b"P5", b"P6"):
        return read_image(path)
    return read_matrix(path)


# ---------------------------------------------------------------------------
# CSV sidecars


def write_fixation_csv(path, fixations: list[FixationSet]) -> None:
    """Rows `frame_index,x,y`, frames in order; frames may have no rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_index", "x", "y"])
        for i, fix in enumerate(fixations):
            for x, y in fix.points:
                w.writerow([i, x, y])


def read_fixation_csv(path, n_frames: int, frame_size: tuple[int, int]) -> list[FixationSet]:
    by_frame: dict[int, list[tuple[int, int]]] = {i: [] for i in range(n_frames)}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["frame_index", "x", "y"]:
        raise DecodeError(f"{path}: expected header frame_index,x,y")
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            idx, x, y = (int(v) for v in row)
        except ValueError as exc:
            raise DecodeError(f"{path}:{ln}: bad row {row!r}") from exc
        if idx not in by_frame:
            raise DecodeError(f"{path}:{ln}: frame_index {idx} outside 0..{n_frames - 1}")
        by_frame[idx].append((x, y))
    try:
        return [FixationSet(points=tuple(by_frame[i]), frame_size=frame_size)
                for i in range(n_frames)]
    except ShapeMismatchError as exc:
        raise DecodeError(f"{path}: {exc}") from exc


def write_gate_csv(path, decisions: list[GateDecision]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_index", "lc", "source"])
        for i, d in enumerate(decisions):
            w.writerow([i, d.lc, d.source])


def read_gate_csv(path) -> list[GateDecision]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["frame_index", "lc", "source"]:
        raise DecodeError(f"{path}: expected header frame_index,lc,source")
    out = []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            idx, lc, source = int(row[0]), int(row[1]), row[2]
        except (ValueError, IndexError) as exc:
            raise DecodeError(f"{path}:{ln}: bad row {row!r}") from exc
        if idx != len(out):
            raise DecodeError(f"{path}:{ln}: expected frame {len(out)}, got {idx}")
        if lc not in (0, 1) or source not in GATE_SOURCES:
            raise DecodeError(f"{path}:{ln}: bad gate row {row!r}")
        out.append(GateDecision(lc=lc, source=source))
    return out


def write_weights_csv(path, clf: AvcClassifier) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "value"])
        for name, value in zip(WEIGHT_NAMES, clf.weights):
            w.writerow([name, repr(float(value))])


def read_weights_csv(path) -> AvcClassifier:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["name", "value"]:
        raise DecodeError(f"{path}: expected header name,value")
    values = {}
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            values[row[0]] = float(row[1])
        except (ValueError, IndexError) as exc:
            raise DecodeError(f"{path}:{ln}: bad row {row!r}") from exc
    if set(values) != set(WEIGHT_NAMES):
        raise DecodeError(f"{path}: weight names {sorted(values)} != {sorted(WEIGHT_NAMES)}")
    return AvcClassifier(weights=np.array([values[n] for n in WEIGHT_NAMES]))


def write_training_log(path, history: list[TrainStep]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss", "accuracy"])
        for step in history:
            w.writerow([step.epoch, repr(step.loss), repr(step.accuracy)])


# ---------------------------------------------------------------------------
# metric reports


def _fmt(v: float | None, width: int = 0) -> str:
    s = "" if v is None else f"{v:.6f}"
    return s.rjust(width) if width else s


def write_metric_report_csv(path, report: MetricReport) -> None:
    """Per-frame rows plus a final `mean` row; empty cells where a frame
    was skipped for that metric."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_index", *METRIC_NAMES])
        for f in report.per_frame:
            w.writerow([f.frame_index, *(_fmt(f.value(m)) for m in METRIC_NAMES)])
        w.writerow(["mean", *(_fmt(report.mean(m)) for m in METRIC_NAMES)])


def format_metric_table(report: MetricReport, row_label: str = "frames") -> str:
    """One aligned text row of means, plus a skipped-frame note if any."""
    head = f"{'':<16}" + "".join(f"{m.upper():>10}" for m in METRIC_NAMES)
    row = f"{row_label:<16}" + "".join(_fmt(report.mean(m), 10) for m in METRIC_NAMES)
    lines = [head, row]
    skipped = {k: v for k, v in report.skipped.items() if v}
    if skipped:
        lines.append("skipped: " + ", ".join(f"{k}={v}" for k, v in sorted(skipped.items())))
    return "\n".join(lines)


@dataclass
class NamedReport:
    name: str
    report: MetricReport


def format_comparison_table(rows: list[NamedReport], baseline: str | None = None) -> str:
    """Aligned table of mean metrics, one row per named stream, with
    per-metric deltas against the named baseline row."""
    head = f"{'mode':<16}" + "".join(f"{m.upper():>10}" for m in METRIC_NAMES)
    lines = [head]
    base = next((r.report for r in rows if r.name == baseline), None)
    for r in rows:
        lines.append(f"{r.name:<16}"
                     + "".join(_fmt(r.report.mean(m), 10) for m in METRIC_NAMES))
        if base is not None and r.name != baseline:
            deltas = [r.report.mean(m) - base.mean(m) for m in METRIC_NAMES]
            lines.append(f"{'  delta':<16}" + "".join(f"{d:>+10.6f}" for d in deltas))
    return "\n".join(lines)


def write_comparison_csv(path, rows: list[NamedReport], baseline: str | None = None) -> None:
    base = next((r.report for r in rows if r.name == baseline), None)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        delta_cols = [f"d_{m}" for m in METRIC_NAMES] if base is not None else []
        w.writerow(["mode", *METRIC_NAMES, *delta_cols])
        for r in rows:
            cells = [r.name] + [_fmt(r.report.mean(m)) for m in METRIC_NAMES]
            if base is not None:
                if r.name == baseline:
                    cells += ["" for _ in METRIC_NAMES]
                else:
                    cells += [_fmt(r.report.mean(m) - base.mean(m)) for m in METRIC_NAMES]
            w.writerow(cells)
