"""Dataset plumbing: manifest parsing/validation, per-frame label tracks,
synthetic benchmark clips, and instance iteration.

A dataset instance is the 4-tuple (audio slice, frame, fixations,
consistency label) per frame.  Real media is consumed from plain files
(graymap frames, PCM WAV audio, CSV sidecars) referenced by a manifest
in a small line-oriented text format:

    avcsal-manifest v1
    name: <string>
    videos: <declared count>
    frames: <declared count>
    year: <int>          (optional metadata)
    viewers: <int>       (optional metadata)

    video <id>
      frames: <int>
      fps: <float>
      frame_dir: <relative path>
      audio: <relative path>
      fixations: <relative path>
      avc: <relative path>

A file may hold several such sections back to back (a bundle).  A
manifest with declared counts but no video blocks is a stub: it carries
bookkeeping for a dataset whose media is not present, which is how the
published reference statistics travel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioClip, MelConfig, MelSpectrogram, compute_mel, frame_align, read_wav, write_wav
from .errors import (
    BadRangeError,
    BadScenarioError,
    DecodeError,
    DuplicateFrameError,
    GapInTrackError,
    InvalidLabelError,
    ManifestParseError,
    MissingFieldError,
)
from .formats import read_fixation_csv, read_image, write_fixation_csv, write_pgm
from .metrics import FixationSet

MANIFEST_HEADER = "avcsal-manifest v1"
SCENARIOS = ("on_screen_sounding", "off_screen_audio", "background_music", "silent")
CONSISTENT_SCENARIOS = ("on_screen_sounding",)

VIDEO_KEYS = ("frames", "fps", "frame_dir", "audio", "fixations", "avc")
TOP_KEYS = ("name", "videos", "frames", "year", "viewers")


@dataclass(frozen=True)
class ReferenceStats:
    """Published per-dataset statistics used for count cross-checks."""

    name: str
    year: int
    videos: int
    viewers: int
    frames: int


# The six public eye-tracking sets this toolkit's manifests are checked
# against: publication year, video count, viewer count, frame count.
REFERENCE_SET_STATS = {
    "DIEM": ReferenceStats("DIEM", 2010, 84, 42, 78167),
    "AVAD": ReferenceStats("AVAD", 2016, 45, 16, 9564),
    "Coutrot1": ReferenceStats("Coutrot1", 2013, 60, 72, 25223),
    "Coutrot2": ReferenceStats("Coutrot2", 2014, 15, 40, 17134),
    "SumMe": ReferenceStats("SumMe", 2019, 25, 10, 109788),
    "ETMD": ReferenceStats("ETMD", 2019, 12, 10, 52744),
}


@dataclass(frozen=True)
class VideoEntry:
    id: str
    frame_count: int
    fps: float
    frame_dir: str
    audio: str
    fixations: str
    avc: str

    def __post_init__(self):
        if self.frame_count < 1:
            raise BadRangeError(f"video {self.id}: frame_count must be >= 1")
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise BadRangeError(f"video {self.id}: fps must be positive")


@dataclass
class DatasetManifest:
    name: str
    videos: list[VideoEntry]
    declared_video_count: int
    declared_frame_count: int
    year: int | None = None
    viewers: int | None = None
    root: Path | None = field(default=None, compare=False)

    def resolve(self, rel: str) -> Path:
        return (self.root / rel) if self.root is not None else Path(rel)


@dataclass(frozen=True)
class AvcLabelTrack:
    """Dense binary consistency labels, one per frame of one video."""

    labels: tuple[int, ...]
    video_id: str

    def __post_init__(self):
        if any(v not in (0, 1) for v in self.labels):
            raise InvalidLabelError(f"{self.video_id}: labels must be 0/1")


def repeat_labels(fragment_labels, frames_per_fragment: int) -> list[int]:
    """Upsample fragment-level (e.g. 1-second) consistency labels to
    per-frame granularity by repetition."""
    if frames_per_fragment < 1:
        raise BadRangeError("frames_per_fragment must be >= 1")
    return [int(v) for v in fragment_labels for _ in range(frames_per_fragment)]


# ---------------------------------------------------------------------------
# manifest parsing


def _parse_int(value: str, lineno: int, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ManifestParseError(f"line {lineno}: {what} must be an integer, got {value!r}") from None


def _parse_sections(text: str):
    """Split a (possibly bundled) manifest file into per-dataset chunks of
    (lineno, line) pairs."""
    sections: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if line.strip() == MANIFEST_HEADER:
            current = []
            sections.append(current)
            continue
        if line.strip() == "" or line.lstrip().startswith("#"):
            continue
        if current is None:
            raise ManifestParseError(
                f"line {lineno}: content before the '{MANIFEST_HEADER}' header"
            )
        current.append((lineno, line))
    if not sections:
        raise ManifestParseError(f"missing '{MANIFEST_HEADER}' header line")
    return sections


def _parse_section(lines, root: Path | None) -> DatasetManifest:
    top: dict[str, tuple[int, str]] = {}
    videos: list[VideoEntry] = []
    i = 0
    while i < len(lines) and not lines[i][1].startswith("video "):
        lineno, line = lines[i]
        if line.startswith((" ", "\t")):
            raise ManifestParseError(f"line {lineno}: indented line outside a video block")
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep or key not in TOP_KEYS:
            raise ManifestParseError(f"line {lineno}: expected one of {TOP_KEYS}, got {line!r}")
        if key in top:
            raise ManifestParseError(f"line {lineno}: duplicate key {key!r}")
        top[key] = (lineno, value.strip())
        i += 1

    for req in ("name", "videos", "frames"):
        if req not in top:
            raise MissingFieldError(f"manifest is missing the required '{req}' field")
    name = top["name"][1]
    if not name:
        raise ManifestParseError(f"line {top['name'][0]}: empty dataset name")
    declared_videos = _parse_int(top["videos"][1], top["videos"][0], "videos")
    declared_frames = _parse_int(top["frames"][1], top["frames"][0], "frames")
    if declared_videos < 0 or declared_frames < 0:
        raise ManifestParseError("declared counts must be non-negative")
    year = _parse_int(top["year"][1], top["year"][0], "year") if "year" in top else None
    viewers = _parse_int(top["viewers"][1], top["viewers"][0], "viewers") if "viewers" in top else None

    while i < len(lines):
        lineno, line = lines[i]
        if not line.startswith("video "):
            raise ManifestParseError(f"line {lineno}: expected 'video <id>', got {line!r}")
        vid = line[len("video "):].strip()
        if not vid:
            raise ManifestParseError(f"line {lineno}: empty video id")
        i += 1
        kv: dict[str, str] = {}
        while i < len(lines) and lines[i][1].startswith((" ", "\t")):
            sub_lineno, sub = lines[i]
            key, sep, value = sub.strip().partition(":")
            key = key.strip()
            if not sep or key not in VIDEO_KEYS:
                raise ManifestParseError(
                    f"line {sub_lineno}: expected one of {VIDEO_KEYS}, got {sub.strip()!r}"
                )
            if key in kv:
                raise ManifestParseError(f"line {sub_lineno}: duplicate key {key!r}")
            kv[key] = value.strip()
            i += 1
        for req in VIDEO_KEYS:
            if req not in kv:
                raise MissingFieldError(f"video {vid!r} is missing the '{req}' field")
        try:
            fps = float(kv["fps"])
        except ValueError:
            raise ManifestParseError(f"video {vid!r}: fps must be a number, got {kv['fps']!r}") from None
        try:
            entry = VideoEntry(id=vid, frame_count=_parse_int(kv["frames"], lineno, "frames"),
                               fps=fps, frame_dir=kv["frame_dir"], audio=kv["audio"],
                               fixations=kv["fixations"], avc=kv["avc"])
        except BadRangeError as exc:
            raise ManifestParseError(str(exc)) from exc
        if any(v.id == vid for v in videos):
            raise ManifestParseError(f"duplicate video id {vid!r}")
        videos.append(entry)

    return DatasetManifest(name=name, videos=videos,
                           declared_video_count=declared_videos,
                           declared_frame_count=declared_frames,
                           year=year, viewers=viewers, root=root)


def load_manifest_bundle(path) -> list[DatasetManifest]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestParseError(f"cannot read {path}: {exc}") from exc
    return [_parse_section(sec, path.parent) for sec in _parse_sections(text)]


def load_manifest(path) -> DatasetManifest:
    manifests = load_manifest_bundle(path)
    if len(manifests) != 1:
        raise ManifestParseError(
            f"{path} holds {len(manifests)} datasets; use load_manifest_bundle"
        )
    return manifests[0]


def _serialize_one(m: DatasetManifest) -> str:
    out = [MANIFEST_HEADER,
           f"name: {m.name}",
           f"videos: {m.declared_video_count}",
           f"frames: {m.declared_frame_count}"]
    if m.year is not None:
        out.append(f"year: {m.year}")
    if m.viewers is not None:
        out.append(f"viewers: {m.viewers}")
    for v in m.videos:
        out.append("")
        out.append(f"video {v.id}")
        out.append(f"  frames: {v.frame_count}")
        out.append(f"  fps: {v.fps!r}")
        out.append(f"  frame_dir: {v.frame_dir}")
        out.append(f"  audio: {v.audio}")
        out.append(f"  fixations: {v.fixations}")
        out.append(f"  avc: {v.avc}")
    return "\n".join(out) + "\n"


def save_manifest(m: DatasetManifest, path) -> None:
    Path(path).write_text(_serialize_one(m), encoding="utf-8")


def save_manifest_bundle(manifests: list[DatasetManifest], path) -> None:
    Path(path).write_text("\n".join(_serialize_one(m) for m in manifests),
                          encoding="utf-8")


def reference_bundle() -> list[DatasetManifest]:
    """Stub manifests (no media) carrying the published statistics of the
    six public sets, in canonical order."""
    return [DatasetManifest(name=r.name, videos=[],
                            declared_video_count=r.videos,
                            declared_frame_count=r.frames,
                            year=r.year, viewers=r.viewers)
            for r in REFERENCE_SET_STATS.values()]


# ---------------------------------------------------------------------------
# label tracks


def load_avc_labels(path, expected_frames: int, video_id: str = "") -> AvcLabelTrack:
    """Read `frame_index,label` rows into a dense binary track.  Every
    frame 0..expected_frames-1 must appear exactly once."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DecodeError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != ["frame_index", "label"]:
        raise DecodeError(f"{path}: expected header frame_index,label")
    seen: dict[int, int] = {}
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise InvalidLabelError(f"{path}:{ln}: expected 2 columns, got {row!r}")
        try:
            idx = int(row[0])
        except ValueError:
            raise InvalidLabelError(f"{path}:{ln}: bad frame_index {row[0]!r}") from None
        try:
            label = int(row[1])
        except ValueError:
            raise InvalidLabelError(f"{path}:{ln}: bad label {row[1]!r}") from None
        if label not in (0, 1):
            raise InvalidLabelError(f"{path}:{ln}: label must be 0 or 1, got {label}")
        if idx in seen:
            raise DuplicateFrameError(f"{path}:{ln}: frame {idx} listed twice")
        if not (0 <= idx < expected_frames):
            raise GapInTrackError(
                f"{path}:{ln}: frame {idx} outside 0..{expected_frames - 1}"
            )
        seen[idx] = label
    missing = [i for i in range(expected_frames) if i not in seen]
    if missing:
        raise GapInTrackError(f"{path}: missing frames {missing[:8]}"
                              + ("..." if len(missing) > 8 else ""))
    return AvcLabelTrack(labels=tuple(seen[i] for i in range(expected_frames)),
                         video_id=video_id)


def save_avc_labels(path, track: AvcLabelTrack) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_index", "label"])
        for i, v in enumerate(track.labels):
            w.writerow([i, v])


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    where: str
    detail: str

    def __str__(self):
        return f"{self.code} [{self.where}]: {self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, where: str, detail: str) -> None:
        self.violations.append(Violation(code, where, detail))


def check_reference_counts(name: str, n_videos: int, n_frames: int,
                           reference=None) -> list[Violation]:
    """Compare a dataset's counts against the published statistics table;
    pure function, no file access."""
    ref = (reference or REFERENCE_SET_STATS).get(name)
    if ref is None:
        return [Violation("UnknownReference", name, "no published statistics for this set")]
    out = []
    if n_videos != ref.videos:
        out.append(Violation("ReferenceCountMismatch", name,
                             f"videos {n_videos} != published {ref.videos}"))
    if n_frames != ref.frames:
        out.append(Violation("ReferenceCountMismatch", name,
                             f"frames {n_frames} != published {ref.frames}"))
    return out


def _list_frame_files(frame_dir: Path) -> list[Path]:
    return sorted(p for p in frame_dir.iterdir()
                  if p.suffix in (".pgm", ".ppm") and p.is_file())


def validate_manifest(m: DatasetManifest, reference=None,
                      check_media: bool = True) -> ValidationReport:
    """Cross-check a manifest against its media and, optionally, the
    published count table.  Total: collects violations, never raises."""
    report = ValidationReport()

    if m.videos:
        if m.declared_video_count != len(m.videos):
            report.add("DeclaredCountMismatch", m.name,
                       f"declares {m.declared_video_count} videos, lists {len(m.videos)}")
        total = sum(v.frame_count for v in m.videos)
        if m.declared_frame_count != total:
            report.add("DeclaredCountMismatch", m.name,
                       f"declares {m.declared_frame_count} frames, videos sum to {total}")

    if reference is not None:
        report.violations.extend(
            check_reference_counts(m.name, m.declared_video_count,
                                   m.declared_frame_count, reference))

    if not check_media:
        return report

    for v in m.videos:
        where = f"{m.name}/{v.id}"
        frame_dir = m.resolve(v.frame_dir)
        frame_size = None
        try:
            files = _list_frame_files(frame_dir)
            if len(files) != v.frame_count:
                report.add("FrameCountMismatch", where,
                           f"{len(files)} frame files, manifest says {v.frame_count}")
            if files:
                first = read_image(files[0])
                frame_size = (first.shape[1], first.shape[0])
        except OSError as exc:
            report.add("MissingMedia", where, f"frame_dir: {exc}")
        except DecodeError as exc:
            report.add("DecodeError", where, str(exc))

        try:
            read_wav(m.resolve(v.audio))
        except OSError as exc:
            report.add("MissingMedia", where, f"audio: {exc}")
        except Exception as exc:  # wave.Error, EOFError, range errors
            report.add("DecodeError", where, f"audio: {exc}")

        try:
            track = load_avc_labels(m.resolve(v.avc), v.frame_count, v.id)
            if len(track.labels) != v.frame_count:
                report.add("LabelLengthMismatch", where,
                           f"{len(track.labels)} labels for {v.frame_count} frames")
        except GapInTrackError as exc:
            report.add("LabelLengthMismatch", where, str(exc))
        except (DuplicateFrameError,) as exc:
            report.add("DuplicateFrame", where, str(exc))
        except InvalidLabelError as exc:
            report.add("InvalidLabel", where, str(exc))
        except (OSError, DecodeError) as exc:
            report.add("MissingMedia", where, f"avc: {exc}")

        if frame_size is not None:
            try:
                read_fixation_csv(m.resolve(v.fixations), v.frame_count, frame_size)
            except (OSError, DecodeError) as exc:
                report.add("FixationOutOfBounds" if "outside" in str(exc) else "DecodeError",
                           where, f"fixations: {exc}")
    return report


# ---------------------------------------------------------------------------
# synthetic clips


@dataclass
class SyntheticClip:
    """A generated audio-visual clip with ground truth.

    The consistency track is 1 exactly when the scenario puts the sound
    source on the salient on-screen object; a moving blob is salient and
    fixated in every scenario, but only on_screen_sounding ties the audio
    envelope to its motion.
    """

    frames: list[np.ndarray]
    audio: AudioClip
    gt_fixations: list[FixationSet]
    gt_avc: AvcLabelTrack
    scenario: str
    fps: float


def _blob_path(rng: np.random.Generator, n_frames: int, h: int, w: int,
               fps: float) -> np.ndarray:
    """Smooth bouncing trajectory with a periodic speed profile, so motion
    energy varies strongly and smoothly over the clip."""
    margin = min(h, w) / 6.0
    pos = np.array([rng.uniform(w / 3, 2 * w / 3), rng.uniform(h / 3, 2 * h / 3)])
    angle = rng.uniform(0, 2 * np.pi)
    heading = np.array([np.cos(angle), np.sin(angle)])
    v_max = min(h, w) / 16.0
    rate = rng.uniform(0.3, 0.7)       # speed-modulation frequency, Hz
    phase = rng.uniform(0, 2 * np.pi)
    out = np.zeros((n_frames, 2))
    for t in range(n_frames):
        out[t] = pos
        speed = v_max * (0.25 + 0.75 * abs(np.sin(2 * np.pi * rate * t / fps + phase)))
        pos = pos + heading * speed
        for k in (0, 1):
            limit = (w, h)[k]
            if pos[k] < margin:
                pos[k] = 2 * margin - pos[k]
                heading[k] = -heading[k]
            elif pos[k] > limit - margin:
                pos[k] = 2 * (limit - margin) - pos[k]
                heading[k] = -heading[k]
    return out


def _render_frames(rng: np.random.Generator, path: np.ndarray, h: int, w: int):
    ys = np.arange(h, dtype=np.float64)[:, None]
    xs = np.arange(w, dtype=np.float64)[None, :]
    background = (0.10 + 0.15 * ys / max(h - 1, 1)
                  + 0.02 * rng.standard_normal((h, w)))
    background = np.clip(background, 0.0, 1.0)
    sigma_b = min(h, w) / 12.0
    frames = []
    for cx, cy in path:
        blob = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma_b ** 2))
        frames.append(np.clip(background + 0.75 * blob, 0.0, 1.0))
    return frames


def motion_energy(frames) -> np.ndarray:
    """Mean absolute inter-frame difference, one value per frame step."""
    return np.array([np.abs(b - a).mean() for a, b in zip(frames, frames[1:])])


def _tone(env: np.ndarray, freq: float, sr: int) -> np.ndarray:
    t = np.arange(env.size, dtype=np.float64) / sr
    return env * np.sin(2 * np.pi * freq * t)


def _frame_envelope_to_samples(env_per_frame: np.ndarray, n_samples: int,
                               fps: float, sr: int) -> np.ndarray:
    """Zero-order hold: sample i takes the envelope of the frame step it
    falls in, so per-step audio energy tracks the step value exactly."""
    steps = np.minimum((np.arange(n_samples) * fps / sr).astype(int),
                       env_per_frame.size - 1)
    return env_per_frame[steps]


def _jittered_fixations(rng: np.random.Generator, center: np.ndarray,
                        h: int, w: int, n_fix: int, jitter: float):
    pts: list[tuple[int, int]] = []
    attempts = 0
    while len(pts) < n_fix:
        if attempts < 50 * n_fix:
            dx, dy = rng.normal(0.0, jitter, size=2)
        else:  # rng collisions exhausted; place deterministically on a ring
            k = len(pts)
            dx, dy = 1.5 * np.cos(k), 1.5 * np.sin(k)
        attempts += 1
        x = int(np.clip(round(center[0] + dx), 0, w - 1))
        y = int(np.clip(round(center[1] + dy), 0, h - 1))
        if (x, y) not in pts:
            pts.append((x, y))
    return tuple(pts)


def synthesize_clip(scenario: str, n_frames: int, seed: int,
                    height: int = 64, width: int = 64, fps: float = 8.0,
                    sample_rate: int = 16000, tone_hz: float = 440.0,
                    fixations_per_frame: int = 3,
                    jitter_px: float = 1.0) -> SyntheticClip:
    """Deterministic synthetic clip for one consistency scenario.

    on_screen_sounding modulates the tone's amplitude with the blob's own
    motion energy (consistent, label 1).  off_screen_audio plays the tone
    with a shuffled copy of that envelope, re-shuffled until it is
    decorrelated; background_music plays a steady two-note chord; silent
    is all zeros (all label 0).
    """
    if scenario not in SCENARIOS:
        raise BadScenarioError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    if n_frames < 8:
        raise BadRangeError(f"n_frames must be >= 8, got {n_frames}")
    rng = np.random.default_rng(seed)

    path = _blob_path(rng, n_frames, height, width, fps)
    frames = _render_frames(rng, path, height, width)
    motion = motion_energy(frames)
    env_frames = np.concatenate([motion, motion[-1:]]) / max(motion.max(), 1e-12)

    n_samples = int(round(n_frames / fps * sample_rate))
    if scenario == "on_screen_sounding":
        env = _frame_envelope_to_samples(0.8 * env_frames, n_samples, fps, sample_rate)
        samples = _tone(env, tone_hz, sample_rate)
    elif scenario == "off_screen_audio":
        # shuffle the per-frame envelope until it no longer tracks motion
        shuffled = env_frames.copy()
        best = None
        for _ in range(20):
            rng.shuffle(shuffled)
            m = motion - motion.mean()
            s = shuffled[:-1] - shuffled[:-1].mean()
            denom = np.linalg.norm(m) * np.linalg.norm(s)
            c = abs(float(m @ s / denom)) if denom > 1e-12 else 0.0
            if best is None or c < best[0]:
                best = (c, shuffled.copy())
            if c <= 0.3:
                break
        env = _frame_envelope_to_samples(0.8 * best[1], n_samples, fps, sample_rate)
        samples = _tone(env, tone_hz, sample_rate)
    elif scenario == "background_music":
        t = np.arange(n_samples, dtype=np.float64) / sample_rate
        samples = 0.25 * np.sin(2 * np.pi * 220.0 * t) + 0.25 * np.sin(2 * np.pi * 330.0 * t)
    else:  # silent
        samples = np.zeros(n_samples, dtype=np.float64)

    audio = AudioClip(samples=np.clip(samples, -1.0, 1.0), sample_rate=sample_rate)
    label = 1 if scenario in CONSISTENT_SCENARIOS else 0
    track = AvcLabelTrack(labels=tuple([label] * n_frames), video_id=f"synthetic-{seed}")
    fixations = [FixationSet(points=_jittered_fixations(rng, path[t], height, width,
                                                        fixations_per_frame, jitter_px),
                             frame_size=(width, height))
                 for t in range(n_frames)]
    return SyntheticClip(frames=frames, audio=audio, gt_fixations=fixations,
                         gt_avc=track, scenario=scenario, fps=fps)


def scenario_sequence(mix: dict[str, float], n_clips: int) -> list[str]:
    """Deterministic quota sequencing of scenarios to clip slots, keeping
    every prefix close to the requested mix."""
    if n_clips < 1:
        raise BadRangeError("n_clips must be >= 1")
    for s in mix:
        if s not in SCENARIOS:
            raise BadScenarioError(f"unknown scenario {s!r}")
    total = sum(mix.values())
    if abs(total - 1.0) > 1e-9 or any(f < 0 for f in mix.values()):
        raise BadRangeError(f"mix fractions must be non-negative and sum to 1, got {mix}")
    emitted = {s: 0 for s in mix}
    order = []
    for i in range(1, n_clips + 1):
        deficit = {s: mix[s] * i - emitted[s] for s in mix}
        pick = max(sorted(deficit), key=lambda s: deficit[s])
        emitted[pick] += 1
        order.append(pick)
    return order


def write_clip(clip: SyntheticClip, clip_dir: Path) -> dict[str, str]:
    """Write one clip's media tree; returns manifest-relative paths keyed
    by manifest field, relative to clip_dir's parent's parent (the dataset
    root)."""
    frames_dir = clip_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(clip.frames):
        write_pgm(frames_dir / f"f{i:04d}.pgm", frame)
    write_wav(clip_dir / "audio.wav", clip.audio)
    write_fixation_csv(clip_dir / "fixations.csv", clip.gt_fixations)
    save_avc_labels(clip_dir / "avc.csv", clip.gt_avc)
    root = clip_dir.parent.parent
    rel = clip_dir.relative_to(root)
    return {"frame_dir": str(rel / "frames"), "audio": str(rel / "audio.wav"),
            "fixations": str(rel / "fixations.csv"), "avc": str(rel / "avc.csv")}


def synthesize_dataset(out_dir, mix: dict[str, float], n_clips: int, seed: int,
                       n_frames: int = 40, name: str = "synthetic",
                       **clip_kwargs) -> DatasetManifest:
    """Generate a full on-disk dataset: clips/clipNNNN trees plus a
    manifest that validates cleanly.  Byte-identical for identical
    arguments."""
    out_dir = Path(out_dir)
    order = scenario_sequence(mix, n_clips)
    entries = []
    for i, scenario in enumerate(order):
        clip = synthesize_clip(scenario, n_frames, seed=seed + i, **clip_kwargs)
        clip_dir = out_dir / "clips" / f"clip{i:04d}"
        paths = write_clip(clip, clip_dir)
        entries.append(VideoEntry(id=f"clip{i:04d}", frame_count=n_frames,
                                  fps=clip.fps, **paths))
    manifest = DatasetManifest(name=name, videos=entries,
                               declared_video_count=len(entries),
                               declared_frame_count=sum(e.frame_count for e in entries),
                               root=out_dir)
    save_manifest(manifest, out_dir / "manifest.txt")
    return manifest


# ---------------------------------------------------------------------------
# instance iteration


@dataclass
class Instance:
    """One Eq.-style dataset tuple: aligned audio, frame, fixation GT,
    consistency label."""

    video_id: str
    frame_index: int
    audio_slice: MelSpectrogram
    frame: np.ndarray
    fixations: FixationSet
    avc: int


def load_video_media(m: DatasetManifest, v: VideoEntry,
                     mel_cfg: MelConfig = MelConfig(), context_s: float = 1.0):
    """Load one video's frames, aligned mel slices, fixations, and labels.
    Decode problems are re-raised with (video, frame) coordinates."""
    files = _list_frame_files(m.resolve(v.frame_dir))
    if len(files) != v.frame_count:
        raise DecodeError(f"{v.id}: {len(files)} frame files, manifest says {v.frame_count}")
    frames = []
    for i, f in enumerate(files):
        try:
            frames.append(read_image(f))
        except DecodeError as exc:
            raise DecodeError(f"{v.id} frame {i}: {exc}") from exc
    try:
        clip = read_wav(m.resolve(v.audio))
        mel = compute_mel(clip, mel_cfg)
    except Exception as exc:
        raise DecodeError(f"{v.id} audio: {exc}") from exc
    slices = frame_align(mel, v.fps, mel_cfg.hop, mel_cfg.sample_rate,
                         v.frame_count, context_s)
    frame_size = (frames[0].shape[1], frames[0].shape[0])
    fixations = read_fixation_csv(m.resolve(v.fixations), v.frame_count, frame_size)
    track = load_avc_labels(m.resolve(v.avc), v.frame_count, v.id)
    return frames, slices, fixations, track


def iterate_instances(m: DatasetManifest, mel_cfg: MelConfig = MelConfig(),
                      context_s: float = 1.0):
    """Yield per-frame instances in video order; exactly sum(frame_count)
    tuples for a valid dataset."""
    for v in m.videos:
        frames, slices, fixations, track = load_video_media(m, v, mel_cfg, context_s)
        for i in range(v.frame_count):
            yield Instance(video_id=v.id, frame_index=i, audio_slice=slices[i],
                           frame=frames[i], fixations=fixations[i],
                           avc=track.labels[i])
