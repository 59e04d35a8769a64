"""Audio frontend: WAV ingestion, STFT, mel filterbank, video-frame alignment.

The pipeline is raw PCM -> windowed FFT magnitudes -> power projection
through triangular mel filters -> natural-log compression with a floor.
Defaults (16 kHz, 512-sample window, 160-sample hop, 64 bands, 0-8 kHz,
floor 1e-10) follow common audio-classification practice; everything is
configurable through MelConfig.

All functions are pure and deterministic.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadRangeError,
    BadWindowError,
    ChannelMismatchError,
    EmptyAudioError,
    ShapeMismatchError,
    TooShortError,
)


@dataclass(frozen=True)
class AudioClip:
    """Mono audio samples in [-1, 1] at a fixed rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ChannelMismatchError(f"expected mono 1-D samples, got shape {arr.shape}")
        if self.sample_rate <= 0:
            raise BadRangeError(f"sample_rate must be positive, got {self.sample_rate}")
        if arr.size and (not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > 1.0 + 1e-9):
            raise BadRangeError("samples must be finite and within [-1, 1]")
        object.__setattr__(self, "samples", arr)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    """Magnitude STFT: rows are analysis frames, columns frequency bins."""

    magnitudes: np.ndarray
    window: int
    hop: int
    sample_rate: int

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        if mags.ndim != 2:
            raise ShapeMismatchError(f"magnitudes must be 2-D, got shape {mags.shape}")
        if mags.shape[1] != self.window // 2 + 1:
            raise ShapeMismatchError(
                f"{mags.shape[1]} bins inconsistent with window {self.window}"
            )
        if mags.size and (np.any(mags < 0) or not np.all(np.isfinite(mags))):
            raise ShapeMismatchError("magnitudes must be non-negative and finite")
        object.__setattr__(self, "magnitudes", mags)

    @property
    def frames(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def bins(self) -> int:
        return self.magnitudes.shape[1]


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular filters over FFT bins; weights has shape (n_mels, bins)."""

    weights: np.ndarray
    centers_hz: np.ndarray
    f_min: float
    f_max: float
    sample_rate: int

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]

    @property
    def bins(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-compressed band energies, shape (frames, n_mels).

    floor_log is ln(log_floor): the value a silent frame takes, also used
    as the pad value when slices run past the ends of the clip (padding
    with zero energy, not with a log-domain zero, which would be 1.0 in
    the energy domain and read as signal).
    """

    values: np.ndarray
    floor_log: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ShapeMismatchError(f"mel values must be 2-D, got shape {vals.shape}")
        if vals.size and not np.all(np.isfinite(vals)):
            raise ShapeMismatchError("mel values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_mels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 16000
    window: int = 512
    hop: int = 160
    n_mels: int = 64
    f_min: float = 0.0
    f_max: float = 8000.0
    log_floor: float = 1e-10
    window_fn: str = "hann"


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (np.power(10.0, np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _window_weights(window: int, window_fn: str) -> np.ndarray:
    if window_fn == "hann":
        # periodic Hann: matches FFT frame length, avoids the zero-sum
        # endpoint duplication of the symmetric variant
        k = np.arange(window, dtype=np.float64)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / window)
    if window_fn == "rect":
        return np.ones(window, dtype=np.float64)
    raise BadWindowError(f"unknown window_fn {window_fn!r} (use 'hann' or 'rect')")


def stft_magnitude(clip: AudioClip, window: int = 512, hop: int = 160,
                   window_fn: str = "hann") -> Spectrogram:
    """Short-time Fourier magnitude with no centering or reflect padding.

    Frame f covers samples [f*hop, f*hop + window); the count is
    1 + floor((len - window) / hop).  The rectangular window exists so
    tests can compare against a direct DFT summation.
    """
    if window < 2 or (window & (window - 1)) != 0:
        raise BadWindowError(f"window must be a power of two >= 2, got {window}")
    if not (0 < hop <= window):
        raise BadWindowError(f"hop must satisfy 0 < hop <= window, got {hop}")
    n = clip.samples.size
    if n < window:
        raise TooShortError(f"{n} samples < one {window}-sample analysis window")
    w = _window_weights(window, window_fn)
    n_frames = 1 + (n - window) // hop
    starts = np.arange(n_frames) * hop
    frames = clip.samples[starts[:, None] + np.arange(window)[None, :]] * w
    mags = np.abs(np.fft.rfft(frames, axis=1))
    return Spectrogram(magnitudes=mags, window=window, hop=hop,
                       sample_rate=clip.sample_rate)


def build_mel_filterbank(n_mels: int, bins: int, sample_rate: int,
                         f_min: float = 0.0, f_max: float | None = None) -> MelFilterbank:
    """Triangular mel filterbank over FFT bins.

    Peaks sit at n_mels points equally spaced on the mel scale between
    f_min and f_max; each triangle rises from the previous peak and falls
    to the next, so adjacent filters cross at half height.  The ramps are
    evaluated at the exact bin frequencies rather than snapped to integer
    bins, which keeps every interior bin covered even when several peaks
    land between two bins.
    """
    if n_mels < 1:
        raise BadRangeError(f"n_mels must be >= 1, got {n_mels}")
    if bins < 2:
        raise BadRangeError(f"need at least 2 frequency bins, got {bins}")
    nyquist = sample_rate / 2.0
    if f_max is None:
        f_max = nyquist
    if not (0.0 <= f_min < f_max <= nyquist):
        raise BadRangeError(
            f"need 0 <= f_min < f_max <= {nyquist}, got f_min={f_min}, f_max={f_max}"
        )
    n_fft = (bins - 1) * 2
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    bin_freqs = np.arange(bins, dtype=np.float64) * sample_rate / n_fft

    weights = np.zeros((n_mels, bins), dtype=np.float64)
    for m in range(n_mels):
        lo, center, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        weights[m] = np.maximum(0.0, np.minimum(rising, falling))
    return MelFilterbank(weights=weights, centers_hz=edges_hz[1:-1],
                         f_min=float(f_min), f_max=float(f_max),
                         sample_rate=sample_rate)


def mel_spectrogram(spec: Spectrogram, fb: MelFilterbank,
                    log_floor: float = 1e-10) -> MelSpectrogram:
    """Project power (magnitude squared) through the filterbank, then
    compress with ln(max(energy, log_floor))."""
    if log_floor <= 0.0:
        raise BadRangeError(f"log_floor must be positive, got {log_floor}")
    if fb.bins != spec.bins:
        raise ShapeMismatchError(
            f"filterbank expects {fb.bins} bins, spectrogram has {spec.bins}"
        )
    energy = (spec.magnitudes ** 2) @ fb.weights.T
    return MelSpectrogram(values=np.log(np.maximum(energy, log_floor)),
                          floor_log=math.log(log_floor))


def compute_mel(clip: AudioClip, cfg: MelConfig = MelConfig()) -> MelSpectrogram:
    """Convenience pipeline: STFT -> filterbank -> log mel."""
    if clip.sample_rate != cfg.sample_rate:
        clip = resample_linear(clip, cfg.sample_rate)
    spec = stft_magnitude(clip, window=cfg.window, hop=cfg.hop, window_fn=cfg.window_fn)
    fb = build_mel_filterbank(cfg.n_mels, spec.bins, cfg.sample_rate,
                              cfg.f_min, cfg.f_max)
    return mel_spectrogram(spec, fb, cfg.log_floor)


def slice_width_frames(context_s: float, sample_rate: int, hop: int) -> int:
    width = int(round(context_s * sample_rate / hop))
    return max(width, 1)


def frame_align(mel: MelSpectrogram, video_fps: float, hop: int, sample_rate: int,
                n_video_frames: int, context_s: float = 1.0) -> list[MelSpectrogram]:
    """Cut one fixed-width mel slice per video frame.

    Frame i's slice is centered on the mel row nearest its timestamp
    i / fps; rows that fall before the clip start or past its end are
    filled with the silence value floor_log.  Always returns exactly
    n_video_frames slices regardless of how the audio and video
    durations disagree.
    """
    if n_video_frames < 1:
        raise BadRangeError(f"n_video_frames must be >= 1, got {n_video_frames}")
    if video_fps <= 0:
        raise BadRangeError(f"video_fps must be positive, got {video_fps}")
    if hop <= 0 or sample_rate <= 0:
        raise BadRangeError("hop and sample_rate must be positive")
    if mel.frames == 0:
        raise EmptyAudioError("cannot align an empty mel spectrogram")

    width = slice_width_frames(context_s, sample_rate, hop)
    half = width // 2
    slices = []
    for i in range(n_video_frames):
        center = int(round(i / video_fps * sample_rate / hop))
        block = np.full((width, mel.n_mels), mel.floor_log, dtype=np.float64)
        lo = center - half
        src_lo = max(lo, 0)
        src_hi = min(lo + width, mel.frames)
        if src_lo < src_hi:
            block[src_lo - lo:src_hi - lo] = mel.values[src_lo:src_hi]
        slices.append(MelSpectrogram(values=block, floor_log=mel.floor_log))
    return slices


def read_wav(path) -> AudioClip:
    """Load a 16-bit PCM WAV; stereo is downmixed by channel averaging."""
    with wave.open(str(path), "rb") as wf:
        n_channels = wf.getnchannels()
        sampwidth = wf.getsampwidth()
        rate = wf.getframerate()
        n = wf.getnframes()
        raw = wf.readframes(n)
    if sampwidth != 2:
        raise BadRangeError(f"only 16-bit PCM supported, got {8 * sampwidth}-bit")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return AudioClip(samples=data, sample_rate=rate)


def write_wav(path, clip: AudioClip) -> None:
    """Write mono 16-bit PCM."""
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(pcm.tobytes())


def resample_linear(clip: AudioClip, target_sr: int) -> AudioClip:
    """Linear-interpolation resampling; adequate for the band-limited
    synthetic material used here, not for production audio."""
    if target_sr <= 0:
        raise BadRangeError(f"target_sr must be positive, got {target_sr}")
    if target_sr == clip.sample_rate or clip.samples.size == 0:
        return AudioClip(samples=clip.samples.copy(), sample_rate=target_sr)
    n_out = int(round(clip.samples.size * target_sr / clip.sample_rate))
    t_out = np.arange(n_out, dtype=np.float64) * (clip.sample_rate / target_sr)
    out = np.interp(t_out, np.arange(clip.samples.size, dtype=np.float64), clip.samples)
    return AudioClip(samples=out, sample_rate=target_sr)
