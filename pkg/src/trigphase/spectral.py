"""Framed STFT analysis / overlap-add synthesis with a square-root Hann window.

Conventions:
  * spectrogram arrays are shaped (T, F): frames along axis 0, one-sided bins along axis 1
  * ``win_len - hop`` zeros are padded at both ends before framing, so every input
    sample is covered by the full ``win_len // hop`` overlapping frames
  * phase at exactly-zero magnitude is 0
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class StftConfig:
    sample_rate_hz: int = 8000
    win_len: int = 256
    hop: int = 64
    fft_size: int = 256
    window_kind: str = "sqrt_hann"

    def __post_init__(self):
        for name in ("sample_rate_hz", "win_len", "hop", "fft_size"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.hop > self.win_len:
            raise ValueError(f"hop ({self.hop}) must not exceed win_len ({self.win_len})")
        if self.win_len % self.hop:
            raise ValueError(f"hop ({self.hop}) must divide win_len ({self.win_len})")
        if self.fft_size < self.win_len:
            raise ValueError(f"fft_size ({self.fft_size}) must be >= win_len ({self.win_len})")
        if self.fft_size % 2:
            raise ValueError("fft_size must be even")
        if self.window_kind != "sqrt_hann":
            raise ValueError(f"unsupported window_kind {self.window_kind!r}")

    @property
    def n_freq(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def pad(self) -> int:
        return self.win_len - self.hop

    def n_frames(self, n_samples: int) -> int:
        return math.ceil((n_samples + 2 * self.pad - self.win_len) / self.hop) + 1


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int = 8000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"waveform must be 1-D, got shape {self.samples.shape}")
        if self.samples.size == 0:
            raise ValueError("empty waveform")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")

    def __len__(self):
        return self.samples.size


@dataclass
class _Spec:
    data: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    @property
    def shape(self):
        return self.data.shape


@dataclass
class ComplexSpec(_Spec):
    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        _check_2d(self.data, self.config)
        if not np.all(np.isfinite(self.data)):
            raise ValueError("complex spectrogram contains non-finite entries")


@dataclass
class MagSpec(_Spec):
    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        _check_2d(self.data, self.config)
        if not np.all(np.isfinite(self.data)) or np.any(self.data < 0):
            raise ValueError("magnitudes must be finite and non-negative")


@dataclass
class PhaseSpec(_Spec):
    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        _check_2d(self.data, self.config)
        if not np.all(np.isfinite(self.data)):
            raise ValueError("phases must be finite")
        if np.any(self.data > np.pi) or np.any(self.data <= -np.pi):
            raise ValueError("phases must lie in (-pi, pi]; wrap them first")


def _check_2d(data, config):
    if data.ndim != 2:
        raise ValueError(f"spectrogram must be 2-D (T, F), got shape {data.shape}")
    if data.shape[1] != config.n_freq:
        raise ValueError(f"expected {config.n_freq} frequency bins, got {data.shape[1]}")


def check_same_shape(*specs):
    shapes = {s.shape for s in specs}
    if len(shapes) > 1:
        raise ValueError(f"shape mismatch: {sorted(shapes)}")


def make_window(config: StftConfig) -> np.ndarray:
    """Square root of the periodic Hann window of length ``win_len``."""
    n = np.arange(config.win_len)
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / config.win_len)
    return np.sqrt(np.clip(hann, 0.0, 1.0))


def wrap_phase(x):
    """Map angles into (-pi, pi]. Scalars in, scalars out."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("wrap_phase: non-finite input")
    out = arr - 2.0 * np.pi * np.ceil((arr - np.pi) / (2.0 * np.pi))
    # rounding can land exactly on -pi or a hair above pi
    out = np.where(out <= -np.pi, out + 2.0 * np.pi, out)
    out = np.where(out > np.pi, out - 2.0 * np.pi, out)
    if np.ndim(x) == 0:
        return float(out)
    return out


def _frames(x: np.ndarray, config: StftConfig) -> np.ndarray:
    n_frames = config.n_frames(x.size)
    total = (n_frames - 1) * config.hop + config.win_len
    padded = np.zeros(total)
    padded[config.pad:config.pad + x.size] = x
    idx = np.arange(config.win_len)[None, :] + config.hop * np.arange(n_frames)[:, None]
    return padded[idx]


def stft(x: Waveform, config: StftConfig | None = None) -> ComplexSpec:
    config = config or StftConfig(sample_rate_hz=x.sample_rate_hz)
    if x.sample_rate_hz != config.sample_rate_hz:
        raise ValueError(
            f"sample rate mismatch: waveform {x.sample_rate_hz} Hz, config {config.sample_rate_hz} Hz")
    if x.samples.size + 2 * config.pad < config.win_len:
        raise ValueError("signal shorter than one frame after padding")
    frames = _frames(x.samples, config) * make_window(config)
    return ComplexSpec(np.fft.rfft(frames, n=config.fft_size, axis=1), config)


def istft(spec: ComplexSpec, config: StftConfig | None = None, out_len: int | None = None) -> Waveform:
    """Weighted overlap-add inverse, normalised by the accumulated squared window."""
    config = config or spec.config
    if spec.data.shape[1] != config.n_freq:
        raise ValueError(f"spectrogram has {spec.data.shape[1]} bins, config expects {config.n_freq}")
    n_frames = spec.data.shape[0]
    total = (n_frames - 1) * config.hop + config.win_len
    max_len = total - 2 * config.pad
    if out_len is None:
        out_len = max_len
    if out_len <= 0 or out_len > max_len:
        raise ValueError(f"out_len {out_len} outside reconstructable span (1..{max_len})")

    win = make_window(config)
    frames = np.fft.irfft(spec.data, n=config.fft_size, axis=1)[:, :config.win_len] * win
    y = np.zeros(total)
    norm = np.zeros(total)
    win_sq = win ** 2
    for t in range(n_frames):
        s = t * config.hop
        y[s:s + config.win_len] += frames[t]
        norm[s:s + config.win_len] += win_sq
    y /= np.maximum(norm, NORM_FLOOR)
    return Waveform(y[config.pad:config.pad + out_len], config.sample_rate_hz)


def polar_decompose(spec: ComplexSpec) -> tuple[MagSpec, PhaseSpec]:
    mag = np.abs(spec.data)
    phase = np.where(mag > 0, np.angle(spec.data), 0.0)
    # np.angle returns -pi for (-x - 0j); fold onto +pi
    phase = np.where(phase <= -np.pi, np.pi, phase)
    return MagSpec(mag, spec.config), PhaseSpec(phase, spec.config)


def polar_compose(mag: MagSpec, phase: PhaseSpec) -> ComplexSpec:
    check_same_shape(mag, phase)
    return ComplexSpec(mag.data * np.exp(1j * phase.data), mag.config)


def mag_phase(x: Waveform, config: StftConfig | None = None) -> tuple[MagSpec, PhaseSpec]:
    return polar_decompose(stft(x, config))
