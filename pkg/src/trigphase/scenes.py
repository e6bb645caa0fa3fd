"""Audio ingestion, seeded synthetic sources and SNR-controlled two-source mixing.

Manifest format, one scene per line (blank lines and ``#`` comments ignored)::

    id, path_s1, path_s2, snr_db, seed

A path is either a 16-bit mono PCM WAV file (relative paths resolve against the
manifest's directory) or a synthetic source spec ``synth:<kind>[?key=value&...]``.
Missing synthetic parameters are drawn from the scene seed.
"""
from __future__ import annotations

import math
import wave
import warnings
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import parse_qsl

import numpy as np

from .spectral import Waveform

SYNTH_KINDS = ("sine", "chirp", "am_harmonic", "noise")
PEAK_TARGET = 0.99
DEFAULT_SYNTH_DURATION_S = 1.0


class ManifestError(ValueError):
    pass


@dataclass
class MixtureScene:
    mixture: Waveform
    sources: list[Waveform]
    snr_db: float
    seed: int
    id: str

    def __post_init__(self):
        if len(self.sources) < 2:
            raise ValueError("a scene needs at least two sources")
        n = len(self.mixture)
        for s in self.sources:
            if len(s) != n or s.sample_rate_hz != self.mixture.sample_rate_hz:
                raise ValueError("sources and mixture must share length and sample rate")
        dev = np.max(np.abs(self.mixture.samples - np.sum([s.samples for s in self.sources], axis=0)))
        if dev > 1e-10:
            raise ValueError(f"mixture differs from the sum of sources by {dev:.3g}")

    @property
    def sample_rate_hz(self) -> int:
        return self.mixture.sample_rate_hz


# ---------------------------------------------------------------- WAV

def read_wav(path) -> Waveform:
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as fh:
            n_ch, width, rate, n = fh.getnchannels(), fh.getsampwidth(), fh.getframerate(), fh.getnframes()
            raw = fh.readframes(n)
    except wave.Error as exc:
        raise ValueError(f"{path}: unsupported WAV (only PCM format tag 1 is read): {exc}") from exc
    if n_ch != 1:
        raise ValueError(f"{path}: expected mono audio, file has {n_ch} channels")
    if width != 2:
        raise ValueError(f"{path}: expected 16-bit PCM, file has {8 * width}-bit samples")
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / 32768.0, rate)


def write_wav(path, w: Waveform) -> int:
    """Write 16-bit mono PCM. Returns the number of samples clipped."""
    scaled = np.round(w.samples * 32768.0)
    n_clipped = int(np.count_nonzero((scaled > 32767) | (scaled < -32768)))
    if n_clipped:
        warnings.warn(f"{path}: clipped {n_clipped} samples", RuntimeWarning, stacklevel=2)
    pcm = np.clip(scaled, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(w.sample_rate_hz))
        fh.writeframes(pcm.tobytes())
    return n_clipped


# ---------------------------------------------------------------- synthesis

def _rng(seed, *stream):
    return np.random.default_rng([int(seed), *stream])


def random_synth_params(kind: str, rng: np.random.Generator) -> dict:
    """Plausible parameter draw for ``kind``; used when a manifest omits parameters."""
    if kind == "sine":
        return {"freq_hz": float(rng.uniform(100, 3000)), "amplitude": 0.5,
                "phase": float(rng.uniform(-np.pi, np.pi))}
    if kind == "chirp":
        return {"f0_hz": float(rng.uniform(100, 1000)), "f1_hz": float(rng.uniform(1000, 3500)),
                "amplitude": 0.5}
    if kind == "am_harmonic":
        return {"f0_hz": float(rng.uniform(90, 280)), "amplitude": 0.3,
                "am_rate_hz": float(rng.uniform(2.5, 6.0)), "am_depth": float(rng.uniform(0.5, 0.9)),
                "vibrato_hz": float(rng.uniform(3.0, 7.0)), "vibrato_depth": float(rng.uniform(0.02, 0.08)),
                "tilt_db_per_oct": float(rng.uniform(-8.0, -4.0))}
    if kind == "noise":
        return {"amplitude": 0.1}
    raise ValueError(f"unknown synthetic kind {kind!r}; choose from {SYNTH_KINDS}")


def synth_signal(kind: str, params: dict | None = None, duration_s: float = 1.0, seed: int = 0,
                 sample_rate_hz: int = 8000) -> Waveform:
    """Deterministic test signal.

    ``am_harmonic`` is a harmonic stack with a slowly drifting (vibrato) pitch,
    tilted harmonic amplitudes with seeded jitter and a syllable-rate amplitude
    envelope, a rough stand-in for voiced speech.
    """
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {SYNTH_KINDS}")
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    p = dict(params or {})
    n = int(round(duration_s * sample_rate_hz))
    if n < 1:
        raise ValueError("duration too short for one sample")
    t = np.arange(n) / sample_rate_hz
    nyq = sample_rate_hz / 2
    rng = _rng(seed, 0)
    amp = float(p.get("amplitude", 0.5))

    if kind == "sine":
        f = float(p.get("freq_hz", 440.0))
        if not 0 < f < nyq:
            raise ValueError(f"freq_hz must lie in (0, {nyq})")
        x = amp * np.cos(2 * np.pi * f * t + float(p.get("phase", 0.0)))
    elif kind == "chirp":
        f0, f1 = float(p.get("f0_hz", 200.0)), float(p.get("f1_hz", 2000.0))
        if not (0 <= f0 < nyq and 0 <= f1 < nyq):
            raise ValueError(f"chirp endpoints must lie in [0, {nyq})")
        x = amp * np.cos(2 * np.pi * (f0 * t + (f1 - f0) * t ** 2 / (2 * duration_s)))
    elif kind == "noise":
        x = amp * rng.standard_normal(n)
    else:
        f0 = float(p.get("f0_hz", 150.0))
        if not 0 < f0 < nyq:
            raise ValueError(f"f0_hz must lie in (0, {nyq})")
        vib = float(p.get("vibrato_depth", 0.05)) * np.sin(
            2 * np.pi * float(p.get("vibrato_hz", 5.0)) * t + rng.uniform(-np.pi, np.pi))
        inst_f0 = f0 * (1.0 + vib)
        base_phase = 2 * np.pi * np.cumsum(inst_f0) / sample_rate_hz
        n_harm = int(p.get("n_harmonics", int(nyq * 0.95 / (f0 * 1.1))))
        tilt = float(p.get("tilt_db_per_oct", -6.0))
        x = np.zeros(n)
        for h in range(1, n_harm + 1):
            gain_db = tilt * math.log2(h) + rng.normal(0.0, 3.0)
            x += 10 ** (gain_db / 20) * np.cos(h * base_phase + rng.uniform(-np.pi, np.pi))
        depth = float(p.get("am_depth", 0.7))
        env = (1 - depth) + depth * 0.5 * (1 + np.sin(2 * np.pi * float(p.get("am_rate_hz", 4.0)) * t
                                                      + rng.uniform(-np.pi, np.pi)))
        x *= env
        peak = np.max(np.abs(x))
        x = amp * x / peak if peak > 0 else x
    return Waveform(x, sample_rate_hz)


# ---------------------------------------------------------------- mixing

def mix_at_snr(s1: Waveform, s2: Waveform, snr_db: float, seed: int = 0,
               scene_id: str | None = None) -> MixtureScene:
    """Scale ``s2`` so the s1-to-s2 energy ratio is ``snr_db``.

    Unequal lengths are truncated to the shorter one (marked ``+trunc`` in the id).
    If any peak would reach 1 the whole scene is scaled down jointly, which keeps the SNR.
    """
    if s1.sample_rate_hz != s2.sample_rate_hz:
        raise ValueError("sources have different sample rates; resampling is not supported")
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    scene_id = scene_id or "scene"
    n = min(len(s1), len(s2))
    if len(s1) != len(s2):
        scene_id += "+trunc"
    a, b = s1.samples[:n], s2.samples[:n]
    e1, e2 = float(a @ a), float(b @ b)
    if e1 == 0 or e2 == 0:
        raise ValueError("cannot mix a silent source")
    b = b * math.sqrt(e1 / (e2 * 10 ** (snr_db / 10)))
    peak = max(np.max(np.abs(a + b)), np.max(np.abs(a)), np.max(np.abs(b)))
    if peak >= 1.0:
        k = PEAK_TARGET / peak
        a, b = a * k, b * k
    rate = s1.sample_rate_hz
    return MixtureScene(Waveform(a + b, rate), [Waveform(a, rate), Waveform(b, rate)],
                        float(snr_db), int(seed), scene_id)


def measured_snr_db(scene: MixtureScene) -> float:
    a, b = scene.sources[0].samples, scene.sources[1].samples
    return 10 * math.log10(float(a @ a) / float(b @ b))


# ---------------------------------------------------------------- manifests

@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path_s1: str
    path_s2: str
    snr_db: float
    seed: int

    def line(self) -> str:
        return f"{self.id}, {self.path_s1}, {self.path_s2}, {self.snr_db!r}, {self.seed}"


def parse_manifest(text: str) -> list[ManifestEntry]:
    entries, seen = [], set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 5:
            raise ManifestError(f"line {lineno}: expected 5 comma-separated fields, got {len(parts)}")
        sid, p1, p2, snr, seed = parts
        if not sid or sid in seen:
            raise ManifestError(f"line {lineno}: missing or duplicate scene id {sid!r}")
        try:
            entry = ManifestEntry(sid, p1, p2, float(snr), int(seed))
        except ValueError as exc:
            raise ManifestError(f"line {lineno}: {exc}") from exc
        if not math.isfinite(entry.snr_db):
            raise ManifestError(f"line {lineno}: snr_db must be finite")
        seen.add(sid)
        entries.append(entry)
    return entries


def read_manifest(path) -> list[ManifestEntry]:
    return parse_manifest(Path(path).read_text())


def format_manifest(entries: list[ManifestEntry]) -> str:
    header = "# id, path_s1, path_s2, snr_db, seed\n"
    return header + "".join(e.line() + "\n" for e in entries)


def standard_manifest(n_scenes: int = 50, seed: int = 0, kind: str = "am_harmonic") -> list[ManifestEntry]:
    """Seeded synthetic benchmark set, SNR uniform in [-5, 5] dB."""
    rng = _rng(seed, 99)
    return [ManifestEntry(f"syn{i:03d}", f"synth:{kind}", f"synth:{kind}",
                          round(float(rng.uniform(-5.0, 5.0)), 2), seed * 100000 + i)
            for i in range(n_scenes)]


def load_source(path_spec: str, seed: int, slot: int, base_dir=None, sample_rate_hz: int = 8000) -> Waveform:
    if path_spec.startswith("synth:"):
        body = path_spec[len("synth:"):]
        kind, _, query = body.partition("?")
        given = {k: float(v) for k, v in parse_qsl(query)}
        duration = given.pop("duration_s", DEFAULT_SYNTH_DURATION_S)
        params = random_synth_params(kind, _rng(seed, slot, 1))
        params.update(given)
        return synth_signal(kind, params, duration, seed * 10 + slot, sample_rate_hz)
    path = Path(path_spec)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    try:
        return read_wav(path)
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"source file not found: {path}") from exc


def load_scene(entry: ManifestEntry, base_dir=None, sample_rate_hz: int = 8000) -> MixtureScene:
    s1 = load_source(entry.path_s1, entry.seed, 1, base_dir, sample_rate_hz)
    s2 = load_source(entry.path_s2, entry.seed, 2, base_dir, sample_rate_hz)
    return mix_at_snr(s1, s2, entry.snr_db, entry.seed, entry.id)
