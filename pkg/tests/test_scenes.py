import wave

import numpy as np
import pytest

from trigphase.scenes import (
    ManifestEntry,
    ManifestError,
    format_manifest,
    load_scene,
    load_source,
    measured_snr_db,
    mix_at_snr,
    parse_manifest,
    read_wav,
    standard_manifest,
    synth_signal,
    write_wav,
)
from trigphase.spectral import StftConfig, Waveform, stft


def test_wav_round_trip(tmp_path, rng):
    x = Waveform(np.round(rng.uniform(-0.9, 0.9, 1234) * 32768) / 32768)
    assert write_wav(tmp_path / "a.wav", x) == 0
    y = read_wav(tmp_path / "a.wav")
    assert y.sample_rate_hz == 8000
    assert np.max(np.abs(y.samples - x.samples)) <= 1 / 32768


def test_wav_quantisation_bound(tmp_path, rng):
    x = Waveform(rng.uniform(-0.9, 0.9, 500))
    write_wav(tmp_path / "b.wav", x)
    assert np.max(np.abs(read_wav(tmp_path / "b.wav").samples - x.samples)) <= 0.5 / 32768 + 1e-15


def test_wav_clipping_warns(tmp_path):
    with pytest.warns(RuntimeWarning, match="clipped 2"):
        n = write_wav(tmp_path / "c.wav", Waveform(np.array([1.5, 0.0, -2.0])))
    assert n == 2
    np.testing.assert_allclose(read_wav(tmp_path / "c.wav").samples, [32767 / 32768, 0.0, -1.0])


def test_zero_length_file_errors(tmp_path):
    p = tmp_path / "z.wav"
    with wave.open(str(p), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(8000)
    with pytest.raises(ValueError):
        read_wav(p)


def _raw_wav(path, channels, width):
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(channels)
        fh.setsampwidth(width)
        fh.setframerate(8000)
        fh.writeframes(b"\x00" * (channels * width * 10))


def test_stereo_rejected(tmp_path):
    _raw_wav(tmp_path / "s.wav", 2, 2)
    with pytest.raises(ValueError, match="2 channels"):
        read_wav(tmp_path / "s.wav")


def test_24bit_rejected(tmp_path):
    _raw_wav(tmp_path / "w.wav", 1, 3)
    with pytest.raises(ValueError, match="24-bit"):
        read_wav(tmp_path / "w.wav")


def test_not_a_wav(tmp_path):
    (tmp_path / "junk.wav").write_bytes(b"RIFF0000WAVEjunk")
    with pytest.raises(ValueError):
        read_wav(tmp_path / "junk.wav")


@pytest.mark.parametrize("snr", [-5.0, 0.0, 3.3, 10.0])
def test_mix_hits_snr(rng, snr):
    a = Waveform(0.3 * rng.standard_normal(4000))
    b = Waveform(0.1 * rng.standard_normal(4000))
    scene = mix_at_snr(a, b, snr)
    assert abs(measured_snr_db(scene) - snr) < 1e-9
    np.testing.assert_allclose(scene.mixture.samples, scene.sources[0].samples + scene.sources[1].samples)


def test_plus_ten_db_energy_ratio():
    a = synth_signal("sine", {"freq_hz": 300.0}, 0.5)
    b = synth_signal("sine", {"freq_hz": 900.0}, 0.5)
    s = mix_at_snr(a, b, 10.0).sources
    assert np.sum(s[0].samples ** 2) / np.sum(s[1].samples ** 2) == pytest.approx(10.0, rel=1e-9)


def test_peak_normalisation_keeps_snr(rng):
    a = Waveform(rng.uniform(-0.99, 0.99, 2000))
    b = Waveform(rng.uniform(-0.99, 0.99, 2000))
    scene = mix_at_snr(a, b, -5.0)
    assert np.max(np.abs(scene.mixture.samples)) < 1.0
    assert max(np.max(np.abs(s.samples)) for s in scene.sources) < 1.0
    assert measured_snr_db(scene) == pytest.approx(-5.0, abs=1e-9)


def test_truncation_flag(rng):
    scene = mix_at_snr(Waveform(rng.standard_normal(100) * 0.1), Waveform(rng.standard_normal(80) * 0.1), 0.0,
                       scene_id="x")
    assert len(scene.mixture) == 80 and scene.id == "x+trunc"


def test_silent_source_rejected():
    with pytest.raises(ValueError, match="silent"):
        mix_at_snr(Waveform(np.ones(10) * 0.1), Waveform(np.zeros(10)), 0.0)


def test_mix_rate_mismatch():
    with pytest.raises(ValueError, match="sample rate"):
        mix_at_snr(Waveform(np.ones(10) * 0.1, 8000), Waveform(np.ones(10) * 0.1, 16000), 0.0)


@pytest.mark.parametrize("kind", ["sine", "chirp", "noise", "am_harmonic"])
def test_synth_deterministic(kind):
    a = synth_signal(kind, None, 0.25, seed=9)
    b = synth_signal(kind, None, 0.25, seed=9)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert len(a) == 2000
    if kind != "noise":
        assert np.max(np.abs(a.samples)) <= 1.0


def test_sine_1khz():
    x = synth_signal("sine", {"freq_hz": 1000.0, "amplitude": 0.5}, 1.0).samples
    n = np.arange(8000)
    np.testing.assert_allclose(x, 0.5 * np.cos(2 * np.pi * n / 8), atol=1e-12)
    spec = np.abs(np.fft.rfft(x))
    assert np.argmax(spec) == 1000


def test_chirp_endpoints():
    cfg = StftConfig()
    x = synth_signal("chirp", {"f0_hz": 500.0, "f1_hz": 3000.0}, 1.0)
    mag = np.abs(stft(x, cfg).data)
    bin_hz = cfg.sample_rate_hz / cfg.fft_size
    first = np.argmax(mag[4]) * bin_hz
    last = np.argmax(mag[-5]) * bin_hz
    assert abs(first - 500) < 4 * bin_hz
    assert abs(last - 3000) < 4 * bin_hz


def test_synth_bad_inputs():
    with pytest.raises(ValueError):
        synth_signal("square")
    with pytest.raises(ValueError):
        synth_signal("sine", {"freq_hz": 5000.0})
    with pytest.raises(ValueError):
        synth_signal("sine", None, 0.0)


def test_manifest_round_trip():
    entries = standard_manifest(5, seed=3)
    assert parse_manifest(format_manifest(entries)) == entries
    assert all(-5 <= e.snr_db <= 5 for e in entries)
    assert [e.id for e in entries] == [f"syn{i:03d}" for i in range(5)]


def test_manifest_comments_and_blank_lines():
    text = "# header\n\na, x.wav, y.wav, 1.5, 7  # trailing\n"
    assert parse_manifest(text) == [ManifestEntry("a", "x.wav", "y.wav", 1.5, 7)]


@pytest.mark.parametrize("text, line", [
    ("a, b, c, 1.0\n", 1),
    ("a, b, c, 1.0, 1\n\nb, b, c, x, 1\n", 3),
    ("a, b, c, 1.0, 1\na, b, c, 2.0, 2\n", 2),
    ("a, b, c, nan, 1\n", 1),
    ("a, b, c, 1.0, 1.5\n", 1),
])
def test_manifest_errors(text, line):
    with pytest.raises(ManifestError, match=f"line {line}"):
        parse_manifest(text)


def test_load_scene_from_files(tmp_path):
    write_wav(tmp_path / "s1.wav", synth_signal("sine", {"freq_hz": 300.0}, 0.2))
    write_wav(tmp_path / "s2.wav", synth_signal("sine", {"freq_hz": 700.0}, 0.3))
    scene = load_scene(ManifestEntry("f", "s1.wav", "s2.wav", 2.0, 4), base_dir=tmp_path)
    assert len(scene.mixture) == 1600 and scene.id == "f+trunc"
    with pytest.raises(FileNotFoundError, match="missing.wav"):
        load_scene(ManifestEntry("g", "missing.wav", "s2.wav", 0.0, 0), base_dir=tmp_path)


def test_synth_spec_overrides():
    x = load_source("synth:sine?freq_hz=1000&duration_s=0.5", seed=1, slot=1)
    assert len(x) == 4000
    assert np.argmax(np.abs(np.fft.rfft(x.samples))) == 500


def test_shipped_manifests_match_generator():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "manifests"
    assert parse_manifest((root / "standard50.txt").read_text()) == standard_manifest(50, seed=0)
    assert parse_manifest((root / "oracle20.txt").read_text()) == standard_manifest(20, seed=0)
