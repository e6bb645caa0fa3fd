import numpy as np
import pytest

from trigphase.scenes import load_scene, mix_at_snr, standard_manifest, synth_signal
from trigphase.spectral import StftConfig, Waveform


@pytest.fixture
def cfg():
    return StftConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def two_tone_scene():
    s1 = synth_signal("sine", {"freq_hz": 440.0, "amplitude": 0.4}, 0.5, seed=1)
    s2 = synth_signal("sine", {"freq_hz": 470.0, "amplitude": 0.4, "phase": 1.0}, 0.5, seed=2)
    return mix_at_snr(s1, s2, 0.0, seed=3, scene_id="tones")


@pytest.fixture(scope="session")
def harmonic_scenes():
    return [load_scene(e) for e in standard_manifest(6, seed=11)]


def random_waveform(rng, n=8000, rate=8000):
    return Waveform(rng.standard_normal(n), rate)
