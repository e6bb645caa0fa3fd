"""Ground-truth and degraded stand-ins for learned magnitude, sign and group-delay estimators."""
from __future__ import annotations

import math

import numpy as np

from .groupdelay import GdSpec, group_delay
from .scenes import MixtureScene
from .spectral import (MagSpec, PhaseSpec, StftConfig, Waveform, check_same_shape, mag_phase, stft,
                       wrap_phase)
from .trig import MaskSpec, SignSpec, clamp


def oracle_magnitudes(scene: MixtureScene, config: StftConfig | None = None) -> list[MagSpec]:
    config = config or StftConfig(sample_rate_hz=scene.sample_rate_hz)
    return [mag_phase(s, config)[0] for s in scene.sources]


def one_vs_rest(scene: MixtureScene, c: int, config: StftConfig | None = None) -> tuple[Waveform, Waveform]:
    """Source ``c`` and the sum of all other sources."""
    rest = np.sum([s.samples for i, s in enumerate(scene.sources) if i != c], axis=0)
    return scene.sources[c], Waveform(rest, scene.sample_rate_hz)


def oracle_pair_magnitudes(scene: MixtureScene, c: int = 0,
                           config: StftConfig | None = None) -> tuple[MagSpec, MagSpec]:
    config = config or StftConfig(sample_rate_hz=scene.sample_rate_hz)
    src, rest = one_vs_rest(scene, c)
    return mag_phase(src, config)[0], mag_phase(rest, config)[0]


def perturb_magnitudes(mags: list[MagSpec], noise_db: float, seed: int = 0) -> list[MagSpec]:
    """Log-normal degradation: each unit scaled by 10**(n/20), n ~ N(0, noise_db)."""
    if not math.isfinite(noise_db) or noise_db < 0:
        raise ValueError("noise_db must be finite and non-negative")
    if noise_db == 0:
        return [MagSpec(m.data.copy(), m.config) for m in mags]
    out = []
    for i, m in enumerate(mags):
        n = np.random.default_rng([int(seed), i]).normal(0.0, noise_db, size=m.shape)
        out.append(MagSpec(m.data * 10 ** (n / 20), m.config))
    return out


def mask_applied_magnitudes(masks: list[MaskSpec], mag_y: MagSpec) -> list[MagSpec]:
    check_same_shape(mag_y, *masks)
    return [MagSpec(np.maximum(m.data * mag_y.data, 0.0), mag_y.config) for m in masks]


def clamped(mask: MaskSpec, lo=0.0, hi=1.0) -> MaskSpec:
    return MaskSpec(clamp(mask.data, lo, hi), mask.kind, mask.config)


def oracle_signs(true_phase: PhaseSpec | list[PhaseSpec], phase_y: PhaseSpec) -> SignSpec:
    """+1 where the reference source leads the mixture phase (ties included), else -1.

    Given a list, the first entry is the reference source.
    """
    ref = true_phase[0] if isinstance(true_phase, (list, tuple)) else true_phase
    check_same_shape(ref, phase_y)
    d = wrap_phase(ref.data - phase_y.data)
    return SignSpec(np.where(d >= 0, 1, -1), phase_y.config)


def oracle_gd(true_phase: PhaseSpec) -> GdSpec:
    return group_delay(true_phase)


def perturb_gd(gd: GdSpec, concentration: float, seed: int = 0) -> GdSpec:
    """Add von Mises noise with the given concentration; ``inf`` leaves the input unchanged."""
    if not concentration > 0:
        raise ValueError("concentration must be positive")
    if math.isinf(concentration):
        return GdSpec(gd.data.copy(), gd.config)
    noise = np.random.default_rng([int(seed), 7]).vonmises(0.0, concentration, size=gd.shape)
    return GdSpec(wrap_phase(gd.data + noise), gd.config)


def spread_to_concentration(spread: float) -> float:
    """Concentration whose small-angle standard deviation is ``spread`` radians."""
    if spread < 0:
        raise ValueError("spread must be non-negative")
    return math.inf if spread == 0 else 1.0 / spread ** 2


def mixture_spec(scene: MixtureScene, config: StftConfig | None = None):
    config = config or StftConfig(sample_rate_hz=scene.sample_rate_hz)
    return stft(scene.mixture, config)
