"""Multiple input spectrogram inversion with equal error distribution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    MagSpec,
    PhaseSpec,
    StftConfig,
    Waveform,
    check_same_shape,
    istft,
    polar_compose,
    polar_decompose,
    stft,
)


@dataclass
class MisiResult:
    phases: list[PhaseSpec]
    waveforms: list[Waveform]
    residual_energy: np.ndarray
    K: int


def misi(y: Waveform, mags: list[MagSpec], start_phases: list[PhaseSpec], K: int = 5,
         config: StftConfig | None = None) -> MisiResult:
    """Run exactly ``K`` MISI iterations with magnitudes held fixed.

    Each iteration resynthesises every source from its magnitude and current phase,
    hands each one ``1/C`` of the mixture error, and takes the new phase from the
    STFT of the corrected signal. The returned waveforms include the last error
    share, so they add up to ``y``. With ``K == 0`` the starting phases are returned
    untouched and the waveforms are plain resyntheses.
    """
    config = config or mags[0].config
    if len(mags) != len(start_phases):
        raise ValueError(f"{len(mags)} magnitudes but {len(start_phases)} starting phases")
    if len(mags) < 2:
        raise ValueError("MISI needs at least two sources")
    if K < 0:
        raise ValueError("K must be >= 0")
    check_same_shape(*mags, *start_phases)
    n = len(y)
    expected_frames = config.n_frames(n)
    if mags[0].shape[0] != expected_frames:
        raise ValueError(f"spectrogram has {mags[0].shape[0]} frames, mixture of {n} samples "
                         f"needs {expected_frames}")
    n_src = len(mags)

    phases = list(start_phases)
    if K == 0:
        waves = [istft(polar_compose(a, p), config, n) for a, p in zip(mags, phases)]
        return MisiResult(phases, waves, np.zeros(0), 0)

    residuals = []
    for _ in range(K):
        est = [istft(polar_compose(a, p), config, n).samples for a, p in zip(mags, phases)]
        err = y.samples - np.sum(est, axis=0)
        residuals.append(float(err @ err))
        corrected = [e + err / n_src for e in est]
        phases = [polar_decompose(stft(Waveform(c, y.sample_rate_hz), config))[1] for c in corrected]
    waves = [Waveform(c, y.sample_rate_hz) for c in corrected]
    return MisiResult(phases, waves, np.asarray(residuals), K)


def mixture_consistency_residual(y: Waveform, est: list[Waveform]) -> float:
    """Energy of ``y - sum(est)``."""
    for e in est:
        if len(e) != len(y):
            raise ValueError(f"length mismatch: mixture {len(y)}, estimate {len(e)}")
    r = y.samples - np.sum([e.samples for e in est], axis=0)
    return float(r @ r)
