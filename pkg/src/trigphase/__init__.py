"""Trigonometric phase reconstruction for two-source STFT-domain separation."""
from .groupdelay import (GdSpec, brute_force_signs, decode_signs, gd_weighted_error, group_delay,
                         reconstruct_with_gd, viterbi_signs)
from .metrics import EvalReport, magnitude_l1, phase_weighted_error, si_sdr, si_sdri
from .misi import MisiResult, misi, mixture_consistency_residual
from .scenes import MixtureScene, mix_at_snr, read_wav, synth_signal, write_wav
from .spectral import (ComplexSpec, MagSpec, PhaseSpec, StftConfig, Waveform, istft, make_window,
                       polar_compose, polar_decompose, stft, wrap_phase)
from .trig import (DeltaSpec, MaskKind, MaskSpec, SignSpec, abs_phase_diff, assemble_phases, clamp,
                   ideal_masks, phase_candidates, psm_from_magnitudes)

__version__ = "0.1.0"
