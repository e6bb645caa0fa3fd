"""Two-candidate phase geometry for a mixture of two (or one-vs-rest) sources.

Given |Y|, |S_c| and |S_notc| the three magnitudes form a triangle in the complex
plane. The law of cosines fixes the absolute angle between each source and the
mixture; only the side (the sign) is ambiguous.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    ComplexSpec,
    MagSpec,
    PhaseSpec,
    StftConfig,
    check_same_shape,
    polar_decompose,
    wrap_phase,
)

DIV_FLOOR = 1e-12
ROUNDING_SLACK = 64 * np.finfo(np.float64).eps


class MaskKind(str, enum.Enum):
    IBM = "IBM"
    IRM = "IRM"
    SMM = "SMM"
    PSM = "PSM"


@dataclass
class DeltaSpec:
    data: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if np.any(self.data < 0) or np.any(self.data > np.pi) or not np.all(np.isfinite(self.data)):
            raise ValueError("phase differences must lie in [0, pi]")

    @property
    def shape(self):
        return self.data.shape


@dataclass
class SignSpec:
    data: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.int8)
        if not np.all((self.data == 1) | (self.data == -1)):
            raise ValueError("signs must be -1 or +1")

    @property
    def shape(self):
        return self.data.shape


@dataclass
class MaskSpec:
    data: np.ndarray
    kind: MaskKind
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.kind = MaskKind(self.kind)
        d = self.data
        if self.kind is MaskKind.IBM and not np.all((d == 0) | (d == 1)):
            raise ValueError("IBM entries must be 0 or 1")
        if self.kind is MaskKind.IRM and (np.any(d < 0) or np.any(d > 1 + 1e-12)):
            raise ValueError("IRM entries must lie in [0, 1]")
        if self.kind is MaskKind.SMM and np.any(d < 0):
            raise ValueError("SMM entries must be non-negative")

    @property
    def shape(self):
        return self.data.shape


def clamp(x, a, b):
    """max(a, min(b, x)), elementwise."""
    if a > b:
        raise ValueError(f"clamp: lower bound {a} exceeds upper bound {b}")
    out = np.maximum(a, np.minimum(b, x))
    return float(out) if np.ndim(out) == 0 else out


def abs_phase_diff(mag_y, mag_a, mag_b):
    """Angle between source ``a`` and the mixture from the three side lengths.

    Cosine arguments outside [-1, 1] (no valid triangle) are replaced by 1, which
    yields 0, i.e. the mixture phase. Same when |Y| or |A| is below 1e-12.
    """
    y = np.asarray(mag_y, dtype=np.float64)
    a = np.asarray(mag_a, dtype=np.float64)
    b = np.asarray(mag_b, dtype=np.float64)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("abs_phase_diff: non-finite magnitude")
    if np.any(y < 0) or np.any(a < 0) or np.any(b < 0):
        raise ValueError("abs_phase_diff: magnitudes must be non-negative")
    degenerate = (y < DIV_FLOOR) | (a < DIV_FLOOR)
    num = y ** 2 + a ** 2 - b ** 2
    den = 2.0 * y * a
    # collinear triangles (always the case at DC / Nyquist, and for sum-constrained
    # magnitudes) land within rounding of +-1; those are snapped onto the bound,
    # only genuinely invalid ones fall back to 1
    slack = ROUNDING_SLACK * (y ** 2 + a ** 2 + b ** 2)
    valid = ~degenerate & (np.abs(num) <= den + slack)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_arg = np.where(valid, np.clip(num / np.where(valid, den, 1.0), -1.0, 1.0), 1.0)
    cos_arg = np.where(valid & (np.abs(num - den) <= slack), 1.0, cos_arg)
    cos_arg = np.where(valid & (np.abs(num + den) <= slack), -1.0, cos_arg)
    out = np.arccos(cos_arg)
    return float(out) if out.ndim == 0 else out


def abs_phase_diff_spec(mag_y: MagSpec, mag_a: MagSpec, mag_b: MagSpec) -> DeltaSpec:
    check_same_shape(mag_y, mag_a, mag_b)
    return DeltaSpec(abs_phase_diff(mag_y.data, mag_a.data, mag_b.data), mag_y.config)


def delta_pair(mag_y: MagSpec, mag_c: MagSpec, mag_notc: MagSpec) -> tuple[DeltaSpec, DeltaSpec]:
    """Phase offsets of source c and of the rest, from the same triangle."""
    return abs_phase_diff_spec(mag_y, mag_c, mag_notc), abs_phase_diff_spec(mag_y, mag_notc, mag_c)


def phase_candidates(y, mag_a, mag_b):
    """The two phases of source ``a`` consistent with |Y|, |A|, |B|: (angle+delta, angle-delta).

    The companion source takes the opposite pairing: ``phase_candidates(y, mag_b, mag_a)``
    gives (angle+delta', angle-delta') and the plus candidate of ``a`` goes with the
    minus candidate of ``b``.
    """
    y = np.asarray(y, dtype=np.complex128)
    if not np.all(np.isfinite(y)):
        raise ValueError("phase_candidates: non-finite mixture value")
    d = abs_phase_diff(np.abs(y), mag_a, mag_b)
    ang = np.angle(y)
    return wrap_phase(ang + d), wrap_phase(ang - d)


def assemble_phases(phase_y: PhaseSpec, delta_c: DeltaSpec, delta_notc: DeltaSpec,
                    sign: SignSpec) -> tuple[PhaseSpec, PhaseSpec]:
    check_same_shape(phase_y, delta_c, delta_notc, sign)
    g = sign.data.astype(np.float64)
    theta_c = wrap_phase(phase_y.data + g * delta_c.data)
    theta_notc = wrap_phase(phase_y.data - g * delta_notc.data)
    return PhaseSpec(theta_c, phase_y.config), PhaseSpec(theta_notc, phase_y.config)


def _safe_div(num, den):
    ok = den >= DIV_FLOOR
    return np.where(ok, num / np.where(ok, den, 1.0), 0.0)


def ideal_masks(sources: list[ComplexSpec], mixture: ComplexSpec, kind) -> list[MaskSpec]:
    kind = MaskKind(kind)
    check_same_shape(mixture, *sources)
    cfg = mixture.config
    mags = np.stack([np.abs(s.data) for s in sources])
    mag_y = np.abs(mixture.data)

    if kind is MaskKind.IBM:
        # argmax returns the first maximum, i.e. ties go to the lowest source index
        winner = np.argmax(mags, axis=0)
        return [MaskSpec((winner == c).astype(np.float64), kind, cfg) for c in range(len(sources))]
    if kind is MaskKind.IRM:
        total = mags.sum(axis=0)
        return [MaskSpec(np.minimum(_safe_div(m, total), 1.0), kind, cfg) for m in mags]
    if kind is MaskKind.SMM:
        return [MaskSpec(_safe_div(m, mag_y), kind, cfg) for m in mags]
    _, phase_y = polar_decompose(mixture)
    out = []
    for s, m in zip(sources, mags):
        cos_term = np.cos(np.angle(s.data) - phase_y.data)
        out.append(MaskSpec(_safe_div(m * cos_term, mag_y), kind, cfg))
    return out


def psm_from_magnitudes(mag_a: MagSpec, delta: DeltaSpec, mag_y: MagSpec) -> MaskSpec:
    """Phase-sensitive mask assembled from magnitudes alone; may be negative or exceed 1."""
    check_same_shape(mag_a, delta, mag_y)
    return MaskSpec(_safe_div(mag_a.data * np.cos(delta.data), mag_y.data), MaskKind.PSM, mag_a.config)
