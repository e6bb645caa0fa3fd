"""Per-scene reconstruction: estimator -> phase method -> waveforms -> evaluation record."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .groupdelay import decode_signs, group_delay, gd_weighted_error
from .metrics import EvalRecord, magnitude_l1, make_record, phase_weighted_error
from .misi import misi
from .oracles import (
    clamped,
    mask_applied_magnitudes,
    oracle_gd,
    oracle_signs,
    perturb_gd,
    perturb_magnitudes,
    spread_to_concentration,
)
from .scenes import MixtureScene
from .spectral import MagSpec, PhaseSpec, StftConfig, Waveform, istft, polar_compose, polar_decompose, stft, wrap_phase
from .trig import MaskKind, assemble_phases, delta_pair, ideal_masks

METHODS = ("mixture_phase", "misi", "gd_viterbi", "oracle_sign", "candidates_best")
START_PHASES = ("mixture", "gd_viterbi", "oracle_sign")
ESTIMATORS = ("oracle", "perturbed", "irm_applied", "psm_clamped_applied")
GD_SOURCES = ("oracle", "perturbed")


class ConfigError(ValueError):
    pass


def _split_param(value: str, allowed, what):
    name, _, arg = value.partition(":")
    if name not in allowed:
        raise ConfigError(f"unknown {what} {value!r}; choose from {allowed}")
    if name == "perturbed":
        try:
            x = float(arg)
        except ValueError:
            raise ConfigError(f"{what} {value!r} needs a number, e.g. perturbed:3") from None
        if not math.isfinite(x) or x < 0:
            raise ConfigError(f"{what} {value!r}: parameter must be finite and >= 0")
        return name, x
    if arg:
        raise ConfigError(f"{what} {name!r} takes no parameter")
    return name, None


@dataclass
class RunConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    method: str = "mixture_phase"
    misi_k: int = 5
    starting_phase: str = "mixture"
    estimator: str = "oracle"
    gd_source: str = "oracle"
    seed: int = 0
    output: str | None = None

    def __post_init__(self):
        if isinstance(self.stft, dict):
            self.stft = StftConfig(**self.stft)
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.starting_phase not in START_PHASES:
            raise ConfigError(f"unknown starting phase {self.starting_phase!r}; choose from {START_PHASES}")
        if self.method != "misi" and self.starting_phase != "mixture":
            raise ConfigError(f"starting_phase only applies to misi, not {self.method!r}")
        if int(self.misi_k) != self.misi_k or self.misi_k < 0:
            raise ConfigError("misi_k must be a non-negative integer")
        _split_param(self.estimator, ESTIMATORS, "estimator")
        _split_param(self.gd_source, GD_SOURCES, "gd source")

    @property
    def uses_gd(self) -> bool:
        return self.method == "gd_viterbi" or (self.method == "misi" and self.starting_phase == "gd_viterbi")

    @property
    def label(self) -> str:
        name = self.method
        if self.method == "misi":
            name += f"-{self.misi_k}"
            if self.starting_phase != "mixture":
                name += f"@{self.starting_phase}"
        name += f"|{self.estimator}"
        if self.uses_gd:
            name += f"|gd={self.gd_source}"
        return name

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _stream_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


@dataclass
class Reconstruction:
    waveforms: list[Waveform]
    phases: list[PhaseSpec]
    mags: list[MagSpec]
    misi_residuals: list[float] = field(default_factory=list)
    tie_fraction: float | None = None


class _Analysis:
    """STFT views of a scene shared by every method."""

    def __init__(self, scene: MixtureScene, config: StftConfig):
        self.scene = scene
        self.config = config
        self.mix_spec = stft(scene.mixture, config)
        self.mag_y, self.phase_y = polar_decompose(self.mix_spec)
        self.src_specs = [stft(s, config) for s in scene.sources]
        polar = [polar_decompose(s) for s in self.src_specs]
        self.src_mags = [p[0] for p in polar]
        self.src_phases = [p[1] for p in polar]

    def pair(self, c: int):
        """Complex spectra of source c and of the rest."""
        if len(self.src_specs) == 2:
            return self.src_specs[c], self.src_specs[1 - c]
        rest = np.sum([s.data for i, s in enumerate(self.src_specs) if i != c], axis=0)
        return self.src_specs[c], type(self.mix_spec)(rest, self.config)


def _estimate_pair(an: _Analysis, c: int, run: RunConfig, seed: int) -> tuple[MagSpec, MagSpec]:
    s_c, s_n = an.pair(c)
    name, arg = _split_param(run.estimator, ESTIMATORS, "estimator")
    true = [MagSpec(np.abs(s_c.data), an.config), MagSpec(np.abs(s_n.data), an.config)]
    if name == "oracle":
        return true[0], true[1]
    if name == "perturbed":
        a, b = perturb_magnitudes(true, arg, _stream_seed(seed, c))
        return a, b
    kind = MaskKind.IRM if name == "irm_applied" else MaskKind.PSM
    masks = ideal_masks([s_c, s_n], an.mix_spec, kind)
    if kind is MaskKind.PSM:
        masks = [clamped(m, 0.0, 1.0) for m in masks]
    a, b = mask_applied_magnitudes(masks, an.mag_y)
    return a, b


def _pair_phases(an: _Analysis, c: int, mode: str, a_c: MagSpec, a_n: MagSpec, run: RunConfig,
                 seed: int) -> tuple[PhaseSpec, PhaseSpec, float | None]:
    if mode == "mixture":
        return an.phase_y, an.phase_y, None
    s_c, s_n = an.pair(c)
    th_c = polar_decompose(s_c)[1]
    th_n = polar_decompose(s_n)[1]
    d_c, d_n = delta_pair(an.mag_y, a_c, a_n)
    if mode == "oracle_sign":
        p_c, p_n = assemble_phases(an.phase_y, d_c, d_n, oracle_signs(th_c, an.phase_y))
        return p_c, p_n, None
    if mode == "candidates_best":
        out = []
        for d, th in ((d_c, th_c), (d_n, th_n)):
            plus = wrap_phase(an.phase_y.data + d.data)
            minus = wrap_phase(an.phase_y.data - d.data)
            take_plus = np.abs(wrap_phase(plus - th.data)) <= np.abs(wrap_phase(minus - th.data))
            out.append(PhaseSpec(np.where(take_plus, plus, minus), an.config))
        return out[0], out[1], None
    # gd_viterbi
    gd_c, gd_n = oracle_gd(th_c), oracle_gd(th_n)
    name, arg = _split_param(run.gd_source, GD_SOURCES, "gd source")
    if name == "perturbed":
        kappa = spread_to_concentration(arg)
        gd_c = perturb_gd(gd_c, kappa, _stream_seed(seed, c, 1))
        gd_n = perturb_gd(gd_n, kappa, _stream_seed(seed, c, 2))
    dec = decode_signs(an.phase_y, d_c, d_n, gd_c, gd_n)
    p_c, p_n = assemble_phases(an.phase_y, d_c, d_n, dec.signs)
    return p_c, p_n, dec.tie_fraction()


def reconstruct(scene: MixtureScene, run: RunConfig, analysis: _Analysis | None = None) -> Reconstruction:
    an = analysis or _Analysis(scene, run.stft)
    seed = _stream_seed(run.seed, scene.seed)
    n_src = len(scene.sources)
    if run.method == "misi":
        mode = run.starting_phase
    else:
        mode = "mixture" if run.method == "mixture_phase" else run.method

    mags, phases, ties = [], [], []
    pairs = [0] if n_src == 2 else range(n_src)
    for c in pairs:
        a_c, a_n = _estimate_pair(an, c, run, seed)
        p_c, p_n, tie = _pair_phases(an, c, mode, a_c, a_n, run, seed)
        if tie is not None:
            ties.append(tie)
        if n_src == 2:
            mags, phases = [a_c, a_n], [p_c, p_n]
        else:
            mags.append(a_c)
            phases.append(p_c)
    tie_fraction = float(np.mean(ties)) if ties else None

    n = len(scene.mixture)
    if run.method == "misi":
        res = misi(scene.mixture, mags, phases, run.misi_k, an.config)
        return Reconstruction(res.waveforms, res.phases, mags, res.residual_energy.tolist(), tie_fraction)
    waves = [istft(polar_compose(a, p), an.config, n) for a, p in zip(mags, phases)]
    return Reconstruction(waves, phases, mags, [], tie_fraction)


def evaluate(scene: MixtureScene, run: RunConfig, analysis: _Analysis | None = None) -> tuple[Reconstruction, EvalRecord]:
    an = analysis or _Analysis(scene, run.stft)
    rec = reconstruct(scene, run, an)
    phase_err = sum(phase_weighted_error(m, p, t) for m, p, t in zip(an.src_mags, rec.phases, an.src_phases))
    gd_err = sum(gd_weighted_error(m, group_delay(p), group_delay(t))
                 for m, p, t in zip(an.src_mags, rec.phases, an.src_phases))
    mag_err = sum(magnitude_l1(a, m) for a, m in zip(rec.mags, an.src_mags))
    record = make_record(
        scene.id, run.label, rec.waveforms, scene.sources, scene.mixture,
        phase_error=phase_err, gd_error=gd_err, magnitude_l1=mag_err,
        misi_residuals=rec.misi_residuals, tie_fraction=rec.tie_fraction,
        uses_ground_truth_phase=run.method in ("oracle_sign", "candidates_best") or
        (run.method == "misi" and run.starting_phase == "oracle_sign") or run.uses_gd,
    )
    return rec, record


def analyse(scene: MixtureScene, config: StftConfig) -> _Analysis:
    return _Analysis(scene, config)
