"""Separation metrics and benchmark report aggregation."""
from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass, field

import numpy as np

from .groupdelay import gd_weighted_error  # noqa: F401  (re-exported as a metric)
from .spectral import MagSpec, PhaseSpec, Waveform, check_same_shape

SI_SDR_SENTINEL_DB = 300.0
REPORT_SCHEMA = 1


def _pair(est, ref):
    e = est.samples if isinstance(est, Waveform) else np.asarray(est, dtype=np.float64)
    r = ref.samples if isinstance(ref, Waveform) else np.asarray(ref, dtype=np.float64)
    if e.shape != r.shape:
        raise ValueError(f"length mismatch: estimate {e.shape}, reference {r.shape}")
    return e, r


def si_sdr(est, ref) -> float:
    """Scale-invariant SDR in dB, no mean removal. ``inf`` for a perfect match."""
    e, r = _pair(est, ref)
    ref_energy = float(r @ r)
    if ref_energy == 0:
        raise ValueError("si_sdr: reference has zero energy")
    target = (float(e @ r) / ref_energy) * r
    noise = e - target
    t_energy = float(target @ target)
    n_energy = float(noise @ noise)
    if n_energy < 1e-30 * t_energy:
        return math.inf
    if t_energy == 0:
        return -math.inf
    return 10 * math.log10(t_energy / n_energy)


def si_sdri(est, ref, mix) -> float:
    return si_sdr(est, ref) - si_sdr(mix, ref)


def phase_weighted_error(mag_ref: MagSpec, phase_est: PhaseSpec, phase_ref: PhaseSpec) -> float:
    check_same_shape(mag_ref, phase_est, phase_ref)
    return float(np.sum(mag_ref.data * (1.0 - np.cos(phase_est.data - phase_ref.data)) / 2.0))


def magnitude_l1(mag_est: MagSpec, mag_ref: MagSpec) -> float:
    check_same_shape(mag_est, mag_ref)
    return float(np.sum(np.abs(mag_est.data - mag_ref.data)))


def capped_db(value: float) -> tuple[float, bool]:
    """JSON-safe dB value: infinities become +/-SI_SDR_SENTINEL_DB with a flag."""
    if math.isinf(value):
        return math.copysign(SI_SDR_SENTINEL_DB, value), True
    return value, False


@dataclass
class EvalRecord:
    scene_id: str
    method: str
    si_sdr_db: list[float]
    si_sdri_db: list[float]
    capped: list[bool]
    phase_error: float | None = None
    gd_error: float | None = None
    magnitude_l1: float | None = None
    misi_residuals: list[float] = field(default_factory=list)
    tie_fraction: float | None = None
    uses_ground_truth_phase: bool = False
    error: str | None = None


def make_record(scene_id, method, estimates, refs, mix, **extra) -> EvalRecord:
    sdr, sdri, capped = [], [], []
    for est, ref in zip(estimates, refs):
        raw = si_sdr(est, ref)
        base = si_sdr(mix, ref)
        v, c1 = capped_db(raw)
        vi, c2 = capped_db(raw - base if not math.isinf(raw) else raw)
        sdr.append(v)
        sdri.append(vi)
        capped.append(c1 or c2)
    return EvalRecord(scene_id, method, sdr, sdri, capped, **extra)


def aggregate(records: list[EvalRecord]) -> dict:
    """Per-method mean/median of per-source SI-SDR(i), excluding capped values."""
    by_method: dict[str, list[EvalRecord]] = {}
    for r in sorted(records, key=lambda r: (r.method, r.scene_id)):
        by_method.setdefault(r.method, []).append(r)
    out = {}
    for method, recs in sorted(by_method.items()):
        ok = [r for r in recs if r.error is None]
        sdr = [v for r in ok for v, c in zip(r.si_sdr_db, r.capped) if not c]
        sdri = [v for r in ok for v, c in zip(r.si_sdri_db, r.capped) if not c]
        out[method] = {
            "n_records": len(recs),
            "n_failed": len(recs) - len(ok),
            "n_capped": sum(c for r in ok for c in r.capped),
            "si_sdr_mean": statistics.fmean(sdr) if sdr else None,
            "si_sdr_median": statistics.median(sdr) if sdr else None,
            "si_sdri_mean": statistics.fmean(sdri) if sdri else None,
            "si_sdri_median": statistics.median(sdri) if sdri else None,
        }
    return out


@dataclass
class EvalReport:
    records: list[EvalRecord]
    config: dict = field(default_factory=dict)

    def sorted_records(self):
        return sorted(self.records, key=lambda r: (r.scene_id, r.method))

    def aggregates(self) -> dict:
        return aggregate(self.records)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "config": self.config,
            "records": [asdict(r) for r in self.sorted_records()],
            "aggregate": self.aggregates(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        if d.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls([EvalRecord(**r) for r in d["records"]], d.get("config", {}))

    CSV_FIELDS = ("scene_id", "method", "source", "si_sdr_db", "si_sdri_db", "capped", "phase_error",
                  "gd_error", "magnitude_l1", "tie_fraction", "error")

    def csv_rows(self):
        for r in self.sorted_records():
            n = max(len(r.si_sdr_db), 1)
            for i in range(n):
                yield {
                    "scene_id": r.scene_id, "method": r.method, "source": i + 1,
                    "si_sdr_db": r.si_sdr_db[i] if r.si_sdr_db else None,
                    "si_sdri_db": r.si_sdri_db[i] if r.si_sdri_db else None,
                    "capped": r.capped[i] if r.capped else None,
                    "phase_error": r.phase_error, "gd_error": r.gd_error,
                    "magnitude_l1": r.magnitude_l1, "tie_fraction": r.tie_fraction, "error": r.error,
                }
