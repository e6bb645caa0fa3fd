"""Group delay along frequency and per-frame sign decoding by dynamic programming.

For each frame the sign g_f in {+1, -1} picks one of two hypotheses per bin:
    source c:    angle(Y_f) + g_f * delta_c_f
    rest (notc): angle(Y_f) - g_f * delta_notc_f
and the decoder maximises the summed cosine agreement between the hypothesised
phase increments and a target group delay for both sources. The chain has two
states per bin, so one frame costs O(4F).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import MagSpec, PhaseSpec, StftConfig, check_same_shape, wrap_phase
from .trig import DeltaSpec, SignSpec, assemble_phases

BRUTE_FORCE_MAX_F = 20
# state 0 is g=+1, state 1 is g=-1
_STATE_SIGN = np.array([1.0, -1.0])


@dataclass
class GdSpec:
    data: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] != self.config.n_freq - 1:
            raise ValueError(f"group delay must be (T, {self.config.n_freq - 1}), got {self.data.shape}")
        if np.any(self.data > np.pi) or np.any(self.data <= -np.pi):
            raise ValueError("group delay entries must lie in (-pi, pi]")

    @property
    def shape(self):
        return self.data.shape


def _group_delay_array(phase: np.ndarray) -> np.ndarray:
    if phase.shape[-1] < 2:
        raise ValueError("group delay needs at least two frequency bins")
    return wrap_phase(np.diff(phase, axis=-1))


def group_delay(phase: PhaseSpec) -> GdSpec:
    return GdSpec(_group_delay_array(phase.data), phase.config)


def _transition_scores(phase_y, delta_c, delta_notc, gd_c, gd_notc):
    """(..., F-1, 2, 2) scores; entry [f, s, s2] scores state s at bin f then s2 at f+1."""
    g = _STATE_SIGN
    hyp_c = phase_y[..., None] + g * delta_c[..., None]        # (..., F, 2)
    hyp_n = phase_y[..., None] - g * delta_notc[..., None]
    step_c = hyp_c[..., 1:, None, :] - hyp_c[..., :-1, :, None] - gd_c[..., None, None]
    step_n = hyp_n[..., 1:, None, :] - hyp_n[..., :-1, :, None] - gd_notc[..., None, None]
    return np.cos(wrap_phase(step_c)) + np.cos(wrap_phase(step_n))


def _check_row_lengths(phase_y, delta_c, delta_notc, gd_c, gd_notc):
    n_f = phase_y.shape[-1]
    if delta_c.shape != phase_y.shape or delta_notc.shape != phase_y.shape:
        raise ValueError(f"phase/delta length mismatch: {phase_y.shape}, {delta_c.shape}, {delta_notc.shape}")
    want = phase_y.shape[:-1] + (max(n_f - 1, 0),)
    if gd_c.shape != want or gd_notc.shape != want:
        raise ValueError(f"group delay must have shape {want}, got {gd_c.shape} and {gd_notc.shape}")


def _viterbi_batch(phase_y, delta_c, delta_notc, gd_c, gd_notc):
    """Decode every row of (T, F) inputs at once.

    Returns signs (T, F), scores (T,) and flip margins (T,): the score lead of the
    decoded sequence over its global sign flip.
    """
    n_t, n_f = phase_y.shape
    if n_f == 1:
        return np.ones((n_t, 1), dtype=np.int8), np.zeros(n_t), np.zeros(n_t)
    trans = _transition_scores(phase_y, delta_c, delta_notc, gd_c, gd_notc)
    value = np.zeros((n_t, 2))
    back = np.zeros((n_t, n_f, 2), dtype=np.int8)
    for f in range(n_f - 1):
        cand = value[:, :, None] + trans[:, f]                 # (T, prev, next)
        # >= keeps the +1 predecessor on exact ties
        pick_minus = cand[:, 1, :] > cand[:, 0, :]
        back[:, f + 1] = pick_minus
        value = np.where(pick_minus, cand[:, 1, :], cand[:, 0, :])
    state = (value[:, 1] > value[:, 0]).astype(np.int8)
    scores = value[np.arange(n_t), state]
    states = np.empty((n_t, n_f), dtype=np.int8)
    states[:, -1] = state
    rows = np.arange(n_t)
    for f in range(n_f - 1, 0, -1):
        states[:, f - 1] = back[rows, f, states[:, f]]
    signs = np.where(states == 0, 1, -1).astype(np.int8)
    margins = scores - _path_scores(-signs, phase_y, delta_c, delta_notc, gd_c, gd_notc)
    return signs, scores, margins


def _path_scores(signs, phase_y, delta_c, delta_notc, gd_c, gd_notc):
    g = signs.astype(np.float64)
    hc = phase_y + g * delta_c
    hn = phase_y - g * delta_notc
    return (np.cos(np.diff(hc, axis=-1) - gd_c).sum(axis=-1)
            + np.cos(np.diff(hn, axis=-1) - gd_notc).sum(axis=-1))


def viterbi_signs(phase_y_row, delta_c_row, delta_notc_row, gd_c_row, gd_notc_row):
    """Best sign sequence for one frame. Returns (signs, score)."""
    rows = [np.atleast_1d(np.asarray(r, dtype=np.float64)) for r in
            (phase_y_row, delta_c_row, delta_notc_row, gd_c_row, gd_notc_row)]
    if rows[0].ndim != 1:
        raise ValueError("viterbi_signs expects 1-D rows")
    _check_row_lengths(*rows)
    signs, scores, _ = _viterbi_batch(*(r[None, :] for r in rows))
    return signs[0], float(scores[0])


def assignment_score(signs, phase_y_row, delta_c_row, delta_notc_row, gd_c_row, gd_notc_row) -> float:
    """Objective value of one given sign sequence (e.g. the true one)."""
    rows = (np.asarray(r, dtype=np.float64) for r in (phase_y_row, delta_c_row, delta_notc_row, gd_c_row, gd_notc_row))
    return float(_path_scores(np.asarray(signs), *rows))


def all_assignment_scores(phase_y_row, delta_c_row, delta_notc_row, gd_c_row, gd_notc_row,
                          chunk=1 << 15):
    """Scores of all 2^F assignments, in lexicographically descending order (+1 > -1, bin 0 first)."""
    phase_y_row, delta_c_row, delta_notc_row, gd_c_row, gd_notc_row = (
        np.asarray(r, dtype=np.float64) for r in (phase_y_row, delta_c_row, delta_notc_row, gd_c_row, gd_notc_row))
    n_f = phase_y_row.size
    if n_f > BRUTE_FORCE_MAX_F:
        raise ValueError(f"brute force limited to F <= {BRUTE_FORCE_MAX_F}, got {n_f}")
    _check_row_lengths(phase_y_row, delta_c_row, delta_notc_row, gd_c_row, gd_notc_row)
    shifts = np.arange(n_f - 1, -1, -1)
    total = 1 << n_f
    out = np.empty(total)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        g = np.where((idx[:, None] >> shifts) & 1, -1.0, 1.0)
        hc = phase_y_row + g * delta_c_row
        hn = phase_y_row - g * delta_notc_row
        out[start:start + idx.size] = (np.cos(wrap_phase(np.diff(hc, axis=1) - gd_c_row)).sum(axis=1)
                                       + np.cos(wrap_phase(np.diff(hn, axis=1) - gd_notc_row)).sum(axis=1))
    return out


def index_to_signs(index: int, n_f: int) -> np.ndarray:
    bits = (index >> np.arange(n_f - 1, -1, -1)) & 1
    return np.where(bits, -1, 1).astype(np.int8)


def brute_force_signs(phase_y_row, delta_c_row, delta_notc_row, gd_c_row, gd_notc_row):
    """Exhaustive maximiser; exact ties go to the lexicographically largest assignment."""
    scores = all_assignment_scores(phase_y_row, delta_c_row, delta_notc_row, gd_c_row, gd_notc_row)
    best = int(np.argmax(scores))
    return index_to_signs(best, np.asarray(phase_y_row).size), float(scores[best])


@dataclass
class SignDecoding:
    signs: SignSpec
    scores: np.ndarray     # objective per frame
    margins: np.ndarray    # best score minus score of the globally flipped signs, per frame

    def tie_fraction(self, tol=1e-6) -> float:
        """Share of frames whose decoded signs barely beat their global flip."""
        return float(np.mean(self.margins <= tol * np.maximum(1.0, np.abs(self.scores))))


def decode_signs(phase_y: PhaseSpec, delta_c: DeltaSpec, delta_notc: DeltaSpec,
                 gd_c: GdSpec, gd_notc: GdSpec) -> SignDecoding:
    check_same_shape(phase_y, delta_c, delta_notc)
    check_same_shape(gd_c, gd_notc)
    _check_row_lengths(phase_y.data, delta_c.data, delta_notc.data, gd_c.data, gd_notc.data)
    signs, scores, margins = _viterbi_batch(phase_y.data, delta_c.data, delta_notc.data,
                                            gd_c.data, gd_notc.data)
    return SignDecoding(SignSpec(signs, phase_y.config), scores, margins)


def reconstruct_with_gd(phase_y: PhaseSpec, delta_c: DeltaSpec, delta_notc: DeltaSpec,
                        gd_c: GdSpec, gd_notc: GdSpec) -> tuple[PhaseSpec, PhaseSpec]:
    dec = decode_signs(phase_y, delta_c, delta_notc, gd_c, gd_notc)
    return assemble_phases(phase_y, delta_c, delta_notc, dec.signs)


def gd_weighted_error(mag_ref: MagSpec, gd_est: GdSpec, gd_ref: GdSpec) -> float:
    """Sum over units of |S_{t,f+1}| * (1 - cos(gd_est - gd_ref)) / 2."""
    check_same_shape(gd_est, gd_ref)
    if mag_ref.shape[0] != gd_ref.shape[0] or mag_ref.shape[1] != gd_ref.shape[1] + 1:
        raise ValueError(f"magnitude shape {mag_ref.shape} does not match group delay {gd_ref.shape}")
    w = mag_ref.data[:, 1:]
    return float(np.sum(w * (1.0 - np.cos(gd_est.data - gd_ref.data)) / 2.0))
