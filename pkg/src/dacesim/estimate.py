"""
Tap-domain channel estimation from pilots plus data-aided reliable tones.

The observation model on a set of tones ``I`` is ``y_I = C_I h + z_I`` with
``C_I = sqrt(N) diag(x_I) F_I`` and ``F_I`` the rows of the partial Fourier
matrix. Every function here accepts leading batch axes, so a stack of
frames can be solved in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, InputShapeError, SingularSystemError
from .ofdm import Constellation, transform

COND_LIMIT = 1e12
SCORE_DECIMALS = 12


class SelectionMode(str, Enum):
    PILOT_ONLY = "pilot-only"
    TX_PEAK = "tx-peak"
    TX_PEAK_LITERAL = "tx-peak-literal"
    RX_RELIABILITY = "rx-rel"
    RANDOM = "random"


def build_partial_fourier(indices, n_taps: int, n_subcarriers: int) -> np.ndarray:
    """Rows ``(1/sqrt(N)) exp(-j 2 pi n l / N)`` for the tones in ``indices``."""
    idx = np.asarray(indices)
    if n_taps > n_subcarriers:
        raise ConfigError(f"L={n_taps} exceeds N={n_subcarriers}")
    if idx.ndim == 1:
        if np.any((idx < 0) | (idx >= n_subcarriers)):
            raise InputShapeError(f"tone indices outside [0, {n_subcarriers})")
        if len(np.unique(idx)) != len(idx):
            raise InputShapeError("duplicate tone indices")
    return _fourier_rows(idx, n_taps, n_subcarriers)


def _fourier_rows(idx, n_taps, n_subcarriers):
    phase = np.multiply.outer(idx, np.arange(n_taps)) % n_subcarriers
    return np.exp(-2j * np.pi * phase / n_subcarriers) / np.sqrt(n_subcarriers)


@dataclass(frozen=True)
class CovariancePriors:
    r_h: np.ndarray
    sigma2: float

    def __post_init__(self):
        r_h = np.asarray(self.r_h, dtype=complex)
        if r_h.ndim != 2 or r_h.shape[0] != r_h.shape[1]:
            raise ConfigError("channel covariance must be square")
        if not np.allclose(r_h, r_h.conj().T, atol=1e-12):
            raise ConfigError("channel covariance is not Hermitian")
        eig = np.linalg.eigvalsh(r_h)
        if eig.min() < -1e-12 * max(eig.max(), 1.0):
            raise ConfigError("channel covariance is not positive semidefinite")
        object.__setattr__(self, "r_h", r_h)

    @classmethod
    def from_pdp(cls, weights, sigma2: float) -> "CovariancePriors":
        return cls(np.diag(np.asarray(weights, dtype=float)), sigma2)


@dataclass(frozen=True)
class StackedSystem:
    """Pilot-plus-reliable-tone observation system, rows sorted by tone."""

    indices: np.ndarray   # (..., R)
    x_sel: np.ndarray     # (..., R)
    y_sel: np.ndarray     # (..., R)
    c_matrix: np.ndarray  # (..., R, L)

    @property
    def n_rows(self) -> int:
        return self.c_matrix.shape[-2]


def stack_system(y, pilot_indices, pilot_symbols, reliable_indices=(), reliable_symbols=(),
                 n_taps: int = 16, n_subcarriers: int | None = None, reliable_mask=None) -> StackedSystem:
    """Assemble ``y_rp``, ``x_rp`` and ``C_rp`` from pilots ``p`` and reliable
    data tones ``r``.

    ``y`` holds all ``N`` received tones on its last axis. Reliable rows with
    ``reliable_mask == False`` are zeroed so they add nothing to the normal
    equations (used for erasures and threshold selection in batches).
    """
    y = np.asarray(y)
    n = y.shape[-1] if n_subcarriers is None else n_subcarriers
    p = np.asarray(pilot_indices)
    r = np.asarray(reliable_indices, dtype=int)
    xr = np.asarray(reliable_symbols, dtype=complex)
    xp = np.asarray(pilot_symbols, dtype=complex)
    mask = None if reliable_mask is None else np.asarray(reliable_mask, dtype=bool)
    # the system matrix only depends on the tone choice, so it keeps the
    # (possibly smaller) batch shape of the selection, not that of ``y``
    sel_batch = np.broadcast_shapes(r.shape[:-1], xr.shape[:-1], xp.shape[:-1],
                                    () if mask is None else mask.shape[:-1])
    batch = np.broadcast_shapes(y.shape[:-1], sel_batch)
    if r.size and np.any(r[..., :, None] == p):
        raise InputShapeError("reliable tones overlap the pilot comb")
    p_b = np.broadcast_to(p, sel_batch + p.shape)
    xp_b = np.broadcast_to(xp, sel_batch + p.shape)
    r_b = np.broadcast_to(r, sel_batch + r.shape[-1:])
    xr_b = np.broadcast_to(xr, sel_batch + r.shape[-1:])
    idx = np.concatenate([p_b, r_b], axis=-1)
    x = np.concatenate([xp_b, xr_b], axis=-1)
    order = np.argsort(idx, axis=-1, kind="stable")
    idx = np.take_along_axis(idx, order, axis=-1)
    x = np.take_along_axis(x, order, axis=-1)
    y_sel = np.take_along_axis(np.broadcast_to(y, batch + y.shape[-1:]),
                               np.broadcast_to(idx, batch + idx.shape[-1:]), axis=-1)
    c = x[..., None] * np.sqrt(n) * _fourier_rows(idx, n_taps, n)
    if mask is not None:
        keep = np.concatenate(
            [np.ones(sel_batch + p.shape, dtype=bool),
             np.broadcast_to(mask, sel_batch + r.shape[-1:])], axis=-1)
        keep = np.take_along_axis(keep, order, axis=-1)
        c = c * keep[..., None]
        y_sel = y_sel * keep
    return StackedSystem(idx, x, y_sel, c)


def _gram(c):
    return np.conj(np.swapaxes(c, -1, -2)) @ c


def _project(c, y):
    return (np.conj(np.swapaxes(c, -1, -2)) @ y[..., None])[..., 0]


def _condition(mat):
    eig = np.linalg.eigvalsh(mat)
    lo, hi = eig[..., 0], eig[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(lo > 0, hi / np.where(lo > 0, lo, 1.0), np.inf)


def ls_estimate(sys: StackedSystem, check: bool = True) -> np.ndarray:
    """Least-squares taps ``(C^H C)^-1 C^H y``."""
    g = _gram(sys.c_matrix)
    if check:
        cond = _condition(g)
        bad = cond > COND_LIMIT
        if np.any(bad):
            first = np.argwhere(np.broadcast_to(bad, cond.shape))[0] if cond.ndim else ()
            where = sys.indices[tuple(first)] if sys.indices.ndim > 1 else sys.indices
            raise SingularSystemError(
                f"normal matrix is singular (cond {float(np.max(cond)):.3g}) for tones {where.tolist()}",
                indices=where)
    b = _project(sys.c_matrix, sys.y_sel)
    g_b = np.broadcast_to(g, b.shape[:-1] + g.shape[-2:])
    return np.linalg.solve(g_b, b[..., None])[..., 0]


def lmmse_estimate(sys: StackedSystem, priors: CovariancePriors) -> np.ndarray:
    """Linear MMSE taps ``(R_h^-1 + C^H C / s2)^-1 C^H y / s2`` (zero-mean prior).

    Solved in the algebraically equal form ``(s2 R_h^-1 + C^H C)^-1 C^H y``,
    which stays well conditioned as the noise variance goes to zero.
    """
    if priors.sigma2 <= 0:
        raise ConfigError("LMMSE needs a positive noise variance")
    r_h = priors.r_h
    if _condition(r_h) > COND_LIMIT:
        r_h = r_h + 1e-12 * np.eye(r_h.shape[0])
    r_inv = np.linalg.inv(r_h)
    g = _gram(sys.c_matrix) + priors.sigma2 * r_inv
    b = _project(sys.c_matrix, sys.y_sel)
    g_b = np.broadcast_to(g, b.shape[:-1] + g.shape[-2:])
    return np.linalg.solve(g_b, b[..., None])[..., 0]


def peak_scores(grid_row, data_indices, literal: bool = False, peak_signal=None) -> np.ndarray:
    """Per-data-tone peak score used for transmitter-side selection.

    Literal mode scores ``|X_n|^2``. Otherwise the score is the projection of
    tone ``n``'s phasor at the strongest time sample ``k*`` onto the phase of
    that sample, i.e. how much tone ``n`` adds constructively to the peak.
    ``peak_signal`` (e.g. the companded waveform) may be given to locate
    ``k*``; by default it is the unitary inverse transform of ``grid_row``.

    With constant-modulus constellations many tones tie exactly; scores are
    rounded to ``SCORE_DECIMALS`` places so rounding noise cannot break
    those ties and the lowest-index rule applies.
    """
    grid_row = np.asarray(grid_row)
    x = grid_row[..., data_indices]
    if literal:
        return np.abs(x) ** 2
    s = transform(grid_row, "inverse") if peak_signal is None else np.asarray(peak_signal)
    k_star = np.argmax(np.abs(s) ** 2, axis=-1)
    s_peak = np.take_along_axis(s, k_star[..., None], axis=-1)
    u = s_peak / np.abs(s_peak)
    n = grid_row.shape[-1]
    k_idx = k_star[..., None] * np.asarray(data_indices)
    osc = np.exp(2j * np.pi * (k_idx % n) / n)
    return np.round(np.real(x * osc * np.conj(u)), SCORE_DECIMALS)


def top_k(scores, data_indices, count: int) -> np.ndarray:
    """Tones with the ``count`` highest scores, ties to the lowest index,
    returned in ascending tone order."""
    order = np.argsort(-np.asarray(scores), axis=-1, kind="stable")[..., :count]
    return np.sort(np.asarray(data_indices)[order], axis=-1)


def select_peak_carriers(grid_row, data_indices, count: int, mode=SelectionMode.TX_PEAK,
                         threshold: float | None = None, peak_signal=None) -> np.ndarray:
    """Transmitter-side reliable tones for one antenna's frequency row.

    With ``threshold`` set only tones scoring strictly above it qualify, so
    fewer than ``count`` tones may come back (single frames only).
    """
    mode = SelectionMode(mode)
    if mode not in (SelectionMode.TX_PEAK, SelectionMode.TX_PEAK_LITERAL):
        raise ConfigError(f"{mode.value} is not a transmitter-side selection")
    data_indices = np.asarray(data_indices)
    if count > data_indices.size:
        raise InputShapeError(f"cannot pick {count} of {data_indices.size} data tones")
    scores = peak_scores(grid_row, data_indices, mode is SelectionMode.TX_PEAK_LITERAL, peak_signal)
    if threshold is None:
        return top_k(scores, data_indices, count)
    if scores.ndim != 1:
        raise InputShapeError("threshold selection works on one frame at a time")
    chosen = top_k(scores, data_indices, count)
    keep = scores[np.searchsorted(data_indices, chosen)] > threshold
    return chosen[keep]


def reliability(eq_syms, c: Constellation, sigma2: float) -> np.ndarray:
    """Gap between the second-nearest and nearest constellation distances,
    in units of the noise standard deviation."""
    d = np.sort(np.abs(np.asarray(eq_syms)[..., None] - c.points), axis=-1)
    scale = np.sqrt(sigma2) if sigma2 > 0 else 1.0
    return (d[..., 1] - d[..., 0]) / scale


def select_reliable_rx(eq_syms, data_indices, c: Constellation, sigma2: float, count: int):
    """Receiver-side selection of the ``count`` most reliable data tones.

    ``eq_syms`` are the equalized symbols on ``data_indices``. Returns the
    selected tone indices (ascending) and the hard decisions on them.
    """
    eq_syms = np.asarray(eq_syms)
    data_indices = np.asarray(data_indices)
    if count > data_indices.size:
        raise InputShapeError(f"cannot pick {count} of {data_indices.size} data tones")
    rel = reliability(eq_syms, c, sigma2)
    chosen = top_k(rel, data_indices, count)
    pos = np.searchsorted(data_indices, chosen)
    picked = np.take_along_axis(eq_syms, pos, axis=-1)
    d = np.abs(picked[..., None] - c.points) ** 2
    return chosen, c.points[np.argmin(d, axis=-1)]


def select_random(data_indices, count: int, seed=None) -> np.ndarray:
    data_indices = np.asarray(data_indices)
    if count > data_indices.size:
        raise InputShapeError(f"cannot pick {count} of {data_indices.size} data tones")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return np.sort(rng.choice(data_indices, size=count, replace=False))
