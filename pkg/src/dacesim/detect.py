"""Per-subcarrier linear MMSE detection and error counting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputShapeError
from .ofdm import Constellation, hard_demap, nearest_labels


@dataclass(frozen=True)
class DetectorOutput:
    detected_symbols: np.ndarray  # (..., n_tx, n_data)
    detected_bits: np.ndarray     # (..., n_tx, n_data * bits_per_symbol)
    soft_symbols: np.ndarray      # equalizer output before slicing
    erasures: np.ndarray          # (..., n_data) tones with a singular detection matrix


def mmse_equalize(y, h, sigma2: float):
    """Linear MMSE estimate of the unit-power stream symbols on each tone.

    ``y`` is ``(..., T, n_rx)`` and ``h`` is ``(..., T, n_rx, n_tx)``, the
    physical channel of streams sent with power ``1/n_tx`` each. Computes
    ``sqrt(n_tx) (H^H H + sigma2 n_tx I)^-1 H^H y``: zero-forcing when
    ``sigma2 == 0`` and maximal-ratio combining for one stream.
    Returns the soft symbols and a mask of tones where the matrix was
    singular (those outputs are zero).
    """
    n_tx = h.shape[-1]
    hh = np.conj(np.swapaxes(h, -1, -2))
    gram = hh @ h + sigma2 * n_tx * np.eye(n_tx)
    rhs = (hh @ y[..., None])[..., 0]
    if n_tx == 1:
        g = gram[..., 0, 0]
        singular = np.abs(g) <= 1e-12 * max(float(np.max(np.abs(g), initial=0.0)), 1e-300)
        out = np.where(singular, 0, rhs[..., 0] / np.where(singular, 1, g))[..., None]
        return np.sqrt(n_tx) * out, singular
    if n_tx == 2:
        # closed-form Hermitian 2x2: eigenvalues for the rank test, adjugate for the solve
        a, d = gram[..., 0, 0].real, gram[..., 1, 1].real
        b = gram[..., 0, 1]
        half = np.hypot(0.5 * (a - d), np.abs(b))
        lo, hi = 0.5 * (a + d) - half, 0.5 * (a + d) + half
        singular = lo <= 1e-12 * hi
        det = np.where(singular, 1.0, a * d - np.abs(b) ** 2)
        out = np.stack([d * rhs[..., 0] - b * rhs[..., 1],
                        a * rhs[..., 1] - np.conj(b) * rhs[..., 0]], axis=-1) / det[..., None]
        out = np.where(singular[..., None], 0, out)
        return np.sqrt(n_tx) * out, singular
    sv = np.linalg.svd(gram, compute_uv=False)
    singular = sv[..., -1] <= 1e-12 * sv[..., 0]
    safe = np.where(singular[..., None, None], np.eye(n_tx), gram)
    out = np.linalg.solve(safe, rhs[..., None])[..., 0]
    out = np.where(singular[..., None], 0, out)
    return np.sqrt(n_tx) * out, singular


def equalize_detect(Y, H_est, sigma2: float, c: Constellation, data_indices) -> DetectorOutput:
    """Detect the data streams from received tones.

    ``Y`` is ``(..., n_rx, N)``; ``H_est`` is the per-tone channel estimate
    ``(..., n_rx, n_tx, N)``. Only ``data_indices`` are detected.
    """
    Y = np.asarray(Y)
    H_est = np.asarray(H_est)
    d = np.asarray(data_indices)
    y = np.moveaxis(Y[..., d], -1, -2)                  # (..., Nd, n_rx)
    h = np.moveaxis(H_est[..., d], -1, -3)              # (..., Nd, n_rx, n_tx)
    soft, singular = mmse_equalize(y, h, sigma2)
    soft = np.moveaxis(soft, -1, -2)                     # (..., n_tx, Nd)
    labels = nearest_labels(soft, c)
    return DetectorOutput(c.points[labels], hard_demap(soft, c), soft, singular)


class ErrorCounts(NamedTuple):
    bit_errors: int
    total_bits: int
    ber: float
    symbol_errors: int
    total_symbols: int
    ser: float


def count_errors(tx_bits, rx_bits, bits_per_symbol: int = 1) -> ErrorCounts:
    """Bit and symbol error counts; a symbol is wrong if any of its bits is."""
    tx = np.asarray(tx_bits).ravel()
    rx = np.asarray(rx_bits).ravel()
    if tx.shape != rx.shape:
        raise InputShapeError(f"bit sequences differ in length: {tx.size} vs {rx.size}")
    if tx.size % bits_per_symbol:
        raise InputShapeError("bit count is not a whole number of symbols")
    wrong = tx != rx
    n_bits = tx.size
    bit_err = int(wrong.sum())
    sym_wrong = wrong.reshape(-1, bits_per_symbol).any(axis=1)
    sym_err = int(sym_wrong.sum())
    n_sym = sym_wrong.size
    return ErrorCounts(bit_err, n_bits, bit_err / n_bits if n_bits else 0.0,
                       sym_err, n_sym, sym_err / n_sym if n_sym else 0.0)
