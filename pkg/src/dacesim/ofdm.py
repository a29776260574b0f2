"""
OFDM building blocks: constellations, comb-pilot frames, unitary transforms,
cyclic prefix handling and PAPR measurement.

All transforms use the unitary (1/sqrt(N)) normalization so that energy is
preserved between the frequency grid and the time-domain samples.

Gray tables (label bits are MSB first)::

    BPSK   0 -> +1            1 -> -1
    QAM4   00 -> (+1+1j)/√2   01 -> (+1-1j)/√2
           10 -> (-1+1j)/√2   11 -> (-1-1j)/√2
    PSK8   000 -> e^{j0}      001 -> e^{jπ/4}    011 -> e^{jπ/2}
           010 -> e^{j3π/4}   110 -> e^{jπ}      111 -> e^{j5π/4}
           101 -> e^{j3π/2}   100 -> e^{j7π/4}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, InputShapeError, UndefinedMetricError


class Modulation(str, Enum):
    BPSK = "bpsk"
    QAM4 = "4qam"
    PSK8 = "8psk"


@dataclass(frozen=True)
class Constellation:
    """Unit-average-power constellation; ``points[label]`` is the symbol for
    the integer bit label."""

    kind: Modulation
    points: np.ndarray
    bits_per_symbol: int

    @property
    def size(self) -> int:
        return len(self.points)

    def labels_to_bits(self, labels: np.ndarray) -> np.ndarray:
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((np.asarray(labels)[..., None] >> shifts) & 1).astype(np.uint8)


def _gray(k):
    return k ^ (k >> 1)


def constellation(kind) -> Constellation:
    """Return the canonical Gray-labelled constellation for ``kind``."""
    kind = Modulation(str(kind).lower() if not isinstance(kind, Modulation) else kind)
    if kind is Modulation.BPSK:
        points = np.array([1.0 + 0j, -1.0 + 0j])
        bps = 1
    elif kind is Modulation.QAM4:
        points = np.empty(4, dtype=complex)
        for label in range(4):
            i = 1.0 - 2.0 * (label >> 1)
            q = 1.0 - 2.0 * (label & 1)
            points[label] = (i + 1j * q) / np.sqrt(2.0)
        bps = 2
    else:
        points = np.empty(8, dtype=complex)
        for k in range(8):
            points[_gray(k)] = np.exp(1j * np.pi * k / 4)
        bps = 3
    points.setflags(write=False)
    return Constellation(kind, points, bps)


def map_bits(bits, c: Constellation) -> np.ndarray:
    """Map a bit sequence to constellation symbols.

    The last axis holds the bits; its length must be a multiple of
    ``c.bits_per_symbol``.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] % c.bits_per_symbol:
        raise InputShapeError(
            f"{bits.shape[-1]} bits is not a multiple of {c.bits_per_symbol}"
        )
    groups = bits.reshape(*bits.shape[:-1], -1, c.bits_per_symbol).astype(np.int64)
    weights = 1 << np.arange(c.bits_per_symbol - 1, -1, -1)
    return c.points[groups @ weights]


def nearest_labels(symbols, c: Constellation) -> np.ndarray:
    """Index of the nearest constellation point; ties go to the lowest index."""
    symbols = np.asarray(symbols)
    d = np.abs(symbols[..., None] - c.points) ** 2
    return np.argmin(d, axis=-1)


def hard_demap(symbols, c: Constellation) -> np.ndarray:
    """Hard decision to the bits of the nearest constellation point."""
    labels = nearest_labels(symbols, c)
    bits = c.labels_to_bits(labels)
    return bits.reshape(*bits.shape[:-2], -1)


def hard_decide(symbols, c: Constellation) -> np.ndarray:
    """Nearest constellation point for each symbol."""
    return c.points[nearest_labels(symbols, c)]


def comb_indices(n_subcarriers: int, n_pilots: int, offset: float = 0.0) -> np.ndarray:
    """Equispaced pilot positions, rounded to the nearest tone when
    ``n_subcarriers`` is not a multiple of ``n_pilots``."""
    stride = n_subcarriers / n_pilots
    idx = np.rint(offset + stride * np.arange(n_pilots)).astype(int) % n_subcarriers
    return np.sort(idx)


@dataclass(frozen=True)
class FrameConfig:
    """Comb-type pilot layout.

    ``n_pilots`` is the pilot count per transmit antenna. Antenna ``t`` uses
    the comb shifted by ``t * N / (n_pilots * n_tx)`` tones; every tone not in
    any comb carries data on all antennas.
    """

    n_subcarriers: int = 256
    n_pilots: int = 16
    cp_len: int = 16
    n_tx: int = 1
    n_rx: int = 1
    pilot_indices: tuple = field(init=False)
    data_indices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n, npil, n_tx = self.n_subcarriers, self.n_pilots, self.n_tx
        if n < 2 or n & (n - 1):
            raise ConfigError(f"n_subcarriers must be a power of two, got {n}")
        if n_tx < 1 or self.n_rx < 1:
            raise ConfigError("antenna counts must be positive")
        if npil < 1 or npil * n_tx >= n:
            raise ConfigError(f"{npil} pilots x {n_tx} antennas does not fit in {n} tones")
        if not 0 <= self.cp_len <= n:
            raise ConfigError(f"cp_len {self.cp_len} outside [0, {n}]")
        combs = tuple(
            comb_indices(n, npil, offset=t * n / (npil * n_tx)) for t in range(n_tx)
        )
        used = np.concatenate(combs)
        if len(np.unique(used)) != len(used) or any(len(np.unique(p)) != npil for p in combs):
            raise ConfigError(f"pilot combs collide for N={n}, Np={npil}, n_tx={n_tx}")
        data = np.setdiff1d(np.arange(n), used)
        for p in combs:
            p.setflags(write=False)
        data.setflags(write=False)
        object.__setattr__(self, "pilot_indices", combs)
        object.__setattr__(self, "data_indices", data)

    @property
    def n_data(self) -> int:
        return len(self.data_indices)

    @property
    def equispaced(self) -> bool:
        return self.n_subcarriers % self.n_pilots == 0

    def check_channel(self, n_taps: int) -> None:
        if self.cp_len < n_taps - 1:
            raise ConfigError(f"cp_len {self.cp_len} < L-1 = {n_taps - 1}")


def pilot_symbols(n_pilots: int, n_tx: int, pilot_seed: int) -> np.ndarray:
    """Unit-modulus QPSK pilots, one row per transmit antenna."""
    rng = np.random.default_rng([pilot_seed, 0x70696C6F74])
    k = rng.integers(0, 4, size=(n_tx, n_pilots))
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * k))


@dataclass(frozen=True)
class FrequencyGrid:
    symbols: np.ndarray  # (..., n_tx, N)
    pilot_indices: tuple
    data_indices: np.ndarray


def assemble_frame(data_syms, cfg: FrameConfig, pilot_seed: int = 0) -> FrequencyGrid:
    """Place pilots and data on the N tones of each transmit antenna.

    ``data_syms`` has shape ``(..., n_tx, n_data)``; leading axes are kept so
    a batch of frames can be assembled at once.
    """
    data_syms = np.asarray(data_syms, dtype=complex)
    if data_syms.ndim == 1 and cfg.n_tx == 1:
        data_syms = data_syms[None, :]
    if data_syms.shape[-2:] != (cfg.n_tx, cfg.n_data):
        raise InputShapeError(
            f"expected data of shape (..., {cfg.n_tx}, {cfg.n_data}), got {data_syms.shape}"
        )
    grid = np.zeros(data_syms.shape[:-1] + (cfg.n_subcarriers,), dtype=complex)
    grid[..., cfg.data_indices] = data_syms
    pilots = pilot_symbols(cfg.n_pilots, cfg.n_tx, pilot_seed)
    for t, p in enumerate(cfg.pilot_indices):
        grid[..., t, p] = pilots[t]
    return FrequencyGrid(grid, cfg.pilot_indices, cfg.data_indices)


def _check_pow2(n: int) -> None:
    if n < 1 or n & (n - 1):
        raise ConfigError(f"transform length must be a power of two, got {n}")


def transform(x, direction: str = "forward") -> np.ndarray:
    """Unitary DFT along the last axis (``forward``) or its inverse."""
    x = np.asarray(x)
    _check_pow2(x.shape[-1])
    if direction == "forward":
        return np.fft.fft(x, axis=-1, norm="ortho")
    if direction == "inverse":
        return np.fft.ifft(x, axis=-1, norm="ortho")
    raise ConfigError(f"unknown transform direction {direction!r}")


def oversampled_time_signal(grid, factor: int = 1) -> np.ndarray:
    """Time samples of a frequency grid at ``factor`` times the Nyquist rate.

    The spectrum is zero-padded in the middle; samples lie on the same
    continuous-time signal as the factor-1 transform, so mean power is kept.
    """
    grid = np.asarray(grid)
    if factor == 1:
        return transform(grid, "inverse")
    n = grid.shape[-1]
    padded = np.zeros(grid.shape[:-1] + (n * factor,), dtype=complex)
    half = n // 2
    padded[..., :half] = grid[..., :half]
    padded[..., -half:] = grid[..., half:]
    return np.fft.ifft(padded, axis=-1) * (n * factor / np.sqrt(n))


def add_cp(x, cp_len: int) -> np.ndarray:
    x = np.asarray(x)
    if not 0 <= cp_len <= x.shape[-1]:
        raise ConfigError(f"cp_len {cp_len} outside [0, {x.shape[-1]}]")
    if cp_len == 0:
        return x.copy()
    return np.concatenate([x[..., -cp_len:], x], axis=-1)


def remove_cp(x, cp_len: int) -> np.ndarray:
    x = np.asarray(x)
    if not 0 <= cp_len < x.shape[-1]:
        raise ConfigError(f"cp_len {cp_len} invalid for length {x.shape[-1]}")
    return x[..., cp_len:].copy()


def papr_db(s) -> np.ndarray | float:
    """Peak-to-average power ratio in dB along the last axis."""
    p = np.abs(np.asarray(s)) ** 2
    mean = p.mean(axis=-1)
    if np.any(mean == 0):
        raise UndefinedMetricError("PAPR of an all-zero signal is undefined")
    out = 10 * np.log10(p.max(axis=-1) / mean)
    return float(out) if np.ndim(out) == 0 else out
