"""Rayleigh block-fading multipath channel and AWGN."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PowerDelayProfile:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not np.isclose(w.sum(), 1.0, atol=1e-12):
            raise ConfigError("power-delay profile must be non-negative and sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_taps(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, n_taps: int) -> "PowerDelayProfile":
        return cls(np.full(n_taps, 1.0 / n_taps))

    @classmethod
    def exponential(cls, n_taps: int, tau: float) -> "PowerDelayProfile":
        if tau <= 0:
            raise ConfigError(f"decay constant must be positive, got {tau}")
        w = np.exp(-np.arange(n_taps) / tau)
        return cls(w / w.sum())

    @classmethod
    def parse(cls, spec: str, n_taps: int) -> "PowerDelayProfile":
        """Build a profile from ``"uniform"`` or ``"exp:<tau>"``."""
        if spec == "uniform":
            return cls.uniform(n_taps)
        if spec.startswith("exp:"):
            try:
                tau = float(spec[4:])
            except ValueError:
                raise ConfigError(f"bad decay constant in pdp {spec!r}") from None
            return cls.exponential(n_taps, tau)
        raise ConfigError(f"unknown pdp {spec!r}; use 'uniform' or 'exp:<tau>'")


@dataclass(frozen=True)
class ChannelRealization:
    taps: np.ndarray  # (..., n_rx, n_tx, L)

    @property
    def n_taps(self) -> int:
        return self.taps.shape[-1]


@dataclass(frozen=True)
class NoiseParams:
    sigma2: float
    snr_db: float

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "NoiseParams":
        return cls(sigma2=10 ** (-snr_db / 10), snr_db=snr_db)


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def draw_channel(pdp: PowerDelayProfile, n_tx: int = 1, n_rx: int = 1, seed=None,
                 batch=()) -> ChannelRealization:
    """Independent Rayleigh taps per antenna pair, tap ``l`` with variance
    ``pdp.weights[l]``. ``seed`` may be an int or a ``Generator``."""
    if not isinstance(pdp, PowerDelayProfile):
        raise ConfigError("draw_channel needs a PowerDelayProfile")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g = crandn(rng, tuple(batch) + (n_rx, n_tx, pdp.n_taps))
    return ChannelRealization(g * np.sqrt(pdp.weights))


def apply_channel(tx, ch: ChannelRealization, cp_len: int) -> np.ndarray:
    """Pass CP-prefixed transmit streams through the multipath channel.

    ``tx`` has shape ``(..., n_tx, n_samples)``; the result is
    ``(..., n_rx, n_samples)``, the sum over transmit antennas of the linear
    convolution truncated to the frame length.
    """
    taps = ch.taps
    n_taps = taps.shape[-1]
    if cp_len < n_taps - 1:
        raise ConfigError(f"cp_len {cp_len} < L-1 = {n_taps - 1}: the CP cannot absorb the delay spread")
    tx = np.asarray(tx, dtype=complex)
    n = tx.shape[-1]
    nfft = 1 << int(np.ceil(np.log2(n + n_taps - 1)))
    # linear convolution through a zero-padded FFT, then truncation
    tx_f = np.fft.fft(tx, nfft, axis=-1)[..., None, :, :]   # (..., 1, n_tx, nfft)
    h_f = np.fft.fft(taps, nfft, axis=-1)                      # (..., n_rx, n_tx, nfft)
    rx = np.fft.ifft((h_f * tx_f).sum(axis=-2), axis=-1)
    return rx[..., :n]


def add_awgn(samples, noise: NoiseParams, seed=None) -> np.ndarray:
    samples = np.asarray(samples, dtype=complex)
    if noise.sigma2 < 0:
        raise ConfigError("noise variance must be non-negative")
    if noise.sigma2 == 0:
        return samples.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return samples + np.sqrt(noise.sigma2) * crandn(rng, samples.shape)


def cfr_from_cir(taps, n_subcarriers: int) -> np.ndarray:
    """Frequency response ``H[n] = sum_l h_l exp(-j 2 pi n l / N)`` along the
    last axis."""
    taps = np.asarray(taps)
    if taps.shape[-1] > n_subcarriers:
        raise ConfigError(f"{taps.shape[-1]} taps exceed {n_subcarriers} subcarriers")
    return np.fft.fft(taps, n_subcarriers, axis=-1)
