"""Gamma-correction companding, Rapp solid-state PA model and PAPR CCDF."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UndefinedMetricError


@dataclass(frozen=True)
class GccParams:
    gamma: float = 2.0
    amp_norm: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0 or not np.isfinite(self.gamma):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not self.amp_norm > 0 or not np.isfinite(self.amp_norm):
            raise ConfigError(f"amp_norm must be finite and positive, got {self.amp_norm}")


@dataclass(frozen=True)
class SspaParams:
    gain: float = 1.0
    a_sat: float = 1.0
    knee: float = 2.0
    ibo_db: float = 6.0

    def __post_init__(self):
        if min(self.gain, self.a_sat, self.knee) <= 0:
            raise ConfigError("SSPA gain, a_sat and knee must be positive")


def _unit_phasor(x):
    mag = np.abs(x)
    out = np.zeros_like(x, dtype=complex)
    nz = mag > 0
    out[nz] = x[nz] / mag[nz]
    return out, mag


def gcc_compand(s, p: GccParams) -> np.ndarray:
    """Compress sample magnitudes: ``A * sgn(x) * |x|**(1/gamma)``.

    ``sgn`` is the complex unit phasor, so sample phases are untouched and
    zero samples stay zero.
    """
    if p.gamma < 1:
        raise ConfigError(f"companding needs gamma >= 1, got {p.gamma}")
    phasor, mag = _unit_phasor(np.asarray(s, dtype=complex))
    return p.amp_norm * phasor * mag ** (1.0 / p.gamma)


def gcc_expand(y, p: GccParams) -> np.ndarray:
    """Inverse of :func:`gcc_compand`: ``sgn(y) * (|y| / A)**gamma``."""
    phasor, mag = _unit_phasor(np.asarray(y, dtype=complex))
    return phasor * (mag / p.amp_norm) ** p.gamma


def calibrate_gcc(gamma: float, signals) -> GccParams:
    """Pick ``A`` so companding keeps the mean power of ``signals``.

    ``signals`` is a calibration ensemble of time-domain samples (any shape).
    """
    mag2 = np.abs(np.asarray(signals)) ** 2
    denom = np.mean(mag2 ** (1.0 / gamma))
    if denom == 0:
        raise UndefinedMetricError("cannot calibrate companding on a zero signal")
    return GccParams(gamma=gamma, amp_norm=float(np.sqrt(np.mean(mag2) / denom)))


def sspa_from_backoff(signals, ibo_db: float = 6.0, gain: float = 1.0, knee: float = 2.0) -> SspaParams:
    """Rapp PA whose saturation amplitude sits ``ibo_db`` above the RMS of
    ``signals`` (after the small-signal gain)."""
    rms = float(np.sqrt(np.mean(np.abs(np.asarray(signals)) ** 2)))
    if rms == 0:
        raise UndefinedMetricError("cannot set a PA operating point from a zero signal")
    return SspaParams(gain=gain, a_sat=gain * rms * 10 ** (ibo_db / 20), knee=knee, ibo_db=ibo_db)


def sspa_apply(s, p: SspaParams) -> np.ndarray:
    """Rapp AM/AM compression with no AM/PM conversion."""
    s = np.asarray(s, dtype=complex)
    u = p.gain * np.abs(s) / p.a_sat
    two_k = 2.0 * p.knee
    # factor u out above saturation so u**2k cannot overflow
    hi = u > 1
    denom = np.empty_like(u)
    denom[~hi] = (1 + u[~hi] ** two_k) ** (1 / two_k)
    denom[hi] = u[hi] * (1 + u[hi] ** -two_k) ** (1 / two_k)
    return p.gain * s / denom


def empirical_ccdf(papr_samples, thresholds) -> np.ndarray:
    """Fraction of samples strictly above each threshold."""
    samples = np.sort(np.asarray(papr_samples, dtype=float).ravel())
    if samples.size == 0:
        raise UndefinedMetricError("CCDF of an empty sample set is undefined")
    thresholds = np.asarray(thresholds, dtype=float)
    above = samples.size - np.searchsorted(samples, thresholds, side="right")
    return above / samples.size


def ccdf_crossing(papr_samples, level: float = 1e-3) -> float:
    """Smallest threshold at which the empirical CCDF drops to ``level``.

    Equivalent to the (1 - level) upper quantile of the samples.
    """
    samples = np.sort(np.asarray(papr_samples, dtype=float).ravel())
    if samples.size == 0:
        raise UndefinedMetricError("CCDF of an empty sample set is undefined")
    k = int(np.floor(level * samples.size))
    return float(samples[samples.size - 1 - k]) if k < samples.size else float(samples[0])
