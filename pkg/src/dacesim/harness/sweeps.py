"""Sweeps that turn engine results into :class:`MetricRecord` lists."""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import ConfigError, InputShapeError
from ..nonlinear import GccParams, empirical_ccdf, gcc_compand
from ..ofdm import Modulation, constellation, oversampled_time_signal, papr_db
from .complexity import count_rx_selection, count_tx_selection, model_ratio, noisy_observation
from .config import SimConfig
from .engine import STREAM_DATA, _draw_bits, run_trials, transmit_grids, trial_rng
from .records import MetricRecord

STREAM_CCDF = 3
CCDF_BLOCK = 1000
COMPLEXITY_FRAMES = 4
COMPLEXITY_SCHEMES = ("tx-peak", "tx-peak-literal", "rx-rel",
                      "tx-peak-partial", "tx-peak-literal-partial", "rx-rel-partial")
COMPLEXITY_RATIOS = (("rx-rel", "tx-peak"), ("rx-rel", "tx-peak-literal"),
                     ("rx-rel-partial", "tx-peak-partial"))


class PilotRoundingWarning(UserWarning):
    """A pilot count that does not divide N; comb positions were rounded."""


def run_mse_sweep(cfg: SimConfig, workers: int | None = None) -> list[MetricRecord]:
    """NMSE per SNR point and scheme.

    NMSE is the total tap-error energy over the total channel energy,
    pooled across trials and antenna pairs.
    """
    sums = run_trials(cfg, with_ber=False, workers=workers)
    return [MetricRecord.from_config(cfg, "nmse", scheme, snr, sums[(snr, scheme)].nmse, snr_db=snr)
            for snr in cfg.snr_grid for scheme in cfg.schemes]


def run_ber_sweep(cfg: SimConfig, workers: int | None = None) -> list[MetricRecord]:
    """Aggregate BER and SER per SNR point and scheme."""
    sums = run_trials(cfg, with_ber=True, workers=workers)
    out = []
    for snr in cfg.snr_grid:
        for scheme in cfg.schemes:
            acc = sums[(snr, scheme)]
            out.append(MetricRecord.from_config(cfg, "ber", scheme, snr, acc.ber, snr_db=snr))
            out.append(MetricRecord.from_config(cfg, "ser", scheme, snr, acc.ser, snr_db=snr))
    return out


def ccdf_papr_samples(cfg: SimConfig, n_symbols: int | None = None, gamma: float | None = None):
    """PAPR in dB of ``n_symbols`` random single-antenna frames, plain and
    companded with ``gamma`` (default ``cfg.ccdf_gamma``).

    Frames come in fixed blocks with their own random streams, so the
    samples depend only on the seed.
    """
    n_symbols = cfg.n_symbols if n_symbols is None else n_symbols
    gamma = cfg.ccdf_gamma if gamma is None else gamma
    if n_symbols < 1:
        raise ConfigError("n_symbols must be >= 1")
    siso = cfg.with_(n_tx=1, n_rx=1)
    gcc = GccParams(gamma=gamma)
    plain, companded = [], []
    for b, start in enumerate(range(0, n_symbols, CCDF_BLOCK)):
        count = min(CCDF_BLOCK, n_symbols - start)
        bits = _draw_bits(siso, trial_rng(cfg.seed, b, STREAM_CCDF), count)
        s = oversampled_time_signal(transmit_grids(siso, bits)[:, 0, :], cfg.oversample)
        plain.append(papr_db(s))
        companded.append(papr_db(gcc_compand(s, gcc)))
    return np.concatenate(plain), np.concatenate(companded)


def run_ccdf(cfg: SimConfig, n_symbols: int | None = None, papr0_grid=None) -> list[MetricRecord]:
    """CCDF of the PAPR for plain and companded frames on ``papr0_grid``."""
    grid = cfg.papr0_grid if papr0_grid is None else tuple(papr0_grid)
    if len(grid) == 0:
        raise InputShapeError("papr0 grid is empty")
    n_symbols = cfg.n_symbols if n_symbols is None else n_symbols
    plain, companded = ccdf_papr_samples(cfg, n_symbols)
    out = []
    for scheme, samples, gamma in (("plain", plain, None), ("gcc", companded, cfg.ccdf_gamma)):
        ccdf = empirical_ccdf(samples, grid)
        out.extend(MetricRecord.from_config(cfg, "ccdf", scheme, x, y, trials=n_symbols,
                                            gamma=gamma, n_tx=1, n_rx=1)
                   for x, y in zip(grid, ccdf))
    return out


def run_success_rate(cfg: SimConfig, pilot_grid=None, workers: int | None = None) -> list[MetricRecord]:
    """Percentage of trials with per-trial NMSE below ``cfg.target_mse`` at
    ``cfg.success_snr_db``, for each pilot count and scheme.

    Pilot counts that do not divide N get their comb rounded to the nearest
    tones; a :class:`PilotRoundingWarning` is issued for each.
    """
    grid = cfg.pilot_grid if pilot_grid is None else tuple(pilot_grid)
    out = []
    for n_pilots in grid:
        point = cfg.with_(n_pilots=int(n_pilots), snr_grid=(cfg.success_snr_db,))
        if point.n_subcarriers % point.n_pilots:
            warnings.warn(f"{n_pilots} pilots do not divide {point.n_subcarriers} tones; "
                          f"comb positions rounded to the nearest tone", PilotRoundingWarning,
                          stacklevel=2)
        sums = run_trials(point, with_ber=False, workers=workers)
        for scheme in point.schemes:
            acc = sums[(point.success_snr_db, scheme)]
            out.append(MetricRecord.from_config(point, "success_rate", scheme, n_pilots,
                                                acc.success_rate, snr_db=point.success_snr_db))
    return out


def run_complexity_probe(cfg: SimConfig, modulations=("bpsk", "4qam", "8psk"),
                         n_frames: int = COMPLEXITY_FRAMES) -> list[MetricRecord]:
    """Selection op counts for the transmitter and receiver selectors.

    Each transform size ``N`` in ``cfg.complexity_sizes`` keeps the default
    density of ``N/16`` pilots and ``N/16`` reliable tones. Both selectors
    see the same frames; the receiver sees them through white noise at
    ``cfg.success_snr_db``. Emits mean ``op_count`` per scheme (``-partial``
    variants pick the top tones with a bounded heap instead of a full sort),
    the measured ``op_ratio`` receiver/transmitter and the
    ``op_ratio_model`` ``1 + M / log2 N``.
    """
    sigma2 = 10 ** (-cfg.success_snr_db / 10)
    out = []
    for mod in modulations:
        c = constellation(mod)
        for n in cfg.complexity_sizes:
            point = cfg.with_(modulation=Modulation(mod).value, n_subcarriers=n,
                              n_pilots=max(n // 16, 1), n_reliable=max(n // 16, 1),
                              n_tx=1, n_rx=1, trials=n_frames)
            frame = point.frame
            totals = dict.fromkeys(COMPLEXITY_SCHEMES, 0)
            for f in range(n_frames):
                rng = trial_rng(cfg.seed, f, STREAM_DATA)
                grid = transmit_grids(point, _draw_bits(point, rng))[0]
                eq = noisy_observation(grid[frame.data_indices], sigma2, rng)
                for scheme in COMPLEXITY_SCHEMES:
                    partial = scheme.endswith("-partial")
                    if scheme.startswith("rx-rel"):
                        _, ops = count_rx_selection(eq, frame.data_indices, c, sigma2,
                                                    point.n_reliable, partial)
                    else:
                        _, ops = count_tx_selection(grid, frame.data_indices, point.n_reliable,
                                                    scheme.startswith("tx-peak-literal"), partial)
                    totals[scheme] += ops.total
            mean = {k: v / n_frames for k, v in totals.items()}
            for scheme, value in mean.items():
                out.append(MetricRecord.from_config(point, "op_count", scheme, n, value,
                                                    snr_db=cfg.success_snr_db))
            for rx, tx in COMPLEXITY_RATIOS:
                out.append(MetricRecord.from_config(point, "op_ratio", f"{rx}/{tx}", n,
                                                    mean[rx] / mean[tx],
                                                    snr_db=cfg.success_snr_db))
            out.append(MetricRecord.from_config(point, "op_ratio_model", "rx-rel/tx-peak", n,
                                                model_ratio(n, c.size), snr_db=cfg.success_snr_db))
    return out
