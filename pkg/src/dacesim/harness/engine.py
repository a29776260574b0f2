"""
Monte Carlo trial engine.

Trials are processed in fixed-size blocks. Every trial draws its data,
channel and noise from its own random stream derived from
``(seed, trial_index, stream_id)``, so results do not depend on block size
or on how many worker processes share the blocks. All schemes and all SNR
points of one trial reuse the same channel and noise draws (common random
numbers); the noise is drawn once at unit variance and scaled per SNR.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..channel import ChannelRealization, apply_channel, cfr_from_cir, crandn
from ..detect import equalize_detect, mmse_equalize
from ..errors import ConfigError
from ..estimate import (CovariancePriors, SelectionMode, ls_estimate, lmmse_estimate,
                        peak_scores, reliability, stack_system, top_k)
from ..nonlinear import (GccParams, SspaParams, calibrate_gcc, gcc_compand, gcc_expand,
                         sspa_apply, sspa_from_backoff)
from ..ofdm import (add_cp, assemble_frame, constellation, hard_demap, map_bits,
                    nearest_labels, pilot_symbols, remove_cp, transform)
from .config import SimConfig

STREAM_DATA = 0
STREAM_CHANNEL = 1
STREAM_NOISE = 2
CALIBRATION_SEED = 0xCA11B
CALIBRATION_FRAMES = 256


def trial_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial, stream]))


def scheme_stream(name: str) -> int:
    """Stable per-scheme stream id, so adding schemes never shifts others."""
    return 1000 + zlib.crc32(name.encode()) % 1_000_000


def n_workers() -> int:
    raw = os.environ.get("DACE_SIM_WORKERS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"DACE_SIM_WORKERS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("DACE_SIM_WORKERS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class TxChain:
    """Transmit-side nonlinear stages, calibrated once per configuration."""

    gcc: GccParams | None
    sspa: SspaParams | None


@lru_cache(maxsize=32)
def tx_chain(cfg: SimConfig) -> TxChain:
    """Calibrate the companding amplitude and PA saturation on a fixed
    ensemble of frames drawn independently of the simulation seed."""
    if cfg.gcc_gamma is None and cfg.sspa_ibo_db is None:
        return TxChain(None, None)
    frames = transmit_grids(cfg, _draw_bits(cfg, np.random.default_rng(CALIBRATION_SEED),
                                            CALIBRATION_FRAMES))
    s = transform(frames, "inverse")
    gcc = None
    if cfg.gcc_gamma is not None:
        gcc = calibrate_gcc(cfg.gcc_gamma, s)
        s = gcc_compand(s, gcc)
    sspa = None
    if cfg.sspa_ibo_db is not None:
        sspa = sspa_from_backoff(s, cfg.sspa_ibo_db, knee=cfg.sspa_knee)
    return TxChain(gcc, sspa)


def _draw_bits(cfg, rng, n_frames=None):
    c = constellation(cfg.modulation)
    shape = (cfg.n_tx, cfg.frame.n_data * c.bits_per_symbol)
    if n_frames is not None:
        shape = (n_frames,) + shape
    return rng.integers(0, 2, size=shape, dtype=np.uint8)


def data_scale(cfg) -> float:
    """Amplitude of data tones: total power 1 split over the antennas.
    Pilot tones are sent by one antenna at a time at unit amplitude."""
    return 1.0 / np.sqrt(cfg.n_tx)


def transmit_grids(cfg, bits):
    """Frequency grids as transmitted (data scaled by :func:`data_scale`)."""
    c = constellation(cfg.modulation)
    frame = cfg.frame
    grid = assemble_frame(map_bits(bits, c), frame, cfg.pilot_seed).symbols
    grid[..., frame.data_indices] *= data_scale(cfg)
    return grid


def apply_tx_chain(s, chain: TxChain):
    if chain.gcc is not None:
        s = gcc_compand(s, chain.gcc)
    if chain.sspa is not None:
        s = sspa_apply(s, chain.sspa)
    return s


@dataclass
class Block:
    """Per-trial draws of one block, shared by every scheme and SNR."""

    bits: np.ndarray      # (B, n_tx, Nd*bps)
    grid: np.ndarray      # (B, n_tx, N), transmitted values
    taps: np.ndarray      # (B, n_rx, n_tx, L)
    rx_clean: np.ndarray  # (B, n_rx, N + cp)
    noise: np.ndarray     # (B, n_rx, N + cp), unit variance
    random_sel: dict      # scheme -> (B, n_tx, k) tone indices


def draw_block(cfg: SimConfig, trials) -> Block:
    frame = cfg.frame
    pdp = cfg.pdp_profile
    k = cfg.n_reliable
    bits, taps, noise, rand = [], [], [], []
    n_samples = frame.n_subcarriers + frame.cp_len
    want_random = "random" in cfg.schemes
    for t in trials:
        bits.append(_draw_bits(cfg, trial_rng(cfg.seed, t, STREAM_DATA)))
        g = crandn(trial_rng(cfg.seed, t, STREAM_CHANNEL), (cfg.n_rx, cfg.n_tx, cfg.n_taps))
        taps.append(g * np.sqrt(pdp.weights))
        noise.append(crandn(trial_rng(cfg.seed, t, STREAM_NOISE), (cfg.n_rx, n_samples)))
        if want_random:
            rng = trial_rng(cfg.seed, t, scheme_stream("random"))
            rand.append([np.sort(rng.choice(frame.data_indices, size=k, replace=False))
                         for _ in range(cfg.n_tx)])
    bits = np.stack(bits)
    taps = np.stack(taps)
    grid = transmit_grids(cfg, bits)
    s = apply_tx_chain(transform(grid, "inverse"), tx_chain(cfg))
    tx = add_cp(s, frame.cp_len)
    rx_clean = apply_channel(tx, ChannelRealization(taps), frame.cp_len)
    random_sel = {"random": np.array(rand).reshape(len(trials), cfg.n_tx, k)} if want_random else {}
    return Block(bits, grid, taps, rx_clean, np.stack(noise), random_sel)


def _estimate(cfg, sys, sigma2):
    if cfg.estimator == "ls":
        return ls_estimate(sys)
    w = cfg.pdp_profile.weights if cfg.prior == "true" else np.full(cfg.n_taps, 1.0 / cfg.n_taps)
    # tiny floor keeps the LMMSE well defined when sigma2 is exactly zero
    return lmmse_estimate(sys, CovariancePriors.from_pdp(w, max(sigma2, 1e-15)))


def _estimate_all_pairs(cfg, Y_per_tx, sigma2, reliable=None, reliable_syms=None, mask=None):
    """Tap estimates ``(B, n_rx, n_tx, L)``; one independent solve per pair.

    ``Y_per_tx[t]`` is the ``(B, n_rx, N)`` observation used for antenna ``t``
    (other streams cancelled on data tones where applicable).
    """
    frame = cfg.frame
    pilots = pilot_symbols(cfg.n_pilots, cfg.n_tx, cfg.pilot_seed)
    out = []
    for t in range(cfg.n_tx):
        if reliable is None:
            sys = stack_system(Y_per_tx[t], frame.pilot_indices[t], pilots[t],
                               n_taps=cfg.n_taps)
        else:
            sys = stack_system(Y_per_tx[t], frame.pilot_indices[t], pilots[t],
                               reliable[:, t, None, :], reliable_syms[:, t, None, :],
                               n_taps=cfg.n_taps,
                               reliable_mask=None if mask is None else mask[:, t, None, :])
        out.append(_estimate(cfg, sys, sigma2))
    return np.stack(out, axis=2)


def _detect(cfg, Y, H, sigma2, c, chain: TxChain):
    """Hard decisions ``(B, n_tx, Nd)`` and soft outputs on data tones."""
    frame = cfg.frame
    a = data_scale(cfg)
    det = equalize_detect(Y, H, sigma2, c, frame.data_indices)
    if chain.gcc is None:
        return det.detected_symbols, det.soft_symbols, det.erasures
    # undo the companding: rebuild each stream's companded spectrum, return to
    # the time domain, expand, and transform back before slicing
    n = frame.n_subcarriers
    spec = np.zeros(Y.shape[:-2] + (cfg.n_tx, n), dtype=complex)
    spec[..., frame.data_indices] = det.soft_symbols * a
    for t, p in enumerate(frame.pilot_indices):
        # only antenna t is active on its own comb, at unit amplitude
        y_p = np.moveaxis(Y[..., p], -1, -2)                       # (B, Np, n_rx)
        h_p = np.moveaxis(H[..., t, p], -1, -2)[..., None]          # (B, Np, n_rx, 1)
        soft_p, _ = mmse_equalize(y_p, h_p, sigma2)
        spec[..., t, p] = soft_p[..., 0]
    s_hat = gcc_expand(transform(spec, "inverse"), chain.gcc)
    soft = transform(s_hat, "forward")[..., frame.data_indices] / a
    return c.points[nearest_labels(soft, c)], soft, det.erasures


@dataclass
class SchemeSums:
    """Additive per-(SNR, scheme) accumulators; divided only at the end."""

    trials: int = 0
    err_energy: float = 0.0
    h_energy: float = 0.0
    nmse_trial: float = 0.0
    success: int = 0
    bit_errors: int = 0
    bits: int = 0
    symbol_errors: int = 0
    symbols: int = 0

    @property
    def nmse(self) -> float:
        """Total estimation-error energy over total channel energy."""
        return self.err_energy / self.h_energy

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols

    @property
    def success_rate(self) -> float:
        return 100.0 * self.success / self.trials

    def merge(self, other: "SchemeSums") -> None:
        self.trials += other.trials
        self.err_energy += other.err_energy
        self.h_energy += other.h_energy
        self.nmse_trial += other.nmse_trial
        self.success += other.success
        self.bit_errors += other.bit_errors
        self.bits += other.bits
        self.symbol_errors += other.symbol_errors
        self.symbols += other.symbols


def run_block(cfg: SimConfig, trials, with_ber: bool = True) -> dict:
    """Simulate ``trials`` (a sequence of trial indices) for every SNR point
    and scheme. Returns ``{(snr_db, scheme): SchemeSums}``."""
    frame = cfg.frame
    c = constellation(cfg.modulation)
    chain = tx_chain(cfg)
    blk = draw_block(cfg, trials)
    a = data_scale(cfg)
    n, k, d_idx = frame.n_subcarriers, cfg.n_reliable, frame.data_indices
    h_true = blk.taps
    h_energy = np.sum(np.abs(h_true) ** 2, axis=-1)

    tx_sel = {}
    for scheme in cfg.schemes:
        if scheme in ("tx-peak", "tx-peak-literal"):
            # transmitter side: scores come from the pre-companding grid
            scores = peak_scores(blk.grid, d_idx, literal=scheme == "tx-peak-literal")
            idx = top_k(scores, d_idx, k)
            mask = None
            if cfg.threshold is not None:
                pos = np.searchsorted(d_idx, idx)
                mask = np.take_along_axis(scores, pos, axis=-1) > cfg.threshold
            tx_sel[scheme] = (idx, mask)
        elif scheme == "random":
            tx_sel[scheme] = (blk.random_sel["random"], None)

    true_data = blk.grid[..., d_idx] / a                            # unit-power symbols
    out = {}
    for snr in cfg.snr_grid:
        sigma2 = 10 ** (-snr / 10)
        rx = blk.rx_clean + np.sqrt(sigma2) * blk.noise
        Y = transform(remove_cp(rx, frame.cp_len), "forward")     # (B, n_rx, N)
        h0 = _estimate_all_pairs(cfg, [Y] * cfg.n_tx, sigma2)
        H0 = cfr_from_cir(h0, n)
        det0, soft0, eras0 = _detect(cfg, Y, H0, sigma2, c, TxChain(None, None))
        decided = true_data if cfg.genie else det0
        Y_t = None
        for scheme in cfg.schemes:
            if scheme == "pilot-only" or k == 0:
                h_hat = h0
            else:
                if scheme == "rx-rel":
                    rel = reliability(soft0, c, sigma2)
                    rel = np.where(eras0[..., None, :], -np.inf, rel)
                    idx, mask = top_k(rel, d_idx, k), None
                else:
                    idx, mask = tx_sel[scheme]
                pos = np.searchsorted(d_idx, idx)
                syms = np.take_along_axis(decided, pos, axis=-1) * a
                erased = np.take_along_axis(np.broadcast_to(eras0[..., None, :], decided.shape), pos, axis=-1)
                if np.any(erased):
                    mask = ~erased if mask is None else mask & ~erased
                if Y_t is None:
                    Y_t = _cancel_interference(cfg, Y, H0, decided * a)
                h_hat = _estimate_all_pairs(cfg, Y_t, sigma2, idx, syms, mask)
            err = np.sum(np.abs(h_hat - h_true) ** 2, axis=-1)
            nmse_trial = np.mean(err / h_energy, axis=(-2, -1))
            acc = SchemeSums(trials=len(trials), err_energy=float(np.sum(err)),
                             h_energy=float(np.sum(h_energy)),
                             nmse_trial=float(np.sum(nmse_trial)),
                             success=int(np.sum(nmse_trial < cfg.target_mse)))
            if with_ber:
                H = cfr_from_cir(h_hat, n)
                det, _, _ = _detect(cfg, Y, H, sigma2, c, chain)
                rx_bits = hard_demap(det, c)
                wrong = rx_bits != blk.bits
                acc.bit_errors = int(wrong.sum())
                acc.bits = wrong.size
                sym_wrong = wrong.reshape(wrong.shape[:-1] + (-1, c.bits_per_symbol)).any(axis=-1)
                acc.symbol_errors = int(sym_wrong.sum())
                acc.symbols = sym_wrong.size
            out[(snr, scheme)] = acc
    return out


def _cancel_interference(cfg, Y, H0, decided_tx):
    """Per transmit antenna, subtract the other streams' reconstructed
    contribution on the data tones using the initial channel estimate."""
    if cfg.n_tx == 1:
        return [Y]
    d_idx = cfg.frame.data_indices
    contrib = H0[..., d_idx] * decided_tx[:, None, :, :]            # (B, n_rx, n_tx, Nd)
    total = contrib.sum(axis=2)
    out = []
    for t in range(cfg.n_tx):
        Y_t = Y.copy()
        Y_t[..., d_idx] -= total - contrib[:, :, t, :]
        out.append(Y_t)
    return out


def _block_job(args):
    cfg, trials, with_ber = args
    return run_block(cfg, trials, with_ber)


def run_trials(cfg: SimConfig, with_ber: bool = True, workers: int | None = None) -> dict:
    """Run ``cfg.trials`` trials and return merged :class:`SchemeSums`."""
    cfg.validate()
    tx_chain(cfg)
    blocks = [range(s, min(s + cfg.block_size, cfg.trials))
              for s in range(0, cfg.trials, cfg.block_size)]
    workers = n_workers() if workers is None else max(1, workers)
    jobs = [(cfg, b, with_ber) for b in blocks]
    if workers == 1 or len(blocks) == 1:
        results = map(_block_job, jobs)
        return _merge(results)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return _merge(pool.map(_block_job, jobs))


def _merge(results) -> dict:
    total = {}
    for part in results:
        for key, acc in part.items():
            total.setdefault(key, SchemeSums()).merge(acc)
    return total
