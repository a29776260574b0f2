"""Partial-Fourier systems, LS/LMMSE estimation and reliable-tone selection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dacesim.channel import PowerDelayProfile, cfr_from_cir, draw_channel
from dacesim.errors import ConfigError, InputShapeError, SingularSystemError
from dacesim.estimate import (CovariancePriors, build_partial_fourier, lmmse_estimate,
                              ls_estimate, peak_scores, reliability, select_peak_carriers,
                              select_random, select_reliable_rx, stack_system)
from dacesim.nonlinear import GccParams, gcc_compand
from dacesim.ofdm import FrameConfig, assemble_frame, constellation, map_bits, pilot_symbols, transform


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _naive_rows(idx, L, N):
    return np.array([[np.exp(-2j * np.pi * n * l / N) / np.sqrt(N) for l in range(L)] for n in idx])


def test_partial_fourier_examples():
    F = build_partial_fourier(np.arange(64), 16, 64)
    assert np.max(np.abs(F.conj().T @ F - np.eye(16))) < 1e-12
    idx = np.arange(0, 256, 16)
    F = build_partial_fourier(idx, 16, 256)
    assert np.max(np.abs(F.conj().T @ F - np.eye(16) / 16)) < 1e-12
    assert np.max(np.abs(F - _naive_rows(idx, 16, 256))) < 1e-12
    one = build_partial_fourier([5], 1, 256)
    assert one.shape == (1, 1) and abs(one[0, 0] - 1 / 16) < 1e-15


def test_partial_fourier_errors():
    with pytest.raises(InputShapeError):
        build_partial_fourier([1, 1], 2, 8)
    with pytest.raises(InputShapeError):
        build_partial_fourier([8], 2, 8)
    with pytest.raises(ConfigError):
        build_partial_fourier([0], 9, 8)


def test_ls_exact_when_noiseless():
    rng = np.random.default_rng(0)
    f = FrameConfig()
    h = _cn(rng, 16) / 4
    H = cfr_from_cir(h, 256)
    xp = pilot_symbols(16, 1, 0)[0]
    y = np.zeros(256, complex)
    y[f.pilot_indices[0]] = H[f.pilot_indices[0]] * xp
    sys = stack_system(y, f.pilot_indices[0], xp, n_taps=16)
    assert np.max(np.abs(ls_estimate(sys) - h)) < 1e-10


def test_ls_matches_pseudo_inverse():
    rng = np.random.default_rng(1)
    idx = np.sort(rng.choice(256, 32, replace=False))
    x = np.exp(1j * rng.uniform(0, 2 * np.pi, 32))
    y = _cn(rng, 256)
    sys = stack_system(y, idx, x, n_taps=16)
    C = x[:, None] * np.sqrt(256) * _naive_rows(idx, 16, 256)
    assert np.max(np.abs(sys.c_matrix - C)) < 1e-12
    assert np.max(np.abs(ls_estimate(sys) - np.linalg.pinv(C) @ y[idx])) < 1e-9


def test_stack_small_instance_oracle():
    rng = np.random.default_rng(2)
    y = _cn(rng, 8)
    xp = np.array([1, 1j])
    xr = np.array([-1 + 0j])
    sys = stack_system(y, [0, 4], xp, [1], xr, n_taps=2)
    assert sys.indices.tolist() == [0, 1, 4]
    C = np.array([xp[0], xr[0], xp[1]])[:, None] * np.sqrt(8) * _naive_rows([0, 1, 4], 2, 8)
    assert np.max(np.abs(ls_estimate(sys) - np.linalg.pinv(C) @ y[[0, 1, 4]])) < 1e-10


def test_stack_degenerate_and_shapes():
    rng = np.random.default_rng(3)
    f = FrameConfig()
    xp = pilot_symbols(16, 1, 0)[0]
    y = _cn(rng, 256)
    a = stack_system(y, f.pilot_indices[0], xp, n_taps=16)
    b = stack_system(y, f.pilot_indices[0], xp, [], [], n_taps=16)
    assert np.array_equal(a.c_matrix, b.c_matrix) and np.array_equal(a.y_sel, b.y_sel)
    r = f.data_indices[:16]
    c = stack_system(y, f.pilot_indices[0], xp, r, np.ones(16), n_taps=16)
    assert c.c_matrix.shape == (32, 16) and c.n_rows == 32
    with pytest.raises(InputShapeError):
        stack_system(y, f.pilot_indices[0], xp, [0], [1], n_taps=16)


def test_masked_rows_drop_out():
    rng = np.random.default_rng(4)
    f = FrameConfig()
    xp = pilot_symbols(16, 1, 0)[0]
    y = _cn(rng, 256)
    r = f.data_indices[:4]
    xr = np.ones(4, complex)
    full = stack_system(y, f.pilot_indices[0], xp, r[:2], xr[:2], n_taps=16)
    masked = stack_system(y, f.pilot_indices[0], xp, r, xr, n_taps=16,
                          reliable_mask=[True, True, False, False])
    assert np.allclose(ls_estimate(full), ls_estimate(masked), atol=1e-12)


def test_ls_singular_guard_names_tones():
    y = np.ones(64, complex)
    with pytest.raises(SingularSystemError) as info:
        ls_estimate(stack_system(y, [0, 32], [1, 1], n_taps=4))
    assert info.value.indices.tolist() == [0, 32]


def test_lmmse_limit_is_ls():
    rng = np.random.default_rng(5)
    f = FrameConfig()
    xp = pilot_symbols(16, 1, 0)[0]
    y = _cn(rng, 256)
    sys = stack_system(y, f.pilot_indices[0], xp, n_taps=16)
    pri = CovariancePriors.from_pdp(PowerDelayProfile.exponential(16, 4).weights, 1e-12)
    assert np.max(np.abs(lmmse_estimate(sys, pri) - ls_estimate(sys))) < 1e-6


def test_lmmse_scalar_wiener():
    c, r_h, s2, y = 0.8 - 0.3j, 0.7, 0.2, 0.4 + 0.9j
    from dacesim.estimate import StackedSystem
    sys = StackedSystem(np.array([0]), np.array([c]), np.array([y]), np.array([[c]]))
    got = lmmse_estimate(sys, CovariancePriors(np.array([[r_h]]), s2))[0]
    assert abs(got - r_h * np.conj(c) * y / (s2 + abs(c) ** 2 * r_h)) < 1e-14


def test_priors_validation():
    with pytest.raises(ConfigError):
        CovariancePriors(np.array([[1, 2j], [0, 1]]), 0.1)
    with pytest.raises(ConfigError):
        CovariancePriors(np.diag([1.0, -1.0]), 0.1)
    with pytest.raises(ConfigError):
        lmmse_estimate(stack_system(np.ones(8), [0, 4], [1, 1], n_taps=2),
                       CovariancePriors(np.eye(2), 0.0))
    # singular prior is regularized rather than rejected
    sys = stack_system(np.ones(8, complex), [0, 4], [1, 1], n_taps=2)
    assert np.all(np.isfinite(lmmse_estimate(sys, CovariancePriors(np.diag([1.0, 0.0]), 0.1))))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 40))
def test_extra_rows_never_worsen_ls_covariance(seed, k):
    rng = np.random.default_rng(seed)
    f = FrameConfig()
    xp = pilot_symbols(16, 1, 0)[0]
    r = np.sort(rng.choice(f.data_indices, k, replace=False))
    xr = constellation("4qam").points[rng.integers(0, 4, k)]
    y = np.zeros(256, complex)
    cp = stack_system(y, f.pilot_indices[0], xp, n_taps=16).c_matrix
    crp = stack_system(y, f.pilot_indices[0], xp, r, xr, n_taps=16).c_matrix
    tr = lambda c: np.trace(np.linalg.inv(c.conj().T @ c)).real
    assert tr(crp) <= tr(cp) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(16, 64))
def test_noiseless_exactness_with_reliable_rows(seed, k):
    rng = np.random.default_rng(seed)
    f = FrameConfig()
    h = _cn(rng, 16) * np.sqrt(PowerDelayProfile.exponential(16, 4).weights)
    data = map_bits(rng.integers(0, 2, 480), constellation("4qam"))
    grid = assemble_frame(data, f).symbols[0]
    y = cfr_from_cir(h, 256) * grid
    r = np.sort(rng.choice(f.data_indices, k, replace=False))
    sys = stack_system(y, f.pilot_indices[0], grid[f.pilot_indices[0]], r, grid[r], n_taps=16)
    assert np.max(np.abs(ls_estimate(sys) - h)) < 1e-9


def test_literal_selection_examples():
    grid = np.array([2.0, 1, 1, 1])
    assert select_peak_carriers(grid, np.arange(4), 1, "tx-peak-literal").tolist() == [0]
    f = FrameConfig()
    g = assemble_frame(np.ones(f.n_data), f).symbols[0]
    got = select_peak_carriers(g, f.data_indices, 3, "tx-peak-literal")
    assert got.tolist() == f.data_indices[:3].tolist()


def _phase_scores_brute(grid):
    n = len(grid)
    s = [sum(grid[m] * np.exp(2j * np.pi * m * k / n) for m in range(n)) / np.sqrt(n)
         for k in range(n)]
    k_star = int(np.argmax(np.abs(s)))
    u = s[k_star] / abs(s[k_star])
    return {m: round((grid[m] * np.exp(2j * np.pi * m * k_star / n) * np.conj(u)).real, 12)
            for m in range(n)}


def test_phase_align_matches_exhaustive_scores():
    rng = np.random.default_rng(7)
    f = FrameConfig(64, 4, cp_len=16)
    data = map_bits(rng.integers(0, 2, 2 * f.n_data), constellation("4qam"))
    grid = assemble_frame(data, f).symbols[0]
    scores = _phase_scores_brute(grid)
    ranked = sorted(f.data_indices.tolist(), key=lambda m: (-scores[m], m))[:8]
    assert select_peak_carriers(grid, f.data_indices, 8).tolist() == sorted(ranked)


def test_phase_align_scores_sum_to_peak():
    """Tone scores add up to sqrt(N) times the peak amplitude."""
    rng = np.random.default_rng(8)
    grid = constellation("8psk").points[rng.integers(0, 8, 256)]
    sc = peak_scores(grid, np.arange(256))
    assert abs(sc.sum() / 16 - np.max(np.abs(transform(grid, "inverse")))) < 1e-10


def test_threshold_and_count_errors():
    rng = np.random.default_rng(9)
    f = FrameConfig()
    grid = assemble_frame(constellation("4qam").points[rng.integers(0, 4, f.n_data)], f).symbols[0]
    all16 = select_peak_carriers(grid, f.data_indices, 16)
    sc = peak_scores(grid, f.data_indices)
    levels = np.unique(sc)
    th = levels[-2]
    kept = select_peak_carriers(grid, f.data_indices, 16, threshold=th)
    assert len(kept) == min(16, np.sum(sc > th)) and set(kept) <= set(all16)
    assert len(select_peak_carriers(grid, f.data_indices, 16, threshold=levels[-1])) == 0
    with pytest.raises(InputShapeError):
        select_peak_carriers(grid, f.data_indices, 241)
    with pytest.raises(ConfigError):
        select_peak_carriers(grid, f.data_indices, 4, "rx-rel")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1.0, 3.0))
def test_companding_keeps_selection(seed, gamma):
    rng = np.random.default_rng(seed)
    f = FrameConfig()
    grid = assemble_frame(constellation("8psk").points[rng.integers(0, 8, f.n_data)], f).symbols[0]
    before = select_peak_carriers(grid, f.data_indices, 16)
    companded = gcc_compand(transform(grid, "inverse"), GccParams(gamma, 1.4))
    after = select_peak_carriers(grid, f.data_indices, 16, peak_signal=companded)
    assert np.array_equal(before, after)


def test_rx_selection_noiseless_and_boundary():
    c = constellation("4qam")
    d = np.arange(10, 30)
    sym = c.points[np.arange(20) % 4].copy()
    idx, dec = select_reliable_rx(sym, d, c, 0.01, 5)
    assert idx.tolist() == d[:5].tolist() and np.array_equal(dec, sym[:5])
    sym[0] = np.sqrt(0.5) + 0j  # equidistant from two points
    assert reliability(sym[:1], c, 0.01)[0] == 0
    idx, _ = select_reliable_rx(sym, d, c, 0.01, 19)
    assert d[0] not in idx


def test_rx_selection_brute_force_ranking():
    rng = np.random.default_rng(10)
    c = constellation("4qam")
    d = np.arange(240)
    sym = c.points[rng.integers(0, 4, 240)] + 0.1 * _cn(rng, 240)
    rel = []
    for y in sym:
        dist = sorted(abs(y - p) for p in c.points)
        rel.append((dist[1] - dist[0]) / 0.1)
    ranked = sorted(range(240), key=lambda i: (-rel[i], i))[:16]
    idx, dec = select_reliable_rx(sym, d, c, 0.01, 16)
    assert idx.tolist() == sorted(ranked)
    assert np.array_equal(dec, c.points[[np.argmin(np.abs(sym[i] - c.points)) for i in idx]])


def test_random_selection():
    d = np.arange(240)
    assert select_random(d, 240, 1).tolist() == d.tolist()
    assert np.array_equal(select_random(d, 16, 5), select_random(d, 16, 5))
    with pytest.raises(InputShapeError):
        select_random(d, 241, 1)
    rng = np.random.default_rng(12)
    counts = np.bincount([select_random(d, 1, rng)[0] for _ in range(100_000)], minlength=240)
    assert np.all(np.abs(counts / 100_000 - 1 / 240) < 0.1 / 240 * 1.0 + 4 * np.sqrt(1 / 240 / 100_000))


def test_batched_estimates_match_single():
    rng = np.random.default_rng(13)
    f = FrameConfig()
    xp = pilot_symbols(16, 1, 0)[0]
    y = _cn(rng, (5, 256))
    r = np.stack([np.sort(rng.choice(f.data_indices, 16, replace=False)) for _ in range(5)])
    xr = np.ones((5, 16), complex)
    batch = ls_estimate(stack_system(y, f.pilot_indices[0], xp, r, xr, n_taps=16))
    for b in range(5):
        single = ls_estimate(stack_system(y[b], f.pilot_indices[0], xp, r[b], xr[b], n_taps=16))
        assert np.max(np.abs(batch[b] - single)) < 1e-12


def test_draw_channel_ls_error_matches_closed_form_small():
    """Short Monte Carlo of the sigma2 L / Np law (the full check lives in the
    acceptance suite)."""
    rng = np.random.default_rng(14)
    f = FrameConfig()
    xp = pilot_symbols(16, 1, 0)[0]
    h = draw_channel(PowerDelayProfile.exponential(16, 4), seed=rng, batch=(2000,)).taps[:, 0, 0]
    s2 = 0.01
    y = cfr_from_cir(h, 256)
    y[..., f.pilot_indices[0]] *= xp
    y = y + np.sqrt(s2) * _cn(rng, y.shape)
    est = ls_estimate(stack_system(y, f.pilot_indices[0], xp, n_taps=16))
    nmse = np.sum(np.abs(est - h) ** 2) / np.sum(np.abs(h) ** 2)
    assert abs(nmse - s2 * 16 / 16) < 0.1 * s2
