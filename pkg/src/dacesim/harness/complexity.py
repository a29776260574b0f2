"""
Instrumented operation counts for reliable-tone selection.

The counted units are score evaluations (one per tone score, including the
per-sample power in the peak search), distance computations (one per
received-symbol to constellation-point distance) and comparisons. Work that
the modem performs anyway, the inverse transform at the transmitter and the
equalizer at the receiver, is not charged to either selector.

Sorting goes through :func:`sorted` with a counting comparator, so the
comparison count is exactly what the sort performed. With ``partial=True``
the top tones come from a bounded heap (:func:`heapq.nlargest`) instead of a
full sort, which drops the ``N log N`` term to ``N log k``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cmp_to_key

import numpy as np

from ..channel import crandn
from ..estimate import peak_scores
from ..ofdm import Constellation, transform


@dataclass
class OpCounter:
    scores: int = 0
    distances: int = 0
    comparisons: int = 0

    @property
    def total(self) -> int:
        return self.scores + self.distances + self.comparisons


class _Ranked:
    """Heap entry ordered by score, ties to the lower tone index."""

    __slots__ = ("score", "pos", "ops")

    def __init__(self, score, pos, ops):
        self.score, self.pos, self.ops = score, pos, ops

    def __lt__(self, other):
        self.ops.comparisons += 1
        if self.score != other.score:
            return self.score < other.score
        return self.pos > other.pos


def _counted_top_k(scores, data_indices, count, ops: OpCounter, partial: bool = False):
    """Top ``count`` tones by descending score, ties to the lowest index,
    returned in ascending tone order; every comparison is counted."""
    def by_score(i, j):
        ops.comparisons += 1
        if scores[i] != scores[j]:
            return -1 if scores[i] > scores[j] else 1
        return -1 if i < j else (1 if i > j else 0)

    def by_tone(a, b):
        ops.comparisons += 1
        return (a > b) - (a < b)

    if partial:
        best = heapq.nlargest(count, (_Ranked(scores[i], i, ops) for i in range(len(scores))))
        order = [item.pos for item in best]
    else:
        order = sorted(range(len(scores)), key=cmp_to_key(by_score))[:count]
    return np.array(sorted((int(data_indices[i]) for i in order), key=cmp_to_key(by_tone)))


def count_tx_selection(grid_row, data_indices, count: int, literal: bool = False,
                       partial: bool = False):
    """Transmitter-side selection with op counting.

    Returns the chosen tones and the :class:`OpCounter`.
    """
    ops = OpCounter()
    grid_row = np.asarray(grid_row)
    data_indices = np.asarray(data_indices)
    x = grid_row[data_indices]
    if literal:
        scores = np.abs(x) ** 2
        ops.scores += x.size
    else:
        n = grid_row.size
        s = transform(grid_row, "inverse")
        power = np.abs(s) ** 2
        ops.scores += n
        k_star = 0
        for k in range(1, n):
            ops.comparisons += 1
            if power[k] > power[k_star]:
                k_star = k
        # same k* as the scan above; reuse the library scoring for identical ties
        scores = peak_scores(grid_row, data_indices)
        ops.scores += x.size
    return _counted_top_k(scores, data_indices, count, ops, partial), ops


def count_rx_selection(eq_syms, data_indices, c: Constellation, sigma2: float, count: int,
                       partial: bool = False):
    """Receiver-side reliability selection with op counting.

    For each tone the distances to all ``M`` points are computed and the
    nearest and second-nearest are tracked in one pass.
    """
    ops = OpCounter()
    eq_syms = np.asarray(eq_syms)
    scale = np.sqrt(sigma2) if sigma2 > 0 else 1.0
    rel = np.empty(eq_syms.size)
    for t, y in enumerate(eq_syms):
        d = np.abs(y - c.points)
        ops.distances += c.size
        best, second = d[0], np.inf
        for m in range(1, c.size):
            ops.comparisons += 1
            if d[m] < best:
                best, second = d[m], best
            else:
                ops.comparisons += 1
                if d[m] < second:
                    second = d[m]
        rel[t] = (second - best) / scale
        ops.scores += 1
    return _counted_top_k(rel, np.asarray(data_indices), count, ops, partial), ops


def model_ratio(n_subcarriers: int, m: int) -> float:
    """Receiver over transmitter cost under ``N M + N log N`` vs ``N log N``."""
    return 1.0 + m / np.log2(n_subcarriers)


def fit_nlogn(sizes, counts):
    """Least-squares fit ``counts ~ a N log2 N``.

    Returns ``a`` and the largest relative deviation of a count from the
    fitted curve.
    """
    n = np.asarray(sizes, dtype=float)
    y = np.asarray(counts, dtype=float)
    basis = n * np.log2(n)
    a = float(basis @ y / (basis @ basis))
    dev = float(np.max(np.abs(y - a * basis) / (a * basis)))
    return a, dev


def noisy_observation(data_syms, sigma2: float, rng) -> np.ndarray:
    """Equalized symbols modelled as the sent symbols plus white noise."""
    data_syms = np.asarray(data_syms)
    return data_syms + np.sqrt(sigma2) * crandn(rng, data_syms.shape)
