"""Metric records and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass

from .config import SimConfig

CSV_COLUMNS = ("metric", "scheme", "estimator", "modulation", "n_tx", "n_rx", "n_subcarriers",
               "n_pilots", "n_reliable", "gamma", "snr_db", "x", "y", "trials", "seed")

METRICS = ("nmse", "ber", "ser", "ccdf", "success_rate", "op_count", "op_ratio", "op_ratio_model")


@dataclass(frozen=True)
class MetricRecord:
    """One output point. The configuration columns are echoed on every row."""

    metric: str
    scheme: str
    estimator: str
    modulation: str
    n_tx: int
    n_rx: int
    n_subcarriers: int
    n_pilots: int
    n_reliable: int
    gamma: float | None
    snr_db: float | None
    x: float
    y: float
    trials: int
    seed: int

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if not math.isfinite(self.y):
            raise ValueError(f"{self.metric} value is not finite: {self.y}")
        lo, hi = _RANGES.get(self.metric, (0.0, math.inf))
        if not lo <= self.y <= hi:
            raise ValueError(f"{self.metric} value {self.y} outside [{lo}, {hi}]")

    @classmethod
    def from_config(cls, cfg: SimConfig, metric: str, scheme: str, x: float, y: float,
                    snr_db: float | None = None, trials: int | None = None,
                    **overrides) -> "MetricRecord":
        base = dict(metric=metric, scheme=scheme, estimator=cfg.estimator,
                    modulation=cfg.modulation, n_tx=cfg.n_tx, n_rx=cfg.n_rx,
                    n_subcarriers=cfg.n_subcarriers, n_pilots=cfg.n_pilots,
                    n_reliable=cfg.n_reliable, gamma=cfg.gcc_gamma, snr_db=snr_db,
                    x=float(x), y=float(y), trials=cfg.trials if trials is None else trials,
                    seed=cfg.seed)
        base.update(overrides)
        return cls(**base)


_RANGES = {
    "ber": (0.0, 1.0),
    "ser": (0.0, 1.0),
    "ccdf": (0.0, 1.0),
    "success_rate": (0.0, 100.0),
}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "%.12g" % value
    return str(value)


def to_csv(records) -> str:
    """Render records under the fixed header. Floats use ``%.12g`` so the
    output is byte-stable across platforms and runs; ``None`` is empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow([_fmt(v) for v in astuple(rec)])
    return buf.getvalue()


def write_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(records))


def read_csv(path) -> list[dict]:
    """Rows of a CSV written by :func:`write_csv`, as dicts of strings."""
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
