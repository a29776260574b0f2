"""Simulation configuration, loadable from JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from ..channel import PowerDelayProfile
from ..errors import ConfigError
from ..estimate import SelectionMode
from ..ofdm import FrameConfig, Modulation

ALL_SCHEMES = ("pilot-only", "tx-peak", "rx-rel", "random")
MIMO_SIZES = ((1, 1), (1, 2), (2, 4), (2, 8))


@dataclass(frozen=True)
class SimConfig:
    n_subcarriers: int = 256
    n_pilots: int = 16
    n_taps: int = 16
    cp_len: int = 16
    pdp: str = "exp:4"
    modulation: str = "4qam"
    n_tx: int = 1
    n_rx: int = 1
    estimator: str = "ls"
    schemes: tuple = ALL_SCHEMES
    n_reliable: int = 16
    threshold: float | None = None
    genie: bool = False
    prior: str = "true"
    gcc_gamma: float | None = None
    sspa_ibo_db: float | None = None
    sspa_knee: float = 2.0
    snr_grid: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 10_000
    seed: int = 1
    target_mse: float = 0.02
    success_snr_db: float = 20.0
    pilot_grid: tuple = (16, 32, 52, 64, 96, 128)
    n_symbols: int = 100_000
    papr0_grid: tuple = tuple(np.round(np.arange(4.0, 13.01, 0.25), 2))
    ccdf_gamma: float = 2.0
    oversample: int = 1
    pilot_seed: int = 0
    block_size: int = 250
    complexity_sizes: tuple = (64, 256, 1024)

    def __post_init__(self):
        for name in ("schemes", "snr_grid", "pilot_grid", "papr0_grid", "complexity_sizes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def frame(self) -> FrameConfig:
        return FrameConfig(self.n_subcarriers, self.n_pilots, self.cp_len, self.n_tx, self.n_rx)

    @property
    def pdp_profile(self) -> PowerDelayProfile:
        return PowerDelayProfile.parse(self.pdp, self.n_taps)

    @property
    def mimo(self) -> str:
        return f"{self.n_tx}x{self.n_rx}"

    def validate(self) -> "SimConfig":
        """Raise :class:`ConfigError` on any inconsistent setting."""
        try:
            Modulation(self.modulation)
        except ValueError:
            raise ConfigError(f"unknown modulation {self.modulation!r}") from None
        if self.estimator not in ("ls", "lmmse"):
            raise ConfigError(f"estimator must be 'ls' or 'lmmse', got {self.estimator!r}")
        if not self.schemes:
            raise ConfigError("no schemes requested")
        for s in self.schemes:
            try:
                SelectionMode(s)
            except ValueError:
                raise ConfigError(f"unknown scheme {s!r}") from None
        if self.prior not in ("true", "uniform"):
            raise ConfigError("prior must be 'true' or 'uniform'")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_grid:
            raise ConfigError("snr_grid is empty")
        if self.block_size < 1:
            raise ConfigError("block_size must be >= 1")
        if self.gcc_gamma is not None and self.gcc_gamma < 1:
            raise ConfigError("gcc_gamma must be >= 1")
        if self.oversample not in (1, 2, 4, 8):
            raise ConfigError("oversample must be 1, 2, 4 or 8")
        if self.n_taps > self.n_subcarriers:
            raise ConfigError("more channel taps than subcarriers")
        frame = self.frame
        frame.check_channel(self.n_taps)
        self.pdp_profile
        if self.n_reliable < 0 or self.n_reliable > frame.n_data:
            raise ConfigError(f"n_reliable {self.n_reliable} outside [0, {frame.n_data}]")
        if self.estimator == "ls" and self.n_pilots < self.n_taps:
            raise ConfigError(f"LS needs n_pilots >= L ({self.n_pilots} < {self.n_taps})")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        data = dict(data)
        mimo = data.pop("mimo", None)
        if mimo is not None:
            data["n_tx"], data["n_rx"] = parse_mimo(mimo)
        if "selection" in data:
            data["schemes"] = data.pop("selection")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if isinstance(data.get("schemes"), str):
            data["schemes"] = tuple(data["schemes"].split(","))
        if isinstance(data.get("snr_grid"), str):
            data["snr_grid"] = parse_range(data["snr_grid"])
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "SimConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


def parse_mimo(text: str) -> tuple[int, int]:
    try:
        t, r = (int(v) for v in str(text).lower().split("x"))
    except ValueError:
        raise ConfigError(f"bad MIMO size {text!r}; expected e.g. 2x4") from None
    if t < 1 or r < 1:
        raise ConfigError(f"bad MIMO size {text!r}")
    return t, r


def parse_range(text: str) -> tuple[float, ...]:
    """``start:step:stop`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, step, stop = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(float(np.round(start + i * step, 10)) for i in range(n))
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"bad range {text!r}; expected start:step:stop") from None
