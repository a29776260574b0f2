"""Command-line entry point: ``dace-sim <sweep> [options]``."""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigError, InputShapeError, SingularSystemError
from .config import SimConfig, parse_mimo, parse_range
from .records import to_csv, write_csv
from .sweeps import run_ber_sweep, run_ccdf, run_complexity_probe, run_mse_sweep, run_success_rate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SINGULAR = 3


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with SimConfig fields")
    parser.add_argument("--seed", type=int, help="master seed (default 1)")
    parser.add_argument("--trials", type=int,
                        help="Monte Carlo trials (for ccdf: number of OFDM symbols)")
    parser.add_argument("--out", help="CSV output path (default: stdout)")
    parser.add_argument("--snr", help="SNR grid in dB, start:step:stop or a comma list")
    parser.add_argument("--scheme", help="comma-separated schemes: pilot-only, tx-peak, "
                                         "tx-peak-literal, rx-rel, random")
    parser.add_argument("--est", choices=("ls", "lmmse"), help="channel estimator")
    parser.add_argument("--mod", choices=("bpsk", "4qam", "8psk"), help="modulation")
    parser.add_argument("--mimo", help="antenna configuration, e.g. 1x2 or 2x4")
    parser.add_argument("--gcc", help="companding gamma, or 'off'")
    parser.add_argument("--sspa", help="PA input back-off in dB, or 'off'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dace-sim",
                                     description="Data-aided OFDM channel estimation sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("mse", "NMSE versus SNR"),
                       ("ber", "BER and SER versus SNR"),
                       ("ccdf", "PAPR CCDF of plain and companded frames"),
                       ("success-rate", "share of trials under the target NMSE versus pilot count"),
                       ("complexity", "selection operation counts")):
        p = sub.add_parser(name, help=text, description=text)
        _common(p)
        if name == "success-rate":
            p.add_argument("--pilots", help="pilot-count grid, comma list")
    return parser


def _off_or_float(text: str, flag: str):
    if text.lower() == "off":
        return None
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{flag} expects a number or 'off', got {text!r}") from None


def config_from_args(args) -> SimConfig:
    """Defaults, then the JSON file, then command-line flags."""
    data = {}
    if args.config:
        data = SimConfig.from_json(args.config).to_dict()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["n_symbols" if args.command == "ccdf" else "trials"] = args.trials
    if args.snr is not None:
        changes["snr_grid"] = parse_range(args.snr)
    if args.scheme is not None:
        changes["schemes"] = tuple(s.strip() for s in args.scheme.split(",") if s.strip())
    if args.est is not None:
        changes["estimator"] = args.est
    if args.mod is not None:
        changes["modulation"] = args.mod
    elif args.command == "ccdf" and "modulation" not in _explicit_keys(args.config):
        changes["modulation"] = "8psk"
    if args.mimo is not None:
        changes["n_tx"], changes["n_rx"] = parse_mimo(args.mimo)
    if args.gcc is not None:
        gamma = _off_or_float(args.gcc, "--gcc")
        if args.command == "ccdf":
            if gamma is None:
                raise ConfigError("ccdf compares against a companded curve; --gcc needs a gamma")
            changes["ccdf_gamma"] = gamma
        else:
            changes["gcc_gamma"] = gamma
    if args.sspa is not None:
        changes["sspa_ibo_db"] = _off_or_float(args.sspa, "--sspa")
    if getattr(args, "pilots", None):
        changes["pilot_grid"] = tuple(int(v) for v in parse_range(args.pilots))
    data.update(changes)
    try:
        cfg = SimConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def _explicit_keys(path) -> set:
    if not path:
        return set()
    with open(path, encoding="utf-8") as fh:
        return set(json.load(fh))


SWEEPS = {
    "mse": run_mse_sweep,
    "ber": run_ber_sweep,
    "ccdf": run_ccdf,
    "success-rate": run_success_rate,
    "complexity": run_complexity_probe,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        records = SWEEPS[args.command](cfg)
    except (ConfigError, InputShapeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularSystemError as exc:
        print(f"numerical singularity: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    if args.out:
        write_csv(records, args.out)
    else:
        sys.stdout.write(to_csv(records))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
