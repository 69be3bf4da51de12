"""Command-line entry point: ``fakepath <subcommand> [--config FILE] [flags]``.

Config files are flat ``key=value`` text. Blank lines and ``#`` lines are
ignored, except ``# config.key=value`` lines, which every CSV written by this
tool carries; pointing ``--config`` at a previous output therefore re-runs it.
Flags override file values.
"""
from __future__ import annotations

import argparse
import math
import re
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bounds, crb, sim
from .crb import ChannelScene
from .estimation import FAKE_WAVEFORMS, BerConfig, ber_experiment
from .steering import dirichlet
from .table import ExperimentTable
from .torus import equispaced, min_separation

U64_MAX = 2 ** 64 - 1
STOCHASTIC = ("sweep-crb", "sweep-margin", "ber")


class ConfigError(ValueError):
    """Bad configuration; the message names the offending key."""


# --- value parsers -------------------------------------------------------------

def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _float_list(text: str) -> tuple:
    items = [s for s in (part.strip() for part in text.split(",")) if s]
    if not items:
        raise ValueError("empty list")
    return tuple(_float(s) for s in items)


def _optional_float(text: str):
    return None if text.strip() in ("", "none", "None") else _float(text)


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


# --- range checks ---------------------------------------------------------------

def _odd_order(n: int) -> None:
    if n < 3 or n % 2 == 0:
        raise ValueError("must be odd and >= 3")


def _positive(x) -> None:
    if x < 1:
        raise ValueError("must be >= 1")


def _ratio(x: float) -> None:
    if not 0 < x < 0.5:
        raise ValueError("must lie in (0, 0.5)")


def _ratios(xs) -> None:
    for x in xs:
        _ratio(x)


def _spacing(x) -> None:
    if x is not None and not 0 < x <= 1:
        raise ValueError("must lie in (0, 1]")


def _seed(x: int) -> None:
    if not 0 <= x <= U64_MAX:
        raise ValueError("must be an unsigned 64-bit integer")


def _gammas(xs) -> None:
    if any(g < 1 for g in xs):
        raise ValueError("targets must be >= 1")


def _kernel_order(p: int) -> None:
    if p not in range(5):
        raise ValueError("must be in 0..4")


def _tol(x: float) -> None:
    if not 0 < x < 0.25:
        raise ValueError("must lie in (0, 0.25)")


def _grid(x: int) -> None:
    if x < 16:
        raise ValueError("must be >= 16")


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], object]
    check: Callable[[object], None] | None = None
    default: object = None
    help: str = ""


_SCENE = {
    "n_antennas": Key(_int, _odd_order, 31, "odd number of antennas N"),
    "n_paths": Key(_int, _positive, 5, "number of true paths L"),
    "path_spacing": Key(_optional_float, _spacing, None, "spacing of the true paths (default 1/L)"),
    "snr_db": Key(_float, None, 0.0, "SNR in dB"),
}

KEYS = {
    "kernel": {
        "n": Key(_int, _odd_order, None, "kernel order N"),
        "t": Key(_float, None, None, "evaluation point"),
        "order": Key(_int, _kernel_order, 0, "derivative order 0..4"),
    },
    "crb": {
        **_SCENE,
        "delta_ratio": Key(_float, _ratio, 0.1, "fake offset delta / Delta"),
        "scenario": Key(_choice("aoa", "full"), None, "aoa", "aoa or full"),
    },
    "bounds": {
        **_SCENE,
        "delta_ratio": Key(_float, _ratio, 0.1, "fake offset delta / Delta"),
        "scenario": Key(_choice("aoa", "full"), None, "aoa", "aoa or full"),
        "variant": Key(_choice("rigorous", "published"), None, "rigorous", "rigorous or published"),
    },
    "sweep-crb": {
        **_SCENE,
        "delta_ratios": Key(_float_list, _ratios, None, "comma-separated delta / Delta values"),
        "n_trials": Key(_int, _positive, 200, "fake draws per ratio"),
        "seed": Key(_int, _seed, None, "u64 seed (required)"),
    },
    "sweep-margin": {
        **_SCENE,
        "gamma_targets": Key(_float_list, _gammas, (2.0, 5.0, 20.0, 50.0, 200.0),
                             "comma-separated margin targets"),
        "tol": Key(_float, _tol, 1e-4, "bisection tolerance on delta / Delta"),
        "n_trials": Key(_int, _positive, 200, "fake draws per ratio"),
        "seed": Key(_int, _seed, None, "u64 seed (required)"),
        "delta_ratios": Key(_float_list, _ratios, None, "ignored; accepted for config reuse"),
    },
    "ber": {
        "n_paths": Key(_int, _positive, 3, "number of users L"),
        "n_antennas": Key(_int, _odd_order, 15, "odd number of antennas N"),
        "n_pilots": Key(_int, _positive, 15, "pilot symbols per user"),
        "delta_ratio": Key(_float, _ratio, 0.01, "fake offset delta / Delta"),
        "snr_db_list": Key(_float_list, None, (0.0, 5.0, 10.0, 15.0, 20.0), "comma-separated SNRs in dB"),
        "n_data_symbols": Key(_int, _positive, 20, "data symbols per user and trial"),
        "n_trials": Key(_int, _positive, 100, "Monte-Carlo trials"),
        "grid_size": Key(_int, _grid, 4096, "MUSIC search grid size"),
        "fakes_in_data": Key(_bool, None, False, "keep the fake paths on during data"),
        "fake_waveform": Key(_choice(*FAKE_WAVEFORMS), None, "replica", "symbols carried by fake paths"),
        "seed": Key(_int, _seed, None, "u64 seed (required)"),
    },
}


# --- config parsing ---------------------------------------------------------------

def read_config_text(text: str) -> dict:
    """Raw ``key -> str`` pairs from config text or a previous CSV's header."""
    lines = text.splitlines()
    echoed = [ln[1:].strip()[len("config."):] for ln in lines
              if ln.startswith("#") and ln[1:].strip().startswith("config.")]
    if echoed:
        body = echoed
    else:
        body = [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    raw = {}
    for n, line in enumerate(body, 1):
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def parse_config(command: str, raw: dict) -> dict:
    """Validate raw string values for ``command``, filling defaults.

    Raises:
        ConfigError: unknown key, unparsable value, range violation or missing
            mandatory key; the message names the key.
    """
    if command not in KEYS:
        raise ConfigError(f"unknown subcommand {command!r}")
    spec = KEYS[command]
    unknown = sorted(set(raw) - set(spec))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} for {command}")
    config = {}
    for key, rule in spec.items():
        if key in raw:
            try:
                value = rule.parse(raw[key]) if isinstance(raw[key], str) else raw[key]
            except ValueError as exc:
                raise ConfigError(f"{key}: cannot parse {raw[key]!r} ({exc})") from None
        else:
            value = rule.default
        if value is not None and rule.check is not None:
            try:
                rule.check(value)
            except ValueError as exc:
                raise ConfigError(f"{key}={raw.get(key, value)}: {exc}") from None
        config[key] = value
    if command in STOCHASTIC and config.get("seed") is None:
        raise ConfigError(f"seed is required for {command}")
    if command == "kernel":
        for key in ("n", "t"):
            if config[key] is None:
                raise ConfigError(f"{key} is required for kernel")
    return config


# --- subcommands ----------------------------------------------------------------

def _scene_geometry(config: dict) -> tuple:
    taus = equispaced(config["n_paths"], config["path_spacing"])
    Delta = min_separation(taus) if taus.size > 1 else 1.0
    eta = sim.noise_std_for_snr(config["snr_db"], config["n_paths"], config["n_antennas"])
    return taus, Delta, eta


def run_kernel(config: dict, workers: int) -> ExperimentTable:
    value = dirichlet(config["n"], config["t"], config["order"])
    table = ExperimentTable(("n", "t", "order", "value"), metadata=_meta("kernel", config))
    table.add_row(config["n"], config["t"], config["order"], value)
    return table


def run_crb(config: dict, workers: int) -> ExperimentTable:
    """Extremal CRB eigenvalues for unit coefficients, fakes at tau + delta."""
    taus, Delta, eta = _scene_geometry(config)
    fakes = taus + config["delta_ratio"] * Delta
    L, N = taus.size, config["n_antennas"]
    scene = ChannelScene(N, taus, np.ones(L), eta, fakes, np.ones(L))
    if config["scenario"] == "aoa":
        bob, eve = crb.bob_aoa_crb(scene), crb.eve_aoa_crb(scene)
    else:
        bob, eve = crb.bob_full_crb(scene), crb.eve_full_crb(scene)
    table = ExperimentTable(("scenario", "bob_lambda_min", "bob_lambda_max", "eve_lambda_min",
                             "eve_lambda_max", "margin"), metadata=_meta("crb", config))
    table.add_row(config["scenario"], bob.lambda_min, bob.lambda_max, eve.lambda_min,
                  eve.lambda_max, crb.privacy_margin(eve, bob))
    return table


def run_bounds(config: dict, workers: int) -> ExperimentTable:
    """Closed-form CRB bounds for unit coefficients; Bob's needs Delta >= pi^2/N."""
    taus, Delta, eta = _scene_geometry(config)
    N, L = config["n_antennas"], taus.size
    delta = config["delta_ratio"] * Delta
    scenario, variant = config["scenario"], config["variant"]
    eve_variant = {"rigorous": "lemma_explicit", "published": "paper_stated"}[variant]
    if scenario == "aoa":
        bob_variant = {"rigorous": "proof_consistent", "published": "paper_stated"}[variant]
        bob = bounds.bob_crb_bound_aoa(N, Delta, eta, 1.0, bob_variant).value
        eve = bounds.eve_crb_bound_aoa(N, L, Delta, delta, eta, 1.0, eve_variant).value
    else:
        bob = bounds.bob_crb_bound_full(N, Delta, eta, 1.0).value
        eve = bounds.eve_crb_bound_full(N, L, Delta, delta, eta, 1.0, eve_variant).value
    table = ExperimentTable(("scenario", "variant", "bob_bound", "eve_bound", "margin_bound"),
                            metadata=_meta("bounds", config))
    table.add_row(scenario, variant, bob, eve, eve / bob)
    return table


def _sweep_config(config: dict, workers: int) -> sim.SweepConfig:
    kwargs = dict(n_antennas=config["n_antennas"], n_paths=config["n_paths"],
                  path_spacing=config["path_spacing"], snr_db=config["snr_db"],
                  n_trials=config["n_trials"], seed=config["seed"], workers=workers)
    if config.get("delta_ratios") is not None:
        kwargs["delta_ratios"] = config["delta_ratios"]
    return sim.SweepConfig(**kwargs)


def run_sweep_crb(config: dict, workers: int) -> ExperimentTable:
    return sim.mc_crb_realizations(_sweep_config(config, workers))


def run_sweep_margin(config: dict, workers: int) -> ExperimentTable:
    table = sim.margin_sweep(_sweep_config(config, workers), config["gamma_targets"],
                             tol=config["tol"])
    table.metadata["config.gamma_targets"] = list(config["gamma_targets"])
    table.metadata["config.tol"] = config["tol"]
    return table


def run_ber(config: dict, workers: int) -> ExperimentTable:
    return ber_experiment(BerConfig(workers=workers, **config))


def _meta(command: str, config: dict) -> dict:
    meta = {"command": command}
    for key, value in config.items():
        meta[f"config.{key}"] = "" if value is None else value
    return meta


RUNNERS = {
    "kernel": run_kernel,
    "crb": run_crb,
    "bounds": run_bounds,
    "sweep-crb": run_sweep_crb,
    "sweep-margin": run_sweep_margin,
    "ber": run_ber,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fakepath",
                                     description="Fake-path privacy: CRBs, bounds and BER experiments.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for command, spec in KEYS.items():
        p = sub.add_parser(command, help=f"run {command}")
        p.add_argument("--config", help="key=value file (or a previous output CSV)")
        p.add_argument("--out", help="CSV output path (default: standard output)")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        for key, rule in spec.items():
            flags = [f"--{key.replace('_', '-')}"]
            if "_" in key:
                flags.append(f"--{key}")
            p.add_argument(*flags, dest=key, default=None, metavar="VALUE", help=rule.help)
    return parser


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


def _glue_negative_values(argv: list) -> list:
    """Turn ``--flag -10,-5`` into ``--flag=-10,-5``; argparse reads the
    bare value as an option otherwise."""
    out: list = []
    for token in argv:
        if (out and _NEGATIVE_VALUE.match(token) and out[-1].startswith("--")
                and "=" not in out[-1]):
            out[-1] = f"{out[-1]}={token}"
        else:
            out.append(token)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_glue_negative_values(argv))
    command = args.command
    try:
        raw = {}
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                raw.update(read_config_text(fh.read()))
        for key in KEYS[command]:
            if getattr(args, key) is not None:
                raw[key] = getattr(args, key)
        if args.workers < 1:
            raise ConfigError("workers must be >= 1")
        config = parse_config(command, raw)
    except (ConfigError, OSError) as exc:
        print(f"fakepath {command}: {exc}", file=sys.stderr)
        return 2
    try:
        table = RUNNERS[command](config, args.workers)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"fakepath {command}: {exc}", file=sys.stderr)
        return 1
    text = table.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
