"""Observation synthesis and Monte-Carlo CRB sweeps."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import bounds, crb, streams
from .crb import ChannelScene, SingularFimError
from .steering import vandermonde
from .table import ExperimentTable
from .torus import equispaced, min_separation, signed_diff

SWEEP_CRB_COLUMNS = (
    "delta_ratio", "eve_lambda_min_min", "eve_lambda_min_med", "eve_lambda_min_max",
    "eve_bound_lemma", "eve_bound_paper", "bob_lambda_max", "bob_bound_proof",
    "bob_bound_paper", "margin_realized", "skipped_trials",
)
SWEEP_MARGIN_COLUMNS = ("gamma_target", "delta_ratio", "margin_realized", "reachable")


@dataclass(frozen=True)
class Observation:
    y: np.ndarray
    scene: ChannelScene
    snapshot_index: int = 0


def default_delta_ratios() -> tuple:
    return tuple(np.geomspace(1e-3, 0.45, 20).tolist())


@dataclass(frozen=True)
class SweepConfig:
    n_antennas: int = 31
    n_paths: int = 5
    path_spacing: float | None = None
    delta_ratios: tuple = field(default_factory=default_delta_ratios)
    snr_db: float = 0.0
    n_trials: int = 200
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if any(not 0 < r < 0.5 for r in self.delta_ratios):
            raise ValueError("delta ratios must lie in (0, 1/2)")

    @property
    def taus(self) -> np.ndarray:
        return equispaced(self.n_paths, self.path_spacing)

    @property
    def Delta(self) -> float:
        return min_separation(self.taus)

    @property
    def noise_std(self) -> float:
        return noise_std_for_snr(self.snr_db, self.n_paths, self.n_antennas)


def synthesize(scene: ChannelScene, rng: np.random.Generator | None,
               snapshot_index: int = 0) -> Observation:
    """y = V0(taus) c + V0(fakes) c_fake + w with w ~ CN(0, eta^2 I).

    ``rng=None`` gives the noiseless observation.
    """
    N = scene.n_antennas
    y = vandermonde(N, scene.taus) @ scene.coeffs
    if scene.fakes.size:
        y = y + vandermonde(N, scene.fakes) @ scene.fake_coeffs
    if rng is not None:
        y = y + streams.complex_normal(rng, N, scene.noise_std)
    return Observation(y, scene, snapshot_index)


def snr_of(scene: ChannelScene) -> float:
    """||V0(taus)||_F^2 / E||w||^2 = L / (N eta^2) for unit-norm columns."""
    if scene.noise_std == 0:
        raise ValueError("SNR undefined for noiseless scene")
    return snr_linear(scene.n_paths, scene.n_antennas, scene.noise_std)


def snr_linear(n_paths: int, n_antennas: int, noise_std: float) -> float:
    if noise_std <= 0:
        raise ValueError("SNR undefined for noiseless scene")
    return n_paths / (n_antennas * noise_std ** 2)


def noise_std_for_snr(snr_db: float, n_paths: int, n_antennas: int) -> float:
    return math.sqrt(n_paths / (n_antennas * 10.0 ** (snr_db / 10.0)))


# --- CRB sweeps --------------------------------------------------------------

def fake_offsets(seed: int, n_trials: int, n_paths: int) -> np.ndarray:
    """Per-trial offsets in [-1, 1]; fakes are taus + delta * offsets.

    Offsets are keyed by trial only, so every delta ratio reuses the same
    draws (common random numbers).
    """
    return np.stack([streams.substream(seed, streams.FAKE_DRAWS, i).uniform(-1, 1, n_paths)
                     for i in range(n_trials)])


def _eve_lambda_min(args) -> float:
    n_antennas, taus, noise_std, fakes = args
    scene = ChannelScene(n_antennas, taus, np.ones(taus.size), noise_std,
                         fakes, np.ones(fakes.size))
    try:
        return crb.realized_eve_aoa_lambda_min(scene)
    except SingularFimError:
        return math.nan


def _map(fn, items, workers: int) -> list:
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def eve_lambda_mins(config: SweepConfig, ratio: float, offsets: np.ndarray) -> np.ndarray:
    """Realized lambda_min(CRB_Eve) per trial for one delta ratio (NaN = skipped)."""
    taus = config.taus
    delta = ratio * config.Delta
    items = [(config.n_antennas, taus, config.noise_std, taus + delta * u) for u in offsets]
    return np.asarray(_map(_eve_lambda_min, items, config.workers))


def bob_lambda_max(config: SweepConfig) -> float:
    scene = ChannelScene(config.n_antennas, config.taus, np.ones(config.n_paths),
                         config.noise_std)
    return crb.realized_bob_aoa_lambda_max(scene)


def _bound_or_nan(fn, *args, **kwargs) -> float:
    try:
        return fn(*args, **kwargs).value
    except bounds.HypothesisError:
        return math.nan


def mc_crb_realizations(config: SweepConfig) -> ExperimentTable:
    """Realized vs. theoretical extremal CRB eigenvalues over delta/Delta.

    Coefficients are unit, both receivers see the same true paths and noise.
    Bob's bound columns are NaN when Delta < pi^2/N.
    """
    N, L, eta, Delta = config.n_antennas, config.n_paths, config.noise_std, config.Delta
    offsets = fake_offsets(config.seed, config.n_trials, L)
    bob_max = bob_lambda_max(config)
    bob_proof = _bound_or_nan(bounds.bob_crb_bound_aoa, N, Delta, eta, 1.0, "proof_consistent")
    bob_paper = _bound_or_nan(bounds.bob_crb_bound_aoa, N, Delta, eta, 1.0, "paper_stated")
    table = ExperimentTable(SWEEP_CRB_COLUMNS, metadata=_echo("sweep-crb", config))
    total_skipped = 0
    for ratio in config.delta_ratios:
        lam = eve_lambda_mins(config, ratio, offsets)
        ok = lam[~np.isnan(lam)]
        skipped = int(lam.size - ok.size)
        total_skipped += skipped
        delta = ratio * Delta
        lemma = bounds.eve_crb_bound_aoa(N, L, Delta, delta, eta, 1.0, "lemma_explicit").value
        paper = bounds.eve_crb_bound_aoa(N, L, Delta, delta, eta, 1.0, "paper_stated").value
        if ok.size:
            lo, med, hi = float(ok.min()), float(np.median(ok)), float(ok.max())
        else:
            lo = med = hi = math.nan
        table.add_row(ratio, lo, med, hi, lemma, paper, bob_max, bob_proof, bob_paper,
                      med / bob_max, skipped)
    table.metadata["skipped_trials_total"] = total_skipped
    return table


def realized_margin(config: SweepConfig, ratio: float, offsets: np.ndarray,
                    bob_max: float) -> float:
    lam = eve_lambda_mins(config, ratio, offsets)
    lam = lam[~np.isnan(lam)]
    return float(np.median(lam)) / bob_max if lam.size else math.nan


def margin_sweep(config: SweepConfig, gamma_targets, tol: float = 1e-4) -> ExperimentTable:
    """Largest delta/Delta whose median realized margin reaches each target.

    The realized margin decreases with delta/Delta, so each target is found by
    bisection on [tol, 1/2 - tol]. Targets not met even at the smallest ratio
    are flagged with ``reachable = 0``.
    """
    if any(g < 1 for g in gamma_targets):
        raise ValueError("margin targets must be >= 1")
    offsets = fake_offsets(config.seed, config.n_trials, config.n_paths)
    bob_max = bob_lambda_max(config)
    cache: dict = {}

    def margin(r: float) -> float:
        if r not in cache:
            cache[r] = realized_margin(config, r, offsets, bob_max)
        return cache[r]

    r_min, r_max = tol, 0.5 - tol
    table = ExperimentTable(SWEEP_MARGIN_COLUMNS, metadata=_echo("sweep-margin", config))
    table.metadata["gamma_targets"] = list(gamma_targets)
    for gamma in gamma_targets:
        if margin(r_max) >= gamma:
            table.add_row(gamma, r_max, margin(r_max), 1)
            continue
        if not margin(r_min) >= gamma:
            table.add_row(gamma, math.nan, margin(r_min), 0)
            continue
        lo, hi = r_min, r_max
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if margin(mid) >= gamma:
                lo = mid
            else:
                hi = mid
        table.add_row(gamma, lo, margin(lo), 1)
    return table


def _echo(command: str, config) -> dict:
    meta = {"command": command}
    for key, value in asdict(config).items():
        if key == "workers":
            continue
        meta[f"config.{key}"] = "" if value is None else value
    return meta


# --- ML estimator vs. CRB -----------------------------------------------------

def ml_angle_estimate(y: np.ndarray, coeff: complex, n_antennas: int,
                      grid_factor: int = 64) -> float:
    """ML angle of a single known-coefficient path: grid search then refinement."""
    grid = np.arange(grid_factor * n_antennas) / (grid_factor * n_antennas)
    score = np.real(np.conj(coeff) * (vandermonde(n_antennas, grid).conj().T @ y))
    g = grid[int(np.argmax(score))]
    h = 1.0 / (grid_factor * n_antennas)
    objective = lambda t: -float(np.real(np.conj(coeff)
                                         * (vandermonde(n_antennas, [t])[:, 0].conj() @ y)))
    res = minimize_scalar(objective, bounds=(g - h, g + h), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x)


def ml_crb_consistency(n_antennas: int = 7, snr_db: float = 20.0, n_trials: int = 10_000,
                       seed: int = 0) -> tuple:
    """Monte-Carlo MSE of the ML angle estimator and the matching CRB.

    One path with known unit coefficient at a uniformly drawn angle. The CRB
    uses the real-parameter Fisher information 2 |c|^2 ||v1||^2 / eta^2.

    Returns:
        (mse, crb) as floats.
    """
    eta = noise_std_for_snr(snr_db, 1, n_antennas)
    err = np.empty(n_trials)
    for i in range(n_trials):
        rng = streams.substream(seed, streams.ML_TRIAL, i)
        tau = rng.uniform()
        coeff = np.exp(2j * np.pi * rng.uniform())
        scene = ChannelScene(n_antennas, [tau], [coeff], eta)
        y = synthesize(scene, rng).y
        err[i] = signed_diff(ml_angle_estimate(y, coeff, n_antennas), tau)
    fim = crb.fim_aoa_known_coeffs(ChannelScene(n_antennas, [0.0], [1.0], eta), "bob",
                                   real_parameter=True)
    return float(np.mean(err ** 2)), float(1.0 / fim.matrix[0, 0].real)
