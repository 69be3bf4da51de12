"""Receiver-side inference: fake removal, MUSIC, coefficient fit, ML decoding."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from . import streams
from .sim import _map, noise_std_for_snr
from .steering import check_order, vandermonde
from .table import ExperimentTable
from .torus import canonical, equispaced, signed_diff

BER_COLUMNS = ("snr_db", "ber_bob", "ber_eve", "ber_csi", "trials")


class MusicError(RuntimeError):
    def __init__(self, found: int, wanted: int, peaks: np.ndarray):
        super().__init__(f"MUSIC found {found} peaks, {wanted} requested")
        self.found = found
        self.peaks = peaks


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SnapshotBlock:
    """T snapshots (rows) of an N-antenna array, with optional T x L pilots."""
    snapshots: np.ndarray
    pilot_symbols: np.ndarray | None = None

    def __post_init__(self):
        Y = np.atleast_2d(np.asarray(self.snapshots, dtype=complex))
        object.__setattr__(self, "snapshots", Y)
        if self.pilot_symbols is not None:
            S = np.asarray(self.pilot_symbols)
            S = S.reshape(Y.shape[0], -1)
            object.__setattr__(self, "pilot_symbols", S)


@dataclass(frozen=True)
class CsiEstimate:
    tau_hat: np.ndarray
    c_hat: np.ndarray
    residual: float = math.nan


def remove_fake(y, fakes, fake_coeffs, n_antennas: int) -> np.ndarray:
    """Subtract the known fake component V0(fakes) c_fake.

    ``y`` may be one snapshot (N,) or a block (T, N); in the latter case
    ``fake_coeffs`` may be (K,) or per-snapshot (T, K).
    """
    y = np.asarray(y, dtype=complex)
    fakes = np.atleast_1d(np.asarray(fakes, dtype=float))
    if fakes.size == 0:
        return y.copy()
    if y.shape[-1] != n_antennas:
        raise ValueError(f"observation has {y.shape[-1]} entries, expected {n_antennas}")
    fc = np.asarray(fake_coeffs, dtype=complex)
    if fc.shape[-1] != fakes.size:
        raise ValueError("fake_coeffs do not match fakes")
    return y - fc @ vandermonde(n_antennas, fakes).T


def sample_covariance(snapshots: np.ndarray) -> np.ndarray:
    Y = np.atleast_2d(snapshots)
    return Y.T @ Y.conj() / Y.shape[0]


def music_spectrum_denominator(noise_basis: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """||U_noise^H v0(t)||^2 at each grid point (zeros at the sources)."""
    N = noise_basis.shape[0]
    proj = noise_basis.conj().T @ vandermonde(N, grid)
    return np.sum(np.abs(proj) ** 2, axis=0)


def music_estimate(block: SnapshotBlock | np.ndarray, n_sources: int,
                   grid_size: int = 4096, xtol: float = 1e-8) -> np.ndarray:
    """MUSIC angle estimates on the torus, sorted ascending.

    Peaks of 1 / ||U_noise^H v0(t)||^2 are located on a uniform grid of
    ``grid_size`` points, the ``n_sources`` strongest local maxima are kept and
    each is refined by a bounded scalar search.

    Raises:
        MusicError: fewer local maxima than ``n_sources``.
    """
    Y = block.snapshots if isinstance(block, SnapshotBlock) else np.atleast_2d(block)
    N = Y.shape[1]
    check_order(N)
    if not 0 < n_sources < N:
        raise ValueError("need 0 < n_sources < N")
    _, U = np.linalg.eigh(sample_covariance(Y))
    Un = U[:, : N - n_sources]
    grid = np.arange(grid_size) / grid_size
    q = music_spectrum_denominator(Un, grid)
    is_min = (q < np.roll(q, 1)) & (q <= np.roll(q, -1))
    idx = np.flatnonzero(is_min)
    idx = idx[np.argsort(q[idx], kind="stable")]
    h = 1.0 / grid_size
    peaks = []
    for i in idx[:n_sources]:
        g = grid[i]
        res = minimize_scalar(lambda t: float(music_spectrum_denominator(Un, np.array([t]))[0]),
                              bounds=(g - h, g + h), method="bounded",
                              options={"xatol": xtol})
        peaks.append(res.x if res.fun <= q[i] else g)
    peaks = np.sort(canonical(np.asarray(peaks, dtype=float)))
    if peaks.size < n_sources:
        raise MusicError(peaks.size, n_sources, peaks)
    return peaks


def ls_coefficients(block: SnapshotBlock, tau_hat, n_antennas: int | None = None,
                    rcond: float = 1e-10) -> CsiEstimate:
    """Joint least-squares fit of c in y_t = V0(tau_hat) diag(c) s_t + noise.

    Raises:
        RankDeficientError: the normal matrix is singular within ``rcond``.
    """
    if block.pilot_symbols is None:
        raise ValueError("pilot symbols are required")
    Y, S = block.snapshots, block.pilot_symbols
    N = Y.shape[1] if n_antennas is None else n_antennas
    tau_hat = np.atleast_1d(np.asarray(tau_hat, dtype=float))
    if S.shape[1] != tau_hat.size:
        raise ValueError("pilot matrix must have one column per path")
    V = vandermonde(N, tau_hat)
    A = (V.conj().T @ V) * (S.conj().T @ S)
    rhs = np.sum(S.conj() * (Y @ V.conj()), axis=0)
    ev = np.linalg.eigvalsh(0.5 * (A + A.conj().T))
    if ev[0] <= rcond * ev[-1]:
        raise RankDeficientError("coefficient fit is rank deficient")
    c = np.linalg.solve(A, rhs)
    resid = Y - (S * c[None, :]) @ V.T
    return CsiEstimate(tau_hat, c, float(np.sum(np.abs(resid) ** 2) / Y.shape[0]))


def _lstsq_coefficients(block: SnapshotBlock, tau_hat, n_antennas: int) -> CsiEstimate:
    """Minimum-norm fit used when the normal matrix is singular."""
    Y, S = block.snapshots, block.pilot_symbols
    V = vandermonde(n_antennas, tau_hat)
    # rows indexed by (t, n): y_t[n] = sum_l V[n, l] S[t, l] c_l
    design = (S[:, None, :] * V[None, :, :]).reshape(-1, V.shape[1])
    c, *_ = np.linalg.lstsq(design, Y.reshape(-1), rcond=None)
    return CsiEstimate(np.asarray(tau_hat), c)


def _candidates(n_paths: int) -> np.ndarray:
    return np.array(list(itertools.product((-1.0, 1.0), repeat=n_paths)))


def ml_decode(y, tau_hat, c_hat, n_antennas: int | None = None) -> np.ndarray:
    """Exhaustive ML BPSK detection: argmin_b ||y - V0(tau_hat) diag(c_hat) b||^2.

    ``y`` is one snapshot (N,) or a stack (K, N). Ties go to the
    lexicographically smallest b (with -1 < +1).
    """
    y = np.asarray(y, dtype=complex)
    single = y.ndim == 1
    Y = np.atleast_2d(y)
    N = Y.shape[1] if n_antennas is None else n_antennas
    c_hat = np.atleast_1d(np.asarray(c_hat, dtype=complex))
    if c_hat.size > 20:
        raise ValueError("exhaustive search limited to 20 paths")
    B = _candidates(c_hat.size)
    H = vandermonde(N, tau_hat) * c_hat[None, :]
    points = B @ H.T
    dist = np.sum(np.abs(Y[:, None, :] - points[None, :, :]) ** 2, axis=2)
    bits = B[np.argmin(dist, axis=1)].astype(int)
    return bits[0] if single else bits


# --- BER experiment ----------------------------------------------------------

FAKE_WAVEFORMS = ("replica", "independent")


@dataclass(frozen=True)
class BerConfig:
    n_paths: int = 3
    n_antennas: int = 15
    n_pilots: int = 15
    delta_ratio: float = 0.01
    snr_db_list: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    n_data_symbols: int = 20
    n_trials: int = 100
    seed: int = 0
    grid_size: int = 4096
    fakes_in_data: bool = False
    fake_waveform: str = "replica"
    workers: int = 1

    def __post_init__(self):
        if self.fake_waveform not in FAKE_WAVEFORMS:
            raise ValueError(f"fake_waveform must be one of {FAKE_WAVEFORMS}")
        if not 0 < self.delta_ratio < 0.5:
            raise ValueError("delta_ratio must lie in (0, 1/2)")
        if self.n_pilots < 1 or self.n_trials < 1 or self.n_data_symbols < 1:
            raise ValueError("counts must be positive")
        if 2 * self.n_paths >= self.n_antennas:
            raise ValueError("Eve needs 2 L < N to run MUSIC")


def _music_or_fallback(Y: np.ndarray, n_sources: int, grid_size: int) -> np.ndarray:
    """MUSIC estimate; missing peaks are filled with the strongest grid points."""
    try:
        return music_estimate(Y, n_sources, grid_size)
    except MusicError as err:
        N = Y.shape[1]
        _, U = np.linalg.eigh(sample_covariance(Y))
        grid = np.arange(grid_size) / grid_size
        q = music_spectrum_denominator(U[:, : N - n_sources], grid)
        extra = [g for g in grid[np.argsort(q)] if np.all(np.abs(signed_diff(g, err.peaks)) > 0)]
        return np.sort(np.concatenate([err.peaks, extra[: n_sources - err.found]]))


def _fit(block: SnapshotBlock, tau_hat, n_antennas: int) -> CsiEstimate:
    try:
        return ls_coefficients(block, tau_hat, n_antennas)
    except RankDeficientError:
        return _lstsq_coefficients(block, tau_hat, n_antennas)


def pilot_correlation(Y: np.ndarray, pilots: np.ndarray, tau_hat, n_antennas: int) -> np.ndarray:
    """|sum_t s_t,user^* v0(tau_k)^H y_t|, users along rows, paths along columns."""
    Z = Y @ vandermonde(n_antennas, tau_hat).conj()
    return np.abs(pilots.conj().T @ Z)


def associate_paths(Y: np.ndarray, pilots: np.ndarray, tau_hat, n_antennas: int,
                    one_to_one: bool = False) -> np.ndarray:
    """User index owning each estimated path, from pilot correlations.

    With ``one_to_one`` the assignment is a permutation (needs as many paths
    as users); otherwise each path independently takes its best user.
    """
    corr = pilot_correlation(Y, pilots, tau_hat, n_antennas)
    if not one_to_one:
        return np.argmax(corr, axis=0)
    users, paths = linear_sum_assignment(-corr)
    owner = np.empty(len(paths), dtype=int)
    owner[paths] = users
    return owner


def _best_matching_errors(decoded: np.ndarray, bits: np.ndarray) -> int:
    """Bit errors under the most favorable assignment of decoded streams to users."""
    L = bits.shape[1]
    best = None
    for perm in itertools.permutations(range(L)):
        e = int(np.sum(decoded[:, list(perm)] != bits))
        best = e if best is None else min(best, e)
    return best


def bob_estimate(Y: np.ndarray, pilots: np.ndarray, n_paths: int, n_antennas: int,
                 grid_size: int) -> CsiEstimate:
    """Bob's CSI from fake-free pilots, returned in user order."""
    tau_hat = _music_or_fallback(Y, n_paths, grid_size)
    owner = associate_paths(Y, pilots, tau_hat, n_antennas, one_to_one=True)
    order = np.argsort(owner)
    tau_hat = tau_hat[order]
    return _fit(SnapshotBlock(Y, pilots), tau_hat, n_antennas)


def eve_estimate(Y: np.ndarray, pilots: np.ndarray, n_paths: int, n_antennas: int,
                 grid_size: int) -> CsiEstimate:
    """Eve's CSI: MUSIC with 2L sources, blind pilot association, joint LS fit,
    then the L strongest paths are kept as the presumed users."""
    tau_all = _music_or_fallback(Y, 2 * n_paths, grid_size)
    owner = associate_paths(Y, pilots, tau_all, n_antennas)
    est = _fit(SnapshotBlock(Y, pilots[:, owner]), tau_all, n_antennas)
    keep = np.sort(np.argsort(-np.abs(est.c_hat), kind="stable")[:n_paths])
    return CsiEstimate(tau_all[keep], est.c_hat[keep], est.residual)


def _ber_trial(args) -> np.ndarray:
    """Bit-error counts (bob, eve, csi) per SNR point for one trial."""
    config, trial = args
    L, N, T, K = config.n_paths, config.n_antennas, config.n_pilots, config.n_data_symbols
    rng = streams.substream(config.seed, streams.BER_TRIAL, trial)
    taus = equispaced(L, offset=rng.uniform())
    Delta = 1.0 / L
    fakes = canonical(taus + config.delta_ratio * Delta)
    c = np.exp(2j * np.pi * rng.uniform(size=L))
    c_fake = np.exp(2j * np.pi * rng.uniform(size=L))
    pilots = rng.choice([-1.0, 1.0], size=(T, L))
    bits = rng.choice([-1, 1], size=(K, L))
    jam_pilots = rng.choice([-1.0, 1.0], size=(T, L))
    jam_bits = rng.choice([-1, 1], size=(K, L))
    if config.fake_waveform == "replica":
        jam_pilots, jam_bits = pilots, bits
    pilot_noise = streams.complex_normal(rng, (T, N))
    data_noise = streams.complex_normal(rng, (K, N))

    V_true = vandermonde(N, taus)
    V_fake = vandermonde(N, fakes)
    # the jammer's symbols are shared with Bob over the side channel
    clean_pilot = (pilots * c) @ V_true.T + (jam_pilots * c_fake) @ V_fake.T
    clean_data = (bits * c) @ V_true.T
    if config.fakes_in_data:
        clean_data = clean_data + (jam_bits * c_fake) @ V_fake.T

    counts = np.zeros((len(config.snr_db_list), 3), dtype=np.int64)
    for s, snr_db in enumerate(config.snr_db_list):
        eta = noise_std_for_snr(snr_db, L, N)
        Yp = clean_pilot + eta * pilot_noise
        Yd = clean_data + eta * data_noise

        Yb = remove_fake(Yp, fakes, jam_pilots * c_fake, N)
        bob = bob_estimate(Yb, pilots, L, N, config.grid_size)
        Yd_bob = remove_fake(Yd, fakes, jam_bits * c_fake, N) if config.fakes_in_data else Yd
        counts[s, 0] = int(np.sum(ml_decode(Yd_bob, bob.tau_hat, bob.c_hat, N) != bits))

        eve = eve_estimate(Yp, pilots, L, N, config.grid_size)
        counts[s, 1] = _best_matching_errors(ml_decode(Yd, eve.tau_hat, eve.c_hat, N), bits)

        Yd_csi = Yd_bob
        counts[s, 2] = int(np.sum(ml_decode(Yd_csi, taus, c, N) != bits))
    return counts


def ber_experiment(config: BerConfig) -> ExperimentTable:
    """Two-phase pilot/data experiment; BER per SNR for Bob, Eve and perfect CSI."""
    results = _map(_ber_trial, [(config, i) for i in range(config.n_trials)], config.workers)
    counts = np.sum(results, axis=0)
    n_bits = config.n_trials * config.n_data_symbols * config.n_paths
    meta = {"command": "ber", "eve_assignment": "oracle"}
    for key, value in asdict(config).items():
        if key != "workers":
            meta[f"config.{key}"] = value
    table = ExperimentTable(BER_COLUMNS, metadata=meta)
    for s, snr_db in enumerate(config.snr_db_list):
        b, e, p = counts[s] / n_bits
        table.add_row(snr_db, b, e, p, config.n_trials)
    return table
