import numpy as np
import pytest

from fakepath.torus import min_separation

# criterion id -> (passed, detail, seconds); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


def random_true_paths(rng: np.random.Generator, n_paths: int, min_sep: float) -> np.ndarray:
    """n_paths points on the torus whose circular gaps are all >= min_sep."""
    slack = 1.0 - n_paths * min_sep
    assert slack >= 0
    gaps = min_sep + slack * rng.dirichlet(np.ones(n_paths))
    return np.mod(rng.uniform() + np.concatenate([[0.0], np.cumsum(gaps[:-1])]), 1.0)


def random_admissible_scene(rng: np.random.Generator, max_paths: int = 8, max_n: int = 63,
                            ratio_range=(1e-2, 0.49), need_eve_rank: bool = True) -> dict:
    """True paths, matched fakes with delta < Delta/2, and N large enough for Eve."""
    L = int(rng.integers(2, max_paths + 1))
    n_min = 2 * L + 1 if need_eve_rank else 3
    N = int(rng.choice(np.arange(n_min | 1, max_n + 1, 2)))
    min_sep = rng.uniform(0.3, 1.0) / L
    taus = random_true_paths(rng, L, min_sep)
    Delta = min_separation(taus)
    ratio = float(np.exp(rng.uniform(*np.log(ratio_range))))
    delta = ratio * Delta
    signs = rng.choice([-1.0, 1.0], size=L)
    scale = rng.uniform(0.2, 1.0, size=L)
    scale[int(rng.integers(L))] = 1.0
    fakes = np.mod(taus + signs * scale * delta, 1.0)
    return dict(N=N, L=L, taus=taus, fakes=fakes, Delta=Delta, delta=delta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: (int(k[2:].rstrip("abc")), k)):
        passed, detail, seconds = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(
            f"{key:6s} {'PASS' if passed else 'FAIL'}  {seconds:7.2f}s  {detail}")
