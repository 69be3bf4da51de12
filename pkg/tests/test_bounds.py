import math

import numpy as np
import pytest

from conftest import random_admissible_scene, random_true_paths
from fakepath import bounds, crb
from fakepath.bounds import HypothesisError, ReceiverParams
from fakepath.crb import ChannelScene
from fakepath.steering import derivative_scale, dirichlet
from fakepath.torus import min_separation

pytestmark = pytest.mark.filterwarnings("ignore:singular FIM")


def test_gp_matrix_examples(rng):
    taus = rng.uniform(size=4)
    for p in range(3):
        assert np.allclose(bounds.gp_matrix(15, taus, taus, p), 0)
    d = 0.013
    assert bounds.gp_matrix(15, [0.2], [0.2 + d], 0)[0, 0] == pytest.approx(2 * (1 - dirichlet(15, d)))
    with pytest.raises(ValueError):
        bounds.gp_matrix(15, taus, taus, 3)
    with pytest.raises(ValueError):
        bounds.gp_matrix(15, taus, taus[:2], 0)


def test_inf_norm_examples():
    assert bounds.inf_norm(np.eye(4)) == 1
    assert bounds.inf_norm([[1, -2], [3, 0]]) == 3
    assert bounds.inf_norm(np.zeros((3, 3))) == 0


@pytest.mark.parametrize("N, p", [(15, 0), (31, 1), (63, 2)])
def test_envelope_examples(N, p):
    assert bounds.dirichlet_envelope_check(N, p, 100_000) <= 1


def test_envelope_detects_too_small_constant(monkeypatch):
    monkeypatch.setitem(bounds.ENVELOPE_CONSTANTS, 0, 1.0)
    assert bounds.dirichlet_envelope_check(31, 0, 10_000) > 1


def test_lemma_examples():
    for variant in ("exact_sum", "log_majorized"):
        assert bounds.lemma1_bound(31, 5, 0.0, 0.2, 1, variant) == 0.0
    N, delta = 31, 1e-4
    single = bounds.lemma1_bound(N, 1, delta, 0.2, 0)
    assert single == pytest.approx(4 * delta ** 2 * np.pi ** 2 / 3 * (N ** 2 - 1), rel=1e-6)
    with pytest.raises(HypothesisError, match="Lemma 1 hypothesis violated"):
        bounds.lemma1_bound(31, 5, 0.1, 0.2, 0)
    with pytest.raises(ValueError):
        bounds.lemma1_bound(31, 5, 0.01, 0.2, 0, "bogus")


def test_lemma_exact_sum_bounds_gp_norm(rng):
    for _ in range(300):
        s = random_admissible_scene(rng, need_eve_rank=False, ratio_range=(1e-4, 0.499))
        for p in range(3):
            norm = bounds.inf_norm(bounds.gp_matrix(s["N"], s["taus"], s["fakes"], p))
            assert norm <= bounds.lemma1_bound(s["N"], s["L"], s["delta"], s["Delta"], p)


def test_log_form_does_not_majorize_exact_sum():
    # the k = 1 term alone, 2/(Delta - 2 delta), beats log(L/2)/(Delta - 2 delta)
    # whenever L < 2 e^2, so the log form sits below the exact sum there
    for L in (3, 5, 8, 14):
        exact = bounds.lemma1_bound(31, L, 0.01, 0.2, 2, "exact_sum")
        logf = bounds.lemma1_bound(31, L, 0.01, 0.2, 2, "log_majorized")
        assert exact > logf


def test_log_form_exceeds_exact_sum_only_near_half_delta_with_many_paths():
    # sum_k 1/(k Delta - 2 delta) ~ H_K / Delta, about twice the log form, except
    # when delta -> Delta/2 blows up the log form's 1/(1 - 2 delta/Delta) factor
    L, Delta = 400, 1.0 / 400
    for ratio, log_wins in ((1e-3, False), (0.3, False), (0.45, True), (0.49, True)):
        exact = bounds.lemma1_bound(63, L, ratio * Delta, Delta, 0, "exact_sum")
        logf = bounds.lemma1_bound(63, L, ratio * Delta, Delta, 0, "log_majorized")
        assert (logf > exact) is log_wins


def test_bob_aoa_bound_examples():
    value = bounds.bob_crb_bound_aoa(63, 0.2, 1.0, 1.0, "paper_stated").value
    assert value == pytest.approx(np.pi ** 2 / 3 * 3969 / (1 - np.pi ** 2 / 12.6))
    a = bounds.bob_crb_bound_aoa(63, 0.2, 1.0, 1.0).value
    assert bounds.bob_crb_bound_aoa(63, 0.2, 2.0, 1.0).value == pytest.approx(4 * a)
    with pytest.raises(HypothesisError, match="Theorem 1 hypothesis violated"):
        bounds.bob_crb_bound_aoa(31, 0.2, 1.0, 1.0)


def test_bob_proof_consistent_bound_holds(rng):
    checked = 0
    while checked < 300:
        N = int(rng.choice(np.arange(15, 64, 2)))
        L = int(rng.integers(1, 7))
        if L * np.pi ** 2 / N > 1:
            continue
        if L == 1:
            taus, Delta = rng.uniform(size=1), 1.0
        else:
            taus = random_true_paths(rng, L, rng.uniform(np.pi ** 2 / N, 1.0 / L))
            Delta = min_separation(taus)
        c = rng.uniform(0.3, 2, L) * np.exp(2j * np.pi * rng.uniform(size=L))
        eta = float(rng.uniform(0.1, 2))
        scene = ChannelScene(N, taus, c, eta)
        realized = crb.bob_aoa_crb(scene).lambda_max
        assert realized <= bounds.bob_crb_bound_aoa(N, Delta, eta, scene.c_min).value
        full = crb.bob_full_crb(scene).lambda_max
        assert full <= bounds.bob_crb_bound_full(N, Delta, eta, scene.c_min).value
        checked += 1


def test_eve_aoa_bound_examples():
    assert bounds.eve_crb_bound_aoa(31, 5, 0.2, 0.0, 1.0, 1.0).value == math.inf
    values = [bounds.eve_crb_bound_aoa(31, 5, 0.2, d, 1.0, 1.0).value for d in (1e-2, 1e-3, 1e-4)]
    assert values[0] < values[1] < values[2]
    # regression pin: N=31, L=5, Delta=0.2, delta/Delta=0.05, eta=1, c_max=1
    pinned = bounds.eve_crb_bound_aoa(31, 5, 0.2, 0.01, 1.0, 1.0, "lemma_explicit").value
    assert pinned == pytest.approx(5.907400412087815e-05, rel=1e-9)
    with pytest.raises(HypothesisError):
        bounds.eve_crb_bound_aoa(31, 5, 0.2, 0.1, 1.0, 1.0)


def test_eve_lemma_explicit_bound_holds(rng):
    for _ in range(200):
        s = random_admissible_scene(rng)
        L = s["L"]
        c = rng.uniform(0.3, 2, L) * np.exp(2j * np.pi * rng.uniform(size=L))
        eta = float(rng.uniform(0.1, 2))
        scene = ChannelScene(s["N"], s["taus"], c, eta, s["fakes"], np.ones(L))
        realized = crb.eve_aoa_crb(scene).lambda_min
        bound = bounds.eve_crb_bound_aoa(s["N"], L, s["Delta"], s["delta"], eta, scene.c_max)
        assert realized >= bound.value


def test_paper_stated_eve_scales_as_n4_in_numerator():
    a = bounds.eve_crb_bound_aoa(63, 5, 0.2, 1e-3, 1.0, 1.0, "paper_stated").value
    C = bounds.dirichlet_sup_near_zero(63, 4, 2e-3) / 63 ** 4
    logt = 50.0 * math.log(2.5) / (63 * 0.2 * (1 - 1e-2))
    assert a == pytest.approx(63 ** 4 / (4e-6 * (C + logt)))


def test_full_block_bound_equals_inf_norm_of_assembled_bound():
    N = 31
    s = derivative_scale(N)
    b0, b1, b2 = 0.3, 2.0, 40.0
    assembled = np.array([[b0, b1 / s], [b1 / s, b2 / s ** 2]])
    assert bounds.full_block_bound(b0, b1, b2, N) == pytest.approx(bounds.inf_norm(assembled))


def test_full_bounds_hold_on_random_scenes(rng):
    checked = 0
    while checked < 100:
        s = random_admissible_scene(rng, ratio_range=(0.05, 0.49))
        L, N = s["L"], s["N"]
        if N < 4 * L:
            continue
        c = rng.uniform(0.3, 2, L) * np.exp(2j * np.pi * rng.uniform(size=L))
        scene = ChannelScene(N, s["taus"], c, 0.7, s["fakes"], np.ones(L))
        try:
            realized = crb.eve_full_crb(scene).lambda_min
        except crb.SingularFimError:
            continue
        bound = bounds.eve_crb_bound_full(N, L, s["Delta"], s["delta"], 0.7, scene.c_max)
        assert realized >= bound.value
        F = bounds.fhf_from_gp(N, s["taus"], s["fakes"])
        exact = [bounds.inf_norm(bounds.gp_matrix(N, s["taus"], s["fakes"], p)) for p in range(3)]
        assert bounds.inf_norm(F) <= bounds.full_block_bound(*exact, N) * (1 + 1e-12)
        checked += 1


def test_full_bound_limits():
    big = bounds.bob_crb_bound_full(10_001, 0.4, 1.0, 1.0).value
    assert big == pytest.approx(1.0, rel=1e-2)
    assert bounds.eve_crb_bound_full(31, 5, 0.2, 0.0, 1.0, 1.0).value == math.inf


def test_margin_bound_is_quotient():
    bob = ReceiverParams(63, 0.2, 0.8, c_min=0.5)
    eve = ReceiverParams(63, 0.2, 1.3, c_max=1.5, delta=0.004, n_paths=5)
    for scenario in ("aoa", "full"):
        g = bounds.margin_bound(scenario, bob, eve, "rigorous")
        if scenario == "aoa":
            e = bounds.eve_crb_bound_aoa(63, 5, 0.2, 0.004, 1.3, 1.5).value
            b = bounds.bob_crb_bound_aoa(63, 0.2, 0.8, 0.5).value
        else:
            e = bounds.eve_crb_bound_full(63, 5, 0.2, 0.004, 1.3, 1.5).value
            b = bounds.bob_crb_bound_full(63, 0.2, 0.8, 0.5).value
        assert g == e / b


def test_margin_bound_invariant_under_joint_noise_scaling():
    def margin(scale):
        bob = ReceiverParams(63, 0.2, 0.8 * scale)
        eve = ReceiverParams(63, 0.2, 0.8 * scale, delta=0.004, n_paths=5)
        return bounds.margin_bound("aoa", bob, eve)
    assert margin(3.0) == pytest.approx(margin(1.0), rel=1e-12)


def test_margin_bound_decreases_in_delta():
    bob = ReceiverParams(63, 0.2, 1.0)
    gammas = [bounds.margin_bound("aoa", bob, ReceiverParams(63, 0.2, 1.0, delta=r * 0.2, n_paths=5))
              for r in np.geomspace(1e-3, 0.45, 15)]
    assert all(b < a for a, b in zip(gammas, gammas[1:]))


def test_paper_margin_grows_like_n4_at_fixed_n_delta():
    # asymptotic claim: away from the Delta >= pi^2/N boundary the ratio tends to 16
    def gamma(N):
        eve = ReceiverParams(N, 0.2, 1.0, delta=0.5 / N, n_paths=5)
        return bounds.margin_bound("aoa", ReceiverParams(N, 0.2, 1.0), eve, "published")
    ratio = gamma(511) / gamma(255) / (511 / 255) ** 4
    assert ratio == pytest.approx(1.0, abs=0.2)


def test_hypothesis_violation_propagates_to_margin():
    with pytest.raises(HypothesisError):
        bounds.margin_bound("aoa", ReceiverParams(31, 0.2, 1.0),
                            ReceiverParams(31, 0.2, 1.0, delta=0.01, n_paths=5))
