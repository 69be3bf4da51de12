"""Closed-form bounds on Bob's and Eve's Cramer-Rao matrices and on the margin.

Two families are exposed:

* ``paper_stated`` evaluates the compact published forms, with their
  unnamed constants instantiated from the kernel sup values.
* ``proof_consistent`` / ``lemma_explicit`` follow the proof chain with every
  constant explicit. These are the variants validated against realized CRBs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .steering import check_order, derivative_scale, dirichlet, dirichlet_sup_near_zero

# |D_N^{(p+2)}(t)| <= C_p N^{p+1} / |t| on [-1/2, 1/2)
ENVELOPE_CONSTANTS = {0: 5.0, 1: 16.0, 2: 50.0}


class HypothesisError(ValueError):
    """A separation hypothesis of a bound does not hold."""


@dataclass(frozen=True)
class BoundReport:
    value: float
    variant: str
    inputs: dict = field(default_factory=dict)


def gp_matrix(n_antennas: int, taus, fakes, p: int) -> np.ndarray:
    """L x L matrix of second mixed differences of D_N^{(p)}.

    G_p(i, j) = D(t_i - t_j) - D(f_i - t_j) + D(f_i - f_j) - D(t_i - f_j).
    """
    if p not in (0, 1, 2):
        raise ValueError("p must be in {0, 1, 2}")
    t = np.atleast_1d(np.asarray(taus, dtype=float))
    f = np.atleast_1d(np.asarray(fakes, dtype=float))
    if t.shape != f.shape:
        raise ValueError("taus and fakes must have the same cardinality")
    D = lambda x: dirichlet(n_antennas, x, p)
    return (D(t[:, None] - t[None, :]) - D(f[:, None] - t[None, :])
            + D(f[:, None] - f[None, :]) - D(t[:, None] - f[None, :]))


def inf_norm(m) -> float:
    """Maximum absolute row sum."""
    m = np.atleast_2d(np.asarray(m))
    return float(np.max(np.sum(np.abs(m), axis=1)))


def dirichlet_envelope_check(n_antennas: int, p: int, samples: int = 100_000) -> float:
    """Worst ratio |D_N^{(p+2)}(t)| |t| / (C_p N^{p+1}) over a uniform grid.

    The envelope claim holds on the grid iff the returned value is <= 1.
    """
    N = check_order(n_antennas)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    t = -0.5 + np.arange(samples) / samples
    t = t[t != 0.0]
    worst = 0.0
    for chunk in np.array_split(t, max(1, t.size // 20_000)):
        r = np.abs(dirichlet(N, chunk, p + 2)) * np.abs(chunk)
        worst = max(worst, float(np.max(r)))
    return worst / (ENVELOPE_CONSTANTS[p] * N ** (p + 1))


def _harmonic_tail(n_paths: int, Delta: float, delta: float) -> float:
    K = math.ceil((n_paths - 1) / 2)
    k = np.arange(1, K + 1)
    return float(np.sum(1.0 / (k * Delta - 2.0 * delta)))


def _clamped_log(n_paths: int) -> float:
    return max(math.log(n_paths / 2.0), 0.0)


def _check_lemma(delta: float, Delta: float) -> None:
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if not delta < Delta / 2.0:
        raise HypothesisError(
            f"Lemma 1 hypothesis violated: delta={delta:g} >= Delta/2={Delta / 2:g}")


def lemma1_bound(n_antennas: int, n_paths: int, delta: float, Delta: float, p: int,
                 variant: str = "exact_sum") -> float:
    """Upper bound on ||G_p||_inf for inter-separation ``delta`` < ``Delta``/2.

    Args:
        n_antennas: Kernel order N.
        n_paths: Number of true paths L.
        delta: Matched true/fake separation.
        Delta: Minimal separation of the true paths.
        p: 0, 1 or 2.
        variant: ``"exact_sum"`` keeps the finite harmonic-type sum;
            ``"log_majorized"`` replaces it by the log(L/2) expression (clamped
            at zero for L <= 2).
    """
    N = check_order(n_antennas)
    _check_lemma(delta, Delta)
    if p not in ENVELOPE_CONSTANTS:
        raise ValueError("p must be in {0, 1, 2}")
    if delta == 0:
        return 0.0
    Cp = ENVELOPE_CONSTANTS[p]
    sup = dirichlet_sup_near_zero(N, p + 2, 2.0 * delta)
    if variant == "exact_sum":
        tail = 2.0 * Cp * N ** (p + 1) * _harmonic_tail(n_paths, Delta, delta)
    elif variant == "log_majorized":
        tail = (Cp * N ** (p + 2) * _clamped_log(n_paths)
                / (N * Delta * (1.0 - 2.0 * delta / Delta)))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return 4.0 * delta ** 2 * (sup + tail)


def _bob_factor(n_antennas: int, Delta: float) -> float:
    if Delta < np.pi ** 2 / n_antennas:
        raise HypothesisError(
            f"Theorem 1 hypothesis violated: Delta={Delta:g} < pi^2/N={np.pi ** 2 / n_antennas:g}")
    gap = 1.0 - np.pi ** 2 / (n_antennas * Delta)
    return math.inf if gap <= 0 else 1.0 / gap


def bob_crb_bound_aoa(n_antennas: int, Delta: float, eta: float, c_min: float,
                      variant: str = "proof_consistent") -> BoundReport:
    """Upper bound on lambda_max of Bob's angle CRB (coefficients known)."""
    N = check_order(n_antennas)
    if c_min <= 0:
        raise ValueError("c_min must be positive")
    factor = _bob_factor(N, Delta)
    if variant == "paper_stated":
        value = np.pi ** 2 / 3.0 * eta ** 2 * N ** 2 * factor / c_min ** 2
    elif variant == "proof_consistent":
        value = eta ** 2 / c_min ** 2 * 3.0 / (np.pi ** 2 * N ** 2) * factor
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return BoundReport(float(value), variant,
                       dict(n_antennas=N, Delta=Delta, eta=eta, c_min=c_min))


def eve_crb_bound_aoa(n_antennas: int, n_paths: int, Delta: float, delta: float,
                      eta: float, c_max: float,
                      variant: str = "lemma_explicit") -> BoundReport:
    """Lower bound on lambda_min of Eve's angle CRB (coefficients known)."""
    N = check_order(n_antennas)
    _check_lemma(delta, Delta)
    inputs = dict(n_antennas=N, n_paths=n_paths, Delta=Delta, delta=delta, eta=eta,
                  c_max=c_max)
    if delta == 0:
        return BoundReport(math.inf, variant, inputs)
    if variant == "lemma_explicit":
        value = eta ** 2 / (c_max ** 2 * lemma1_bound(N, n_paths, delta, Delta, 2))
    elif variant == "paper_stated":
        C = dirichlet_sup_near_zero(N, 4, 2.0 * delta) / N ** 4
        Cprime = ENVELOPE_CONSTANTS[2]
        denom = C + Cprime * _clamped_log(n_paths) / (N * Delta * (1.0 - 2.0 * delta / Delta))
        value = eta ** 2 * N ** 4 / (4.0 * delta ** 2 * denom) / c_max ** 2
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return BoundReport(float(value), variant, inputs)


def bob_crb_bound_full(n_antennas: int, Delta: float, eta: float,
                       c_min: float) -> BoundReport:
    """Upper bound on lambda_max of Bob's CRB on (c, u).

    The coefficient scaling is diag(1, c), so the weakest gain is min(1, c_min).
    """
    N = check_order(n_antennas)
    if c_min <= 0:
        raise ValueError("c_min must be positive")
    value = eta ** 2 / min(1.0, c_min) ** 2 * _bob_factor(N, Delta)
    return BoundReport(float(value), "proof_consistent",
                       dict(n_antennas=N, Delta=Delta, eta=eta, c_min=c_min))


def full_block_bound(b0: float, b1: float, b2: float, n_antennas: int) -> float:
    """max{b0 + b1/s, b1/s + b2/s^2} with s = sqrt(-D_N''(0))."""
    s = derivative_scale(n_antennas)
    return max(b0 + b1 / s, b1 / s + b2 / s ** 2)


def fhf_from_gp(n_antennas: int, taus, fakes) -> np.ndarray:
    """F^H F for F = W(taus) - W(fakes), assembled from the G_p matrices.

    With the steering conventions of this package the blocks are
    [[G0, -G1/s], [-G1^T/s, -G2/s^2]].
    """
    s = derivative_scale(n_antennas)
    G0, G1, G2 = (gp_matrix(n_antennas, taus, fakes, p) for p in range(3))
    return np.block([[G0, -G1 / s], [-G1.T / s, -G2 / s ** 2]])


def eve_crb_bound_full(n_antennas: int, n_paths: int, Delta: float, delta: float,
                       eta: float, c_max: float,
                       variant: str = "lemma_explicit") -> BoundReport:
    """Lower bound on lambda_min of Eve's CRB on (c, u)."""
    N = check_order(n_antennas)
    _check_lemma(delta, Delta)
    inputs = dict(n_antennas=N, n_paths=n_paths, Delta=Delta, delta=delta, eta=eta,
                  c_max=c_max)
    if delta == 0:
        return BoundReport(math.inf, variant, inputs)
    gain = max(1.0, c_max) ** 2
    if variant == "lemma_explicit":
        b = [lemma1_bound(N, n_paths, delta, Delta, p) for p in range(3)]
        value = eta ** 2 / (gain * full_block_bound(*b, N))
    elif variant == "paper_stated":
        s = derivative_scale(N)
        S = [dirichlet_sup_near_zero(N, p + 2, 2.0 * delta) for p in range(3)]
        C = full_block_bound(*S, N) / N ** 2
        C0, C1, C2 = (ENVELOPE_CONSTANTS[p] for p in range(3))
        Cprime = max(C0 + C1 * N / s, C1 * N / s + C2 * N ** 2 / s ** 2)
        denom = C + Cprime * _clamped_log(n_paths) / (N * Delta * (1.0 - 2.0 * delta / Delta))
        value = eta ** 2 * N ** 2 / (4.0 * delta ** 2 * denom) / gain
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return BoundReport(float(value), variant, inputs)


@dataclass(frozen=True)
class ReceiverParams:
    """Inputs of one receiver's bound: antennas, separations, noise, gains."""
    n_antennas: int
    Delta: float
    eta: float
    c_min: float = 1.0
    c_max: float = 1.0
    delta: float = 0.0
    n_paths: int = 1


def margin_bound(scenario: str, bob: ReceiverParams, eve: ReceiverParams,
                 variant: str = "rigorous") -> float:
    """Guaranteed privacy margin: Eve's lower bound over Bob's upper bound.

    Args:
        scenario: ``"aoa"`` (coefficients known) or ``"full"``.
        bob: Bob's parameters (uses n_antennas, Delta, eta, c_min).
        eve: Eve's parameters (uses all fields).
        variant: ``"rigorous"`` pairs lemma_explicit with proof_consistent;
            ``"published"`` pairs the two paper_stated forms.
    """
    eve_variant = {"rigorous": "lemma_explicit", "published": "paper_stated"}[variant]
    if scenario == "aoa":
        bob_variant = {"rigorous": "proof_consistent", "published": "paper_stated"}[variant]
        b = bob_crb_bound_aoa(bob.n_antennas, bob.Delta, bob.eta, bob.c_min, bob_variant)
        e = eve_crb_bound_aoa(eve.n_antennas, eve.n_paths, eve.Delta, eve.delta, eve.eta,
                              eve.c_max, eve_variant)
    elif scenario == "full":
        b = bob_crb_bound_full(bob.n_antennas, bob.Delta, bob.eta, bob.c_min)
        e = eve_crb_bound_full(eve.n_antennas, eve.n_paths, eve.Delta, eve.delta, eve.eta,
                               eve.c_max, eve_variant)
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return e.value / b.value
