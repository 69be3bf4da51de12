"""Fisher information, Cramer-Rao blocks and the statistical privacy margin.

The FIMs follow the complex form J = eta^-2 diag(.)^H Gram diag(.) used by the
privacy analysis. Parameters are ordered (c_1..c_L, u_1..u_L, fc_1..fc_L,
fu_1..fu_L) for the full scenario and (tau_1..tau_L, ftau_1..ftau_L) for the
angle-only scenario, where the ``f`` prefix marks fake paths.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .steering import check_order, concat_w, vandermonde

HERMITIAN_TOL = 1e-10
RANK_TOL = 1e-12


class Receiver(str, enum.Enum):
    BOB = "bob"
    EVE = "eve"


class Scenario(str, enum.Enum):
    BOB_AOA = "BobAoA"
    EVE_AOA = "EveAoA"
    BOB_FULL = "BobFull"
    EVE_FULL = "EveFull"


class SingularFimError(np.linalg.LinAlgError):
    def __init__(self, eigenvalue: float, lambda_max: float):
        super().__init__(
            f"singular FIM: eigenvalue {eigenvalue:.3e} below rank tolerance "
            f"(lambda_max={lambda_max:.3e})")
        self.eigenvalue = eigenvalue


@dataclass(frozen=True)
class ChannelScene:
    """One receiver's view of the channel.

    ``fakes`` may be empty (no injection). ``noise_std`` is eta, the standard
    deviation of the circular complex noise (per-entry variance eta^2).
    """
    n_antennas: int
    taus: np.ndarray
    coeffs: np.ndarray
    noise_std: float
    fakes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fake_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    def __post_init__(self):
        check_order(self.n_antennas)
        taus = np.atleast_1d(np.asarray(self.taus, dtype=float))
        coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        fakes = np.atleast_1d(np.asarray(self.fakes, dtype=float))
        fake_coeffs = np.atleast_1d(np.asarray(self.fake_coeffs, dtype=complex))
        if taus.size < 1 or coeffs.shape != taus.shape:
            raise ValueError("coeffs must match taus in length")
        if fake_coeffs.shape != fakes.shape:
            raise ValueError("fake_coeffs must match fakes in length")
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")
        if np.min(np.abs(coeffs)) <= 0:
            raise ValueError("path coefficients must be nonzero")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "fakes", fakes)
        object.__setattr__(self, "fake_coeffs", fake_coeffs)

    @property
    def n_paths(self) -> int:
        return self.taus.size

    @property
    def c_min(self) -> float:
        return float(np.min(np.abs(self.coeffs)))

    @property
    def c_max(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def with_noise(self, noise_std: float) -> "ChannelScene":
        return ChannelScene(self.n_antennas, self.taus, self.coeffs, noise_std,
                            self.fakes, self.fake_coeffs)


@dataclass(frozen=True)
class FimMatrix:
    """Fisher information with labelled parameters.

    ``factor`` is an optional F with matrix = F^H F (the noise-whitened
    Jacobian); when present, CRB blocks are computed from a QR of F, whose
    error grows with cond(F) rather than cond(F)^2.
    """
    matrix: np.ndarray
    labels: tuple
    singular: bool = False
    factor: np.ndarray | None = None

    def index(self, names: Sequence[str]) -> list:
        lookup = {name: i for i, name in enumerate(self.labels)}
        missing = [n for n in names if n not in lookup]
        if missing:
            raise KeyError(f"unknown parameter labels: {missing}")
        return [lookup[n] for n in names]


@dataclass(frozen=True)
class CrbReport:
    crb_block: np.ndarray
    lambda_min: float
    lambda_max: float
    labels: tuple
    scenario: Scenario | None = None


def _labels(prefix: str, n: int) -> list:
    return [f"{prefix}_{i + 1}" for i in range(n)]


def _finish(F: np.ndarray, labels: list, has_fakes: bool) -> FimMatrix:
    J = F.conj().T @ F
    J = 0.5 * (J + J.conj().T)
    ev = np.linalg.eigvalsh(J)
    singular = bool(ev[0] <= 1e-10 * max(ev[-1], 0.0))
    if singular and has_fakes:
        warnings.warn("singular FIM: true and fake paths produce coincident columns",
                      RuntimeWarning, stacklevel=3)
    return FimMatrix(J, tuple(labels), singular, F)


def fim_aoa_known_coeffs(scene: ChannelScene, receiver: Receiver | str,
                         real_parameter: bool = False) -> FimMatrix:
    """FIM on the angles when the coefficients are known.

    Bob has removed the fake component and only sees ``taus``; Eve estimates
    ``taus`` and ``fakes`` jointly.

    Args:
        scene: Receiver scene.
        receiver: ``"bob"`` or ``"eve"``.
        real_parameter: Multiply by 2, the exact Fisher information for a real
            angle under CN(0, eta^2 I) noise. The default keeps the plain
            eta^-2 prefactor used by the privacy bounds.
    """
    receiver = Receiver(receiver)
    N = scene.n_antennas
    if receiver is Receiver.BOB or scene.fakes.size == 0:
        V1 = vandermonde(N, scene.taus, 1)
        scale = scene.coeffs
        labels = _labels("tau", scene.n_paths)
    else:
        V1 = np.hstack([vandermonde(N, scene.taus, 1), vandermonde(N, scene.fakes, 1)])
        scale = np.concatenate([scene.coeffs, scene.fake_coeffs])
        labels = _labels("tau", scene.n_paths) + _labels("ftau", scene.fakes.size)
    F = V1 * scale[None, :] / scene.noise_std
    if real_parameter:
        # 2 Re(F^H F) = G^T G with G the stacked real and imaginary parts
        F = np.sqrt(2.0) * np.vstack([F.real, F.imag])
    return _finish(F, labels, receiver is Receiver.EVE and scene.fakes.size > 0)


def fim_full(scene: ChannelScene, receiver: Receiver | str) -> FimMatrix:
    """FIM on coefficients and normalized angles u = sqrt(-D_N''(0)) tau."""
    receiver = Receiver(receiver)
    N = scene.n_antennas
    L = scene.n_paths
    W = concat_w(N, scene.taus)
    scale = np.concatenate([np.ones(L), scene.coeffs])
    labels = _labels("c", L) + _labels("u", L)
    if receiver is Receiver.EVE and scene.fakes.size:
        K = scene.fakes.size
        W = np.hstack([W, concat_w(N, scene.fakes)])
        scale = np.concatenate([scale, np.ones(K), scene.fake_coeffs])
        labels += _labels("fc", K) + _labels("fu", K)
    F = W * scale[None, :] / scene.noise_std
    return _finish(F, labels, receiver is Receiver.EVE and scene.fakes.size > 0)


def extremal_eigenvalues(m) -> tuple:
    """(lambda_min, lambda_max) of a Hermitian matrix."""
    m = np.atleast_2d(np.asarray(m))
    if m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    scale = float(np.max(np.abs(m))) or 1.0
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    if m.shape[0] == 1:
        v = float(np.real(m[0, 0]))
        return v, v
    ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return float(ev[0]), float(ev[-1])


def _check_invertible(J: np.ndarray) -> None:
    ev = np.linalg.eigvalsh(J)
    if ev[0] <= RANK_TOL * max(ev[-1], 0.0):
        raise SingularFimError(float(ev[0]), float(ev[-1]))


def crb_block(fim: FimMatrix, subset: Sequence[str], method: str = "schur",
              scenario: Scenario | None = None) -> CrbReport:
    """Block of FIM^{-1} on the labelled parameters.

    Args:
        fim: Fisher information matrix.
        subset: Labels to keep, in output order.
        method: ``"full"`` inverts the whole FIM and slices; ``"schur"``
            inverts the Schur complement of the nuisance block.
        scenario: Tag copied into the report.
    """
    keep = fim.index(subset)
    J = fim.matrix
    _check_invertible(J)
    if method not in ("full", "schur"):
        raise ValueError(f"unknown method {method!r}")
    rest = [i for i in range(J.shape[0]) if i not in set(keep)]
    if fim.factor is not None:
        F = fim.factor
        if method == "full":
            block = _inverse_from_factor(F)[np.ix_(keep, keep)]
        else:
            F1 = F[:, keep]
            if rest:
                Q2, _ = np.linalg.qr(F[:, rest])
                F1 = F1 - Q2 @ (Q2.conj().T @ F1)
            block = _inverse_from_factor(F1)
    elif method == "full":
        block = np.linalg.inv(J)[np.ix_(keep, keep)]
    else:
        A = J[np.ix_(keep, keep)]
        if rest:
            B = J[np.ix_(keep, rest)]
            D = J[np.ix_(rest, rest)]
            A = A - B @ np.linalg.solve(D, B.conj().T)
        block = np.linalg.inv(0.5 * (A + A.conj().T))
    block = 0.5 * (block + block.conj().T)
    lo, hi = extremal_eigenvalues(block)
    return CrbReport(block, lo, hi, tuple(subset), scenario)


def _inverse_from_factor(F: np.ndarray) -> np.ndarray:
    """(F^H F)^{-1} as R^{-1} R^{-H} from the thin QR of F."""
    _, R = np.linalg.qr(F)
    Rinv = solve_triangular(R, np.eye(R.shape[0], dtype=R.dtype))
    return Rinv @ Rinv.conj().T


def privacy_margin(crb_eve: CrbReport, crb_bob: CrbReport) -> float:
    """gamma = lambda_min(CRB_Eve) / lambda_max(CRB_Bob)."""
    if crb_eve.lambda_min <= 0 or crb_bob.lambda_max <= 0:
        raise ValueError("CRB eigenvalues must be positive")
    return crb_eve.lambda_min / crb_bob.lambda_max


# --- scenario shortcuts -----------------------------------------------------

def bob_aoa_crb(scene: ChannelScene) -> CrbReport:
    fim = fim_aoa_known_coeffs(scene, Receiver.BOB)
    return crb_block(fim, fim.labels, scenario=Scenario.BOB_AOA)


def eve_aoa_crb(scene: ChannelScene, method: str = "schur") -> CrbReport:
    fim = fim_aoa_known_coeffs(scene, Receiver.EVE)
    return crb_block(fim, _labels("tau", scene.n_paths), method, Scenario.EVE_AOA)


def bob_full_crb(scene: ChannelScene) -> CrbReport:
    fim = fim_full(scene, Receiver.BOB)
    return crb_block(fim, fim.labels, scenario=Scenario.BOB_FULL)


def eve_full_crb(scene: ChannelScene, method: str = "schur") -> CrbReport:
    fim = fim_full(scene, Receiver.EVE)
    L = scene.n_paths
    return crb_block(fim, _labels("c", L) + _labels("u", L), method, Scenario.EVE_FULL)


def orthogonal_projector(A: np.ndarray) -> np.ndarray:
    """Projector onto the orthogonal complement of range(A)."""
    Q, _ = np.linalg.qr(A)
    return np.eye(A.shape[0]) - Q @ Q.conj().T


def eve_aoa_information(scene: ChannelScene) -> np.ndarray:
    """M = V1(tau)^H P_perp(V1(fakes)) V1(tau), the angle Schur complement."""
    V1 = vandermonde(scene.n_antennas, scene.taus, 1)
    P = orthogonal_projector(vandermonde(scene.n_antennas, scene.fakes, 1))
    M = V1.conj().T @ P @ V1
    return 0.5 * (M + M.conj().T)


def eve_full_information(scene: ChannelScene) -> np.ndarray:
    """W(tau)^H Q_perp(W(fakes)) W(tau), the full-scenario Schur complement."""
    W = concat_w(scene.n_antennas, scene.taus)
    Q = orthogonal_projector(concat_w(scene.n_antennas, scene.fakes))
    Nm = W.conj().T @ Q @ W
    return 0.5 * (Nm + Nm.conj().T)


def realized_eve_aoa_lambda_min(scene: ChannelScene) -> float:
    """lambda_min of Eve's angle CRB through the projected information M."""
    M = eve_aoa_information(scene)
    Cinv = (scene.coeffs.conj()[:, None] * M * scene.coeffs[None, :]) / scene.noise_std ** 2
    _check_invertible(0.5 * (Cinv + Cinv.conj().T))
    lo, hi = extremal_eigenvalues(0.5 * (Cinv + Cinv.conj().T))
    return 1.0 / hi


def realized_bob_aoa_lambda_max(scene: ChannelScene) -> float:
    return bob_aoa_crb(scene).lambda_max


__all__ = [
    "Receiver", "Scenario", "SingularFimError", "ChannelScene", "FimMatrix", "CrbReport",
    "fim_aoa_known_coeffs", "fim_full", "extremal_eigenvalues", "crb_block",
    "privacy_margin", "bob_aoa_crb", "eve_aoa_crb", "bob_full_crb", "eve_full_crb",
    "eve_aoa_information", "eve_full_information", "orthogonal_projector",
    "realized_eve_aoa_lambda_min", "realized_bob_aoa_lambda_max",
]
