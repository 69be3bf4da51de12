"""Geometry of the unit torus T = R/Z used to encode angles of arrival.

Points are stored as canonical representatives in [0, 1). Signed differences
are taken in [-1/2, 1/2).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

ArrayLike = Union[float, Iterable[float], np.ndarray]


def canonical(x: ArrayLike) -> np.ndarray:
    """Reduce reals modulo 1 into [0, 1)."""
    r = np.mod(np.asarray(x, dtype=float), 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    return np.where(r >= 1.0, 0.0, r)


def signed_diff(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """Representative of a - b in [-1/2, 1/2)."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return canonical(d + 0.5) - 0.5


@dataclass(frozen=True)
class TorusPoint:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(canonical(self.value)))

    def __float__(self) -> float:
        return self.value


class PathSet:
    """Ordered set of distinct points on the torus.

    Args:
        points: Reals (or TorusPoint) reduced modulo 1 on construction.
        n_paths: Optional declared cardinality; checked if given.
    """

    def __init__(self, points, n_paths: int | None = None):
        vals = canonical([float(p) for p in np.atleast_1d(points)])
        if vals.size < 1:
            raise ValueError("a path set needs at least one point")
        if n_paths is not None and vals.size != n_paths:
            raise ValueError(f"expected {n_paths} paths, got {vals.size}")
        if vals.size > 1:
            d = np.abs(signed_diff(vals[:, None], vals[None, :]))
            np.fill_diagonal(d, np.inf)
            if np.min(d) <= 0.0:
                raise ValueError("duplicate points in path set")
        vals.setflags(write=False)
        self._values = vals

    @property
    def values(self) -> np.ndarray:
        return self._values

    def __len__(self) -> int:
        return self._values.size

    def __iter__(self):
        return (TorusPoint(v) for v in self._values)

    def __array__(self, dtype=None, copy=None):
        return self._values.astype(dtype) if dtype is not None else self._values

    def __repr__(self) -> str:
        return f"PathSet({self._values.tolist()})"


def wrap_distance(a: ArrayLike, b: ArrayLike) -> np.ndarray | float:
    """Torus distance min_j |a - b + j|, in [0, 1/2]. Broadcasts."""
    d = np.abs(signed_diff(a, b))
    return float(d) if d.ndim == 0 else d


def min_separation(taus: ArrayLike) -> float:
    """Smallest wrap-around distance between two distinct points."""
    t = np.atleast_1d(np.asarray(taus, dtype=float))
    if t.size < 2:
        raise ValueError("separation undefined for singleton")
    d = np.abs(signed_diff(t[:, None], t[None, :]))
    iu = np.triu_indices(t.size, k=1)
    return float(np.min(d[iu]))


def inter_separation(taus: ArrayLike, fakes: ArrayLike) -> float:
    """Largest matched-index distance max_l dist(tau_l, fake_l)."""
    t = np.atleast_1d(np.asarray(taus, dtype=float))
    f = np.atleast_1d(np.asarray(fakes, dtype=float))
    if t.shape != f.shape:
        raise ValueError(
            f"cardinality mismatch: {t.size} true paths vs {f.size} fake paths")
    return float(np.max(np.abs(signed_diff(t, f))))


def all_pairs_separation(taus: ArrayLike, fakes: ArrayLike) -> float:
    """Diagnostic: max over all (l, l') of dist(tau_l, fake_l').

    This is the literal all-pairs maximum; it is of order 1/2 for any spread
    path set and is not what the privacy bounds consume.
    """
    t = np.atleast_1d(np.asarray(taus, dtype=float))
    f = np.atleast_1d(np.asarray(fakes, dtype=float))
    return float(np.max(np.abs(signed_diff(t[:, None], f[None, :]))))


def aoa_to_tau(phi: ArrayLike) -> np.ndarray | float:
    """Map an angle of arrival (radians) to the torus for lambda/2 spacing."""
    phi_arr = np.asarray(phi, dtype=float)
    if np.any(phi_arr < -np.pi / 2) or np.any(phi_arr >= np.pi / 2):
        raise ValueError("angle of arrival must lie in [-pi/2, pi/2)")
    t = canonical(np.sin(phi_arr) / 2.0)
    return float(t) if t.ndim == 0 else t


def tau_to_aoa(t: ArrayLike) -> np.ndarray | float:
    """Inverse of :func:`aoa_to_tau` using the [-1/2, 1/2) representative."""
    rep = signed_diff(t, 0.0)
    phi = np.arcsin(np.clip(2.0 * rep, -1.0, 1.0))
    return float(phi) if phi.ndim == 0 else phi


def equispaced(n_paths: int, spacing: float | None = None, offset: float = 0.0) -> np.ndarray:
    """Points offset + l*spacing, l = 0..L-1 (spacing defaults to 1/L)."""
    if spacing is None:
        spacing = 1.0 / n_paths
    if n_paths * spacing > 1.0 + 1e-12:
        raise ValueError("n_paths * spacing must not exceed 1")
    return canonical(offset + spacing * np.arange(n_paths))
