"""Regressor data, information matrices and excitation diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# sigma_min <= RANK_TOL * sigma_max is treated as singular
RANK_TOL = 1e-12


@dataclass(frozen=True)
class Datum:
    """One streamed sample: target ``psi`` (length n) = ``phi`` (n x p) @ theta + noise."""

    k: int
    t: float
    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        psi = np.atleast_1d(np.asarray(self.psi, dtype=float)).ravel()
        if phi.ndim != 2:
            raise ValueError(f"phi must be 2-D, got shape {phi.shape}")
        if psi.shape[0] != phi.shape[0]:
            raise ValueError(
                f"psi length {psi.shape[0]} does not match phi rows {phi.shape[0]}"
            )
        if self.k < 0:
            raise ValueError("sample index k must be >= 0")
        if not (np.isfinite(phi).all() and np.isfinite(psi).all()):
            raise ValueError("datum contains non-finite entries")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def p(self) -> int:
        return self.phi.shape[1]


@dataclass
class InfoMatrix:
    """Accumulated information matrix H = sum phi^T phi."""

    H: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, p: int) -> "InfoMatrix":
        return cls(np.zeros((p, p)), 0)

    @property
    def p(self) -> int:
        return self.H.shape[0]

    def copy(self) -> "InfoMatrix":
        return InfoMatrix(self.H.copy(), self.count)


@dataclass(frozen=True)
class PiReport:
    """Practical-identifiability report for the window ``(l, l + L)``."""

    kappa: float
    lambda_min: float
    lambda_max: float
    window: tuple[int, int] = field(default=(0, 0))

    def is_exciting(self, a: float) -> bool:
        """Check the PE lower bound ``H >= a I`` for a caller-chosen ``a``."""
        return self.lambda_min >= a


def _check_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix contains non-finite entries")
    return M


def condition_number(M) -> float:
    """Ratio of extreme singular values; ``inf`` for (numerically) singular M.

    >>> condition_number(np.diag([4.0, 1.0]))
    4.0
    """
    M = _check_square(M)
    if M.size == 0:
        return math.inf
    s = np.linalg.svd(M, compute_uv=False)
    smax, smin = s[0], s[-1]
    if smax == 0.0 or smin <= RANK_TOL * smax:
        return math.inf
    return float(smax / smin)


def accumulate(info: InfoMatrix, phi) -> InfoMatrix:
    """Return a new InfoMatrix with ``phi^T phi`` added (symmetrized)."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.shape[1] != info.p:
        raise ValueError(f"phi has {phi.shape[1]} columns, expected {info.p}")
    H = info.H + phi.T @ phi
    H = 0.5 * (H + H.T)
    return InfoMatrix(H, info.count + 1)


def pi_report(H, window: tuple[int, int] = (0, 0)) -> PiReport:
    H = _check_square(H)
    eig = np.linalg.eigvalsh(0.5 * (H + H.T))
    lam_max = max(float(eig[-1]), 0.0)
    lam_min = max(float(eig[0]), 0.0)
    return PiReport(condition_number(H), lam_min, lam_max, window)


def moving_pi(stream: Sequence[Datum], L: int) -> list[PiReport]:
    """Windowed PI index over ``sum_{i=k-L}^{k} phi_i^T phi_i`` for every k >= L.

    Reports are emitted for k = L .. len(stream) - 1, each covering L + 1 samples.
    """
    if L < 1:
        raise ValueError("window length L must be >= 1")
    if len(stream) == 0:
        raise ValueError("empty stream")
    if len(stream) < L + 1:
        raise ValueError(f"stream of length {len(stream)} is shorter than L + 1 = {L + 1}")
    terms = [d.phi.T @ d.phi for d in stream]
    out = []
    for k in range(L, len(stream)):
        H = sum(terms[k - L : k + 1])
        out.append(pi_report(H, (stream[k - L].k, stream[k].k)))
    return out
