"""Online estimators for linear-in-parameter models ``psi = phi @ theta``.

``GwRls`` keeps a greedy excitation set: a sample joins it only when it does
not worsen the condition number of the set's information matrix.  Members of
the set converge to unit weight in the implied least-squares cost while every
other sample is forgotten exponentially (see :func:`greedy_weights`).
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .signal_core import Datum, InfoMatrix, accumulate, condition_number

log = logging.getLogger(__name__)


def _check_prior(theta0, P0, alpha):
    theta0 = np.asarray(theta0, dtype=float).ravel()
    P0 = np.asarray(P0, dtype=float)
    p = theta0.shape[0]
    if P0.shape != (p, p):
        raise ValueError(f"P0 must be {p}x{p}, got {P0.shape}")
    if not np.allclose(P0, P0.T):
        raise ValueError("P0 must be symmetric")
    if np.linalg.eigvalsh(P0)[0] <= 0.0:
        raise ValueError("P0 must be positive definite")
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"forgetting factor must lie in (0, 1], got {alpha}")
    return theta0, P0


def _check_datum(d: Datum, p: int):
    if d.p != p:
        raise ValueError(f"datum has {d.p} regressor columns, estimator expects {p}")


def _covariance_update(P, Phi, alpha):
    """P <- (1/alpha) P (I - Phi^T (alpha I + Phi P Phi^T)^-1 Phi P).

    When Phi has more rows than columns the identical p x p form
    (alpha I + P Phi^T Phi)^-1 P is solved instead.
    """
    m, p = Phi.shape
    if m <= p:
        PPhiT = P @ Phi.T
        S = alpha * np.eye(m) + Phi @ PPhiT
        G = scipy.linalg.solve(S, PPhiT.T, assume_a="pos")
        P = (P - PPhiT @ G) / alpha
    else:
        P = np.linalg.solve(alpha * np.eye(p) + P @ (Phi.T @ Phi), P)
    return 0.5 * (P + P.T)


@dataclass
class GwRls:
    """Greedily-weighted recursive least squares.

    Auxiliary state is (He, PhiE, upsE, P); ``theta`` is the running estimate.
    ``max_excitation`` optionally caps the excitation-set size.
    """

    He: InfoMatrix
    PhiE: list
    upsE: np.ndarray
    P: np.ndarray
    theta: np.ndarray
    alpha: float
    accepted_indices: list = field(default_factory=list)
    max_excitation: int | None = None
    kappa_He: float = math.inf

    @classmethod
    def init(cls, theta0, P0, alpha: float = 0.98, max_excitation: int | None = None) -> "GwRls":
        theta0, P0 = _check_prior(theta0, P0, alpha)
        p = theta0.shape[0]
        return cls(
            He=InfoMatrix.zeros(p),
            PhiE=[],
            upsE=np.zeros(p),
            P=P0.copy(),
            theta=theta0.copy(),
            alpha=float(alpha),
            max_excitation=max_excitation,
        )

    @property
    def p(self) -> int:
        return self.theta.shape[0]

    def copy(self) -> "GwRls":
        return copy.deepcopy(self)

    def step(self, d: Datum) -> bool:
        """Consume one datum in place; return whether it joined the excitation set."""
        _check_datum(d, self.p)
        phi, psi = d.phi, d.psi
        if not np.any(phi):
            # zero regressors carry no information and would pollute PhiE
            return False
        a = self.alpha
        candidate = accumulate(self.He, phi)
        kappa_new = condition_number(candidate.H)
        accepted = kappa_new <= self.kappa_He
        if accepted and self.max_excitation is not None and len(self.PhiE) >= self.max_excitation:
            log.warning("excitation set reached cap %d; rejecting sample %d", self.max_excitation, d.k)
            accepted = False

        if accepted:
            self.He = candidate
            self.kappa_He = kappa_new
            self.PhiE.append(phi)
            self.upsE = self.upsE + phi.T @ psi
            self.accepted_indices.append(d.k)
            Phi = math.sqrt(1.0 - a) * np.vstack(self.PhiE)
            H = (1.0 - a) * self.He.H
            ups = (1.0 - a) * self.upsE
        else:
            if self.PhiE:
                Phi = np.vstack([math.sqrt(1.0 - a) * np.vstack(self.PhiE), phi])
            else:
                Phi = phi
            H = (1.0 - a) * self.He.H + phi.T @ phi
            ups = (1.0 - a) * self.upsE + phi.T @ psi

        self.P = _covariance_update(self.P, Phi, a)
        self.theta = self.theta + self.P @ (ups - H @ self.theta)
        return accepted

    def reset(self, initial: "GwRls") -> None:
        """Restore the auxiliary state (He, PhiE, upsE, P) from ``initial``; theta is kept."""
        self.He = initial.He.copy()
        self.PhiE = list(initial.PhiE)
        self.upsE = initial.upsE.copy()
        self.P = initial.P.copy()
        self.kappa_He = initial.kappa_He
        self.accepted_indices = list(initial.accepted_indices)


@dataclass
class EfRls:
    """Exponential-forgetting RLS baseline."""

    P: np.ndarray
    theta: np.ndarray
    alpha: float

    @classmethod
    def init(cls, theta0, P0, alpha: float = 0.98) -> "EfRls":
        theta0, P0 = _check_prior(theta0, P0, alpha)
        return cls(P0.copy(), theta0.copy(), float(alpha))

    @property
    def p(self) -> int:
        return self.theta.shape[0]

    def copy(self) -> "EfRls":
        return copy.deepcopy(self)

    def step(self, d: Datum) -> bool:
        _check_datum(d, self.p)
        phi = d.phi
        self.P = _covariance_update(self.P, phi, self.alpha)
        self.theta = self.theta + self.P @ phi.T @ (d.psi - phi @ self.theta)
        return False

    def reset(self, initial: "EfRls") -> None:
        self.P = initial.P.copy()


def gradient_step(theta, d: Datum) -> np.ndarray:
    """Unit-gain gradient identifier: theta + phi^T (psi - phi theta)."""
    theta = np.asarray(theta, dtype=float).ravel()
    _check_datum(d, theta.shape[0])
    return theta + d.phi.T @ (d.psi - d.phi @ theta)


@dataclass
class GradientIdentifier:
    """Stateless wrapper so the gradient law fits the estimator interface."""

    theta: np.ndarray

    @classmethod
    def init(cls, theta0) -> "GradientIdentifier":
        return cls(np.asarray(theta0, dtype=float).ravel().copy())

    def copy(self) -> "GradientIdentifier":
        return copy.deepcopy(self)

    def step(self, d: Datum) -> bool:
        self.theta = gradient_step(self.theta, d)
        return False

    def reset(self, initial: "GradientIdentifier") -> None:
        pass


# functional surface -------------------------------------------------------


def gwrls_init(p: int, theta0, P0, alpha: float) -> GwRls:
    state = GwRls.init(theta0, P0, alpha)
    if state.p != p:
        raise ValueError(f"theta0 has length {state.p}, expected {p}")
    return state


def gwrls_step(state: GwRls, d: Datum) -> tuple[GwRls, bool]:
    new = state.copy()
    accepted = new.step(d)
    return new, accepted


def efrls_step(state: EfRls, d: Datum) -> EfRls:
    new = state.copy()
    new.step(d)
    return new


# batch oracle ---------------------------------------------------------------


@dataclass
class WeightedCostSpec:
    """Inputs of the weighted ridge cost minimized by GW-RLS.

    ``excitation_indices`` are positions into ``data`` (0-based).
    """

    data: Sequence[Datum]
    excitation_indices: set
    alpha: float
    theta0: np.ndarray
    P0: np.ndarray


def greedy_weights(k: int, excitation: set, alpha: float) -> np.ndarray:
    """Weights of samples 0..k-1 after k updates.

    Excitation-set members get ``(1 - alpha) * sum_{l=i}^{k-1} alpha^(k-1-l)``
    (which tends to 1), everyone else ``alpha^(k-1-i)``.
    """
    w = np.empty(k)
    for i in range(k):
        age = k - 1 - i
        if i in excitation:
            w[i] = (1.0 - alpha) * sum(alpha**j for j in range(age + 1))
        else:
            w[i] = alpha**age
    return w


def batch_weighted_normal_equations(spec: WeightedCostSpec, k: int):
    """Return (A, rhs) with A theta = rhs the stationarity condition after k samples."""
    theta0, P0 = _check_prior(spec.theta0, spec.P0, spec.alpha)
    if k > len(spec.data):
        raise ValueError(f"horizon {k} exceeds data length {len(spec.data)}")
    P0inv = np.linalg.inv(P0)
    prior = spec.alpha**k
    A = prior * P0inv
    rhs = prior * P0inv @ theta0
    for wi, d in zip(greedy_weights(k, spec.excitation_indices, spec.alpha), spec.data[:k]):
        A = A + wi * d.phi.T @ d.phi
        rhs = rhs + wi * d.phi.T @ d.psi
    return 0.5 * (A + A.T), rhs


def batch_weighted_solve(spec: WeightedCostSpec, k: int) -> np.ndarray:
    """Directly minimize the weighted cost over the first ``k`` samples.

    The prior term carries weight ``alpha^k`` so that the result equals the
    GW-RLS estimate after k updates.
    """
    A, rhs = batch_weighted_normal_equations(spec, k)
    try:
        return scipy.linalg.solve(A, rhs, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("weighted normal equations could not be factorized") from exc
