"""Change-point detection on model predictability and estimator state resetting.

The detector tracks Y_k = -log10 ||psi_k - phi_k theta_{k-1}||^2 with an EWMA
predictor.  Downward deviations E = (Z_{k-1} - Y_k)^2 are modelled as
exponential; each new deviation is tested against the running rate with a
likelihood ratio whose p-value comes from chi^2(1).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .signal_core import Datum

RESIDUAL_FLOOR = 1e-300


def predictability(d: Datum, theta_prev) -> float:
    """Negative order of magnitude of the one-step prediction error."""
    theta_prev = np.asarray(theta_prev, dtype=float).ravel()
    if theta_prev.shape[0] != d.p:
        raise ValueError(f"theta has length {theta_prev.shape[0]}, datum expects {d.p}")
    if not np.all(np.isfinite(theta_prev)):
        raise ValueError("theta contains non-finite entries")
    e = d.psi - d.phi @ theta_prev
    return -math.log10(max(float(e @ e), RESIDUAL_FLOOR))


@dataclass
class EwmaState:
    eta: float
    Z: float = 0.0
    initialized: bool = False

    def __post_init__(self):
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"EWMA weight must lie in [0, 1], got {self.eta}")

    def update(self, Y: float) -> float:
        if not self.initialized:
            self.Z = float(Y)
            self.initialized = True
        else:
            self.Z = self.eta * Y + (1.0 - self.eta) * self.Z
        return self.Z


def ewma_update(s: EwmaState, Y: float) -> EwmaState:
    new = copy.copy(s)
    new.update(Y)
    return new


def chi2_sf_1dof(D: float) -> float:
    """Survival function of chi^2 with one degree of freedom."""
    if D < 0 or math.isnan(D):
        raise ValueError(f"chi-square statistic must be >= 0, got {D}")
    return math.erfc(math.sqrt(D / 2.0))


@dataclass
class LrtEvent:
    """Diagnostics of the most recent detector call (for CSV logging)."""

    Y: float
    Z: float
    E: float = math.nan
    D: float = math.nan
    p: float = math.nan
    tested: bool = False
    detected: bool = False


@dataclass
class LrtDetector:
    """Recursive likelihood-ratio change-point test.

    ``min_samples`` suppresses detections until that many downward deviations
    have been absorbed.  ``reset_on_change`` clears the rate estimate and
    re-seeds the EWMA after each detection.
    """

    ewma: EwmaState
    tau: float
    n: int = 0
    lambda_n: float = 0.0
    min_samples: int = 0
    reset_on_change: bool = False
    last: LrtEvent | None = field(default=None, repr=False)

    @classmethod
    def create(cls, eta: float, tau: float, min_samples: int = 0, reset_on_change: bool = False):
        if not (0.0 <= tau <= 1.0):
            raise ValueError(f"significance level must lie in [0, 1], got {tau}")
        if min_samples < 0:
            raise ValueError("min_samples must be >= 0")
        return cls(EwmaState(eta), tau, min_samples=min_samples, reset_on_change=reset_on_change)

    def copy(self) -> "LrtDetector":
        return copy.deepcopy(self)

    def step(self, Y: float) -> bool:
        if not math.isfinite(Y):
            raise ValueError(f"predictability must be finite, got {Y}")
        if not self.ewma.initialized:
            self.ewma.update(Y)
            self.last = LrtEvent(Y, self.ewma.Z)
            return False
        Zprev = self.ewma.Z
        drop = Zprev - Y
        E = drop * drop
        # a drop so small that its square underflows carries no rate information
        if drop <= 0 or E == 0.0:
            self.ewma.update(Y)
            self.last = LrtEvent(Y, Zprev)
            return False

        n = self.n
        spent = n / self.lambda_n if n else 0.0
        lam = (n + 1) / (spent + E)
        D = 2.0 * ((n * math.log(self.lambda_n) if n else 0.0) - (n + 1) * math.log(lam) + 1.0)
        # the statistic is not a nested LRT and can dip below zero
        p = chi2_sf_1dof(max(D, 0.0))
        if p <= self.tau and n >= self.min_samples:
            self.last = LrtEvent(Y, Zprev, E, D, p, tested=True, detected=True)
            if self.reset_on_change:
                self.n, self.lambda_n = 0, 0.0
                self.ewma.initialized = False
            return True
        self.n = n + 1
        self.lambda_n = lam
        self.ewma.update(Y)
        self.last = LrtEvent(Y, Zprev, E, D, p, tested=True)
        return False


def lrt_step(s: LrtDetector, Y: float) -> tuple[LrtDetector, bool]:
    new = s.copy()
    detected = new.step(Y)
    return new, detected


def run_detector(Ys, eta: float, tau: float, min_samples: int = 0, reset_on_change: bool = False) -> np.ndarray:
    """Feed a whole predictability series through a fresh detector."""
    det = LrtDetector.create(eta, tau, min_samples, reset_on_change)
    return np.array([det.step(float(y)) for y in Ys], dtype=bool)


@dataclass
class ResettingEstimator:
    """Wraps any estimator exposing ``theta``, ``step(d)``, ``copy()`` and ``reset(initial)``.

    On a detected change the inner auxiliary state returns to its initial
    value; theta is kept unless ``reset_theta`` is set.
    """

    inner: object
    detector: LrtDetector
    reset_theta: bool = False
    initial: object = None
    initial_theta: np.ndarray | None = None
    resets: list = field(default_factory=list)
    last_accepted: bool = False

    def __post_init__(self):
        if self.initial is None:
            self.initial = self.inner.copy()
        if self.initial_theta is None:
            self.initial_theta = np.array(self.inner.theta, dtype=float)

    @property
    def theta(self) -> np.ndarray:
        return self.inner.theta

    def step(self, d: Datum) -> tuple[np.ndarray, bool]:
        theta_prev = np.array(self.inner.theta)
        self.last_accepted = bool(self.inner.step(d))
        Y = predictability(d, theta_prev)
        detected = self.detector.step(Y)
        if detected:
            self.inner.reset(self.initial)
            if self.reset_theta:
                self.inner.theta = self.initial_theta.copy()
            self.resets.append(d.k)
        return self.inner.theta, detected


def resetting_step(r: ResettingEstimator, d: Datum):
    new = copy.deepcopy(r)
    theta, detected = new.step(d)
    return new, theta, detected
