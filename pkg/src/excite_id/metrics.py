"""Relative errors, error envelopes, RMSE surfaces and ROC bookkeeping."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .epimodels import SirNetworkParams, local_r0
from .signal_core import Datum

DEFAULT_DELTA = 1e-2
DEFAULT_WINDOW = 10


def relative_error(theta_true, theta_hat, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """|(theta_true - theta_hat) / (theta_true + delta)| componentwise."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    theta_true = np.asarray(theta_true, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    if theta_true.shape != theta_hat.shape:
        raise ValueError(f"shape mismatch: {theta_true.shape} vs {theta_hat.shape}")
    return np.abs((theta_true - theta_hat) / (theta_true + delta))


@dataclass
class ErrorSeries:
    times: np.ndarray
    errors: np.ndarray  # (T, p)
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def mean_median(self, start: int = 0, stop: int | None = None) -> float:
        """Time-average of the median curve over rows ``[start, stop)``."""
        seg = self.median[start:stop]
        if seg.size == 0:
            raise ValueError("empty averaging interval")
        return float(seg.mean())


def error_profile(errors, times=None) -> ErrorSeries:
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 2:
        raise ValueError("expected a (time, parameter) array of errors")
    if errors.shape[1] < 2:
        raise ValueError("an error profile needs at least two parameters")
    if np.any(errors < 0) or not np.all(np.isfinite(errors)):
        raise ValueError("relative errors must be finite and nonnegative")
    times = np.arange(errors.shape[0], dtype=float) if times is None else np.asarray(times, dtype=float)
    if times.shape[0] != errors.shape[0]:
        raise ValueError("times and errors disagree in length")
    return ErrorSeries(
        times,
        errors,
        errors.min(axis=1),
        np.median(errors, axis=1),
        errors.max(axis=1),
    )


def r0_error(p_true: SirNetworkParams, p_hat: SirNetworkParams, delta: float = DEFAULT_DELTA) -> np.ndarray:
    return relative_error(local_r0(p_true), local_r0(p_hat), delta)


def rmse_surface(stream: Sequence[Datum], beta_grid, gamma_grid) -> np.ndarray:
    """RMSE of psi - phi [beta, gamma] for every grid point; rows follow beta_grid."""
    if len(stream) == 0:
        raise ValueError("empty stream")
    beta_grid = np.asarray(beta_grid, dtype=float).ravel()
    gamma_grid = np.asarray(gamma_grid, dtype=float).ravel()
    if beta_grid.size == 0 or gamma_grid.size == 0:
        raise ValueError("empty parameter grid")
    Phi = np.vstack([d.phi for d in stream])
    Psi = np.concatenate([d.psi for d in stream])
    if Phi.shape[1] != 2:
        raise ValueError("rmse_surface is defined for two-parameter models")
    # mean of (psi - a b - c g)^2 expanded into sufficient statistics
    a, c = Phi[:, 0], Phi[:, 1]
    m = Psi.shape[0]
    saa, scc, sac = a @ a / m, c @ c / m, a @ c / m
    sya, syc, syy = Psi @ a / m, Psi @ c / m, Psi @ Psi / m
    B, G = np.meshgrid(beta_grid, gamma_grid, indexing="ij")
    mse = syy - 2 * (B * sya + G * syc) + B * B * saa + 2 * B * G * sac + G * G * scc
    return np.sqrt(np.clip(mse, 0.0, None))


# ROC ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    negatives: int  # samples outside every match window


def _check_cps(true_cps, window):
    if window < 0:
        raise ValueError("window must be >= 0")
    cps = [int(c) for c in true_cps]
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("true change points must be strictly increasing")
    if any(b - a <= window for a, b in zip(cps, cps[1:])):
        raise ValueError("match windows overlap; change points must be spaced by more than the window")
    return cps


def match_detections(detected, true_cps, window: int = DEFAULT_WINDOW) -> MatchResult:
    """Score a boolean detection series (indexed by sample) against known change points.

    A detection in ``[cp, cp + window]`` claims that change point; later hits in
    the same window are ignored.  Detections outside every window are false
    positives.
    """
    cps = _check_cps(true_cps, window)
    detected = np.asarray(detected, dtype=bool)
    N = detected.shape[0]
    in_window = np.zeros(N, dtype=bool)
    tp = 0
    for cp in cps:
        lo, hi = cp, min(cp + window, N - 1)
        if lo < N:
            in_window[lo : hi + 1] = True
            tp += bool(detected[lo : hi + 1].any())
    fp = int(np.count_nonzero(detected & ~in_window))
    return MatchResult(tp, fp, len(cps) - tp, int(np.count_nonzero(~in_window)))


@dataclass
class RocCurve:
    taus: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    negatives: np.ndarray
    window: int = DEFAULT_WINDOW
    eta: float = math.nan

    @property
    def tpr(self) -> np.ndarray:
        pos = self.tp + self.fn
        return np.divide(self.tp, pos, out=np.zeros(len(self.taus)), where=pos > 0)

    @property
    def fp_rate(self) -> np.ndarray:
        return np.divide(self.fp, self.negatives, out=np.zeros(len(self.taus)), where=self.negatives > 0)

    def __add__(self, other: "RocCurve") -> "RocCurve":
        """Pool counts of two curves built on the same tau grid."""
        if not np.array_equal(self.taus, other.taus) or self.window != other.window:
            raise ValueError("can only pool curves with identical tau grid and window")
        return RocCurve(
            self.taus,
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.negatives + other.negatives,
            self.window,
            self.eta,
        )

    def auc(self) -> float:
        return roc_auc(self)


def roc_points(
    true_cps,
    window: int,
    tau_grid,
    runner: Callable[[float], np.ndarray],
    eta: float = math.nan,
) -> RocCurve:
    """Run ``runner(tau)`` (a boolean detection series) for every tau and score it."""
    _check_cps(true_cps, window)
    taus = np.sort(np.asarray(tau_grid, dtype=float))
    results = [match_detections(runner(float(t)), true_cps, window) for t in taus]
    return RocCurve(
        taus,
        np.array([r.tp for r in results]),
        np.array([r.fp for r in results]),
        np.array([r.fn for r in results]),
        np.array([r.negatives for r in results]),
        window,
        eta,
    )


def roc_auc(curve: RocCurve) -> float:
    """Trapezoid area under (fp_rate, tpr), closed with the (0, 0) and (1, 1) corners."""
    x = np.concatenate([[0.0], curve.fp_rate, [1.0]])
    y = np.concatenate([[0.0], curve.tpr, [1.0]])
    order = np.lexsort((y, x))
    x, y = x[order], y[order]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


# CSV ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_error_series_csv(series: ErrorSeries, path, ks=None) -> None:
    ks = range(len(series)) if ks is None else ks
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "min", "median", "max"])
        for k, t, lo, med, hi in zip(ks, series.times, series.lower, series.median, series.upper):
            w.writerow([int(k), _fmt(t), _fmt(lo), _fmt(med), _fmt(hi)])


def write_roc_csv(curves: Sequence[RocCurve], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eta", "tau", "tp", "fp", "fn", "tpr", "fp_rate"])
        for c in curves:
            for i, tau in enumerate(c.taus):
                w.writerow(
                    [_fmt(c.eta), _fmt(tau), int(c.tp[i]), int(c.fp[i]), int(c.fn[i]), _fmt(c.tpr[i]), _fmt(c.fp_rate[i])]
                )
