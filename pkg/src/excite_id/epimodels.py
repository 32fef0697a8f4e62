"""Epidemic model structures written as ``xdot = phi(x) @ theta``.

Parameter vectors for the networked SIR model are ``[vec(B), gamma]`` with
vec stacking the columns of B, so that ``kron(I^T, diag(S)) @ vec(B)``
equals ``diag(S) @ B @ I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_TOL = 1e-12
_SWITCH_TOL = 1e-9


def _unit(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        v = float(x)
        if not math.isfinite(v):
            raise ValueError(f"{name} contains non-finite entries")
        if v < -_TOL or v > 1 + _TOL:
            raise ValueError(f"{name} must lie in [0, 1]")
        return x
    if not np.isfinite(x).all():
        raise ValueError(f"{name} contains non-finite entries")
    if (x < -_TOL).any() or (x > 1 + _TOL).any():
        raise ValueError(f"{name} must lie in [0, 1]")
    return x


@dataclass(frozen=True)
class SisParams:
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("beta", "gamma"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.beta, self.gamma])

    @classmethod
    def from_theta(cls, theta) -> "SisParams":
        return cls(float(theta[0]), float(theta[1]))


@dataclass(frozen=True)
class SirNetworkParams:
    B: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float).ravel()
        n = gamma.shape[0]
        if B.shape != (n, n):
            raise ValueError(f"B must be {n}x{n}, got {B.shape}")
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(gamma))):
            raise ValueError("parameters must be finite")
        if np.any(B < 0) or np.any(gamma < 0):
            raise ValueError("infection and recovery rates must be nonnegative")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.B.ravel(order="F"), self.gamma])

    @classmethod
    def from_theta(cls, theta, n: int, clip: bool = False) -> "SirNetworkParams":
        """Rebuild from a parameter vector; ``clip`` zeroes negative estimates."""
        theta = np.asarray(theta, dtype=float)
        if clip:
            theta = np.clip(theta, 0.0, None)
        return cls(theta[: n * n].reshape((n, n), order="F"), theta[n * n :])


# SIS ------------------------------------------------------------------------


def sis_regressor(I: float) -> np.ndarray:
    I = float(_unit(I, "I"))
    return np.array([[(1.0 - I) * I, -I]])


def sis_drift(I: float, p: SisParams) -> float:
    I = float(_unit(I, "I"))
    return (1.0 - I) * p.beta * I - p.gamma * I


# networked SIR --------------------------------------------------------------


def _sir_state(I, R):
    I = _unit(np.atleast_1d(I), "I")
    R = _unit(np.atleast_1d(R), "R")
    if I.shape != R.shape:
        raise ValueError("I and R must have the same length")
    if np.any(I + R > 1 + _TOL):
        raise ValueError("I + R must not exceed 1")
    return I, R


def sir_regressor(I, R) -> np.ndarray:
    """2n x (n^2 + n) regressor mapping [vec(B), gamma] to [Idot; Rdot]."""
    I, R = _sir_state(I, R)
    n = I.shape[0]
    S = 1.0 - I - R
    phi = np.zeros((2 * n, n * n + n))
    phi[:n, : n * n] = np.kron(I[None, :], np.diag(S))
    phi[:n, n * n :] = -np.diag(I)
    phi[n:, n * n :] = np.diag(I)
    return phi


def sir_drift(I, R, p: SirNetworkParams) -> np.ndarray:
    I, R = _sir_state(I, R)
    if I.shape[0] != p.n:
        raise ValueError(f"state has {I.shape[0]} nodes, parameters have {p.n}")
    S = 1.0 - I - R
    Idot = S * (p.B @ I) - p.gamma * I
    Rdot = p.gamma * I
    return np.concatenate([Idot, Rdot])


def local_r0(p: SirNetworkParams) -> np.ndarray:
    """Row sums of diag(gamma)^-1 B."""
    if np.any(p.gamma <= 0):
        raise ValueError("local reproduction numbers need strictly positive recovery rates")
    return p.B.sum(axis=1) / p.gamma


# model objects used by the simulator -----------------------------------------


class SisModel:
    name = "sis"
    n_nodes = 1
    state_dim = 1
    param_dim = 2

    def regressor(self, x) -> np.ndarray:
        return sis_regressor(float(np.asarray(x).ravel()[0]))

    def theta(self, params: SisParams) -> np.ndarray:
        return params.theta

    def drift(self, x, params: SisParams) -> np.ndarray:
        return self.regressor(x) @ params.theta

    def clamp(self, x) -> tuple[np.ndarray, bool]:
        v = float(x[0])
        y = min(max(v, 0.0), 1.0)
        return np.array([y]), y != v

    def validate_state(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (1,):
            raise ValueError("SIS state is the scalar infected proportion")
        _unit(x, "I")
        return x


class SirNetworkModel:
    name = "sir"

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("network needs at least one node")
        self.n_nodes = n
        self.state_dim = 2 * n
        self.param_dim = n * n + n

    def regressor(self, x) -> np.ndarray:
        n = self.n_nodes
        return sir_regressor(x[:n], x[n:])

    def theta(self, params: SirNetworkParams) -> np.ndarray:
        return params.theta

    def drift(self, x, params: SirNetworkParams) -> np.ndarray:
        n = self.n_nodes
        return sir_drift(x[:n], x[n:], params)

    def clamp(self, x) -> tuple[np.ndarray, bool]:
        n = self.n_nodes
        y = np.clip(x, 0.0, 1.0)
        I, R = y[:n], y[n:]
        total = I + R
        over = total > 1.0
        if np.any(over):
            I[over] /= total[over]
            R[over] /= total[over]
        return y, bool(np.any(y != x))

    def validate_state(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.shape != (self.state_dim,):
            raise ValueError(f"SIR state must have length {self.state_dim}")
        _sir_state(x[: self.n_nodes], x[self.n_nodes :])
        return x


# topologies and schedules ----------------------------------------------------

TOPOLOGIES = ("fully-connected", "star", "erdos-renyi")


@dataclass(frozen=True)
class NetworkSpec:
    topology: str = "fully-connected"
    n: int = 7
    edge_prob: float = 0.5
    weight_range: tuple = (0.05, 0.5)
    gamma_range: tuple = (0.1, 0.4)
    seed: int = 0

    def violations(self) -> list[str]:
        out = []
        if self.topology not in TOPOLOGIES:
            out.append(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if self.n < 1:
            out.append("n must be >= 1")
        if not (0.0 <= self.edge_prob <= 1.0):
            out.append("edge_prob must lie in [0, 1]")
        for name in ("weight_range", "gamma_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                out.append(f"{name} must satisfy 0 < lo <= hi")
        return out


def adjacency_mask(topology: str, n: int, edge_prob: float = 0.5, rng=None) -> np.ndarray:
    """Directed off-diagonal edge mask; the diagonal is always empty."""
    if topology == "fully-connected":
        mask = ~np.eye(n, dtype=bool)
    elif topology == "star":
        mask = np.zeros((n, n), dtype=bool)
        mask[0, 1:] = True
        mask[1:, 0] = True
    elif topology == "erdos-renyi":
        rng = np.random.default_rng() if rng is None else rng
        mask = rng.random((n, n)) < edge_prob
        np.fill_diagonal(mask, False)
    else:
        raise ValueError(f"unknown topology {topology!r}")
    return mask


def make_network(spec: NetworkSpec, rng: np.random.Generator | None = None) -> SirNetworkParams:
    """Sample rates on the topology; deterministic for ``spec.seed`` when rng is None."""
    problems = spec.violations()
    if problems:
        raise ValueError("; ".join(problems))
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    mask = adjacency_mask(spec.topology, spec.n, spec.edge_prob, rng)
    lo, hi = spec.weight_range
    B = np.where(mask, rng.uniform(lo, hi, size=(spec.n, spec.n)), 0.0)
    glo, ghi = spec.gamma_range
    gamma = rng.uniform(glo, ghi, size=spec.n)
    return SirNetworkParams(B, gamma)


@dataclass(frozen=True)
class ParamSchedule:
    """Right-continuous piecewise-constant parameters: ``[(t_start, params), ...]``."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        starts = [float(t) for t, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment start times must be strictly increasing")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, params, t0: float = 0.0) -> "ParamSchedule":
        return cls(((t0, params),))

    @property
    def switch_times(self) -> list[float]:
        return [float(t) for t, _ in self.segments[1:]]

    def at(self, t: float):
        if t < self.segments[0][0] - _SWITCH_TOL:
            raise ValueError(f"time {t} precedes the schedule start {self.segments[0][0]}")
        current = self.segments[0][1]
        for start, params in self.segments:
            # grid times t0 + k*h may land an ulp below a switch
            if start <= t + _SWITCH_TOL:
                current = params
            else:
                break
        return current


def schedule_at(s: ParamSchedule, t: float):
    return s.at(t)


def switch_indices(s: ParamSchedule, times: Sequence[float]) -> list[int]:
    """First sample index at or after each switch time."""
    times = np.asarray(times)
    return [int(np.searchsorted(times, ts - _SWITCH_TOL)) for ts in s.switch_times]
