"""Euler / Euler-Maruyama trajectories and the (phi, psi) data stream they induce."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .epimodels import ParamSchedule
from .signal_core import Datum

PROCESS_KINDS = ("none", "additive-sigma", "state-scaled")
PSI_SOURCES = ("difference", "drift")

# named RNG substreams spawned from one root seed, in this fixed order
SUBSTREAMS = ("process", "observation", "network", "schedule")


def substreams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(SUBSTREAMS))
    return {name: np.random.default_rng(c) for name, c in zip(SUBSTREAMS, children)}


@dataclass(frozen=True)
class NoiseConfig:
    """Process and observation noise.

    ``scale`` multiplies the state-scaled increments (1.0 is the raw
    chemical-Langevin form; smaller values mimic a larger population).
    """

    process_kind: str = "none"
    sigma: float = 0.0
    scale: float = 1.0
    obs_rel_std: float = 0.0
    seed: int = 0

    def violations(self) -> list[str]:
        out = []
        if self.process_kind not in PROCESS_KINDS:
            out.append(f"process_kind must be one of {PROCESS_KINDS}, got {self.process_kind!r}")
        if self.sigma < 0:
            out.append("sigma must be >= 0")
        if self.scale < 0:
            out.append("scale must be >= 0")
        if self.obs_rel_std < 0:
            out.append("obs_rel_std must be >= 0")
        return out


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    data: list
    thetas: np.ndarray
    process_draws: np.ndarray
    obs_draws: np.ndarray
    clamp_events: int = 0
    switch_indices: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)


def signed_sqrt(m: np.ndarray) -> np.ndarray:
    return np.sign(m) * np.sqrt(np.abs(m))


def simulate(
    model,
    schedule: ParamSchedule,
    x0,
    h: float,
    K: int,
    noise: NoiseConfig = NoiseConfig(),
    t0: float = 0.0,
    psi_source: str = "difference",
) -> Trajectory:
    """Integrate ``K`` samples (``K - 1`` steps) on the grid t0 + k h.

    ``psi_source="difference"`` builds targets from finite differences of the
    realized states; ``"drift"`` uses the exact drift at x_k (the derivative is
    then treated as measured).  Observation noise is added on top either way.
    """
    if not (h > 0 and np.isfinite(h)):
        raise ValueError(f"step size must be positive, got {h}")
    if K < 2:
        raise ValueError("need at least two samples")
    if psi_source not in PSI_SOURCES:
        raise ValueError(f"psi_source must be one of {PSI_SOURCES}")
    problems = noise.violations()
    if problems:
        raise ValueError("; ".join(problems))
    x = model.validate_state(x0).astype(float).copy()

    rngs = substreams(noise.seed)
    times = t0 + h * np.arange(K)
    d = model.state_dim
    states = np.empty((K, d))
    thetas = np.empty((K, model.param_dim))
    n_channels = model.param_dim if noise.process_kind == "state-scaled" else d
    process_draws = np.zeros((K - 1, n_channels))
    obs_draws = np.zeros((K - 1, d))
    regressors = []
    drifts = []
    clamps = 0
    sqrt_h = np.sqrt(h)

    states[0] = x
    for k in range(K - 1):
        params = schedule.at(times[k])
        theta = model.theta(params)
        thetas[k] = theta
        phi = model.regressor(x)
        f = phi @ theta
        if noise.process_kind == "additive-sigma":
            z = rngs["process"].standard_normal(d)
            process_draws[k] = z
            xi = noise.sigma * sqrt_h * z
        elif noise.process_kind == "state-scaled":
            b = sqrt_h * rngs["process"].standard_normal(model.param_dim)
            process_draws[k] = b
            xi = noise.scale * signed_sqrt(phi * theta[None, :]) @ b
        else:
            xi = 0.0
        x_next, clamped = model.clamp(x + h * f + xi)
        clamps += clamped
        regressors.append(phi)
        drifts.append(f)
        states[k + 1] = x_next
        x = x_next
    thetas[K - 1] = model.theta(schedule.at(times[K - 1]))

    if psi_source == "difference":
        psis = np.diff(states, axis=0) / h
    else:
        psis = np.array(drifts)
    if noise.obs_rel_std > 0:
        obs_draws = rngs["observation"].standard_normal((K - 1, d))
        psis = psis + noise.obs_rel_std * np.abs(psis) * obs_draws

    data = [Datum(k, float(times[k]), regressors[k], psis[k]) for k in range(K - 1)]
    switches = [int(np.searchsorted(times, ts - 1e-9)) for ts in schedule.switch_times]
    return Trajectory(times, states, data, thetas, process_draws, obs_draws, clamps, switches)


def stream(traj: Trajectory):
    """Yield the trajectory's data in index order."""
    yield from traj.data


# CSV ------------------------------------------------------------------------


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Columns k, t, x0.., psi0..; the last row has no target."""
    d = traj.states.shape[1]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t"] + [f"x{i}" for i in range(d)] + [f"psi{i}" for i in range(d)])
        for k in range(len(traj)):
            psi = [fmt(v) for v in traj.data[k].psi] if k < len(traj.data) else [""] * d
            w.writerow([k, fmt(traj.times[k])] + [fmt(v) for v in traj.states[k]] + psi)


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (times, states, psis) written by :func:`write_trajectory_csv`."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = sum(1 for c in header if c.startswith("x"))
    times = np.array([float(r[1]) for r in body])
    states = np.array([[float(v) for v in r[2 : 2 + d]] for r in body])
    psis = np.array([[float(v) for v in r[2 + d :]] for r in body if r[2 + d]])
    return times, states, psis
