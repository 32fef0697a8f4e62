"""Config-driven experiment runner.

    excite-id list-presets
    excite-id preset sir-changepoint --seed 3 --out /tmp/cp
    excite-id run my_config.json

Outputs go to ``--out`` if given, else ``$EXCITE_ID_OUT``, else the config's
``output_dir``.  Exit codes: 0 success, 2 invalid config, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .changepoint import LrtDetector, LrtEvent, ResettingEstimator, predictability, run_detector
from .config import ConfigError, EstimatorConfig, ExperimentConfig, presets
from .epimodels import SirNetworkModel, SirNetworkParams, SisModel, local_r0
from .estimators import EfRls, GradientIdentifier, GwRls
from .metrics import (
    RocCurve,
    error_profile,
    relative_error,
    rmse_surface,
    roc_points,
    write_error_series_csv,
    write_roc_csv,
)
from .signal_core import condition_number, moving_pi
from .sim import NoiseConfig, Trajectory, fmt, simulate, write_trajectory_csv

log = logging.getLogger(__name__)

ENV_OUT = "EXCITE_ID_OUT"


# building blocks ------------------------------------------------------------------


def make_model(cfg: ExperimentConfig):
    return SisModel() if cfg.model.kind == "sis" else SirNetworkModel(cfg.state_dim // 2)


def make_estimator(ecfg: EstimatorConfig, p: int):
    theta0 = np.ones(p) if ecfg.theta0 is None else np.asarray(ecfg.theta0, dtype=float)
    P0 = ecfg.rho * np.eye(p)
    if ecfg.kind == "gwrls":
        return GwRls.init(theta0, P0, ecfg.alpha)
    if ecfg.kind == "efrls":
        return EfRls.init(theta0, P0, ecfg.alpha)
    return GradientIdentifier.init(theta0)


def make_detector(cfg: ExperimentConfig, eta: float | None = None, tau: float | None = None) -> LrtDetector:
    d = cfg.detector
    return LrtDetector.create(
        d.eta if eta is None else eta,
        d.tau if tau is None else tau,
        d.min_samples,
        d.reset_on_change,
    )


def simulate_config(cfg: ExperimentConfig, seed: int | None = None) -> Trajectory:
    s = cfg.sim
    noise = NoiseConfig(s.process_kind, s.sigma, s.scale, s.obs_rel_std, cfg.seed if seed is None else seed)
    return simulate(make_model(cfg), cfg.param_schedule(), s.x0, s.h, s.K, noise, psi_source=s.psi_source)


def infection_slice(cfg: ExperimentConfig) -> slice:
    """Positions of the infection-rate parameters (beta, or vec(B))."""
    if cfg.model.kind == "sis":
        return slice(0, 1)
    n = cfg.state_dim // 2
    return slice(0, n * n)


def trial_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


@dataclass
class Track:
    """Per-step record of one estimator over a trajectory."""

    label: str
    thetas: np.ndarray
    accepted: np.ndarray
    detected: np.ndarray
    reset: np.ndarray
    kappa_P: np.ndarray
    kappa_He: np.ndarray
    events: list = field(default_factory=list)


def track_estimator(cfg: ExperimentConfig, ecfg: EstimatorConfig, traj: Trajectory, diagnostics: bool = True) -> Track:
    """Run one estimator over the trajectory.

    Every estimator is monitored by a detector.  Only ``resetting`` estimators
    act on it; for the others the detector runs open-loop for logging.
    """
    p = traj.thetas.shape[1]
    est = make_estimator(ecfg, p)
    det = make_detector(cfg)
    wrapper = ResettingEstimator(est, det, cfg.detector.reset_theta) if ecfg.resetting else None
    N = len(traj.data)
    thetas = np.empty((N, p))
    accepted = np.zeros(N, dtype=bool)
    detected = np.zeros(N, dtype=bool)
    kP = np.full(N, math.nan)
    kH = np.full(N, math.nan)
    events = []
    for i, d in enumerate(traj.data):
        if wrapper is not None:
            _, hit = wrapper.step(d)
            accepted[i] = wrapper.last_accepted
        else:
            theta_prev = est.theta.copy()
            accepted[i] = est.step(d)
            hit = det.step(predictability(d, theta_prev))
        detected[i] = hit
        events.append(det.last)
        thetas[i] = est.theta
        if diagnostics:
            if hasattr(est, "P"):
                kP[i] = condition_number(est.P)
            if isinstance(est, GwRls):
                kH[i] = est.kappa_He
    reset = detected if ecfg.resetting else np.zeros(N, dtype=bool)
    return Track(ecfg.label, thetas, accepted, detected, reset.copy(), kP, kH, events)


def predictability_series(cfg: ExperimentConfig, ecfg: EstimatorConfig, traj: Trajectory) -> np.ndarray:
    """Y_k of a plain (non-resetting) estimator, used for open-loop ROC sweeps."""
    est = make_estimator(ecfg, traj.thetas.shape[1])
    Y = np.empty(len(traj.data))
    for i, d in enumerate(traj.data):
        theta_prev = est.theta.copy()
        est.step(d)
        Y[i] = predictability(d, theta_prev)
    return Y


def roc_sweep(cfg: ExperimentConfig, ecfg: EstimatorConfig, n_trials: int | None = None) -> list[RocCurve]:
    """Pooled ROC curves (one per eta) over seeded trials of the scenario.

    Detection is open-loop: the predictability series comes from the plain
    estimator, so one estimator pass per trial serves every (eta, tau) pair.
    """
    mt = cfg.metrics
    n_trials = mt.roc_trials if n_trials is None else n_trials
    d = cfg.detector
    pooled: dict[float, RocCurve] = {}
    for s in trial_seeds(cfg.seed, n_trials):
        traj = simulate_config(cfg, s)
        Y = predictability_series(cfg, ecfg, traj)
        for eta in mt.eta_grid:

            def runner(tau, eta=eta):
                return run_detector(Y, eta, tau, d.min_samples, d.reset_on_change)

            curve = roc_points(traj.switch_indices, mt.roc_window, mt.tau_grid, runner, eta)
            pooled[eta] = curve if eta not in pooled else pooled[eta] + curve
    return [pooled[eta] for eta in mt.eta_grid]


# summaries -----------------------------------------------------------------------


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _vec(a):
    return [_num(v) for v in np.asarray(a).ravel()]


def _r0_errors(cfg: ExperimentConfig, theta_true, theta_hat) -> np.ndarray | None:
    if cfg.model.kind != "sir-network":
        return None
    n = cfg.state_dim // 2
    true = SirNetworkParams.from_theta(theta_true, n)
    hat = SirNetworkParams.from_theta(theta_hat, n, clip=True)
    if np.any(hat.gamma <= 0):
        return np.full(n, math.nan)
    return relative_error(local_r0(true), local_r0(hat), cfg.metrics.delta)


def summarize_track(cfg: ExperimentConfig, traj: Trajectory, tr: Track) -> dict:
    delta = cfg.metrics.delta
    truth = traj.thetas[: len(traj.data)]
    errs = relative_error(truth, tr.thetas, delta)
    inf = infection_slice(cfg)
    med_inf = np.median(errs[:, inf], axis=1)
    bounds = [0] + list(traj.switch_indices) + [len(traj.data)]
    intervals = []
    for a, b in zip(bounds, bounds[1:]):
        if b > a:
            intervals.append({"k_start": a, "k_stop": b, "mean_median_infection_error": _num(med_inf[a:b].mean())})
    out = {
        "final_theta": _vec(tr.thetas[-1]),
        "final_relative_error": _vec(errs[-1]),
        "final_median_error": _num(np.median(errs[-1])),
        "final_median_infection_error": _num(med_inf[-1]),
        "interval_errors": intervals,
        "accepted": int(tr.accepted.sum()),
        "detections": [int(k) for k in np.flatnonzero(tr.detected)],
        "resets": [int(k) for k in np.flatnonzero(tr.reset)],
        "final_kappa_P": _num(tr.kappa_P[-1]),
    }
    r0 = _r0_errors(cfg, truth[-1], tr.thetas[-1])
    if r0 is not None:
        out["final_r0_error"] = _vec(r0)
        out["final_median_r0_error"] = _num(np.median(r0))
    return out


# CSV writers ---------------------------------------------------------------------


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_estimates_csv(path, traj: Trajectory, tracks: list[Track], delta: float) -> None:
    p = traj.thetas.shape[1]
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(
            ["estimator", "k", "t"]
            + [f"theta{i}" for i in range(p)]
            + [f"relerr{i}" for i in range(p)]
            + ["kappa_P", "kappa_He", "accepted", "detected", "reset"]
        )
        for tr in tracks:
            errs = relative_error(traj.thetas[: len(traj.data)], tr.thetas, delta)
            for i, d in enumerate(traj.data):
                w.writerow(
                    [tr.label, d.k, fmt(d.t)]
                    + [fmt(v) for v in tr.thetas[i]]
                    + [fmt(v) for v in errs[i]]
                    + [fmt(tr.kappa_P[i]), fmt(tr.kappa_He[i]), int(tr.accepted[i]), int(tr.detected[i]), int(tr.reset[i])]
                )


def _opt(x) -> str:
    return "" if x is None or math.isnan(x) else fmt(x)


def write_detections_csv(path, traj: Trajectory, tracks: list[Track]) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["estimator", "k", "t", "Y", "Z", "E", "D", "p", "detected"])
        for tr in tracks:
            for d, ev in zip(traj.data, tr.events):
                ev = ev or LrtEvent(math.nan, math.nan)
                w.writerow([tr.label, d.k, fmt(d.t), _opt(ev.Y), _opt(ev.Z), _opt(ev.E), _opt(ev.D), _opt(ev.p), int(ev.detected)])


def write_rmse_csv(path, betas, gammas, surface) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["beta", "gamma", "rmse"])
        for i, b in enumerate(betas):
            for j, g in enumerate(gammas):
                w.writerow([fmt(b), fmt(g), fmt(surface[i, j])])


def write_pi_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["k_start", "k_end", "kappa", "lambda_min", "lambda_max"])
        for r in reports:
            w.writerow([r.window[0], r.window[1], fmt(r.kappa), fmt(r.lambda_min), fmt(r.lambda_max)])


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# orchestration -------------------------------------------------------------------


@dataclass
class RunResult:
    out_dir: Path
    files: list
    summary: dict


def run(cfg: ExperimentConfig, out_dir=None) -> RunResult:
    """Execute a validated config and write its artifacts; returns the summary."""
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []

    def path(name):
        files.append(name)
        return out / name

    path("config.json").write_text(cfg.to_json())
    traj = simulate_config(cfg)
    write_trajectory_csv(traj, path("trajectory.csv"))

    tracks = [track_estimator(cfg, e, traj) for e in cfg.estimators]
    write_estimates_csv(path("estimates.csv"), traj, tracks, cfg.metrics.delta)
    write_detections_csv(path("detections.csv"), traj, tracks)
    truth = traj.thetas[: len(traj.data)]
    for tr in tracks:
        series = error_profile(relative_error(truth, tr.thetas, cfg.metrics.delta), traj.times[:-1])
        write_error_series_csv(series, path(f"profile_{tr.label}.csv"))

    summary = {
        "name": cfg.name,
        "seed": cfg.seed,
        "samples": len(traj),
        "switch_indices": [int(k) for k in traj.switch_indices],
        "clamp_events": int(traj.clamp_events),
        "estimators": {tr.label: summarize_track(cfg, traj, tr) for tr in tracks},
    }

    mt = cfg.metrics
    if mt.rmse is not None:
        g = mt.rmse
        betas = np.linspace(g.beta_min, g.beta_max, g.n)
        gammas = np.linspace(g.gamma_min, g.gamma_max, g.n)
        surface = rmse_surface(traj.data, betas, gammas)
        write_rmse_csv(path("rmse.csv"), betas, gammas, surface)
        i, j = np.unravel_index(np.argmin(surface), surface.shape)
        summary["rmse_argmin"] = [_num(betas[i]), _num(gammas[j])]
    if mt.pi_window > 0:
        reports = moving_pi(traj.data, mt.pi_window)
        write_pi_csv(path("pi.csv"), reports)
        kappas = np.array([r.kappa for r in reports])
        summary["pi_argmin_k"] = int(reports[int(np.argmin(kappas))].window[1])
    if mt.roc_trials > 0:
        summary["roc_auc"] = {}
        for e in cfg.estimators:
            if e.resetting:
                continue
            curves = roc_sweep(cfg, e)
            write_roc_csv(curves, path(f"roc_{e.label}.csv"))
            summary["roc_auc"][e.label] = {repr(float(c.eta)): _num(c.auc()) for c in curves}

    path("summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    manifest = {
        "name": cfg.name,
        "seed": cfg.seed,
        "config_sha256": cfg.sha256(),
        "files": {name: _sha256_file(out / name) for name in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    files.append("manifest.json")
    return RunResult(out, files, summary)


def resolve_out(cfg: ExperimentConfig, flag: str | None) -> str:
    if flag:
        return flag
    return os.environ.get(ENV_OUT) or cfg.output_dir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="excite-id", description="Online identification experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a JSON config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None)
    p_pre = sub.add_parser("preset", help="run a named preset")
    p_pre.add_argument("name")
    p_pre.add_argument("--seed", type=int, default=None)
    p_pre.add_argument("--out", default=None)
    sub.add_parser("list-presets", help="print preset names")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list-presets":
        for name in presets():
            print(name)
        return 0
    try:
        if args.command == "run":
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                print(f"cannot read config: {exc}", file=sys.stderr)
                return 1
            cfg = ExperimentConfig.from_json(text)
        else:
            table = presets()
            if args.name not in table:
                print(f"unknown preset {args.name!r}; available: {', '.join(table)}", file=sys.stderr)
                return 2
            cfg = table[args.name]
            if args.seed is not None:
                cfg.seed = args.seed
            cfg.validate()
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    try:
        result = run(cfg, resolve_out(cfg, args.out))
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 1
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    print(result.out_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
