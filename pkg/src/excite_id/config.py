"""Experiment configuration: JSON schema, validation and named presets.

A config is a tree of small dataclasses.  ``to_json`` is canonical (sorted
keys, two-space indent, trailing newline) so parse/serialize round-trips are
byte-identical and the sha256 of that text identifies a run.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .epimodels import NetworkSpec, ParamSchedule, SirNetworkParams, SisParams, make_network
from .sim import PROCESS_KINDS, PSI_SOURCES

MODEL_KINDS = ("sis", "sir-network")
ESTIMATOR_KINDS = ("gwrls", "efrls", "gradient")


class ConfigError(ValueError):
    """Raised with every violation found, not just the first."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid config:\n  " + "\n  ".join(self.violations))


@dataclass
class ModelConfig:
    """SIS uses ``beta``/``gamma``; the SIR network uses explicit ``B``/``gamma_vec``
    when given and otherwise samples rates from the ``network`` spec."""

    kind: str = "sis"
    beta: float = 0.12
    gamma: float = 0.04
    B: list | None = None
    gamma_vec: list | None = None
    network: NetworkSpec | None = None


@dataclass
class Switch:
    """From time ``t`` on, infection rates are ``beta_scale`` times the base and
    recovery rates ``gamma_scale`` times the base."""

    t: float
    beta_scale: float = 1.0
    gamma_scale: float = 1.0


@dataclass
class SimConfig:
    h: float = 0.1
    K: int = 1001
    x0: list = field(default_factory=lambda: [0.01])
    psi_source: str = "difference"
    process_kind: str = "none"
    sigma: float = 0.0
    scale: float = 1.0
    obs_rel_std: float = 0.0


@dataclass
class EstimatorConfig:
    kind: str = "gwrls"
    alpha: float = 0.98
    rho: float = 1e5
    theta0: list | None = None  # None means all ones
    resetting: bool = False

    @property
    def label(self) -> str:
        return ("cp-" if self.resetting else "") + self.kind


@dataclass
class DetectorConfig:
    eta: float = 0.5
    tau: float = 0.1
    min_samples: int = 0
    reset_theta: bool = False
    reset_on_change: bool = False


@dataclass
class RmseGrid:
    beta_min: float = 0.0
    beta_max: float = 0.3
    gamma_min: float = 0.0
    gamma_max: float = 0.1
    n: int = 61


@dataclass
class MetricsConfig:
    delta: float = 1e-2
    roc_window: int = 10
    tau_grid: list = field(default_factory=list)
    eta_grid: list = field(default_factory=list)
    roc_trials: int = 0
    rmse: RmseGrid | None = None
    pi_window: int = 0  # 0 disables the moving PI report


@dataclass
class ExperimentConfig:
    name: str
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: list = field(default_factory=list)
    sim: SimConfig = field(default_factory=SimConfig)
    estimators: list = field(default_factory=lambda: [EstimatorConfig()])
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    output_dir: str = "runs"
    seed: int = 0

    # --- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        problems: list[str] = []
        cfg = _build(cls, d, "", problems)
        if cfg is not None:
            try:
                problems += cfg.violations()
            except (AttributeError, TypeError):
                # a malformed subtree was already reported by _build
                pass
        if problems:
            raise ConfigError(problems)
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"not valid JSON: {exc}"]) from exc
        return cls.from_dict(d)

    # --- validation ----------------------------------------------------------

    def violations(self) -> list[str]:
        out: list[str] = []
        m, s = self.model, self.sim
        if not self.name:
            out.append("name must be non-empty")
        if m.kind not in MODEL_KINDS:
            out.append(f"model.kind must be one of {MODEL_KINDS}, got {m.kind!r}")
        if m.kind == "sis":
            if not (m.beta >= 0 and m.gamma >= 0):
                out.append("model.beta and model.gamma must be >= 0")
        elif m.kind == "sir-network":
            if m.B is None and m.network is None:
                out.append("sir-network needs either model.B/model.gamma_vec or model.network")
            if (m.B is None) != (m.gamma_vec is None):
                out.append("model.B and model.gamma_vec must be given together")
            if m.B is not None and m.gamma_vec is not None:
                try:
                    SirNetworkParams(np.array(m.B, dtype=float), np.array(m.gamma_vec, dtype=float))
                except ValueError as exc:
                    out.append(f"model.B/gamma_vec: {exc}")
            if m.network is not None:
                out += [f"model.network: {v}" for v in m.network.violations()]
        times = [sw.t for sw in self.schedule]
        if any(t <= 0 for t in times):
            out.append("schedule switch times must be > 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            out.append("schedule switch times must be strictly increasing")
        if any(sw.beta_scale < 0 or sw.gamma_scale < 0 for sw in self.schedule):
            out.append("schedule scales must be >= 0")
        if not s.h > 0:
            out.append("sim.h must be > 0")
        if s.K < 2:
            out.append("sim.K must be >= 2")
        if s.psi_source not in PSI_SOURCES:
            out.append(f"sim.psi_source must be one of {PSI_SOURCES}")
        if s.process_kind not in PROCESS_KINDS:
            out.append(f"sim.process_kind must be one of {PROCESS_KINDS}")
        if s.sigma < 0 or s.scale < 0 or s.obs_rel_std < 0:
            out.append("sim noise magnitudes must be >= 0")
        if m.kind in MODEL_KINDS:
            dim = self.state_dim
            if len(s.x0) != dim:
                out.append(f"sim.x0 must have length {dim}, got {len(s.x0)}")
            elif any(not (0 <= v <= 1) for v in s.x0):
                out.append("sim.x0 entries must lie in [0, 1]")
            elif m.kind == "sir-network":
                n = dim // 2
                if any(a + b > 1 for a, b in zip(s.x0[:n], s.x0[n:])):
                    out.append("sim.x0 must satisfy I + R <= 1 per node")
        if not self.estimators:
            out.append("at least one estimator is required")
        for i, e in enumerate(self.estimators):
            if e.kind not in ESTIMATOR_KINDS:
                out.append(f"estimators[{i}].kind must be one of {ESTIMATOR_KINDS}")
            if not (0 < e.alpha <= 1):
                out.append(f"estimators[{i}].alpha must lie in (0, 1]")
            if not e.rho > 0:
                out.append(f"estimators[{i}].rho must be > 0")
            if e.theta0 is not None and m.kind in MODEL_KINDS and len(e.theta0) != self.param_dim:
                out.append(f"estimators[{i}].theta0 must have length {self.param_dim}")
        labels = [e.label for e in self.estimators]
        if len(set(labels)) != len(labels):
            out.append("estimator labels (kind plus cp- prefix) must be unique")
        dt = self.detector
        if not (0 <= dt.eta <= 1):
            out.append("detector.eta must lie in [0, 1]")
        if not (0 <= dt.tau <= 1):
            out.append("detector.tau must lie in [0, 1]")
        if dt.min_samples < 0:
            out.append("detector.min_samples must be >= 0")
        mt = self.metrics
        if not mt.delta > 0:
            out.append("metrics.delta must be > 0")
        if mt.roc_window < 0:
            out.append("metrics.roc_window must be >= 0")
        if any(not (0 <= t <= 1) for t in mt.tau_grid):
            out.append("metrics.tau_grid entries must lie in [0, 1]")
        if any(not (0 <= e <= 1) for e in mt.eta_grid):
            out.append("metrics.eta_grid entries must lie in [0, 1]")
        if mt.roc_trials < 0:
            out.append("metrics.roc_trials must be >= 0")
        if mt.roc_trials > 0 and not (mt.tau_grid and mt.eta_grid and self.schedule):
            out.append("ROC evaluation needs tau_grid, eta_grid and at least one schedule switch")
        if mt.rmse is not None:
            if m.kind != "sis":
                out.append("metrics.rmse is only defined for the SIS model")
            if mt.rmse.n < 1 or mt.rmse.beta_max < mt.rmse.beta_min or mt.rmse.gamma_max < mt.rmse.gamma_min:
                out.append("metrics.rmse grid must be non-empty with min <= max")
        if mt.pi_window < 0:
            out.append("metrics.pi_window must be >= 0")
        return out

    def validate(self) -> "ExperimentConfig":
        problems = self.violations()
        if problems:
            raise ConfigError(problems)
        return self

    # --- derived objects -----------------------------------------------------

    @property
    def state_dim(self) -> int:
        if self.model.kind == "sis":
            return 1
        if self.model.B is not None:
            return 2 * len(self.model.B)
        if self.model.network is not None:
            return 2 * self.model.network.n
        return 0

    @property
    def param_dim(self) -> int:
        if self.model.kind == "sis":
            return 2
        n = self.state_dim // 2
        return n * n + n

    def base_params(self):
        m = self.model
        if m.kind == "sis":
            return SisParams(m.beta, m.gamma)
        if m.B is not None:
            return SirNetworkParams(np.array(m.B, dtype=float), np.array(m.gamma_vec, dtype=float))
        return make_network(m.network)

    def param_schedule(self) -> ParamSchedule:
        base = self.base_params()

        def scaled(sw: Switch):
            if isinstance(base, SisParams):
                return SisParams(base.beta * sw.beta_scale, base.gamma * sw.gamma_scale)
            return SirNetworkParams(base.B * sw.beta_scale, base.gamma * sw.gamma_scale)

        return ParamSchedule(((0.0, base),) + tuple((sw.t, scaled(sw)) for sw in self.schedule))


def _build(tp, value, path, problems):
    """Recursively turn plain JSON into the dataclass ``tp``, collecting problems."""
    if not isinstance(value, dict):
        problems.append(f"{path or 'config'}: expected an object")
        return None
    fields = {f.name: f for f in dataclasses.fields(tp)}
    unknown = sorted(set(value) - set(fields))
    problems += [f"{path}{k}: unknown field" for k in unknown]
    kwargs = {}
    for name, f in fields.items():
        if name not in value:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                problems.append(f"{path}{name}: required field missing")
            continue
        v = value[name]
        sub = _NESTED.get((tp, name))
        if sub is not None and v is not None:
            if isinstance(sub, list):
                if not isinstance(v, list):
                    problems.append(f"{path}{name}: expected a list")
                    continue
                v = [_build(sub[0], item, f"{path}{name}[{i}].", problems) for i, item in enumerate(v)]
            else:
                v = _build(sub, v, f"{path}{name}.", problems)
        elif tp is NetworkSpec and name in ("weight_range", "gamma_range"):
            v = tuple(v)
        kwargs[name] = v
    try:
        return tp(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"{path or 'config'}: {exc}")
        return None


_NESTED = {
    (ExperimentConfig, "model"): ModelConfig,
    (ExperimentConfig, "schedule"): [Switch],
    (ExperimentConfig, "sim"): SimConfig,
    (ExperimentConfig, "estimators"): [EstimatorConfig],
    (ExperimentConfig, "detector"): DetectorConfig,
    (ExperimentConfig, "metrics"): MetricsConfig,
    (ModelConfig, "network"): NetworkSpec,
    (MetricsConfig, "rmse"): RmseGrid,
}


# presets ------------------------------------------------------------------------

ROC_TAUS = [1e-6, 1e-4, 1e-3, 0.01, 0.03, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0]
ROC_ETAS = [0.1, 0.3, 0.5, 1.0]

# two-node change-point scenario: strong within-node coupling, weak cross terms
_CP_B = [[0.5, 0.05], [0.05, 0.3]]
_CP_GAMMA = [0.1, 0.12]
_CP_X0 = [0.02, 0.001, 0.0, 0.0]


def _sis(name, beta, gamma, K, **kw) -> ExperimentConfig:
    sim = SimConfig(h=0.1, K=K, x0=[0.01], **kw.pop("sim", {}))
    return ExperimentConfig(name=name, model=ModelConfig("sis", beta, gamma), sim=sim, **kw)


def _network(topology: str) -> ExperimentConfig:
    short = {"fully-connected": "fc", "star": "star", "erdos-renyi": "er"}[topology]
    n = 7
    return ExperimentConfig(
        name=f"sir-network-{short}",
        model=ModelConfig("sir-network", network=NetworkSpec(topology, n=n, seed=3)),
        sim=SimConfig(
            h=0.2, K=301, x0=[0.01] * n + [0.0] * n, psi_source="drift", process_kind="state-scaled", scale=0.3
        ),
        estimators=[EstimatorConfig("gwrls"), EstimatorConfig("efrls")],
    )


def _changepoint(name, switches, estimators, detector, metrics) -> ExperimentConfig:
    return ExperimentConfig(
        name=name,
        model=ModelConfig("sir-network", B=_CP_B, gamma_vec=_CP_GAMMA),
        schedule=switches,
        sim=SimConfig(
            h=0.2,
            K=301,
            x0=list(_CP_X0),
            psi_source="drift",
            process_kind="state-scaled",
            scale=0.03,
            obs_rel_std=0.1,
        ),
        estimators=estimators,
        detector=detector,
        metrics=metrics,
    )


def presets() -> dict[str, ExperimentConfig]:
    out = [
        _sis("sis-basic", 0.8076, 0.2692, 1001, estimators=[EstimatorConfig("gwrls"), EstimatorConfig("efrls")]),
        _sis(
            "sis-contour",
            0.12,
            0.04,
            3001,
            estimators=[EstimatorConfig("gradient", theta0=[0.05, 0.07]), EstimatorConfig("gwrls")],
            metrics=MetricsConfig(rmse=RmseGrid(), pi_window=2),
        ),
        _sis(
            "sis-noisy",
            0.8076,
            0.2692,
            3001,
            sim={"process_kind": "additive-sigma", "sigma": 0.01},
            estimators=[EstimatorConfig("gwrls"), EstimatorConfig("efrls")],
            seed=1,
        ),
        _network("fully-connected"),
        _network("star"),
        _network("erdos-renyi"),
        _changepoint(
            "sir-changepoint",
            # lockdown, partial rebound, then a small recovery-rate change
            [Switch(12.0, 0.3), Switch(30.0, 0.8), Switch(49.0, 0.8, 1.1)],
            [
                EstimatorConfig("gwrls"),
                EstimatorConfig("efrls"),
                EstimatorConfig("gwrls", resetting=True),
                EstimatorConfig("efrls", resetting=True),
            ],
            DetectorConfig(eta=0.5, tau=0.1, reset_on_change=True),
            MetricsConfig(),
        ),
        _changepoint(
            "roc-sweep",
            [
                Switch(8.0, 0.3),
                Switch(16.0, 0.8),
                Switch(24.0, 0.8, 1.1),
                Switch(32.0, 0.24, 1.1),
                Switch(40.0, 0.8, 1.1),
                Switch(48.0, 0.8),
            ],
            [EstimatorConfig("gwrls"), EstimatorConfig("efrls")],
            DetectorConfig(eta=0.3, tau=0.1),
            MetricsConfig(tau_grid=list(ROC_TAUS), eta_grid=list(ROC_ETAS), roc_trials=100),
        ),
    ]
    for cfg in out:
        cfg.output_dir = f"runs/{cfg.name}"
    return {cfg.name: cfg for cfg in out}


def preset(name: str) -> ExperimentConfig:
    table = presets()
    if name not in table:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(table)}")
    return table[name]
