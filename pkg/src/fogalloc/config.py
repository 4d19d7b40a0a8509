"""Run configuration: one TOML file with flat sections, strictly validated.

Unknown keys are rejected so typos fail loudly; every default is materialized
into the effective parameter map that the run manifest echoes.  Units follow
the package convention: hours for the horizon and arrival rate, milliseconds
for delays.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass

from .arrivals import ArrivalModel, exponential_law, uniform_law
from .strategies import STRATEGY_KINDS, StrategyConfig
from .topology import FogNode, TopologySpec

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml


class ConfigError(ValueError):
    """Malformed, incomplete, or contradictory run configuration."""


_SCHEMA: dict[str, set[str]] = {
    "arrivals": {"law", "alpha", "beta", "rate_per_hour", "eta"},
    "horizon": {"hours"},
    "topology": {
        "other_delay_ms",
        "processing_delays",
        "processing_delay_ms",
        "processing_delay_range_ms",
        "nodes",
    },
    "solver": {"grid_points", "max_iterations", "n_curves"},
    "experiment": {
        "strategies",
        "replications",
        "base_seed",
        "epsilon",
        "auction_period_hours",
        "sweep",
        "sweep_values",
    },
    "evolution": {"enabled", "points"},
    "barrier": {"enabled", "replications", "points", "grid_max"},
}
_NODE_KEYS = {"id", "latency_ms", "vmi_count"}


@dataclass(frozen=True)
class EvolutionSettings:
    enabled: bool = False
    points: int = 240


@dataclass(frozen=True)
class BarrierSettings:
    enabled: bool = False
    replications: int = 10000
    points: int = 50
    grid_max: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    model: ArrivalModel
    topology: TopologySpec
    horizon: float
    grid_points: int
    max_iterations: int
    n_curves: int                      # 0 means one curve per VMI
    strategies: tuple[StrategyConfig, ...]
    replications: int
    base_seed: int
    sweep_axis: str
    sweep_values: tuple[float, ...]
    evolution: EvolutionSettings
    barrier: BarrierSettings
    effective: dict

    def solver_curve_count(self) -> int:
        return self.n_curves if self.n_curves > 0 else self.topology.total_vmis


def _check_keys(section: str, table: dict, allowed: set[str]) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {section}.{key}")


def _get(table: dict, section: str, key: str, types, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"missing required key {section}.{key}")
        return default
    value = table[key]
    if types is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, types) or isinstance(value, bool) and types is not bool:
        raise ConfigError(
            f"{section}.{key} has wrong type {type(value).__name__}"
        )
    return value


def _positive(section: str, key: str, value):
    if value <= 0:
        raise ConfigError(f"{section}.{key} must be positive, got {value}")
    return value


def _parse_arrivals(raw: dict) -> tuple[ArrivalModel, dict]:
    table = raw.get("arrivals")
    if table is None:
        raise ConfigError("missing section [arrivals]")
    _check_keys("arrivals", table, _SCHEMA["arrivals"])
    law_name = _get(table, "arrivals", "law", str, required=True)
    lam = _positive(
        "arrivals", "rate_per_hour",
        _get(table, "arrivals", "rate_per_hour", float, required=True),
    )
    eta = _get(table, "arrivals", "eta", float, default=1.0)
    if eta < 1.0:
        raise ConfigError(f"arrivals.eta must be >= 1, got {eta}")
    if law_name == "exponential":
        if "beta" in table:
            raise ConfigError("arrivals.beta is a uniform-law key")
        alpha = _positive(
            "arrivals", "alpha", _get(table, "arrivals", "alpha", float, default=1.0)
        )
        law = exponential_law(alpha)
        params = {"law": law_name, "alpha": alpha}
    elif law_name == "uniform":
        if "alpha" in table:
            raise ConfigError("arrivals.alpha is an exponential-law key")
        beta = _positive(
            "arrivals", "beta", _get(table, "arrivals", "beta", float, default=10.0)
        )
        law = uniform_law(beta)
        params = {"law": law_name, "beta": beta}
    else:
        raise ConfigError(f"unknown law {law_name!r}")
    params.update({"rate_per_hour": lam, "eta": eta})
    return ArrivalModel(lam=lam, law=law, eta=eta), params


def _parse_topology(raw: dict) -> tuple[TopologySpec, dict]:
    table = raw.get("topology")
    if table is None:
        raise ConfigError("missing section [topology]")
    _check_keys("topology", table, _SCHEMA["topology"])
    other = _positive(
        "topology", "other_delay_ms",
        _get(table, "topology", "other_delay_ms", float, required=True),
    )
    mode = _get(table, "topology", "processing_delays", str, default="sampled")
    if mode not in ("fixed", "sampled"):
        raise ConfigError(f"topology.processing_delays must be fixed or sampled")
    if mode == "fixed" and "processing_delay_range_ms" in table:
        raise ConfigError(
            "topology.processing_delay_range_ms requires sampled delays"
        )
    if mode == "sampled" and "processing_delay_ms" in table:
        raise ConfigError("topology.processing_delay_ms requires fixed delays")
    fixed_ms = _positive(
        "topology", "processing_delay_ms",
        _get(table, "topology", "processing_delay_ms", float, default=0.6),
    )
    rng_raw = _get(
        table, "topology", "processing_delay_range_ms", list, default=[0.2, 1.0]
    )
    if (
        len(rng_raw) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in rng_raw)
        or not 0 < float(rng_raw[0]) <= float(rng_raw[1])
    ):
        raise ConfigError("topology.processing_delay_range_ms must be [lo, hi] with 0 < lo <= hi")
    delay_range = (float(rng_raw[0]), float(rng_raw[1]))
    nodes_raw = _get(table, "topology", "nodes", list, required=True)
    if not nodes_raw:
        raise ConfigError("topology.nodes must list at least one node")
    nodes = []
    for i, entry in enumerate(nodes_raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"topology.nodes[{i}] must be a table")
        _check_keys(f"topology.nodes[{i}]", entry, _NODE_KEYS)
        node_id = entry.get("id")
        if isinstance(node_id, int) and not isinstance(node_id, bool):
            node_id = str(node_id)
        if not isinstance(node_id, str) or not node_id:
            raise ConfigError(f"topology.nodes[{i}].id must be a nonempty string")
        latency = _get(entry, f"topology.nodes[{i}]", "latency_ms", float, required=True)
        count = _get(entry, f"topology.nodes[{i}]", "vmi_count", int, required=True)
        if count < 1:
            raise ConfigError(f"topology.nodes[{i}].vmi_count must be >= 1")
        nodes.append(FogNode(node_id=node_id, latency_ms=float(latency), vmi_count=count))
    spec = TopologySpec(
        nodes=tuple(nodes),
        other_delay_ms=other,
        delay_mode=mode,
        fixed_delay_ms=fixed_ms,
        delay_range_ms=delay_range,
    )
    params = {
        "other_delay_ms": other,
        "processing_delays": mode,
        "nodes": [
            {"id": n.node_id, "latency_ms": n.latency_ms, "vmi_count": n.vmi_count}
            for n in nodes
        ],
    }
    if mode == "fixed":
        params["processing_delay_ms"] = fixed_ms
    else:
        params["processing_delay_range_ms"] = list(delay_range)
    return spec, params


def load_config(path) -> RunConfig:
    """Parse and validate one TOML run configuration."""
    try:
        with open(path, "rb") as fh:
            raw = _toml.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None

    for section in raw:
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")

    model, arrivals_params = _parse_arrivals(raw)
    topology, topology_params = _parse_topology(raw)

    horizon_table = raw.get("horizon")
    if horizon_table is None:
        raise ConfigError("missing section [horizon]")
    _check_keys("horizon", horizon_table, _SCHEMA["horizon"])
    horizon = _positive(
        "horizon", "hours", _get(horizon_table, "horizon", "hours", float, required=True)
    )

    solver = raw.get("solver", {})
    _check_keys("solver", solver, _SCHEMA["solver"])
    grid_points = _get(solver, "solver", "grid_points", int, default=2000)
    if grid_points < 8:
        raise ConfigError("solver.grid_points must be >= 8")
    max_iterations = _get(solver, "solver", "max_iterations", int, default=500)
    if max_iterations < 1:
        raise ConfigError("solver.max_iterations must be >= 1")
    n_curves = _get(solver, "solver", "n_curves", int, default=0)
    if n_curves < 0:
        raise ConfigError("solver.n_curves must be >= 0 (0 = one per VMI)")

    experiment = raw.get("experiment", {})
    _check_keys("experiment", experiment, _SCHEMA["experiment"])
    kinds = _get(experiment, "experiment", "strategies", list, default=["optimal"])
    if not kinds or not all(isinstance(k, str) for k in kinds):
        raise ConfigError("experiment.strategies must be a nonempty list of names")
    for kind in kinds:
        if kind not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy {kind!r}")
    replications = _get(experiment, "experiment", "replications", int, default=100)
    if replications < 1:
        raise ConfigError("experiment.replications must be >= 1")
    base_seed = _get(experiment, "experiment", "base_seed", int, default=0)
    if not 0 <= base_seed < 2**64:
        raise ConfigError("experiment.base_seed must fit in an unsigned 64-bit int")
    epsilon = _get(experiment, "experiment", "epsilon", float, default=0.5)
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError("experiment.epsilon must lie in [0, 1]")
    period = _get(
        experiment, "experiment", "auction_period_hours", float,
        default=horizon / 24.0,
    )
    if period <= 0:
        raise ConfigError("experiment.auction_period_hours must be positive")
    sweep_axis = _get(experiment, "experiment", "sweep", str, default="none")
    if sweep_axis not in ("none", "lambda", "mean"):
        raise ConfigError(f"unknown sweep axis {sweep_axis!r}")
    sweep_raw = _get(experiment, "experiment", "sweep_values", list, default=[])
    if sweep_axis == "none" and sweep_raw:
        raise ConfigError("experiment.sweep_values given but sweep is none")
    if sweep_axis != "none" and not sweep_raw:
        raise ConfigError("experiment.sweep_values required for a sweep")
    values = []
    for v in sweep_raw:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            raise ConfigError("experiment.sweep_values must be positive numbers")
        values.append(float(v))
    if sweep_axis == "mean" and model.law.name not in ("exponential", "uniform"):
        raise ConfigError("mean sweep supports the built-in laws only")
    strategies = tuple(
        StrategyConfig(kind=k, epsilon=epsilon, auction_period_hours=period)
        for k in kinds
    )

    evo_table = raw.get("evolution", {})
    _check_keys("evolution", evo_table, _SCHEMA["evolution"])
    evo_enabled = _get(evo_table, "evolution", "enabled", bool, default=False)
    evo_points = _get(evo_table, "evolution", "points", int, default=240)
    if evo_points < 2:
        raise ConfigError("evolution.points must be >= 2")
    evolution = EvolutionSettings(enabled=evo_enabled, points=evo_points)

    bar_table = raw.get("barrier", {})
    _check_keys("barrier", bar_table, _SCHEMA["barrier"])
    bar_enabled = _get(bar_table, "barrier", "enabled", bool, default=False)
    bar_reps = _get(bar_table, "barrier", "replications", int, default=10000)
    bar_points = _get(bar_table, "barrier", "points", int, default=50)
    bar_max = _get(bar_table, "barrier", "grid_max", float, default=0.0)
    if bar_enabled:
        if bar_reps < 2:
            raise ConfigError("barrier.replications must be >= 2")
        if bar_points < 2:
            raise ConfigError("barrier.points must be >= 2")
        if bar_max <= 0:
            raise ConfigError("barrier.grid_max must be positive when enabled")
    barrier = BarrierSettings(
        enabled=bar_enabled, replications=bar_reps,
        points=bar_points, grid_max=bar_max,
    )

    effective = {
        "arrivals": arrivals_params,
        "horizon": {"hours": horizon},
        "topology": topology_params,
        "solver": {
            "grid_points": grid_points,
            "max_iterations": max_iterations,
            "n_curves": n_curves,
        },
        "experiment": {
            "strategies": list(kinds),
            "replications": replications,
            "base_seed": base_seed,
            "epsilon": epsilon,
            "auction_period_hours": period,
            "sweep": sweep_axis,
            "sweep_values": values,
        },
        "evolution": {"enabled": evo_enabled, "points": evo_points},
        "barrier": {
            "enabled": bar_enabled,
            "replications": bar_reps,
            "points": bar_points,
            "grid_max": bar_max,
        },
    }
    return RunConfig(
        model=model,
        topology=topology,
        horizon=horizon,
        grid_points=grid_points,
        max_iterations=max_iterations,
        n_curves=n_curves,
        strategies=strategies,
        replications=replications,
        base_seed=base_seed,
        sweep_axis=sweep_axis,
        sweep_values=tuple(values),
        evolution=evolution,
        barrier=barrier,
        effective=effective,
    )
