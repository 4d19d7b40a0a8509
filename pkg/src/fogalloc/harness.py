"""Replicated Monte Carlo experiments over the allocation strategies.

Randomness is derived counter-style: every (base seed, replication, purpose)
triple yields an independent generator, so all strategies inside a
replication see bit-identical arrival streams and topology draws, results do
not depend on execution order or thread count, and reruns are byte-identical.
"""
from __future__ import annotations

import math
import multiprocessing
import os
from dataclasses import dataclass, replace

import numpy as np

from .allocator import AllocationRecord
from .arrivals import ArrivalModel, exponential_law, uniform_law
from .strategies import (
    StrategyConfig,
    run_epsilon_greedy,
    run_ideal,
    run_optimal,
    run_optimistic,
    run_periodic_auction,
    run_pessimistic,
)
from .thresholds import ThresholdTable, solve_thresholds
from .topology import TopologySpec, sort_and_map

_P_ARRIVALS = 0
_P_DELAYS = 1
_P_BARRIER = 2
_P_POLICY = 16  # + strategy index


def substream(base_seed: int, replication: int, purpose: int) -> np.random.Generator:
    """Independent generator for one (seed, replication, purpose) triple."""
    seq = np.random.SeedSequence(entropy=base_seed, spawn_key=(replication, purpose))
    return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment end to end."""

    model: ArrivalModel
    topology: TopologySpec
    strategies: tuple[StrategyConfig, ...]
    horizon: float
    replications: int
    base_seed: int
    sweep_axis: str = "none"          # "none" | "lambda" | "mean"
    sweep_values: tuple[float, ...] = ()
    grid_points: int = 2000

    def __post_init__(self) -> None:
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if self.sweep_axis not in ("none", "lambda", "mean"):
            raise ValueError(f"unknown sweep axis {self.sweep_axis!r}")
        if self.sweep_axis != "none" and not self.sweep_values:
            raise ValueError("sweep requested but no sweep values given")
        if not self.strategies:
            raise ValueError("need at least one strategy")


def model_for_sweep(model: ArrivalModel, axis: str, value: float) -> ArrivalModel:
    """Model variant for one sweep point."""
    if axis == "none":
        return model
    if axis == "lambda":
        return replace(model, lam=float(value))
    if axis == "mean":
        if model.law.name == "exponential":
            return replace(model, law=exponential_law(1.0 / float(value)))
        if model.law.name == "uniform":
            return replace(model, law=uniform_law(2.0 * float(value)))
        raise ValueError("mean sweep supports the built-in laws only")
    raise ValueError(f"unknown sweep axis {axis!r}")


def strategy_labels(strategies) -> tuple[str, ...]:
    counts: dict[str, int] = {}
    for s in strategies:
        counts[s.kind] = counts.get(s.kind, 0) + 1
    seen: dict[str, int] = {}
    labels = []
    for s in strategies:
        if counts[s.kind] == 1:
            labels.append(s.kind)
        else:
            seen[s.kind] = seen.get(s.kind, 0) + 1
            labels.append(f"{s.kind}_{seen[s.kind]}")
    return tuple(labels)


@dataclass(frozen=True)
class _PointTask:
    """Picklable per-sweep-point workload shared by all replications."""

    model: ArrivalModel
    topology: TopologySpec
    strategies: tuple[StrategyConfig, ...]
    horizon: float
    base_seed: int
    table: ThresholdTable | None
    raw_reserve: float


def _run_strategies(task: _PointTask, rep: int) -> tuple[int, list[list[AllocationRecord]]]:
    times, xs = task.model.sample_arrivals(
        task.horizon, substream(task.base_seed, rep, _P_ARRIVALS)
    )
    topo = task.topology.realize(substream(task.base_seed, rep, _P_DELAYS))
    rates = sort_and_map(topo)
    eta = task.model.eta
    out = []
    for k, strat in enumerate(task.strategies):
        if strat.kind == "optimal":
            recs = run_optimal(times, xs, rates, task.table)
        elif strat.kind == "ideal":
            recs = run_ideal(times, xs, rates, eta)
        elif strat.kind == "pessimistic":
            recs = run_pessimistic(times, xs, rates, eta, task.raw_reserve)
        elif strat.kind == "optimistic":
            recs = run_optimistic(times, xs, rates, eta, task.raw_reserve)
        elif strat.kind == "epsilon_greedy":
            recs = run_epsilon_greedy(
                times, xs, rates, eta, strat.epsilon,
                substream(task.base_seed, rep, _P_POLICY + k),
            )
        else:
            recs = run_periodic_auction(
                times, xs, rates, eta, strat.auction_period_hours, task.horizon
            )
        out.append(recs)
    return times.size, out


def _totals_batch(args) -> tuple[list[int], np.ndarray]:
    task, reps = args
    s_count = len(task.strategies)
    # rows per rep: arrivals, then (revenue, qoe, count) per strategy
    block = np.empty((len(reps), 1 + 3 * s_count))
    for row, rep in enumerate(reps):
        n_arr, per_strategy = _run_strategies(task, rep)
        block[row, 0] = n_arr
        for k, recs in enumerate(per_strategy):
            block[row, 1 + 3 * k] = sum(r.price for r in recs)
            block[row, 2 + 3 * k] = sum(r.qoe for r in recs)
            block[row, 3 + 3 * k] = len(recs)
    return reps, block


@dataclass(frozen=True)
class PointResult:
    """Per-replication outcomes at one sweep point."""

    sweep_value: float
    labels: tuple[str, ...]
    arrivals: np.ndarray      # (R,)
    revenue: np.ndarray       # (S, R)
    total_qoe: np.ndarray     # (S, R)
    allocated: np.ndarray     # (S, R)

    def qoe_per_request(self) -> np.ndarray:
        """Total QoE divided by the number of arrivals, per replication."""
        denom = np.where(self.arrivals > 0, self.arrivals, 1.0)
        out = self.total_qoe / denom
        return np.where(self.arrivals > 0, out, 0.0)


def _chunks(n_reps: int, n_chunks: int) -> list[list[int]]:
    idx = list(range(n_reps))
    size = max(1, math.ceil(n_reps / n_chunks))
    return [idx[i : i + size] for i in range(0, n_reps, size)]


def _resolve_threads(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    if threads < 0:
        raise ValueError("threads must be >= 0")
    return threads


def run_point(
    spec: ExperimentSpec,
    sweep_value: float | None = None,
    threads: int = 1,
    table: ThresholdTable | None = None,
) -> PointResult:
    """Run all replications at one sweep point (or the base point)."""
    threads = _resolve_threads(threads)
    axis = "none" if sweep_value is None else spec.sweep_axis
    model = model_for_sweep(spec.model, axis, 0.0 if sweep_value is None else sweep_value)
    needs_table = any(s.kind == "optimal" for s in spec.strategies)
    if needs_table and table is None:
        table, _ = solve_thresholds(
            model, spec.topology.total_vmis, spec.horizon, spec.grid_points
        )
    task = _PointTask(
        model=model,
        topology=spec.topology,
        strategies=spec.strategies,
        horizon=spec.horizon,
        base_seed=spec.base_seed,
        table=table if needs_table else None,
        raw_reserve=model.reserve() ** model.eta,
    )
    r_total = spec.replications
    s_count = len(spec.strategies)
    flat = np.empty((r_total, 1 + 3 * s_count))
    if threads <= 1:
        reps, block = _totals_batch((task, list(range(r_total))))
        flat[reps] = block
    else:
        with multiprocessing.Pool(threads) as pool:
            jobs = [(task, c) for c in _chunks(r_total, 4 * threads)]
            for reps, block in pool.imap_unordered(_totals_batch, jobs):
                flat[reps] = block
    arrivals = flat[:, 0]
    revenue = flat[:, 1::3].T.copy()
    total_qoe = flat[:, 2::3].T.copy()
    allocated = flat[:, 3::3].T.copy()
    return PointResult(
        sweep_value=model.lam if sweep_value is None else float(sweep_value),
        labels=strategy_labels(spec.strategies),
        arrivals=arrivals,
        revenue=revenue,
        total_qoe=total_qoe,
        allocated=allocated,
    )


@dataclass(frozen=True)
class MetricRow:
    sweep_value: float
    strategy: str
    mean_revenue: float
    se_revenue: float
    mean_total_qoe: float
    se_total_qoe: float
    mean_qoe_per_request: float
    se_qoe_per_request: float


@dataclass(frozen=True)
class MetricSeries:
    rows: tuple[MetricRow, ...]

    def select(self, strategy: str) -> tuple[MetricRow, ...]:
        return tuple(r for r in self.rows if r.strategy == strategy)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))


def summarize_point(point: PointResult) -> tuple[MetricRow, ...]:
    rows = []
    per_req = point.qoe_per_request()
    for k, label in enumerate(point.labels):
        m_rev, se_rev = _mean_se(point.revenue[k])
        m_qoe, se_qoe = _mean_se(point.total_qoe[k])
        m_pr, se_pr = _mean_se(per_req[k])
        rows.append(
            MetricRow(
                sweep_value=point.sweep_value,
                strategy=label,
                mean_revenue=m_rev,
                se_revenue=se_rev,
                mean_total_qoe=m_qoe,
                se_total_qoe=se_qoe,
                mean_qoe_per_request=m_pr,
                se_qoe_per_request=se_pr,
            )
        )
    return tuple(rows)


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> MetricSeries:
    """All sweep points (or the single base point), aggregated."""
    rows: list[MetricRow] = []
    if spec.sweep_axis == "none":
        rows.extend(summarize_point(run_point(spec, None, threads)))
    else:
        for value in spec.sweep_values:
            rows.extend(summarize_point(run_point(spec, value, threads)))
    return MetricSeries(rows=tuple(rows))


# -- allocation counts over time --------------------------------------------


@dataclass(frozen=True)
class EvolutionSeries:
    grid: np.ndarray                 # (P,)
    labels: tuple[str, ...]
    mean_allocated: np.ndarray       # (S, P)
    mean_cum_qoe: np.ndarray         # (S, P)


def _evolution_batch(args) -> tuple[list[int], np.ndarray]:
    task, reps, grid = args
    s_count = len(task.strategies)
    block = np.empty((len(reps), 2 * s_count, grid.size))
    for row, rep in enumerate(reps):
        _, per_strategy = _run_strategies(task, rep)
        for k, (strat, recs) in enumerate(zip(task.strategies, per_strategy)):
            if strat.kind == "ideal" and recs:
                # offline bound: horizontal line, zero before any time passes
                counts = np.full(grid.size, float(len(recs)))
                cum = np.full(grid.size, float(sum(r.qoe for r in recs)))
                counts[grid == 0.0] = 0.0
                cum[grid == 0.0] = 0.0
            else:
                t_dec = np.array([r.t_decision for r in recs])
                q = np.array([r.qoe for r in recs])
                idx = np.searchsorted(t_dec, grid, side="right")
                counts = idx.astype(float)
                cq = np.concatenate([[0.0], np.cumsum(q)])
                cum = cq[idx]
            block[row, 2 * k] = counts
            block[row, 2 * k + 1] = cum
    return reps, block


def time_evolution(
    spec: ExperimentSpec, points: int = 240, threads: int = 1
) -> EvolutionSeries:
    """Mean allocation count and cumulative QoE on a uniform time grid.

    Always evaluated at the base model; sweep settings are ignored.
    """
    threads = _resolve_threads(threads)
    model = spec.model
    needs_table = any(s.kind == "optimal" for s in spec.strategies)
    table = None
    if needs_table:
        table, _ = solve_thresholds(
            model, spec.topology.total_vmis, spec.horizon, spec.grid_points
        )
    task = _PointTask(
        model=model,
        topology=spec.topology,
        strategies=spec.strategies,
        horizon=spec.horizon,
        base_seed=spec.base_seed,
        table=table,
        raw_reserve=model.reserve() ** model.eta,
    )
    grid = np.linspace(0.0, spec.horizon, points + 1)
    r_total = spec.replications
    s_count = len(spec.strategies)
    stack = np.empty((r_total, 2 * s_count, grid.size))
    if threads <= 1:
        reps, block = _evolution_batch((task, list(range(r_total)), grid))
        stack[reps] = block
    else:
        with multiprocessing.Pool(threads) as pool:
            jobs = [(task, c, grid) for c in _chunks(r_total, 4 * threads)]
            for reps, block in pool.imap_unordered(_evolution_batch, jobs):
                stack[reps] = block
    means = stack.mean(axis=0)
    return EvolutionSeries(
        grid=grid,
        labels=strategy_labels(spec.strategies),
        mean_allocated=means[0::2],
        mean_cum_qoe=means[1::2],
    )


# -- single-slot static-bar revenue curve ------------------------------------


@dataclass(frozen=True)
class BarrierResult:
    grid: np.ndarray
    analytic: np.ndarray
    mc: np.ndarray
    se: np.ndarray


def barrier_revenue_analytic(model: ArrivalModel, horizon: float, p):
    """Expected revenue of a single slot sold at fixed bar p before T:
    p * P(at least one raw characteristic >= p arrives)."""
    p = np.asarray(p, dtype=float)
    return p * (-np.expm1(-model.lam * horizon * model.raw_survival(p)))


def barrier_curve(
    model: ArrivalModel,
    horizon: float,
    barrier_grid,
    replications: int,
    base_seed: int,
) -> BarrierResult:
    """Analytic curve plus Monte Carlo estimate on a shared bar grid.

    One arrival stream per replication is reused for every bar (the stream
    maximum decides all sales), so the MC curve is smooth in p.
    """
    grid = np.asarray(barrier_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0):
        raise ValueError("barrier grid must be positive")
    x_max = np.full(replications, -np.inf)
    for rep in range(replications):
        _, xs = model.sample_arrivals(horizon, substream(base_seed, rep, _P_BARRIER))
        if xs.size:
            x_max[rep] = xs.max()
    qualifies = x_max[None, :] >= grid[:, None]
    frac = qualifies.mean(axis=1)
    mc = grid * frac
    se = grid * np.sqrt(frac * (1.0 - frac) / replications)
    return BarrierResult(
        grid=grid,
        analytic=np.asarray(barrier_revenue_analytic(model, horizon, grid)),
        mc=mc,
        se=se,
    )


# -- CSV output --------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def write_sweep_csv(series: MetricSeries, path) -> None:
    header = (
        "sweep_value,strategy,mean_revenue,se_revenue,"
        "mean_total_qoe,se_total_qoe,mean_qoe_per_request,se"
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for r in series.rows:
            fh.write(
                ",".join(
                    [
                        _fmt(r.sweep_value),
                        r.strategy,
                        _fmt(r.mean_revenue),
                        _fmt(r.se_revenue),
                        _fmt(r.mean_total_qoe),
                        _fmt(r.se_total_qoe),
                        _fmt(r.mean_qoe_per_request),
                        _fmt(r.se_qoe_per_request),
                    ]
                )
                + "\n"
            )


def write_evolution_csv(evo: EvolutionSeries, path) -> None:
    header = "t,strategy,mean_allocated,mean_cum_qoe"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for k, label in enumerate(evo.labels):
            for m in range(evo.grid.size):
                fh.write(
                    f"{_fmt(evo.grid[m])},{label},"
                    f"{_fmt(evo.mean_allocated[k, m])},"
                    f"{_fmt(evo.mean_cum_qoe[k, m])}\n"
                )


def write_barrier_csv(result: BarrierResult, path) -> None:
    header = "p,analytic_revenue,mc_revenue,mc_se"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for m in range(result.grid.size):
            fh.write(
                f"{_fmt(result.grid[m])},{_fmt(result.analytic[m])},"
                f"{_fmt(result.mc[m])},{_fmt(result.se[m])}\n"
            )
