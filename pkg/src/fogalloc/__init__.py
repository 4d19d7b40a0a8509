"""Revenue-optimal sequential allocation and pricing of fog VM instances."""
from __future__ import annotations

__version__ = "0.1.0"

from .allocator import (
    AllocationRecord,
    AllocatorState,
    HorizonExpiredError,
    Slot,
    UnknownAllocationError,
    classify,
    initial_state,
    process_arrival,
    release,
    write_ledger_csv,
)
from .arrivals import (
    ArrivalModel,
    Law,
    NoRootError,
    SupportError,
    exponential_law,
    uniform_law,
)
from .config import (
    BarrierSettings,
    ConfigError,
    EvolutionSettings,
    RunConfig,
    load_config,
)
from .harness import (
    BarrierResult,
    EvolutionSeries,
    ExperimentSpec,
    MetricRow,
    MetricSeries,
    PointResult,
    barrier_curve,
    barrier_revenue_analytic,
    model_for_sweep,
    run_experiment,
    run_point,
    substream,
    summarize_point,
    time_evolution,
    write_barrier_csv,
    write_evolution_csv,
    write_sweep_csv,
)
from .pricing import price_schedule, qoe
from .strategies import (
    STRATEGY_KINDS,
    StrategyConfig,
    run_epsilon_greedy,
    run_ideal,
    run_optimal,
    run_optimistic,
    run_periodic_auction,
    run_pessimistic,
)
from .thresholds import (
    NonConvergenceError,
    OrderingError,
    RevenueCurve,
    ThresholdTable,
    closed_form_cutoff_exponential,
    closed_form_cutoff_uniform,
    expected_revenue,
    expected_revenue_from_curves,
    read_thresholds_csv,
    solve_thresholds,
    write_revenue_csv,
    write_thresholds_csv,
)
from .topology import (
    FogNode,
    FogTopology,
    SortedRates,
    TopologySpec,
    response_rate,
    sort_and_map,
)

__all__ = [name for name in dir() if not name.startswith("_")]
