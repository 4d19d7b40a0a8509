"""Baseline allocation strategies sharing the optimal policy's ledger format.

Every runner consumes one arrival stream (times, raw characteristics) plus the
rate-sorted slots and returns a list of :class:`AllocationRecord`, so metrics
are directly comparable across strategies.  Strategies without a posted-price
rule record a price of zero; the periodic auction records the winning bid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocator import AllocationRecord, Slot, initial_state, process_arrival
from .pricing import qoe
from .thresholds import ThresholdTable
from .topology import SortedRates

STRATEGY_KINDS = (
    "optimal",
    "ideal",
    "pessimistic",
    "optimistic",
    "epsilon_greedy",
    "auction",
)


@dataclass(frozen=True)
class StrategyConfig:
    """Which strategy to run and its knobs.

    ``epsilon`` only matters for epsilon_greedy; ``auction_period_hours``
    only for auction (one twenty-fourth of the horizon by default, set at
    config load).
    """

    kind: str
    epsilon: float = 0.5
    auction_period_hours: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.auction_period_hours <= 0:
            raise ValueError("auction period must be positive")


def _slots(sorted_rates: SortedRates) -> list[Slot]:
    return [
        Slot(position=k, rate=float(r), node=ident[0], vmi=ident[1])
        for k, (r, ident) in enumerate(zip(sorted_rates.rates, sorted_rates.identities))
    ]


def _record(req, t_arrival, t_decision, x, rank, slot, price, eta) -> AllocationRecord:
    return AllocationRecord(
        request_id=req,
        t_arrival=t_arrival,
        t_decision=t_decision,
        x=x,
        rank=rank,
        node=slot.node,
        vmi=slot.vmi,
        rate=slot.rate,
        price=price,
        qoe=qoe(x, slot.rate, eta),
    )


def run_optimal(
    times: np.ndarray,
    xs: np.ndarray,
    sorted_rates: SortedRates,
    table: ThresholdTable,
) -> list[AllocationRecord]:
    """Cutoff-curve policy with posted prices; slots stay engaged to the end."""
    state = initial_state(table, sorted_rates)
    for req, (t, x) in enumerate(zip(times, xs)):
        process_arrival(state, req, float(t), float(x))
    return state.ledger


def run_ideal(
    times: np.ndarray,
    xs: np.ndarray,
    sorted_rates: SortedRates,
    eta: float,
) -> list[AllocationRecord]:
    """Offline bound: k-th largest characteristic on the k-th best slot.

    Ties in x are broken by arrival order.
    """
    slots = _slots(sorted_rates)
    order = np.argsort(-xs, kind="stable")[: len(slots)]
    records = []
    for rank, idx in enumerate(order, start=1):
        slot = slots[rank - 1]
        records.append(
            _record(int(idx), float(times[idx]), float(times[idx]),
                    float(xs[idx]), rank, slot, 0.0, eta)
        )
    return records


def run_pessimistic(
    times: np.ndarray,
    xs: np.ndarray,
    sorted_rates: SortedRates,
    eta: float,
    raw_reserve: float,
) -> list[AllocationRecord]:
    """Static bar at the reserve; each qualifier takes the best free slot."""
    return _static_bar(times, xs, sorted_rates, eta, raw_reserve, best_first=True)


def run_optimistic(
    times: np.ndarray,
    xs: np.ndarray,
    sorted_rates: SortedRates,
    eta: float,
    raw_reserve: float,
) -> list[AllocationRecord]:
    """Static bar at the reserve; each qualifier takes the worst free slot."""
    return _static_bar(times, xs, sorted_rates, eta, raw_reserve, best_first=False)


def _static_bar(times, xs, sorted_rates, eta, raw_reserve, best_first):
    slots = _slots(sorted_rates)
    records = []
    for req, (t, x) in enumerate(zip(times, xs)):
        if not slots or x < raw_reserve:
            continue
        rank = 1 if best_first else len(slots)
        slot = slots.pop(0 if best_first else -1)
        records.append(_record(req, float(t), float(t), float(x), rank, slot, 0.0, eta))
    return records


def run_epsilon_greedy(
    times: np.ndarray,
    xs: np.ndarray,
    sorted_rates: SortedRates,
    eta: float,
    epsilon: float,
    rng: np.random.Generator,
) -> list[AllocationRecord]:
    """Each arrival gets a uniformly random free slot with probability epsilon."""
    slots = _slots(sorted_rates)
    records = []
    for req, (t, x) in enumerate(zip(times, xs)):
        if not slots:
            break
        if rng.random() >= epsilon:
            continue
        k = int(rng.integers(len(slots)))
        slot = slots.pop(k)
        records.append(_record(req, float(t), float(t), float(x), k + 1, slot, 0.0, eta))
    return records


def run_periodic_auction(
    times: np.ndarray,
    xs: np.ndarray,
    sorted_rates: SortedRates,
    eta: float,
    period_hours: float,
    horizon: float,
) -> list[AllocationRecord]:
    """First-price auction at the end of each window.

    Bids equal the raw characteristic; the window's highest bidder (earliest
    arrival on ties) pays its bid and takes the best free slot, the rest
    depart.  The final window is truncated at the horizon and still clears.
    """
    if period_hours <= 0:
        raise ValueError("auction period must be positive")
    slots = _slots(sorted_rates)
    records = []
    n = len(times)
    i = 0
    w_end = min(period_hours, horizon)
    while i < n and slots:
        j = i
        while j < n and times[j] < w_end:
            j += 1
        if j > i:
            k = i + int(np.argmax(xs[i:j]))
            slot = slots.pop(0)
            records.append(
                _record(k, float(times[k]), float(w_end), float(xs[k]),
                        1, slot, float(xs[k]), eta)
            )
        i = j
        if w_end >= horizon:
            break
        w_end = min(w_end + period_hours, horizon)
    return records
