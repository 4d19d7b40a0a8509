"""Online allocation of rate-ranked slots against moving cutoff curves.

An arrival with raw characteristic x is classified into the cutoff band it
clears (bands are closed below) and immediately charged the posted price for
that rank; rejection is a value (``None``), not an error.  Whenever n slots
remain, the active cutoffs are the top n curves of the table, so a release
simply widens the family by one curve.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .pricing import price_schedule, qoe
from .thresholds import ThresholdTable
from .topology import SortedRates


class HorizonExpiredError(RuntimeError):
    """Arrival presented after the decision horizon."""


class UnknownAllocationError(KeyError):
    """Release of a request id with no live allocation."""


class Slot(NamedTuple):
    """One VMI with its global rate-sorted position (0-based, best first)."""

    position: int
    rate: float
    node: str
    vmi: int


@dataclass(frozen=True)
class AllocationRecord:
    request_id: int
    t_arrival: float
    t_decision: float
    x: float
    rank: int            # 1-based rank among the slots available at decision
    node: str
    vmi: int
    rate: float
    price: float
    qoe: float


@dataclass
class AllocatorState:
    """Mutable decision state: remaining slots, live allocations, ledger."""

    table: ThresholdTable
    available: list[Slot]
    clock: float = 0.0
    ledger: list[AllocationRecord] = field(default_factory=list)
    live: dict[int, Slot] = field(default_factory=dict)

    @property
    def n_available(self) -> int:
        return len(self.available)


def initial_state(table: ThresholdTable, sorted_rates: SortedRates) -> AllocatorState:
    """Fresh state with every slot free, best rate first."""
    if sorted_rates.rates.size != table.n_initial:
        raise ValueError(
            f"{sorted_rates.rates.size} slots but table holds "
            f"{table.n_initial} curves"
        )
    slots = [
        Slot(position=k, rate=float(r), node=ident[0], vmi=ident[1])
        for k, (r, ident) in enumerate(zip(sorted_rates.rates, sorted_rates.identities))
    ]
    return AllocatorState(table=table, available=slots)


def _band(x: float, family: np.ndarray):
    if x < family[-1]:
        return None
    return int(np.count_nonzero(family > x)) + 1


def classify(x: float, t: float, n_available: int, table: ThresholdTable):
    """Rank of the cutoff band containing x, or None if x clears none.

    With the top ``n_available`` curves active, rank j means
    y_j(t) <= x < y_{j-1}(t) (bands closed below, y_0 = +inf).
    """
    return _band(x, table.family_at(n_available, t))


def process_arrival(state: AllocatorState, request_id: int, t: float, x: float):
    """Decide one arrival; returns the record on accept, None on reject.

    The charge is fixed at decision time and never revisited.
    """
    if t > state.table.horizon * (1.0 + 1e-12):
        raise HorizonExpiredError(f"arrival at t={t} beyond horizon")
    if t < state.clock:
        raise ValueError(f"arrival at t={t} precedes clock {state.clock}")
    if request_id in state.live:
        raise ValueError(f"request id {request_id} already holds a slot")
    state.clock = t
    n = state.n_available
    if n == 0:
        return None
    family = state.table.family_at(n, t)
    rank = _band(x, family)
    if rank is None:
        return None
    rates = np.array([s.rate for s in state.available], dtype=float)
    prices = price_schedule(rates, family, state.table.eta)
    slot = state.available.pop(rank - 1)
    record = AllocationRecord(
        request_id=request_id,
        t_arrival=t,
        t_decision=t,
        x=x,
        rank=rank,
        node=slot.node,
        vmi=slot.vmi,
        rate=slot.rate,
        price=float(prices[rank - 1]),
        qoe=qoe(x, slot.rate, state.table.eta),
    )
    state.ledger.append(record)
    state.live[request_id] = slot
    return record


def release(state: AllocatorState, request_id: int, t: float) -> None:
    """Return the slot held by ``request_id``; the cutoff family widens."""
    if t < state.clock:
        raise ValueError(f"release at t={t} precedes clock {state.clock}")
    try:
        slot = state.live.pop(request_id)
    except KeyError:
        raise UnknownAllocationError(
            f"request id {request_id} holds no slot"
        ) from None
    state.clock = t
    bisect.insort(state.available, slot, key=lambda s: s.position)


def write_ledger_csv(events, path) -> None:
    """Write decision rows: request_id,t_arrival,x,decision,rank,node,vmi,price,qoe.

    ``events`` is an iterable of (request_id, t_arrival, x, record_or_none);
    rejected arrivals leave the trailing columns empty.
    """
    header = "request_id,t_arrival,x,decision,rank,node,vmi,price,qoe"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for request_id, t_arrival, x, record in events:
            if record is None:
                fh.write(f"{request_id},{t_arrival:.12g},{x:.12g},reject,,,,,\n")
            else:
                fh.write(
                    f"{request_id},{t_arrival:.12g},{x:.12g},accept,"
                    f"{record.rank},{record.node},{record.vmi},"
                    f"{record.price:.12g},{record.qoe:.12g}\n"
                )
