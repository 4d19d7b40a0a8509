"""Fog nodes, per-VMI response rates, and the rate-sorted slot order.

A VMI's response rate is the reciprocal of its total delay: node latency plus
VMI processing delay plus a shared fixed overhead, all in milliseconds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def response_rate(latency_ms: float, processing_ms: float, other_ms: float) -> float:
    """1 / (latency + processing + other); all components must be positive."""
    for name, v in (
        ("latency_ms", latency_ms),
        ("processing_ms", processing_ms),
        ("other_ms", other_ms),
    ):
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")
    return 1.0 / (latency_ms + processing_ms + other_ms)


@dataclass(frozen=True)
class FogNode:
    node_id: str
    latency_ms: float
    vmi_count: int

    def __post_init__(self) -> None:
        if self.latency_ms <= 0:
            raise ValueError(f"node {self.node_id}: latency must be positive")
        if self.vmi_count < 1:
            raise ValueError(f"node {self.node_id}: need at least one VMI")


@dataclass(frozen=True)
class FogTopology:
    """Concrete topology: every VMI has a realized processing delay."""

    nodes: tuple[FogNode, ...]
    other_delay_ms: float
    processing_delays_ms: tuple[tuple[float, ...], ...]  # per node, per VMI

    def __post_init__(self) -> None:
        if not self.nodes:
            raise ValueError("topology needs at least one node")
        if self.other_delay_ms <= 0:
            raise ValueError("other_delay_ms must be positive")
        if len(self.processing_delays_ms) != len(self.nodes):
            raise ValueError("one delay tuple per node required")
        seen = set()
        for node, delays in zip(self.nodes, self.processing_delays_ms):
            if node.node_id in seen:
                raise ValueError(f"duplicate node id {node.node_id!r}")
            seen.add(node.node_id)
            if len(delays) != node.vmi_count:
                raise ValueError(
                    f"node {node.node_id}: {len(delays)} delays for "
                    f"{node.vmi_count} VMIs"
                )
            if any(d <= 0 for d in delays):
                raise ValueError(f"node {node.node_id}: delays must be positive")

    @property
    def total_vmis(self) -> int:
        return sum(n.vmi_count for n in self.nodes)


@dataclass(frozen=True)
class TopologySpec:
    """Topology recipe; processing delays are fixed or drawn per replication."""

    nodes: tuple[FogNode, ...]
    other_delay_ms: float
    delay_mode: str = "sampled"              # "fixed" | "sampled"
    fixed_delay_ms: float = 0.6
    delay_range_ms: tuple[float, float] = (0.2, 1.0)

    def __post_init__(self) -> None:
        if self.delay_mode not in ("fixed", "sampled"):
            raise ValueError(f"unknown delay mode {self.delay_mode!r}")
        if self.delay_mode == "fixed" and self.fixed_delay_ms <= 0:
            raise ValueError("fixed_delay_ms must be positive")
        lo, hi = self.delay_range_ms
        if self.delay_mode == "sampled" and not 0 < lo <= hi:
            raise ValueError(f"bad delay range ({lo}, {hi})")

    @property
    def total_vmis(self) -> int:
        return sum(n.vmi_count for n in self.nodes)

    def realize(self, rng: np.random.Generator | None = None) -> FogTopology:
        """Concrete topology; ``rng`` is required in sampled mode."""
        if self.delay_mode == "fixed":
            delays = tuple(
                tuple(self.fixed_delay_ms for _ in range(n.vmi_count))
                for n in self.nodes
            )
        else:
            if rng is None:
                raise ValueError("sampled delay mode needs a generator")
            lo, hi = self.delay_range_ms
            delays = tuple(
                tuple(float(d) for d in rng.uniform(lo, hi, size=n.vmi_count))
                for n in self.nodes
            )
        return FogTopology(
            nodes=self.nodes,
            other_delay_ms=self.other_delay_ms,
            processing_delays_ms=delays,
        )


@dataclass(frozen=True)
class SortedRates:
    """Response rates in descending order with the owning (node, VMI) pairs.

    ``identities[k]`` is the (node_id, 1-based VMI index) occupying sorted
    position k.  Ties are broken by ascending (node_id, VMI index).
    """

    rates: np.ndarray
    identities: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        if len(self.identities) != self.rates.size:
            raise ValueError("one identity per rate required")


def sort_and_map(topology: FogTopology) -> SortedRates:
    """Rank all VMIs by response rate, best first."""
    entries = []
    for node, delays in zip(topology.nodes, topology.processing_delays_ms):
        for j, proc in enumerate(delays, start=1):
            rate = response_rate(node.latency_ms, proc, topology.other_delay_ms)
            entries.append((rate, node.node_id, j))
    entries.sort(key=lambda e: (-e[0], e[1], e[2]))
    rates = np.array([e[0] for e in entries], dtype=float)
    identities = tuple((e[1], e[2]) for e in entries)
    return SortedRates(rates=rates, identities=identities)
