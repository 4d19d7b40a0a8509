"""Tests for fog topology realization and rate-sorted slot ordering."""
from __future__ import annotations

import numpy as np
import pytest

from fogalloc import (
    FogNode,
    FogTopology,
    TopologySpec,
    response_rate,
    sort_and_map,
    substream,
)


def test_response_rate_reciprocal_of_total_delay():
    assert response_rate(2.0, 0.5, 0.5) == pytest.approx(1.0 / 3.0, rel=1e-14)
    assert response_rate(0.3, 0.3, 0.4) == pytest.approx(1.0, rel=1e-14)


def test_response_rate_rejects_nonpositive_components():
    with pytest.raises(ValueError):
        response_rate(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        response_rate(1.0, -0.1, 1.0)
    with pytest.raises(ValueError):
        response_rate(1.0, 1.0, 0.0)


def test_fog_node_validation():
    with pytest.raises(ValueError):
        FogNode(node_id="a", latency_ms=0.0, vmi_count=2)
    with pytest.raises(ValueError):
        FogNode(node_id="a", latency_ms=1.0, vmi_count=0)


def test_topology_validation():
    node = FogNode(node_id="a", latency_ms=1.0, vmi_count=2)
    with pytest.raises(ValueError):
        FogTopology(nodes=(node,), other_delay_ms=0.5, processing_delays_ms=((0.5,),))
    with pytest.raises(ValueError):
        FogTopology(
            nodes=(node, node),
            other_delay_ms=0.5,
            processing_delays_ms=((0.5, 0.5), (0.5, 0.5)),
        )
    with pytest.raises(ValueError):
        FogTopology(
            nodes=(node,), other_delay_ms=0.5, processing_delays_ms=((0.5, 0.0),)
        )


def test_fixed_mode_realize_uses_constant_delay():
    spec = TopologySpec(
        nodes=(
            FogNode(node_id="a", latency_ms=1.0, vmi_count=2),
            FogNode(node_id="b", latency_ms=2.0, vmi_count=1),
        ),
        other_delay_ms=0.4,
        delay_mode="fixed",
        fixed_delay_ms=0.6,
    )
    topo = spec.realize()
    assert topo.processing_delays_ms == ((0.6, 0.6), (0.6,))
    assert topo.total_vmis == 3


def test_sampled_mode_realize_is_seeded_and_in_range():
    spec = TopologySpec(
        nodes=(FogNode(node_id="a", latency_ms=1.0, vmi_count=50),),
        other_delay_ms=0.4,
        delay_mode="sampled",
        delay_range_ms=(0.2, 1.0),
    )
    one = spec.realize(substream(5, 0, 1))
    two = spec.realize(substream(5, 0, 1))
    other = spec.realize(substream(5, 1, 1))
    assert one == two
    assert one != other
    flat = np.array(one.processing_delays_ms[0])
    assert np.all((flat >= 0.2) & (flat <= 1.0))
    with pytest.raises(ValueError):
        spec.realize()


def test_sort_and_map_orders_by_rate_then_identity():
    # Delays chosen so node b's first VMI beats everything, then a tie
    # between a/1 and b/2 resolved by node id, then a/2 last.
    topo = FogTopology(
        nodes=(
            FogNode(node_id="a", latency_ms=1.0, vmi_count=2),
            FogNode(node_id="b", latency_ms=0.5, vmi_count=2),
        ),
        other_delay_ms=0.5,
        processing_delays_ms=((0.5, 1.5), (0.2, 1.0)),
    )
    sorted_rates = sort_and_map(topo)
    assert sorted_rates.identities == (("b", 1), ("a", 1), ("b", 2), ("a", 2))
    expect = np.array([1.0 / 1.2, 1.0 / 2.0, 1.0 / 2.0, 1.0 / 3.0])
    assert np.allclose(sorted_rates.rates, expect, rtol=1e-14)
    assert np.all(np.diff(sorted_rates.rates) <= 0)


def test_unit_rate_topology():
    # One VMI whose three delay components sum to 1 ms, so its rate is 1.
    topo = FogTopology(
        nodes=(FogNode(node_id="edge", latency_ms=0.5, vmi_count=1),),
        other_delay_ms=0.25,
        processing_delays_ms=((0.25,),),
    )
    sorted_rates = sort_and_map(topo)
    assert sorted_rates.rates.shape == (1,)
    assert sorted_rates.rates[0] == pytest.approx(1.0, rel=1e-14)
