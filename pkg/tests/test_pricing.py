"""Tests for quality of experience and the posted price schedule."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fogalloc import price_schedule, qoe


def test_qoe_closed_forms():
    assert qoe(2.0, 3.0, 1.0) == pytest.approx(6.0, rel=1e-14)
    assert qoe(9.0, 4.0, 2.0) == pytest.approx(6.0, rel=1e-14)
    assert qoe(0.0, 5.0, 3.0) == 0.0


def test_qoe_validation():
    with pytest.raises(ValueError):
        qoe(-1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        qoe(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        qoe(1.0, 1.0, 0.5)


def test_price_schedule_hand_example():
    prices = price_schedule([4.0, 2.0, 1.0], [3.0, 2.5, 1.0], 1.0)
    # P_3 = 1 * 1, P_2 = P_3 + (2 - 1) * 2.5, P_1 = P_2 + (4 - 2) * 3.
    assert np.allclose(prices, [9.5, 3.5, 1.0], rtol=1e-14)


def test_price_schedule_hand_example_eta_two():
    prices = price_schedule([4.0, 1.0], [9.0, 4.0], 2.0)
    assert np.allclose(prices, [5.0, 2.0], rtol=1e-14)


def test_price_schedule_validation():
    with pytest.raises(ValueError):
        price_schedule([1.0, 2.0], [3.0, 2.0], 1.0)
    with pytest.raises(ValueError):
        price_schedule([2.0, 1.0], [2.0, 3.0], 1.0)
    with pytest.raises(ValueError):
        price_schedule([2.0, 1.0], [3.0], 1.0)
    with pytest.raises(ValueError):
        price_schedule([2.0, -1.0], [3.0, 2.0], 1.0)
    with pytest.raises(ValueError):
        price_schedule([], [], 1.0)
    with pytest.raises(ValueError):
        price_schedule([1.0], [1.0], 0.9)


def _descending(draw_vals: list[float]) -> np.ndarray:
    arr = np.sort(np.asarray(draw_vals, dtype=float))[::-1]
    return arr


@settings(max_examples=100, deadline=None)
@given(
    rates=st.lists(
        st.floats(min_value=0.05, max_value=50.0), min_size=1, max_size=8
    ),
    thresholds=st.lists(
        st.floats(min_value=0.05, max_value=50.0), min_size=1, max_size=8
    ),
    eta=st.floats(min_value=1.0, max_value=4.0),
)
def test_price_schedule_telescopes(rates, thresholds, eta):
    n = min(len(rates), len(thresholds))
    r = _descending(rates[:n])
    y = _descending(thresholds[:n])
    prices = price_schedule(r, y, eta)
    s = r ** (1.0 / eta)
    yhat = y ** (1.0 / eta)
    scale = max(1.0, float(prices[0]))
    # Adjacent prices differ by exactly the marginal rate step at the cutoff.
    for j in range(n - 1):
        lhs = prices[j] - prices[j + 1]
        rhs = (s[j] - s[j + 1]) * yhat[j]
        assert abs(lhs - rhs) <= 1e-12 * scale
    assert abs(prices[-1] - s[-1] * yhat[-1]) <= 1e-12 * scale
    # Buying rank j at characteristic y_j leaves nonnegative utility.
    for j in range(n):
        assert prices[j] <= s[j] * yhat[j] + 1e-12 * scale
    assert np.all(np.diff(prices) <= 1e-12 * scale)


@settings(max_examples=100, deadline=None)
@given(
    vals=st.lists(
        st.floats(min_value=0.1, max_value=20.0), min_size=2, max_size=6
    ),
    eta=st.floats(min_value=1.0, max_value=3.0),
    pick=st.integers(min_value=0, max_value=5),
    frac=st.floats(min_value=0.0, max_value=1.0),
)
def test_assigned_band_maximizes_utility(vals, eta, pick, frac):
    y = np.sort(np.unique(np.asarray(vals, dtype=float)))[::-1]
    n = y.size
    if n < 2:
        return
    rates = np.linspace(2.0 * n, 1.0, n)
    prices = price_schedule(rates, y, eta)
    k = pick % n
    upper = y[k - 1] if k > 0 else 2.0 * y[0]
    x = y[k] + frac * (upper - y[k])
    utilities = np.array(
        [qoe(x, float(rates[j]), eta) - prices[j] for j in range(n)]
    )
    # Any band the arrival actually clears must not beat its own band k.
    best = float(np.max(utilities[k:]))
    assert utilities[k] >= best - 1e-10 * max(1.0, abs(best))
