"""Service quality and incentive-compatible posted prices."""
from __future__ import annotations

import numpy as np


def qoe(x: float, rate: float, eta: float):
    """Quality of experience (x * rate) ** (1 / eta) for eta >= 1."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("characteristic must be nonnegative")
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    if eta < 1:
        raise ValueError(f"eta must be >= 1, got {eta}")
    out = (x * rate) ** (1.0 / eta)
    return float(out) if out.ndim == 0 else out


def price_schedule(rates, thresholds, eta: float) -> np.ndarray:
    """Posted price for each rank given the remaining slots' rate order.

    ``rates`` and ``thresholds`` are both descending, rank 1 first;
    thresholds are raw cutoffs and are moved to the transformed scale here.
    With s_i = r_i^(1/eta) and s_{n+1} = 0,

        P_j = sum_{i >= j} (s_i - s_{i+1}) * thresholds_i^(1/eta),

    so prices satisfy P_j = P_{j+1} + (s_j - s_{j+1}) * thresholds_j^(1/eta).
    """
    r = np.asarray(rates, dtype=float)
    y = np.asarray(thresholds, dtype=float)
    if r.ndim != 1 or y.ndim != 1 or r.size == 0:
        raise ValueError("rates and thresholds must be nonempty 1-d sequences")
    if r.size != y.size:
        raise ValueError(f"{r.size} rates but {y.size} thresholds")
    if np.any(r <= 0) or np.any(y <= 0):
        raise ValueError("rates and thresholds must be positive")
    if np.any(np.diff(r) > 0):
        raise ValueError("rates must be sorted descending")
    if np.any(np.diff(y) > 0):
        raise ValueError("thresholds must be sorted descending")
    if eta < 1:
        raise ValueError(f"eta must be >= 1, got {eta}")
    s = r ** (1.0 / eta)
    increments = s - np.append(s[1:], 0.0)
    terms = increments * y ** (1.0 / eta)
    return np.cumsum(terms[::-1])[::-1]
