"""Cutoff curves for sequential assignment under Poisson arrivals.

The i-th curve is the raw-unit acceptance cutoff when i slots remain.  On the
transformed scale the curves satisfy the coupled fixed-point system

    zhat_i(t) = hazard_inverse(zhat_i(t)) + R_i(t) - R_{i-1}(t),
    R_i(t)    = lam * integral_t^T ssp(zhat_i(s)) ds,       R_0 == 0,

with ssp the squared-survival-over-pdf ratio.  The concavity exponent enters
only through the final powering ``y_i = zhat_i ** eta``, so the system is
solved once on the transformed scale.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .arrivals import ArrivalModel

log = logging.getLogger(__name__)

# Curves are accepted as ordered when no adjacent pair inverts beyond float
# noise; exact ties occur where neighbouring curves saturate at the reserve.
_ORDER_RTOL = 1e-8
_ORDER_ATOL = 1e-10


class NonConvergenceError(RuntimeError):
    """Fixed-point iteration failed to reach the residual tolerance."""


class OrderingError(RuntimeError):
    """Converged curves violate the rank ordering."""


def _interp_weights(grid: np.ndarray, t: float) -> tuple[int, float]:
    if t < grid[0] - 1e-12 or t > grid[-1] + 1e-12:
        raise ValueError(f"time {t} outside grid [{grid[0]}, {grid[-1]}]")
    j = int(np.searchsorted(grid, t, side="right")) - 1
    j = min(max(j, 0), len(grid) - 2)
    w = (t - grid[j]) / (grid[j + 1] - grid[j])
    return j, min(max(w, 0.0), 1.0)


@dataclass(frozen=True)
class ThresholdTable:
    """Raw-unit cutoff curves y_1 >= ... >= y_n on a uniform time grid."""

    grid: np.ndarray        # shape (M + 1,)
    curves: np.ndarray      # shape (n_initial, M + 1)
    eta: float
    horizon: float
    n_initial: int

    def threshold_at(self, rank: int, t: float) -> float:
        """Linear interpolation of curve ``rank`` (1-based) at time t."""
        if not 1 <= rank <= self.n_initial:
            raise ValueError(f"rank {rank} outside 1..{self.n_initial}")
        j, w = _interp_weights(self.grid, t)
        row = self.curves[rank - 1]
        return float((1.0 - w) * row[j] + w * row[j + 1])

    def family_at(self, n_active: int, t: float) -> np.ndarray:
        """Cutoffs y_1..y_{n_active} at time t (descending).

        Collapsed curves can invert by a few ulps under interpolation; a
        running minimum restores the exact ordering the callers rely on.
        """
        if not 1 <= n_active <= self.n_initial:
            raise ValueError(f"count {n_active} outside 1..{self.n_initial}")
        j, w = _interp_weights(self.grid, t)
        block = self.curves[:n_active]
        return np.minimum.accumulate((1.0 - w) * block[:, j] + w * block[:, j + 1])


@dataclass(frozen=True)
class RevenueCurve:
    """R_i(t): expected transformed-scale revenue of running the top-i
    family with unit rates from t to the horizon."""

    grid: np.ndarray        # shape (M + 1,)
    values: np.ndarray      # shape (n_initial, M + 1)

    @property
    def n_initial(self) -> int:
        return self.values.shape[0]

    def value_at(self, rank: int, t: float) -> float:
        if not 1 <= rank <= self.n_initial:
            raise ValueError(f"rank {rank} outside 1..{self.n_initial}")
        j, w = _interp_weights(self.grid, t)
        row = self.values[rank - 1]
        return float((1.0 - w) * row[j] + w * row[j + 1])

    def family_at(self, n_active: int, t: float) -> np.ndarray:
        if not 1 <= n_active <= self.n_initial:
            raise ValueError(f"count {n_active} outside 1..{self.n_initial}")
        j, w = _interp_weights(self.grid, t)
        block = self.values[:n_active]
        return (1.0 - w) * block[:, j] + w * block[:, j + 1]


def _tail_integral(lam: float, grid: np.ndarray, g: np.ndarray) -> np.ndarray:
    """lam * integral_t^T g(s) ds at every grid node, composite trapezoid."""
    c = cumulative_trapezoid(g, grid, initial=0.0)
    return lam * (c[-1] - c)


def _raw_residual(z: np.ndarray, rhs: np.ndarray, eta: float) -> float:
    """Max relative gap between y = z**eta and its fixed-point image."""
    if eta == 1.0:
        return float(np.max(np.abs(rhs - z) / z))
    with np.errstate(invalid="ignore"):
        y = z**eta
        image = np.where(rhs > 0.0, rhs, np.nan) ** eta
        resid = np.max(np.abs(image - y) / y)
    return float(resid) if np.isfinite(resid) else math.inf


def _fixed_point_image(
    model: ArrivalModel, grid: np.ndarray, prev_r: np.ndarray, z: np.ndarray
) -> np.ndarray:
    return (
        np.asarray(model.hazard_inverse(z), dtype=float)
        + _tail_integral(model.lam, grid, model.squared_survival_over_pdf(z))
        - prev_r
    )


def _solve_curve_picard(
    model: ArrivalModel,
    grid: np.ndarray,
    prev_r: np.ndarray,
    z_init: np.ndarray,
    z_lo: float,
    z_hi: float,
    max_iterations: int,
    step_tol: float,
    residual_tol: float,
) -> np.ndarray:
    """Damped global fixed-point iteration for one curve (transformed scale).

    Sign-alternating updates trigger 0.5 damping; if alternation persists the
    weight is halved again (down to 1/16), which removes slow period-2 tails.
    """
    z = z_init.copy()
    weight = 1.0
    last_drop = -10
    last_delta = None
    rel_change = math.inf
    for k in range(max_iterations):
        rhs = _fixed_point_image(model, grid, prev_r, z)
        delta = rhs - z
        if (
            last_delta is not None
            and float(np.dot(delta, last_delta)) < 0.0
            and k - last_drop >= 10
        ):
            weight = max(0.5 * weight, 0.0625)
            last_drop = k
        new = np.clip(z + weight * delta, z_lo, z_hi)
        rel_change = float(np.max(np.abs(new - z) / np.maximum(np.abs(z), 1e-300)))
        last_delta = delta
        z = new
        if rel_change <= step_tol:
            resid = _raw_residual(z, _fixed_point_image(model, grid, prev_r, z), model.eta)
            if resid <= residual_tol:
                return z
    raise NonConvergenceError(
        f"no convergence in {max_iterations} iterations "
        f"(last relative change {rel_change:.3e})"
    )


def _solve_curve_backward(
    model: ArrivalModel,
    grid: np.ndarray,
    prev_r: np.ndarray,
    z_lo: float,
    z_hi: float,
) -> np.ndarray:
    """Backward node-by-node solve of the same discretized equation.

    Unconditionally stable fallback: at each node the scalar fixed point is
    found by a damped iteration while the tail integral over later nodes is
    already known.
    """
    m_last = len(grid) - 1
    dt = grid[1] - grid[0]
    lam = model.lam

    def ssp(v: float) -> float:
        return float(model.squared_survival_over_pdf(v))

    def hazinv(v: float) -> float:
        return float(model.hazard_inverse(v))

    z = np.empty_like(grid)

    # Terminal node: zero-length integral.
    v = z_lo
    for _ in range(200):
        nxt = min(max(0.5 * (v + hazinv(v) - prev_r[m_last]), z_lo), z_hi)
        if abs(nxt - v) <= 1e-13 * max(1.0, abs(v)):
            v = nxt
            break
        v = nxt
    z[m_last] = v

    tail = 0.0  # lam * integral over nodes already solved
    g_next = ssp(z[m_last])
    for m in range(m_last - 1, -1, -1):
        const = lam * (tail + 0.5 * dt * g_next) - prev_r[m]
        v = z[m + 1]
        for _ in range(200):
            rhs = hazinv(v) + lam * 0.5 * dt * ssp(v) + const
            nxt = min(max(0.5 * (v + rhs), z_lo), z_hi)
            if abs(nxt - v) <= 1e-13 * max(1.0, abs(v)):
                v = nxt
                break
            v = nxt
        z[m] = v
        g_here = ssp(v)
        tail += 0.5 * dt * (g_here + g_next)
        g_next = g_here
    return z


def solve_thresholds(
    model: ArrivalModel,
    n_vmis: int,
    horizon: float,
    grid_points: int = 2000,
    *,
    max_iterations: int = 500,
    step_tol: float = 1e-9,
    residual_tol: float = 1e-6,
) -> tuple[ThresholdTable, RevenueCurve]:
    """Solve the coupled cutoff system for ``n_vmis`` slots over [0, horizon].

    Returns the raw-unit cutoff table and the per-rank revenue curves.  The
    rate vector plays no role here: curves depend only on the arrival model,
    the slot count and the horizon.
    """
    if n_vmis < 1:
        raise ValueError("need at least one slot")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if grid_points < 8:
        raise ValueError("grid too coarse")

    grid = np.linspace(0.0, horizon, grid_points + 1)
    z_lo = model.reserve()
    # Any admissible curve is bounded by the reserve's hazard quantities;
    # cap at the support top so ratios stay defined.
    z_hi = float(
        model.hazard_inverse(z_lo)
        + model.lam * horizon * model.squared_survival_over_pdf(z_lo)
    )
    hi_support = model.law.support[1]
    if math.isfinite(hi_support):
        z_hi = min(z_hi, hi_support)
    z_hi = max(z_hi, z_lo * (1.0 + 1e-9))

    hats = np.empty((n_vmis, grid.size))
    revenues = np.empty((n_vmis, grid.size))
    prev_r = np.zeros_like(grid)
    z_init = np.full_like(grid, z_lo)
    for i in range(n_vmis):
        try:
            z = _solve_curve_picard(
                model, grid, prev_r, z_init, z_lo, z_hi,
                max_iterations, step_tol, residual_tol,
            )
        except NonConvergenceError:
            log.warning(
                "global iteration stalled for curve %d; using backward solve", i + 1
            )
            z = _solve_curve_backward(model, grid, prev_r, z_lo, z_hi)
            resid = _raw_residual(
                z, _fixed_point_image(model, grid, prev_r, z), model.eta
            )
            if resid > residual_tol:
                raise NonConvergenceError(
                    f"curve {i + 1}: backward solve residual {resid:.3e} "
                    f"exceeds {residual_tol:.1e}"
                )
        hats[i] = z
        r_i = _tail_integral(
            model.lam, grid, np.asarray(model.squared_survival_over_pdf(z), float)
        )
        revenues[i] = r_i
        prev_r = r_i
        z_init = z  # warm start; the next curve is a small perturbation

    curves = hats**model.eta
    slack = _ORDER_RTOL * np.abs(curves[:-1]) + _ORDER_ATOL if n_vmis > 1 else None
    if n_vmis > 1 and np.any(curves[1:] > curves[:-1] + slack):
        i_bad, m_bad = np.argwhere(curves[1:] > curves[:-1] + slack)[0]
        raise OrderingError(
            f"curve {i_bad + 2} exceeds curve {i_bad + 1} at t={grid[m_bad]:.6g}"
        )

    table = ThresholdTable(
        grid=grid, curves=curves, eta=model.eta,
        horizon=horizon, n_initial=n_vmis,
    )
    return table, RevenueCurve(grid=grid, values=revenues)


# -- expected revenue -------------------------------------------------------


def _check_rates(rates: np.ndarray) -> np.ndarray:
    rates = np.asarray(rates, dtype=float)
    if rates.ndim != 1 or rates.size == 0:
        raise ValueError("rates must be a nonempty 1-d sequence")
    if np.any(rates <= 0.0):
        raise ValueError("rates must be positive")
    if np.any(np.diff(rates) > 0.0):
        raise ValueError("rates must be sorted descending")
    return rates


def expected_revenue(
    table: ThresholdTable,
    revenue: RevenueCurve,
    rates,
    t: float,
) -> float:
    """Expected payment collected from t onward with the listed slots free.

    ``rates`` must be descending.  Uses the increment identity
    sum_i r_i^(1/eta) * (R_i(t) - R_{i-1}(t)).
    """
    rates = _check_rates(rates)
    n = rates.size
    if n > revenue.n_initial:
        raise ValueError(f"{n} rates but only {revenue.n_initial} revenue curves")
    r_vals = revenue.family_at(n, t)
    increments = np.diff(r_vals, prepend=0.0)
    return float(np.dot(rates ** (1.0 / table.eta), increments))


def expected_revenue_from_curves(
    model: ArrivalModel,
    table: ThresholdTable,
    rates,
    t: float,
) -> float:
    """Same quantity from the cutoffs alone:
    sum_i r_i^(1/eta) * (zhat_i(t) - hazard_inverse(zhat_i(t)))."""
    rates = _check_rates(rates)
    n = rates.size
    if n > table.n_initial:
        raise ValueError(f"{n} rates but only {table.n_initial} curves")
    zhat = table.family_at(n, t) ** (1.0 / table.eta)
    margin = zhat - np.asarray(model.hazard_inverse(zhat), dtype=float)
    return float(np.dot(rates ** (1.0 / table.eta), margin))


# -- closed-form validation oracles ----------------------------------------


def closed_form_cutoff_exponential(
    rank: int, t, lam: float, alpha: float, horizon: float, eta: float = 1.0
):
    """Known closed forms for the top three cutoffs under the exponential law."""
    u = np.asarray(horizon, dtype=float) - np.asarray(t, dtype=float)
    if np.any(u < 0):
        raise ValueError("t beyond horizon")
    e = math.e
    w = lam * u
    if rank == 1:
        inner = w / e
    elif rank == 2:
        inner = w**2 / (2.0 * e * (w + e))
    elif rank == 3:
        inner = w**3 / (3.0 * e * (w**2 + 2.0 * e * (w + e)))
    else:
        raise ValueError("closed forms available for ranks 1..3 only")
    return ((1.0 + np.log1p(inner)) / alpha) ** eta


def closed_form_cutoff_uniform(
    t, lam: float, beta: float, horizon: float, eta: float = 1.0
):
    """Known closed form for the top cutoff under the uniform law."""
    u = np.asarray(horizon, dtype=float) - np.asarray(t, dtype=float)
    if np.any(u < 0):
        raise ValueError("t beyond horizon")
    return (beta * (1.0 - 2.0 / (lam * u + 4.0))) ** eta


# -- CSV round trip ---------------------------------------------------------


def write_thresholds_csv(table: ThresholdTable, path) -> None:
    """Columns t, y_1..y_n at 12 significant digits."""
    _write_grid_csv(path, "y", table.grid, table.curves)


def write_revenue_csv(revenue: RevenueCurve, path) -> None:
    """Columns t, R_1..R_n at 12 significant digits."""
    _write_grid_csv(path, "R", revenue.grid, revenue.values)


def _write_grid_csv(path, prefix: str, grid: np.ndarray, rows: np.ndarray) -> None:
    n = rows.shape[0]
    header = "t," + ",".join(f"{prefix}_{i}" for i in range(1, n + 1))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for m in range(grid.size):
            cells = [f"{grid[m]:.12g}"] + [f"{rows[i, m]:.12g}" for i in range(n)]
            fh.write(",".join(cells) + "\n")


def read_thresholds_csv(path, eta: float = 1.0) -> ThresholdTable:
    """Rebuild a table from :func:`write_thresholds_csv` output."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    grid = data[:, 0]
    curves = data[:, 1:].T.copy()
    if curves.shape[0] == 0:
        raise ValueError("no cutoff columns found")
    return ThresholdTable(
        grid=grid,
        curves=curves,
        eta=eta,
        horizon=float(grid[-1]),
        n_initial=curves.shape[0],
    )
