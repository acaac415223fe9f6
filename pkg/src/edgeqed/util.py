"""Shared numerical helpers and error types."""

import numpy as np


class ConvergenceError(RuntimeError):
    """A quadrature or propagator failed to reach its tolerance."""


class IntegratorError(RuntimeError):
    """An ODE integration produced an unphysical result (e.g. growing norm)."""


def fit_power_law(x, y, drop_below=None):
    """Least-squares slope of log|y| versus log(x).

    Points with |y| < drop_below are excluded before fitting; the profiles
    handled here oscillate through zeros, and log of a near-zero sample would
    dominate the fit for no physical reason.

    Returns (slope, intercept, n_used).
    """
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    keep = y > 0.0
    if drop_below is not None:
        keep &= y >= drop_below
    if keep.sum() < 3:
        raise ValueError("fewer than 3 points left after zero filtering")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept), int(keep.sum())


def parabolic_peak(times, values, index):
    """Refine a sampled maximum by the vertex of the parabola through the
    three samples around `index`.  Falls back to the raw sample when the
    maximum sits on the window boundary (flagged by the caller)."""
    t0, t1, t2 = times[index - 1:index + 2]
    y0, y1, y2 = values[index - 1:index + 2]
    denom = (y0 - 2.0 * y1 + y2)
    if denom >= 0.0 or abs(denom) < 1e-300:
        return float(times[index]), float(values[index])
    # uniform or non-uniform grid: fit p(t) = a t^2 + b t + c exactly
    coeffs = np.polyfit([t0, t1, t2], [y0, y1, y2], 2)
    a, b, c = coeffs
    t_star = -b / (2.0 * a)
    if not (t0 <= t_star <= t2):
        return float(times[index]), float(values[index])
    p_star = np.polyval(coeffs, t_star)
    return float(t_star), float(p_star)
