"""Randomized two-threshold switching versus a static threshold.

Operating at ``tau_low`` with probability ``p`` and ``tau_high`` otherwise gives
expected impact ``p I(tau_low) + (1 - p) I(tau_high)`` at mean false-alarm time
``p tau_low + (1 - p) tau_high``. Randomizing pays off when the static impact at
that mean time is larger, i.e. when ``gain > 0``.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MixedStrategy:
    tau_low: float
    tau_high: float
    p: float

    def __post_init__(self):
        if not self.tau_low >= 1:
            raise ValueError("tau_low must be >= 1")
        if not self.tau_high > self.tau_low:
            raise ValueError("tau_high must exceed tau_low")
        if not 0 < self.p < 1:
            raise ValueError("p must lie strictly between 0 and 1")

    @property
    def tau_mean(self):
        return self.p * self.tau_low + (1 - self.p) * self.tau_high


@dataclass(frozen=True)
class StrategyComparison:
    impact_low: float
    impact_high: float
    impact_mean: float
    tau_mean: float
    impact_at_tau_mean: float
    gain: float

    @property
    def randomization_helps(self):
        return self.gain > 0


def compare(curve_eval, strategy):
    """Evaluate ``curve_eval`` (a callable ``tau -> impact``) for a mixed strategy."""
    s = strategy
    i_low = float(curve_eval(s.tau_low))
    i_high = float(curve_eval(s.tau_high))
    i_mean = s.p * i_low + (1 - s.p) * i_high
    tau_mean = s.tau_mean
    i_static = float(curve_eval(tau_mean))
    return StrategyComparison(
        impact_low=i_low,
        impact_high=i_high,
        impact_mean=i_mean,
        tau_mean=tau_mean,
        impact_at_tau_mean=i_static,
        gain=i_static - i_mean,
    )


def gain_scan(curve, p):
    """Gain for every ordered pair ``i < j`` of grid points.

    Returns an array with columns ``(tau_low, tau_high, gain)``; the static
    impact at the mean time is read off the curve by linear interpolation.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie strictly between 0 and 1")
    tau, impact = curve.tau, curve.impact
    i, j = np.triu_indices(tau.size, k=1)
    t_mean = p * tau[i] + (1 - p) * tau[j]
    i_mean = p * impact[i] + (1 - p) * impact[j]
    gain = np.interp(t_mean, tau, impact) - i_mean
    return np.column_stack([tau[i], tau[j], gain])


def convex_interval(curve, tol=1e-9):
    """End points ``(tau_a, tau_b)`` of the longest run of locally convex grid points, or ``None``.

    A grid point counts as convex when its second difference exceeds ``tol``.
    """
    d2 = curve.second_differences()
    best, start = None, None
    flags = list(d2 > tol) + [False]
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        elif not f and start is not None:
            if best is None or i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    if best is None:
        return None
    # interior index i corresponds to tau[i + 1]
    return float(curve.tau[best[0] + 1]), float(curve.tau[best[1]])
