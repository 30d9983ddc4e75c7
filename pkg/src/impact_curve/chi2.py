"""Chi-squared detector: threshold map, closed-form stealthy impact, concavity tests.

The detector alarms when ``r' Sigma_r^-1 r > alpha``. Under no attack the
statistic is chi-squared with ``m`` degrees of freedom, so a mean time
between false alarms ``tau`` requires

    alpha(tau) = 2 P^-1(1 - 1/tau; m/2).

A stealthy attacker keeps ``||a[j]||_2 <= sqrt(alpha)`` at every step, and the
worst terminal deviation is ``sqrt(alpha) * f(H)`` with
``f(H) = max_i sum_j ||h_ij||_2``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .curves import CertificateKind, ConcavityCertificate, Detector, ImpactCurve
from .specfun import rlig_p_inverse, rlig_q

DEFAULT_TAU_GRID = (1.01, 1000.0, 400)


@dataclass(frozen=True)
class Chi2Config:
    m: int
    tau: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if self.tau is None and self.alpha is None:
            raise ValueError("set tau or alpha")
        if self.tau is not None and self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.alpha is None:
            object.__setattr__(self, "alpha", threshold_from_tau(self.tau, self.m))
        elif self.tau is None:
            object.__setattr__(self, "tau", tau_from_threshold(self.alpha, self.m))
        elif abs(self.alpha - threshold_from_tau(self.tau, self.m)) > 1e-8:
            raise ValueError("alpha and tau are inconsistent")


def threshold_from_tau(tau, m):
    """Alarm threshold giving mean time ``tau`` between false alarms."""
    if not tau >= 1:
        raise ValueError(f"tau must be >= 1, got {tau!r}")
    if math.isinf(tau):
        return math.inf
    return 2.0 * rlig_p_inverse(1.0 - 1.0 / tau, m / 2.0)


def tau_from_threshold(alpha, m):
    if not alpha >= 0:
        raise ValueError(f"alpha must be >= 0, got {alpha!r}")
    q = rlig_q(alpha / 2.0, m / 2.0)
    return math.inf if q == 0 else 1.0 / q


def f_of_H(attack_map):
    """Return ``(f(H), i*)``; ties resolve to the lowest row index."""
    row_sums = attack_map.block_norms.sum(axis=1)
    star = int(np.argmax(row_sums))
    return float(row_sums[star]), star


def chi2_impact(attack_map, alpha):
    if not alpha >= 0:
        raise ValueError(f"alpha must be >= 0, got {alpha!r}")
    return math.sqrt(alpha) * f_of_H(attack_map)[0]


def optimal_attack(attack_map, alpha):
    """Stealthy attack attaining ``chi2_impact``: each ``a[j]`` aligned with ``h_{i*j}``.

    Steps whose block is zero cannot move the target state; they get
    ``sqrt(alpha)`` along the first sensor so the statistic equals ``alpha``
    at every step.
    """
    _, star = f_of_H(attack_map)
    a = np.zeros((attack_map.N, attack_map.m))
    for j in range(attack_map.N):
        h = attack_map.block(star, j)
        norm = attack_map.block_norms[star, j]
        if norm > 0:
            a[j] = math.sqrt(alpha) * h / norm
        else:
            a[j, 0] = math.sqrt(alpha)
    return a.ravel()


def theorem1_domain(m):
    """Upper end ``tau_bar`` of the interval ``[1, tau_bar]`` on which impact is concave.

    Holds where ``m/2 - 1 >= P^-1(1 - 1/tau; m/2)``; ``None`` for ``m = 1``
    because the left side is negative.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    x = m / 2.0 - 1.0
    if x < 0:
        return None
    q = rlig_q(x, m / 2.0)
    return 1.0 / q


def theorem2_local_check(tau, m):
    """Local concavity test for even ``m``.

    With ``z = m/2 - 1`` and ``x = alpha/2`` the impact is locally concave at
    ``tau`` iff ``z! < z z!/x + 2 tau x**z exp(-x)``. The margin is
    ``(RHS - z!) / z!``; ``holds`` is ``margin > 0`` (equality counts as a failure).
    """
    if m < 2 or m % 2:
        raise ValueError("Theorem 2 requires even m >= 2")
    if not tau >= 1:
        raise ValueError(f"tau must be >= 1, got {tau!r}")
    z = m // 2 - 1
    x = threshold_from_tau(tau, m) / 2.0
    if x == 0.0:
        if z >= 1:
            return True, math.inf
        # z = 0: RHS = 2 tau, exactly 2 at tau = 1
        margin = 2.0 * tau - 1.0
        return margin > 0, margin
    log_fact = math.lgamma(z + 1)
    tail = 2.0 * tau * math.exp(z * math.log(x) - x - log_fact) if z else 2.0 * tau * math.exp(-x)
    margin = z / x + tail - 1.0
    return margin > 0, margin


def theorem2_certificate(m, tau_grid):
    tau_grid = np.asarray(tau_grid, dtype=float)
    margins = np.array([theorem2_local_check(t, m)[1] for t in tau_grid])
    return ConcavityCertificate(
        kind=CertificateKind.THM2_LOCAL_IFF,
        tau=tau_grid,
        margins=margins,
        holds=margins > 0,
        params={"m": m},
    )


def theorem1_certificate(m, tau_grid):
    """Per-point margin ``(m/2 - 1) - alpha(tau)/2`` of the sufficient condition."""
    tau_grid = np.asarray(tau_grid, dtype=float)
    margins = np.array([m / 2.0 - 1.0 - threshold_from_tau(t, m) / 2.0 for t in tau_grid])
    tau_bar = theorem1_domain(m)
    return ConcavityCertificate(
        kind=CertificateKind.THM1_SUFFICIENT,
        tau=tau_grid,
        margins=margins,
        holds=margins > 0,
        domain=None if tau_bar is None else (1.0, tau_bar),
        params={"m": m},
    )


def chi2_curve(tau_grid, m, attack_map=None, constant_f=None, metric="norm"):
    """Impact versus ``tau`` on an increasing grid.

    ``metric="norm"`` gives ``sqrt(alpha) f``. ``metric="squared"`` gives
    ``alpha f``, the squared-norm impact, whose one-sensor curve has a convex
    stretch near ``tau = 1``. Pass ``constant_f`` to use a fixed ``f`` instead of ``f(H)``.
    """
    if (attack_map is None) == (constant_f is None):
        raise ValueError("pass exactly one of attack_map or constant_f")
    if metric not in ("norm", "squared"):
        raise ValueError(f"unknown metric {metric!r}")
    tau = np.asarray(tau_grid, dtype=float).ravel()
    if tau.size > 1 and np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be strictly increasing")
    if np.any(tau < 1):
        raise ValueError("tau grid values must be >= 1")
    f = float(constant_f) if constant_f is not None else f_of_H(attack_map)[0]
    alpha = np.array([threshold_from_tau(t, m) for t in tau])
    impact = f * (np.sqrt(alpha) if metric == "norm" else alpha)
    meta = {"m": m, "f": f, "metric": metric}
    return ImpactCurve(tau=tau, alpha=alpha, impact=impact, detector=Detector.CHI2, meta=meta)


def default_tau_grid(tau_min=None, tau_max=None, points=None):
    lo, hi, n = DEFAULT_TAU_GRID
    return np.geomspace(tau_min or lo, tau_max or hi, points or n)
