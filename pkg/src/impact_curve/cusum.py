"""CUSUM detector: impact LP, Siegmund threshold map and concavity certificates.

Per sensor ``i`` the detector runs

    S+[k+1] = max(0, S+[k] - b + r_i[k]),   S-[k+1] = max(0, S-[k] - b - r_i[k])

and alarms when either statistic exceeds ``alpha``. A stealthy attack keeps
both statistics at or below ``alpha``. Replacing each ``S`` by an upper bound
``Q`` with ``Q[k+1] >= Q[k] - b +/- r[k]`` and ``0 <= Q <= alpha`` turns the
worst-case impact into one LP per plant state and sign. Since ``Q >= S``
by induction, every LP-feasible attack is stealthy against the true detector.

The no-attack run length is approximated by Siegmund's formula

    tau = (sigma^2 / 2) (exp(2G) - 1 - 2G) / b^2,
    G = b alpha / sigma^2 + 1.166 b / sigma,

with ``sigma`` the per-sensor residual standard deviation.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .curves import (
    CertificateKind,
    ConcavityCertificate,
    Detector,
    ImpactCurve,
    second_differences,
)
from .simplex import LinearProgram, LPSolveError, LPStatus, solve_lp

SIEGMUND_CONSTANT = 1.166
G_OVERFLOW = 350.0
THREADS_ENV = "IMPACT_CURVE_THREADS"


@dataclass(frozen=True)
class CusumConfig:
    """Detector settings; with ``delta`` set, the bias tracks the threshold as ``b = delta * alpha``."""

    m: int
    alpha: float
    b: float | None = None
    delta: float | None = None
    sigma_r: float = 1.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.sigma_r > 0:
            raise ValueError("sigma_r must be positive")
        if self.delta is not None:
            if self.delta < 0:
                raise ValueError("delta must be nonnegative")
            b = self.delta * self.alpha
            if self.b is not None and abs(self.b - b) > 1e-12:
                raise ValueError("b must equal delta * alpha")
            object.__setattr__(self, "b", b)
        if self.b is None or not self.b > 0:
            raise ValueError("bias b must be positive")


def _workers():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def map_ordered(fn, items):
    """``list(map(fn, items))``, threaded up to ``IMPACT_CURVE_THREADS`` workers."""
    items = list(items)
    workers = min(_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- impact LP ---------------------------------------------------------------


def build_impact_lp(attack_map, row, alpha, b, sign=1.0):
    """LP whose optimum is the largest stealthy value of ``sign * x_row[N]``.

    Variables are ``[Q+ ; Q- ; a]``, each block of length ``N m`` ordered by
    step then sensor (``Q[k+1]`` for ``k = 0..N-1``). For every step and
    sensor there are six rows, in order::

        -Q+[k+1] <= 0,  Q+[k+1] <= alpha,  Q+[k] - Q+[k+1] + r_i[k] <= b,
        -Q-[k+1] <= 0,  Q-[k+1] <= alpha,  Q-[k] - Q-[k+1] - r_i[k] <= b,

    with ``r[k] = Sigma_r^(1/2) a[k]`` and ``Q[0] = 0``.
    """
    n, N, m = attack_map.n, attack_map.N, attack_map.m
    if not 0 <= row < n:
        raise IndexError(f"row {row} out of range for {n} plant states")
    nm = N * m
    S = attack_map.sigma_r_sqrt
    A = np.zeros((6 * nm, 3 * nm))
    rhs = np.zeros(6 * nm)
    qp, qm, av = 0, nm, 2 * nm
    for k in range(N):
        for i in range(m):
            idx = k * m + i
            base = 6 * idx
            r_coef = S[i]  # r_i[k] = S[i] . a[k]
            a_cols = slice(av + k * m, av + (k + 1) * m)
            # upper statistic
            A[base, qp + idx] = -1.0
            A[base + 1, qp + idx] = 1.0
            rhs[base + 1] = alpha
            A[base + 2, qp + idx] = -1.0
            if k > 0:
                A[base + 2, qp + idx - m] = 1.0
            A[base + 2, a_cols] = r_coef
            rhs[base + 2] = b
            # lower statistic
            A[base + 3, qm + idx] = -1.0
            A[base + 4, qm + idx] = 1.0
            rhs[base + 4] = alpha
            A[base + 5, qm + idx] = -1.0
            if k > 0:
                A[base + 5, qm + idx - m] = 1.0
            A[base + 5, a_cols] = -r_coef
            rhs[base + 5] = b
    c = np.zeros(3 * nm)
    c[av:] = sign * attack_map.H[row]
    return LinearProgram(c=c, A=A, rhs=rhs)


@dataclass(frozen=True)
class CusumAttack:
    value: float
    row: int
    sign: float
    attack: np.ndarray
    cs_residual: float


def worst_case_attack(attack_map, alpha, b):
    """Solve the impact LP for every plant state and sign; keep the best.

    Ties resolve to the lowest row, then the positive sign.
    """
    if not alpha > 0 or not b > 0:
        raise ValueError("alpha and b must be positive")
    nm = attack_map.N * attack_map.m
    jobs = [(row, s) for row in range(attack_map.n) for s in (1.0, -1.0)]

    def solve(job):
        row, s = job
        res = solve_lp(build_impact_lp(attack_map, row, alpha, b, s))
        if res.status is not LPStatus.OPTIMAL:
            raise LPSolveError(f"impact LP for row {row}, sign {s:+.0f}: {res.status.value}")
        return res

    results = map_ordered(solve, jobs)
    best = 0
    for j, res in enumerate(results):
        if res.value > results[best].value + 1e-12:
            best = j
    row, s = jobs[best]
    res = results[best]
    return CusumAttack(
        value=max(res.value, 0.0),
        row=row,
        sign=s,
        attack=res.x[2 * nm:].copy(),
        cs_residual=max(r.cs_residual for r in results),
    )


def cusum_impact(attack_map, alpha, b):
    """Worst-case stealthy ``||x_a[N]||_inf`` against a CUSUM detector."""
    return worst_case_attack(attack_map, alpha, b).value


def cusum_statistics(attack_map, attack, b):
    """Run the true two-sided recursion on ``r = Sigma_r^(1/2) a``; returns ``(S+, S-)``, each ``(N, m)``."""
    N, m = attack_map.N, attack_map.m
    r = np.asarray(attack, dtype=float).reshape(N, m) @ attack_map.sigma_r_sqrt.T
    sp = np.zeros((N, m))
    sm = np.zeros((N, m))
    up = np.zeros(m)
    lo = np.zeros(m)
    for k in range(N):
        up = np.maximum(0.0, up - b + r[k])
        lo = np.maximum(0.0, lo - b - r[k])
        sp[k] = up
        sm[k] = lo
    return sp, sm


# -- Siegmund map ------------------------------------------------------------


def _expm1_minus_x(x):
    """``exp(x) - 1 - x`` without cancellation for small ``x``."""
    if abs(x) < 1e-3:
        return x * x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    return math.expm1(x) - x


def _siegmund_g(alpha, b, sigma_r, constant):
    return b * alpha / sigma_r**2 + constant * b / sigma_r


def siegmund_arl(alpha, b, sigma_r=1.0, constant=SIEGMUND_CONSTANT):
    """Approximate mean run length before a false alarm; ``inf`` once ``G > 350``."""
    if alpha < 0 or not b > 0 or not sigma_r > 0:
        raise ValueError("need alpha >= 0, b > 0, sigma_r > 0")
    G = _siegmund_g(alpha, b, sigma_r, constant)
    if G > G_OVERFLOW:
        return math.inf
    return 0.5 * sigma_r**2 * _expm1_minus_x(2.0 * G) / b**2


def siegmund_floor(b, sigma_r=1.0, constant=SIEGMUND_CONSTANT):
    """Run length in the limit ``alpha -> 0+``; smaller ``tau`` cannot be reached."""
    return siegmund_arl(0.0, b, sigma_r, constant)


def threshold_from_tau_siegmund(tau, b, sigma_r=1.0, constant=SIEGMUND_CONSTANT):
    """Invert ``siegmund_arl`` in ``alpha`` for fixed bias ``b``."""
    if not b > 0 or not sigma_r > 0:
        raise ValueError("need b > 0, sigma_r > 0")
    floor = siegmund_floor(b, sigma_r, constant)
    if not tau > floor:
        raise ValueError(
            f"tau = {tau!r} is at or below the alpha -> 0 floor {floor:.12g} "
            f"(b = {b!r}, sigma_r = {sigma_r!r})"
        )
    # solve exp(2G) - 1 - 2G = 2 tau b^2 / sigma^2 for G >= G0
    target = 2.0 * tau * b**2 / sigma_r**2
    g0 = constant * b / sigma_r
    g_hi = max(2.0 * g0, 1.0)
    while _expm1_minus_x(2.0 * g_hi) < target:
        g_hi *= 2.0
    G = brentq(lambda g: _expm1_minus_x(2.0 * g) - target, g0, g_hi, xtol=1e-15, rtol=1e-15)
    return (G - g0) * sigma_r**2 / b


def delta_floor(constant=SIEGMUND_CONSTANT):
    """``lim_{alpha->0+}`` of the run length when ``b = delta alpha``: ``constant**2``."""
    return constant**2


def tau_delta(alpha, delta, sigma_r=1.0, constant=SIEGMUND_CONSTANT):
    """Siegmund run length with bias ``b = delta * alpha``."""
    if not alpha > 0 or not delta > 0:
        raise ValueError("need alpha > 0 and delta > 0")
    return siegmund_arl(alpha, delta * alpha, sigma_r, constant)


def threshold_from_tau_delta(tau, delta, sigma_r=1.0, constant=SIEGMUND_CONSTANT, checks=64):
    """Solve ``tau_delta(alpha) = tau`` for ``alpha``.

    The map is checked to be strictly increasing at ``checks`` log-spaced
    points of the bracket before root finding.
    """
    if not delta > 0 or not sigma_r > 0:
        raise ValueError("need delta > 0, sigma_r > 0")
    floor = delta_floor(constant)
    if not tau > floor:
        raise ValueError(f"tau = {tau!r} is at or below the alpha -> 0 floor {floor:.12g}")
    scale = sigma_r / math.sqrt(delta) if delta < 1 else sigma_r / delta
    lo = 1e-6 * scale
    while tau_delta(lo, delta, sigma_r, constant) >= tau:
        lo *= 1e-3
        if lo < 1e-300:
            raise ValueError("cannot bracket alpha from below")
    hi = scale
    while tau_delta(hi, delta, sigma_r, constant) <= tau:
        hi *= 2.0
    grid = np.geomspace(lo, hi, checks)
    values = np.array([tau_delta(a, delta, sigma_r, constant) for a in grid])
    if np.any(np.diff(values) <= 0):
        bad = int(np.argmax(np.diff(values) <= 0))
        raise ValueError(
            f"run-length map is not increasing near alpha = {grid[bad]:.6g} "
            f"(delta = {delta!r}); the approximation is outside its validity range"
        )
    return brentq(
        lambda a: tau_delta(a, delta, sigma_r, constant) - tau, lo, hi, xtol=1e-15, rtol=1e-15
    )


def siegmund_alpha_derivatives(alpha, b, sigma_r=1.0, constant=SIEGMUND_CONSTANT):
    """First and second derivative of the fixed-bias threshold with respect to ``tau``.

    Implicit differentiation of the Siegmund formula gives

        d alpha / d tau    = b / (exp(2G) - 1)
        d2 alpha / d tau2  = -2 b^3 exp(2G) / (sigma^2 (exp(2G) - 1)^3)

    evaluated here through ``exp(-2G)`` so large ``G`` underflows to zero
    instead of overflowing.
    """
    if not alpha > 0 or not b > 0 or not sigma_r > 0:
        raise ValueError("alpha, b and sigma_r must be positive")
    G = _siegmund_g(alpha, b, sigma_r, constant)
    e = math.exp(-2.0 * G)
    one_minus = -math.expm1(-2.0 * G)
    d1 = b * e / one_minus
    d2 = -2.0 * b**3 * e * e / (sigma_r**2 * one_minus**3)
    return d1, d2


# -- concavity tests ---------------------------------------------------------


def theorem3_sufficient(delta, alpha, sigma_r=1.0):
    """``(holds, (delta alpha / sigma - 1, delta alpha^2 / sigma^2 - 1))``."""
    if not delta > 0 or not alpha > 0 or not sigma_r > 0:
        raise ValueError("delta, alpha and sigma_r must be positive")
    m1 = delta * alpha / sigma_r - 1.0
    m2 = delta * alpha**2 / sigma_r**2 - 1.0
    return (m1 > 0 and m2 > 0), (m1, m2)


def exact_concavity_inequality(delta, alpha, sigma_r=1.0, constant=SIEGMUND_CONSTANT):
    """Evaluate the closed-form sign test for ``d2 alpha / d tau2 < 0`` with ``b = delta alpha``.

    ``lhs = kappa * (E [6 d a^2/s^2 + 4 c d a/s - 3 - 2 a^2 (2 d a/s^2 + c d/s)^2] + 3 + 2 c d a/s)``
    with ``E = exp(2G)`` and
    ``kappa = E [2 d a^2/s^2 + c d a/s - 1] + 1 + c d a/s``. Returns
    ``(lhs < 0, lhs)``; when ``G > 350`` the sign is taken from the
    ``E``-scaled expression and ``lhs`` is reported as ``+/-inf``.
    """
    if not delta > 0 or not alpha > 0 or not sigma_r > 0:
        raise ValueError("delta, alpha and sigma_r must be positive")
    d, a, s, c = delta, alpha, sigma_r, constant
    G = d * a**2 / s**2 + c * d * a / s
    k_bracket = 2 * d * a**2 / s**2 + c * d * a / s - 1.0
    k_tail = 1.0 + c * d * a / s
    w_bracket = (
        6 * d * a**2 / s**2 + 4 * c * d * a / s - 3.0 - 2 * a**2 * (2 * d * a / s**2 + c * d / s) ** 2
    )
    w_tail = 3.0 + 2 * c * d * a / s
    if G > G_OVERFLOW:
        e_inv = math.exp(-2.0 * G)
        scaled = (k_bracket + k_tail * e_inv) * (w_bracket + w_tail * e_inv)
        lhs = math.copysign(math.inf, scaled) if scaled != 0 else 0.0
        return lhs < 0, lhs
    E = math.exp(2.0 * G)
    kappa = E * k_bracket + k_tail
    lhs = kappa * (E * w_bracket + w_tail)
    return lhs < 0, lhs


def theorem3_certificate(delta, tau_grid, sigma_r=1.0):
    """Sufficient test per ``tau``; margin is ``min`` of the two ratio margins."""
    tau_grid = np.asarray(tau_grid, dtype=float)
    margins = []
    for t in tau_grid:
        alpha = threshold_from_tau_delta(t, delta, sigma_r)
        margins.append(min(theorem3_sufficient(delta, alpha, sigma_r)[1]))
    margins = np.array(margins)
    return ConcavityCertificate(
        kind=CertificateKind.THM3_SUFFICIENT,
        tau=tau_grid,
        margins=margins,
        holds=margins > 0,
        params={"delta": delta, "sigma_r": sigma_r},
    )


def exact_inequality_certificate(delta, tau_grid, sigma_r=1.0, constant=SIEGMUND_CONSTANT):
    """Exact sign test per ``tau``; margin is ``-lhs``."""
    tau_grid = np.asarray(tau_grid, dtype=float)
    margins = []
    for t in tau_grid:
        alpha = threshold_from_tau_delta(t, delta, sigma_r, constant)
        margins.append(-exact_concavity_inequality(delta, alpha, sigma_r, constant)[1])
    margins = np.array(margins)
    return ConcavityCertificate(
        kind=CertificateKind.EXACT_INEQUALITY,
        tau=tau_grid,
        margins=margins,
        holds=margins > 0,
        params={"delta": delta, "sigma_r": sigma_r, "constant": constant},
    )


def _isotropic_sigma(sigma_r, m):
    """Per-sensor standard deviation from a scalar or an ``m x m`` covariance."""
    arr = np.asarray(sigma_r, dtype=float)
    if arr.ndim == 0:
        return float(arr)
    if arr.shape != (m, m):
        raise ValueError(f"Sigma_r must be {m}x{m}")
    var = arr[0, 0]
    if not np.allclose(arr, var * np.eye(m), rtol=0, atol=1e-12 * max(1.0, abs(var))):
        raise ValueError("shared-threshold certificate needs an isotropic Sigma_r = s I")
    return math.sqrt(var)


def proposition1_certificate(m, b, sigma_r, tau_grid):
    """Concavity of the common threshold for ``m`` sensors with ``Sigma_r = s I``.

    ``sigma_r`` is either the per-sensor standard deviation or the full
    ``m x m`` residual covariance. Margin is ``-d2 alpha / d tau2``.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    sigma = _isotropic_sigma(sigma_r, m)
    tau_grid = np.asarray(tau_grid, dtype=float)
    margins = []
    for t in tau_grid:
        alpha = threshold_from_tau_siegmund(t, b, sigma)
        margins.append(-siegmund_alpha_derivatives(alpha, b, sigma)[1])
    margins = np.array(margins)
    return ConcavityCertificate(
        kind=CertificateKind.PROP1_SHARED_THRESHOLD,
        tau=tau_grid,
        margins=margins,
        holds=margins > 0,
        params={"m": m, "b": b, "sigma_r": sigma},
    )


# -- curves and linearity ----------------------------------------------------


@dataclass(frozen=True)
class LinearityProbe:
    slope: float
    intercept: float
    max_fit_residual: float
    second_derivatives: np.ndarray
    alpha: np.ndarray
    impact: np.ndarray


def affine_fit(alpha, impact):
    """Least-squares line through ``(alpha, impact)`` plus interior second differences."""
    alpha = np.asarray(alpha, dtype=float)
    impact = np.asarray(impact, dtype=float)
    if alpha.size < 3:
        raise ValueError("need at least 3 grid points")
    design = np.column_stack([alpha, np.ones_like(alpha)])
    (slope, intercept), *_ = np.linalg.lstsq(design, impact, rcond=None)
    resid = float(np.max(np.abs(design @ np.array([slope, intercept]) - impact)))
    return LinearityProbe(
        slope=float(slope),
        intercept=float(intercept),
        max_fit_residual=resid,
        second_derivatives=second_differences(alpha, impact),
        alpha=alpha,
        impact=impact,
    )


def _bias(alpha, b, delta):
    if (b is None) == (delta is None):
        raise ValueError("pass exactly one of b or delta")
    return b if delta is None else delta * alpha


def linearity_probe(attack_map, alpha_grid, b=None, delta=None):
    """Impact on an increasing threshold grid and its affine-fit diagnostics."""
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    if alpha_grid.size < 3:
        raise ValueError("need at least 3 grid points")
    if np.any(np.diff(alpha_grid) <= 0):
        raise ValueError("alpha grid must be increasing")
    impact = map_ordered(
        lambda a: cusum_impact(attack_map, a, _bias(a, b, delta)), alpha_grid
    )
    return affine_fit(alpha_grid, np.array(impact))


def cusum_curve(attack_map, tau_grid, b=None, delta=None, sigma_r=1.0):
    """Impact versus ``tau`` with thresholds from the Siegmund map."""
    tau = np.asarray(tau_grid, dtype=float).ravel()
    if tau.size > 1 and np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be strictly increasing")
    if delta is None:
        alpha = np.array([threshold_from_tau_siegmund(t, b, sigma_r) for t in tau])
    else:
        alpha = np.array([threshold_from_tau_delta(t, delta, sigma_r) for t in tau])
    impact = map_ordered(lambda a: cusum_impact(attack_map, a, _bias(a, b, delta)), alpha)
    meta = {"b": b, "delta": delta, "sigma_r": sigma_r, "N": attack_map.N, "m": attack_map.m}
    return ImpactCurve(tau=tau, alpha=alpha, impact=np.array(impact), detector=Detector.CUSUM, meta=meta)


def cusum_curve_from_alpha(attack_map, alpha_grid, b=None, delta=None, sigma_r=1.0):
    """Impact on a threshold grid, with ``tau`` read off the Siegmund map."""
    alpha = np.asarray(alpha_grid, dtype=float).ravel()
    if delta is None:
        tau = np.array([siegmund_arl(a, b, sigma_r) for a in alpha])
    else:
        tau = np.array([tau_delta(a, delta, sigma_r) for a in alpha])
    impact = map_ordered(lambda a: cusum_impact(attack_map, a, _bias(a, b, delta)), alpha)
    meta = {"b": b, "delta": delta, "sigma_r": sigma_r, "N": attack_map.N, "m": attack_map.m}
    return ImpactCurve(tau=tau, alpha=alpha, impact=np.array(impact), detector=Detector.CUSUM, meta=meta)
