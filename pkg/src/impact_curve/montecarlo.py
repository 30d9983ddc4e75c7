"""Monte Carlo checks of the false-alarm maps and replay of optimal attacks.

Random numbers come from numpy's counter-based Philox generator, so a given
seed reproduces bit-identical results on every platform numpy supports.
"""

import math
from dataclasses import dataclass

import numpy as np

from .chi2 import Chi2Config
from .cusum import CusumConfig

CHUNK_STEPS = 1 << 16
CUSUM_CHAINS = 512
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimResult:
    empirical_tau: float
    ci95_half_width: float
    trials: int
    horizon: int
    seed: int


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def simulate_chi2_false_alarms(m, alpha, trials, seed, max_steps=10**9):
    """Empirical mean time between chi-squared false alarms.

    Draws whitened residuals ``r ~ N(0, I_m)`` until ``trials`` alarms
    (``r'r > alpha``) have occurred and returns ``steps / alarms``, the
    geometric MLE. The CI uses the geometric variance ``(1 - p) / p^2``.
    """
    if alpha < 0 or trials < 1:
        raise ValueError("need alpha >= 0 and trials >= 1")
    rng = _rng(seed)
    alarms = 0
    steps = 0
    while alarms < trials and steps < max_steps:
        r = rng.standard_normal((CHUNK_STEPS, m))
        hit = np.nonzero(np.einsum("ij,ij->i", r, r) > alpha)[0]
        need = trials - alarms
        if hit.size >= need:
            steps += int(hit[need - 1]) + 1
            alarms = trials
        else:
            steps += CHUNK_STEPS
            alarms += hit.size
    if alarms == 0:
        return SimResult(math.inf, math.inf, 0, steps, seed)
    tau_hat = steps / alarms
    p_hat = 1.0 / tau_hat
    half = Z95 * math.sqrt(1.0 - p_hat) / p_hat / math.sqrt(alarms)
    return SimResult(tau_hat, half, alarms, steps, seed)


def simulate_cusum_false_alarms(
    m, alpha, b, sigma_r, trials, seed, sides="both", max_steps=2_000_000
):
    """Empirical mean run length of the per-sensor CUSUM under no attack.

    Each sensor is an independent renewal process: on an alarm its
    statistics are reset to zero. ``sides="both"`` alarms on either
    statistic as the detector does; ``sides="upper"`` tracks only ``S+``,
    which is the one-sided run length the Siegmund formula approximates.
    Inter-alarm times are pooled over sensors and ``CUSUM_CHAINS``
    independent chains; ``max_steps`` caps the steps per chain.
    """
    if sides not in ("both", "upper"):
        raise ValueError("sides must be 'both' or 'upper'")
    if not (alpha > 0 and b > 0 and sigma_r > 0) or trials < 1:
        raise ValueError("need positive alpha, b, sigma_r and trials >= 1")
    rng = _rng(seed)
    width = CUSUM_CHAINS * m
    up = np.zeros(width)
    lo = np.zeros(width)
    last = np.zeros(width, dtype=np.int64)
    total = 0
    count = 0
    sum_sq = 0.0
    t = 0
    # whole blocks only: stopping mid-block would tie the result to the block size
    while count < trials and t < max_steps:
        block = rng.standard_normal((min(1024, max_steps - t), width)) * sigma_r
        for r in block:
            t += 1
            up = np.maximum(0.0, up - b + r)
            if sides == "both":
                lo = np.maximum(0.0, lo - b - r)
                alarm = (up > alpha) | (lo > alpha)
            else:
                alarm = up > alpha
            if alarm.any():
                gaps = t - last[alarm]
                total += int(gaps.sum())
                sum_sq += float(np.dot(gaps, gaps))
                count += gaps.size
                last[alarm] = t
                up[alarm] = 0.0
                lo[alarm] = 0.0
    if count == 0:
        return SimResult(math.inf, math.inf, 0, t, seed)
    mean = total / count
    var = max(sum_sq / count - mean * mean, 0.0)
    half = Z95 * math.sqrt(var / count)
    return SimResult(mean, half, count, t, seed)


def replay_attack(closed_loop, attack_map, attack, detector):
    """Simulate the noise-free attacked loop and run the detector alongside.

    Returns ``(terminal_deviation, stealth_ok, max_statistic)`` where the
    deviation is ``||x_a[N]||_inf`` and ``stealth_ok`` means the statistic
    never exceeded the threshold (up to ``1e-9`` relative).
    """
    F, G = closed_loop
    N, m = attack_map.N, attack_map.m
    a = np.asarray(attack, dtype=float)
    if a.size != N * m:
        raise ValueError(f"attack must have N*m = {N * m} entries, got {a.size}")
    if G.shape[1] != m or F.shape[0] != G.shape[0]:
        raise ValueError("closed loop does not match the attack map")
    a = a.reshape(N, m)
    S = attack_map.sigma_r_sqrt
    n = F.shape[0] // 2
    z = np.zeros(F.shape[0])
    up = np.zeros(m)
    lo = np.zeros(m)
    worst = 0.0
    for k in range(N):
        r = S @ a[k]
        if isinstance(detector, Chi2Config):
            stat = float(a[k] @ a[k])  # r' Sigma_r^-1 r
        elif isinstance(detector, CusumConfig):
            up = np.maximum(0.0, up - detector.b + r)
            lo = np.maximum(0.0, lo - detector.b - r)
            stat = float(max(up.max(), lo.max()))
        else:
            raise TypeError(f"unsupported detector config {type(detector).__name__}")
        worst = max(worst, stat)
        z = F @ z + G @ r
    deviation = float(np.max(np.abs(z[:n])))
    ok = worst <= detector.alpha * (1 + 1e-9) + 1e-12
    return deviation, ok, worst
