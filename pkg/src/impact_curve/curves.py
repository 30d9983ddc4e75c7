"""Result records shared by the detector modules: impact curves and certificates."""

import enum
from dataclasses import dataclass, field

import numpy as np


class Detector(str, enum.Enum):
    CHI2 = "chi2"
    CUSUM = "cusum"


class CertificateKind(str, enum.Enum):
    THM1_SUFFICIENT = "Thm1Sufficient"
    THM2_LOCAL_IFF = "Thm2LocalIff"
    THM3_SUFFICIENT = "Thm3Sufficient"
    EXACT_INEQUALITY = "ExactInequality"
    PROP1_SHARED_THRESHOLD = "Prop1SharedThreshold"
    NUMERICAL_ONLY = "NumericalOnly"


@dataclass(frozen=True)
class ImpactCurve:
    """Sampled ``(tau, alpha, impact)`` triples for one detector configuration."""

    tau: np.ndarray
    alpha: np.ndarray
    impact: np.ndarray
    detector: Detector
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        impact = np.asarray(self.impact, dtype=float)
        if not (tau.shape == alpha.shape == impact.shape) or tau.ndim != 1:
            raise ValueError("tau, alpha and impact must be 1-D arrays of equal length")
        if tau.size > 1 and np.any(np.diff(tau) <= 0):
            raise ValueError("tau must be strictly increasing")
        if alpha.size > 1 and np.any(np.diff(alpha) < 0):
            raise ValueError("alpha must be nondecreasing in tau")
        if np.any(impact < 0):
            raise ValueError("impact must be nonnegative")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "impact", impact)

    def __len__(self):
        return self.tau.size

    def evaluate(self, tau):
        """Piecewise-linear interpolation of impact at ``tau`` (inside the grid)."""
        if self.tau.size == 0:
            raise ValueError("cannot interpolate an empty curve")
        t = np.asarray(tau, dtype=float)
        if np.any(t < self.tau[0]) or np.any(t > self.tau[-1]):
            raise ValueError("tau outside the sampled grid")
        return np.interp(t, self.tau, self.impact)

    def second_differences(self):
        """Three-point second derivative estimates at interior grid points."""
        return second_differences(self.tau, self.impact)


@dataclass(frozen=True)
class ConcavityCertificate:
    """Per-point concavity test results.

    ``holds[i]`` is ``margins[i] > 0``; ``domain`` is an interval when the
    certificate is interval-valued (the sufficient chi-squared interval) and ``None`` otherwise.
    """

    kind: CertificateKind
    tau: np.ndarray
    margins: np.ndarray
    holds: np.ndarray
    domain: tuple | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        margins = np.asarray(self.margins, dtype=float)
        holds = np.asarray(self.holds, dtype=bool)
        if margins.shape != holds.shape:
            raise ValueError("margins and holds must have equal shape")
        if np.any(holds != (margins > 0)):
            raise ValueError("holds must equal margins > 0")
        object.__setattr__(self, "tau", np.asarray(self.tau, dtype=float))
        object.__setattr__(self, "margins", margins)
        object.__setattr__(self, "holds", holds)

    @property
    def all_hold(self):
        return bool(np.all(self.holds))


def second_differences(x, y):
    """Second derivative of ``y(x)`` at interior points by the 3-point formula.

    Works for nonuniform grids; for uniform spacing ``h`` it reduces to
    ``(y[i+1] - 2 y[i] + y[i-1]) / h**2``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        return np.empty(0)
    h0 = x[1:-1] - x[:-2]
    h1 = x[2:] - x[1:-1]
    return 2.0 * (h0 * y[2:] - (h0 + h1) * y[1:-1] + h1 * y[:-2]) / (h0 * h1 * (h0 + h1))
