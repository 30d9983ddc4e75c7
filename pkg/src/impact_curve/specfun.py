"""Gamma-family special functions used by the chi-squared threshold map.

``rlig_p(x, a)`` is the regularized lower incomplete gamma function

    P(x; a) = 1/Gamma(a) * int_0^x t**(a-1) exp(-t) dt

evaluated by its power series for ``x < a + 1`` and by a Lentz continued
fraction for the complement otherwise. The inverse in ``x`` is a bracketed,
safeguarded Newton iteration.
"""

import math

_EPS = 1e-14
_MAX_ITER = 500
_TINY = 1e-300


def ln_gamma(x):
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"ln_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def _check_args(x, a):
    if not a > 0:
        raise ValueError(f"shape a must be positive, got {a!r}")
    if not x >= 0:
        raise ValueError(f"x must be nonnegative, got {x!r}")


def _log_prefactor(x, a):
    # log of x**a * exp(-x) / Gamma(a)
    return a * math.log(x) - x - math.lgamma(a)


def _series(x, a):
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(_log_prefactor(x, a))


def _continued_fraction(x, a):
    # Upper regularized gamma Q(x; a) by modified Lentz.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(_log_prefactor(x, a)) * h


def rlig_p(x, a):
    """Regularized lower incomplete gamma P(x; a), increasing in ``x``."""
    _check_args(x, a)
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(_series(x, a), 1.0)
    return max(1.0 - _continued_fraction(x, a), 0.0)


def rlig_q(x, a):
    """Complement 1 - P(x; a), computed without cancellation for large ``x``."""
    _check_args(x, a)
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - min(_series(x, a), 1.0)
    return _continued_fraction(x, a)


def rlig_p_derivative(x, a):
    """d/dx P(x; a) = x**(a-1) exp(-x) / Gamma(a).

    At ``x = 0`` the result is 0 for ``a > 1``, ``1`` for ``a == 1`` and
    ``+inf`` for ``a < 1``.
    """
    _check_args(x, a)
    if x == 0:
        if a > 1:
            return 0.0
        if a == 1:
            return 1.0
        return math.inf
    return math.exp((a - 1.0) * math.log(x) - x - math.lgamma(a))


def rlig_p_second_derivative(x, a):
    """d2/dx2 P(x; a) = x**(a-2) exp(-x) (a - x - 1) / Gamma(a), for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"second derivative requires x > 0, got {x!r}")
    _check_args(x, a)
    return math.exp((a - 2.0) * math.log(x) - x - math.lgamma(a)) * (a - x - 1.0)


def rlig_p_inverse(q, a, tol=1e-13, max_iter=200):
    """Return ``x`` with ``P(x; a) = q`` for ``0 <= q < 1``.

    Newton iterates on ``log P`` (``q <= 1/2``) or ``log Q`` (``q > 1/2``)
    in the variable ``log x``, which is nearly linear in the power-law and
    exponential tails. Each iterate shrinks a bracket; a step leaving the
    bracket is replaced by bisection.
    """
    if not a > 0:
        raise ValueError(f"shape a must be positive, got {a!r}")
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must lie in [0, 1), got {q!r}")
    if q == 0.0:
        return 0.0

    lower = q <= 0.5
    tail_target = q if lower else 1.0 - q  # exact for q >= 1/2
    target = math.log(tail_target)

    def below_root(x):
        return rlig_p(x, a) < q if lower else rlig_q(x, a) > tail_target

    lo = 0.0
    hi = a + 10.0 * math.sqrt(a) + 20.0
    while below_root(hi):
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            raise ValueError(f"cannot bracket P^-1({q!r}; {a!r})")

    # P(x; a) < x^a / Gamma(a + 1), so this guess sits left of the root
    guess = math.exp((math.log(q) + math.lgamma(a + 1.0)) / a)
    if guess == 0.0:
        return 0.0  # root lies below the smallest positive double
    x = guess if lo < guess < hi else 0.5 * (lo + hi)
    for _ in range(max_iter):
        tail = rlig_p(x, a) if lower else rlig_q(x, a)
        # resid increases with x on both branches
        resid = tail - tail_target if lower else tail_target - tail
        if abs(resid) <= tol * tail_target:
            return x
        if resid > 0:
            hi = x
        else:
            lo = x
        slope = rlig_p_derivative(x, a)
        step_ok = False
        if tail > 0 and slope > 0 and math.isfinite(slope):
            g = math.log(tail) - target
            dg = x * slope / tail * (1.0 if lower else -1.0)
            step = -g / dg
            if abs(step) < 700:
                x_new = x * math.exp(step)
                step_ok = lo < x_new < hi
        if not step_ok:
            # geometric midpoint when the bracket spans decades
            x_new = math.sqrt(lo * hi) if lo > 0 and hi > 4.0 * lo else 0.5 * (lo + hi)
        if x_new == x or hi - lo <= 4.0 * math.ulp(hi):
            return x_new
        x = x_new
    return x
