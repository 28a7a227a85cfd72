"""Special functions on the positive reals.

The polygamma family (digamma, trigamma, tetragamma) and log-gamma are
evaluated by shifting the argument up to ``x >= 6`` with the standard
recurrences and then summing the asymptotic (Bernoulli-number) series.
All functions accept scalars or numpy arrays; scalar input gives a float.
"""

import numpy as np

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061
SHIFT_THRESHOLD = 6.0

_HALF_LOG_2PI = 0.91893853320467274178

# Stirling series for log Gamma: B_{2k} / (2k (2k-1) x^{2k-1}), k = 1..10
_LGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
)

# B_{2k} / (2k), k = 1..10
_PSI_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
    43867.0 / 14364.0,
    -174611.0 / 6600.0,
)

# B_{2k}, k = 1..10
_PSI1_COEFFS = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
)

# (2k + 1) B_{2k}, k = 1..10
_PSI2_COEFFS = (
    1.0 / 2.0,
    -1.0 / 6.0,
    1.0 / 6.0,
    -3.0 / 10.0,
    5.0 / 6.0,
    -691.0 / 210.0,
    35.0 / 2.0,
    -3617.0 / 30.0,
    43867.0 / 42.0,
    -1222277.0 / 110.0,
)


def _positive(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{name} requires finite x > 0")
    return arr


def _out(arr, like):
    if np.ndim(like) == 0:
        return float(arr)
    return arr


def _shift(x, term):
    """Shift ``x`` up to the threshold, accumulating ``term(x)`` at each step."""
    x = np.array(x, dtype=float, copy=True)
    acc = np.zeros_like(x)
    mask = x < SHIFT_THRESHOLD
    while np.any(mask):
        xm = x[mask]
        acc[mask] += term(xm)
        x[mask] = xm + 1.0
        mask = x < SHIFT_THRESHOLD
    return x, acc


def _series(coeffs, z):
    # Horner in z = 1/x^2, highest order first.
    total = np.zeros_like(z)
    for c in reversed(coeffs):
        total = total * z + c
    return total


def log_gamma(x):
    """Natural log of the Gamma function for x > 0."""
    arr = _positive(x, "log_gamma")
    s, acc = _shift(arr, np.log)
    inv = 1.0 / s
    series = inv * _series(_LGAMMA_COEFFS, inv * inv)
    res = (s - 0.5) * np.log(s) - s + _HALF_LOG_2PI + series - acc
    return _out(res, x)


def digamma(x):
    """psi(x) = d/dx log Gamma(x) for x > 0."""
    arr = _positive(x, "digamma")
    s, acc = _shift(arr, lambda v: 1.0 / v)
    inv2 = 1.0 / (s * s)
    res = np.log(s) - 0.5 / s - inv2 * _series(_PSI_COEFFS, inv2) - acc
    return _out(res, x)


def trigamma(x):
    """psi_1(x), the derivative of digamma, for x > 0."""
    arr = _positive(x, "trigamma")
    s, acc = _shift(arr, lambda v: 1.0 / (v * v))
    inv = 1.0 / s
    inv2 = inv * inv
    res = inv + 0.5 * inv2 + inv * inv2 * _series(_PSI1_COEFFS, inv2) + acc
    return _out(res, x)


def tetragamma(x):
    """psi_2(x), the derivative of trigamma, for x > 0. Always negative."""
    arr = _positive(x, "tetragamma")
    s, acc = _shift(arr, lambda v: -2.0 / (v * v * v))
    inv = 1.0 / s
    inv2 = inv * inv
    res = -inv2 - inv * inv2 - inv2 * inv2 * _series(_PSI2_COEFFS, inv2) + acc
    return _out(res, x)


def sigmoid(x):
    """Logistic function, evaluated without overflow."""
    arr = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(arr))
    res = np.where(arr >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _out(res, x)


def softplus(x):
    """log(1 + exp(x)) as max(x, 0) + log1p(exp(-|x|))."""
    arr = np.asarray(x, dtype=float)
    res = np.maximum(arr, 0.0) + np.log1p(np.exp(-np.abs(arr)))
    return _out(res, x)


def log_sigmoid(x):
    """log(sigmoid(x)) = -softplus(-x)."""
    arr = np.asarray(x, dtype=float)
    return _out(-softplus(-arr), x)


def logit(p):
    """Inverse of the logistic function on (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("logit requires 0 < p < 1")
    return _out(np.log(arr) - np.log1p(-arr), p)
