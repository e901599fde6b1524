"""Complex special functions for the Morse scattering solution.

Kummer's confluent hypergeometric function M(a, b, y), the principal
branch of log Gamma for complex arguments and the real digamma function.
Everything here is a pure function of its arguments.
"""

import math

import numpy as np
from numba import njit

from .errors import ConvergenceError, DomainError, PoleError

EULER_GAMMA = 0.57721566490153286061

# Summation control for the Kummer series.
_SERIES_RTOL = 1e-16
_SERIES_QUIET_TERMS = 10
_SERIES_MAX_TERMS = 100_000
_RESCALE_AT = 1e250

# B_{2n} / (2n (2n - 1)) for the Stirling series of log Gamma.
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)
# B_{2n} / (2n) for the asymptotic digamma series.
_DIGAMMA_ASYMP = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)
_SHIFT_TO = 10.0


@njit(cache=True)
def _kummer_scaled_core(a, b, y):
    """exp(-y) * M(a, b, y) for y >= 0 from the Taylor series.

    Returns (value, n_terms); n_terms < 0 flags non-convergence.
    """
    total = 1.0 + 0.0j
    term = 1.0 + 0.0j
    log_scale = 0.0
    quiet = 0
    n = 0
    while n < _SERIES_MAX_TERMS:
        ratio = (a + n) / (b + n) * (y / (n + 1.0))
        term = term * ratio
        total = total + term
        n += 1
        if abs(term) > _RESCALE_AT:
            total = total / _RESCALE_AT
            term = term / _RESCALE_AT
            log_scale += math.log(_RESCALE_AT)
        if abs(term) <= _SERIES_RTOL * abs(total) and abs(ratio) < 0.5:
            quiet += 1
            if quiet >= _SERIES_QUIET_TERMS:
                return total * math.exp(log_scale - y), n
        else:
            quiet = 0
    return total * math.exp(log_scale - y), -1


@njit(cache=True)
def _kummer_scaled_flat(a, b, y, out):
    worst = 0
    for i in range(a.size):
        yi = y[i]
        if yi >= 0.0:
            val, n = _kummer_scaled_core(a[i], b[i], yi)
        else:
            # Kummer transformation: exp(-y) M(a,b,y) = M(b-a, b, -y).
            val, n = _kummer_scaled_core(b[i] - a[i], b[i], -yi)
            val = val * math.exp(-yi)
        out[i] = val
        if n < 0:
            worst = -1
    return worst


def _check_b(b):
    bb = np.asarray(b, dtype=complex)
    near = (np.abs(bb.imag) < 1e-14) & (bb.real < 0.5) & (
        np.abs(bb.real - np.round(bb.real)) < 1e-14
    )
    if np.any(near):
        raise DomainError("Kummer M undefined for b a nonpositive integer")


def kummer_m_scaled(a, b, y):
    """Exponentially scaled Kummer function exp(-y) M(a, b, y).

    Accepts scalars or broadcastable arrays. Negative ``y`` is handled through
    Kummer's transformation M(a, b, y) = e^y M(b - a, b, -y), so the series is
    only ever summed for a nonnegative argument.
    """
    _check_b(b)
    a_, b_, y_ = np.broadcast_arrays(
        np.asarray(a, dtype=complex), np.asarray(b, dtype=complex), np.asarray(y, dtype=float)
    )
    shape = a_.shape
    out = np.empty(a_.size, dtype=complex)
    status = _kummer_scaled_flat(
        np.ascontiguousarray(a_).ravel(),
        np.ascontiguousarray(b_).ravel(),
        np.ascontiguousarray(y_).ravel(),
        out,
    )
    if status < 0:
        raise ConvergenceError(f"Kummer series did not converge in {_SERIES_MAX_TERMS} terms")
    out = out.reshape(shape)
    return out[()] if out.ndim == 0 else out


def kummer_m(a, b, y, *, y_max=700.0):
    """Kummer's confluent hypergeometric function M(a, b, y).

    Parameters
    ----------
    a, b : complex or array_like
        Parameters; ``b`` must not be a nonpositive integer.
    y : float or array_like
        Real argument with ``|y| <= y_max``.
    y_max : float
        Largest admissible ``|y|``. Use :func:`kummer_m_scaled` for larger
        arguments.

    Raises
    ------
    DomainError
        ``b`` is a nonpositive integer or ``|y|`` exceeds ``y_max``.
    OverflowError
        The unscaled value is not representable.
    """
    yy = np.asarray(y, dtype=float)
    if np.any(np.abs(yy) > y_max):
        raise DomainError(f"|y| exceeds y_max={y_max}; use kummer_m_scaled")
    scaled = np.asarray(kummer_m_scaled(a, b, y))
    yb = np.broadcast_to(yy, scaled.shape)
    log_mag = np.log(np.abs(scaled), where=scaled != 0, out=np.full(scaled.shape, -np.inf)) + yb
    if np.any(log_mag > 709.0):
        raise OverflowError("Kummer M exceeds the double range; use kummer_m_scaled")
    out = scaled * np.exp(yb)
    return out[()] if out.ndim == 0 else out


def log_gamma(z):
    """Principal branch of log Gamma(z) for complex ``z``.

    The argument is shifted until Re z >= 10 with the recurrence and then the
    Stirling series is applied. Summing principal logarithms of the shift
    factors keeps the result analytic off the negative real axis. On the
    negative real axis the value is the limit from below (imaginary part
    -pi per negative factor).

    Raises
    ------
    PoleError
        ``z`` lies within 1e-14 of a nonpositive integer.
    """
    zz = np.asarray(z, dtype=complex)
    zz = zz.real + 1j * (zz.imag + 0.0)
    is_pole = (np.abs(zz.imag) < 1e-14) & (zz.real < 0.5) & (
        np.abs(zz.real - np.round(zz.real)) < 1e-14
    )
    if np.any(is_pole):
        raise PoleError("log_gamma evaluated at a nonpositive integer")
    shift = np.where(zz.real < _SHIFT_TO, np.ceil(_SHIFT_TO - zz.real), 0.0).astype(np.int64)
    acc = np.zeros(zz.shape, dtype=complex)
    for j in range(int(shift.max(initial=0))):
        active = j < shift
        acc = acc + np.where(active, np.log(np.where(active, zz + j, 1.0)), 0.0)
    w = zz + shift
    inv = 1.0 / w
    inv2 = inv * inv
    series = np.zeros(zz.shape, dtype=complex)
    for c in reversed(_STIRLING):
        series = series * inv2 + c
    out = (w - 0.5) * np.log(w) - w + 0.5 * math.log(2.0 * math.pi) + series * inv - acc
    return out[()] if out.ndim == 0 else out


def gamma(z):
    """Complex Gamma function as exp(log_gamma(z))."""
    return np.exp(log_gamma(z))


def digamma(x):
    """Digamma function for real ``x > 0`` (recurrence shift plus asymptotics)."""
    xx = np.asarray(x, dtype=float)
    if np.any(~(xx > 0)):
        raise DomainError("digamma requires x > 0")
    shift = np.where(xx < _SHIFT_TO, np.ceil(_SHIFT_TO - xx), 0.0).astype(np.int64)
    acc = np.zeros(xx.shape)
    for j in range(int(shift.max(initial=0))):
        acc = acc + np.where(j < shift, 1.0 / (xx + j), 0.0)
    w = xx + shift
    inv2 = 1.0 / (w * w)
    series = np.zeros(xx.shape)
    for c in reversed(_DIGAMMA_ASYMP):
        series = series * inv2 + c
    out = np.log(w) - 0.5 / w - series * inv2 - acc
    return out[()] if out.ndim == 0 else out
