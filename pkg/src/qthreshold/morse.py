"""Exact scattering from the one-dimensional Morse potential.

Potential, coordinate transform, turning points, the badlands (quantality)
function, the analytic reflection amplitude and the stationary scattering
states. The particle comes in from z = +inf; the repulsive wall sits at
z -> -inf.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import brentq, minimize_scalar

from . import specfun
from .errors import ConvergenceError, DomainError, PoleError, ValidationError
from .specfun import _kummer_scaled_core

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Above this y the decaying (Tricomi) asymptotic series is tried first; it is
# used when its truncation error beats the cancellation error of the two
# Kummer solutions.
Y_SWITCH = 8.0


@dataclass(frozen=True)
class MorseParams:
    """Morse potential V [exp(-2(z-z0)/d) - 2 exp(-(z-z0)/d)] and units.

    ``V = 0`` is accepted as a free-particle test mode for the classical
    engine; the quantum routines require ``V > 0``.
    """

    V: float = 1.0
    d: float = 1.0
    z0: float = 0.0
    m: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("d", "m", "hbar"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValidationError(f"MorseParams.{name} must be positive, got {val}")
        if not (self.V >= 0 and math.isfinite(self.V)):
            raise ValidationError(f"MorseParams.V must be nonnegative, got {self.V}")
        if not math.isfinite(self.z0):
            raise ValidationError("MorseParams.z0 must be finite")

    @property
    def omega0(self):
        """Harmonic frequency at the well bottom."""
        return math.sqrt(2.0 * self.V / (self.m * self.d**2))

    @property
    def Y(self):
        """Dimensionless strength sqrt(8 m d^2 V) / hbar."""
        return math.sqrt(8.0 * self.m * self.d**2 * self.V) / self.hbar

    @property
    def is_free(self):
        return self.V == 0.0

    def energy(self, k):
        return (self.hbar * k) ** 2 / (2.0 * self.m)


@dataclass(frozen=True)
class ReflectionValue:
    k: float
    amplitude: complex
    is_limit: bool = False
    # phase referenced to the origin z = 0 (R multiplies exp(ikz))
    convention: str = "z0-referenced"


def _require_potential(params):
    if params.is_free:
        raise DomainError("operation requires a Morse potential with V > 0")


def potential(params, z):
    x = (np.asarray(z, dtype=float) - params.z0) / params.d
    e1 = np.exp(-x)
    return params.V * (e1 * e1 - 2.0 * e1)


def potential_derivatives(params, z):
    """Return (V, dV/dz, d2V/dz2) from the closed-form exponentials."""
    x = (np.asarray(z, dtype=float) - params.z0) / params.d
    e1 = np.exp(-x)
    e2 = e1 * e1
    v = params.V * (e2 - 2.0 * e1)
    v1 = params.V / params.d * (-2.0 * e2 + 2.0 * e1)
    v2 = params.V / params.d**2 * (4.0 * e2 - 2.0 * e1)
    return v, v1, v2


def y_of_z(params, z):
    """Dimensionless coordinate y = Y exp(-(z - z0)/d)."""
    expo = (params.z0 - np.asarray(z, dtype=float)) / params.d
    if np.any(expo + math.log(max(params.Y, 1e-300)) > 709.0):
        raise OverflowError("y(z) exceeds the double range")
    return params.Y * np.exp(expo)


def turning_point(params, E):
    """Outer classical turning point on the repulsive wall for E > 0."""
    E = np.asarray(E, dtype=float)
    if np.any(~(E > 0)):
        raise DomainError("turning_point requires E > 0")
    if params.is_free:
        raise DomainError("no turning point without a potential")
    out = params.z0 - params.d * np.log1p(np.sqrt(1.0 + E / params.V))
    return out[()] if out.ndim == 0 else out


def classical_momentum(params, z, E):
    kinetic = E - potential(params, z)
    if np.any(kinetic <= 0):
        raise DomainError("classical momentum requires E > V(z)")
    return np.sqrt(2.0 * params.m * kinetic)


def badlands(params, z, E):
    """Quantality Q(z) = hbar^2 [3/4 p'^2/p^4 - p''/(2 p^3)]."""
    v, v1, v2 = potential_derivatives(params, z)
    kinetic = E - v
    if np.any(kinetic <= 0):
        raise DomainError("badlands function is only defined where E > V(z)")
    m = params.m
    p = np.sqrt(2.0 * m * kinetic)
    dp = -m * v1 / p
    d2p = -m * v2 / p - m * m * v1 * v1 / p**3
    return params.hbar**2 * (0.75 * dp * dp / p**4 - d2p / (2.0 * p**3))


@dataclass(frozen=True)
class BadlandsPeak:
    z_bf: float
    qmax: float


def badlands_peak(params, E, n_scan=1000):
    """Locate the badlands maximum z_BF of |Q| in the potential tail.

    |Q| diverges at the turning point itself, so the lobe attached to the
    turning point (up to the first minimum of |Q|) is excluded. The remaining
    range up to z0 + 50 d is scanned on a grid that is log-spaced in the
    distance from the turning point, and the best grid point is refined by a
    bounded golden-section search.
    """
    if not E > 0:
        raise DomainError("badlands_peak requires E > 0")
    z_tp = float(turning_point(params, E))
    z_hi = params.z0 + 50.0 * params.d
    offsets = np.geomspace(1e-3 * params.d, z_hi - z_tp, n_scan)
    z = z_tp + offsets
    q = np.abs(badlands(params, z, E))
    interior = (q[1:-1] >= q[:-2]) & (q[1:-1] >= q[2:])
    minima = np.nonzero((q[1:-1] <= q[:-2]) & (q[1:-1] <= q[2:]))[0]
    if minima.size == 0:
        raise ConvergenceError("could not separate the turning-point lobe of |Q|")
    candidates = np.nonzero(interior)[0]
    candidates = candidates[candidates > minima[0]]
    if candidates.size == 0:
        raise ConvergenceError("no badlands maximum found in the tail")
    i = candidates[np.argmax(q[candidates + 1])] + 1
    lo, hi = z[i - 1], z[i + 1]
    res = minimize_scalar(
        lambda zz: -abs(float(badlands(params, zz, E))),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10 * max(1.0, abs(z[i]))},
    )
    return BadlandsPeak(z_bf=float(res.x), qmax=float(-res.fun))


def _log_gamma_ratio_terms(params, k):
    mu = 1j * np.asarray(k, dtype=float) * params.d
    Y = params.Y
    return (
        specfun.log_gamma(1.0 + 2.0 * mu)
        + specfun.log_gamma((1.0 - 2.0 * mu - Y) / 2.0)
        - specfun.log_gamma(1.0 - 2.0 * mu)
        - specfun.log_gamma((1.0 + 2.0 * mu - Y) / 2.0)
    )


def reflection_amplitude(params, k):
    """Analytic reflection amplitude R(k); accepts scalars or arrays.

    Negative ``k`` evaluates the analytic continuation, which equals
    conj(R(|k|)). At ``k = 0`` the threshold limit -1 is returned.
    """
    _require_potential(params)
    kk = np.asarray(k, dtype=float)
    out = np.full(kk.shape, -1.0 + 0.0j)
    nz = kk != 0.0
    if np.any(~nz):
        half = (1.0 - params.Y) / 2.0
        if half <= 0 and abs(half - round(half)) < 1e-14:
            raise PoleError("zero-energy bound state: threshold limit is not -1")
    if np.any(nz):
        kn = kk[nz]
        lr = _log_gamma_ratio_terms(params, kn)
        phase = -2.0 * kn * (params.z0 + params.d * math.log(params.Y))
        out[nz] = -np.exp(lr + 1j * phase)
    return out[()] if out.ndim == 0 else out


def reflection_value(params, k):
    amp = complex(reflection_amplitude(params, k))
    return ReflectionValue(k=float(k), amplitude=amp, is_limit=(k == 0))


def threshold_slope(params, h=1e-6):
    """Central-difference d(Im R)/dk at k = 0."""
    r_plus = reflection_amplitude(params, h)
    r_minus = reflection_amplitude(params, -h)
    return float((r_plus.imag - r_minus.imag) / (2.0 * h))


def threshold_slope_expansion(params, euler_multiplier=2.0, digamma_times_d=False):
    """Slope of Im[R(k) exp(2ikz0)] at k = 0 from the low-k expansion.

    R exp(2ikz0) ~ -1 + 2idk [ln Y + c psi((1+Y)/2) - pi tan(pi Y/2) + n gamma].
    The defaults (n = 2, c = 1) are the coefficients obtained by
    differentiating the Gamma-function ratio; ``euler_multiplier=4`` with
    ``digamma_times_d=True`` gives the alternative printed form, which
    disagrees with the exact derivative.
    """
    _require_potential(params)
    Y, d = params.Y, params.d
    c = d if digamma_times_d else 1.0
    bracket = (
        math.log(Y)
        + c * float(specfun.digamma((1.0 + Y) / 2.0))
        - math.pi * math.tan(math.pi * Y / 2.0)
        + euler_multiplier * specfun.EULER_GAMMA
    )
    return 2.0 * d * bracket


def threshold_linearity_window(params, tol, slope=None):
    """Largest k with |Im R(k) - slope k| <= tol |slope k| on (0, k]."""
    if not 0 < tol < 0.5:
        raise ValidationError("tol must lie in (0, 0.5)")
    slope = threshold_slope(params) if slope is None else slope

    def excess(k):
        return abs(reflection_amplitude(params, k).imag - slope * k) - tol * abs(slope * k)

    ks = np.geomspace(1e-8 / params.d, 10.0 / params.d, 800)
    dev = np.abs(reflection_amplitude(params, ks).imag - slope * ks) - tol * np.abs(slope * ks)
    bad = np.nonzero(dev > 0)[0]
    if bad.size == 0:
        return float(ks[-1])
    j = bad[0]
    if j == 0:
        return float(ks[0])
    return float(brentq(excess, ks[j - 1], ks[j], xtol=1e-14, rtol=1e-12))


@njit(cache=True)
def _tricomi_asymptotic_sum(a, ap, y):
    total = 1.0 + 0.0j
    term = 1.0 + 0.0j
    for n in range(400):
        nxt = term * (a + n) * (ap + n) / ((n + 1.0) * (-y))
        if abs(nxt) > abs(term):
            break
        term = nxt
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total, abs(term) / abs(total)


@njit(cache=True)
def _psi_kernel(k, z, refl, decay_coef, Y, d, z0, y_switch, out):
    """Stationary states psi_k(z) on the (k, z) product grid.

    ``refl[i]`` is R(k_i); ``decay_coef[i]`` the prefactor of the decaying
    solution e^{-y/2} y^{(Y-1)/2} U(a,b,y), tried for y > y_switch.
    """
    log_y_base = math.log(Y)
    for i in range(k.size):
        ki = k[i]
        if ki == 0.0:
            for j in range(z.size):
                out[i, j] = 0.0
            continue
        a1 = (1.0 + 2j * ki * d - Y) / 2.0
        b1 = 1.0 + 2j * ki * d
        a2 = (1.0 - 2j * ki * d - Y) / 2.0
        b2 = 1.0 - 2j * ki * d
        for j in range(z.size):
            zj = z[j]
            log_y = log_y_base + (z0 - zj) / d
            if log_y > 700.0:
                out[i, j] = 0.0
                continue
            y = math.exp(log_y)
            if y > y_switch:
                s, trunc = _tricomi_asymptotic_sum(a1, a2, y)
                # Kummer sums lose about e^y * 1e-18 to cancellation here.
                if trunc < max(1e-16, 1e-18 * math.exp(y)):
                    mag = math.exp(-0.5 * y + 0.5 * (Y - 1.0) * log_y)
                    out[i, j] = decay_coef[i] * mag * s
                    continue
            m1, _ = _kummer_scaled_core(a1, b1, y)
            m2, _ = _kummer_scaled_core(a2, b2, y)
            grow = math.exp(0.5 * y)
            ph = np.exp(-1j * ki * zj)
            out[i, j] = INV_SQRT_2PI * grow * (ph * m1 + refl[i] * m2 / ph)


def _decay_coefficients(params, k):
    """Prefactor (2 pi)^-1/2 e^{-ikz0} Y^{-ikd} Gamma(a')/Gamma(-2ikd) per k."""
    k = np.asarray(k, dtype=float)
    out = np.zeros(k.shape, dtype=complex)
    nz = k != 0
    kn = k[nz]
    d, Y = params.d, params.Y
    lg = specfun.log_gamma((1.0 - 2j * kn * d - Y) / 2.0) - specfun.log_gamma(-2j * kn * d)
    out[nz] = INV_SQRT_2PI * np.exp(lg - 1j * kn * (params.z0 + d * math.log(Y)))
    return out


def scattering_grid(params, k, z):
    """psi_k(z) for every pair of ``k`` (rows) and ``z`` (columns)."""
    _require_potential(params)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty((k.size, z.size), dtype=complex)
    refl = np.atleast_1d(reflection_amplitude(params, k)).astype(complex)
    coef = _decay_coefficients(params, k)
    _psi_kernel(k, z, refl, coef, params.Y, params.d, params.z0, Y_SWITCH, out)
    return out


def scattering_wavefunction(params, k, z):
    """Stationary scattering state <z|k+> normalized to delta(k - k').

    Far outside the well it tends to (exp(-ikz) + R exp(ikz)) / sqrt(2 pi);
    it vanishes inside the repulsive wall.
    """
    if not k > 0:
        raise DomainError("scattering_wavefunction requires k > 0")
    zz = np.asarray(z, dtype=float)
    out = scattering_grid(params, float(k), zz.ravel())[0].reshape(zz.shape)
    return out[()] if out.ndim == 0 else out
