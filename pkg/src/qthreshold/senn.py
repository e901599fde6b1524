"""Reflection from general one-dimensional potentials via boundary data.

Inside the support (-xi, xi) of the potential the wavefunction is a
combination of the two fundamental solutions u, v fixed by
u(-xi) = v'(-xi) = 1, u'(-xi) = v(-xi) = 0. Their values at +xi,
p = v'(xi), q = u(xi), s = -v(xi), w = u'(xi), determine R and T.

A particle comes in from x = -inf. For the one-sided (wall) topology the
potential grows without bound to the right and only the solution that
decays inside the wall is physical.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import (
    DecaySelectionError,
    DegenerateError,
    IntegrationError,
    StiffnessError,
    ValidationError,
)

RTOL = 1e-12
ATOL = 1e-14
WRONSKIAN_TOL = 1e-10
RICHARDSON_K = (1e-3, 5e-4, 2.5e-4)


class Topology(enum.Enum):
    TWO_SIDED = "two-sided"
    RIGHT_WALL = "right-wall"


@dataclass(frozen=True)
class PotentialModel:
    """A 1D potential with finite support radius ``xi``.

    Parameters
    ----------
    evaluate : callable
        Vectorized map x -> V(x).
    xi : float
        Support half-width. For ``RIGHT_WALL`` only the left edge -xi has to
        be in the force-free region.
    breakpoints : tuple of float
        Positions of discontinuities in V or V'; the integrator restarts there.
    v_scale : float
        Characteristic magnitude of V, used for tolerances.
    v_bound : float
        Largest |V| the integrator accepts before raising ``StiffnessError``.
    """

    evaluate: Callable
    xi: float
    topology: Topology = Topology.TWO_SIDED
    support_tol: float = None
    m: float = 1.0
    hbar: float = 1.0
    breakpoints: tuple = ()
    v_scale: float = 1.0
    v_bound: float = 1e8
    name: str = "custom"
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.xi > 0 and math.isfinite(self.xi)):
            raise ValidationError(f"xi must be positive and finite, got {self.xi}")
        if not (self.m > 0 and self.hbar > 0 and self.v_scale > 0):
            raise ValidationError("m, hbar and v_scale must be positive")
        if self.support_tol is None:
            object.__setattr__(self, "support_tol", 1e-12 * self.v_scale)
        edges = [-self.xi] if self.topology is Topology.RIGHT_WALL else [-self.xi, self.xi]
        for x in edges:
            val = float(self.evaluate(np.array([x]))[0])
            if abs(val) > self.support_tol:
                raise ValidationError(
                    f"|V({x:.6g})| = {abs(val):.3g} exceeds support_tol {self.support_tol:.3g}"
                )

    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=float))

    def energy(self, k):
        return (self.hbar * k) ** 2 / (2.0 * self.m)


@dataclass(frozen=True)
class BoundaryData:
    """Fundamental-solution data at x = +xi for wavenumber ``k``."""

    p: float
    q: float
    s: float
    w: float
    k: float
    wronskian_drift: float = 0.0

    @property
    def wronskian(self):
        # u v' - u' v at +xi
        return self.q * self.p - self.w * (-self.s)


def _rhs_factory(model, E):
    c = 2.0 * model.m / model.hbar**2
    bound = model.v_bound

    def rhs(x, y):
        v = float(model.evaluate(np.array([x]))[0])
        if abs(v) > bound:
            raise StiffnessError(f"|V({x:.6g})| = {abs(v):.3g} exceeds v_bound")
        f = c * (v - E)
        return np.array([y[1], f * y[0], y[3], f * y[2]])

    return rhs


def _segments(a, b, breakpoints):
    inner = sorted(x for x in breakpoints if min(a, b) < x < max(a, b))
    if b < a:
        inner = inner[::-1]
    pts = [a, *inner, b]
    return list(zip(pts[:-1], pts[1:]))


def _integrate(model, E, y0, a, b):
    """Integrate the 4-vector (f, f', g, g') from a to b; returns all accepted states."""
    rhs = _rhs_factory(model, E)
    states = [np.asarray(y0, dtype=float)[:, None]]
    y = np.asarray(y0, dtype=float)
    for lo, hi in _segments(a, b, model.breakpoints):
        sol = solve_ivp(rhs, (lo, hi), y, method="DOP853", rtol=RTOL, atol=ATOL)
        if not sol.success:
            raise IntegrationError(f"step control failed on [{lo:.6g}, {hi:.6g}]: {sol.message}")
        states.append(sol.y[:, 1:])
        y = sol.y[:, -1]
    return np.concatenate(states, axis=1)


def fundamental_solutions(model, k):
    """Boundary data (p, q, s, w) at energy hbar^2 k^2 / 2m.

    Raises
    ------
    IntegrationError
        Step control failed or the Wronskian drifted by more than 1e-10
        relative to max(1, |u v'| + |u' v|).
    StiffnessError
        |V| exceeded ``model.v_bound`` along the path.
    """
    if not k >= 0:
        raise ValidationError("k must be nonnegative")
    E = model.energy(k)
    ys = _integrate(model, E, [1.0, 0.0, 0.0, 1.0], -model.xi, model.xi)
    u, du, v, dv = ys
    # relative to the cancelling terms: inside a thick barrier |u v'| grows
    # like exp(4 kappa xi) and the absolute error has a roundoff floor there
    drift = float(np.max(np.abs(u * dv - du * v - 1.0)
                         / np.maximum(1.0, np.abs(u * dv) + np.abs(du * v))))
    if drift > WRONSKIAN_TOL:
        raise IntegrationError(f"Wronskian drift {drift:.3g} exceeds {WRONSKIAN_TOL}")
    return BoundaryData(
        p=float(dv[-1]), q=float(u[-1]), s=float(-v[-1]), w=float(du[-1]), k=float(k),
        wronskian_drift=drift,
    )


def _require(model, topology):
    if model.topology is not topology:
        raise ValidationError(f"operation requires {topology.value} topology")


def _check_k(k):
    if not k > 0:
        raise ValidationError("k must be positive")


def _amplitudes(model, k):
    bd = fundamental_solutions(model, k)
    p, q, s, w = bd.p, bd.q, bd.s, bd.w
    xi = model.xi
    den = k * (p + q) + 1j * (s * k * k + w)
    if abs(den) < 1e-300:
        raise DegenerateError("vanishing denominator in the matching formula")
    R = np.exp(-2j * k * xi) * (k * (p - q) + 1j * (s * k * k - w)) / den
    # continuity at -xi gives a, b; then T e^{ik xi} = a q - b s
    a = np.exp(-1j * k * xi) + R * np.exp(1j * k * xi)
    b = 1j * k * (np.exp(-1j * k * xi) - R * np.exp(1j * k * xi))
    T = (a * q - b * s) * np.exp(-1j * k * xi)
    return complex(R), complex(T), bd


def reflection_amplitude_general(model, k):
    """Reflection amplitude R for incidence from the left (two-sided topology).

    The reflected wave is R exp(-ikx) for x <= -xi.
    """
    _require(model, Topology.TWO_SIDED)
    _check_k(k)
    return _amplitudes(model, k)[0]


def transmission_amplitude(model, k):
    """Transmission amplitude T; the transmitted wave is T exp(ikx) for x >= xi."""
    _require(model, Topology.TWO_SIDED)
    _check_k(k)
    return _amplitudes(model, k)[1]


def reflection_probability(model, k):
    """|R|^2 from the boundary data in closed form."""
    _require(model, Topology.TWO_SIDED)
    _check_k(k)
    bd = fundamental_solutions(model, k)
    p, q, s, w = bd.p, bd.q, bd.s, bd.w
    k2 = k * k
    num = w * w + k2 * ((p - q) ** 2 - 2.0 * s * w) + s * s * k2 * k2
    den = w * w + k2 * ((p + q) ** 2 + 2.0 * s * w) + s * s * k2 * k2
    if den < 1e-300:
        raise DegenerateError("vanishing denominator in the reflection probability")
    return float(num / den)


@dataclass(frozen=True)
class WallData:
    """Decaying interior solution at x = -xi: value ``s`` and slope ``q``."""

    q: float
    s: float
    k: float
    x_deep: float


def _wall_seed_point(model, E):
    target = 50.0 * max(E, model.v_scale)
    step = max(model.xi, 1.0) / 64.0
    x = -model.xi
    for _ in range(200_000):
        x += step
        v = float(model.evaluate(np.array([x]))[0])
        if v >= target:
            return x, v
        if abs(v) > model.v_bound:
            break
    raise DecaySelectionError("potential never rises to 50 times the energy scale; wall too soft")


def wall_solution(model, k):
    """Integrate the solution that decays inside the wall back to x = -xi."""
    _require(model, Topology.RIGHT_WALL)
    E = model.energy(k)
    x_deep, v_deep = _wall_seed_point(model, E)
    kappa = math.sqrt(2.0 * model.m * (v_deep - E)) / model.hbar
    # second component pair is a dummy copy; only (f, f') matter here
    ys = _integrate(model, E, [1.0, -kappa, 0.0, 0.0], x_deep, -model.xi)
    f, df = ys[0, -1], ys[1, -1]
    if not (np.all(np.isfinite(ys[:2])) and math.hypot(f, df) > 0):
        raise DecaySelectionError("decaying solution could not be normalized")
    norm = math.hypot(f, df)
    return WallData(q=df / norm, s=f / norm, k=float(k), x_deep=x_deep)


def reflection_amplitude_wall(model, k):
    """Reflection amplitude for a right-side wall; |R| = 1 by construction.

    With s and q the value and slope of the decaying solution at -xi,
    R = exp(-2ik xi) (ks + iq) / (ks - iq).
    """
    _check_k(k)
    wd = wall_solution(model, k)
    den = k * wd.s - 1j * wd.q
    if abs(den) < 1e-300:
        raise DegenerateError("vanishing denominator in the wall matching formula")
    return complex(np.exp(-2j * k * model.xi) * (k * wd.s + 1j * wd.q) / den)


@dataclass(frozen=True)
class ThresholdLimit:
    """Boundary data extrapolated to k -> 0 with error estimates."""

    p: float
    q: float
    s: float
    w: float
    w_error: float
    errors: tuple

    def is_resonant(self, w_threshold):
        return abs(self.w) <= w_threshold

    def reflection_probability(self, w_threshold):
        """Threshold |R|^2: 1 unless w is declared zero at ``w_threshold``."""
        if not self.is_resonant(w_threshold):
            return 1.0
        return (self.p - self.q) ** 2 / (self.p + self.q) ** 2


def _richardson(values):
    # values at k, k/2, k/4 for a function smooth in k^2
    f0, f1, f2 = values
    r1 = (4.0 * f1 - f0) / 3.0
    r2 = (4.0 * f2 - f1) / 3.0
    best = (16.0 * r2 - r1) / 15.0
    return best, abs(best - r2)


def threshold_limit(model, ks=RICHARDSON_K):
    """Richardson-extrapolate (p, q, s, w) to k = 0."""
    data = [fundamental_solutions(model, k) for k in ks]
    out, errs = [], []
    for name in ("p", "q", "s", "w"):
        val, err = _richardson([getattr(bd, name) for bd in data])
        out.append(val)
        errs.append(err)
    return ThresholdLimit(*out, w_error=errs[3], errors=tuple(errs))


def tune_zero_energy_resonance(factory, lo, hi, xtol=1e-13):
    """Find the strength g in [lo, hi] where w(k = 0) of ``factory(g)`` vanishes."""

    def w_of(g):
        return fundamental_solutions(factory(g), 0.0).w

    wl, wh = w_of(lo), w_of(hi)
    if wl * wh > 0:
        raise ValidationError("w(k=0) does not change sign on the bracket")
    return brentq(w_of, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


# Built-in potentials.


def free(xi=1.0, m=1.0, hbar=1.0):
    return PotentialModel(
        evaluate=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        xi=xi, m=m, hbar=hbar, name="free", parameters={"xi": xi},
    )


def square_well(V0=1.0, a=1.0, m=1.0, hbar=1.0):
    """V = -V0 on (-a, a), zero outside."""
    if not a > 0:
        raise ValidationError("a must be positive")
    return PotentialModel(
        evaluate=lambda x: np.where(np.abs(x) < a, -V0, 0.0),
        xi=a, m=m, hbar=hbar, breakpoints=(-a, a), v_scale=max(abs(V0), 1e-300),
        name="square_well", parameters={"V0": V0, "a": a},
    )


def square_barrier(V0=1.0, a=1.0, m=1.0, hbar=1.0):
    """V = +V0 on (-a, a), zero outside."""
    model = square_well(-V0, a, m, hbar)
    return PotentialModel(
        evaluate=model.evaluate, xi=a, m=m, hbar=hbar, breakpoints=(-a, a),
        v_scale=model.v_scale, name="square_barrier", parameters={"V0": V0, "a": a},
    )


def asymmetric_well(V0=1.0, a=1.0, V1=0.5, m=1.0, hbar=1.0):
    """Two-step well: -V0 on (-a, 0) and -V1 on [0, a)."""
    def evaluate(x):
        x = np.asarray(x, dtype=float)
        return np.where((x > -a) & (x < 0), -V0, np.where((x >= 0) & (x < a), -V1, 0.0))

    return PotentialModel(
        evaluate=evaluate, xi=a, m=m, hbar=hbar, breakpoints=(-a, 0.0, a),
        v_scale=max(abs(V0), abs(V1), 1e-300),
        name="asymmetric_well", parameters={"V0": V0, "a": a, "V1": V1},
    )


def gaussian_well(V0=1.0, sigma=1.0, m=1.0, hbar=1.0):
    """V = -V0 exp(-x^2 / (2 sigma^2)), truncated where |V| < 1e-12 V0."""
    xi = sigma * math.sqrt(2.0 * math.log(1e12)) * 1.0001
    return PotentialModel(
        evaluate=lambda x: -V0 * np.exp(-np.asarray(x, dtype=float) ** 2 / (2.0 * sigma**2)),
        xi=xi, m=m, hbar=hbar, v_scale=max(abs(V0), 1e-300),
        name="gaussian_well", parameters={"V0": V0, "sigma": sigma},
    )


def morse_wall(params, xi=None):
    """Morse potential with x = -z so that the wall lies on the right.

    R of this model multiplies exp(-ikx) = exp(ikz), the same convention as
    the analytic Morse amplitude.
    """
    V, d, z0 = params.V, params.d, params.z0

    def evaluate(x):
        e1 = np.exp((np.asarray(x, dtype=float) + z0) / d)
        return V * (e1 * e1 - 2.0 * e1)

    if xi is None:
        # |V(z)| ~ 2 V exp(-(z - z0)/d) < 1e-12 V in the tail
        xi = max(z0 + d * math.log(2e12) * 1.001, 1.0)
    return PotentialModel(
        evaluate=evaluate, xi=xi, topology=Topology.RIGHT_WALL, m=params.m,
        hbar=params.hbar, v_scale=V, name="morse",
        parameters={"V": V, "d": d, "z0": z0},
    )


def from_table(x, V, topology=Topology.TWO_SIDED, m=1.0, hbar=1.0, support_tol=None):
    """Cubic-spline potential from tabulated (x, V) pairs.

    Two-sided tables are zero outside their range; a right-wall table keeps
    its last value beyond the right end.
    """
    x = np.asarray(x, dtype=float)
    V = np.asarray(V, dtype=float)
    if x.ndim != 1 or x.size < 4 or x.shape != V.shape:
        raise ValidationError("table needs at least 4 matching (x, V) pairs")
    if np.any(np.diff(x) <= 0):
        raise ValidationError("table x values must be strictly increasing")
    spline = CubicSpline(x, V)
    lo, hi, v_last = x[0], x[-1], V[-1]
    wall = topology is Topology.RIGHT_WALL

    def evaluate(xx):
        xx = np.asarray(xx, dtype=float)
        inside = spline(np.clip(xx, lo, hi))
        right = v_last if wall else 0.0
        return np.where(xx < lo, 0.0, np.where(xx > hi, right, inside))

    xi = max(abs(lo), abs(hi)) if not wall else abs(lo)
    v_scale = float(np.max(np.abs(V))) or 1.0
    if wall and V.min() < 0:
        # the wall height is not a tolerance scale; the well depth is
        v_scale = float(-V.min())
    return PotentialModel(
        evaluate=evaluate, xi=xi, topology=topology, m=m, hbar=hbar,
        support_tol=support_tol, breakpoints=(lo, hi), v_scale=v_scale,
        name="table", parameters={"n": int(x.size)},
    )


BUILTINS = {
    "free": free,
    "square_well": square_well,
    "square_barrier": square_barrier,
    "asymmetric_well": asymmetric_well,
    "gaussian_well": gaussian_well,
}
