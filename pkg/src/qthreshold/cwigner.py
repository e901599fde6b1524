"""Classical Wigner dynamics of the coherent state on the Morse potential.

Initial conditions are drawn from the Wigner transform of the packet, a
bivariate Gaussian with variances 1/(2 gamma) in q and hbar^2 gamma / 2 in
p. Every trajectory is then propagated classically.

Two engines are available. ``analytic`` uses the closed-form Morse flow
for E > 0: with u = exp((z - z0)/d),

    u(t) = u_TP + 2 D sinh^2(Omega (t - t*) / 2),
    D = sqrt(beta (beta + 1)),  beta = V / E,  Omega = sqrt(2E/m) / d,

which is exact and cheap at any distance from the wall. ``integrate``
advances free flight analytically outside z_cut and uses an adaptive
Dormand-Prince 5(4) integrator inside, gated on energy conservation; it
serves as an independent cross-check.

Random streams are keyed by chunk index, so results do not depend on the
number of worker threads.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import morse
from .density import Provenance, SpaceTimeDensity
from .errors import EnergyDriftError, IntegrationError, NoCrossingError, ValidationError
from .packet import free_flight_time  # noqa: F401 (public here as well)

CHUNK = 65_536
BLOCK = 256
JACKKNIFE_GROUPS = 256
MAX_MISS_FRACTION = 1e-6
# beyond this reduced time the flow is a straight line to double precision
S_LINEAR = 40.0

KIND_MORSE, KIND_FREE, KIND_BOUND = 0, 1, 2


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int = 10_000_000
    seed: int = 0
    energy_tolerance: float = 1e-9
    z_cut: float = None
    threads: int = None
    engine: str = "analytic"
    t_max: float = None

    def __post_init__(self):
        if int(self.n_traj) != self.n_traj or self.n_traj < 1000:
            raise ValidationError("n_traj must be an integer >= 1000")
        if not self.energy_tolerance > 0:
            raise ValidationError("energy_tolerance must be positive")
        if self.engine not in ("analytic", "integrate"):
            raise ValidationError(f"unknown engine {self.engine!r}")
        if self.threads is not None and self.threads < 1:
            raise ValidationError("threads must be >= 1")
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")

    @property
    def workers(self):
        return self.threads or os.cpu_count() or 1

    def resolved_z_cut(self, params, E):
        """Position beyond which |V| < 1e-6 E."""
        if self.z_cut is not None:
            return self.z_cut
        if params.is_free:
            return params.z0
        return params.z0 + params.d * math.log(2.0 * params.V / (1e-6 * E))


@dataclass
class PhaseSample:
    """Phase-space points (scalars or equal-length arrays) with weights."""

    q: np.ndarray
    p: np.ndarray
    weight: np.ndarray = 1.0


def _chunk_count(n):
    return (n + CHUNK - 1) // CHUNK


def _sample_chunk(state, cfg, index, hbar):
    n = min(CHUNK, cfg.n_traj - index * CHUNK)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(index,)))
    q = state.z_i + math.sqrt(state.position_variance) * rng.standard_normal(n)
    p = -state.p_i + math.sqrt(state.momentum_variance(hbar)) * rng.standard_normal(n)
    return q, p


def sample_initial(state, cfg, hbar=1.0):
    """Yield the ensemble chunk by chunk as :class:`PhaseSample` batches."""
    for index in range(_chunk_count(cfg.n_traj)):
        q, p = _sample_chunk(state, cfg, index, hbar)
        yield PhaseSample(q, p, np.ones_like(q))


# Closed-form flow.


@njit(cache=True, nogil=True)
def _s_of_logu(logu, log_dhalf, u_tp):
    """Reduced time Omega |t - t*| at which log u is reached."""
    if logu > 30.0:
        return logu - log_dhalf + math.log1p(-u_tp * math.exp(-logu))
    x = (math.exp(logu) - u_tp) / (4.0 * math.exp(log_dhalf))
    if x <= 0.0:
        return 0.0
    return 2.0 * math.asinh(math.sqrt(x))


@njit(cache=True, nogil=True)
def _logu_of_s(s, log_dhalf, c):
    if s > S_LINEAR:
        return log_dhalf + s
    em = math.expm1(-s)
    return log_dhalf + s + math.log(em * em + 2.0 * c * math.exp(-s))


@njit(cache=True, nogil=True)
def _pratio_of_s(s, c):
    """|p| / sqrt(2 m E) along the flow."""
    if s > S_LINEAR:
        return 1.0
    em = math.expm1(-s)
    return -math.expm1(-2.0 * s) / (em * em + 2.0 * c * math.exp(-s))


@njit(cache=True, nogil=True)
def _describe(q0, p0, V, d, z0, m, kind, energy, omega, t_star, log_dhalf, c, u_tp):
    for i in range(q0.size):
        x = (q0[i] - z0) / d
        if V == 0.0:
            kind[i] = KIND_FREE
            energy[i] = p0[i] * p0[i] / (2.0 * m)
            continue
        e1 = math.exp(-x)
        E = p0[i] * p0[i] / (2.0 * m) + V * (e1 * e1 - 2.0 * e1)
        energy[i] = E
        if not E > 0.0:
            kind[i] = KIND_BOUND
            continue
        kind[i] = KIND_MORSE
        beta = V / E
        D = math.sqrt(beta * (beta + 1.0))
        ut = 1.0 / (1.0 + math.sqrt(1.0 + E / V))
        om = math.sqrt(2.0 * E / m) / d
        ldh = math.log(0.5 * D)
        s0 = _s_of_logu(x, ldh, ut)
        omega[i] = om
        log_dhalf[i] = ldh
        u_tp[i] = ut
        c[i] = ut / D
        t_star[i] = s0 / om if p0[i] < 0.0 else -s0 / om


class _Flow:
    """Per-trajectory constants of the closed-form flow for one chunk."""

    def __init__(self, params, q0, p0):
        n = q0.size
        self.q0, self.p0 = q0, p0
        self.kind = np.empty(n, np.int64)
        self.energy = np.zeros(n)
        self.omega = np.ones(n)
        self.t_star = np.zeros(n)
        self.log_dhalf = np.zeros(n)
        self.c = np.zeros(n)
        self.u_tp = np.zeros(n)
        _describe(
            q0, p0, params.V, params.d, params.z0, params.m, self.kind, self.energy,
            self.omega, self.t_star, self.log_dhalf, self.c, self.u_tp,
        )


@njit(cache=True, nogil=True)
def _flow_state(kind, q0, p0, E, om, ts, ldh, c, z0, d, m, t):
    """Position and momentum at time t of one trajectory."""
    if kind == KIND_FREE:
        return q0 + p0 * t / m, p0
    tau = t - ts
    s = om * abs(tau)
    z = z0 + d * _logu_of_s(s, ldh, c)
    p = math.sqrt(2.0 * m * E) * _pratio_of_s(s, c)
    return z, (p if tau >= 0.0 else -p)


@njit(cache=True, nogil=True)
def _crossings(kind, q0, p0, E, om, ts, ldh, u_tp, c, V, z0, d, m, y, t_max, t_out, v_out, drift):
    """Outgoing crossing time and speed at y; t_out = -1 when there is none."""
    for i in range(kind.size):
        t_out[i] = -1.0
        v_out[i] = 0.0
        drift[i] = 0.0
        if kind[i] == KIND_BOUND:
            continue
        if kind[i] == KIND_FREE:
            if p0[i] > 0.0 and y > q0[i]:
                tc = m * (y - q0[i]) / p0[i]
                if tc <= t_max:
                    t_out[i] = tc
                    v_out[i] = p0[i] / m
            continue
        s_y = _s_of_logu((y - z0) / d, ldh[i], u_tp[i])
        tc = ts[i] + s_y / om[i]
        if tc < 0.0 or tc > t_max:
            continue
        pr = _pratio_of_s(s_y, c[i])
        pc = math.sqrt(2.0 * m * E[i]) * pr
        t_out[i] = tc
        v_out[i] = pc / m
        xy = (y - z0) / d
        e1 = math.exp(-xy)
        H = pc * pc / (2.0 * m) + V * (e1 * e1 - 2.0 * e1)
        drift[i] = abs(H - E[i]) / E[i]


@njit(cache=True, nogil=True)
def _fill_slots(kind, q0, p0, E, om, ts, ldh, c, z0, d, m, lo_t, hi_t, closed_hi,
                t_axis, z_lo, dz, nz, counts):
    a = np.searchsorted(t_axis, lo_t, side="left")
    if closed_hi:
        b = np.searchsorted(t_axis, hi_t, side="right")
    else:
        b = np.searchsorted(t_axis, hi_t, side="left")
    for j in range(a, b):
        z, _ = _flow_state(kind, q0, p0, E, om, ts, ldh, c, z0, d, m, t_axis[j])
        ib = int(math.floor((z - z_lo) / dz))
        if ib < 0:
            ib = 0
        elif ib >= nz:
            ib = nz - 1
        counts[ib, j] += 1


@njit(cache=True, nogil=True)
def _histogram(kind, q0, p0, E, om, ts, ldh, u_tp, c, z0, d, m, z_lo, dz, nz, t_axis, counts):
    """Accumulate trajectory positions into (nz, nt) bins of width dz from z_lo."""
    z_hi = z_lo + nz * dz
    for i in range(kind.size):
        k = kind[i]
        if k == KIND_BOUND:
            continue
        if k == KIND_FREE:
            v = p0[i] / m
            if v == 0.0:
                if z_lo <= q0[i] < z_hi:
                    _fill_slots(k, q0[i], p0[i], E[i], 1.0, 0.0, 0.0, 0.0, z0, d, m,
                                -np.inf, np.inf, True, t_axis, z_lo, dz, nz, counts)
                continue
            ta = (z_lo - q0[i]) / v
            tb = (z_hi - q0[i]) / v
            _fill_slots(k, q0[i], p0[i], E[i], 1.0, 0.0, 0.0, 0.0, z0, d, m,
                        min(ta, tb), max(ta, tb), False, t_axis, z_lo, dz, nz, counts)
            continue
        z_tp = z0 + d * math.log(u_tp[i])
        if z_hi <= z_tp:
            continue
        s_hi = _s_of_logu((z_hi - z0) / d, ldh[i], u_tp[i])
        s_lo = 0.0
        if z_lo > z_tp:
            s_lo = _s_of_logu((z_lo - z0) / d, ldh[i], u_tp[i])
        w_hi = s_hi / om[i]
        w_lo = s_lo / om[i]
        # incoming branch (half-open at the turning point), then outgoing
        _fill_slots(k, q0[i], p0[i], E[i], om[i], ts[i], ldh[i], c[i], z0, d, m,
                    ts[i] - w_hi, ts[i] - w_lo, False, t_axis, z_lo, dz, nz, counts)
        _fill_slots(k, q0[i], p0[i], E[i], om[i], ts[i], ldh[i], c[i], z0, d, m,
                    ts[i] + w_lo, ts[i] + w_hi, True, t_axis, z_lo, dz, nz, counts)


# Numerical engine: Dormand-Prince 5(4) inside z_cut.

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_DP_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_DP_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@njit(cache=True)
def _force(z, V, d, z0):
    e1 = math.exp(-(z - z0) / d)
    return 2.0 * V / d * (e1 * e1 - e1)


@njit(cache=True)
def _hermite(t0, h, z0_, v0, z1, v1, t):
    th = (t - t0) / h
    h00 = (1 + 2 * th) * (1 - th) ** 2
    h10 = th * (1 - th) ** 2
    h01 = th * th * (3 - 2 * th)
    h11 = th * th * (th - 1)
    return h00 * z0_ + h10 * h * v0 + h01 * z1 + h11 * h * v1


@njit(cache=True)
def _dp45_wall(z_start, p_start, E, V, d, z0, m, z_cut, rtol, t_req, out_z, max_steps,
               A, B5, B4):
    """Integrate from (z_start, p_start) until z returns to z_cut moving outward.

    Returns (t_exit, z_min, max relative drift, status). Positions at the
    requested relative times ``t_req`` (sorted) are written to ``out_z``.
    """
    z = z_start
    p = p_start
    t = 0.0
    kmax = max(E, p * p / (2.0 * m))
    p_inf = math.sqrt(2.0 * m * E)
    h = 1e-3 * d / max(abs(p) / m, math.sqrt(2.0 * (E + V) / m))
    kz = np.zeros(7)
    kp = np.zeros(7)
    z_min = z
    drift = 0.0
    ireq = 0
    for _ in range(max_steps):
        kz[0] = p / m
        kp[0] = _force(z, V, d, z0)
        for st in range(1, 7):
            zz = z
            pp = p
            for j in range(st):
                zz += h * A[st, j] * kz[j]
                pp += h * A[st, j] * kp[j]
            kz[st] = pp / m
            kp[st] = _force(zz, V, d, z0)
        zn = z
        pn = p
        ez = 0.0
        ep = 0.0
        for j in range(7):
            zn += h * B5[j] * kz[j]
            pn += h * B5[j] * kp[j]
            ez += h * (B5[j] - B4[j]) * kz[j]
            ep += h * (B5[j] - B4[j]) * kp[j]
        sp = max(abs(p), abs(pn), p_inf)
        err = max(abs(ez) / (rtol * d), abs(ep) / (rtol * sp))
        if err > 1.0 or not math.isfinite(err):
            h *= max(0.2, 0.9 * err ** -0.2) if math.isfinite(err) else 0.2
            if h < 1e-14 * max(1.0, t):
                return t, z_min, drift, -2
            continue
        e1 = math.exp(-(zn - z0) / d)
        v_n = V * (e1 * e1 - 2.0 * e1)
        if v_n <= 0.0:
            # attractive side: E - V has no cancellation, so restore the shell
            pn = math.copysign(math.sqrt(2.0 * m * (E - v_n)), pn)
        vz0 = p / m
        vz1 = pn / m
        if p <= 0.0 < pn:
            # turning point inside the step: root of the momentum interpolant
            f0 = kp[0]
            f1 = _force(zn, V, d, z0)
            a, b = 0.0, h
            for _ in range(80):
                mid = 0.5 * (a + b)
                if _hermite(0.0, h, p, f0, pn, f1, mid) <= 0.0:
                    a = mid
                else:
                    b = mid
            z_min = min(z_min, _hermite(0.0, h, z, vz0, zn, vz1, 0.5 * (a + b)))
        while ireq < t_req.size and t_req[ireq] <= t + h:
            out_z[ireq] = _hermite(t, h, z, vz0, zn, vz1, t_req[ireq])
            ireq += 1
        if zn >= z_cut and pn > 0.0:
            # bisection on the Hermite interpolant for the exit time
            a, b = 0.0, h
            for _ in range(80):
                mid = 0.5 * (a + b)
                if _hermite(0.0, h, z, vz0, zn, vz1, mid) < z_cut:
                    a = mid
                else:
                    b = mid
            return t + 0.5 * (a + b), z_min, drift, 0
        t += h
        z = zn
        p = pn
        if z < z_min:
            z_min = z
        kin = p * p / (2.0 * m)
        kmax = max(kmax, kin)
        drift = max(drift, abs(kin + v_n - E) / kmax)
        h *= min(5.0, 0.9 * max(err, 1e-10) ** -0.2)
    return t, z_min, drift, -1


@dataclass
class TrajectoryResult:
    positions: np.ndarray
    energy: float
    crossing_time: float
    crossing_velocity: float
    z_min: float
    max_drift: float
    t_entry: float = 0.0
    t_exit: float = 0.0


def _integrate_one(params, q0, p0, t_events, cfg, y, E_ref):
    E = p0 * p0 / (2.0 * params.m) + float(morse.potential(params, q0)) if not params.is_free \
        else p0 * p0 / (2.0 * params.m)
    t_events = np.asarray(t_events, dtype=float)
    pos = np.full(t_events.size, np.nan)
    m = params.m
    if params.is_free or (p0 > 0 and q0 >= cfg.resolved_z_cut(params, E_ref)):
        pos[:] = q0 + p0 * t_events / m
        tc, vc = -1.0, 0.0
        if y is not None and p0 > 0 and y > q0:
            tc, vc = m * (y - q0) / p0, p0 / m
        return TrajectoryResult(pos, E, tc, vc, float(np.min(pos, initial=q0)), 0.0)
    if not E > 0:
        raise ValidationError("integrate engine needs a scattering trajectory (E > 0)")
    z_cut = cfg.resolved_z_cut(params, E_ref)
    p_free = math.sqrt(2.0 * m * E)
    if q0 > z_cut:
        t_in = m * (q0 - z_cut) / p_free
        z_in = z_cut
        p_in = -math.sqrt(2.0 * m * (E - float(morse.potential(params, z_cut))))
    else:
        t_in, z_in, p_in = 0.0, q0, p0
    early = t_events < t_in
    pos[early] = q0 - p_free * t_events[early] / m
    rel = t_events[~early] - t_in
    rtol = 1e-10
    while True:
        out = np.full(rel.size, np.nan)
        t_wall, z_min, drift, status = _dp45_wall(
            z_in, p_in, E, params.V, params.d, params.z0, m, z_cut, rtol, rel, out,
            50_000_000, _DP_A, _DP_B5, _DP_B4,
        )
        if status != 0:
            raise IntegrationError(f"wall integration failed with status {status}")
        if drift <= cfg.energy_tolerance:
            break
        rtol /= 10.0
        if rtol < 1e-14:
            raise EnergyDriftError(f"energy drift {drift:.3g} above {cfg.energy_tolerance}")
    t_out = t_in + t_wall
    # beyond z_cut the motion is free at the asymptotic momentum
    p_out = p_free
    inside = ~early
    late = t_events > t_out
    vals = out.copy()
    sel = late[inside]
    vals[sel] = z_cut + p_out * (t_events[inside][sel] - t_out) / m
    pos[inside] = vals
    tc, vc = -1.0, 0.0
    if y is not None and y > z_cut:
        tc = t_out + m * (y - z_cut) / p_out
        vc = p_out / m
    return TrajectoryResult(pos, E, tc, vc, z_min, drift, t_in, t_out)


def evolve_trajectory(params, sample, t_events, cfg=None, y=None, reference_energy=None):
    """Evolve a single phase-space point and report positions at ``t_events``.

    ``y`` optionally requests the outgoing crossing time and speed at that
    position (``crossing_time`` is -1 when there is none).
    """
    cfg = cfg or EnsembleConfig(n_traj=1000)
    q0, p0 = float(sample.q), float(sample.p)
    t_events = np.atleast_1d(np.asarray(t_events, dtype=float))
    if cfg.engine == "integrate":
        E_ref = reference_energy or max(p0 * p0 / (2.0 * params.m), 1e-300)
        return _integrate_one(params, q0, p0, t_events, cfg, y, E_ref)
    fl = _Flow(params, np.array([q0]), np.array([p0]))
    k = int(fl.kind[0])
    if k == KIND_BOUND:
        raise ValidationError("trajectory is bound (E <= 0)")
    pos = np.empty(t_events.size)
    for j, t in enumerate(t_events):
        pos[j], _ = _flow_state(
            k, q0, p0, fl.energy[0], fl.omega[0], fl.t_star[0], fl.log_dhalf[0], fl.c[0],
            params.z0, params.d, params.m, t,
        )
    tc, vc, dr = -1.0, 0.0, 0.0
    if y is not None:
        t_o, v_o, d_o = np.empty(1), np.empty(1), np.empty(1)
        _crossings(fl.kind, fl.q0, fl.p0, fl.energy, fl.omega, fl.t_star, fl.log_dhalf,
                   fl.u_tp, fl.c, params.V, params.z0, params.d, params.m, float(y), np.inf,
                   t_o, v_o, d_o)
        tc, vc, dr = float(t_o[0]), float(v_o[0]), float(d_o[0])
    if k == KIND_FREE:
        z_min = float(q0 if p0 >= 0 else -np.inf)
    else:
        z_min = params.z0 + params.d * math.log(fl.u_tp[0])
    return TrajectoryResult(pos, float(fl.energy[0]), tc, vc, z_min, dr)


# Ensemble drivers.


def _map_chunks(state, cfg, hbar, fn):
    idx = range(_chunk_count(cfg.n_traj))

    def work(i):
        q, p = _sample_chunk(state, cfg, i, hbar)
        return fn(q, p)

    if cfg.workers <= 1:
        return [work(i) for i in idx]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(work, idx))


def histogram_counts(params, state, cfg, z_lo, dz, nz, t_axis):
    """Raw trajectory counts in nz bins of width dz starting at z_lo.

    Returns an int64 array of shape (nz, len(t_axis)). Bound trajectories
    (E <= 0) are skipped.
    """
    t_axis = np.ascontiguousarray(t_axis, dtype=float)
    if np.any(np.diff(t_axis) <= 0):
        raise ValidationError("t_axis must be strictly increasing")

    def fn(q, p):
        fl = _Flow(params, q, p)
        counts = np.zeros((nz, t_axis.size), np.int64)
        _histogram(fl.kind, q, p, fl.energy, fl.omega, fl.t_star, fl.log_dhalf, fl.u_tp,
                   fl.c, params.z0, params.d, params.m, float(z_lo), float(dz), int(nz),
                   t_axis, counts)
        return counts

    total = np.zeros((nz, t_axis.size), np.int64)
    for part in _map_chunks(state, cfg, params.hbar, fn):
        total += part
    return total


def density_grid(params, state, cfg, z_axis, t_axis, normalize="slice"):
    """Histogrammed Wigner density on a uniform z axis (bin centres).

    ``normalize='slice'`` scales each time slice to unit integral over the
    z window; ``'ensemble'`` divides by n_traj dz instead, so that the t = 0
    slice estimates |<z|Phi>|^2.
    """
    z_axis = np.asarray(z_axis, dtype=float)
    if z_axis.size < 2:
        raise ValidationError("z_axis needs at least two points")
    dz = (z_axis[-1] - z_axis[0]) / (z_axis.size - 1)
    if not np.allclose(np.diff(z_axis), dz, rtol=1e-9, atol=0):
        raise ValidationError("density_grid needs a uniform z axis")
    counts = histogram_counts(params, state, cfg, z_axis[0] - 0.5 * dz, dz, z_axis.size, t_axis)
    vals = counts.astype(float)
    if normalize == "slice":
        sums = vals.sum(axis=0)
        vals = np.divide(vals, sums * dz, out=np.zeros_like(vals), where=sums > 0)
    elif normalize == "ensemble":
        vals /= cfg.n_traj * dz
    else:
        raise ValidationError(f"unknown normalization {normalize!r}")
    return SpaceTimeDensity(z_axis, t_axis, vals, Provenance.WIGNER)


@dataclass(frozen=True)
class WignerFlightTime:
    mean: float
    stderr: float
    n_crossed: int
    n_missed: int
    max_drift: float
    plain_mean: float
    plain_stderr: float
    control_variate: bool


def _inverse_momentum_moments(state, hbar):
    """E[1/|p|] and E[1/p^2] for |p| ~ N(p_i, hbar^2 gamma / 2)."""
    sig = math.sqrt(state.momentum_variance(hbar))
    if state.p_i < 8.0 * sig:
        raise ValidationError("control variate needs p_i > 8 momentum standard deviations")
    x, w = np.polynomial.hermite_e.hermegauss(160)
    w = w / math.sqrt(2.0 * math.pi)
    p = state.p_i + sig * x
    return float(np.sum(w / p)), float(np.sum(w / p**2))


def _jackknife(S0, S1, S2, offset):
    """Grouped jackknife of S1/S0 - S2/S0 + offset over block sums."""
    nb = S0.size
    G = min(JACKKNIFE_GROUPS, nb)
    edges = np.linspace(0, nb, G + 1).astype(int)
    g0 = np.add.reduceat(S0, edges[:-1])
    g1 = np.add.reduceat(S1, edges[:-1])
    g2 = np.add.reduceat(S2, edges[:-1])
    T0, T1, T2 = S0.sum(), S1.sum(), S2.sum()
    theta = (T1 - T2) / T0 + offset
    loo = (T1 - g1 - (T2 - g2)) / (T0 - g0) + offset
    err = math.sqrt((G - 1) / G * float(np.sum((loo - loo.mean()) ** 2)))
    return float(theta), err


def mean_flight_time_w(params, state, cfg, y=None, control_variate=False):
    """Classical Wigner mean flight time to ``y`` (default 2 z_i).

    Each trajectory contributes its outgoing crossing time t_c with weight
    1/|v_c|, the crossing form of the time integral of delta(q_t - y). With
    ``control_variate`` the free-flight time of each sample, whose ensemble
    average is known in closed form, is subtracted to cancel most of the
    sampling noise.
    """
    y = 2.0 * state.z_i if y is None else float(y)
    m = params.m
    if params.is_free:
        tp_len = 0.0
    else:
        tp_len = 2.0 * abs(float(morse.turning_point(params, state.energy(m))))
    t_max = np.inf if cfg.t_max is None else float(cfg.t_max)

    def fn(q, p):
        n = q.size
        if cfg.engine == "integrate":
            t_c = np.empty(n)
            v_c = np.empty(n)
            drift = np.empty(n)
            E_ref = state.energy(m)
            for i in range(n):
                r = _integrate_one(params, q[i], p[i], np.empty(0), cfg, y, E_ref)
                t_c[i], v_c[i], drift[i] = r.crossing_time, r.crossing_velocity, r.max_drift
        else:
            fl = _Flow(params, q, p)
            t_c, v_c, drift = np.empty(n), np.empty(n), np.empty(n)
            _crossings(fl.kind, q, p, fl.energy, fl.omega, fl.t_star, fl.log_dhalf, fl.u_tp,
                       fl.c, params.V, params.z0, params.d, m, y, t_max, t_c, v_c, drift)
        ok = t_c >= 0
        w = np.where(ok, 1.0 / np.where(ok, np.abs(v_c), 1.0), 0.0)
        t_f = m * (q + y + tp_len) / np.abs(p)
        pad = (-n) % BLOCK
        blocks = []
        for arr in (w, w * np.where(ok, t_c, 0.0), w * t_f):
            blocks.append(np.concatenate([arr, np.zeros(pad)]).reshape(-1, BLOCK).sum(axis=1))
        return blocks, int(np.count_nonzero(~ok)), float(np.max(drift, initial=0.0))

    parts = _map_chunks(state, cfg, params.hbar, fn)
    S0 = np.concatenate([b[0][0] for b in parts])
    S1 = np.concatenate([b[0][1] for b in parts])
    S2 = np.concatenate([b[0][2] for b in parts])
    missed = sum(b[1] for b in parts)
    drift = max(b[2] for b in parts)
    if missed > MAX_MISS_FRACTION * cfg.n_traj:
        raise NoCrossingError(f"{missed} of {cfg.n_traj} trajectories never reached y={y:.9g}")
    if drift > cfg.energy_tolerance:
        raise EnergyDriftError(f"energy drift {drift:.3g} above {cfg.energy_tolerance}")
    plain, plain_err = _jackknife(S0, S1, np.zeros_like(S2), 0.0)
    if control_variate:
        inv1, inv2 = _inverse_momentum_moments(state, params.hbar)
        exact = m * (state.z_i + y + tp_len) * inv2 / inv1
        mean, err = _jackknife(S0, S1, S2, exact)
    else:
        mean, err = plain, plain_err
    return WignerFlightTime(
        mean, err, cfg.n_traj - missed, missed, drift, plain, plain_err, control_variate
    )


def mean_flight_time_w_histogram(params, state, cfg, y, t_axis, width):
    """<t>_W from the time histogram of trajectories inside [y - w/2, y + w/2].

    This is the direct discretization of the delta(q_t - y) time integral,
    independent of the crossing-weight estimator.
    """
    counts = histogram_counts(params, state, cfg, y - 0.5 * width, width, 1, t_axis)[0]
    t = np.asarray(t_axis, dtype=float)
    return float(np.sum(t * counts) / np.sum(counts))
