"""Canned reproduction drivers for the reflection, badlands, density and
flight-time studies.

Each preset writes into ``<root>/<preset id>/``: CSV tables, binary density
grids, the resolved ``config.ini`` and a ``summary.txt`` listing every
compared number with its reference, tolerance and pass/fail flag. The root
is the ``out_dir`` config value unless the ``QTHRESHOLD_OUT`` environment
variable is set.
"""

import configparser
import csv
import dataclasses
import enum
import logging
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import cwigner, morse, qdyn
from .config import RunConfig
from .errors import ValidationError
from .packet import CoherentState, free_flight_time

log = logging.getLogger(__name__)

OUT_ENV = "QTHRESHOLD_OUT"


class PresetId(enum.Enum):
    FIG1 = "Fig1"
    FIG2 = "Fig2"
    FIG3 = "Fig3"
    FIG4 = "Fig4"
    FIG5 = "Fig5"
    TABLE1 = "Table1"


@dataclass(frozen=True)
class TableRow:
    """One flight-time row: initial state and the reference values."""

    E_i: float
    p_i: float
    z_i: float
    gamma: float
    z_tp: float
    t_free: float
    t_qm: float
    t_w: float

    def state(self):
        return CoherentState(self.z_i, self.p_i, self.gamma)


TABLE1 = (
    TableRow(5e-1, 1.0, 1e2, 1e-2, -0.7996422, 3.0159928e2, 3.0271643e2, 3.0247033e2),
    TableRow(5e-3, 1e-1, 1e3, 1e-4, -0.6942948, 3.0013888e4, 3.0353657e4, 3.0199008e4),
    TableRow(5e-5, 1e-2, 1e4, 1e-6, -0.6931597, 3.0001386e6, 3.0325289e6, 3.0273962e6),
    TableRow(5e-7, 1e-3, 1e5, 1e-8, -0.6931473, 3.0000139e8, 3.0309571e8, 3.0289827e8),
    TableRow(5e-9, 1e-4, 1e6, 1e-10, -0.6931472, 3.0000014e10, 3.0307969e10, 3.0292251e10),
)

# Reference peak positions of |Q| and their tolerance.
BADLANDS_REFERENCE = {5e-5: 11.5, 5e-9: 20.7}
BADLANDS_TOL = 0.3
SLOPE_REFERENCE = -17.626


@dataclass(frozen=True)
class ExperimentPreset:
    id: PresetId
    description: str
    row: TableRow = None
    inflection_time: float = None

    def base_config(self):
        if self.row is None:
            return RunConfig()
        return RunConfig(p_i=self.row.p_i, z_i=self.row.z_i, gamma=self.row.gamma)


PRESETS = {
    PresetId.FIG1: ExperimentPreset(PresetId.FIG1, "Im R(k) near threshold"),
    PresetId.FIG2: ExperimentPreset(PresetId.FIG2, "badlands function |Q(z)|"),
    PresetId.FIG3: ExperimentPreset(PresetId.FIG3, "densities at E_i = 0.5", TABLE1[0]),
    PresetId.FIG4: ExperimentPreset(PresetId.FIG4, "densities at E_i = 5e-5", TABLE1[2], 1e6),
    PresetId.FIG5: ExperimentPreset(PresetId.FIG5, "densities at E_i = 5e-9", TABLE1[4], 1e10),
    PresetId.TABLE1: ExperimentPreset(PresetId.TABLE1, "mean flight times"),
}


def get_preset(name):
    try:
        return PRESETS[PresetId(name)]
    except ValueError:
        valid = ", ".join(p.value for p in PresetId)
        raise ValidationError(f"unknown preset {name!r} (choose from {valid})") from None


# ---------------------------------------------------------------- records


@dataclass(frozen=True)
class Quantity:
    """A compared number; ``criterion`` is 'abs', 'rel', '<', '>' or 'factor'.

    For '<' and '>' the reference is the bound. For 'factor' the achieved
    value must lie within ``tolerance`` times the reference either way.
    """

    name: str
    reference: float
    achieved: float
    tolerance: float
    criterion: str

    @property
    def deviation(self):
        if self.criterion == "rel":
            return (self.achieved - self.reference) / abs(self.reference)
        if self.criterion == "factor":
            return self.achieved / self.reference
        return self.achieved - self.reference

    @property
    def passed(self):
        if not math.isfinite(self.achieved):
            return False
        if self.criterion in ("abs", "rel"):
            return abs(self.deviation) <= self.tolerance
        if self.criterion == "<":
            return self.achieved < self.reference
        if self.criterion == ">":
            return self.achieved > self.reference
        if self.criterion == "factor":
            return 1.0 / self.tolerance <= self.deviation <= self.tolerance
        raise ValueError(self.criterion)


@dataclass(frozen=True)
class FlightTimeReport:
    E_i: float
    p_i: float
    z_i: float
    gamma: float
    z_tp: float
    t_free: float
    t_qm: float
    t_w: float
    t_w_stderr: float

    COLUMNS = ("E_i", "minus_p_i", "z_i", "Gamma", "z_TP", "t_free", "t_QM", "t_W", "t_W_stderr")

    def values(self):
        return (self.E_i, -self.p_i, self.z_i, self.gamma, self.z_tp, self.t_free,
                self.t_qm, self.t_w, self.t_w_stderr)


def write_flight_times(path, reports, append=False):
    """Write (or append) report rows; the header is written for new files."""
    new = not append or not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(FlightTimeReport.COLUMNS)
        for r in reports:
            w.writerow([f"{v:.9g}" for v in r.values()])


def read_flight_times(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    out = []
    for row in rows[1:]:
        v = [float(x) for x in row]
        out.append(FlightTimeReport(v[0], -v[1], *v[2:]))
    return out


@dataclass
class RunResult:
    preset: PresetId
    directory: str
    config: RunConfig
    quantities: list
    files: list
    status: str = "OK"
    wall_clock: float = 0.0
    info: dict = dataclasses.field(default_factory=dict)

    @property
    def passed(self):
        return self.status == "OK" and all(q.passed for q in self.quantities)


def write_table(path, header, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([f"{v:.9g}" for v in row])


def write_summary(path, result, error=None):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["run"] = {
        "preset": result.preset.value,
        "status": result.status,
        "seed": str(result.config.seed),
        "wall_clock_s": f"{result.wall_clock:.3f}",
        "all_passed": str(result.passed).lower(),
    }
    if error is not None:
        cp["run"]["error"] = f"{type(error).__name__}: {error}".replace("\n", " ")
    resolved = configparser.ConfigParser(interpolation=None)
    resolved.optionxform = str
    resolved.read_string(result.config.to_ini())
    for sec in resolved.sections():
        cp[f"config.{sec}"] = dict(resolved[sec])
    if result.info:
        cp["info"] = {k: f"{v:.9g}" if isinstance(v, float) else str(v)
                      for k, v in result.info.items()}
    for q in result.quantities:
        cp[f"quantity.{q.name}"] = {
            "reference": f"{q.reference:.9g}",
            "achieved": f"{q.achieved:.9g}",
            "criterion": q.criterion,
            "tolerance": f"{q.tolerance:.9g}",
            "deviation": f"{q.deviation:.9g}",
            "pass": str(q.passed).lower(),
        }
    with open(path, "w", newline="\n") as fh:
        cp.write(fh)


def read_summary(path):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read(path)
    return cp


# ---------------------------------------------------------------- building blocks


def params_of(cfg):
    return morse.MorseParams(V=cfg.V, d=cfg.d, z0=cfg.z0, m=cfg.m, hbar=cfg.hbar)


def state_of(cfg):
    return CoherentState(z_i=cfg.z_i, p_i=cfg.p_i, gamma=cfg.gamma)


def ensemble_of(cfg, t_max=None):
    return cwigner.EnsembleConfig(
        n_traj=cfg.n_traj, seed=cfg.seed, energy_tolerance=cfg.energy_tolerance,
        threads=cfg.threads, engine=cfg.engine, t_max=t_max,
    )


def kgrid_of(cfg, state):
    return qdyn.KGrid.for_state(state, cfg.hbar, n=cfg.n_k)


def time_axis(cfg, params, state):
    t_max = cfg.t_max or 2.2 * free_flight_time(params, state, cfg.detector)
    return np.linspace(0.0, t_max, cfg.nt)


def full_z_axis(cfg, params, state):
    return np.linspace(params.z0 - 3.0 * params.d, 2.0 * state.z_i, cfg.nz)


def zoom_z_axis(cfg, params, state):
    k = state.p_i / params.hbar
    z_tp = float(morse.turning_point(params, state.energy(params.m)))
    hi = max(params.z0 + 10.0 * params.d, z_tp + 2.0 * math.pi / k)
    return np.linspace(params.z0 - 3.0 * params.d, hi, cfg.nz)


def flight_time_row(cfg, threads=None):
    """Turning point plus the free, quantum and Wigner flight times for ``cfg``."""
    params, state = params_of(cfg), state_of(cfg)
    y = cfg.detector
    E = state.energy(params.m)
    qm = qdyn.mean_flight_time_qm(params, state, y, kgrid=kgrid_of(cfg, state),
                                  n_t=cfg.n_t_flight)
    w = cwigner.mean_flight_time_w(params, state, ensemble_of(cfg), y,
                                   control_variate=cfg.control_variate)
    return FlightTimeReport(
        E_i=E, p_i=state.p_i, z_i=state.z_i, gamma=state.gamma,
        z_tp=float(morse.turning_point(params, E)),
        t_free=float(free_flight_time(params, state, y)),
        t_qm=qm.mean, t_w=w.mean, t_w_stderr=w.stderr,
    )


def local_extrema_contrast(profile, floor=1e-2):
    """Number of local maxima above ``floor`` max whose contrast to the
    neighbouring minima exceeds 0.5, and the largest contrast found."""
    f = np.asarray(profile, dtype=float)
    top = f.max()
    if top <= 0:
        return 0, 0.0
    inner = np.arange(1, f.size - 1)
    is_max = (f[1:-1] > f[:-2]) & (f[1:-1] >= f[2:])
    is_min = (f[1:-1] < f[:-2]) & (f[1:-1] <= f[2:])
    maxima = inner[is_max & (f[1:-1] > floor * top)]
    minima = inner[is_min]
    count, best = 0, 0.0
    for i in maxima:
        left = minima[minima < i]
        right = minima[minima > i]
        lows = [f[left[-1]]] if left.size else []
        lows += [f[right[0]]] if right.size else []
        if not lows:
            continue
        low = max(lows)
        c = (f[i] - low) / (f[i] + low)
        best = max(best, c)
        count += c > 0.5
    return int(count), float(best)


def first_maximum(z, profile):
    f = np.asarray(profile, dtype=float)
    is_max = (f[1:-1] > f[:-2]) & (f[1:-1] >= f[2:])
    idx = np.nonzero(is_max)[0]
    if idx.size == 0:
        return math.nan
    i = idx[0] + 1
    # parabolic refinement on the three grid points
    a, b, c = f[i - 1], f[i], f[i + 1]
    den = a - 2.0 * b + c
    shift = 0.5 * (a - c) / den if den != 0 else 0.0
    return float(z[i] + shift * (z[1] - z[0]))


def wigner_badlands_ratio(params, state, ens, z_bf, t_axis, half_width=6):
    """Wigner occupancy (summed over t) of the unit bin around z_BF divided by
    the mean of the neighbouring unit bins."""
    nz = 2 * half_width + 1
    counts = cwigner.histogram_counts(params, state, ens, z_bf - half_width - 0.5, 1.0, nz,
                                      t_axis).sum(axis=1)
    neighbours = np.delete(counts, half_width).astype(float)
    return float(counts[half_width] / neighbours.mean()), counts


# ---------------------------------------------------------------- presets


def _fig1(cfg, out, res):
    params = params_of(cfg)
    k = np.linspace(-0.5, 0.5, 2001)
    R = morse.reflection_amplitude(params, k)
    path = os.path.join(out, "reflection.csv")
    write_table(path, ("k", "Re_R", "Im_R"), (k, R.real, R.imag))
    res.files.append(path)
    slope = morse.threshold_slope(params)
    res.quantities.append(Quantity("threshold_slope", SLOPE_REFERENCE, slope, 5e-3, "rel"))
    ks = np.geomspace(1e-6, 10.0, 2000)
    dev = float(np.max(np.abs(np.abs(morse.reflection_amplitude(params, ks)) - 1.0)))
    res.quantities.append(Quantity("unitarity_max_dev", 0.0, dev, 1e-12, "abs"))
    res.info["slope_expansion"] = morse.threshold_slope_expansion(params)
    res.info["linearity_window_1pct"] = morse.threshold_linearity_window(params, 1e-2)


def _fig2(cfg, out, res):
    params = params_of(cfg)
    energies = [r.E_i for r in TABLE1]
    z_lo = float(morse.turning_point(params, min(energies))) + 1e-3 * params.d
    z = np.linspace(z_lo, params.z0 + 40.0 * params.d, cfg.nz)
    curves = [np.abs(morse.badlands(params, z, E)) for E in energies]
    path = os.path.join(out, "badlands.csv")
    write_table(path, ("z", *(f"absQ_E{E:.0e}" for E in energies)), (z, *curves))
    res.files.append(path)
    peaks = [morse.badlands_peak(params, E) for E in energies]
    path = os.path.join(out, "badlands_peaks.csv")
    write_table(path, ("E_i", "z_BF", "absQ_max"),
                (energies, [p.z_bf for p in peaks], [p.qmax for p in peaks]))
    res.files.append(path)
    for E, p in zip(energies, peaks):
        if E in BADLANDS_REFERENCE:
            res.quantities.append(
                Quantity(f"z_BF_E{E:.0e}", BADLANDS_REFERENCE[E], p.z_bf, BADLANDS_TOL, "abs")
            )
        else:
            res.info[f"z_BF_E{E:.0e}"] = p.z_bf


def _density_preset(cfg, out, res, preset):
    params, state = params_of(cfg), state_of(cfg)
    ens = ensemble_of(cfg)
    kgrid = kgrid_of(cfg, state)
    E = state.energy(params.m)
    k_i = state.p_i / params.hbar
    z_tp = float(morse.turning_point(params, E))
    t = time_axis(cfg, params, state)
    res.info["t_max"] = float(t[-1])
    res.info["z_TP"] = z_tp
    grids = {}
    for tag, z in (("", full_z_axis(cfg, params, state)), ("_zoom", zoom_z_axis(cfg, params, state))):
        log.info("quantum grid%s", tag)
        dq = qdyn.propagate(params, state, z, t, kgrid, spot_check=cfg.spot_check,
                            threads=cfg.threads or 1, seed=cfg.seed)
        log.info("wigner grid%s", tag)
        dw = cwigner.density_grid(params, state, ens, z, t)
        for name, d in ((f"density{tag}", dq), (f"wigner{tag}", dw)):
            path = os.path.join(out, f"{name}.qtrd")
            d.write_binary(path)
            res.files.append(path)
            grids[name] = d

    if preset.inflection_time is None:
        # bounce: time of the largest quantum density at the turning point
        dz = grids["density_zoom"]
        it = int(np.argmax(dz.row(z_tp)))
        t_b = float(dz.t_axis[it])
        res.info["t_bounce"] = t_b
        q_slice = dz.values[:, it]
        forbidden = dz.z_axis < z_tp
        res.quantities.append(Quantity(
            "penetration_below_z_TP", 1e-6, float(q_slice[forbidden].max() / dz.values.max()),
            0.0, ">",
        ))
        full_q = grids["density"].values[:, it]
        full_w = grids["wigner"].values[:, it]
        nq, cq = local_extrema_contrast(full_q)
        nw, cw = local_extrema_contrast(full_w)
        res.info.update(quantum_maxima=nq, quantum_contrast=cq, wigner_contrast=cw)
        path = os.path.join(out, "bounce_slice.csv")
        write_table(path, ("z", "quantum", "wigner"), (grids["density"].z_axis, full_q, full_w))
        res.files.append(path)
        return

    z_bf = morse.badlands_peak(params, E).z_bf
    res.info["z_BF"] = z_bf
    row = qdyn.correlation_at(params, state, z_bf, t, kgrid)
    ratio = float(row.max() / grids["density"].values.max())
    res.quantities.append(Quantity("quantum_density_at_z_BF", 1e-6, ratio, 0.0, "<"))
    z_fine = zoom_z_axis(cfg, params, state)
    prof = np.abs(qdyn.amplitude_grid(params, state, kgrid, z_fine, [preset.inflection_time],
                                      threads=cfg.threads or 1)[0]) ** 2
    path = os.path.join(out, "inflection_slice.csv")
    write_table(path, ("z", "quantum"), (z_fine, prof))
    res.files.append(path)
    z_peak = first_maximum(z_fine, prof)
    res.quantities.append(Quantity(
        "first_maximum_minus_z_TP", math.pi / (2.0 * k_i), z_peak - z_tp, 0.05, "rel"
    ))
    w_ratio, _ = wigner_badlands_ratio(params, state, ens, z_bf, t)
    res.quantities.append(Quantity("wigner_density_ratio_at_z_BF", 1.0, w_ratio, 2.0, "factor"))


def _table1(cfg, out, res, rows):
    reports = []
    for i in rows:
        row = TABLE1[i - 1]
        rc = cfg.replace(p_i=row.p_i, z_i=row.z_i, gamma=row.gamma)
        log.info("flight-time row %d", i)
        rep = flight_time_row(rc)
        reports.append(rep)
        w_tol = max(5e-3, 5.0 * rep.t_w_stderr / row.t_w)
        res.quantities += [
            Quantity(f"z_TP.row{i}", row.z_tp, rep.z_tp, 1e-6, "abs"),
            Quantity(f"t_free.row{i}", row.t_free, rep.t_free, 5e-8, "rel"),
            Quantity(f"t_QM.row{i}", row.t_qm, rep.t_qm, 5e-3, "rel"),
            Quantity(f"t_W.row{i}", row.t_w, rep.t_w, w_tol, "rel"),
            Quantity(f"ordering_free_W.row{i}", rep.t_w, rep.t_free, 0.0, "<"),
            Quantity(f"ordering_W_QM.row{i}", rep.t_qm, rep.t_w, 0.0, "<"),
        ]
        if cfg.check_convergence:
            state = row.state()
            params = params_of(rc)
            *_, rel = qdyn.flight_time_convergence(
                params, state, rc.detector, kgrid_of(rc, state), n_t=rc.n_t_flight
            )
            res.quantities.append(Quantity(f"t_QM_convergence.row{i}", 0.0, rel, 1e-4, "abs"))
    path = os.path.join(out, "table1.csv")
    write_flight_times(path, reports)
    res.files.append(path)


def output_root(cfg, out_root=None):
    return out_root or os.environ.get(OUT_ENV) or cfg.out_dir


def run(preset, overrides=None, out_root=None, rows=(1, 2, 3, 4, 5)):
    """Run a preset and write its artifacts; returns a :class:`RunResult`.

    ``overrides`` is a mapping of :class:`RunConfig` keys or a full
    RunConfig. For ``Table1`` the state keys are taken from each row.
    On failure the summary is written with status FAILED before the
    exception propagates.
    """
    if isinstance(preset, (str, PresetId)):
        preset = get_preset(preset if isinstance(preset, str) else preset.value)
    if isinstance(overrides, RunConfig):
        cfg = overrides
    else:
        cfg = preset.base_config().replace(**dict(overrides or {}))
    out = os.path.join(output_root(cfg, out_root), preset.id.value)
    os.makedirs(out, exist_ok=True)
    res = RunResult(preset.id, out, cfg, [], [])
    cfg.write(os.path.join(out, "config.ini"))
    start = time.perf_counter()
    try:
        if preset.id is PresetId.FIG1:
            _fig1(cfg, out, res)
        elif preset.id is PresetId.FIG2:
            _fig2(cfg, out, res)
        elif preset.id is PresetId.TABLE1:
            _table1(cfg, out, res, rows)
        else:
            _density_preset(cfg, out, res, preset)
    except Exception as exc:
        res.status = "FAILED"
        res.wall_clock = time.perf_counter() - start
        write_summary(os.path.join(out, "summary.txt"), res, exc)
        raise
    res.wall_clock = time.perf_counter() - start
    write_summary(os.path.join(out, "summary.txt"), res)
    return res
