"""Command-line front end.

Subcommands::

    reflect       R(k) sweep of the Morse potential (CSV)
    badlands      |Q| peak positions, optionally the full curves (CSV)
    senn          reflection from a built-in or tabulated potential (CSV)
    propagate     quantum space-time density grid
    wigner        classical Wigner space-time density grid
    flight-times  flight-time table rows
    reproduce     run the canned presets

Settings come from built-in defaults, then ``--config FILE`` (INI sections
morse, state, grid, ensemble, run), then ``--set key=value`` and the
dedicated flags. Commands that write a directory also write the resolved
``config.ini``, which can be passed back with ``--config``.

Potential files for ``senn --table`` hold two columns ``x, V`` separated
by commas or whitespace; ``#`` starts a comment. Add ``--wall`` when the
potential rises without bound on the right.

Exit status: 0 on success, 1 on invalid input, 2 on numerical failure.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import cwigner, experiments, morse, qdyn, senn
from .config import RunConfig
from .errors import NumericalError, QThresholdError, ValidationError

log = logging.getLogger("qthreshold")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _common(p, config=True):
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--output", "-o", help="output file (CSV commands) or directory")
    if config:
        p.add_argument("--config", help="INI file with run settings")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (repeatable)")
        p.add_argument("--threads", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--n-traj", type=int, dest="n_traj")
        p.add_argument("--n-k", type=int, dest="n_k")


def _morse_flags(p):
    for name in ("V", "d", "z0"):
        p.add_argument(f"--{name}", type=float)


def build_parser():
    ap = _Parser(prog="qthreshold", description="Quantum threshold reflection toolkit.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("reflect", help="Morse reflection amplitude sweep")
    _common(p)
    _morse_flags(p)
    p.add_argument("--k-min", type=float, default=1e-4)
    p.add_argument("--k-max", type=float, default=1e-2)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--linear", action="store_true", help="linear instead of log spacing")

    p = sub.add_parser("badlands", help="badlands function peaks and curves")
    _common(p)
    _morse_flags(p)
    p.add_argument("--energy", type=float, action="append",
                   help="energy (repeatable); default the flight-table energies")
    p.add_argument("--curves", action="store_true", help="write |Q(z)| instead of peaks")
    p.add_argument("--z-max", type=float, default=40.0)
    p.add_argument("--n", type=int, default=2000)

    p = sub.add_parser("senn", help="reflection for a general potential")
    _common(p, config=False)
    p.add_argument("--potential", choices=[*senn.BUILTINS, "morse"], default=None)
    p.add_argument("--table", help="two-column x,V file")
    p.add_argument("--wall", action="store_true", help="table potential is a right wall")
    for name in ("V0", "a", "V1", "sigma", "xi"):
        p.add_argument(f"--{name}", type=float)
    _morse_flags(p)
    p.add_argument("--k", type=float, action="append", required=False)
    p.add_argument("--threshold", action="store_true", help="report the k -> 0 limit")
    p.add_argument("--w-threshold", type=float, default=1e-8)

    for name, text in (("propagate", "quantum density grid"), ("wigner", "Wigner density grid")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--zoom", action="store_true", help="use the near-wall z window")
        p.add_argument("--csv", action="store_true", help="also write the grid as CSV")

    p = sub.add_parser("flight-times", help="mean flight times")
    _common(p)
    p.add_argument("--row", type=int, action="append",
                   help="table row 1-5 (repeatable); default uses the configured state")
    p.add_argument("--append", action="store_true", help="append to an existing CSV")

    p = sub.add_parser("reproduce", help="run presets")
    _common(p)
    p.add_argument("--preset", action="append",
                   choices=[x.value for x in experiments.PresetId])
    return ap


def _resolve(args, base=None):
    cfg = base or RunConfig()
    if args.config:
        cfg = RunConfig.read(args.config, base=cfg)
    changes = {}
    for item in args.set:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        changes[key.strip()] = val.strip()
    for key in ("threads", "seed", "n_traj", "n_k", "V", "d", "z0"):
        val = getattr(args, key, None)
        if val is not None:
            changes[key] = val
    return cfg.replace(**changes)


def _emit_csv(args, header, columns):
    out = args.output
    if out:
        experiments.write_table(out, header, columns)
        return
    print(",".join(header))
    for row in zip(*columns):
        print(",".join(f"{v:.9g}" for v in row))


def _out_dir(args, cfg, name):
    path = args.output or os.path.join(experiments.output_root(cfg), name)
    os.makedirs(path, exist_ok=True)
    cfg.write(os.path.join(path, "config.ini"))
    return path


def cmd_reflect(args):
    cfg = _resolve(args)
    params = experiments.params_of(cfg)
    if not (args.k_max > args.k_min and args.n >= 2):
        raise ValidationError("need k-max > k-min and n >= 2")
    if args.linear:
        k = np.linspace(args.k_min, args.k_max, args.n)
    else:
        if args.k_min <= 0:
            raise ValidationError("k-min must be positive for log spacing")
        k = np.geomspace(args.k_min, args.k_max, args.n)
    R = morse.reflection_amplitude(params, k)
    _emit_csv(args, ("k", "Re_R", "Im_R", "abs_R"), (k, R.real, R.imag, np.abs(R)))


def cmd_badlands(args):
    cfg = _resolve(args)
    params = experiments.params_of(cfg)
    energies = args.energy or [r.E_i for r in experiments.TABLE1]
    if args.curves:
        z_lo = float(morse.turning_point(params, min(energies))) + 1e-3 * params.d
        z = np.linspace(z_lo, params.z0 + args.z_max * params.d, args.n)
        cols = [np.abs(morse.badlands(params, z, E)) for E in energies]
        _emit_csv(args, ("z", *(f"absQ_E{E:.9g}" for E in energies)), (z, *cols))
        return
    peaks = [morse.badlands_peak(params, E) for E in energies]
    tps = [float(morse.turning_point(params, E)) for E in energies]
    _emit_csv(args, ("E", "z_TP", "z_BF", "absQ_max"),
              (energies, tps, [p.z_bf for p in peaks], [p.qmax for p in peaks]))


def _senn_model(args):
    if args.table and args.potential:
        raise ValidationError("give either --potential or --table, not both")
    if args.table:
        try:
            data = np.loadtxt(args.table, delimiter=None if _whitespace(args.table) else ",",
                              ndmin=2)
        except (OSError, ValueError) as exc:
            raise ValidationError(f"cannot read potential table {args.table}: {exc}") from None
        if data.shape[1] != 2:
            raise ValidationError(f"{args.table}: expected two columns x, V")
        topo = senn.Topology.RIGHT_WALL if args.wall else senn.Topology.TWO_SIDED
        return senn.from_table(data[:, 0], data[:, 1], topology=topo)
    name = args.potential or "square_barrier"
    if name == "morse":
        params = morse.MorseParams(
            V=1.0 if args.V is None else args.V,
            d=1.0 if args.d is None else args.d,
            z0=0.0 if args.z0 is None else args.z0,
        )
        return senn.morse_wall(params, args.xi)
    kwargs = {}
    allowed = {
        "free": ("xi",), "square_well": ("V0", "a"), "square_barrier": ("V0", "a"),
        "asymmetric_well": ("V0", "a", "V1"), "gaussian_well": ("V0", "sigma"),
    }[name]
    for key in ("V0", "a", "V1", "sigma", "xi"):
        val = getattr(args, key)
        if val is None:
            continue
        if key not in allowed:
            raise ValidationError(f"--{key} does not apply to {name}")
        kwargs[key] = val
    return senn.BUILTINS[name](**kwargs)


def _whitespace(path):
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                return "," not in line
    return True


def cmd_senn(args):
    model = _senn_model(args)
    if args.threshold:
        lim = senn.threshold_limit(model)
        prob = lim.reflection_probability(args.w_threshold)
        _emit_csv(args, ("p", "q", "s", "w", "w_error", "threshold_R2"),
                  ([lim.p], [lim.q], [lim.s], [lim.w], [lim.w_error], [prob]))
        return
    ks = args.k or [0.5]
    rows = []
    for k in ks:
        if not k > 0:
            raise ValidationError(f"k must be positive, got {k}")
        if model.topology is senn.Topology.RIGHT_WALL:
            R = senn.reflection_amplitude_wall(model, k)
            T = 0.0
            drift = float("nan")  # single solution, no Wronskian pair
        else:
            bd = senn.fundamental_solutions(model, k)
            R = senn.reflection_amplitude_general(model, k)
            T = senn.transmission_amplitude(model, k)
            drift = bd.wronskian_drift
        rows.append((k, R.real, R.imag, abs(R) ** 2, abs(T) ** 2, abs(R) ** 2 + abs(T) ** 2, drift))
    _emit_csv(args, ("k", "Re_R", "Im_R", "R2", "T2", "R2_plus_T2", "wronskian_drift"),
              list(zip(*rows)))


def _grid_axes(cfg, zoom):
    params, state = experiments.params_of(cfg), experiments.state_of(cfg)
    t = experiments.time_axis(cfg, params, state)
    z = (experiments.zoom_z_axis if zoom else experiments.full_z_axis)(cfg, params, state)
    return params, state, z, t


def cmd_propagate(args):
    cfg = _resolve(args)
    params, state, z, t = _grid_axes(cfg, args.zoom)
    out = _out_dir(args, cfg, "propagate")
    dens = qdyn.propagate(params, state, z, t, experiments.kgrid_of(cfg, state),
                          spot_check=cfg.spot_check, threads=cfg.threads or 1, seed=cfg.seed)
    _write_grid(args, dens, out, "density")


def cmd_wigner(args):
    cfg = _resolve(args)
    params, state, z, t = _grid_axes(cfg, args.zoom)
    out = _out_dir(args, cfg, "wigner")
    dens = cwigner.density_grid(params, state, experiments.ensemble_of(cfg), z, t)
    _write_grid(args, dens, out, "wigner")


def _write_grid(args, dens, out, name):
    path = os.path.join(out, f"{name}.qtrd")
    dens.write_binary(path)
    if args.csv:
        dens.write_csv(os.path.join(out, f"{name}.csv"))
    print(path)


def cmd_flight_times(args):
    cfg = _resolve(args)
    if args.row:
        bad = [r for r in args.row if not 1 <= r <= len(experiments.TABLE1)]
        if bad:
            raise ValidationError(f"row must be 1-{len(experiments.TABLE1)}, got {bad[0]}")
        rows = [experiments.TABLE1[r - 1] for r in args.row]
        cfgs = [cfg.replace(p_i=r.p_i, z_i=r.z_i, gamma=r.gamma) for r in rows]
    else:
        cfgs = [cfg]
    reports = [experiments.flight_time_row(c) for c in cfgs]
    if args.output:
        experiments.write_flight_times(args.output, reports, append=args.append)
        cfg.write(args.output + ".config.ini")
    else:
        print(",".join(experiments.FlightTimeReport.COLUMNS))
        for r in reports:
            print(",".join(f"{v:.9g}" for v in r.values()))


def cmd_reproduce(args):
    names = args.preset or [p.value for p in experiments.PresetId]
    for name in names:
        preset = experiments.get_preset(name)
        cfg = _resolve(args, preset.base_config())
        res = experiments.run(preset, cfg, out_root=args.output)
        for q in res.quantities:
            flag = "PASS" if q.passed else "FAIL"
            print(f"{name} {q.name}: achieved={q.achieved:.9g} reference={q.reference:.9g} {flag}")
        print(f"{name}: {res.status} in {res.wall_clock:.1f} s -> {res.directory}")


COMMANDS = {
    "reflect": cmd_reflect,
    "badlands": cmd_badlands,
    "senn": cmd_senn,
    "propagate": cmd_propagate,
    "wigner": cmd_wigner,
    "flight-times": cmd_flight_times,
    "reproduce": cmd_reproduce,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2),
            format="%(levelname)s %(name)s: %(message)s",
        )
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"qthreshold: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"qthreshold: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except QThresholdError as exc:
        print(f"qthreshold: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"qthreshold: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
