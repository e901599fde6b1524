"""Print the flight-time table next to the reference values.

    python scripts/reproduce_table1.py --n-traj 10000000 --seed 1
"""

import argparse

from qthreshold import experiments
from qthreshold.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-traj", type=int, default=10_000_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--rows", type=int, nargs="*", default=[1, 2, 3, 4, 5])
    ap.add_argument("--convergence", action="store_true", help="also double the k-grid")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    cfg = RunConfig(n_traj=args.n_traj, seed=args.seed, check_convergence=args.convergence)
    res = experiments.run("Table1", cfg, out_root=args.out, rows=tuple(args.rows))
    reports = experiments.read_flight_times(f"{res.directory}/table1.csv")
    print(f"{'E_i':>8} {'z_TP':>13} {'t_free':>15} {'t_QM':>15} {'t_W':>15} {'+-':>9}")
    for row, rep in zip((experiments.TABLE1[i - 1] for i in args.rows), reports):
        print(f"{rep.E_i:8.0e} {rep.z_tp:13.7f} {rep.t_free:15.8e} {rep.t_qm:15.8e} "
              f"{rep.t_w:15.8e} {rep.t_w_stderr:9.2e}")
        print(f"{'ref':>8} {row.z_tp:13.7f} {row.t_free:15.8e} {row.t_qm:15.8e} {row.t_w:15.8e}")
    failed = [q.name for q in res.quantities if not q.passed]
    print("all comparisons passed" if not failed else "failed: " + ", ".join(failed))
    print(f"artifacts in {res.directory}")


if __name__ == "__main__":
    main()
