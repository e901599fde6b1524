"""Run the figure presets and list their artifacts and comparisons.

Full-size density presets take several minutes each; use --quick for a
reduced smoke run (small grids, 1e5 trajectories).
"""

import argparse

from qthreshold import experiments


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("presets", nargs="*", default=["Fig1", "Fig2", "Fig3", "Fig4", "Fig5"])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    over = {"seed": args.seed}
    if args.quick:
        over.update(nz=400, nt=400, n_traj=100_000, n_k=20_000)
    for name in args.presets:
        res = experiments.run(name, over, out_root=args.out)
        print(f"== {name} ({res.wall_clock:.1f} s) -> {res.directory}")
        for q in res.quantities:
            print(f"   {q.name:32s} achieved {q.achieved:.9g}  reference {q.reference:.9g}  "
                  f"{'PASS' if q.passed else 'FAIL'}")
        for key, val in res.info.items():
            print(f"   {key:32s} {val:.9g}" if isinstance(val, float) else f"   {key:32s} {val}")


if __name__ == "__main__":
    main()
