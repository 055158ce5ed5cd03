"""Degree sweep on a fixed criss-cross mesh, for several refinement levels.

On the 4-triangle mesh itself the error reduction per degree dips below 2
(the pressure is smooth but not analytic); from one refinement on it does
not.  Run with --levels 0 1 2 to see both.
"""
import argparse

from pwstokes.bench import BenchConfig, decay_factors, run_k_benchmark


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-2, 1e-8])
    ap.add_argument("--levels", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--kmax", type=int, default=8)
    args = ap.parse_args(argv)
    for level in args.levels:
        cfg = BenchConfig(mode="k", ks=tuple(range(4, args.kmax + 1)), eps=tuple(args.eps),
                          levels=level)
        rep = run_k_benchmark(cfg)
        for mode in ("k/critical", "k/noncritical"):
            for eps in args.eps:
                recs = rep.select(mode=mode, eps=eps)
                errs = [r.err_total for r in recs]
                print(f"level={level} {mode:13s} eps={eps:<6g} "
                      + " ".join(f"{e:.3e}" for e in errs)
                      + "  factors " + " ".join(f"{f:.2f}" for f in decay_factors(errs)))


if __name__ == "__main__":
    main()
