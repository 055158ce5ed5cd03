"""Inf-sup constant of both variants versus the centre perturbation."""
import argparse

import numpy as np

from pwstokes.bench import BenchConfig, loglog_slope, run_infsup_scan


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--level", type=int, default=1)
    ap.add_argument("--eps", type=float, nargs="+",
                    default=list(np.logspace(-1.5, -8, 14)))
    args = ap.parse_args(argv)
    rep = run_infsup_scan(BenchConfig(mode="infsup", ks=(args.k,), eps=tuple(args.eps),
                                      levels=args.level))
    wired = rep.select(mode="infsup/critical")
    classical = rep.select(mode="infsup/noncritical")
    print(f"{'eps':>10s} {'beta wired':>12s} {'beta classical':>15s}")
    for w, c in zip(wired, classical):
        print(f"{w.eps:10.3e} {w.beta:12.6f} {c.beta:15.6e}")
    print(f"classical slope {loglog_slope([c.eps for c in classical], [c.beta for c in classical]):.4f}")


if __name__ == "__main__":
    main()
