"""h-convergence of both variants on the red-refined criss-cross meshes.

Writes one CSV per run and prints per-level errors with EOCs.
"""
import argparse

from pwstokes.bench import BenchConfig, emit_report, run_h_benchmark, summarize


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, nargs="+", default=[4, 5])
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-2, 1e-4, 1e-6, 1e-8])
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--out", default="h_convergence.csv")
    args = ap.parse_args(argv)
    rep = run_h_benchmark(BenchConfig(mode="h", ks=tuple(args.k), eps=tuple(args.eps),
                                      levels=args.levels))
    for r in rep.records:
        print(f"{r.mode:14s} eps={r.eps:<7g} k={r.k} L={r.level} total={r.err_total:.3e} "
              f"div={r.div_norm:.2e}")
    print("\n".join(summarize(rep)))
    emit_report(rep, args.out)


if __name__ == "__main__":
    main()
