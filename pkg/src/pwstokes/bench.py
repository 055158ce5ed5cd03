"""Benchmark sweeps on the perturbed criss-cross mesh and the ``stokes-wire`` CLI."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_system
from .config import ToolConfig, configure_logging, load_config
from .errors import StokesError
from .manufactured import manufactured_solution
from .mesh import CRISS_CROSS_CENTER, criss_cross_mesh, read_mesh, red_refine
from .singularity import eta_critical_set, vertex_thetas
from .solve import (divergence_norm, error_norms, estimate_infsup, gradient_norm,
                    solve_stokes)
from .spaces import pressure_subspace_dim

log = logging.getLogger(__name__)

COLUMNS = ("mode", "k", "eps", "eta", "level", "ndof_u", "ndof_p", "err_grad_u", "err_p",
           "err_total", "div_norm", "beta", "seconds")
MODES = ("h", "k", "infsup", "solve", "verify")
DEFAULT_LEVELS = {"h": 4, "k": 1, "infsup": 1, "solve": 2, "verify": 0}
DEFAULT_K = {"h": (4, 5), "k": (4, 5, 6, 7, 8), "infsup": (4,), "solve": (4,), "verify": (4,)}
DEFAULT_EPS = (1e-2, 1e-4, 1e-6, 1e-8)
DIV_QUAD_BUMP = 4


@dataclass(frozen=True)
class BenchConfig:
    """One sweep.

    ``eta_policy`` is ``critical`` (z_eps constrained), ``noncritical`` (z_eps
    free), ``both`` (one record per variant) or ``value:<x>`` (the plain
    eta-critical set).  ``levels`` is the number of red refinements: the h
    sweep visits levels 0..levels, the other modes use that single level.
    """

    mode: str = "h"
    ks: tuple = (4,)
    eps: tuple = DEFAULT_EPS
    eta_policy: str = "both"
    levels: int = 4
    mesh_path: str | None = None
    quad_bump: int = 0
    with_beta: bool = False
    timing: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        for e in self.eps:
            if not 0.0 <= e < 0.5:
                raise ValueError(f"eps={e} outside [0, 1/2)")
        if self.levels < 0:
            raise ValueError("levels must be >= 0")
        policies = [p.strip() for p in self.eta_policy.split(",")]
        for p in policies:
            if p not in ("critical", "noncritical", "both") and not p.startswith("value:"):
                raise ValueError(f"bad eta policy {p!r}")
            if p.startswith("value:") and float(p[6:]) < 0:
                raise ValueError("eta must be >= 0")
        if any(k < 4 for k in self.ks) and self.mode != "verify":
            log.warning("k < 4 requested: the classical pair is not expected to be stable")

    @property
    def policies(self) -> tuple:
        out = []
        for p in (s.strip() for s in self.eta_policy.split(",")):
            out.extend(("critical", "noncritical") if p == "both" else (p,))
        return tuple(out)


@dataclass
class RunRecord:
    mode: str
    k: int
    eps: float
    eta: float
    level: int
    ndof_u: int = 0
    ndof_p: int = 0
    err_grad_u: float = math.nan
    err_p: float = math.nan
    err_total: float = math.nan
    div_norm: float = math.nan
    beta: float = math.nan
    seconds: float = 0.0
    # outside the CSV schema (JSON only)
    grad_norm: float = math.nan
    error: str | None = None

    def row(self) -> list:
        return [getattr(self, c) for c in COLUMNS]


@dataclass
class RunReport:
    records: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(r.error is not None for r in self.records)

    def select(self, **match) -> list:
        return [r for r in self.records if all(getattr(r, k) == v for k, v in match.items())]

    def sort(self) -> None:
        self.records.sort(key=lambda r: (r.mode, r.eps if r.eps == r.eps else -1.0, r.k, r.level))


def eoc(errors) -> np.ndarray:
    """log2(e_L / e_{L+1}) between consecutive uniform refinements."""
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


def decay_factors(errors) -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    return e[:-1] / e[1:]


def exponential_fit(ks, errors) -> float:
    """Slope of the least-squares line through (k, log e); negative means decay."""
    return float(np.polyfit(np.asarray(ks, float), np.log(np.asarray(errors, float)), 1)[0])


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


# -- pipeline ---------------------------------------------------------------

def benchmark_mesh(cfg: BenchConfig, eps: float, level: int):
    """(mesh, z_eps): the red-refined criss-cross mesh or the user mesh.

    For a user mesh z_eps is the interior vertex with the smallest Theta.
    """
    if cfg.mesh_path is None:
        return red_refine(criss_cross_mesh(eps), level), CRISS_CROSS_CENTER
    mesh = red_refine(read_mesh(cfg.mesh_path), level)
    th = np.where(mesh.boundary_vertex, np.inf, vertex_thetas(mesh))
    if not np.isfinite(th).any():
        return mesh, None
    return mesh, int(np.argmin(th))


def critical_vertices(mesh, z_eps, policy: str):
    """(critical list, eta recorded in the report) for a variant.

    Both variants share every 0-critical vertex; they differ only at z_eps.
    """
    thetas = vertex_thetas(mesh)
    if policy.startswith("value:"):
        eta = float(policy[6:])
        return eta_critical_set(mesh, eta, thetas), eta
    base = set(eta_critical_set(mesh, 0.0, thetas))
    if z_eps is None:
        return sorted(base), 0.0
    if policy == "critical":
        return sorted(base | {z_eps}), float(thetas[z_eps])
    return sorted(base - {z_eps}), 0.0


def run_point(cfg: BenchConfig, mode: str, k: int, eps: float, level: int, policy: str,
              solve: bool = True, beta: bool = False) -> RunRecord:
    t0 = time.perf_counter()
    rec = RunRecord(f"{mode}/{policy}", k, eps if cfg.mesh_path is None else math.nan,
                    math.nan, level)
    try:
        mesh, z_eps = benchmark_mesh(cfg, eps, level)
        crit, rec.eta = critical_vertices(mesh, z_eps, policy)
        ms = manufactured_solution()
        system = assemble_system(mesh, k, force=ms.f if solve else None, critical=crit,
                                 quad_bump=cfg.quad_bump)
        rec.ndof_u = system.velocity.n_free
        rec.ndof_p = pressure_subspace_dim(system.constraints, system.pressure)
        if solve:
            sol = solve_stokes(system)
            u = sol.u_full
            rec.err_grad_u, rec.err_p = error_norms(system, u, sol.p, ms.grad_u, ms.p)
            rec.err_total = rec.err_grad_u + rec.err_p
            rec.div_norm = divergence_norm(system, u, bump=DIV_QUAD_BUMP)
            rec.grad_norm = gradient_norm(system, u)
        if beta:
            rec.beta = estimate_infsup(system).beta
    except (StokesError, np.linalg.LinAlgError, MemoryError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
        log.error("%s k=%d eps=%g level=%d failed: %s", rec.mode, k, eps, level, rec.error)
    if cfg.timing:
        rec.seconds = time.perf_counter() - t0
    return rec


def _run_all(cfg: BenchConfig, jobs) -> RunReport:
    call = lambda j: run_point(cfg, *j)  # noqa: E731
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            records = list(pool.map(call, jobs))
    else:
        records = [call(j) for j in jobs]
    report = RunReport(records)
    report.sort()
    return report


def _eps_list(cfg):
    return cfg.eps if cfg.mesh_path is None else (math.nan,)


def run_h_benchmark(cfg: BenchConfig) -> RunReport:
    jobs = [("h", k, e, lev, p, True, cfg.with_beta)
            for e in _eps_list(cfg) for k in cfg.ks for p in cfg.policies
            for lev in range(cfg.levels + 1)]
    return _run_all(cfg, jobs)


def run_k_benchmark(cfg: BenchConfig) -> RunReport:
    jobs = [("k", k, e, cfg.levels, p, True, cfg.with_beta)
            for e in _eps_list(cfg) for p in cfg.policies for k in cfg.ks]
    return _run_all(cfg, jobs)


def run_infsup_scan(cfg: BenchConfig) -> RunReport:
    jobs = [("infsup", k, e, cfg.levels, p, False, True)
            for e in _eps_list(cfg) for k in cfg.ks for p in cfg.policies]
    return _run_all(cfg, jobs)


def run_solve(cfg: BenchConfig) -> RunReport:
    jobs = [("solve", k, e, cfg.levels, p, True, cfg.with_beta)
            for e in _eps_list(cfg) for k in cfg.ks for p in cfg.policies]
    return _run_all(cfg, jobs)


def summarize(report: RunReport) -> list:
    """Human-readable EOC / decay / slope lines per sweep."""
    lines = []
    groups = {}
    for r in report.records:
        groups.setdefault((r.mode, r.eps, r.k if r.mode.startswith("h") else None), []).append(r)
    for (mode, eps, k), recs in groups.items():
        ok = [r for r in recs if r.error is None]
        if mode.startswith("h") and len(ok) > 1:
            rates = " ".join(f"{v:.2f}" for v in eoc([r.err_total for r in ok]))
            lines.append(f"{mode} eps={eps:g} k={k}: EOC {rates}")
        elif mode.startswith("k") and len(ok) > 1:
            fac = " ".join(f"{v:.2f}" for v in decay_factors([r.err_total for r in ok]))
            lines.append(f"{mode} eps={eps:g}: decay factors {fac}")
    scans = {}
    for r in report.records:
        if r.mode.startswith("infsup") and r.error is None:
            scans.setdefault((r.mode, r.k), []).append(r)
    for (mode, k), recs in scans.items():
        e = [r.eps for r in recs]
        b = [r.beta for r in recs]
        if len(recs) > 1 and min(b) > 0 and min(e) > 0:
            lines.append(f"{mode} k={k}: slope {loglog_slope(e, b):.3f}, "
                         f"max/min {max(b) / min(b):.4f}")
    return lines


# -- persistence ------------------------------------------------------------

def emit_report(report: RunReport, path, fmt: str = "csv") -> None:
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in report.records:
                w.writerow([repr(v) if isinstance(v, float) else v for v in r.row()])
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump([dataclasses.asdict(r) for r in report.records], fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_report(path, fmt: str = "csv") -> RunReport:
    if fmt == "json":
        with open(path) as fh:
            return RunReport([RunRecord(**d) for d in json.load(fh)])
    casts = {f.name: f.type for f in dataclasses.fields(RunRecord)}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(RunRecord(**{c: (row[c] if casts[c] == "str" else
                                        int(row[c]) if casts[c] == "int" else float(row[c]))
                                    for c in COLUMNS}))
    return RunReport(out)


# -- CLI --------------------------------------------------------------------

def _int_list(text: str) -> tuple:
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _float_list(text: str) -> tuple:
    return tuple(float(s) for s in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stokes-wire", description=__doc__)
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--k", type=_int_list, help="degrees, e.g. 4 or 4-8 or 4,5")
    ap.add_argument("--eps", type=_float_list, help="comma-separated perturbations")
    ap.add_argument("--eta-policy", default="both",
                    help="critical | noncritical | both | value:<x>")
    ap.add_argument("--levels", type=int, help="number of red refinements")
    ap.add_argument("--out", help="report path (default: stdout table only)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--mesh", help="mesh file replacing the criss-cross generator")
    ap.add_argument("--seed", type=int, help="seed of the randomised checks")
    ap.add_argument("--config", help="key = value tool config file")
    ap.add_argument("--beta", action="store_true", help="also estimate inf-sup constants")
    ap.add_argument("--no-timing", action="store_true",
                    help="write 0 in the seconds column (byte-reproducible output)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(logging.INFO if args.verbose else logging.WARNING)
    tool = load_config(args.config) if args.config else ToolConfig()
    if args.seed is not None:
        tool = dataclasses.replace(tool, seed=args.seed)
    mode = args.mode
    if mode == "verify":
        from .verify import format_suite, run_verify_suite
        rows = run_verify_suite(tool.seed, tol=tool.tol_identity)
        print(format_suite(rows))
        return 0 if all(r.passed for r in rows) else 1
    try:
        cfg = BenchConfig(mode=mode, ks=args.k or DEFAULT_K[mode],
                          eps=args.eps or ((0.01,) if mode == "solve" else DEFAULT_EPS),
                          eta_policy=args.eta_policy,
                          levels=DEFAULT_LEVELS[mode] if args.levels is None else args.levels,
                          mesh_path=args.mesh, quad_bump=tool.quad_bump,
                          with_beta=args.beta, timing=not args.no_timing,
                          threads=tool.threads)
    except ValueError as exc:
        print(f"stokes-wire: {exc}", file=sys.stderr)
        return 1
    runner = {"h": run_h_benchmark, "k": run_k_benchmark, "infsup": run_infsup_scan,
              "solve": run_solve}[mode]
    report = runner(cfg)
    for r in report.records:
        print(f"{r.mode:18s} k={r.k} eps={r.eps:<8g} level={r.level} "
              f"ndof_u={r.ndof_u} ndof_p={r.ndof_p} total={r.err_total:.3e} "
              f"div={r.div_norm:.3e} beta={r.beta:.4g}" + (f" ERROR {r.error}" if r.error else ""))
    for line in summarize(report):
        print(line)
    if args.out:
        emit_report(report, args.out, args.format)
    return 2 if report.failed else 0


if __name__ == "__main__":
    sys.exit(main())
