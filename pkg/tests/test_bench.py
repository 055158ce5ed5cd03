import csv
import json
import math

import numpy as np
import pytest

from pwstokes import bench
from pwstokes.assembly import assemble_system
from pwstokes.bench import (COLUMNS, BenchConfig, RunRecord, RunReport, critical_vertices,
                            decay_factors, emit_report, eoc, exponential_fit, load_report,
                            loglog_slope, main, run_h_benchmark, run_infsup_scan,
                            run_k_benchmark)
from pwstokes.errors import SingularSystem
from pwstokes.mesh import criss_cross_mesh, red_refine, write_mesh


def test_eoc_helpers():
    assert np.allclose(eoc([1.0, 0.5, 0.125]), [1.0, 2.0])
    assert np.allclose(decay_factors([8.0, 2.0, 1.0]), [4.0, 2.0])
    assert exponential_fit([4, 5, 6], [1.0, math.exp(-2), math.exp(-4)]) == pytest.approx(-2.0)
    assert loglog_slope([1e-2, 1e-3], [3e-2, 3e-3]) == pytest.approx(1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(eps=(0.5,))
    with pytest.raises(ValueError):
        BenchConfig(mode="x")
    with pytest.raises(ValueError):
        BenchConfig(eta_policy="sometimes")
    assert BenchConfig(eta_policy="both").policies == ("critical", "noncritical")


def test_variants_differ_only_in_constraints():
    m = red_refine(criss_cross_mesh(0.01))
    a, eta_a = critical_vertices(m, 4, "critical")
    b, eta_b = critical_vertices(m, 4, "noncritical")
    assert set(a) ^ set(b) == {4} and eta_a > 0 and eta_b == 0
    sa = assemble_system(m, 4, critical=a)
    sb = assemble_system(m, 4, critical=b)
    assert (sa.A != sb.A).nnz == 0 and (sa.B != sb.B).nnz == 0
    assert (sa.Mp != sb.Mp).nnz == 0 and np.array_equal(sa.f, sb.f)
    assert sa.C.shape[0] == sb.C.shape[0] + 1


def test_h_benchmark_small():
    cfg = BenchConfig(mode="h", ks=(4,), eps=(0.01,), levels=2)
    rep = run_h_benchmark(cfg)
    assert len(rep.records) == 6 and not rep.failed
    wired = rep.select(mode="h/critical")
    assert [r.level for r in wired] == [0, 1, 2]
    assert all(r.err_total == r.err_grad_u + r.err_p for r in wired)
    assert wired[0].eta == pytest.approx(0.02, rel=0.05)


def test_k_and_infsup_small():
    rep = run_k_benchmark(BenchConfig(mode="k", ks=(4, 5), eps=(0.01,), levels=0,
                                      eta_policy="critical"))
    assert [r.k for r in rep.records] == [4, 5]
    scan = run_infsup_scan(BenchConfig(mode="infsup", ks=(4,), eps=(1e-2, 1e-3), levels=0))
    wired = scan.select(mode="infsup/critical")
    classical = scan.select(mode="infsup/noncritical")
    for w, c in zip(wired, classical):
        assert w.beta >= c.beta - 1e-12
        assert math.isnan(w.err_total)


def test_emit_empty_csv(tmp_path):
    p = tmp_path / "r.csv"
    emit_report(RunReport(), p)
    assert p.read_text() == ",".join(COLUMNS) + "\n"


def sample_report():
    return RunReport([RunRecord("h/critical", 4, 0.01, 0.0200001, 0, 50, 38, 1 / 3, 2e-300,
                                1 / 3 + 2e-300, 7.5e-3, math.nan, 0.125),
                      RunRecord("h/critical", 4, 0.01, 0.02, 1, 226, 158, error="SingularSystem")])


def test_json_round_trip(tmp_path):
    rep = sample_report()
    p = tmp_path / "r.json"
    emit_report(rep, p, "json")
    back = load_report(p, "json")
    for a, b in zip(rep.records, back.records):
        for f in COLUMNS + ("error",):
            x, y = getattr(a, f), getattr(b, f)
            assert x == y or (isinstance(x, float) and math.isnan(x) and math.isnan(y))


def test_csv_schema(tmp_path):
    p = tmp_path / "r.csv"
    emit_report(sample_report(), p)
    rows = list(csv.reader(open(p)))
    assert all(len(r) == 13 for r in rows)
    back = load_report(p)
    assert back.records[0].err_grad_u == 1 / 3 and back.records[0].eps == 0.01


def test_cli_deterministic(tmp_path, capsys):
    args = ["h", "--k", "4", "--eps", "0.01", "--levels", "1", "--no-timing", "--format", "csv"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "EOC" in capsys.readouterr().out


def test_cli_json_and_mesh(tmp_path):
    mp = tmp_path / "m.txt"
    write_mesh(criss_cross_mesh(0.02), mp)
    out = tmp_path / "r.json"
    assert main(["solve", "--mesh", str(mp), "--levels", "1", "--beta", "--eta-policy",
                 "critical", "--out", str(out), "--format", "json"]) == 0
    recs = json.load(open(out))
    assert len(recs) == 1 and recs[0]["beta"] > 0 and recs[0]["error"] is None
    assert recs[0]["eta"] == pytest.approx(0.04, rel=0.05)


def test_cli_exit_code_on_solver_error(monkeypatch, tmp_path):
    def boom(system, *a, **kw):
        raise SingularSystem("forced")
    monkeypatch.setattr(bench, "solve_stokes", boom)
    out = tmp_path / "r.csv"
    code = main(["solve", "--eps", "0.01", "--levels", "0", "--out", str(out)])
    assert code == 2
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 2 and all(r["err_total"] == "nan" for r in rows)


def test_cli_verify_and_bad_args(capsys):
    assert main(["verify", "--seed", "5"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["h", "--eps", "0.7"]) == 1


def test_cli_value_policy():
    rep = bench.run_solve(BenchConfig(mode="solve", ks=(4,), eps=(0.01,), levels=0,
                                      eta_policy="value:0.05"))
    assert rep.records[0].eta == 0.05 and rep.records[0].mode == "solve/value:0.05"
