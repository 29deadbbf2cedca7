import os
import subprocess
import sys

import pytest

from pbsplit.cli import main

TOY_SYSTEM = """atom 0.0 0.0 0.0 1.0 1.5
atom 1.0 0.4 -0.3 -0.7 1.2
atom -0.8 0.6 0.5 0.5 1.3
"""


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


def test_sphere_spatial_smoke(tmp_path):
    out = tmp_path / "spatial.csv"
    rc = main(["sphere-spatial", "--h", "1.0", "--scheme", "LODIE1",
               "--T", "0.5", "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert header[0] == "scheme"
    assert len(rows) == 1
    assert all(len(r) == len(header) for r in rows)


def test_sphere_spatial_rerun_byte_identical(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    args = ["sphere-spatial", "--h", "1.0,0.5", "--scheme", "LODIE1,LODCN1",
            "--T", "0.2"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sphere_temporal_reference_row_zero(tmp_path):
    out = tmp_path / "temporal.csv"
    rc = main(["sphere-temporal", "--h", "0.5", "--dt", "0.02,0.01,0.005",
               "--scheme", "LODIE1", "--T", "0.2", "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    i_dt = header.index("dt")
    i_l2 = header.index("l2")
    ref_rows = [r for r in rows if float(r[i_dt]) == 0.005]
    assert len(ref_rows) == 1
    assert float(ref_rows[0][i_l2]) == 0.0


def test_stability_smoke(tmp_path):
    out = tmp_path / "stab.csv"
    rc = main(["stability", "--h", "1.0", "--dt", "0.05,0.1", "--H", "1",
               "--scheme", "LODIE1", "--T", "0.5", "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert "stable_range" in header
    i_st = header.index("stable")
    assert all(r[i_st] in ("true", "false") for r in rows)


def test_invalid_scheme_exits_1_and_lists_names(tmp_path, capsys):
    rc = main(["sphere-spatial", "--h", "1.0", "--scheme", "LODXX",
               "--out", str(tmp_path / "x.csv")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "LODXX" in err and "LODIE1" in err and "ExplicitEuler" in err


def test_missing_input_file_exits_2(tmp_path):
    rc = main(["protein", "--pqr", str(tmp_path / "missing.pqr"),
               "--out", str(tmp_path / "x.csv")])
    assert rc == 2


def test_protein_requires_system(tmp_path):
    rc = main(["protein", "--out", str(tmp_path / "x.csv")])
    assert rc == 1


def test_protein_energy_csv_columns(tmp_path):
    system = tmp_path / "toy.system"
    system.write_text(TOY_SYSTEM)
    out = tmp_path / "energy.csv"
    rc = main(["protein", "--system", str(system), "--h", "1.0",
               "--variant", "Plain", "--scheme", "LODIE2", "--dt", "0.1",
               "--T", "1.0", "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert header == ["label", "variant", "scheme", "dt", "T", "alpha",
                      "delta_g_kcal", "diverged", "wall_time_s"]
    assert rows[0][0] == "toy"
    assert rows[0][1] == "Plain"


def test_protein_config_file_defaults(tmp_path):
    system = tmp_path / "toy.system"
    system.write_text(TOY_SYSTEM)
    config = tmp_path / "run.config"
    config.write_text("h = 1.0\ndt = 0.1\nT = 1.0\nscheme = LODIE2\n")
    out = tmp_path / "energy.csv"
    rc = main(["protein", "--system", str(system), "--config", str(config),
               "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert float(rows[0][header.index("dt")]) == 0.1


def test_vacuum_check_smoke(tmp_path):
    system = tmp_path / "toy.system"
    system.write_text(TOY_SYSTEM)
    out = tmp_path / "vac.csv"
    rc = main(["vacuum-check", "--system", str(system), "--h", "1.0",
               "--dt", "0.1", "--T", "2.0", "--alpha", "0.04", "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert "l2_vs_fast" in header
    assert float(rows[0][header.index("l2_vs_fast")]) > 0


def test_stdout_when_no_out_path(capsys):
    rc = main(["sphere-spatial", "--h", "1.0", "--scheme", "LODIE1", "--T", "0.2"])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("scheme,")


def test_order_computation_exact_for_power_laws():
    # err(x) = c * x^p must report order exactly p
    from pbsplit.cli import _fit_order, _order
    xs = [1.0, 0.5, 0.25, 0.125]
    p = 1.37
    errs = [3.1 * x**p for x in xs]
    for a, b in zip(range(3), range(1, 4)):
        got = _order(errs[a], errs[b], xs[a], xs[b])
        assert got == pytest.approx(p, rel=1e-12)
    assert _fit_order(xs, errs) == pytest.approx(p, rel=1e-12)


def test_csv_floats_have_12_digits(tmp_path):
    out = tmp_path / "spatial.csv"
    main(["sphere-spatial", "--h", "1.0", "--scheme", "LODIE1", "--T", "0.2",
          "--out", str(out)])
    header, rows = read_csv(out)
    val = rows[0][header.index("l2")]
    mantissa = val.split("e")[0]
    assert len(mantissa.split(".")[1]) >= 12


def test_thread_env_does_not_change_output(tmp_path):
    # the kernels are single threaded; thread env vars must not alter bytes
    outputs = []
    for threads in ("1", "4"):
        out = tmp_path / f"t{threads}.csv"
        env = dict(os.environ)
        env.update(OMP_NUM_THREADS=threads, MKL_NUM_THREADS=threads,
                   OPENBLAS_NUM_THREADS=threads)
        code = ("from pbsplit.cli import main\n"
                f"main(['sphere-spatial', '--h', '1.0,0.5', '--scheme', 'LODIE1',"
                f" '--T', '0.2', '--out', {str(out)!r}])\n")
        subprocess.run([sys.executable, "-c", code], check=True, env=env)
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
