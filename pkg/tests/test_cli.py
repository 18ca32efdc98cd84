import json
import math
import os
import subprocess
import sys
from collections import defaultdict

import numpy as np
import pytest

from lmg_esqpt.cli import ConfigError, Table, main, parse_time, read_csv, render
from lmg_esqpt.robustness import collective_operator
from lmg_esqpt.scaling import fit_power_law


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    out = capsys.readouterr() if capsys else None
    return code, out


def test_thresholds_prints_reference_triple(capsys):
    code, out = run(["thresholds", "--n", 100, "--dt", "pi"], capsys)
    assert code == 0
    assert out.out.strip() == "14,9,20"


def test_thresholds_table_when_output_requested(tmp_path, capsys):
    path = tmp_path / "thr.csv"
    code, _ = run(["thresholds", "--n", 100, "--dt", "pi", "--max-bits", 5, "--output", path], capsys)
    assert code == 0
    meta, cols, rows = read_csv(path)
    assert meta["thresholds"] == [14, 9, 20]
    assert cols[0] == "bits" and len(rows) == 5


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "lmg_esqpt.cli", "thresholds", "--n", "100", "--dt", "pi"],
                         capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 0 and res.stdout.strip() == "14,9,20"


@pytest.mark.parametrize("text, value", [("pi", math.pi), ("2pi", 2 * math.pi), ("0.5*pi", math.pi / 2),
                                         ("pi/4", math.pi / 4), ("-pi", -math.pi), ("1.25", 1.25)])
def test_parse_time(text, value):
    assert parse_time(text) == pytest.approx(value)


def test_dos_peak_bin_at_large_n(tmp_path, capsys):
    path = tmp_path / "dos.csv"
    code, _ = run(["dos", "--n", 12000, "--h", 0.5, "--parity", "even", "--output", path], capsys)
    assert code == 0
    meta, cols, rows = read_csv(path)
    lo, hi = meta["peak_bin"]
    assert lo <= -0.25 <= hi
    assert cols == ["bin_left", "bin_right", "center", "count", "density", "closed_form_density"]
    assert sum(int(r[3]) for r in rows) == 6001


def test_csv_format_details(tmp_path, capsys):
    path = tmp_path / "spec.csv"
    code, _ = run(["spectrum", "--n", 10, "--h", 0.3, "--parity", "both", "--output", path], capsys)
    assert code == 0
    raw = path.read_bytes()
    assert b"\r" not in raw
    meta, cols, rows = read_csv(path)
    assert meta["command"] == "spectrum" and "version" in meta and meta["seed"] is None
    assert cols == ["parity", "level", "energy", "energy_per_spin"]
    assert len(rows) == 11
    # shortest round-trip repr: parsing and re-printing is the identity
    assert all(repr(float(r[2])) == r[2] for r in rows)


def test_json_mirrors_csv_and_writes_null_for_nan(tmp_path, capsys):
    c, j = tmp_path / "a.csv", tmp_path / "a.json"
    args = ["dos", "--n", 200, "--h", 0.5, "--bins", 20]
    assert run(args + ["--output", c], capsys)[0] == 0
    assert run(args + ["--output", j, "--format", "json"], capsys)[0] == 0
    doc = json.loads(j.read_text())
    _, cols, rows = read_csv(c)
    assert doc["columns"] == cols
    assert len(doc["records"]) == len(rows)
    for rec, row in zip(doc["records"], rows):
        assert rec["count"] == int(row[3])
        if row[5] == "nan":
            assert rec["closed_form_density"] is None
        else:
            assert rec["closed_form_density"] == float(row[5])


def test_render_handles_booleans_and_none():
    text = render(Table(["a", "b", "c"], [[True, None, 1.5]], {"k": [1, float("nan")]}), "csv")
    assert text.splitlines() == ["# k: [1, null]", "a,b,c", "true,,1.5"]


def test_default_output_directory_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("LMG_OUTPUT_DIR", str(tmp_path / "out"))
    code, out = run(["spectrum", "--n", 6, "--h", 0.2], capsys)
    assert code == 0
    assert (tmp_path / "out" / "spectrum.csv").exists()
    assert out.out.strip() == str(tmp_path / "out" / "spectrum.csv")


def test_config_file_supplies_values_and_flags_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# spectrum settings\nn = 8\nh = 0.4\nparity = odd\n")
    path = tmp_path / "s.csv"
    assert run(["spectrum", "--config", cfg, "--output", path], capsys)[0] == 0
    meta, _, rows = read_csv(path)
    assert meta["n"] == 8 and meta["h"] == 0.4 and len(rows) == 4
    assert run(["spectrum", "--config", cfg, "--h", 0.1, "--output", path], capsys)[0] == 0
    assert read_csv(path)[0]["h"] == 0.1


def test_config_boolean_flag(tmp_path, capsys):
    cfg = tmp_path / "q.cfg"
    cfg.write_text("n = 20\nk = 2\nh-count = 11\nno-refine = true\n")
    path = tmp_path / "q.csv"
    assert run(["qfi-sweep", "--config", cfg, "--output", path], capsys)[0] == 0
    assert len(read_csv(path)[2]) == 11


@pytest.mark.parametrize("content", ["n = 8\nh = 0.4\nbogus = 1\n", "n = 8\nthis line has no delimiter\n",
                                     "n = eight\nh = 0.4\n"])
def test_malformed_config_exits_2_without_output(tmp_path, capsys, content):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(content)
    path = tmp_path / "never.csv"
    code, out = run(["spectrum", "--config", cfg, "--output", path], capsys)
    assert code == 2
    assert "configuration error" in out.err
    assert not path.exists()
    assert os.listdir(tmp_path) == ["bad.cfg"]


def test_missing_config_file_is_io_error(tmp_path, capsys):
    assert run(["spectrum", "--config", tmp_path / "absent.cfg"], capsys)[0] == 4


@pytest.mark.parametrize("argv", [
    ["nonsense"],
    [],
    ["spectrum", "--h", "0.3"],  # --n missing
    ["spectrum", "--n", "0", "--h", "0.3"],
    ["spectrum", "--n", "5", "--h", "nan"],
    ["qfi-sweep", "--n", "20", "--h-count", "2"],
    ["qfi-sweep", "--n", "20", "--h-start", "0.8", "--h-stop", "0.2"],
    ["protocol2", "--n", "50", "--h", "0.3"],  # stochastic command without --seed
    ["protocol2", "--n", "50", "--h", "0.3", "--seed", "1", "--dt", "4"],
    ["robustness", "--mode", "perturbation", "--perturbation", "sy"],
    ["protocol1", "--n", "60", "--k", "6", "--mixed", "--h-start", "0.9", "--h-stop", "1.0"],
])
def test_config_errors_exit_2(argv, tmp_path, capsys):
    path = tmp_path / "o.csv"
    code, _ = run(argv + ["--output", path] if argv else argv, capsys)
    assert code == 2
    assert not path.exists()


def test_numerical_failure_exits_3(tmp_path, capsys):
    path = tmp_path / "p1.csv"
    code, out = run(["protocol1", "--n", 1, "--k", 0, "--h-count", 3, "--output", path], capsys)
    assert code == 3
    assert "numerical failure" in out.err
    assert not path.exists()


def test_unwritable_output_exits_4(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, out = run(["spectrum", "--n", 4, "--h", 0.1, "--output", blocker / "x.csv"], capsys)
    assert code == 4 and "IO error" in out.err


def test_protocol2_reruns_are_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["protocol2", "--n", 100, "--h", 0.4, "--bits", 10, "--shots", 100, "--seed", 5, "--repeats", 3]
    assert run(args + ["--output", a], capsys)[0] == 0
    assert run(args + ["--output", b], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    meta, _, rows = read_csv(a)
    assert [int(r[0]) for r in rows] == [5, 6, 7]
    assert meta["bound"] == pytest.approx(4 * math.pi / 2 ** 10 / math.pi)


def test_protocol2_ideal_mode(tmp_path, capsys):
    path = tmp_path / "ideal.csv"
    assert run(["protocol2", "--n", 400, "--h", 0.3, "--seed", 0, "--mode", "ideal", "--output", path], capsys)[0] == 0
    _, _, rows = read_csv(path)
    assert float(rows[0][1]) == pytest.approx(0.3, abs=1e-10)


EXPONENT_ARGS = ["exponents", "--n-list", "40,60,80,100", "--fractions", "0.1,0.2", "--width-fractions", "0.1",
                 "--energy-fields", "0.4", "--h-count", 41, "--quantities", "field,spacing,energy"]


def test_exponents_parallel_and_serial_identical_and_refit_exactly(tmp_path, capsys):
    a, b = tmp_path / "serial.csv", tmp_path / "parallel.csv"
    assert run(EXPONENT_ARGS + ["--jobs", 1, "--output", a], capsys)[0] == 0
    assert run(EXPONENT_ARGS + ["--jobs", 2, "--output", b], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    meta, cols, rows = read_csv(a)
    assert cols == ["name", "label", "n", "value", "exponent", "prefactor", "r_squared"]
    series = defaultdict(list)
    reported = {}
    for name, label, n, value, exponent, *_ in rows:
        series[(name, label)].append((int(n), float(value)))
        reported[(name, label)] = float(exponent)
    assert {"gamma", "delta", "eta", "zeta", "xi", "mu", "nu_measured"} == {k[0] for k in series}
    for key, pts in series.items():
        assert fit_power_law(pts).exponent == reported[key]
    assert "nu_derived[0.4]" in meta["derived"]


def test_robustness_exponent_grid(tmp_path, capsys):
    path = tmp_path / "rob.csv"
    assert run(["robustness", "--grid", 6, "--output", path], capsys)[0] == 0
    _, cols, rows = read_csv(path)
    for v, w, _, exponent, *_ in rows:
        if v == w:
            assert float(exponent) == pytest.approx(2.07)


def test_robustness_matrix_file_matches_builtin(tmp_path, capsys):
    archive = tmp_path / "pert.npz"
    np.savez(archive, **{f"N{n}": collective_operator("sx2", n) for n in (40, 41, 80, 81)})
    a, b = tmp_path / "file.csv", tmp_path / "named.csv"
    common = ["robustness", "--mode", "perturbation", "--n-list", "40,80"]
    assert run(common + ["--matrix-file", archive, "--output", a], capsys)[0] == 0
    assert run(common + ["--perturbation", "sx2", "--output", b], capsys)[0] == 0
    assert read_csv(a)[2] == read_csv(b)[2]
    assert read_csv(a)[0]["perturbation"] == "matrix-file"


def test_robustness_matrix_file_errors(tmp_path, capsys):
    common = ["robustness", "--mode", "perturbation", "--n-list", "40"]
    partial = tmp_path / "partial.npz"
    np.savez(partial, N40=np.eye(41))  # N+1 = 41 missing
    assert run(common + ["--matrix-file", partial], capsys)[0] == 2
    badname = tmp_path / "badname.npz"
    np.savez(badname, size40=np.eye(41))
    assert run(common + ["--matrix-file", badname], capsys)[0] == 2
    notnpz = tmp_path / "plain.txt"
    notnpz.write_text("1 0\n0 1\n")
    assert run(common + ["--matrix-file", notnpz], capsys)[0] == 2
    assert run(common + ["--matrix-file", tmp_path / "absent.npz"], capsys)[0] == 4


def test_qfi_commands_write_metadata(tmp_path, capsys):
    a, b = tmp_path / "sweep.json", tmp_path / "energy.csv"
    assert run(["qfi-sweep", "--n", 60, "--k", 6, "--h-count", 21, "--format", "json", "--output", a], capsys)[0] == 0
    doc = json.loads(a.read_text())
    assert doc["metadata"]["even_level"] == 6 and len(doc["records"]) == 21
    assert run(["qfi-energy", "--n", 60, "--h", 0.4, "--output", b], capsys)[0] == 0
    meta, _, rows = read_csv(b)
    assert meta["critical_energy_per_spin"] == -0.2 and len(rows) == 31


def test_protocol1_rows_respect_cramer_rao(tmp_path, capsys):
    path = tmp_path / "p1.csv"
    assert run(["protocol1", "--n", 80, "--k", 8, "--h-count", 15, "--derivative", "perturbative",
                "--output", path], capsys)[0] == 0
    meta, cols, rows = read_csv(path)
    assert meta["critical_field"] > 0
    assert all(float(r[cols.index("cramer_rao_product")]) >= 1 - 1e-9 for r in rows)


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_config_error_is_value_error():
    assert issubclass(ConfigError, ValueError)
