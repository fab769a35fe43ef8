import json

import numpy as np
import pytest

from qscatter import cli
from qscatter.cli import Column, ResultTable
from qscatter.errors import ArgumentError, OutputError, ValidationError

MINIMAL_MODES = {
    "kind": "modes",
    "parameters": {"geometry": "two_sided_boundary", "params": {"n_r": 1.0, "n_l": 3.0, "q": 0.0},
                   "omega": {"start": 0.5, "stop": 2.0, "num": 4}},
}

FILTER = {
    "kind": "filter", "seed": 4,
    "parameters": {"scheme": "homodyne", "model": {"type": "perfect_mirror", "k": 0.5},
                   "drive": {"beta": [[1.0, 0.0]]}, "oscillator": {"dim": 4, "initial": "ground"},
                   "T": 0.05, "dt": 0.005, "trajectories": 3},
}


def test_minimal_modes_parses():
    s = cli.parse_scenario(json.dumps(MINIMAL_MODES))
    assert s.kind == "modes" and s.seed == 0
    assert s.constants.hbar == 1.0 and s.constants.c == 1.0


def test_missing_dt_is_named():
    doc = json.loads(json.dumps(FILTER))
    del doc["parameters"]["dt"]
    with pytest.raises(ValidationError) as info:
        cli.parse_scenario(json.dumps(doc))
    assert any("dt" in v.split(":")[0] for v in info.value.violations)


@pytest.mark.parametrize("mutate,field", [
    (lambda d: d.update(kind="optics"), "kind"),
    (lambda d: d["parameters"].update(geometry=3), "geometry"),
    (lambda d: d["parameters"]["omega"].update(num="four"), "num"),
    (lambda d: d.update(seed=-1), "seed"),
])
def test_violations_name_the_field(mutate, field):
    doc = json.loads(json.dumps(MINIMAL_MODES))
    mutate(doc)
    with pytest.raises(ValidationError) as info:
        cli.parse_scenario(json.dumps(doc))
    assert any(field in v for v in info.value.violations)


def test_malformed_json_is_validation_error():
    with pytest.raises(ValidationError):
        cli.parse_scenario("{kind: modes")


def test_canonical_round_trip():
    for name in cli.bundled_scenarios():
        s = cli.load_scenario(name)
        again = cli.parse_scenario(s.to_json())
        assert again == s
        assert again.to_json() == s.to_json()


def test_unknown_scenario_reference():
    with pytest.raises(ArgumentError):
        cli.load_scenario("no_such_scenario")


def test_modes_csv_header_and_columns(tmp_path):
    s = cli.parse_scenario(json.dumps(MINIMAL_MODES))
    table, paths = cli.run_scenario(s, str(tmp_path / "m"))
    header, cols, rows = cli.read_csv(paths[0])
    assert header == {"schema_version": "1", "kind": "modes", "hbar": "1.0", "c": "1.0", "seed": "0"}
    assert cols[:3] == ["omega", "t_rr_re", "t_rr_im"]
    assert cols[9:12] == ["flux_res_1", "flux_res_2", "flux_res_3"]
    assert len(rows) == 4
    sidecar = json.loads(paths[1].read_text())
    assert [c["name"] for c in sidecar["columns"]] == cols
    summary = json.loads(paths[2].read_text())
    assert summary["header"]["seed"] == 0


def test_complex_column_naming():
    t = ResultTable([Column("t_rr", "complex"), Column("n", "int")], rows=[[1 + 2j, 3]])
    assert [c[0] for c in t.flat_columns()] == ["t_rr_re", "t_rr_im", "n"]
    assert t.flat_rows() == [[1.0, 2.0, 3]]


def test_empty_result_is_header_only(tmp_path):
    s = cli.parse_scenario(json.dumps(MINIMAL_MODES))
    path = cli.emit(ResultTable([Column("x", "float"), Column("z", "complex")]), s, str(tmp_path / "e"))[0]
    lines = path.read_text().splitlines()
    assert lines[-1] == "x,z_re,z_im"
    assert all(line.startswith("# ") for line in lines[:-1])


def test_csv_json_cross_check(tmp_path):
    for name in ("slab_sweep", "random_limit_schemes", "particle_phase_jumps"):
        s = cli.load_scenario(name)
        table = cli.RUNNERS[s.kind](s)
        csv_path = cli.emit(table, s, str(tmp_path / name), "csv")[0]
        json_path = cli.emit(table, s, str(tmp_path / name), "json")[0]
        _, cols, rows = cli.read_csv(csv_path)
        doc = json.loads(json_path.read_text())
        assert doc["columns"] == cols
        for a, b in zip(rows, doc["rows"]):
            for x, y in zip(a, b):
                if isinstance(x, str):
                    assert x == y
                else:
                    assert abs(x - y) <= 1e-15 * max(1.0, abs(x))


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    s = cli.parse_scenario(json.dumps(MINIMAL_MODES))
    with pytest.raises(OutputError):
        cli.run_scenario(s, str(blocker / "sub" / "out"))


def test_filter_same_seed_byte_identical(tmp_path):
    s = cli.parse_scenario(json.dumps(FILTER))
    a = cli.run_scenario(s, str(tmp_path / "a"))[1]
    b = cli.run_scenario(s, str(tmp_path / "b"))[1]
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()
    s.seed = 5
    c = cli.run_scenario(s, str(tmp_path / "c"))[1]
    assert c[0].read_bytes() != a[0].read_bytes()


def test_perfect_mirror_pressure_force_line(tmp_path):
    s = cli.load_scenario("perfect_mirror_pressure")
    _, paths = cli.run_scenario(s, str(tmp_path / "pm"))
    _, cols, rows = cli.read_csv(paths[0])
    line = np.array([r[cols.index("force_line")] for r in rows])
    k = s.parameters["model"]["k"]
    assert np.max(np.abs(line / (-2 * s.constants.hbar * k) - 1)) < 0.01


def test_main_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(MINIMAL_MODES))
    assert cli.main(["modes", str(good), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o.csv").exists()
    bad = tmp_path / "bad.json"
    doc = json.loads(json.dumps(FILTER))
    del doc["parameters"]["dt"]
    bad.write_text(json.dumps(doc))
    assert cli.main(["filter", str(bad)]) == 2
    assert "dt" in capsys.readouterr().err
    assert cli.main(["filter", str(good)]) == 2
    blocker = tmp_path / "blk"
    blocker.write_text("")
    assert cli.main(["modes", str(good), "--out", str(blocker / "x" / "y")]) == 5
    err = capsys.readouterr().err
    assert "OutputError" in err and "modes" in err


def test_main_numeric_error_code(tmp_path, capsys):
    doc = json.loads(json.dumps(MINIMAL_MODES))
    doc["parameters"] = {"geometry": "slab", "params": {"n_r": 1.0, "n_l": 1.0, "n": 0.0, "a": 0.3, "q": 0.0},
                         "omega": [1.0]}
    p = tmp_path / "slab.json"
    p.write_text(json.dumps(doc))
    assert cli.main(["modes", str(p), "--out", str(tmp_path / "s")]) == 3
    assert "SingularityError" in capsys.readouterr().err


def test_flag_overrides(tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(MINIMAL_MODES))
    assert cli.main(["--seed", "9", "modes", str(good), "--out", str(tmp_path / "o"), "--hbar", "2",
                     "--format", "json"]) == 0
    doc = json.loads((tmp_path / "o.json").read_text())
    assert doc["header"]["seed"] == 9 and doc["header"]["hbar"] == 2.0


def test_check_and_list(capsys):
    assert cli.main(["check"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == len(cli.invariant_checks())
    assert cli.main(["list"]) == 0
    assert "perfect_mirror_pressure" in capsys.readouterr().out
