import json

import pytest
from click.testing import CliRunner

from imt.cli import load_config, main


@pytest.fixture
def run(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "xdg"))
    for key in list(__import__("os").environ):
        if key.startswith("IMT_"):
            monkeypatch.delenv(key)
    runner = CliRunner()

    def invoke(*args, env=None):
        return runner.invoke(main, list(args), env=env, catch_exceptions=False)

    return invoke


def test_version(run):
    res = run("--version")
    assert res.exit_code == 0 and "imt" in res.output


def test_space(run):
    res = run("space", "--label", "27.4.a.b", "--format", "json")
    data = json.loads(res.output)
    assert res.exit_code == 0
    row = data[0] if isinstance(data, list) else data
    assert row["cusp_dim"] == 12


def test_eigen_marks_the_selected_orbit(run):
    res = run("eigen", "--label", "27.4.a.b")
    assert res.exit_code == 0
    assert "*" in res.output


def test_theta_json(run):
    res = run("theta", "--label", "27.4.a.b", "--nmax", "1", "--format", "json")
    assert res.exit_code == 0
    assert '"n": 1' in res.output


def test_invariants_tsv(run):
    res = run("invariants", "--label", "27.4.a.b", "--format", "tsv")
    lines = [line.split("\t") for line in res.output.strip().splitlines()]
    assert lines[0][3] == "lambda"
    assert [line[3] for line in lines[1:]] == ["0", "2", "12", "62"]


def test_signed_text(run):
    res = run("signed", "--label", "27.4.a.b", "--p", "5", "--nmax", "3")
    assert res.exit_code == 0
    assert "λ♯ = 0" in res.output and "λ♭ = 2" in res.output


def test_signed_deep_gate(run):
    res = run("signed", "--label", "27.4.a.b", "--nmax", "4")
    assert res.exit_code == 1 and "OutOfRange" in res.output


def test_unknown_label_offline(run):
    res = run("signed", "--label", "999.2.a.z", "--no-net")
    assert res.exit_code == 1 and "NotFound" in res.output


def test_cmatrix(run):
    res = run("cmatrix", "--label", "27.4.a.b", "--format", "json")
    rows = json.loads(res.output)
    assert [r["n"] for r in rows] == [1, 2]
    assert all(r["structure"] and r["consistent"] for r in rows)
    res = run("cmatrix", "--ap", "0", "--k", "6", "--n", "1", "--format", "json")
    assert json.loads(res.output)[0]["structure"]
    res = run("cmatrix", "--ap", "15", "--k", "4", "--trunc", "5")
    assert res.exit_code == 1 and "TruncationTooSmall" in res.output


def test_serre(run):
    res = run("serre", "--p", "7", "--k", "36")
    assert res.exit_code == 0 and "{11, 17, 29, 35}" in res.output
    res = run("serre", "--p", "5", "--k", "16", "--format", "json")
    assert json.loads(res.output)["elements"] == [7, 15]


def test_compare(run):
    res = run("compare", "--label", "9.4.a.a", "--label", "9.8.a.b", "--nmax", "2", "--format", "json")
    out = json.loads(res.output)
    assert out["all_equal"] and out["symbols"]["congruent"]
    assert run("compare", "--label", "9.4.a.a").exit_code != 0


def test_table_file_and_workers(run, tmp_path):
    forms = tmp_path / "forms.txt"
    forms.write_text("# two rows\nG0N14k2A\n27.4.a.b\n")
    res = run("table", "--forms", str(forms), "--nmax", "2", "--workers", "2")
    lines = res.output.strip().splitlines()
    assert res.exit_code == 0 and len(lines) == 3
    assert lines[1].split("\t")[:1] == ["G0N14k2A"]
    assert lines[2].split("\t")[6:9] == ["0", "2", "12"]


def test_bkval(run):
    res = run("bkval", "--label", "27.4.a.b", "--format", "json")
    rows = json.loads(res.output)
    assert [r["closed_form"] for r in rows] == ["1/2", "3/5", "31/50"]
    assert all(r["agree"] and r["hypothesis"] for r in rows)


def test_out_file_and_determinism(run, tmp_path):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    for path in (a, b):
        assert run("table", "--label", "27.4.a.b", "--nmax", "2", "--format", "tsv", "--out", str(path)).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_cache_matches_fresh_run(run, tmp_path):
    args = ["invariants", "--label", "27.4.a.b", "--format", "json"]
    fresh = run(*args).output
    cached_first = run(*args, "--cache-dir", str(tmp_path / "c")).output
    cached_second = run(*args, "--cache-dir", str(tmp_path / "c")).output
    assert fresh == cached_first == cached_second
    assert list((tmp_path / "c").glob("theta-*.json"))


def test_precedence_flag_env_config(run, tmp_path):
    ini = tmp_path / "imt.ini"
    ini.write_text("[imt]\np = 7\n\n[imt.serre]\nformat = json\n")
    res = run("serre", "--k", "12")
    assert json.loads(res.output)["p"] == 7
    res = run("serre", "--k", "12", env={"IMT_P": "5"})
    assert json.loads(res.output)["p"] == 5
    res = run("serre", "--k", "12", "--p", "11", env={"IMT_P": "5"})
    assert json.loads(res.output)["p"] == 11


def test_config_env_pointer(run, tmp_path):
    ini = tmp_path / "elsewhere.ini"
    ini.write_text("[imt]\nformat = json\n")
    res = run("serre", "--k", "8", env={"IMT_CONFIG": str(ini)})
    assert json.loads(res.output)["elements"] == [7]


def test_load_config_sections(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[imt]\nnmax = 2\nno-net = true\n\n[imt.table]\nnmax = 1\n")
    cfg = load_config(str(ini))
    assert cfg["signed"] == {"nmax": "2", "no_net": "true"}
    assert cfg["table"]["nmax"] == "1"


def test_config_labels_and_format(run, tmp_path):
    (tmp_path / "imt.ini").write_text("[imt.invariants]\nlabel = 27.4.a.b\nformat = tsv\nnmax = 1\n")
    res = run("invariants")
    assert res.exit_code == 0
    assert [line.split("\t")[3] for line in res.output.strip().splitlines()] == ["lambda", "0", "2"]
