import json

import pytest
from fastapi.testclient import TestClient

from teamlp import api
from teamlp.cli import main
from teamlp.formats import load_team
from teamlp.linear import import_lp
from teamlp.service import app


@pytest.fixture
def files(tmp_path):
    team = tmp_path / "t.team"
    team.write_text("x y #weight\n0 1 1/2\n1 0 1/2\n")
    skew = tmp_path / "skew.team"
    skew.write_text("x y #weight\n0 1 1\n")
    struct = tmp_path / "s.tls"
    struct.write_text("domain 0 1 2\nrel R/1 = (0)\n")
    return {"team": team, "skew": skew, "struct": struct, "dir": tmp_path}


def test_eval_atom_exit_codes(files, capsys):
    assert main(["eval-atom", "--team", str(files["team"]), "--formula", "approx(x;y)"]) == 0
    assert main(["eval-atom", "--team", str(files["skew"]), "--formula", "approx(x;y)"]) == 1


def test_check_open_formula(files, capsys):
    argv = ["check", "--structure", str(files["struct"]), "--team", str(files["team"]), "--formula", "approx(x;y)", "--json"]
    assert main(argv) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["schema"] == api.SCHEMA and report["verdict"] is True
    assert main(argv[:-1] + ["--engine", "fm"]) == 0


def test_sentence(files, capsys):
    assert main(["sentence", "--structure", str(files["struct"]), "--formula", "E x E y (x != y & approx(x;y))"]) == 0
    assert main(["sentence", "--structure", str(files["struct"]), "--formula", "A x R(x)"]) == 1


def test_implies_writes_counterexample(files, capsys, monkeypatch):
    monkeypatch.chdir(files["dir"])
    assert main(["implies", "--premises", "x ~ y", "--goal", "x y ~ y x"]) == 1
    X = load_team(files["dir"] / "counterexample.team")
    assert len(X) == 3
    assert main(["implies", "--premises", "x ~ y", "--goal", "y ~ x"]) == 0
    assert "symmetry" in capsys.readouterr().out
    assert main(["implies", "--premises", "x ~ y", "--goal", "y ~ x", "--no-symmetry"]) == 1


def test_lp_export_round_trip(files):
    out = files["dir"] / "f.lin"
    argv = ["lp-export", "--structure", str(files["struct"]), "--formula", "Ef f/1:D A x A y f(x) = f(y)", "--out", str(out)]
    assert main(argv) == 0
    fam = import_lp(out)
    assert len(fam.systems) == 1
    assert main(argv[:-1] + [str(files["dir"] / "g.lin")]) == 0
    assert fam.equivalent(import_lp(files["dir"] / "g.lin"))


def test_translate_trace(capsys):
    assert main(["translate", "--formula", "approx(x;y)", "--vars", "x y", "--target", "eso", "--trace"]) == 0
    out = capsys.readouterr().out
    assert "sum{" in out


def test_usage_errors(files, capsys):
    assert main(["eval-atom", "--team", str(files["dir"] / "missing.team"), "--formula", "approx(x;y)"]) == 2
    assert main(["eval-atom", "--team", str(files["team"]), "--formula", "approx(x;"]) == 2
    assert main(["check", "--formula", "approx(x;y)"]) == 2
    err = capsys.readouterr().err
    assert "Traceback" not in err


def test_budget_exit_code(files):
    team = files["dir"] / "full.team"
    team.write_text("x y #weight\n0 0 1\n0 1 1\n1 0 1\n1 1 1\n")
    struct = files["dir"] / "two.tls"
    struct.write_text("domain 0 1\n")
    argv = ["check", "--structure", str(struct), "--team", str(team), "--formula", "(dep(x;y) | dep(y;x))", "--budget", "1"]
    assert main(argv) == 3


def test_json_is_deterministic(files, capsys):
    argv = ["implies", "--premises", "x ~ y; y ~ z", "--goal", "x ~ z", "--json"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first


# service


def test_service_endpoints():
    client = TestClient(app)
    assert client.get("/health").json()["status"] == "ok"
    r = client.post("/implies", json={"premises": "x ~ y", "goal": "x y ~ y x"})
    body = r.json()
    assert body["exit_code"] == 1 and body["verdict"] is False
    assert "counterexample.team" in body["artifacts"]
    r = client.post("/check", json={"structure": "domain 0 1\n", "formula": "approx(x;y)", "team": "x y #weight\n0 1 1/2\n1 0 1/2\n"})
    assert r.json()["verdict"] is True
    r = client.post("/eval-atom", json={"team": "x y #weight\n0 1 1\n", "formula": "approx(x;"})
    assert r.json()["exit_code"] == 2


def test_cli_matches_service(files, capsys):
    client = TestClient(app)
    remote = client.post("/eval-atom", json={"team": files["team"].read_text(), "formula": "approx(x;y)"}).json()
    main(["eval-atom", "--team", str(files["team"]), "--formula", "approx(x;y)", "--json"])
    local = json.loads(capsys.readouterr().out)
    assert local == remote
