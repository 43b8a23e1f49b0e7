import csv
import io
import json

import pytest

from pmmviterbi.cli import main
from pmmviterbi.dp import viterbi_path
from pmmviterbi.io import load_canonical, read_observations


def run(capsys, *argv, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_simulate_writes_csv(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, _, _ = run(capsys, "simulate", "--model", "noinf", "--steps", "50", "--seed", "1",
                     "--out", str(out))
    assert code == 0
    data = rows(out.read_text())
    assert len(data) == 50 and set(data[0]) == {"t", "x", "y"}


def test_simulate_gaussian_columns(capsys):
    code, out, _ = run(capsys, "simulate", "--model", "glm-scalar", "--steps", "4", "--seed", "2")
    assert code == 0 and out.splitlines()[0] == "t,x_1,y"


def test_missing_model_is_usage_error(capsys):
    code, _, err = run(capsys, "simulate", "--model", "nope.json", "--steps", "5", "--seed", "1")
    assert code == 2 and "not found" in err


def test_decode_noinf_majority(tmp_path, capsys):
    obs = tmp_path / "o.csv"
    obs.write_text("t,x\n1,1\n2,1\n3,1\n4,2\n5,1\n")
    code, out, err = run(capsys, "decode", "--model", "noinf", "--obs", str(obs))
    assert code == 0
    assert [int(r["v"]) for r in rows(out)] == [1, 1, 1, 1, 1]
    assert "loglik" in json.loads(err)


def test_decode_identity_hmm_majority(tmp_path, capsys):
    obs = tmp_path / "o.csv"
    obs.write_text("t,x\n1,2\n2,2\n3,1\n4,2\n")
    code, out, _ = run(capsys, "decode", "--model", "nonodes", "--obs", str(obs), "--exact")
    assert code == 0 and {int(r["v"]) for r in rows(out)} == {2}


def test_online_decode_from_stdin(tmp_path, capsys, monkeypatch):
    traj = tmp_path / "t.csv"
    main(["simulate", "--model", "two-state-pmm", "--steps", "400", "--seed", "3",
          "--out", str(traj)])
    capsys.readouterr()
    code, out, err = run(capsys, "decode", "--model", "two-state-pmm", "--obs", "-", "--online",
                         "--order", "1", stdin=traj.read_text(), monkeypatch=monkeypatch)
    assert code == 0
    diag = json.loads(err)
    assert diag["committed"] > 100
    model = load_canonical("two-state-pmm")
    obs = read_observations(traj, model)
    path = [int(r["v"]) for r in rows(out)]
    assert [int(r["t"]) for r in rows(out)] == list(range(1, 401))
    assert abs(diag["loglik"] - viterbi_path(model, obs).loglik) < 1e-9
    assert len(path) == 400


def test_online_zero_likelihood_exit(tmp_path, capsys):
    obs = tmp_path / "o.csv"
    obs.write_text("t,x\n1,1\n2,2\n")
    # two-state PMM has full support, so use a pinned-zero generic model
    model = tmp_path / "m.json"
    model.write_text(json.dumps({
        "type": "generic_discrete", "n_obs": 2, "n_states": 1,
        "kernel": [["1", "0"], ["0", "1"]], "initial": ["1", "0"]}))
    code, _, err = run(capsys, "decode", "--model", str(model), "--obs", str(obs), "--online")
    assert code == 1 and "zero-likelihood" in err
    code, _, err = run(capsys, "decode", "--model", str(model), "--obs", str(obs))
    assert code == 1


def test_check_reports(capsys):
    code, out, _ = run(capsys, "check", "--model", "glm-scalar", "--strict-exit")
    assert code == 0 and json.loads(out)["overall"] is True
    code, out, _ = run(capsys, "check", "--model", "noinf-hmm", "--which", "hmm", "--strict-exit")
    rep = json.loads(out)
    assert code == 1
    first = rep["reports"]["hmm"]["failing"][0]
    assert first["item"] == "condition (i)" and first["state"] == 3
    code, out, _ = run(capsys, "check", "--model", "nonodes", "--which", "discrete")
    assert code == 0
    assert json.loads(out)["reports"]["discrete"]["failing"][0]["item"] == "irreducibility"


def test_check_wrong_family_is_usage_error(capsys):
    code, _, _ = run(capsys, "check", "--model", "two-state-pmm", "--which", "glm")
    assert code == 2


def test_barrier_command(capsys):
    block = ",".join(["1"] * 19)
    code, out, _ = run(capsys, "barrier", "--model", "two-state-pmm", "--block", block,
                       "--falsify", "50", "--strict-exit")
    data = json.loads(out)
    assert code == 0 and data["result"]["order"] == 17 and data["counterexample"] is None
    code, out, _ = run(capsys, "barrier", "--model", "two-state-pmm", "--block", "1,1,1",
                       "--strict-exit")
    assert code == 1 and json.loads(out)["result"]["violations"]


def test_guard_violation_exit(capsys):
    code, _, err = run(capsys, "barrier", "--model", "two-state-pmm", "--max-cycle-len", "9")
    assert code == 3 and "guard" in err


def test_experiment_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["experiment", "--name", "no-stabilize", "--seed", "5", "--steps", "3000",
                     "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_tiebreak_experiment_output(capsys):
    code, out, _ = run(capsys, "experiment", "--name", "tiebreak-pathology")
    assert code == 0
    data = rows(out)
    assert {(r["pin_t2"], r["pin_t4"]): r["finite"] for r in data} == {
        ("1", "1"): "0", ("1", "2"): "1", ("2", "1"): "1", ("2", "2"): "0"}


def test_unknown_experiment_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "--name", "bogus"])
    assert exc.value.code == 2
