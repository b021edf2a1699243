import json
import os

import pytest

from s2pc.cli import load_config, main


@pytest.fixture
def cfg_file(tmp_path):
    raw = json.loads(load_config_text("demo-pid"))
    path = tmp_path / "pid.json"
    path.write_text(json.dumps(raw))
    return path, raw


def load_config_text(name):
    from importlib import resources
    return resources.files("s2pc").joinpath("configs", f"{name}.json").read_text()


def test_plan_pid(capsys):
    assert main(["plan", "demo-pid"]) == 0
    out = capsys.readouterr().out
    assert "feasible_ells: 32,40,48,56" in out
    assert "q_bits: 256" in out


def test_plan_tighter_eps_needs_more_bits(tmp_path, capsys):
    raw = json.loads(load_config_text("demo-pid"))
    raw["modulus_bits"] = "auto"
    raw["ell_sweep"] = []
    for eps in (2**-10, 2**-20):
        raw["epsilon"] = eps
        p = tmp_path / f"e{eps}.json"
        p.write_text(json.dumps(raw))
        assert main(["plan", str(p)]) == 0
    out = capsys.readouterr().out
    ells = [int(l.split()[1]) for l in out.splitlines() if l.startswith("ell: ")]
    assert ells[1] > ells[0]


def test_plan_unstable_exit3(tmp_path, capsys):
    raw = json.loads(load_config_text("demo-pid"))
    raw["plant"]["Ap"] = [[1.5 if i == j else 0.0 for j in range(4)] for i in range(4)]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(raw))
    assert main(["plan", str(p)]) == 3
    assert "closed-loop stability" in capsys.readouterr().err


def test_bad_json_exit2(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert main(["run", str(p)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_missing_seed_exit2(cfg_file, monkeypatch):
    path, raw = cfg_file
    raw.pop("seed")
    path.write_text(json.dumps(raw))
    monkeypatch.delenv("S2PC_SEED", raising=False)
    assert main(["run", str(path), "--horizon", "3"]) == 2
    monkeypatch.setenv("S2PC_SEED", "5")
    assert main(["run", str(path), "--horizon", "3"]) == 0


def test_run_pid_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "demo-pid", "--ell", "32", "--out", str(a)]) == 0
    assert main(["run", "demo-pid", "--ell", "32", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    out = capsys.readouterr().out
    assert "result: pass" in out and "max_abs_delta_bits: 0" in out


def test_fourtank_brunovsky_fewer_bytes(tmp_path, capsys):
    totals = {}
    for v in ("baseline", "brunovsky"):
        assert main(["run", "demo-fourtank", "--variant", v, "--horizon", "10", "--out", str(tmp_path / f"{v}.csv")]) == 0
        last = (tmp_path / f"{v}.csv").read_text().splitlines()[-1].split(",")
        totals[v] = int(last[-3])
    assert totals["brunovsky"] < totals["baseline"]


def test_unreachable_eps_exit3(cfg_file):
    path, raw = cfg_file
    raw["epsilon"] = 1e-30
    path.write_text(json.dumps(raw))
    # the forced ell cannot meet this eps, so planning refuses
    assert main(["run", str(path), "--horizon", "5"]) == 3


def test_eps_miss_exit1(monkeypatch, capsys):
    from s2pc.sim import ClosedLoopTrace
    monkeypatch.setattr(ClosedLoopTrace, "max_error", lambda self: 1.0)
    assert main(["run", "demo-pid", "--horizon", "3"]) == 1
    assert "result: fail" in capsys.readouterr().out


def test_protocol_abort_exit4(monkeypatch, capsys):
    from s2pc.protocol import ProtocolAbort, Session
    def boom(self, y_hat, exact=False):
        raise ProtocolAbort("link closed", 2)
    monkeypatch.setattr(Session, "step", boom)
    assert main(["run", "demo-pid", "--horizon", "3"]) == 4
    assert "step 2" in capsys.readouterr().err


def test_sweep(tmp_path, capsys):
    assert main(["sweep", "demo-pid", "--out", str(tmp_path)]) == 0
    files = sorted(os.listdir(tmp_path))
    assert files == [f"demo-pid-ell{e}.csv" for e in (32, 40, 48, 56)]
    assert capsys.readouterr().out.count("result: pass") == 4


def test_sweep_empty_list_exit2(tmp_path):
    assert main(["sweep", "demo-pid", "--ell", "", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "demo-pid", "--ell", "a,b", "--out", str(tmp_path)]) == 2


def test_usage_error():
    with pytest.raises(SystemExit) as ei:
        main(["frobnicate"])
    assert ei.value.code == 2
