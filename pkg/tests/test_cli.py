import csv
import io
import subprocess
import sys
from pathlib import Path

import pytest

from c2rl import cli, optimizer
from c2rl.cli import run_capture
from c2rl.codec import decode, decode_c2rl

GOLDEN = Path(__file__).parent / "golden"
SMALL_SIM = ["--set", "area=1000x1000", "--set", "rsu_count=5", "--set", "vehicle_count=30",
             "--set", "duration=300", "--set", "revoked_per_hour=10", "--set", "pseudonyms_per_vehicle=100"]


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("C2RL_DELTA", raising=False)
    monkeypatch.delenv("C2RL_KEY", raising=False)


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- golden outputs ---------------------------------------------------------

def test_optimize_csv_golden():
    code, text = run_capture(["optimize", "--n", "300", "--delta", "1e-3", "--csv"])
    assert code == 0
    assert text == (GOLDEN / "optimize_n300.csv").read_text()


def test_gain_sweep_golden():
    code, text = run_capture(["gain", "--n", "1000", "100000", "--sweep", "--points", "5", "--csv"])
    assert code == 0
    assert text == (GOLDEN / "gain_sweep.csv").read_text()


def test_simulate_csv_golden():
    code, text = run_capture(["simulate", *SMALL_SIM, "--seed", "1", "2", "--csv", "-"])
    assert code == 0
    assert text == (GOLDEN / "simulate_small.csv").read_text()


# -- optimize / gain --------------------------------------------------------

def test_optimize_human_output():
    code, text = run_capture(["optimize", "--n", "300"])
    assert code == 0
    assert "m* = 4314 bits (540 bytes" in text
    assert "k* = 10" in text


def test_delta_from_environment(monkeypatch):
    monkeypatch.setenv("C2RL_DELTA", "0.01")
    _, text = run_capture(["optimize", "--n", "1000", "--csv"])
    assert rows(text)[0]["m_star"] == "9594"
    _, text = run_capture(["optimize", "--n", "1000", "--delta", "0.1", "--csv"])
    assert rows(text)[0]["m_star"] == "4809"
    monkeypatch.setenv("C2RL_DELTA", "lots")
    assert run_capture(["optimize", "--n", "10"])[0] == 1


def test_gain_sweep_range_and_monotone():
    code, text = run_capture(["gain", "--n", "1000", "--delta-sweep", "1e-3:1e-1", "--points", "9", "--csv"])
    assert code == 0
    table = rows(text)
    gains = [float(r["gain"]) for r in table]
    assert len(gains) == 9
    assert gains == sorted(gains)
    assert float(table[0]["delta"]) == pytest.approx(1e-3)
    assert float(table[-1]["delta"]) == pytest.approx(1e-1)


def test_gain_human_table():
    code, text = run_capture(["gain", "--n", "300", "--delta", "1e-3"])
    assert code == 0
    assert "4314" in text and "5.753247" in text


@pytest.mark.parametrize("argv", [
    [], ["frobnicate"], ["optimize"], ["optimize", "--n", "x"], ["gain", "--n", "5", "--delta-sweep", "0.5"],
    ["gain", "--n", "5", "--delta-sweep", "0.2:0.1"], ["simulate", "--format", "zip"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert run_capture(argv)[0] == 1


def test_bad_delta_is_data_error():
    assert run_capture(["optimize", "--n", "10", "--delta", "1.5"])[0] == 2


def test_infeasible_exit_3(monkeypatch):
    def boom(*_):
        raise optimizer.InfeasibleError("no room")
    monkeypatch.setattr(cli, "optimize", boom)
    assert run_capture(["optimize", "--n", "10"])[0] == 3


# -- build / inspect / verify ----------------------------------------------

@pytest.fixture
def revoked_file(tmp_path):
    path = tmp_path / "revoked.txt"
    path.write_text("# revoked ids\n" + "".join(f"{i:020x},{1000 + i}\n" for i in range(50)))
    return path


def test_build_crl_and_inspect(tmp_path, revoked_file):
    out = tmp_path / "list.crl"
    code, text = run_capture(["build", "--revoked", str(revoked_file), "-o", str(out), "--serial", "9"])
    assert code == 0 and "50 entries" in text
    assert len(out.read_bytes()) == 230 + 14 * 50
    assert len(decode(out.read_bytes()).entries) == 50
    code, text = run_capture(["inspect", str(out), "--csv"])
    info = rows(text)[0]
    assert (info["kind"], info["serial"], info["entries"], info["signature_valid"]) == ("crl", "9", "50", "true")


def test_build_c2rl_skips_expired(tmp_path, revoked_file):
    out = tmp_path / "list.c2rl"
    code, _ = run_capture(["build", "--revoked", str(revoked_file), "--bloom", "--now", "1010",
                           "--delta", "0.01", "-o", str(out)])
    assert code == 0
    c2 = decode_c2rl(out.read_bytes())
    assert c2.filter.insert_count == 40
    code, text = run_capture(["inspect", str(out)])
    assert "kind: c2rl" in text and "signature_valid: true" in text


def test_verify_verdicts(tmp_path, revoked_file):
    out = tmp_path / "list.c2rl"
    run_capture(["build", "--revoked", str(revoked_file), "--bloom", "-o", str(out)])
    code, text = run_capture(["verify", "--c2rl", str(out), "--cert", f"{7:020x}"])
    assert (code, text.strip()) == (0, "revoked")
    code, text = run_capture(["verify", "--c2rl", str(out), "--cert", "ff" * 10, "--csv"])
    assert code == 0 and rows(text)[0]["verdict"] == "trusted"


def test_verify_wrong_key_is_data_error(tmp_path, revoked_file):
    out = tmp_path / "list.c2rl"
    run_capture(["build", "--revoked", str(revoked_file), "--bloom", "-o", str(out), "--key", "aa55"])
    assert run_capture(["verify", "--c2rl", str(out), "--cert", "00" * 10, "--key", "aa55"])[0] == 0
    assert run_capture(["verify", "--c2rl", str(out), "--cert", "00" * 10])[0] == 2
    code, text = run_capture(["inspect", str(out)])
    assert code == 0 and "signature_valid: false" in text


def test_key_from_environment(tmp_path, revoked_file, monkeypatch):
    out = tmp_path / "list.crl"
    monkeypatch.setenv("C2RL_KEY", "0102")
    run_capture(["build", "--revoked", str(revoked_file), "-o", str(out)])
    assert "signature_valid: true" in run_capture(["inspect", str(out)])[1]
    monkeypatch.delenv("C2RL_KEY")
    assert "signature_valid: false" in run_capture(["inspect", str(out)])[1]
    assert run_capture(["inspect", str(out), "--key", "zz"])[0] == 1


def test_data_errors_exit_2(tmp_path):
    junk = tmp_path / "junk.crl"
    junk.write_bytes(b"\x07" * 40)
    assert run_capture(["inspect", str(junk)])[0] == 2
    assert run_capture(["inspect", str(tmp_path / "missing.crl")])[0] == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("nothex\n")
    assert run_capture(["build", "--revoked", str(bad), "-o", str(tmp_path / "x")])[0] == 2


# -- enroll / revoke / issue ------------------------------------------------

def test_revocation_workflow(tmp_path):
    state = tmp_path / "state.csv"
    for vid in ("car-1", "car-2", "car-3"):
        code, _ = run_capture(["enroll", "--state", str(state), "--vid", vid, "--pseudonyms", "30"])
        assert code == 0
    code, text = run_capture(["revoke", "--state", str(state), "--vid", "car-2"])
    assert code == 0 and "35 new certificates" in text
    out = tmp_path / "e1.c2rl"
    code, text = run_capture(["issue", "--state", str(state), "--delta", "1e-3", "-o", str(out)])
    assert code == 0 and text.startswith("epoch 1: 35 certificates")
    c2 = decode_c2rl(out.read_bytes())
    assert c2.epoch == 1
    code, text = run_capture(["issue", "--state", str(state), "-o", str(tmp_path / "e2.c2rl")])
    assert text.startswith("epoch 2")
    assert run_capture(["revoke", "--state", str(state), "--vid", "nobody"])[0] == 2
    assert run_capture(["enroll", "--state", str(state), "--vid", "car-1"])[0] == 2


def test_enroll_is_seeded(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        run_capture(["enroll", "--state", str(path), "--vid", "v", "--pseudonyms", "5", "--seed", "3"])
    assert a.read_bytes() == b.read_bytes()


# -- simulate ---------------------------------------------------------------

def test_simulate_config_file_and_csv_path(tmp_path):
    cfg = tmp_path / "scenario.conf"
    cfg.write_text("area = 1000x1000\nrsu_count = 4\nvehicle_count = 20\nduration = 300\n"
                   "revoked_per_hour = 5\npseudonyms_per_vehicle = 100\nseed = 8\n")
    out = tmp_path / "sim.csv"
    code, text = run_capture(["simulate", "--config", str(cfg), "--csv", str(out)])
    assert code == 0 and "gains:" in text
    table = rows(out.read_text())
    assert [r["format"] for r in table] == ["crl", "c2rl"]
    assert {r["seed"] for r in table} == {"8"}


def test_simulate_single_format():
    code, text = run_capture(["simulate", *SMALL_SIM, "--format", "c2rl", "--csv", "-"])
    assert code == 0
    assert [r["format"] for r in rows(text)] == ["c2rl"]


def test_simulate_bad_config_is_data_error():
    assert run_capture(["simulate", "--set", "bogus=1"])[0] == 2


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "c2rl.cli", "optimize", "--n", "300", "--csv"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout == (GOLDEN / "optimize_n300.csv").read_text()
