import csv
import json
import os
import socket
import subprocess
import sys

import pytest

from reachbench import cli, selfcheck

FAST_AGENT = {"hidden": [16, 16], "batch_size": 8, "learning_starts": 8}


def write_config(tmp_path, **kw):
    cfg = {"algorithm": "td3", "episodes": 10, "eval_every_steps": 5, "eval_episodes": 3,
           "final_eval_episodes": 5, "agent": FAST_AGENT}
    cfg.update(kw)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "reachbench.cli", *args], capture_output=True,
                          text=True, timeout=300)


def test_help_lists_flags():
    out = run_cli("train", "--help").stdout
    for flag in ("--config", "--seed", "--episodes", "--algo", "--stage", "--her", "--reward",
                 "--remote", "--out"):
        assert flag in out


def test_train_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["train", "--config", write_config(tmp_path), "--out", str(out)]) == 0
    with open(out / "train_log.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10
    assert sorted(p for p in os.listdir(out) if p.endswith(".npz")) == ["checkpoint_final.npz"]
    assert (out / "final_summary.json").exists() and (out / "eval_log.csv").exists()


def test_train_is_byte_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    for name in ("a", "b"):
        assert cli.main(["train", "--config", cfg, "--seed", "5", "--out", str(tmp_path / name)]) == 0
    for f in ("train_log.csv", "eval_log.csv", "final_summary.json", "final_scatter.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_sparse_her_table_row(tmp_path):
    out = tmp_path / "run"
    cfg = write_config(tmp_path, reward="sparse", her=True, stage="A1")
    assert cli.main(["train", "--config", cfg, "--out", str(out)]) == 0
    with open(out / "final_table.csv") as fh:
        row = next(csv.DictReader(fh))
    assert (row["algorithm"], row["joints"], row["reward_type"], row["her"]) == ("td3", "1-3", "sparse", "yes")
    assert row["training_length"] == "10"


def test_config_errors_exit_2(tmp_path, capsys):
    assert cli.main(["train", "--config", write_config(tmp_path, episodes=0)]) == 2
    assert cli.main(["train", "--config", write_config(tmp_path, algorithm="ppo")]) == 2
    assert cli.main(["train", "--config", write_config(tmp_path, color="red")]) == 2
    assert cli.main(["train", "--config", str(tmp_path / "missing.json")]) == 2
    assert run_cli("train", "--stage").returncode == 2
    assert run_cli("frobnicate").returncode == 2


def test_eval_checkpoint(tmp_path):
    out = tmp_path / "run"
    cli.main(["train", "--config", write_config(tmp_path), "--out", str(out)])
    ck = str(out / "checkpoint_final.npz")
    for name in ("e1", "e2"):
        assert cli.main(["eval", ck, "--episodes", "20", "--out", str(tmp_path / name)]) == 0
    for f in ("eval_summary.json", "eval_table.csv", "eval_scatter.csv"):
        assert (tmp_path / "e1" / f).read_bytes() == (tmp_path / "e2" / f).read_bytes()
    rates = json.loads((tmp_path / "e1" / "eval_summary.json").read_text())["success_rate"]
    values = [rates[k] for k in sorted(rates, key=float, reverse=True)]
    assert values == sorted(values, reverse=True)


def test_eval_missing_checkpoint_exit_1(tmp_path):
    assert cli.main(["eval", str(tmp_path / "nope.npz")]) == 1
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a zip")
    assert cli.main(["eval", str(bad)]) == 1


def test_vision_demo(tmp_path):
    out = tmp_path / "vis"
    assert cli.main(["vision-demo", "--scenes", "300", "--out", str(out), "--ppm", "2"]) == 0
    with open(out / "vision_errors.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 300
    with open(out / "vision_summary.csv") as fh:
        agg = next(csv.DictReader(fh))
    assert float(agg["mean_abs_err_x"]) <= 0.02 and float(agg["mean_abs_err_y"]) <= 0.02
    assert (out / "scene_000.ppm").exists()
    first = (out / "vision_errors.csv").read_bytes()
    cli.main(["vision-demo", "--scenes", "300", "--out", str(out)])
    assert (out / "vision_errors.csv").read_bytes() == first


def test_vision_demo_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["vision-demo", "--scenes", "3", "--out", str(blocker / "sub")]) == 1


def test_selfcheck_passes_and_catches_bug(capsys):
    assert cli.main(["selfcheck"]) == 0
    assert "FAIL" not in capsys.readouterr().out

    def broken(net, cache, dout):
        grad, dx = type(net).backward(net, cache, dout)
        return grad * 1.001, dx

    report = selfcheck.run_selfcheck({"gradients": lambda: selfcheck.check_gradients(broken)})
    assert not report.passed
    assert [r.name for r in report.results if not r.passed] == ["gradients"]


def test_show_defaults(capsys):
    assert cli.main(["config", "show-defaults"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["curriculum"]["consecutive_successes"] == 15
    assert data["agent_defaults"]["sac"]["lr_actor"] == 3e-4


def test_serve_occupied_port_exit_1():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        s.listen()
        port = s.getsockname()[1]
        assert cli.main(["serve", "--port", str(port)]) == 1


def test_serve_answers_hello():
    from reachbench.service import RemoteEnv
    proc = subprocess.Popen([sys.executable, "-m", "reachbench.cli", "serve", "--port", "0"],
                            stdout=subprocess.PIPE, text=True)
    try:
        addr = proc.stdout.readline().split()[-1]
        RemoteEnv(addr).close()
    finally:
        proc.kill()
        proc.wait(10)
        proc.stdout.close()


def test_log_level_env(tmp_path):
    env = dict(os.environ, REACH_LOG_LEVEL="debug")
    out = subprocess.run([sys.executable, "-m", "reachbench.cli", "train", "--config",
                          write_config(tmp_path), "--out", str(tmp_path / "o")],
                         env=env, capture_output=True, text=True, timeout=300)
    assert out.returncode == 0 and "INFO reachbench.training" in out.stderr
    env["REACH_LOG_LEVEL"] = "error"
    out = subprocess.run([sys.executable, "-m", "reachbench.cli", "train", "--config",
                          write_config(tmp_path), "--out", str(tmp_path / "o")],
                         env=env, capture_output=True, text=True, timeout=300)
    assert out.returncode == 0 and "INFO" not in out.stderr
