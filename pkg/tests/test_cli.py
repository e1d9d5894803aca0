import json
import re
import signal
import subprocess
import sys

from helpers import EASY_WORLD, REF_WORLD, rlh

ACTIONS = ["FORWARD", "BACKWARD", "LEFT", "RIGHT", "STOP"]


def write_config(tmp_path, **overrides):
    doc = {
        "algorithm": "reinforce",
        "world_path": str(EASY_WORLD),
        "budget": 6,
        "env": {"action_set": ACTIONS, "max_steps": 20},
        "hyperparams": {"batch_episodes": 3, "hidden": [16]},
        "eval_every": 3,
        "eval_episodes": 2,
        "out_dir": "out",
        "backend": "inmemory",
    }
    doc.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def test_train_report_and_eval(tmp_path):
    cfg = write_config(tmp_path)
    res = rlh("train", "--config", str(cfg), "--seed", "3")
    assert res.returncode == 0, res.stderr
    assert "Episodes             6" in res.stdout
    assert f"report: {(tmp_path / 'out' / 'report.json').resolve()}" in res.stdout
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["seed"] == 3 and report["episodes"] == 6

    res = rlh("report", "--dir", str(tmp_path / "out"))
    assert res.returncode == 0 and "Algorithm            reinforce" in res.stdout
    assert res.stderr == ""

    res = rlh("eval", "--checkpoint", str(tmp_path / "out" / "policy.json"), "--config", str(cfg), "--episodes", "3")
    assert res.returncode == 0, res.stderr
    out = json.loads(res.stdout)
    assert out["episodes"] == 3 and 0.0 <= out["success_rate"] <= 1.0


def test_train_out_override(tmp_path):
    cfg = write_config(tmp_path)
    res = rlh("train", "--config", str(cfg), "--out", str(tmp_path / "elsewhere"))
    assert res.returncode == 0
    assert (tmp_path / "elsewhere" / "metrics.jsonl").exists()


def test_report_warns_on_mismatch(tmp_path):
    cfg = write_config(tmp_path)
    assert rlh("train", "--config", str(cfg)).returncode == 0
    metrics = tmp_path / "out" / "metrics.jsonl"
    metrics.write_text("\n".join(metrics.read_text().splitlines()[:-1]) + "\n")
    res = rlh("report", "--dir", str(tmp_path / "out"))
    assert res.returncode == 0 and "warning" in res.stderr


def test_eval_rejects_mismatched_checkpoint(tmp_path):
    cfg = write_config(tmp_path)
    assert rlh("train", "--config", str(cfg)).returncode == 0
    other = write_config(tmp_path, env={"action_set": ["STOP", "FORWARD"]})
    res = rlh("eval", "--checkpoint", str(tmp_path / "out" / "policy.json"), "--config", str(other))
    assert res.returncode == 1 and "action_set" in res.stderr


def test_worldgen(tmp_path):
    res = rlh("worldgen", "--world", str(REF_WORLD), "--instances", "2", "--out", str(tmp_path))
    assert res.returncode == 0
    assert res.stdout.split() == [str(tmp_path / "move_to_target_0.json"), str(tmp_path / "move_to_target_1.json")]
    assert rlh("worldgen", "--world", str(REF_WORLD), "--instances", "0", "--out", str(tmp_path)).returncode == 1


def test_config_and_usage_errors_exit_one(tmp_path):
    assert rlh("train", "--config", str(tmp_path / "missing.json")).returncode == 1
    bad = write_config(tmp_path, budget=-1)
    res = rlh("train", "--config", str(bad))
    assert res.returncode == 1 and "budget" in res.stderr
    assert rlh("train").returncode == 1
    assert rlh("frobnicate").returncode == 1
    assert rlh("report", "--dir", str(tmp_path / "nothing")).returncode == 1


def test_runtime_abort_exits_two(tmp_path):
    cfg = write_config(tmp_path, backend="bus", simulator_cmd="/nonexistent/simulator {world}")
    res = rlh("train", "--config", str(cfg))
    assert res.returncode == 2
    assert "ABORTED" in res.stdout


def test_standalone_broker_and_sim(tmp_path):
    broker = subprocess.Popen([sys.executable, "-m", "rlharness", "broker"], stdout=subprocess.PIPE, text=True)
    try:
        line = broker.stdout.readline()
        address = re.match(r"broker listening on (\S+)", line).group(1)
        cfg = write_config(tmp_path, backend="bus", broker=address)
        res = rlh("train", "--config", str(cfg))
        assert res.returncode == 0, res.stderr
    finally:
        broker.send_signal(signal.SIGTERM)
        assert broker.wait(10) == 0
        broker.stdout.close()
