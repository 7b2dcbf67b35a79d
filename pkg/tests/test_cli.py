import json

from advgrasp.cli import main
from advgrasp.config import RunConfig, TrainConfig


def write_config(tmp_path, **train_kw):
    base = dict(objects=("stick",), adversary="oracle", pretrain_episodes=6,
                batches=2, episodes_per_batch=3, force_magnitude=3.0, seed=0)
    base.update(train_kw)
    cfg = RunConfig(train=TrainConfig(**base))
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg.to_dict()))
    return str(path)


def test_usage_error_missing_subcommand(capsys):
    assert main([]) == 1


def test_usage_error_unknown_flag(tmp_path):
    assert main(["train", "--config", write_config(tmp_path), "--frobnicate"]) == 1


def test_eval_missing_object_is_usage_error(tmp_path):
    assert main(["eval", "--model", "x.json"]) == 1


def test_unknown_adversary_rejected(tmp_path):
    assert main(["train", "--config", write_config(tmp_path),
                 "--adversary", "psychic"]) == 1


def test_train_then_eval_and_replay(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "run_out"
    assert main(["train", "--config", cfg_path, "--out", str(out)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["episodes"] == 12
    assert len(info["checkpoints"]) == 2

    model = info["checkpoints"][-1]
    report_path = tmp_path / "report.json"
    assert main(["eval", "--model", model, "--object", "stick",
                 "--episodes", "10", "--seed", "3", "--config", cfg_path,
                 "--out", str(report_path)]) == 0
    brief = json.loads(capsys.readouterr().out)
    assert brief["episodes"] == 10
    report = json.loads(report_path.read_text())
    assert len(report["rows"]) == 10
    assert (tmp_path / "report.csv").exists()

    assert main(["replay", "--log", info["log"]]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["mismatches"] == 0


def test_eval_defaults_to_50_episodes(tmp_path, capsys):
    cfg_path = write_config(tmp_path, pretrain_episodes=0, batches=1)
    out = tmp_path / "m"
    assert main(["train", "--config", cfg_path, "--out", str(out)]) == 0
    model = json.loads(capsys.readouterr().out)["checkpoints"][-1]
    assert main(["eval", "--model", model, "--object", "stick",
                 "--config", cfg_path]) == 0
    assert json.loads(capsys.readouterr().out)["episodes"] == 50


def test_train_seed_determinism_byte_identical_logs(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--config", cfg_path, "--seed", "7",
                 "--out", str(a)]) == 0
    assert main(["train", "--config", cfg_path, "--seed", "7",
                 "--out", str(b)]) == 0
    assert (a / "log.jsonl").read_bytes() == (b / "log.jsonl").read_bytes()


def test_calibrate_outputs_force(tmp_path, capsys):
    assert main(["calibrate", "--object", "stick", "--samples", "150",
                 "--seed", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["object"] == "stick"
    assert 0.5 < doc["force"] < 10.0


def test_calibrate_object_file_path(tmp_path, capsys):
    obj = {"name": "square", "mu": 0.6, "mass": 0.1,
           "parts": [[[-0.02, -0.02], [0.02, -0.02], [0.02, 0.02], [-0.02, 0.02]]]}
    path = tmp_path / "square.json"
    path.write_text(json.dumps(obj))
    assert main(["calibrate", "--object", str(path), "--samples", "120"]) == 0
    assert json.loads(capsys.readouterr().out)["object"] == "square"


def test_replay_missing_file_is_runtime_error(tmp_path):
    assert main(["replay", "--log", str(tmp_path / "nope.jsonl")]) == 2


def test_replay_tampered_log_exit_code(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "r"
    assert main(["train", "--config", cfg_path, "--out", str(out)]) == 0
    capsys.readouterr()
    log = out / "log.jsonl"
    lines = log.read_text().splitlines(True)
    for i, line in enumerate(lines):
        doc = json.loads(line)
        if doc.get("type") == "episode" and doc["grasp_success"]:
            doc["adversary_success"] = not doc["adversary_success"]
            lines[i] = json.dumps(doc) + "\n"
            break
    log.write_text("".join(lines))
    assert main(["replay", "--log", str(log)]) == 2


def test_pretrain_command_writes_model(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    model = tmp_path / "pre.json"
    assert main(["pretrain", "--config", cfg_path, "--episodes", "6",
                 "--out", str(model)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["episodes"] == 6
    assert model.exists()
    from advgrasp import tinynet
    tinynet.load(str(model))  # loadable checkpoint
