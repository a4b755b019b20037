import dataclasses
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from ietlab import cli
from ietlab.config import ConfigError, RunManifest, load_experiment_config, load_roof_toml
from ietlab.experiments import ExperimentConfig
from ietlab.logflow import eval_roof

REPO = Path(__file__).resolve().parents[1]

SMALL = """
[experiment]
base = "golden"
roof = "symmetric"
depth = 24
nu = 16.0
samples = 50
h_max = 2000
r_max = 2000
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    return code


def test_sample_is_deterministic(capsys):
    assert run(["sample", "--perm", "4 3 2 1", "--seed", 3]) == 0
    a = capsys.readouterr().out
    assert run(["sample", "--perm", "4 3 2 1", "--seed", 3]) == 0
    assert capsys.readouterr().out == a
    assert run(["sample", "--perm", "4 3 2 1", "--seed", 4]) == 0
    assert capsys.readouterr().out != a


def test_sample_precision_prefix(capsys):
    run(["sample", "--perm", "3 2 1", "--seed", 1, "--precision", 128])
    lo = json.loads(capsys.readouterr().out)
    run(["sample", "--perm", "3 2 1", "--seed", 1, "--precision", 256])
    hi = json.loads(capsys.readouterr().out)
    assert lo["precision_bits"] == 128 and hi["precision_bits"] == 256
    for a, b in zip(lo["lengths"], hi["lengths"]):
        na, nb = int(a.split("p")[0], 16), int(b.split("p")[0], 16)
        assert abs((na << 128) - nb) <= 1 << 128


def test_reducible_permutation_exit_2(capsys):
    assert run(["sample", "--perm", "2 1 3"]) == 2
    assert "{1..2}" in capsys.readouterr().err


def test_bad_arguments_exit_2(capsys):
    assert run(["induct", "--format", "xml"]) == 2
    assert run(["--threads", 0, "sample", "--perm", "2 1"]) == 2


def test_corrupt_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[experiment]\nnu = = 3\n")
    assert run(["induct", bad, "--out", tmp_path / "o"]) == 2
    assert "line 2" in capsys.readouterr().err
    bad.write_text('[experiment]\nnu = "fast"\n')
    assert run(["induct", bad, "--out", tmp_path / "o"]) == 2
    assert "nu" in capsys.readouterr().err
    bad.write_text('[experiment]\nroof = "nope.toml"\n')
    assert run(["induct", bad, "--out", tmp_path / "o"]) == 2
    assert "nope.toml" in capsys.readouterr().err


def test_towers_outputs_and_manifest(small_cfg, tmp_path):
    out = tmp_path / "o"
    assert run(["towers", small_cfg, "--out", out]) == 0
    assert (out / "path.jsonl").exists() and (out / "balanced_times.csv").exists()
    m = RunManifest.from_json((out / "manifest-towers.json").read_text())
    assert m.command == "towers" and "small.toml" in m.input_hashes
    assert {o["path"] for o in m.outputs} >= {"path.jsonl", "balanced_times.csv"}


def test_replay_is_byte_identical(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["flow", small_cfg, "--out", a, "--format", "json"]) == 0
    assert run(["replay", a / "manifest-flow.json", "--out", b]) == 0
    for name in ("path.jsonl", "stretch.json", "cancellation.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma = RunManifest.from_json((a / "manifest-flow.json").read_text())
    mb = RunManifest.from_json((b / "manifest-flow.json").read_text())
    assert ma.content_hash == mb.content_hash


def test_tampered_manifest_rejected(small_cfg, tmp_path, capsys):
    out = tmp_path / "o"
    run(["induct", small_cfg, "--out", out])
    mpath = out / "manifest-induct.json"
    d = json.loads(mpath.read_text())
    d["config"]["depth"] = 5
    mpath.write_text(json.dumps(d))
    assert run(["replay", mpath, "--out", tmp_path / "r"]) == 2


def test_env_out_dir_and_no_stray_writes(small_cfg, tmp_path, monkeypatch):
    out = tmp_path / "env-out"
    work = tmp_path / "work"
    work.mkdir()
    monkeypatch.chdir(work)
    monkeypatch.setenv("IETLAB_OUT", str(out))
    assert run(["induct", small_cfg]) == 0
    assert (out / "path.jsonl").exists()
    assert list(work.iterdir()) == []
    before = sorted(p.name for p in tmp_path.iterdir())
    assert before == sorted(["env-out", "work", "small.toml"])


def test_verification_failure_exit_4(small_cfg, tmp_path, monkeypatch, capsys):
    real = cli.build_rigidity_set

    def broken(*a, **k):
        rs = real(*a, **k)
        return dataclasses.replace(rs, r_k=rs.r_k + 1)

    monkeypatch.setattr(cli, "build_rigidity_set", broken)
    out = tmp_path / "o"
    assert run(["rigidity", small_cfg, "--out", out]) == 4
    assert "verification failed" in capsys.readouterr().err
    assert (out / "rigidity.json").exists() and (out / "manifest-rigidity.json").exists()


def test_rigidity_passes_on_golden(small_cfg, tmp_path):
    out = tmp_path / "o"
    assert run(["rigidity", small_cfg, "--out", out]) == 0
    reports = json.loads((out / "rigidity.json").read_text())
    assert reports and all(all(r["checks"].values()) for r in reports)


def test_overrides(tmp_path):
    out = tmp_path / "o"
    assert run(["induct", "--perm", "4 3 2 1", "--seed", 2, "--steps", 12, "--out", out]) == 0
    m = RunManifest.from_json((out / "manifest-induct.json").read_text())
    assert m.config["base"] == "random" and m.config["depth"] == 12
    assert run(["induct", "--perm", "1 3 2", "--out", out]) == 2


def test_precision_exhausted_exit_3(tmp_path, capsys):
    out = tmp_path / "o"
    assert run(["induct", "--perm", "2 1", "--steps", 100, "--precision", 64, "--out", out]) == 3
    assert "precision" in capsys.readouterr().err
    assert (out / "path.jsonl").exists()


def test_roof_toml(tmp_path):
    p = tmp_path / "roof.toml"
    p.write_text('[[right]]\nz = 0\nC = 1\n[[left]]\nz = 1\nC = 1\n[smooth]\nconst = 1\ncos = ["1/2"]\n')
    roof = load_roof_toml(p)
    assert roof.symmetric
    assert float(eval_roof(roof, 0.5, normalized=False)) == pytest.approx(2 * 0.6931471805599453 + 1 - 0.5)
    p.write_text('[[right]]\nz = 0\nC = 1\nw = 2\n')
    with pytest.raises(ConfigError, match="right"):
        load_roof_toml(p)
    p.write_text('[[right]]\nz = 0\nC = 1\n[smooth]\nconst = 0\ncos = [1]\n')
    with pytest.raises(ConfigError):
        load_roof_toml(p)


def test_shipped_configs_load():
    for p in sorted((REPO / "configs").glob("golden*.toml")) + [REPO / "configs" / "random_d5.toml"]:
        cfg = load_experiment_config(p)
        assert isinstance(cfg, ExperimentConfig)


def test_console_script_runs(tmp_path):
    env = dict(os.environ)
    r = subprocess.run([sys.executable, "-m", "ietlab.cli", "sample", "--perm", "2 1", "--seed", "0"],
                       capture_output=True, text=True, env=env, cwd=tmp_path)
    assert r.returncode == 0 and json.loads(r.stdout)["perm"]
