import io
import json
import subprocess
import sys

import numpy as np
import pytest

from dualground.cli import run

TINY = ["dim=16", "heads=2", "num_queries=4", "num_seeds=16", "layers=2", "steps=3", "batch_size=2"]


def _train_args(data, out, *extra):
    args = ["train", "--data", str(data), "--out", str(out), "--seed", "1"]
    for kv in TINY:
        args += ["--config", kv]
    return args + list(extra)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run(["gen", "--seed", "3", "--num-scenes", "4", "--out", str(d / "data.jsonl")]) == 0
    assert run(_train_args(d / "data.jsonl", d / "model.ckpt")) == 0
    return d


def test_missing_subcommand_is_usage_error(capsys):
    assert run([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_is_named(capsys):
    assert run(["gen", "--num-scenes", "1", "--out", "x", "--bogus"]) == 1
    err = capsys.readouterr().err
    assert "--bogus" in err and "--num-scenes" in err


def test_bad_config_key_lists_valid_keys(workspace, capsys):
    code = run(["train", "--data", str(workspace / "data.jsonl"), "--out", str(workspace / "x.ckpt"),
                "--config", "nope=1"])
    assert code == 1
    err = capsys.readouterr().err
    assert "nope" in err and "num_queries" in err


def test_runtime_failures_exit_two(workspace, capsys):
    assert run(["eval", "--data", str(workspace / "missing.jsonl"), "--checkpoint", str(workspace / "model.ckpt")]) == 2
    bad = workspace / "bad.jsonl"
    bad.write_text('{"scene_id": \n')
    assert run(["eval", "--data", str(bad), "--checkpoint", str(workspace / "model.ckpt")]) == 2
    assert ":1:" in capsys.readouterr().err


def test_gen_round_trip_and_summary(workspace, capsys):
    from dualground.scenegen import generate_dataset, load_dataset

    path = workspace / "g.jsonl"
    assert run(["gen", "--seed", "3", "--num-scenes", "4", "--out", str(path)]) == 0
    assert "wrote 4 samples" in capsys.readouterr().out
    assert [s.to_record() for s in load_dataset(path)] == [s.to_record() for s in generate_dataset(3, 4)]


def test_train_streams_metrics(workspace, capsys):
    out, metrics = workspace / "m.ckpt", workspace / "m.jsonl"
    assert run(_train_args(workspace / "data.jsonl", out, "--metrics", str(metrics))) == 0
    lines = capsys.readouterr().out.splitlines()
    recs = [json.loads(l) for l in lines]
    assert [r["step"] for r in recs] == [1, 2, 3]
    assert set(recs[0]) == {"step", "loss", "l_pos", "l_sem"}
    assert metrics.read_text().splitlines() == lines


def test_eval_prints_table_and_json(workspace, capsys):
    out = workspace / "report.json"
    assert run(["eval", "--data", str(workspace / "data.jsonl"), "--checkpoint", str(workspace / "model.ckpt"),
                "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "acc@0.25" in text and "multiple" in text
    rep = json.loads(out.read_text())
    assert rep["n"] == 4 and 0 <= rep["acc_at_50"] <= 1


def test_attn_dump_writes_maps(workspace, capsys):
    out = workspace / "attn"
    assert run(["attn-dump", "--data", str(workspace / "data.jsonl"), "--checkpoint", str(workspace / "model.ckpt"),
                "--sample-id", "1", "--out-dir", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted(f"layer{i}_{b}.{e}" for i in range(2) for b in ("surround", "target") for e in ("csv", "pgm"))
    amap = np.loadtxt(out / "layer0_target.csv", delimiter=",")
    assert amap.shape == (4, 16)
    assert np.allclose(amap.sum(axis=1), 1.0, atol=1e-6)
    raw = (out / "layer0_target.pgm").read_bytes()
    assert raw.startswith(b"P5\n16 4\n255\n") and len(raw) == len(b"P5\n16 4\n255\n") + 64
    assert run(["attn-dump", "--data", str(workspace / "data.jsonl"), "--checkpoint", str(workspace / "model.ckpt"),
                "--sample-id", "nope", "--out-dir", str(out)]) == 2


def test_decouple_reads_stdin(monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.StringIO("the red chair .\n\nthe bed near the lamp .\n"))
    assert run(["decouple"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == [
        "the/Other\tred/Attribute\tchair/MainObject\t./Other",
        "the/Other\tbed/MainObject\tnear/Relationship\tthe/Other\tlamp/AuxiliaryObject\t./Other",
    ]


def test_bench_needs_two_schemes(capsys):
    assert run(["bench", "--schemes", "center"]) == 1


def test_bench_small_writes_csv(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert run(["bench", "--schemes", "box_surface,vertex", "--K", "4", "--N", "16", "--D", "8", "--heads", "2",
                "--out-csv", str(out)]) == 0
    assert out.read_text().splitlines()[0].startswith("scheme,median_ms")


def test_gen_train_eval_are_byte_deterministic(tmp_path):
    outs = []
    for run_dir in ("a", "b"):
        d = tmp_path / run_dir
        d.mkdir()
        assert run(["gen", "--seed", "5", "--num-scenes", "3", "--out", str(d / "data.jsonl")]) == 0
        assert run(_train_args(d / "data.jsonl", d / "model.ckpt", "--metrics", str(d / "metrics.jsonl"))) == 0
        assert run(["eval", "--data", str(d / "data.jsonl"), "--checkpoint", str(d / "model.ckpt"),
                    "--out", str(d / "report.json")]) == 0
        outs.append([(d / f).read_bytes() for f in ("data.jsonl", "model.ckpt", "metrics.jsonl", "report.json")])
    assert outs[0] == outs[1]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "dualground", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "decouple" in res.stdout
    res = subprocess.run([sys.executable, "-m", "dualground"], capture_output=True, text=True)
    assert res.returncode == 1
