import json

import pytest

from carryover.cli import run_cli


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    cfg = out / "synth.json"
    cfg.write_text(json.dumps({"n_dialogues": 40}))
    assert run_cli(["synth", "--config", str(cfg), "--seed", "1", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def trained(corpus_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = out / "train.json"
    cfg.write_text(json.dumps({"encoder": {"emb_dim": 8, "hidden": 8}, "decoder": {"d_model": 16, "heads": 2}}))
    code = run_cli(["train", "--config", str(cfg), "--train", str(corpus_dir / "train.jsonl"),
                    "--dev", str(corpus_dir / "dev.jsonl"), "--decoder", "pointer", "--ordering", "temporal",
                    "--epochs", "2", "--seed", "4", "--out", str(out)])
    assert code == 0
    return out


def test_synth_writes_splits(corpus_dir):
    for split in ("train", "dev", "test"):
        assert (corpus_dir / f"{split}.jsonl").read_text().startswith('{"format": "carryover-corpus"')


def test_train_outputs(trained):
    for name in ("model.ckpt", "history.json", "config.json", "history.png"):
        assert (trained / name).exists()
    assert len(json.loads((trained / "history.json").read_text())["dev_f1"]) == 2


@pytest.mark.parametrize("preset,headers", [("internal", ["1", "2", "≥3", "≥1"]), ("dstc2", ["0", "2", "4", "≥6", "all"])])
def test_eval_table_headers(trained, corpus_dir, tmp_path, capsys, preset, headers):
    code = run_cli(["eval", str(trained / "model.ckpt"), "--test", str(corpus_dir / "test.jsonl"),
                    "--bucket-preset", preset, "--out", str(tmp_path)])
    assert code == 0
    head = capsys.readouterr().out.splitlines()[0].split()
    assert head == ["metric"] + headers
    report = json.loads((tmp_path / "report.json").read_text())
    assert list(report["by_distance"]) == headers[:-1]
    tsv = (tmp_path / "report.tsv").read_text().splitlines()
    assert [row.split("\t")[0] for row in tsv[1:]] == headers
    assert (tmp_path / "bucket_f1.png").stat().st_size > 0
    assert (tmp_path / "grid.png").stat().st_size > 0


def test_predict_one_record(trained, corpus_dir, capsys):
    record = (corpus_dir / "test.jsonl").read_text().splitlines()[1]
    assert run_cli(["predict", str(trained / "model.ckpt"), record]) == 0
    out = json.loads(capsys.readouterr().out)
    assert {"id", "selected", "trace"} <= set(out)


def test_gradcheck_passes(capsys):
    assert run_cli(["gradcheck", "--cases", "2"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_usage_errors_exit_2():
    assert run_cli(["frobnicate"]) == 2
    assert run_cli([]) == 2
    assert run_cli(["train"]) == 2
    assert run_cli(["train", "--train", "x", "--decoder", "lstm"]) == 2


def test_data_errors_exit_1(tmp_path, trained, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"format": "carryover-corpus", "version": 1}\n{oops\n')
    assert run_cli(["eval", str(trained / "model.ckpt"), "--test", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert run_cli(["eval", str(tmp_path / "missing.ckpt"), "--test", str(bad)]) == 1


def test_log_env(monkeypatch, corpus_dir, tmp_path, capsys):
    monkeypatch.setenv("CARRYOVER_LOG", "debug")
    assert run_cli(["synth", "--out", str(tmp_path), "--seed", "2", "--config", str(corpus_dir / "synth.json")]) == 0
