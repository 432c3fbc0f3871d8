import json

import pytest

from hyperdiff import cli
from hyperdiff.checkpoint import load_checkpoint
from hyperdiff.uq import decompose


def write_config(tmp_path, options):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"version": 1, "options": options}))
    return str(path)


def test_gen_data_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    rc = cli.main(["gen-data", "--seed", "3", "--out", str(out),
                   "--config", write_config(tmp_path, {"dataset_size": 25})])
    assert rc == 0
    assert (out / "data.csv").exists()
    assert (out / "data.csv.json").exists()
    summary = json.loads((out / "run_summary.json").read_text())
    assert summary["experiment"] == "gen-data"
    assert summary["master_seed"] == 3
    assert "data.csv" in summary["artifacts"]


def test_config_schema_rejects_bad_files(tmp_path):
    import jsonschema
    bad1 = tmp_path / "bad1.json"
    bad1.write_text(json.dumps({"options": {}}))  # missing version
    bad2 = tmp_path / "bad2.json"
    bad2.write_text(json.dumps({"version": 1, "bogus": True}))
    for bad in (bad1, bad2):
        with pytest.raises(jsonschema.ValidationError):
            cli.load_config(str(bad))


def test_train_sample_decompose_pipeline(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, {"dataset_size": 24, "epochs": 1, "T": 10})
    assert cli.main(["gen-data", "--seed", "1", "--out", str(out),
                     "--config", cfg]) == 0
    assert cli.main(["train", "--seed", "1", "--out", str(out),
                     "--config", cfg, "--data", str(out / "data.csv")]) == 0
    ckpt = out / "hyper.ckpt"
    assert ckpt.exists()

    assert cli.main(["sample", "--seed", "1", "--out", str(out),
                     "--checkpoint", str(ckpt), "--y", "0.5",
                     "--m", "3", "--n", "4"]) == 0
    matrix = cli.load_matrix_csv(out / "samples.csv")
    assert matrix.values.shape == (3, 4, 1)

    assert cli.main(["decompose", "--seed", "1", "--out", str(out),
                     "--matrix", str(out / "samples.csv")]) == 0
    text = (out / "report.csv").read_text()
    assert text.startswith("quantity,")
    report = decompose(matrix)
    assert f"{report.aleatoric[0]:.17g}" in text


def test_train_mc_dropout(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, {"dataset_size": 24, "epochs": 1, "T": 10})
    cli.main(["gen-data", "--seed", "2", "--out", str(out), "--config", cfg])
    assert cli.main(["train", "--seed", "2", "--out", str(out), "--config", cfg,
                     "--data", str(out / "data.csv"),
                     "--strategy", "mc-dropout"]) == 0
    _, header = load_checkpoint(out / "mc_dropout.ckpt")
    assert header["strategy"] == "mc-dropout"
    assert header["dropout_rate"] == pytest.approx(0.1)


def test_train_deep_ensemble(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, {"dataset_size": 24, "epochs": 1, "T": 10,
                                  "ensemble_size": 2})
    cli.main(["gen-data", "--seed", "4", "--out", str(out), "--config", cfg])
    assert cli.main(["train", "--seed", "4", "--out", str(out), "--config", cfg,
                     "--data", str(out / "data.csv"),
                     "--strategy", "deep-ensemble"]) == 0
    assert (out / "ensemble_0.ckpt").exists()
    assert (out / "ensemble_1.ckpt").exists()


def test_sample_worker_flag_is_cosmetic(tmp_path):
    out1, out2 = tmp_path / "w1", tmp_path / "w2"
    cfg = write_config(tmp_path, {"dataset_size": 24, "epochs": 1, "T": 10})
    cli.main(["gen-data", "--seed", "5", "--out", str(out1), "--config", cfg])
    cli.main(["train", "--seed", "5", "--out", str(out1), "--config", cfg,
              "--data", str(out1 / "data.csv")])
    for out, workers in ((out1, "1"), (out2, "4")):
        cli.main(["sample", "--seed", "5", "--out", str(out),
                  "--checkpoint", str(out1 / "hyper.ckpt"), "--y", "1.0",
                  "--m", "4", "--n", "8", "--workers", workers])
    assert (out1 / "samples.csv").read_bytes() == (out2 / "samples.csv").read_bytes()


def test_gradcheck_command_passes(tmp_path, capsys):
    rc = cli.main(["gradcheck", "--seed", "0", "--out", str(tmp_path / "o")])
    captured = capsys.readouterr().out
    assert rc == 0
    assert captured.count("PASS") == 3


def test_unknown_strategy_rejected(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["train", "--data", "x.csv", "--strategy", "nope"])
