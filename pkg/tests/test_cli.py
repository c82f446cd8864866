"""End-to-end runs of the command-line driver on a short synthetic corpus."""

import pytest

import src.main
from src import __version__
from src.exceptions import StorageError
from src.main import cli
from src.storage.csv_export import read_csv

PIPELINE_FILES = [
    "data/heart.wav",
    "data/lung.wav",
    "data/mixture.wav",
    "data/labels.csv",
    "run/model.ckpt",
    "run/losses.csv",
    "run/embedding.csv",
    "sep/source_0.wav",
    "sep/source_1.wav",
    "sep/masks.csv",
    "sep/provenance.json",
    "eval/report.csv",
    "eval/report.txt",
]


def run_pipeline(root, config):
    data, run, sep, ev = root / "data", root / "run", root / "sep", root / "eval"
    steps = [
        ["synth", "--config", str(config), "--out-dir", str(data)],
        ["train", "--config", str(config), "--mixture", str(data / "mixture.wav"),
         "--out", str(run / "model.ckpt")],
        ["project", "--ckpt", str(run / "model.ckpt"), "--mixture", str(data / "mixture.wav"),
         "--labels", str(data / "labels.csv"), "--out", str(run / "embedding.csv")],
        ["separate", "--ckpt", str(run / "model.ckpt"), "--mixture", str(data / "mixture.wav"),
         "--out-dir", str(sep)],
        ["evaluate", "--config", str(config), "--est-dir", str(sep), "--ref-dir", str(data),
         "--out", str(ev / "report.csv")],
    ]
    for argv in steps:
        assert cli(argv) == 0, argv


@pytest.fixture
def pipeline(tmp_path, config_file):
    root = tmp_path / "first"
    run_pipeline(root, config_file)
    return root


def test_pipeline_writes_every_artifact(pipeline):
    for name in PIPELINE_FILES:
        assert (pipeline / name).is_file(), name

    losses = read_csv(pipeline / "run/losses.csv")
    assert losses["epoch"].tolist() == [1, 2, 3]
    assert sorted(p.name for p in (pipeline / "run").glob("latent_epoch_*.csv")) == [
        "latent_epoch_0001.csv", "latent_epoch_0002.csv", "latent_epoch_0003.csv",
    ]

    embedding = read_csv(pipeline / "run/embedding.csv")
    labels = read_csv(pipeline / "data/labels.csv")
    assert len(embedding) == len(labels)
    assert set(embedding["cluster"]) <= {0, 1}
    assert embedding["true_label"].tolist() == labels["label"].tolist()

    report = read_csv(pipeline / "eval/report.csv")
    assert sorted(report["estimate"]) == [0, 1]
    assert report["mode"].tolist() == ["wiener", "wiener"]
    assert set(read_csv(pipeline / "sep/masks.csv")["mode"]) == {"wiener"}
    summary = (pipeline / "eval/report.txt").read_text()
    assert "mode: wiener" in summary
    assert "mean SI-SDR improvement" in summary


def test_runs_are_reproducible(pipeline, tmp_path, config_file):
    second = tmp_path / "second"
    run_pipeline(second, config_file)
    for name in PIPELINE_FILES:
        assert (pipeline / name).read_bytes() == (second / name).read_bytes(), name


def test_evaluate_exports_spectrograms(pipeline, config_file):
    out = pipeline / "eval2" / "report.csv"
    assert cli([
        "evaluate", "--config", str(config_file), "--est-dir", str(pipeline / "sep"),
        "--ref-dir", str(pipeline / "data"), "--out", str(out), "--spectrograms",
    ]) == 0
    names = sorted(p.name for p in out.parent.glob("spectrogram_*.csv"))
    assert names == [
        "spectrogram_estimate_0.csv", "spectrogram_estimate_1.csv", "spectrogram_mixture.csv",
        "spectrogram_reference_0.csv", "spectrogram_reference_1.csv",
    ]


def test_hard_mode_override(pipeline):
    out_dir = pipeline / "sep_hard"
    assert cli([
        "separate", "--ckpt", str(pipeline / "run/model.ckpt"),
        "--mixture", str(pipeline / "data/mixture.wav"), "--mode", "hard", "--out-dir", str(out_dir),
    ]) == 0
    masks = read_csv(out_dir / "masks.csv")
    assert set(masks["mask"]) <= {0.0, 1.0}
    assert set(masks["mode"]) == {"hard"}


def test_unknown_flag_is_usage_error(capsys):
    assert cli(["synth", "--out-dir", "x", "--bogus"]) == 1
    err = capsys.readouterr().err
    assert "usage:" in err
    assert "cardiovae: error[usage]:" in err


def test_missing_subcommand_is_usage_error(capsys):
    assert cli([]) == 1
    assert "usage:" in capsys.readouterr().err


def test_version(capsys):
    assert cli(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_mismatched_analysis_config_is_rejected(pipeline, tmp_path, capsys):
    other = tmp_path / "wide.conf"
    other.write_text("n_fft = 512\nhop = 64\n")
    code = cli([
        "separate", "--ckpt", str(pipeline / "run/model.ckpt"),
        "--mixture", str(pipeline / "data/mixture.wav"), "--config", str(other),
        "--out-dir", str(tmp_path / "never"),
    ])
    assert code == 2
    err = capsys.readouterr().err
    assert "256" in err and "512" in err
    assert not (tmp_path / "never").exists()


def test_invalid_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text("n_fft = 100\n")
    assert cli(["synth", "--config", str(bad), "--out-dir", str(tmp_path / "d")]) == 2
    assert "error[config]" in capsys.readouterr().err


def test_missing_mixture_exits_3(tmp_path, config_file, capsys):
    code = cli([
        "train", "--config", str(config_file), "--mixture", str(tmp_path / "absent.wav"),
        "--out", str(tmp_path / "model.ckpt"),
    ])
    assert code == 3
    assert "error[io]" in capsys.readouterr().err
    assert not (tmp_path / "model.ckpt").exists()


def test_missing_checkpoint_exits_3(tmp_path):
    assert cli([
        "separate", "--ckpt", str(tmp_path / "absent.ckpt"), "--mixture", str(tmp_path / "m.wav"),
        "--out-dir", str(tmp_path / "sep"),
    ]) == 3


def test_sample_rate_mismatch_exits_2(pipeline, tmp_path, capsys):
    conf = tmp_path / "8k.conf"
    conf.write_text("sample_rate = 8000\nepochs = 1\nbatch_size = 32\n")
    code = cli([
        "train", "--config", str(conf), "--mixture", str(pipeline / "data/mixture.wav"),
        "--out", str(tmp_path / "model.ckpt"),
    ])
    assert code == 2
    err = capsys.readouterr().err
    assert "4000" in err and "8000" in err


def _failing_export(kind_to_fail, real_export):
    def export(kind, data, path):
        if kind == kind_to_fail:
            raise StorageError(f"disk full while writing {path}")
        real_export(kind, data, path)
    return export


def test_diverging_training_exits_4(tmp_path, config_file, capsys):
    assert cli(["synth", "--config", str(config_file), "--out-dir", str(tmp_path / "data")]) == 0
    conf = tmp_path / "explode.conf"
    conf.write_text("duration = 4\nepochs = 1\nbatch_size = 32\nlr = 1e200\n")
    code = cli([
        "train", "--config", str(conf), "--mixture", str(tmp_path / "data/mixture.wav"),
        "--out", str(tmp_path / "run" / "model.ckpt"),
    ])
    assert code == 4
    assert "cardiovae: error[numeric]:" in capsys.readouterr().err
    assert not (tmp_path / "run").exists()


def test_failed_train_removes_checkpoints_and_run_dir(tmp_path, config_file, monkeypatch, capsys):
    assert cli(["synth", "--config", str(config_file), "--out-dir", str(tmp_path / "data")]) == 0
    monkeypatch.setattr(src.main, "export_csv", _failing_export("losses", src.main.export_csv))
    code = cli([
        "train", "--config", str(config_file), "--mixture", str(tmp_path / "data/mixture.wav"),
        "--out", str(tmp_path / "run" / "nested" / "model.ckpt"),
    ])
    assert code == 3
    assert "disk full" in capsys.readouterr().err
    assert not (tmp_path / "run").exists()
    assert (tmp_path / "data/mixture.wav").is_file()


def test_failed_separate_restores_previous_outputs(pipeline, monkeypatch):
    out_dir = pipeline / "sep_again"
    out_dir.mkdir()
    (out_dir / "keep.txt").write_text("unrelated\n")
    (out_dir / "source_0.wav").write_bytes(b"earlier run")
    monkeypatch.setattr(src.main, "export_csv", _failing_export("masks", src.main.export_csv))
    code = cli([
        "separate", "--ckpt", str(pipeline / "run/model.ckpt"),
        "--mixture", str(pipeline / "data/mixture.wav"), "--out-dir", str(out_dir),
    ])
    assert code == 3
    assert sorted(p.name for p in out_dir.iterdir()) == ["keep.txt", "source_0.wav"]
    assert (out_dir / "source_0.wav").read_bytes() == b"earlier run"


@pytest.mark.parametrize("content, code, kind", [
    ("frame,label\n0,1\n1,0,3,4\n", 3, "parse"),
    ("", 3, "parse"),
    ("frame,label\n0,heart\n", 2, "invalid-argument"),
])
def test_broken_labels_file(pipeline, tmp_path, capsys, content, code, kind):
    labels = tmp_path / "labels.csv"
    labels.write_text(content)
    assert cli([
        "project", "--ckpt", str(pipeline / "run/model.ckpt"), "--mixture", str(pipeline / "data/mixture.wav"),
        "--labels", str(labels), "--out", str(tmp_path / "embedding.csv"),
    ]) == code
    assert f"cardiovae: error[{kind}]:" in capsys.readouterr().err
    assert not (tmp_path / "embedding.csv").exists()
