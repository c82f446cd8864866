import numpy as np
import pytest

from src.dsp.spectral import ComplexSpectrogram
from src.exceptions import CsvParseError, InvalidArgumentError, StorageError
from src.separation.masking import SeparatedSources
from src.separation.metrics import SeparationReport, SourceScore
from src.storage.csv_export import export_csv, latent_table, read_csv
from src.vae.model import LossBreakdown
from src.vae.trainer import LatentSnapshot


def test_empty_embedding_is_header_only(tmp_path):
    path = tmp_path / "embedding.csv"
    export_csv("embedding", {"coords": np.zeros((0, 2)), "clusters": np.zeros(0)}, path)
    assert path.read_text() == "frame_index,x,y,cluster,true_label,epoch\n"


def test_embedding_rows(tmp_path):
    path = tmp_path / "embedding.csv"
    export_csv(
        "embedding",
        {
            "coords": np.array([[0.5, -1.0], [2.0, 3.25]]),
            "clusters": np.array([1, 0]),
            "true_labels": np.array([0, 1]),
            "frame_indices": np.array([0, 4]),
            "epoch": 20,
        },
        path,
    )
    lines = path.read_text().splitlines()
    assert lines[1] == "0,0.5,-1,1,0,20"
    assert lines[2] == "4,2,3.25,0,1,20"


def test_spectrogram_emits_one_row_per_bin_and_frame(tmp_path):
    path = tmp_path / "spec.csv"
    export_csv("spectrogram", ComplexSpectrogram(np.full((3, 2), 10.0, dtype=complex), 4, 1, 4000), path)
    lines = path.read_text().splitlines()
    assert len(lines) == 7
    assert lines[0] == "frame,bin,magnitude_db"
    assert lines[1] == "0,0,20"
    assert lines[4] == "1,0,20"


def test_re_export_is_byte_identical(tmp_path, rng):
    history = [LossBreakdown(*rng.uniform(0, 10, 3), beta=1.0) for _ in range(5)]
    export_csv("losses", history, tmp_path / "a.csv")
    export_csv("losses", history, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_losses_use_nine_significant_digits(tmp_path):
    export_csv("losses", [LossBreakdown(1.0 / 3.0, 2.0, 1.0 / 3.0 + 2.0)], tmp_path / "l.csv")
    lines = (tmp_path / "l.csv").read_text().splitlines()
    assert lines == ["epoch,recon,kl,total,beta", "1,0.333333333,2,2.33333333,1"]


def test_report_keeps_infinite_sentinels(tmp_path):
    report = SeparationReport([SourceScore(0, 0, float("inf"), float("inf"), 0.0)], (0,), 1, mode="wiener")
    export_csv("report", report, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines == ["reference,estimate,si_sdr,si_sdr_improvement,lsd,mode", "0,0,inf,inf,0,wiener"]


def test_nan_and_infinite_data_are_rejected(tmp_path):
    with pytest.raises(InvalidArgumentError):
        export_csv("losses", [LossBreakdown(float("nan"), 0.0, 0.0)], tmp_path / "a.csv")
    with pytest.raises(InvalidArgumentError):
        export_csv("masks", np.full((1, 2, 2), np.inf), tmp_path / "b.csv")
    assert not list(tmp_path.iterdir())


def test_unknown_kind(tmp_path):
    with pytest.raises(InvalidArgumentError):
        export_csv("weights", [], tmp_path / "a.csv")


def test_unwritable_path_is_storage_error(tmp_path):
    with pytest.raises(StorageError):
        export_csv("labels", np.zeros(3), tmp_path / "missing" / "labels.csv")


def test_latent_masks_and_labels_tables(tmp_path):
    snapshots = [LatentSnapshot(1, np.zeros((3, 2))), LatentSnapshot(10, np.ones((3, 2)))]
    table = latent_table(snapshots)
    assert list(table.columns) == ["epoch", "frame", "z0", "z1"]
    assert len(table) == 6

    separated = SeparatedSources(
        [np.zeros(8), np.zeros(8)], 4000,
        masks=np.stack([np.full((2, 3), 0.25), np.full((2, 3), 0.75)]),
        provenance={"mode": "hard"},
    )
    export_csv("masks", separated, tmp_path / "m.csv")
    masks = read_csv(tmp_path / "m.csv")
    assert list(masks.columns) == ["source", "frame", "bin", "mask", "mode"]
    assert set(masks["mode"]) == {"hard"}
    assert len(masks) == 2 * 2 * 3
    assert masks.groupby(["frame", "bin"])["mask"].sum().eq(1.0).all()

    export_csv("labels", np.array([0, 1, 1]), tmp_path / "labels.csv")
    assert read_csv(tmp_path / "labels.csv")["label"].tolist() == [0, 1, 1]


@pytest.mark.parametrize("content", [b"", b"frame,label\n0,1\n1,0,3,4\n"])
def test_malformed_csv_is_a_parse_error(tmp_path, content):
    path = tmp_path / "broken.csv"
    path.write_bytes(content)
    with pytest.raises(CsvParseError) as info:
        read_csv(path)
    assert info.value.exit_code == 3
    assert info.value.kind == "parse"
    assert "broken.csv" in str(info.value)
