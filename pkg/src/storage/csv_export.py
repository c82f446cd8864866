"""
CSV export for analysis outputs
Each kind has a fixed header; floats are printed with 9 significant digits and
identical data always yields an identical file.
"""

import io
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..dsp.spectral import ComplexSpectrogram, magnitude_db
from ..exceptions import CsvParseError, InvalidArgumentError
from ..separation.masking import SeparatedSources
from ..separation.metrics import SeparationReport
from ..vae.model import LossBreakdown
from ..vae.trainer import LatentSnapshot
from .atomic import PathLike, atomic_write_text, read_bytes

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"

KIND_COLUMNS: Dict[str, List[str]] = {
    "losses": ["epoch", "recon", "kl", "total", "beta"],
    "embedding": ["frame_index", "x", "y", "cluster", "true_label", "epoch"],
    "spectrogram": ["frame", "bin", "magnitude_db"],
    "report": ["reference", "estimate", "si_sdr", "si_sdr_improvement", "lsd", "mode"],
    "latent": ["epoch", "frame"],
    "masks": ["source", "frame", "bin", "mask", "mode"],
    "labels": ["frame", "label"],
}


def losses_table(history: Sequence[LossBreakdown]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "epoch": np.arange(1, len(history) + 1, dtype=np.int64),
            "recon": [h.recon for h in history],
            "kl": [h.kl for h in history],
            "total": [h.total for h in history],
            "beta": [h.beta for h in history],
        },
        columns=KIND_COLUMNS["losses"],
    )


def embedding_table(coords: np.ndarray, clusters: np.ndarray,
                    true_labels: Optional[np.ndarray] = None,
                    frame_indices: Optional[np.ndarray] = None, epoch: int = 0) -> pd.DataFrame:
    """One row per embedded frame; ``true_label`` is -1 where no labels are known."""
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    n = coords.shape[0]
    if frame_indices is None:
        frame_indices = np.arange(n)
    if true_labels is None:
        true_labels = np.full(n, -1)
    clusters = np.asarray(clusters, dtype=np.int64)
    if clusters.shape != (n,) or np.shape(true_labels) != (n,) or np.shape(frame_indices) != (n,):
        raise InvalidArgumentError("embedding columns differ in length")
    return pd.DataFrame(
        {
            "frame_index": np.asarray(frame_indices, dtype=np.int64),
            "x": coords[:, 0],
            "y": coords[:, 1],
            "cluster": clusters,
            "true_label": np.asarray(true_labels, dtype=np.int64),
            "epoch": np.full(n, epoch, dtype=np.int64),
        },
        columns=KIND_COLUMNS["embedding"],
    )


def spectrogram_table(data: Any) -> pd.DataFrame:
    """(frame, bin, magnitude_db) triples, frame-major; accepts a spectrogram or a dB array (bins x frames)."""
    db = magnitude_db(data) if isinstance(data, ComplexSpectrogram) else np.asarray(data, dtype=np.float64)
    if db.ndim != 2:
        raise InvalidArgumentError(f"spectrogram must be 2-D (bins x frames), got shape {db.shape}")
    n_bins, n_frames = db.shape
    frame, bin_ = np.meshgrid(np.arange(n_frames), np.arange(n_bins), indexing="ij")
    return pd.DataFrame(
        {"frame": frame.ravel(), "bin": bin_.ravel(), "magnitude_db": db.T.ravel()},
        columns=KIND_COLUMNS["spectrogram"],
    )


def report_table(report: SeparationReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            (s.reference, s.estimate, s.si_sdr, s.si_sdr_improvement, s.lsd, report.mode)
            for s in report.scores
        ],
        columns=KIND_COLUMNS["report"],
    )


def latent_table(snapshots: Sequence[LatentSnapshot]) -> pd.DataFrame:
    """Posterior means of every frame, one block of rows per snapshot epoch."""
    if isinstance(snapshots, LatentSnapshot):
        snapshots = [snapshots]
    if not snapshots:
        return pd.DataFrame(columns=KIND_COLUMNS["latent"])
    k = snapshots[0].means.shape[1]
    frames = []
    for snap in snapshots:
        n = snap.means.shape[0]
        block = pd.DataFrame(snap.means, columns=[f"z{j}" for j in range(k)])
        block.insert(0, "frame", np.arange(n, dtype=np.int64))
        block.insert(0, "epoch", np.full(n, snap.epoch, dtype=np.int64))
        frames.append(block)
    return pd.concat(frames, ignore_index=True)


def masks_table(data: Union[SeparatedSources, np.ndarray]) -> pd.DataFrame:
    """(source, frame, bin, mask, mode) rows from a (sources, bins, frames) stack.

    Separated sources carry their masking mode in the provenance; a bare array has none.
    """
    if isinstance(data, SeparatedSources):
        if data.masks is None:
            raise InvalidArgumentError("separated sources carry no masks")
        masks, mode = data.masks, data.provenance.get("mode", "")
    else:
        masks, mode = data, ""
    masks = np.asarray(masks, dtype=np.float64)
    if masks.ndim != 3:
        raise InvalidArgumentError(f"masks must be (sources, bins, frames), got shape {masks.shape}")
    c, n_bins, n_frames = masks.shape
    source, frame, bin_ = np.meshgrid(
        np.arange(c), np.arange(n_frames), np.arange(n_bins), indexing="ij"
    )
    return pd.DataFrame(
        {
            "source": source.ravel(),
            "frame": frame.ravel(),
            "bin": bin_.ravel(),
            "mask": masks.transpose(0, 2, 1).ravel(),
            "mode": mode,
        },
        columns=KIND_COLUMNS["masks"],
    )


def labels_table(labels: np.ndarray) -> pd.DataFrame:
    labels = np.asarray(labels, dtype=np.int64)
    return pd.DataFrame(
        {"frame": np.arange(labels.size, dtype=np.int64), "label": labels},
        columns=KIND_COLUMNS["labels"],
    )


BUILDERS: Dict[str, Callable[[Any], pd.DataFrame]] = {
    "losses": losses_table,
    "spectrogram": spectrogram_table,
    "report": report_table,
    "latent": latent_table,
    "masks": masks_table,
    "labels": labels_table,
}


def _check_finite(kind: str, table: pd.DataFrame) -> None:
    values = table.select_dtypes(include="number").to_numpy(dtype=np.float64)
    if np.any(np.isnan(values)):
        raise InvalidArgumentError(f"{kind} data contains NaN")
    # SI-SDR uses +/-inf as sentinels for perfect or silent estimates.
    if kind != "report" and np.any(np.isinf(values)):
        raise InvalidArgumentError(f"{kind} data contains infinite values")


def to_table(kind: str, data: Any) -> pd.DataFrame:
    """Turn ``data`` into the kind's table; DataFrames pass through after a header check."""
    if kind not in KIND_COLUMNS:
        raise InvalidArgumentError(f"unknown CSV kind {kind!r}; expected one of {sorted(KIND_COLUMNS)}")
    if isinstance(data, pd.DataFrame):
        table = data
    elif kind == "embedding":
        if not isinstance(data, dict):
            raise InvalidArgumentError("embedding data must be a DataFrame or a dict of embedding_table arguments")
        table = embedding_table(**data)
    else:
        table = BUILDERS[kind](data)

    expected = KIND_COLUMNS[kind]
    if list(table.columns[:len(expected)]) != expected:
        raise InvalidArgumentError(
            f"{kind} table has columns {list(table.columns)}, expected to start with {expected}"
        )
    return table


def export_csv(kind: str, data: Any, path: PathLike) -> None:
    """Write one analysis table as CSV, atomically."""
    table = to_table(kind, data)
    _check_finite(kind, table)
    text = table.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    atomic_write_text(path, text)
    logger.info(f"Exported {len(table)} {kind} rows to {path}")


def read_csv(path: PathLike) -> pd.DataFrame:
    """Read back a file written by :func:`export_csv`."""
    payload = read_bytes(path)
    try:
        return pd.read_csv(io.BytesIO(payload))
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise CsvParseError(f"cannot parse CSV {path}: {exc}") from exc
