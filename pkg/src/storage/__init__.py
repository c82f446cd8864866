"""On-disk artifacts: WAV audio, CSV tables and model checkpoints."""

from .atomic import atomic_write_bytes, atomic_write_text
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .csv_export import KIND_COLUMNS, embedding_table, export_csv, read_csv
from .wav import read_wav, write_wav

__all__ = [
    "KIND_COLUMNS",
    "Checkpoint",
    "atomic_write_bytes",
    "atomic_write_text",
    "embedding_table",
    "export_csv",
    "load_checkpoint",
    "read_csv",
    "read_wav",
    "save_checkpoint",
    "write_wav",
]
