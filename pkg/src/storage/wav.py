"""
Mono WAV codec
RIFF chunks are walked and validated here; the sample payload is decoded and
encoded by scipy.io.wavfile. Only 16-bit PCM and 32-bit IEEE float are accepted.
"""

import io
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.io import wavfile

from ..exceptions import InvalidArgumentError, UnsupportedFormatError, WavParseError
from ..signals.siggen import MixtureSignal, SourceKind, SourceSignal
from .atomic import PathLike, atomic_write_bytes, read_bytes

logger = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

ENCODINGS = ("pcm16", "float32")
PCM16_SCALE = 32768.0


@dataclass
class WavInfo:
    """What the fmt and data chunks say about a file."""
    format_tag: int
    channels: int
    sample_rate: int
    bits_per_sample: int
    block_align: int
    data_offset: int
    data_size: int

    @property
    def encoding(self) -> str:
        if self.format_tag == WAVE_FORMAT_PCM and self.bits_per_sample == 16:
            return "pcm16"
        if self.format_tag == WAVE_FORMAT_IEEE_FLOAT and self.bits_per_sample == 32:
            return "float32"
        raise UnsupportedFormatError(
            f"unsupported WAV encoding (format tag {self.format_tag:#06x}, "
            f"{self.bits_per_sample} bits); expected 16-bit PCM or 32-bit float"
        )

    @property
    def n_samples(self) -> int:
        return self.data_size // self.block_align


def _chunk_header(raw: bytes, offset: int):
    if offset + 8 > len(raw):
        raise WavParseError("truncated chunk header", offset)
    return raw[offset:offset + 4], struct.unpack_from("<I", raw, offset + 4)[0]


def parse_header(raw: bytes) -> WavInfo:
    """Walk the RIFF chunk list up to the data chunk and validate the layout."""
    if len(raw) < 12:
        raise WavParseError("file too short for a RIFF header", len(raw))
    if raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavParseError("not a RIFF/WAVE file", 0)

    fmt: Optional[tuple] = None
    offset = 12
    while True:
        tag, size = _chunk_header(raw, offset)
        body = offset + 8
        if tag == b"fmt ":
            if size < 16 or body + size > len(raw):
                raise WavParseError(f"fmt chunk of {size} bytes is truncated", body)
            format_tag, channels, sample_rate, _, block_align, bits = struct.unpack_from(
                "<HHIIHH", raw, body
            )
            if format_tag == WAVE_FORMAT_EXTENSIBLE:
                if size < 40:
                    raise WavParseError("extensible fmt chunk lacks its subformat", body)
                format_tag = struct.unpack_from("<H", raw, body + 24)[0]
            fmt = (format_tag, channels, sample_rate, bits, block_align)
        elif tag == b"data":
            if fmt is None:
                raise WavParseError("data chunk precedes the fmt chunk", offset)
            if body + size > len(raw):
                raise WavParseError(
                    f"data chunk declares {size} bytes but only {len(raw) - body} remain", len(raw)
                )
            format_tag, channels, sample_rate, bits, block_align = fmt
            info = WavInfo(format_tag, channels, sample_rate, bits, block_align, body, size)
            break
        # Chunks are word aligned.
        offset = body + size + (size & 1)

    if info.channels != 1:
        raise UnsupportedFormatError(f"expected a mono file, got {info.channels} channels")
    info.encoding  # raises on anything but pcm16 or float32
    if info.sample_rate == 0:
        raise WavParseError("sample rate is zero", 24)
    if info.data_size % info.block_align:
        raise WavParseError(
            f"data size {info.data_size} is not a multiple of the block size {info.block_align}",
            info.data_offset,
        )
    return info


def read_wav(path: PathLike, kind: SourceKind = SourceKind.OTHER) -> SourceSignal:
    """Read a mono 16-bit PCM or 32-bit float WAV file as samples in [-1, 1]."""
    raw = read_bytes(path)
    info = parse_header(raw)
    try:
        sample_rate, data = wavfile.read(io.BytesIO(raw))
    except ValueError as exc:
        raise WavParseError(f"{path}: {exc}") from exc

    if info.encoding == "pcm16":
        samples = data.astype(np.float64) / PCM16_SCALE
    else:
        samples = data.astype(np.float64)
        if not np.all(np.isfinite(samples)):
            raise InvalidArgumentError(f"{path}: float samples are not finite")
        peak = float(np.max(np.abs(samples))) if samples.size else 0.0
        if peak > 1.0:
            raise InvalidArgumentError(f"{path}: float samples exceed [-1, 1] (peak {peak:g})")

    logger.info(
        f"Read {path}: {info.n_samples} samples at {sample_rate} Hz ({info.encoding})"
    )
    return SourceSignal(samples, int(sample_rate), kind)


def encode_samples(samples: np.ndarray, encoding: str) -> np.ndarray:
    if encoding == "pcm16":
        scaled = np.round(samples * PCM16_SCALE)
        return np.clip(scaled, -PCM16_SCALE, PCM16_SCALE - 1).astype("<i2")
    return samples.astype("<f4")


def write_wav(path: PathLike, signal: Union[SourceSignal, MixtureSignal, np.ndarray],
              encoding: str = "float32", sample_rate: Optional[int] = None) -> Path:
    """Write a mono signal; the file appears only once it is complete."""
    if encoding not in ENCODINGS:
        raise UnsupportedFormatError(f"unknown WAV encoding {encoding!r}; use one of {ENCODINGS}")
    if isinstance(signal, (SourceSignal, MixtureSignal)):
        sample_rate = signal.sample_rate if sample_rate is None else sample_rate
        samples = np.asarray(signal.samples, dtype=np.float64)
    else:
        samples = np.asarray(signal, dtype=np.float64)
    if sample_rate is None or sample_rate <= 0:
        raise InvalidArgumentError(f"a positive sample rate is required, got {sample_rate}")
    if samples.ndim != 1:
        raise UnsupportedFormatError(f"only mono signals can be written, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise InvalidArgumentError("samples are not finite")
    if samples.size and np.max(np.abs(samples)) > 1.0:
        raise InvalidArgumentError(
            f"samples must lie in [-1, 1], peak is {np.max(np.abs(samples)):g}"
        )

    buffer = io.BytesIO()
    wavfile.write(buffer, int(sample_rate), encode_samples(samples, encoding))
    written = atomic_write_bytes(path, buffer.getvalue())
    logger.info(f"Wrote {written}: {samples.size} samples at {sample_rate} Hz ({encoding})")
    return written
