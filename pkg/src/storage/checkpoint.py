"""
Versioned single-file checkpoints
Layout: a magic/version line, one JSON header line describing every block,
then the blocks themselves as raw little-endian float64 in row-major order.
"""

import hashlib
import json
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from ..config import RunConfig, build_config
from ..dsp.spectral import FeatureStats
from ..exceptions import (
    CardioVAEError,
    CheckpointCorruptError,
    CheckpointVersionError,
    InvalidArgumentError,
)
from ..nn.tape import ParamSet
from ..vae.model import VAEArchitecture, VAEModel
from .atomic import PathLike, atomic_write_bytes, read_bytes

logger = logging.getLogger(__name__)

MAGIC = b"CARDIOVAE-CKPT"
FORMAT_VERSION = 1
BLOCK_DTYPE = "<f8"


class BlockSpec(BaseModel):
    name: str
    shape: List[int]
    offset: int = Field(ge=0)
    nbytes: int = Field(ge=0)


class ArchitectureSpec(BaseModel):
    input_dim: int
    latent_dim: int
    hidden_sizes: List[int]
    activation: str


class CheckpointHeader(BaseModel):
    """Self-describing header; every block's shape and byte range is listed."""
    version: int
    architecture: ArchitectureSpec
    beta: float
    epoch: int = Field(ge=0)
    seed: int
    config: Dict[str, Any]
    blocks: List[BlockSpec]
    payload_sha256: str


@dataclass
class Checkpoint:
    model: VAEModel
    stats: FeatureStats
    config: RunConfig
    epoch: int
    seed: int

    def __iter__(self):
        return iter((self.model, self.stats, self.config, self.epoch))


def _named_blocks(model: VAEModel, stats: FeatureStats) -> "OrderedDict[str, np.ndarray]":
    blocks: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for pset in model.param_sets:
        for name, value in pset.items():
            blocks[name] = value
    blocks["stats.mean"] = stats.mean
    blocks["stats.std"] = stats.std
    return blocks


def encode_checkpoint(model: VAEModel, stats: FeatureStats, cfg: RunConfig, epoch: int) -> bytes:
    if stats.dim != model.input_dim:
        raise InvalidArgumentError(
            f"feature stats cover {stats.dim} bins but the model expects {model.input_dim}"
        )
    specs, chunks, offset = [], [], 0
    for name, value in _named_blocks(model, stats).items():
        if not np.all(np.isfinite(value)):
            raise InvalidArgumentError(f"block {name} contains non-finite values")
        data = np.ascontiguousarray(value, dtype=BLOCK_DTYPE).tobytes()
        specs.append(BlockSpec(name=name, shape=list(value.shape), offset=offset, nbytes=len(data)))
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)

    arch = model.architecture
    header = CheckpointHeader(
        version=FORMAT_VERSION,
        architecture=ArchitectureSpec(
            input_dim=arch.input_dim,
            latent_dim=arch.latent_dim,
            hidden_sizes=list(arch.hidden_sizes),
            activation=arch.activation,
        ),
        beta=model.beta,
        epoch=epoch,
        seed=cfg.seed,
        config=cfg.model_dump(),
        blocks=specs,
        payload_sha256=hashlib.sha256(payload).hexdigest(),
    )
    header_line = json.dumps(header.model_dump(), sort_keys=True, separators=(",", ":"))
    magic_line = MAGIC + f" {FORMAT_VERSION}\n".encode()
    return magic_line + header_line.encode("utf-8") + b"\n" + payload


def save_checkpoint(path: PathLike, model: VAEModel, stats: FeatureStats,
                    cfg: RunConfig, epoch: int) -> None:
    """Serialize model, feature stats and config; the file is replaced atomically."""
    blob = encode_checkpoint(model, stats, cfg, epoch)
    atomic_write_bytes(path, blob)
    logger.info(f"Saved checkpoint {path} at epoch {epoch} ({len(blob)} bytes)")


def _split_lines(blob: bytes) -> Tuple[int, bytes, bytes]:
    first_end = blob.find(b"\n")
    if first_end < 0 or not blob.startswith(MAGIC + b" "):
        raise CheckpointCorruptError("missing checkpoint magic line; not a checkpoint file")
    try:
        version = int(blob[len(MAGIC) + 1:first_end])
    except ValueError as exc:
        raise CheckpointCorruptError("unreadable checkpoint version") from exc
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(version, FORMAT_VERSION)
    header_end = blob.find(b"\n", first_end + 1)
    if header_end < 0:
        raise CheckpointCorruptError("checkpoint header is truncated")
    return version, blob[first_end + 1:header_end], blob[header_end + 1:]


def _blocks(header: CheckpointHeader, payload: bytes) -> Dict[str, np.ndarray]:
    expected_size = sum(b.nbytes for b in header.blocks)
    if len(payload) != expected_size:
        raise CheckpointCorruptError(
            f"payload holds {len(payload)} bytes, header lists {expected_size}; file is truncated or padded"
        )
    if hashlib.sha256(payload).hexdigest() != header.payload_sha256:
        raise CheckpointCorruptError("payload checksum mismatch")

    blocks: Dict[str, np.ndarray] = {}
    itemsize = np.dtype(BLOCK_DTYPE).itemsize
    for spec in header.blocks:
        if int(np.prod(spec.shape)) * itemsize != spec.nbytes:
            raise CheckpointCorruptError(
                f"block {spec.name}: shape {spec.shape} does not match {spec.nbytes} bytes"
            )
        if spec.offset + spec.nbytes > len(payload):
            raise CheckpointCorruptError(f"block {spec.name} runs past the end of the payload")
        raw = payload[spec.offset:spec.offset + spec.nbytes]
        blocks[spec.name] = np.frombuffer(raw, dtype=BLOCK_DTYPE).reshape(spec.shape).astype(np.float64)
    return blocks


def _param_set(prefix: str, sizes: Tuple[int, ...], blocks: Dict[str, np.ndarray]) -> ParamSet:
    names = [n for n in blocks if n.startswith(prefix + ".")]
    expected = ParamSet(prefix, sizes).expected_shapes()
    if set(names) != set(expected):
        missing = sorted(set(expected) - set(names))
        extra = sorted(set(names) - set(expected))
        raise CheckpointCorruptError(f"{prefix} blocks mismatch (missing {missing}, unexpected {extra})")
    return ParamSet(prefix, sizes, OrderedDict((n, blocks[n]) for n in expected))


def decode_checkpoint(blob: bytes) -> Checkpoint:
    _, header_raw, payload = _split_lines(blob)
    try:
        header = CheckpointHeader.model_validate_json(header_raw)
    except ValidationError as exc:
        raise CheckpointCorruptError(f"invalid checkpoint header: {exc.error_count()} problems") from exc
    blocks = _blocks(header, payload)

    try:
        arch = VAEArchitecture(**header.architecture.model_dump())
        encoder = _param_set("encoder", arch.encoder_sizes, blocks)
        decoder = _param_set("decoder", arch.decoder_sizes, blocks)
        model = VAEModel(arch, encoder, decoder, header.beta)
        stats = FeatureStats(blocks["stats.mean"], blocks["stats.std"])
        cfg = build_config(header.config)
    except KeyError as exc:
        raise CheckpointCorruptError(f"checkpoint lacks block {exc}") from exc
    except CheckpointCorruptError:
        raise
    except CardioVAEError as exc:
        raise CheckpointCorruptError(f"checkpoint contents are inconsistent: {exc}") from exc
    if stats.dim != arch.input_dim:
        raise CheckpointCorruptError(
            f"feature stats cover {stats.dim} bins but the model expects {arch.input_dim}"
        )
    return Checkpoint(model, stats, cfg, header.epoch, header.seed)


def load_checkpoint(path: PathLike) -> Checkpoint:
    """Read a checkpoint; nothing is returned unless every block checks out."""
    ckpt = decode_checkpoint(read_bytes(path))
    logger.info(
        f"Loaded checkpoint {path}: epoch {ckpt.epoch}, {ckpt.model.n_parameters} parameters"
    )
    return ckpt
