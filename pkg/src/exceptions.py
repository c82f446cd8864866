"""Error taxonomy for CardioVAE.

Every exception carries the CLI exit code and a short kind string so the
command-line driver can print one greppable line per failure.
"""

from typing import Optional


class CardioVAEError(Exception):
    """Base class for all CardioVAE errors."""

    exit_code: int = 1
    kind: str = "error"


class UsageError(CardioVAEError):
    """Bad command-line usage (unknown flag, missing option)."""

    exit_code = 1
    kind = "usage"


class InvalidArgumentError(CardioVAEError, ValueError):
    """A precondition on an argument or input does not hold."""

    exit_code = 2
    kind = "invalid-argument"


class ConfigError(InvalidArgumentError):
    """A run configuration file or value failed validation."""

    kind = "config"


class UnsupportedFormatError(InvalidArgumentError):
    """An input file uses a layout or encoding we do not read or write."""

    kind = "unsupported-format"


class StorageError(CardioVAEError):
    """Reading or writing an artifact on disk failed."""

    exit_code = 3
    kind = "io"


class WavParseError(StorageError):
    """A WAV file is malformed or truncated."""

    kind = "parse"

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class CsvParseError(StorageError):
    """A CSV table is empty or its rows do not match its header."""

    kind = "parse"


class CheckpointVersionError(StorageError):
    """A checkpoint was written by an unknown format version."""

    kind = "checkpoint-version"

    def __init__(self, found: int, supported: int):
        super().__init__(
            f"checkpoint format version {found} is not supported "
            f"(this build reads version {supported})"
        )
        self.found = found
        self.supported = supported


class CheckpointCorruptError(StorageError):
    """A checkpoint is truncated or its blocks disagree with its header."""

    kind = "checkpoint-corrupt"


class NumericError(CardioVAEError, ArithmeticError):
    """A computation produced a non-finite value."""

    exit_code = 4
    kind = "numeric"


class TapeStateError(CardioVAEError, RuntimeError):
    """A gradient tape was used out of order."""

    exit_code = 4
    kind = "state"
