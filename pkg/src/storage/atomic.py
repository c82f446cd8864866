"""Write-to-temp-then-rename helpers so no command leaves partial output.

Inside an :func:`output_transaction` every file written and every directory
created is recorded; if the command fails, new files and directories are
removed and overwritten files get their previous content back.
"""

import contextvars
import logging
import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Union

from ..exceptions import StorageError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class OutputTransaction:
    """Outputs one command has produced so far."""
    created_files: List[Path] = field(default_factory=list)
    created_dirs: List[Path] = field(default_factory=list)
    backups: Dict[Path, Path] = field(default_factory=dict)

    def record_file(self, path: Path) -> None:
        """Call before ``path`` is replaced; keeps a copy of any earlier content."""
        if path in self.backups or path in self.created_files:
            return
        if path.exists():
            backup = path.with_name(f".{path.name}.{os.getpid()}.bak")
            shutil.copy2(path, backup)
            self.backups[path] = backup
        else:
            self.created_files.append(path)

    def record_dir(self, path: Path) -> None:
        self.created_dirs.append(path)

    def commit(self) -> None:
        for backup in self.backups.values():
            backup.unlink(missing_ok=True)
        self.backups.clear()

    def rollback(self) -> None:
        for path in reversed(self.created_files):
            path.unlink(missing_ok=True)
        for path, backup in self.backups.items():
            os.replace(backup, path)
        # Innermost first; a directory that still holds other files stays.
        for path in reversed(self.created_dirs):
            try:
                path.rmdir()
            except OSError:
                pass
        logger.warning(
            f"Rolled back {len(self.created_files)} new files, {len(self.backups)} overwritten files "
            f"and {len(self.created_dirs)} directories"
        )
        self.created_files.clear()
        self.created_dirs.clear()
        self.backups.clear()


_active: contextvars.ContextVar[Optional[OutputTransaction]] = contextvars.ContextVar(
    "cardiovae_output_transaction", default=None
)


@contextmanager
def output_transaction() -> Iterator[OutputTransaction]:
    """Undo every output of the enclosed block if it raises."""
    transaction = OutputTransaction()
    token = _active.set(transaction)
    try:
        yield transaction
    except BaseException:
        transaction.rollback()
        raise
    else:
        transaction.commit()
    finally:
        _active.reset(token)


def make_dirs(path: PathLike) -> Path:
    """mkdir -p that records the directories it creates in the active transaction."""
    path = Path(path)
    missing = []
    ancestor = path
    while not ancestor.exists() and ancestor != ancestor.parent:
        missing.append(ancestor)
        ancestor = ancestor.parent
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot create directory {path}: {exc.strerror or exc}") from exc
    transaction = _active.get()
    if transaction is not None:
        for created in reversed(missing):
            transaction.record_dir(created)
    return path


def atomic_write_bytes(path: PathLike, payload: bytes) -> Path:
    """Write ``payload`` to a sibling temp file, fsync it, then rename over ``path``."""
    path = Path(path)
    tmp_name = None
    transaction = _active.get()
    try:
        with tempfile.NamedTemporaryFile(
            mode="wb", dir=path.parent, prefix=f".{path.name}.", suffix=".tmp", delete=False
        ) as handle:
            tmp_name = handle.name
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        if transaction is not None:
            transaction.record_file(path)
        os.replace(tmp_name, path)
    except OSError as exc:
        if tmp_name is not None and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise StorageError(f"cannot write {path}: {exc.strerror or exc}") from exc
    logger.debug(f"Wrote {len(payload)} bytes to {path}")
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    try:
        return path.read_bytes()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc.strerror or exc}") from exc
