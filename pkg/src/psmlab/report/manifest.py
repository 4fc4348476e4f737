"""Run manifests written next to every command's outputs."""

import dataclasses
import datetime
import hashlib
import json
import logging
from collections.abc import Iterable
from pathlib import Path
from typing import Any, Self

from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def now() -> str:
    return datetime.datetime.now(datetime.UTC).isoformat(timespec="seconds")


def hash_path(path: Path) -> str:
    """SHA-256 of a file, or of every file below a directory with its relative path."""
    h = hashlib.sha256()
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for file in files:
        if path.is_dir():
            h.update(file.relative_to(path).as_posix().encode())
        with file.open("rb") as stream:
            for chunk in iter(lambda: stream.read(1 << 20), b""):
                h.update(chunk)
    return h.hexdigest()


@dataclasses.dataclass(slots=True)
class RunManifest:
    """What a command read, how it was configured and what it wrote.

    Attributes:
        command (str): Subcommand name
        argv (list[str]): Arguments after the program name, enough to rerun the command
        config (dict[str, Any]): Resolved configuration snapshot
        seed (int): Seed of the run
        input_hashes (dict[str, str]): SHA-256 per input path
        outputs (list[str]): Paths written by the run
        started (str): UTC start time
        finished (str | None): UTC end time
        version (str): psmlab version
        status (str): ``ok`` or the error kind that ended the run
    """

    command: str
    argv: list[str]
    config: dict[str, Any]
    seed: int
    version: str
    input_hashes: dict[str, str] = dataclasses.field(default_factory=dict)
    outputs: list[str] = dataclasses.field(default_factory=list)
    started: str = dataclasses.field(default_factory=now)
    finished: str | None = None
    status: str = "ok"

    def add_inputs(self, paths: Iterable[Path]) -> None:
        for path in paths:
            if path.exists():
                self.input_hashes[str(path)] = hash_path(path)

    def add_outputs(self, paths: Iterable[Path]) -> None:
        self.outputs.extend(str(p) for p in paths)

    def write(self, directory: Path) -> Result[Path, PsmError]:
        self.finished = self.finished or now()
        path = directory / MANIFEST_NAME
        try:
            directory.mkdir(parents=True, exist_ok=True)
            text = json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True, default=str)
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            return fail(ErrorKind.IO_FAILURE, f"cannot write manifest {path}: {e}")
        logger.debug("wrote %s", path)
        return Ok(path)

    @classmethod
    def load(cls, path: Path) -> Result[Self, PsmError]:
        if path.is_dir():
            path = path / MANIFEST_NAME
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            return fail(ErrorKind.IO_FAILURE, f"cannot read manifest {path}: {e}")
        names = {f.name for f in dataclasses.fields(cls)}
        missing = sorted({"command", "argv", "config", "seed", "version"} - set(raw))
        if missing or not set(raw) <= names:
            return fail(ErrorKind.SCHEMA_MISMATCH, f"{path} is not a run manifest", missing=missing)
        return Ok(cls(**raw))
