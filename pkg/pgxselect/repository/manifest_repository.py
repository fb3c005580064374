"""Manifest persistence and input hashing."""

import hashlib
import logging
from pathlib import Path

from pydantic import ValidationError

from pgxselect.exceptions import DataValidationError
from pgxselect.schemas.manifest_schema import RunManifest

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def file_sha256(path: Path) -> str:
    """Hex SHA-256 digest of a file's bytes."""
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def hash_inputs(paths: list[Path]) -> dict[str, str]:
    return {str(path): file_sha256(path) for path in paths}


class ManifestRepository:
    """Reads and writes ``manifest.json`` in an artifact directory."""

    def __init__(self, directory: Path):
        """Initialize repository for one artifact directory.

        Args:
            directory: Directory holding the artifacts
        """
        self.directory = directory

    @property
    def path(self) -> Path:
        return self.directory / MANIFEST_NAME

    def save(self, manifest: RunManifest) -> Path:
        """Write the manifest as indented JSON.

        Args:
            manifest: Manifest to write

        Returns:
            Path of the written file
        """
        self.directory.mkdir(parents=True, exist_ok=True)
        self.path.write_text(manifest.model_dump_json(indent=2) + "\n")
        logger.info("Wrote manifest %s", self.path, extra={"command": manifest.command})
        return self.path

    def load(self) -> RunManifest:
        """Read the manifest.

        Raises:
            DataValidationError: If the file is missing or malformed
        """
        if not self.path.is_file():
            raise DataValidationError(f"no manifest in {self.directory}")
        try:
            return RunManifest.model_validate_json(self.path.read_text())
        except ValidationError as exc:
            raise DataValidationError(f"malformed manifest {self.path}: {exc}") from exc
