"""Pydantic schema of the manifest written next to every artifact set."""

from datetime import UTC, datetime
from typing import Any

from pydantic import BaseModel, Field

from pgxselect import __version__


class RunManifest(BaseModel):
    """Everything needed to re-run a command and reproduce its outputs."""

    command: str = Field(..., description="Subcommand that produced the artifacts")
    version: str = Field(default=__version__, description="pgx-select version")
    created_at: datetime = Field(default_factory=lambda: datetime.now(UTC))
    argv: list[str] = Field(default_factory=list, description="Command-line arguments")
    inputs: dict[str, str] = Field(
        default_factory=dict, description="Input path to SHA-256 digest"
    )
    config: dict[str, Any] = Field(default_factory=dict)
    seeds: dict[str, int] = Field(default_factory=dict)
    outputs: list[str] = Field(default_factory=list)
    results: dict[str, Any] = Field(
        default_factory=dict, description="Headline diagnostics of the run"
    )
