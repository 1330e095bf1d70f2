"""Reproducibility header attached to every output artifact."""

import hashlib
import json
from dataclasses import dataclass
from typing import Any

from psmflow import __version__


def config_hash(config: Any) -> str:
    """SHA-256 of a configuration's canonical JSON form.

    Args:
        config: A pydantic model, or any JSON-serializable value.
    """
    if hasattr(config, "model_dump"):
        config = config.model_dump(mode="json")
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Provenance:
    """Where an artifact came from.

    Attributes:
        config_hash: Hash of the scenario or suite configuration.
        workers: Worker count of the run.
        version: Package version.
    """

    config_hash: str
    workers: int
    version: str = __version__

    def as_line(self) -> str:
        return f"psmflow {self.version} config={self.config_hash} workers={self.workers}"

    @classmethod
    def for_config(cls, config: Any, workers: int) -> "Provenance":
        return cls(config_hash=config_hash(config), workers=workers)
