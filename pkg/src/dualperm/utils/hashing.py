"""Config hashing and run manifests."""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from pydantic import BaseModel

from dualperm import __version__
from dualperm.config.paths import MANIFEST_FILE


def canonical_json(data: Any) -> str:
    """Sorted-key, whitespace-free JSON used for hashing."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)


def config_hash(config: BaseModel) -> str:
    """SHA-256 of the validated config, excluding output_dir."""
    exclude = {"output_dir"} if "output_dir" in type(config).model_fields else None
    payload = config.model_dump(mode="json", exclude=exclude)
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def records_hash(records: Iterable[Any]) -> str:
    """SHA-256 over a sequence of JSON-serializable records."""
    digest = hashlib.sha256()
    for record in records:
        digest.update(canonical_json(record).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


def write_manifest(
    run_dir: Path,
    config: BaseModel,
    method: str,
    seed: Optional[int],
    files: Iterable[str],
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write manifest.json describing one run.

    Args:
        run_dir: Run output directory.
        config: The validated config of the run.
        method: Methodology name.
        seed: Run seed (None for sweeps).
        files: Names of the files the run emitted.
        extra: Additional fields (e.g. permeability estimates).

    Returns:
        Path of the written manifest.
    """
    manifest = {
        "config_hash": config_hash(config),
        "seed": seed,
        "code_version": __version__,
        "method": method,
        "files": sorted(files),
        "config": config.model_dump(mode="json", exclude={"output_dir"}),
    }
    if extra:
        manifest.update(extra)
    path = Path(run_dir) / MANIFEST_FILE
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path
