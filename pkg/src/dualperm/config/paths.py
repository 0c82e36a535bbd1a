"""
Output Path Configuration.

Run outputs live under DUALPERM_OUTPUT_DIR (default ./runs), one directory per
run:

    runs/{method}_{config_hash[:12]}_seed{seed}/
        report.csv
        trace.ndjson
        manifest.json
        ...

The base directory can be overridden per run (CLI `--out`, RunConfig.output_dir).
"""

import os
from pathlib import Path
from typing import Optional, Union

from dotenv import load_dotenv

from dualperm.utils.logger import get_logger

load_dotenv()

logger = get_logger(__name__)

# Base directory for all run outputs
OUTPUT_DIR = Path(os.environ.get("DUALPERM_OUTPUT_DIR", "runs"))

# File names written into each run directory
REPORT_FILE = "report.csv"
TRACE_FILE = "trace.ndjson"
MANIFEST_FILE = "manifest.json"
PLOT_DATA_FILE = "plot_data.csv"
GEOMETRY_FILE = "geometry.json"
CHECKPOINT_FILE = "params.pt"
DATASET_FILE = "dataset.json"
MODEL_FILE = "emulator.json"


def run_directory(
    method: str,
    config_hash: str,
    seed: Optional[int] = None,
    base: Optional[Union[str, Path]] = None,
) -> Path:
    """Return (and create) the output directory of one run.

    Args:
        method: Methodology name.
        config_hash: Hash of the validated run config.
        seed: Run seed; omitted for multi-seed sweeps.
        base: Override for OUTPUT_DIR.

    Returns:
        Path to the run directory.
    """
    name = f"{method}_{config_hash[:12]}"
    if seed is not None:
        name += f"_seed{seed}"
    path = Path(base) if base is not None else OUTPUT_DIR
    path = path / name

    # Log but don't fail; writing a result will surface the real error
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logger.warning(
            "Could not create run directory",
            extra={"extra_fields": {"path": str(path), "error": str(e)}},
        )
    return path
