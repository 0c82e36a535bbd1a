"""
Training Trace.

One record per coupling checkpoint, written as NDJSON (one JSON object per
line). Wall time is None in deterministic runs so reruns produce identical
files.
"""

from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field, field_validator


class TraceRecord(BaseModel):
    """State of a training run at one checkpoint."""

    iteration: int = Field(ge=0)
    losses: Dict[str, float]
    weights: Dict[str, float]
    k_hat: Optional[float] = None
    k_hat_raw: Optional[float] = None
    errors: Optional[Dict[str, float]] = None
    wall_time_s: Optional[float] = None


class TrainingTrace(BaseModel):
    """Ordered checkpoint records with run provenance."""

    method: str
    seed: int
    config_hash: str = ""
    code_version: str = ""
    records: List[TraceRecord] = Field(default_factory=list)

    @field_validator("records")
    @classmethod
    def validate_order(cls, v: List[TraceRecord]) -> List[TraceRecord]:
        iterations = [r.iteration for r in v]
        if any(b <= a for a, b in zip(iterations, iterations[1:])):
            raise ValueError("Trace iterations must be strictly increasing")
        return v

    def append(self, record: TraceRecord) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise ValueError(
                f"Iteration {record.iteration} does not follow {self.records[-1].iteration}"
            )
        self.records.append(record)

    @property
    def last(self) -> Optional[TraceRecord]:
        return self.records[-1] if self.records else None

    def iterations(self) -> List[int]:
        return [r.iteration for r in self.records]

    def __len__(self) -> int:
        return len(self.records)

    def to_ndjson(self, path: Union[str, Path]) -> Path:
        """Write one line per record, each carrying the run provenance."""
        path = Path(path)
        provenance = {
            "method": self.method,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "code_version": self.code_version,
        }
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for record in self.records:
                fh.write(_dump_line({**provenance, **record.model_dump(mode="json")}))
        return path

    @classmethod
    def from_ndjson(cls, path: Union[str, Path]) -> "TrainingTrace":
        lines = [line for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
        if not lines:
            raise ValueError(f"{path} holds no trace records")
        rows = [TraceLine.model_validate_json(line) for line in lines]
        head = rows[0]
        return cls(
            method=head.method,
            seed=head.seed,
            config_hash=head.config_hash,
            code_version=head.code_version,
            records=[TraceRecord(**row.model_dump(include=set(TraceRecord.model_fields))) for row in rows],
        )


class TraceLine(TraceRecord):
    """A record as stored on disk, with provenance fields."""

    method: str
    seed: int
    config_hash: str = ""
    code_version: str = ""


def _dump_line(data: dict) -> str:
    return TraceLine(**data).model_dump_json() + "\n"
