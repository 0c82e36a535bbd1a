"""
Run Reports.

ReportRow is one run of one method at one seed. ComparisonReport folds rows
into mean value (MV), standard deviation (SD, population convention) and
coefficient of variation (CV = SD / MV) per method and sweep level.
"""

import json
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

# Fixed float format so reruns produce identical files
FLOAT_FORMAT = "%.12g"


class ReportRow(BaseModel):
    """Result of one run."""

    method: str
    seed: int
    parameter: Optional[float] = None
    n_fibers: int = 0
    fvc: Optional[float] = None
    radius: Optional[float] = None
    k_micro: Optional[float] = None
    k_micro_source: Optional[str] = None
    band_low: Optional[float] = None
    band_high: Optional[float] = None
    k_meso: Optional[float] = None
    k_hat: Optional[float] = None
    in_band: Optional[bool] = None
    error_u1: Optional[float] = None
    error_u2: Optional[float] = None
    error_p: Optional[float] = None
    degenerate: bool = False
    clamped_segments: int = 0
    runtime_s: Optional[float] = None
    config_hash: str = ""
    code_version: str = ""

    @property
    def value(self) -> Optional[float]:
        """The permeability a method reports: K[Z], else K_hat, else K11."""
        for candidate in (self.k_meso, self.k_hat, self.k_micro):
            if candidate is not None:
                return candidate
        return None


def write_rows(rows: Iterable[ReportRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    frame = pd.DataFrame([row.model_dump() for row in rows], columns=list(ReportRow.model_fields))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_rows(path: Union[str, Path]) -> List[ReportRow]:
    records = json.loads(pd.read_csv(path).to_json(orient="records"))
    return [ReportRow(**{k: v for k, v in record.items() if v is not None}) for record in records]


class ComparisonRow(BaseModel):
    """Statistics of one method at one sweep level."""

    method: str
    parameter: Optional[float] = None
    n_runs: int = Field(ge=0)
    mv: Optional[float] = None
    sd: Optional[float] = None
    cv: Optional[float] = None
    fvc: Optional[float] = None
    runtime_s: Optional[float] = None
    degenerate_runs: int = 0


class ComparisonReport(BaseModel):
    """Per-method statistics, sorted by method then parameter."""

    rows: List[ComparisonRow] = Field(default_factory=list)
    config_hash: str = ""
    code_version: str = ""

    @model_validator(mode="after")
    def validate_rows(self) -> "ComparisonReport":
        keys = [(r.method, -np.inf if r.parameter is None else r.parameter) for r in self.rows]
        if keys != sorted(keys):
            raise ValueError("Comparison rows must be sorted by method then parameter")
        for r in self.rows:
            if r.cv is None or not r.mv or r.sd is None:
                continue
            if not np.isclose(r.cv, r.sd / r.mv, rtol=1e-12, atol=0.0):
                raise ValueError(f"CV of {r.method} is not SD / MV")
        return self

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([row.model_dump() for row in self.rows], columns=list(ComparisonRow.model_fields))
        frame["config_hash"] = self.config_hash
        frame["code_version"] = self.code_version
        return frame

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return path


def summarize(
    rows: Iterable[ReportRow], config_hash: str = "", code_version: str = ""
) -> ComparisonReport:
    """Fold run rows into MV, SD (ddof=0) and CV per (method, parameter).

    Degenerate rows and rows without a value are counted but excluded from the
    statistics.
    """
    records = [
        {
            "method": row.method,
            "parameter": row.parameter,
            "value": row.value if not row.degenerate else None,
            "fvc": row.fvc,
            "runtime_s": row.runtime_s,
            "degenerate": row.degenerate,
        }
        for row in rows
    ]
    if not records:
        return ComparisonReport(config_hash=config_hash, code_version=code_version)

    frame = pd.DataFrame.from_records(records)
    frame["parameter_key"] = frame["parameter"].fillna(-np.inf)
    out: List[ComparisonRow] = []
    for (method, key), group in frame.groupby(["method", "parameter_key"], sort=True):
        values = group["value"].dropna().astype(float)
        mv = float(values.mean()) if len(values) else None
        sd = float(values.std(ddof=0)) if len(values) else None
        cv = sd / mv if mv else None
        runtimes = group["runtime_s"].dropna().astype(float)
        fvcs = group["fvc"].dropna().astype(float)
        out.append(
            ComparisonRow(
                method=method,
                parameter=None if key == -np.inf else float(key),
                n_runs=len(values),
                mv=mv,
                sd=sd,
                cv=cv,
                fvc=float(fvcs.mean()) if len(fvcs) else None,
                runtime_s=float(runtimes.mean()) if len(runtimes) else None,
                degenerate_runs=int(group["degenerate"].sum()),
            )
        )
    return ComparisonReport(rows=out, config_hash=config_hash, code_version=code_version)


def plot_data(report: ComparisonReport) -> pd.DataFrame:
    """K versus fvc per method for external plotting."""
    frame = report.to_frame()[["method", "parameter", "fvc", "mv", "sd", "cv"]]
    return frame.sort_values(["method", "fvc"], kind="mergesort").reset_index(drop=True)
