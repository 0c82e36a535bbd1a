"""
Method services.

One service per methodology; each turns a RunConfig and a seed into a
ReportRow and writes its files into the run directory:

- ReferenceService: resolved micro solve with the l_p band
- NumService: uniform-tow Stokes-Brinkman upscaling
- SbmService: segment-wise emulator bridging
- FrmService: fully resolved mesoscale solve
- PhysicsService: PINN and hybrid training

sweep_and_report folds multi-seed runs into a ComparisonReport.
"""

from dualperm.pipelines.frm import FrmService
from dualperm.pipelines.num import NumService
from dualperm.pipelines.physics import PhysicsService
from dualperm.pipelines.reference import ReferenceService
from dualperm.pipelines.report import (
    ComparisonReport,
    ComparisonRow,
    ReportRow,
    plot_data,
    read_rows,
    summarize,
    write_rows,
)
from dualperm.pipelines.sbm import SbmService
from dualperm.pipelines.sweep import jittered_geometry, sweep_and_report

SERVICES = {
    "reference": ReferenceService,
    "num": NumService,
    "sbm": SbmService,
    "frm": FrmService,
    "pinn": PhysicsService,
    "hybrid": PhysicsService,
}

__all__ = [
    "SERVICES",
    "ReferenceService",
    "NumService",
    "SbmService",
    "FrmService",
    "PhysicsService",
    "ComparisonReport",
    "ComparisonRow",
    "ReportRow",
    "plot_data",
    "read_rows",
    "summarize",
    "write_rows",
    "jittered_geometry",
    "sweep_and_report",
]
