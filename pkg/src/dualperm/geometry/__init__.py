"""Cells, distance queries, segment decomposition and collocation sampling."""

from dualperm.geometry.cells import (
    Box,
    Fiber,
    MicroCell,
    MesoCell,
    build_micro_cell,
    build_meso_cell,
    lattice_for_fvc,
    n_side_for,
    signed_distance,
    tow_fvc,
)
from dualperm.geometry.sampling import PointSets, sample_collocation, build_coupling_sets
from dualperm.geometry.segments import SegmentGrid, decompose_segments

__all__ = [
    "Box",
    "Fiber",
    "MicroCell",
    "MesoCell",
    "build_micro_cell",
    "build_meso_cell",
    "lattice_for_fvc",
    "n_side_for",
    "signed_distance",
    "tow_fvc",
    "PointSets",
    "sample_collocation",
    "build_coupling_sets",
    "SegmentGrid",
    "decompose_segments",
]
