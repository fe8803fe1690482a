"""Batch renderer turning QCTW phase-space dumps and trajectory CSVs into
publication-style raster images. Rendering is byte-deterministic: fixed
inputs always produce identical PNG files."""

__version__ = "0.1.0"

from .qctw import GridDump, read_qctw
from .render import render_trajectory, render_wigner
