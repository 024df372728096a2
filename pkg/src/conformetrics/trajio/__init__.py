"""Structure/trajectory parsers and writers, and analysis report output."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..core import Topology, Trajectory
from ..errors import FormatError
from .cfrm import read_cfrm, write_cfrm
from .gro import format_gro, parse_gro, write_gro
from .pdb import parse_pdb_multimodel, write_pdb
from .report import (CSV_COLUMNS, MetricReport, comparison_table, emit_report, read_series_csv,
                     render_mean_sd, render_number, report_from_json, rmsf_to_csv, series_to_csv)
from .topology import read_bonds_csv, topology_from_json, topology_to_json, with_bonds

__all__ = [
    "CSV_COLUMNS", "MetricReport", "TrajectorySource", "atomic_write", "comparison_table",
    "emit_report", "format_gro", "load_structure", "load_trajectory", "parse_gro",
    "parse_pdb_multimodel", "read_bonds_csv", "read_cfrm", "read_series_csv", "render_mean_sd",
    "render_number", "report_from_json", "rmsf_to_csv", "series_to_csv", "topology_from_json",
    "topology_to_json", "with_bonds", "write_cfrm", "write_gro", "write_pdb",
]

FORMATS = ("gro", "pdb", "cfrm")


def guess_format(path) -> str:
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix in ("gro", "pdb", "cfrm"):
        return suffix
    if suffix == "ent":
        return "pdb"
    raise FormatError(f"cannot tell the format of {path}; pass it explicitly")


def atomic_write(path, data: bytes) -> None:
    """Write via a temporary file in the target directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        # mkstemp creates 0600; give the file the usual umask-derived mode
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_structure(path, fmt: Optional[str] = None, element_overrides: Optional[dict] = None):
    """Topology and frames from a GRO, PDB or topology-JSON file.

    ``element_overrides`` maps atom names to elements for coordinate files
    whose names the built-in rules would misread (``AR`` for argon, say).
    """
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() == ".json":
        return topology_from_json(data), []
    fmt = fmt or guess_format(path)
    if fmt == "gro":
        return parse_gro(data, element_overrides)
    if fmt == "pdb":
        return parse_pdb_multimodel(data, element_overrides)
    raise FormatError(f"{path} is not a structure file (got format {fmt!r})")


@dataclass(frozen=True)
class TrajectorySource:
    topology_path: Path
    frames_path: Path
    format: str

    def __post_init__(self):
        if self.format not in FORMATS:
            raise FormatError(f"unknown trajectory format {self.format!r}; choose from {FORMATS}")

    def load(self, bonds_path=None) -> Trajectory:
        return load_trajectory(self.topology_path, self.frames_path, self.format, bonds_path)


def load_trajectory(topology_path, frames_path, fmt: Optional[str] = None, bonds_path=None) -> Trajectory:
    """Assemble a trajectory from a topology source and a frame file.

    The topology may be topology JSON, GRO or PDB. Names, residues and
    chains come from it; bonds come from the JSON, PDB CONECT records or
    an explicit ``i,j,length_nm`` CSV.
    """
    topology, _ = load_structure(topology_path)
    frames_path = Path(frames_path)
    fmt = fmt or guess_format(frames_path)
    data = frames_path.read_bytes()
    if fmt == "cfrm":
        frames = read_cfrm(data)
    elif fmt == "gro":
        frames = parse_gro(data)[1]
    elif fmt == "pdb":
        frames = parse_pdb_multimodel(data)[1]
    else:
        raise FormatError(f"unknown trajectory format {fmt!r}; choose from {FORMATS}")
    if bonds_path is not None:
        topology = with_bonds(topology, read_bonds_csv(Path(bonds_path).read_text()))
    if frames and frames[0].n_atoms != topology.n_atoms:
        raise FormatError(f"{frames_path} has {frames[0].n_atoms} atoms per frame, "
                          f"topology {topology_path} has {topology.n_atoms}")
    return Trajectory(topology, frames)


def load_topology(path) -> Topology:
    return load_structure(path)[0]
