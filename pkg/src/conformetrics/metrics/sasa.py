"""Shrake-Rupley solvent accessible surface area."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import Frame, Selection, Topology, find_pairs
from ..errors import FormatError, UsageError

# Bondi (1964) van der Waals radii, nm
BONDI_RADII = {
    "H": 0.120, "He": 0.140, "Li": 0.182, "C": 0.170, "N": 0.155, "O": 0.152,
    "F": 0.147, "Ne": 0.154, "Na": 0.227, "Mg": 0.173, "Si": 0.210, "P": 0.180,
    "S": 0.180, "Cl": 0.175, "Ar": 0.188, "K": 0.275, "Ni": 0.163, "Cu": 0.140,
    "Zn": 0.139, "Ga": 0.187, "As": 0.185, "Se": 0.190, "Br": 0.185, "Kr": 0.202,
    "Pd": 0.163, "Ag": 0.172, "Cd": 0.158, "In": 0.193, "Sn": 0.217, "Te": 0.206,
    "I": 0.198, "Xe": 0.216, "Pt": 0.175, "Au": 0.166, "Hg": 0.155, "Tl": 0.196,
    "Pb": 0.202, "U": 0.186,
}


def load_radii(text: str) -> dict:
    """Parse a radii override table (CSV with columns ``element,radius_nm``)."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["element", "radius_nm"]:
        raise FormatError("radii file must have the header 'element,radius_nm'")
    table = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            r = float(row["radius_nm"])
        except (TypeError, ValueError):
            raise FormatError(f"radii file line {lineno}: bad radius {row['radius_nm']!r}") from None
        if not r > 0:
            raise FormatError(f"radii file line {lineno}: radius must be positive")
        table[row["element"].strip()] = r
    return table


@dataclass(frozen=True)
class SasaParams:
    probe_radius: float = 0.14
    sphere_points: int = 960
    radii_table: dict = field(default_factory=lambda: dict(BONDI_RADII))

    def __post_init__(self):
        if not self.probe_radius > 0:
            raise UsageError("probe radius must be positive")
        if self.sphere_points < 12:
            raise UsageError("need at least 12 sphere points")

    def with_overrides(self, overrides: dict) -> "SasaParams":
        table = dict(self.radii_table)
        table.update(overrides)
        return SasaParams(self.probe_radius, self.sphere_points, table)


_sphere_cache = {}


def sphere_points(n: int) -> np.ndarray:
    """Deterministic golden-section spiral of ``n`` unit vectors."""
    if n not in _sphere_cache:
        k = np.arange(n, dtype=float)
        z = 1.0 - (2.0 * k + 1.0) / n
        r = np.sqrt(1.0 - z * z)
        phi = k * math.pi * (3.0 - math.sqrt(5.0))
        pts = np.column_stack((r * np.cos(phi), r * np.sin(phi), z))
        pts.setflags(write=False)
        _sphere_cache[n] = pts
    return _sphere_cache[n]


def atom_radii(topology: Topology, indices, params: SasaParams) -> np.ndarray:
    out = np.empty(len(indices))
    for k, i in enumerate(indices):
        el = topology.atoms[i].element
        try:
            out[k] = params.radii_table[el]
        except KeyError:
            raise FormatError(f"no van der Waals radius for element {el!r} (atom {i})") from None
    return out


def shrake_rupley(positions: np.ndarray, radii: np.ndarray, n_points: int = 960, box=None) -> np.ndarray:
    """Per-atom exposed area for spheres of the given (already inflated) radii."""
    pos = np.asarray(positions, dtype=float)
    radii = np.asarray(radii, dtype=float)
    n = pos.shape[0]
    unit = sphere_points(n_points)
    areas = 4.0 * math.pi * radii ** 2
    if n < 2:
        return areas.copy()
    i, j, d = find_pairs(pos, 2.0 * radii.max(), box)
    touching = np.linalg.norm(d, axis=1) < radii[i] + radii[j]
    i, j, d = i[touching], j[touching], d[touching]
    # both directions: neighbour j of i sits at +d, neighbour i of j at -d
    src = np.concatenate((i, j))
    dst = np.concatenate((j, i))
    disp = np.concatenate((d, -d))
    order = np.argsort(src, kind="stable")
    src, dst, disp = src[order], dst[order], disp[order]
    bounds = np.searchsorted(src, np.arange(n + 1))
    out = areas.copy()
    for a in range(n):
        lo, hi = bounds[a], bounds[a + 1]
        if lo == hi:
            continue
        pts = unit * radii[a]
        rel = pts[:, None, :] - disp[lo:hi][None, :, :]
        buried = np.any(np.einsum("pnk,pnk->pn", rel, rel) < radii[dst[lo:hi]] ** 2, axis=1)
        out[a] = areas[a] * (n_points - np.count_nonzero(buried)) / n_points
    return out


def sasa(frame: Frame, sel: Selection, topology: Topology, params: Optional[SasaParams] = None):
    """Solvent accessible surface area of the selected atoms.

    Only selected atoms occlude each other. Returns ``(total, per_atom)``
    in nm^2, ``per_atom`` aligned with ``sel.indices``.
    """
    params = params or SasaParams()
    idx = sel.indices
    radii = atom_radii(topology, idx, params) + params.probe_radius
    per_atom = shrake_rupley(frame.positions[idx], radii, params.sphere_points, frame.box)
    return float(per_atom.sum()), per_atom
