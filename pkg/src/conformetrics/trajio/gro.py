"""Fixed-column GRO coordinate files (single or concatenated frames)."""

from __future__ import annotations

import re

import numpy as np

from ..core import Atom, Box, Frame, Topology, default_mass, element_from_name
from ..errors import FormatError

_TIME = re.compile(r"\bt=\s*([-+0-9.eE]+)")


def _decode(data) -> list:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("ascii", errors="replace")
    return data.splitlines()


def _looks_like_box(line: str) -> bool:
    fields = line.split()
    if len(line) >= 44 or len(fields) not in (3, 9):
        return False
    try:
        [float(x) for x in fields]
    except ValueError:
        return False
    return True


def _parse_box(line: str, lineno: int):
    fields = line.split()
    try:
        vals = [float(x) for x in fields]
    except ValueError:
        raise FormatError(f"line {lineno}: unparseable box line {line!r}") from None
    if vals and not any(vals):
        return None
    if len(vals) == 3:
        return Box.from_lengths(vals)
    if len(vals) == 9:
        if any(vals[3:]):
            raise FormatError(f"line {lineno}: triclinic box (non-zero off-diagonal entries) is not supported")
        return Box.from_lengths(vals[:3])
    raise FormatError(f"line {lineno}: box line needs 3 or 9 numbers, got {len(vals)}")


def _coord_width(line: str) -> int:
    # GRO precision is inferred from the spacing of the first two decimal points
    first = line.find(".", 20)
    second = line.find(".", first + 1)
    if first < 0 or second < 0:
        return 8
    return second - first


def parse_gro(data, element_overrides=None):
    """Parse GRO text into a topology and a list of frames.

    Coordinates are kept in nm exactly as printed. Frame times come from a
    ``t=`` token in the title line when present, else 0, 1, 2, ... ps.
    Chains start afresh whenever the residue number decreases.
    """
    lines = _decode(data)
    frames = []
    topology = None
    pos = 0
    while pos < len(lines):
        if not lines[pos].strip() and all(not l.strip() for l in lines[pos:]):
            break
        title = lines[pos]
        if pos + 1 >= len(lines):
            raise FormatError(f"line {pos + 2}: missing atom-count line")
        try:
            natoms = int(lines[pos + 1].strip())
        except ValueError:
            raise FormatError(f"line {pos + 2}: bad atom count {lines[pos + 1]!r}") from None
        atom_lines = lines[pos + 2: pos + 2 + natoms]
        box_at = pos + 2 + natoms
        if len(atom_lines) < natoms or box_at >= len(lines) or (natoms and _looks_like_box(atom_lines[-1])):
            raise FormatError(f"frame {len(frames)}: atom count {natoms} declared, but fewer atom lines "
                              "precede the box line")
        width = _coord_width(atom_lines[0]) if natoms else 8
        xyz = np.empty((natoms, 3))
        records = []
        for k, line in enumerate(atom_lines):
            lineno = pos + 3 + k
            if len(line) < 20 + 3 * width:
                raise FormatError(f"line {lineno}: atom line too short for fixed-column layout")
            try:
                resnr = int(line[0:5])
                resname = line[5:10].strip()
                name = line[10:15].strip()
                for c in range(3):
                    field = line[20 + c * width: 20 + (c + 1) * width]
                    if "." not in field:
                        raise ValueError(field)
                    xyz[k, c] = float(field)
            except ValueError:
                raise FormatError(f"line {lineno}: column misalignment in atom line {line!r}") from None
            records.append((resnr, resname, name))
        box = _parse_box(lines[box_at], box_at + 1)
        m = _TIME.search(title)
        time = float(m.group(1)) if m else float(len(frames))
        if topology is None:
            topology = _build_topology(records, element_overrides)
        elif natoms != topology.n_atoms:
            raise FormatError(f"frame {len(frames)} has {natoms} atoms, first frame has {topology.n_atoms}")
        frames.append(Frame(time, xyz, box))
        pos = box_at + 1
    if topology is None:
        raise FormatError("no frames found in GRO input")
    return topology, frames


def _build_topology(records, element_overrides=None) -> Topology:
    atoms = []
    chain = 0
    prev = None
    for k, (resnr, resname, name) in enumerate(records):
        if prev is not None and resnr < prev:
            chain += 1
        prev = resnr
        element = element_from_name(name, element_overrides)
        atoms.append(Atom(index=k, name=name, element=element, mass=default_mass(element),
                          residue_seq=resnr, residue_name=resname, chain_id=chain))
    return Topology(tuple(atoms))


def format_gro(topology: Topology, frames, title: str = "conformetrics") -> str:
    out = []
    for frame in frames:
        if frame.n_atoms != topology.n_atoms:
            raise FormatError("frame atom count does not match topology")
        out.append(f"{title} t= {frame.time:.5f}")
        out.append(f"{topology.n_atoms:5d}")
        for atom, (x, y, z) in zip(topology.atoms, frame.positions):
            out.append(f"{atom.residue_seq % 100000:5d}{atom.residue_name[:5]:<5s}{atom.name[:5]:>5s}"
                       f"{(atom.index + 1) % 100000:5d}{x:8.3f}{y:8.3f}{z:8.3f}")
        lengths = frame.box.lengths if frame.box is not None else np.zeros(3)
        out.append("".join(f"{v:10.5f}" for v in lengths))
    return "\n".join(out) + "\n"


def write_gro(topology: Topology, frames, title: str = "conformetrics") -> bytes:
    return format_gro(topology, frames, title).encode("ascii")
