"""Multi-model PDB reading and writing.

Coordinates are converted from angstrom to nm on the way in and back on
the way out. Chains are delimited by TER records and chain-identifier
changes; chain ids are renumbered 0, 1, ... in file order.
"""

from __future__ import annotations

import numpy as np

from ..core import (NM_TO_ANGSTROM, Atom, Box, Frame, Topology, default_mass,
                    element_from_name)
from ..errors import FormatError


def _float(line, lo, hi, what, lineno):
    try:
        return float(line[lo:hi])
    except ValueError:
        raise FormatError(f"line {lineno}: unparseable {what} field {line[lo:hi]!r}") from None


def parse_pdb_multimodel(data, element_overrides=None):
    """Parse ATOM/HETATM records grouped by MODEL/ENDMDL into frames.

    A file without MODEL records is a single frame. Elements come from
    columns 77-78 and fall back to the atom name. CONECT records become
    topology bonds whose lengths are measured in the first model.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("ascii", errors="replace")
    models = []
    current = None
    records = None
    box = None
    conect = []
    chain = 0
    chain_label = None
    pending_ter = False
    serial_to_index = {}
    for lineno, raw in enumerate(data.splitlines(), start=1):
        rec = raw[:6].strip()
        if rec == "CRYST1":
            a, b, c = (_float(raw, lo, lo + 9, "cell", lineno) for lo in (6, 15, 24))
            angles = [_float(raw, lo, lo + 7, "cell angle", lineno) for lo in (33, 40, 47)]
            if any(abs(x - 90.0) > 1e-3 for x in angles):
                raise FormatError(f"line {lineno}: non-rectangular unit cell is not supported")
            if a > 1.0 and b > 1.0 and c > 1.0:
                box = Box.from_lengths(np.array([a, b, c]) / NM_TO_ANGSTROM)
        elif rec == "MODEL":
            if current is not None:
                raise FormatError(f"line {lineno}: MODEL inside an open MODEL")
            current = []
        elif rec in ("ATOM", "HETATM"):
            if current is None:
                current = []
            if len(raw) < 54:
                raise FormatError(f"line {lineno}: ATOM record shorter than the coordinate columns")
            xyz = [_float(raw, lo, lo + 8, "coordinate", lineno) for lo in (30, 38, 46)]
            current.append(xyz)
            if not models:
                if records is None:
                    records = []
                label = raw[21:22]
                if records and (pending_ter or label != chain_label):
                    chain += 1
                pending_ter = False
                chain_label = label
                name = raw[12:16].strip()
                element = raw[76:78].strip().capitalize() if len(raw) >= 78 else ""
                if not element or not element.isalpha():
                    element = element_from_name(name, element_overrides)
                try:
                    resseq = int(raw[22:26])
                except ValueError:
                    raise FormatError(f"line {lineno}: bad residue number {raw[22:26]!r}") from None
                charge = 0.0
                try:
                    serial = int(raw[6:11])
                    serial_to_index[serial] = len(records)
                except ValueError:
                    pass
                records.append(Atom(index=len(records), name=name, element=element,
                                    mass=default_mass(element), charge=charge, residue_seq=resseq,
                                    residue_name=raw[17:20].strip(), chain_id=chain))
        elif rec == "TER":
            pending_ter = True
        elif rec == "ENDMDL":
            if current is None:
                raise FormatError(f"line {lineno}: ENDMDL without MODEL")
            models.append(current)
            current = None
        elif rec == "CONECT" and not models:
            fields = [raw[k:k + 5] for k in range(6, len(raw), 5)]
            try:
                ids = [int(f) for f in fields if f.strip()]
            except ValueError:
                raise FormatError(f"line {lineno}: bad CONECT record") from None
            conect.extend((ids[0], other) for other in ids[1:])
    if current:
        models.append(current)
    if not models or records is None:
        raise FormatError("no ATOM/HETATM records found")
    natoms = len(records)
    frames = []
    for k, model in enumerate(models):
        if len(model) != natoms:
            raise FormatError(f"model {k + 1} has {len(model)} atoms, model 1 has {natoms}")
        frames.append(Frame(float(k), np.array(model) / NM_TO_ANGSTROM, box))
    bonds = set()
    for a, b in conect:
        if a in serial_to_index and b in serial_to_index:
            i, j = sorted((serial_to_index[a], serial_to_index[b]))
            if i != j:
                bonds.add((i, j))
    first = frames[0].positions
    bond_list = tuple((i, j, float(np.linalg.norm(first[i] - first[j]))) for i, j in sorted(bonds))
    return Topology(tuple(records), bond_list), frames


def _chain_letter(k: int) -> str:
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZ"[k % 26]


def write_pdb(topology: Topology, frames) -> bytes:
    out = []
    box = frames[0].box if frames else None
    if box is not None:
        a, b, c = box.lengths * NM_TO_ANGSTROM
        out.append(f"CRYST1{a:9.3f}{b:9.3f}{c:9.3f}{90.0:7.2f}{90.0:7.2f}{90.0:7.2f} P 1           1")
    for m, frame in enumerate(frames, start=1):
        out.append(f"MODEL     {m:4d}")
        prev_chain = None
        for atom, xyz in zip(topology.atoms, frame.positions * NM_TO_ANGSTROM):
            if prev_chain is not None and atom.chain_id != prev_chain:
                out.append("TER")
            prev_chain = atom.chain_id
            name = atom.name if len(atom.name) >= 4 or len(atom.element) == 2 else " " + atom.name
            out.append(f"ATOM  {(atom.index + 1) % 100000:5d} {name:<4s} {atom.residue_name:>3s} "
                       f"{_chain_letter(atom.chain_id)}{atom.residue_seq % 10000:4d}    "
                       f"{xyz[0]:8.3f}{xyz[1]:8.3f}{xyz[2]:8.3f}{1.0:6.2f}{0.0:6.2f}          "
                       f"{atom.element:>2s}")
        out.append("TER")
        out.append("ENDMDL")
    out.append("END")
    return ("\n".join(out) + "\n").encode("ascii")
