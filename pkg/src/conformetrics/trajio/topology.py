"""JSON topology files and bond lists.

GRO carries no masses, charges or bonds, so the simulation kernel reads
its topology from a small JSON document::

    {"atoms": [{"name": "CA", "element": "C", "mass": 12.011, "charge": 0.0,
                "residue_seq": 1, "residue_name": "GLN", "chain_id": 0}, ...],
     "bonds": [[0, 1, 0.1], ...]}
"""

from __future__ import annotations

import csv
import io
import json

from ..core import Atom, Topology, default_mass
from ..errors import FormatError

_ATOM_KEYS = {"name", "element", "mass", "charge", "residue_seq", "residue_name", "chain_id"}


def topology_to_json(topology: Topology) -> bytes:
    doc = {
        "atoms": [{"name": a.name, "element": a.element, "mass": a.mass, "charge": a.charge,
                   "residue_seq": a.residue_seq, "residue_name": a.residue_name, "chain_id": a.chain_id}
                  for a in topology.atoms],
        "bonds": [[i, j, r] for i, j, r in topology.bonds],
    }
    return (json.dumps(doc, indent=1) + "\n").encode()


def topology_from_json(data) -> Topology:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"topology JSON does not parse: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("atoms"), list):
        raise FormatError("topology JSON needs an 'atoms' list")
    atoms = []
    for k, rec in enumerate(doc["atoms"]):
        if not isinstance(rec, dict):
            raise FormatError(f"atom {k}: expected an object")
        unknown = set(rec) - _ATOM_KEYS
        if unknown:
            raise FormatError(f"atom {k}: unknown keys {sorted(unknown)}")
        try:
            element = str(rec["element"])
            atoms.append(Atom(index=k, name=str(rec["name"]), element=element,
                              mass=float(rec.get("mass", default_mass(element))),
                              charge=float(rec.get("charge", 0.0)),
                              residue_seq=int(rec.get("residue_seq", 1)),
                              residue_name=str(rec.get("residue_name", "UNK")),
                              chain_id=int(rec.get("chain_id", 0))))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"atom {k}: {exc}") from None
    try:
        bonds = tuple((int(i), int(j), float(r)) for i, j, r in doc.get("bonds", []))
    except (TypeError, ValueError):
        raise FormatError("bonds must be [i, j, length_nm] triples") from None
    return Topology(tuple(atoms), bonds)


def read_bonds_csv(text: str) -> tuple:
    """Bond list from CSV with header ``i,j,length_nm`` (0-based indices)."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["i", "j", "length_nm"]:
        raise FormatError("bond file must have the header 'i,j,length_nm'")
    bonds = []
    for lineno, row in enumerate(reader, start=2):
        try:
            bonds.append((int(row["i"]), int(row["j"]), float(row["length_nm"])))
        except (TypeError, ValueError):
            raise FormatError(f"bond file line {lineno}: bad row {row}") from None
    return tuple(bonds)


def with_bonds(topology: Topology, bonds) -> Topology:
    return Topology(topology.atoms, tuple(bonds))
