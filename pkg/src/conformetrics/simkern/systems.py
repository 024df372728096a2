"""Builders for the small test systems: LJ fluids, an LJ dimer and a four-chain toy protein."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import COULOMB_CONSTANT, Atom, Box, Topology
from ..errors import ConfigError
from .params import ForceFieldParams

ARGON_SIGMA = 0.34  # nm
ARGON_EPSILON = 0.9977  # kJ/mol (120 K * k_B)
ARGON_MASS = 39.948


@dataclass
class System:
    topology: Topology
    positions: np.ndarray
    box: Optional[Box]
    params: ForceFieldParams

    @property
    def masses(self) -> np.ndarray:
        return self.topology.masses


def fcc_lattice(n_cells: int, edge: float) -> np.ndarray:
    """``4 n_cells^3`` points of a face-centred cubic lattice filling a cube of side ``edge``."""
    basis = np.array([[0, 0, 0], [0.5, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0.5]])
    cells = np.array(np.meshgrid(*[np.arange(n_cells)] * 3, indexing="ij")).reshape(3, -1).T
    pts = (cells[:, None, :] + basis[None, :, :]).reshape(-1, 3)
    return (pts + 0.25) * (edge / n_cells)


def lj_fluid(n_cells: int = 3, reduced_density: float = 0.8, cutoff: float = 0.85,
             sigma: float = ARGON_SIGMA, epsilon: float = ARGON_EPSILON, mass: float = ARGON_MASS,
             dispersion_correction: bool = False) -> System:
    """Argon-like LJ fluid on an fcc start lattice (108 atoms for ``n_cells=3``)."""
    n = 4 * n_cells ** 3
    edge = (n / reduced_density) ** (1.0 / 3.0) * sigma
    atoms = tuple(Atom(index=k, name="AR", element="Ar", mass=mass, residue_seq=k + 1, residue_name="AR")
                  for k in range(n))
    params = ForceFieldParams(species=np.zeros(n, dtype=int), epsilon=[epsilon], sigma=[sigma],
                              charges=np.zeros(n), cutoff=cutoff, dispersion_correction=dispersion_correction)
    return System(Topology(atoms), fcc_lattice(n_cells, edge), Box.from_lengths(edge), params)


def lj_dimer(separation: float, cutoff: float = 1.0, sigma: float = ARGON_SIGMA,
             epsilon: float = ARGON_EPSILON, mass: float = ARGON_MASS) -> System:
    """Two LJ atoms on the x axis without periodic boundaries."""
    atoms = tuple(Atom(index=k, name="AR", element="Ar", mass=mass, residue_seq=k + 1, residue_name="AR")
                  for k in range(2))
    pos = np.array([[0.0, 0.0, 0.0], [separation, 0.0, 0.0]])
    params = ForceFieldParams(species=[0, 0], epsilon=[epsilon], sigma=[sigma], charges=[0.0, 0.0], cutoff=cutoff)
    return System(Topology(atoms), pos, None, params)


# toy backbone: per-element LJ (epsilon kJ/mol, sigma nm) and partial charges
TOY_LJ = {"N": (0.70, 0.30), "H": (0.05, 0.10), "C": (0.36, 0.34), "O": (0.60, 0.29)}
TOY_CHARGES = {"N": -0.30, "H": 0.30, "CA": 0.0, "C": 0.40, "O": -0.40}
TOY_BOND_K = 5.0e4
TOY_ANGLE_K = 1.0e4
_RESIDUE_TEMPLATE = (  # name, element, (x, y, z) in nm; y flips sign on odd residues
    ("N", "N", (0.00, 0.00, 0.00)),
    ("H", "H", (0.00, 0.10, 0.00)),
    ("CA", "C", (0.12, 0.00, 0.07)),
    ("C", "C", (0.24, 0.00, 0.00)),
    ("O", "O", (0.24, -0.12, 0.00)),
)
RESIDUE_RISE = 0.37  # nm between successive N atoms


def _chain_coordinates(n_residues: int) -> np.ndarray:
    out = []
    for r in range(n_residues):
        flip = 1.0 if r % 2 == 0 else -1.0
        for _, _, (x, y, z) in _RESIDUE_TEMPLATE:
            out.append((x + r * RESIDUE_RISE, y * flip, z))
    return np.array(out)


def angle_pairs(bonds, n_atoms: int) -> np.ndarray:
    """Sorted unique (i, k) pairs separated by exactly two bonds."""
    neighbours = [set() for _ in range(n_atoms)]
    for i, j in bonds:
        neighbours[i].add(j)
        neighbours[j].add(i)
    direct = {(min(i, j), max(i, j)) for i, j in bonds}
    pairs = set()
    for centre in range(n_atoms):
        nb = sorted(neighbours[centre])
        for a in range(len(nb)):
            for b in range(a + 1, len(nb)):
                key = (nb[a], nb[b])
                if key not in direct:
                    pairs.add(key)
    return np.array(sorted(pairs), dtype=int).reshape(-1, 2)


def forcefield_for(topology: Topology, positions, cutoff: float = 1.4, bond_k: float = TOY_BOND_K,
                   angle_k: float = TOY_ANGLE_K, lj: Optional[dict] = None,
                   dispersion_correction: bool = False,
                   coulomb_constant: float = COULOMB_CONSTANT) -> ForceFieldParams:
    """Force field for a topology: per-element LJ, topology charges, harmonic
    bonds at their topology lengths plus 1-3 springs at the given geometry.

    The 1-3 springs stand in for angle terms; their pairs are excluded from
    the nonbonded sum like the bonded pairs.
    """
    lj = lj or TOY_LJ
    elements = sorted({a.element for a in topology.atoms})
    species = np.array([elements.index(a.element) for a in topology.atoms])
    missing = [e for e in elements if e not in lj]
    if missing:
        raise ConfigError([f"[forcefield] no lj.<Element> entry for {', '.join(missing)}"])
    eps = [lj[e][0] for e in elements]
    sig = [lj[e][1] for e in elements]
    bonds = topology.bond_array()
    r0 = np.array([r for _, _, r in topology.bonds])
    k = np.full(len(bonds), bond_k)
    if angle_k > 0 and len(bonds):
        pos = np.asarray(positions, dtype=float)
        ang = angle_pairs(bonds, topology.n_atoms)
        ang_r0 = np.linalg.norm(pos[ang[:, 1]] - pos[ang[:, 0]], axis=1)
        bonds = np.vstack([bonds, ang])
        r0 = np.concatenate([r0, ang_r0])
        k = np.concatenate([k, np.full(len(ang), angle_k)])
    return ForceFieldParams(species=species, epsilon=eps, sigma=sig, charges=topology.charges,
                            bonds=bonds, bond_k=k, bond_r0=r0, cutoff=cutoff,
                            dispersion_correction=dispersion_correction, coulomb_constant=coulomb_constant)


def toy_chains(n_chains: int = 4, n_residues: int = 8, box_edge: float = 6.0, cutoff: float = 1.4) -> System:
    """Four (by default) short backbone chains packed as two two-stranded sheets.

    Each residue carries N, H, CA, C and O with small partial charges so
    the strands can form N-H...O hydrogen bonds. Strands within a sheet
    are 0.4 nm apart and offset along the chain so half the residues
    start hydrogen-bonded.
    """
    template = _chain_coordinates(n_residues)
    per_res = len(_RESIDUE_TEMPLATE)
    atoms, positions, bonds = [], [], []
    centre = 0.5 * box_edge
    length = template[:, 0].max()
    for c in range(n_chains):
        sheet, strand = divmod(c, 2)
        offset = np.array([centre - 0.5 * length - 0.24 * strand,
                           centre - 0.2 + 0.4 * strand,
                           centre - 0.4 + 0.8 * sheet])
        start = len(atoms)
        for r in range(n_residues):
            for k, (name, element, _) in enumerate(_RESIDUE_TEMPLATE):
                idx = len(atoms)
                atoms.append(Atom(index=idx, name=name, element=element,
                                  mass={"N": 14.007, "H": 1.008, "C": 12.011, "O": 15.999}[element],
                                  charge=TOY_CHARGES[name], residue_seq=r + 1, residue_name="GLY",
                                  chain_id=c))
                positions.append(template[r * per_res + k] + offset)
            base = start + r * per_res
            bonds += [(base, base + 1), (base, base + 2), (base + 2, base + 3), (base + 3, base + 4)]
            if r:
                bonds.append((base - per_res + 3, base))
    positions = np.array(positions)
    bonds_with_length = tuple((i, j, float(np.linalg.norm(positions[j] - positions[i]))) for i, j in bonds)
    topology = Topology(tuple(atoms), bonds_with_length)
    return System(topology, positions, Box.from_lengths(box_edge), forcefield_for(topology, positions, cutoff))
