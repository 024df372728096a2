"""Topology and frame data model, unit conventions and periodic geometry.

Internal units are nm, ps, kJ/mol and amu throughout. Conversion to the
angstrom-based reporting units happens once, in the report writers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .errors import FormatError, NumericalError, UsageError

NM_TO_ANGSTROM = 10.0
NM2_TO_ANGSTROM2 = 100.0

BOLTZMANN = 0.0083144626  # kJ mol^-1 K^-1
COULOMB_CONSTANT = 138.935458  # kJ mol^-1 nm e^-2
BAR_PER_KJ_MOL_NM3 = 16.6054

ATOMIC_MASSES = {
    "H": 1.008, "He": 4.0026, "Li": 6.94, "C": 12.011, "N": 14.007,
    "O": 15.999, "F": 18.998, "Ne": 20.180, "Na": 22.990, "Mg": 24.305,
    "Si": 28.085, "P": 30.974, "S": 32.06, "Cl": 35.45, "Ar": 39.948,
    "K": 39.098, "Ca": 40.078, "Fe": 55.845, "Zn": 65.38, "Se": 78.971,
    "Br": 79.904, "I": 126.90,
}

# two-letter atom names that really are two-letter elements; everything
# else falls back to the first alphabetic character of the name
_TWO_LETTER_NAMES = {"CL": "Cl", "NA": "Na", "MG": "Mg", "ZN": "Zn",
                     "FE": "Fe", "CA2": "Ca", "BR": "Br", "SE": "Se"}


def element_from_name(name: str, overrides: Optional[dict] = None) -> str:
    """Guess an element symbol from an atom name.

    ``overrides`` maps exact atom names to element symbols and wins over
    the built-in rules. Otherwise a handful of ion names are recognised
    and the first alphabetic character is used.
    """
    key = name.strip()
    if overrides and key in overrides:
        return overrides[key]
    upper = key.upper()
    if upper in _TWO_LETTER_NAMES:
        return _TWO_LETTER_NAMES[upper]
    for ch in upper:
        if ch.isalpha():
            return ch
    raise FormatError(f"cannot infer element from atom name {name!r}")


def default_mass(element: str) -> float:
    try:
        return ATOMIC_MASSES[element]
    except KeyError:
        raise FormatError(f"no default mass for element {element!r}") from None


@dataclass(frozen=True)
class Atom:
    index: int
    name: str
    element: str
    mass: float
    charge: float = 0.0
    residue_seq: int = 1
    residue_name: str = "UNK"
    chain_id: int = 0

    def __post_init__(self):
        if not self.mass > 0:
            raise FormatError(f"atom {self.index} ({self.name}) has non-positive mass {self.mass}")


@dataclass(frozen=True)
class Topology:
    """Static per-atom catalogue plus bonds.

    ``bonds`` holds ``(i, j, length_nm)`` triples. The length is the
    equilibrium value used by the simulation kernel; analysis code only
    uses connectivity.
    """

    atoms: tuple
    bonds: tuple = ()
    chain_count: int = field(default=0)

    def __post_init__(self):
        atoms = tuple(self.atoms)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "bonds", tuple((int(i), int(j), float(r)) for i, j, r in self.bonds))
        n = len(atoms)
        for k, atom in enumerate(atoms):
            if atom.index != k:
                raise FormatError(f"atom at position {k} carries index {atom.index}")
        for i, j, r in self.bonds:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise FormatError(f"bond ({i}, {j}) out of range for {n} atoms")
        chains = sorted({a.chain_id for a in atoms})
        if chains and chains != list(range(len(chains))):
            raise FormatError(f"chain ids must be contiguous from 0, got {chains}")
        count = len(chains) if chains else 1
        if self.chain_count and self.chain_count != count:
            raise FormatError(f"chain_count {self.chain_count} does not match {count} chains present")
        object.__setattr__(self, "chain_count", count)

    def __len__(self):
        return len(self.atoms)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def masses(self) -> np.ndarray:
        return np.array([a.mass for a in self.atoms], dtype=float)

    @property
    def charges(self) -> np.ndarray:
        return np.array([a.charge for a in self.atoms], dtype=float)

    @property
    def elements(self) -> list:
        return [a.element for a in self.atoms]

    @property
    def chain_ids(self) -> np.ndarray:
        return np.array([a.chain_id for a in self.atoms], dtype=int)

    @property
    def residue_seqs(self) -> np.ndarray:
        return np.array([a.residue_seq for a in self.atoms], dtype=int)

    def bond_array(self) -> np.ndarray:
        if not self.bonds:
            return np.zeros((0, 2), dtype=int)
        return np.array([(i, j) for i, j, _ in self.bonds], dtype=int)


@dataclass(frozen=True)
class Box:
    """Periodic cell; rows of ``vectors`` are the box vectors in nm."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float).reshape(3, 3)
        if np.any(v - np.diag(np.diag(v))):
            raise FormatError("only rectangular boxes are supported (non-zero off-diagonal box entries)")
        if not np.all(np.diag(v) > 0):
            raise FormatError(f"box lengths must be positive, got {np.diag(v)}")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        lengths = np.diag(v).copy()
        lengths.setflags(write=False)
        object.__setattr__(self, "_lengths", lengths)
        object.__setattr__(self, "_volume", float(np.prod(lengths)))

    @classmethod
    def from_lengths(cls, lengths) -> "Box":
        lengths = np.broadcast_to(np.asarray(lengths, dtype=float), (3,))
        return cls(np.diag(lengths))

    @property
    def lengths(self) -> np.ndarray:
        return self._lengths

    @property
    def volume(self) -> float:
        return self._volume

    def scaled(self, factor) -> "Box":
        return Box.from_lengths(self.lengths * factor)

    def __eq__(self, other):
        return isinstance(other, Box) and np.array_equal(self.vectors, other.vectors)

    def __hash__(self):
        return hash(self.vectors.tobytes())


@dataclass(frozen=True, eq=False)
class Frame:
    time: float
    positions: np.ndarray
    box: Optional[Box] = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise FormatError(f"positions must have shape (n, 3), got {pos.shape}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "time", float(self.time))

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class Selection:
    indices: np.ndarray
    label: str = ""

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=int))
        if idx.size == 0:
            raise UsageError(f"selection {self.label!r} is empty")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return int(self.indices.size)

    def __eq__(self, other):
        return isinstance(other, Selection) and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash(self.indices.tobytes())


class Trajectory:
    """A topology with an ordered list of frames."""

    def __init__(self, topology: Topology, frames: Sequence[Frame]):
        frames = list(frames)
        for k, f in enumerate(frames):
            if f.n_atoms != topology.n_atoms:
                raise FormatError(f"frame {k} has {f.n_atoms} atoms, topology has {topology.n_atoms}")
        times = [f.time for f in frames]
        if any(b < a for a, b in zip(times, times[1:])):
            raise FormatError("frame times must be non-decreasing")
        self.topology = topology
        self.frames = frames

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, item):
        return self.frames[item]

    def __iter__(self):
        return iter(self.frames)

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.frames], dtype=float)

    @property
    def xyz(self) -> np.ndarray:
        return np.stack([f.positions for f in self.frames])


def _rect_lengths(box) -> np.ndarray:
    if isinstance(box, Box):
        return box.lengths
    arr = np.asarray(box, dtype=float)
    if arr.shape == (3, 3):
        if np.any(arr - np.diag(np.diag(arr))):
            raise UsageError("minimum image requires a rectangular box")
        return np.diag(arr).copy()
    return np.broadcast_to(arr, (3,)).astype(float)


def minimum_image(displacement, box) -> np.ndarray:
    """Wrap displacement vector(s) into the half-open interval (-L/2, L/2]."""
    d = np.asarray(displacement, dtype=float)
    lengths = _rect_lengths(box)
    wrapped = d - lengths * np.ceil(d / lengths - 0.5)
    return wrapped


def wrap_positions(positions, box) -> np.ndarray:
    lengths = _rect_lengths(box)
    return positions - lengths * np.floor(positions / lengths)


def center_of_mass(frame: Frame, sel: Selection, topology: Topology) -> np.ndarray:
    masses = topology.masses[sel.indices]
    pos = frame.positions[sel.indices]
    return masses @ pos / masses.sum()


def make_whole(positions: np.ndarray, topology: Topology, box: Optional[Box]) -> np.ndarray:
    """Reassemble molecules split across periodic boundaries.

    Walks the bond graph breadth-first and places each atom at the
    minimum image of its already placed neighbour. Atoms without bonds
    are left where they are.
    """
    if box is None or not topology.bonds:
        return np.array(positions, dtype=float)
    out = np.array(positions, dtype=float)
    n = topology.n_atoms
    neighbours = [[] for _ in range(n)]
    for i, j, _ in topology.bonds:
        neighbours[i].append(j)
        neighbours[j].append(i)
    seen = np.zeros(n, dtype=bool)
    lengths = box.lengths
    for root in range(n):
        if seen[root]:
            continue
        seen[root] = True
        queue = [root]
        while queue:
            a = queue.pop()
            for b in neighbours[a]:
                if not seen[b]:
                    out[b] = out[a] + minimum_image(out[b] - out[a], lengths)
                    seen[b] = True
                    queue.append(b)
    return out


@numba.njit(cache=True)
def _neighbour_cells(c, ncell, periodic, out):
    cx = c // (ncell[1] * ncell[2])
    cy = (c // ncell[2]) % ncell[1]
    cz = c % ncell[2]
    count = 0
    for dx in range(-1, 2):
        for dy in range(-1, 2):
            for dz in range(-1, 2):
                tx, ty, tz = cx + dx, cy + dy, cz + dz
                if periodic:
                    tx %= ncell[0]
                    ty %= ncell[1]
                    tz %= ncell[2]
                elif tx < 0 or ty < 0 or tz < 0 or tx >= ncell[0] or ty >= ncell[1] or tz >= ncell[2]:
                    continue
                d = (tx * ncell[1] + ty) * ncell[2] + tz
                if d < c:
                    continue
                seen = False
                for k in range(count):
                    if out[k] == d:
                        seen = True
                        break
                if not seen:
                    out[count] = d
                    count += 1
    return count


@numba.njit(cache=True)
def _cell_candidates(coords, ncell, periodic):
    """Candidate pairs (i < j) from each cell and its (deduplicated) neighbour cells."""
    n = coords.shape[0]
    total = ncell[0] * ncell[1] * ncell[2]
    head = np.full(total, -1, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    for a in range(n - 1, -1, -1):
        c = (coords[a, 0] * ncell[1] + coords[a, 1]) * ncell[2] + coords[a, 2]
        nxt[a] = head[c]
        head[c] = a
    neigh = np.empty(27, dtype=np.int64)
    counted = 0
    for sweep in range(2):
        if sweep == 1:
            out_i = np.empty(counted, dtype=np.int64)
            out_j = np.empty(counted, dtype=np.int64)
        k = 0
        for c in range(total):
            if head[c] < 0:
                continue
            m = _neighbour_cells(c, ncell, periodic, neigh)
            for q in range(m):
                d = neigh[q]
                a = head[c]
                while a >= 0:
                    b = head[d] if d != c else nxt[a]
                    while b >= 0:
                        if sweep == 1:
                            out_i[k] = min(a, b)
                            out_j[k] = max(a, b)
                        k += 1
                        b = nxt[b]
                    a = nxt[a]
        counted = k
    return out_i, out_j


def find_pairs(positions: np.ndarray, cutoff: float, box: Optional[Box] = None):
    """All pairs ``i < j`` closer than ``cutoff`` using a cell grid.

    With a box, distances follow the minimum-image convention and the box
    must be larger than twice the cutoff. Returns ``(i, j, d)`` where ``d``
    holds the (minimum-image) displacement vectors ``r_j - r_i``.
    """
    pos = np.asarray(positions, dtype=float)
    n = pos.shape[0]
    empty = (np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros((0, 3)))
    if n < 2:
        return empty
    if cutoff <= 0:
        raise UsageError("cutoff must be positive")
    if box is not None:
        lengths = box.lengths
        if np.any(lengths <= 2 * cutoff):
            raise UsageError(f"box {lengths} too small for cutoff {cutoff} (need every edge > {2 * cutoff})")
        scaled = wrap_positions(pos, lengths)
        ncell = np.maximum((lengths // cutoff).astype(int), 1)
        cell_size = lengths / ncell
        periodic = True
    else:
        lo = pos.min(axis=0)
        span = pos.max(axis=0) - lo
        ncell = np.maximum((span // cutoff).astype(int), 1)
        cell_size = np.where(span > 0, span / ncell, 1.0)
        scaled = pos - lo
        periodic = False
    # sparse clouds: coarsen the grid so empty cells do not dominate
    limit = max(8 * n, 1000)
    if np.prod(ncell) > limit:
        factor = (np.prod(ncell.astype(float)) / limit) ** (1.0 / 3.0)
        ncell = np.maximum((ncell / factor).astype(int), 1)
        cell_size = np.where(cell_size > 0, (lengths if periodic else span) / ncell, 1.0)
        if not periodic:
            cell_size = np.where(span > 0, cell_size, 1.0)
    coords = np.minimum((scaled / cell_size).astype(np.int64), ncell - 1)
    i, j = _cell_candidates(coords, ncell.astype(np.int64), periodic)
    if i.size == 0:
        return empty
    d = pos[j] - pos[i]
    if periodic:
        d = minimum_image(d, lengths)
    keep = np.einsum("ij,ij->i", d, d) < cutoff * cutoff
    i, j, d = i[keep], j[keep], d[keep]
    sort = np.lexsort((j, i))
    return i[sort], j[sort], d[sort]


def check_finite(name: str, arr) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values in {name}")
