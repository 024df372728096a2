"""Geometric hydrogen-bond counting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Frame, Selection, Topology, find_pairs, minimum_image
from ..errors import UsageError

POLAR_ELEMENTS = ("N", "O")


@dataclass(frozen=True)
class HBondCriteria:
    """Distances in nm, angle in degrees.

    ``covalent_h_max`` assigns an unbonded hydrogen to the nearest N/O
    within that distance when the topology carries no bond for it.
    """

    donor_acceptor_max: float = 0.30
    dha_angle_min: float = 150.0
    covalent_h_max: float = 0.12

    def __post_init__(self):
        if not (self.donor_acceptor_max > 0 and self.covalent_h_max > 0):
            raise UsageError("hydrogen-bond distances must be positive")
        if not (0 < self.dha_angle_min <= 180):
            raise UsageError("hydrogen-bond angle must lie in (0, 180] degrees")


def _displace(a, b, box):
    d = b - a
    return d if box is None else minimum_image(d, box)


def donor_hydrogens(frame: Frame, sel: Selection, topology: Topology, criteria: HBondCriteria) -> np.ndarray:
    """``(k, 2)`` array of (donor, hydrogen) atom indices within the selection."""
    idx = sel.indices
    elements = topology.elements
    in_sel = np.zeros(topology.n_atoms, dtype=bool)
    in_sel[idx] = True
    hydrogens = [i for i in idx if elements[i] == "H"]
    if not hydrogens:
        raise UsageError("no hydrogens in the selection; hydrogen bonds need explicit H atoms")
    polar = np.array([i for i in idx if elements[i] in POLAR_ELEMENTS], dtype=int)
    bonded = {}
    for i, j, _ in topology.bonds:
        bonded.setdefault(i, []).append(j)
        bonded.setdefault(j, []).append(i)
    pairs = []
    pos = frame.positions
    for h in hydrogens:
        partners = bonded.get(h)
        if partners:
            donors = [p for p in partners if elements[p] in POLAR_ELEMENTS and in_sel[p]]
            if donors:
                pairs.append((donors[0], h))
            continue
        if polar.size == 0:
            continue
        dist = np.linalg.norm(_displace(pos[h], pos[polar], frame.box), axis=1)
        k = int(np.argmin(dist))
        if dist[k] <= criteria.covalent_h_max:
            pairs.append((int(polar[k]), h))
    return np.array(pairs, dtype=int).reshape(-1, 2)


def hbond_triples(frame: Frame, sel: Selection, topology: Topology,
                  criteria: HBondCriteria = HBondCriteria(), scope: str = "intra-chain") -> np.ndarray:
    """All (donor, hydrogen, acceptor) triples satisfying the criteria.

    The angle is measured at the hydrogen between the H->D and H->A
    directions, so 180 degrees is a linear bond. ``scope`` is
    ``"intra-chain"`` (donor and acceptor in the same chain) or ``"all"``.
    """
    if scope not in ("intra-chain", "all"):
        raise UsageError(f"unknown hydrogen-bond scope {scope!r}")
    dh = donor_hydrogens(frame, sel, topology, criteria)
    elements = topology.elements
    polar = np.array([i for i in sel.indices if elements[i] in POLAR_ELEMENTS], dtype=int)
    empty = np.zeros((0, 3), dtype=int)
    if dh.size == 0 or polar.size < 2:
        return empty
    pos = frame.positions
    dmax = criteria.donor_acceptor_max
    # find_pairs uses a strict cutoff; widen a hair and filter inclusively below
    pi, pj, _ = find_pairs(pos[polar], dmax * (1 + 1e-9), frame.box)
    neighbours = {}
    for a, b in zip(polar[pi], polar[pj]):
        neighbours.setdefault(int(a), []).append(int(b))
        neighbours.setdefault(int(b), []).append(int(a))
    chains = topology.chain_ids
    out = []
    for d, h in dh:
        acc = np.array(neighbours.get(int(d), []), dtype=int)
        if acc.size == 0:
            continue
        if scope == "intra-chain":
            acc = acc[chains[acc] == chains[d]]
        if acc.size == 0:
            continue
        da = _displace(pos[d], pos[acc], frame.box)
        ok = np.einsum("ij,ij->i", da, da) <= dmax * dmax
        hd = _displace(pos[h], pos[d], frame.box)
        ha = _displace(pos[h], pos[acc], frame.box)
        cosang = ha @ hd / (np.linalg.norm(ha, axis=1) * np.linalg.norm(hd))
        angle = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
        ok &= angle >= criteria.dha_angle_min
        for a in acc[ok]:
            out.append((int(d), int(h), int(a)))
    if not out:
        return empty
    return np.array(sorted(out), dtype=int)


def hbond_count(frame: Frame, sel: Selection, topology: Topology,
                criteria: HBondCriteria = HBondCriteria(), scope: str = "intra-chain") -> int:
    return int(len(hbond_triples(frame, sel, topology, criteria, scope)))


def hbond_count_per_chain(frame: Frame, sel: Selection, topology: Topology,
                          criteria: HBondCriteria = HBondCriteria()) -> dict:
    """Intra-chain counts keyed by chain id (chains with none get 0)."""
    triples = hbond_triples(frame, sel, topology, criteria, "intra-chain")
    chains = topology.chain_ids
    out = {int(c): 0 for c in np.unique(chains[sel.indices])}
    for d, _, _ in triples:
        out[int(chains[d])] += 1
    return out
