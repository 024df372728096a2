from __future__ import annotations

import numpy as np

from ..core import Frame, Selection, Topology


def _rg(pos: np.ndarray, masses: np.ndarray) -> float:
    com = masses @ pos / masses.sum()
    return float(np.sqrt(masses @ np.sum((pos - com) ** 2, axis=1) / masses.sum()))


def radius_of_gyration(frame: Frame, sel: Selection, topology: Topology) -> float:
    """Mass-weighted RMS distance of the selected atoms from their centre of mass (nm)."""
    idx = sel.indices
    return _rg(frame.positions[idx], topology.masses[idx])


def radius_of_gyration_per_chain(frame: Frame, sel: Selection, topology: Topology) -> dict:
    """One Rg per chain present in the selection, keyed by chain id."""
    idx = sel.indices
    chains = topology.chain_ids[idx]
    masses = topology.masses
    out = {}
    for c in np.unique(chains):
        sub = idx[chains == c]
        out[int(c)] = _rg(frame.positions[sub], masses[sub])
    return out
