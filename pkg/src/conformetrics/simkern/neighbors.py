"""Buffered Verlet pair list built on a cell grid."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import Box, find_pairs, minimum_image
from ..errors import UsageError


@dataclass
class NeighborList:
    i: np.ndarray
    j: np.ndarray
    cutoff: float
    buffer: float
    reference: np.ndarray
    reference_box: Optional[np.ndarray]
    builds: int = 1

    def __len__(self):
        return self.i.size

    def needs_rebuild(self, positions: np.ndarray, box: Optional[Box]) -> bool:
        """True once atoms may have moved far enough to miss a pair.

        Positions are compared after rescaling the reference by any box
        change, and the contraction of pair distances from a shrinking box
        is charged against the buffer as well.
        """
        ref = self.reference
        shrink = 0.0
        if box is not None:
            lengths = box.lengths
            scale = lengths / self.reference_box
            ref = ref * scale
            shrink = max(0.0, 1.0 - float(scale.min())) * (self.cutoff + self.buffer)
            disp = minimum_image(positions - ref, lengths)
        else:
            disp = positions - ref
        max_disp = float(np.sqrt(np.max(np.einsum("ij,ij->i", disp, disp)))) if len(disp) else 0.0
        return 2.0 * max_disp + shrink > self.buffer


def build_neighbor_list(positions, box: Optional[Box], cutoff: float, buffer: float,
                        exclusions: Optional[np.ndarray] = None) -> NeighborList:
    """Every pair closer than ``cutoff + buffer`` (minimum image), minus exclusions.

    ``exclusions`` holds keys ``i * n + j`` for excluded pairs with i < j.
    """
    pos = np.asarray(positions, dtype=float)
    reach = cutoff + buffer
    if box is not None and np.any(box.lengths <= 2 * reach):
        raise UsageError(f"box {box.lengths} nm is too small for cutoff + buffer = {reach} nm "
                         f"(every edge must exceed {2 * reach} nm)")
    i, j, _ = find_pairs(pos, reach, box)
    if exclusions is not None and len(exclusions):
        keys = i.astype(np.int64) * pos.shape[0] + j
        keep = ~np.isin(keys, exclusions)
        i, j = i[keep], j[keep]
    return NeighborList(i=i, j=j, cutoff=cutoff, buffer=buffer, reference=pos.copy(),
                        reference_box=None if box is None else box.lengths)
