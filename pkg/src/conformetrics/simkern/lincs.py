"""LINCS bond-length constraints.

Directions come from the previous (constraint-satisfying) positions. The
inverse of the constraint coupling matrix ``(I - A)`` is approximated by
the truncated series ``I + A + ... + A^order``; each extra iteration then
corrects the lengthening caused by bond rotation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import Box, minimum_image
from ..errors import NumericalError, UsageError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Constraints:
    """Fixed-length pairs plus the precomputed coupling structure."""

    atoms: np.ndarray      # (k, 2)
    lengths: np.ndarray    # (k,)
    inv_mass: np.ndarray   # (n,)
    # coupling pairs (c1, c2) of constraints sharing an atom, and the
    # sign/mass factor -s1*s2/m_shared that multiplies S1*S2*(B1.B2)
    couple_a: np.ndarray
    couple_b: np.ndarray
    couple_coef: np.ndarray

    @classmethod
    def build(cls, atoms, lengths, masses) -> "Constraints":
        atoms = np.asarray(atoms, dtype=int).reshape(-1, 2)
        lengths = np.asarray(lengths, dtype=float)
        inv_mass = 1.0 / np.asarray(masses, dtype=float)
        if lengths.shape != (len(atoms),) or np.any(lengths <= 0):
            raise UsageError("one positive length per constraint is required")
        by_atom = {}
        for c, (a, b) in enumerate(atoms):
            by_atom.setdefault(int(a), []).append((c, 1.0))
            by_atom.setdefault(int(b), []).append((c, -1.0))
        ca, cb, coef = [], [], []
        for atom, members in by_atom.items():
            for c1, s1 in members:
                for c2, s2 in members:
                    if c1 != c2:
                        ca.append(c1)
                        cb.append(c2)
                        coef.append(-s1 * s2 * inv_mass[atom])
        return cls(atoms, lengths, inv_mass, np.array(ca, dtype=int), np.array(cb, dtype=int),
                   np.array(coef, dtype=float))

    def __len__(self):
        return len(self.lengths)


def _vectors(pos, atoms, box):
    d = pos[atoms[:, 0]] - pos[atoms[:, 1]]
    if box is not None:
        d = minimum_image(d, box.lengths)
    return d


def _solve(con: Constraints, coupling: np.ndarray, rhs: np.ndarray, order: int) -> np.ndarray:
    sol = rhs.copy()
    term = rhs
    k = len(con)
    for _ in range(order):
        term = np.bincount(con.couple_a, weights=coupling * term[con.couple_b], minlength=k)
        sol += term
    return sol


def _apply(pos, con: Constraints, direction, s, sol):
    a, b = con.atoms[:, 0], con.atoms[:, 1]
    step = (s * sol)[:, None] * direction
    n = pos.shape[0]
    for c in range(3):
        pos[:, c] -= con.inv_mass * np.bincount(a, weights=step[:, c], minlength=n)
        pos[:, c] += con.inv_mass * np.bincount(b, weights=step[:, c], minlength=n)


def lincs_project(positions, prev_positions, con: Constraints, order: int = 4, iterations: int = 1,
                  box: Optional[Box] = None, return_multipliers: bool = False):
    """Project ``positions`` back onto the constraint lengths.

    With ``return_multipliers`` also returns ``g`` per constraint such that
    the displacement applied to atom ``a`` of constraint ``c`` is
    ``-g_c B_c / m_a`` (and the opposite for ``b``). The constraint virial
    over a step ``dt`` is then ``-sum(d_c g_c) / dt**2``.

    Raises :class:`NumericalError` when the coupling is so strong that the
    series diverges (row-sum bound on the coupling matrix >= 1).
    """
    pos = np.array(positions, dtype=float)
    if len(con) == 0:
        return (pos, np.zeros(0)) if return_multipliers else pos
    old = _vectors(np.asarray(prev_positions, dtype=float), con.atoms, box)
    norm = np.linalg.norm(old, axis=1)
    if np.any(norm == 0):
        raise NumericalError("constrained atoms coincide in the reference positions")
    direction = old / norm[:, None]
    inv_m = con.inv_mass
    s = 1.0 / np.sqrt(inv_m[con.atoms[:, 0]] + inv_m[con.atoms[:, 1]])
    coupling = con.couple_coef * s[con.couple_a] * s[con.couple_b] * np.einsum(
        "ij,ij->i", direction[con.couple_a], direction[con.couple_b])
    if coupling.size:
        row_sum = np.bincount(con.couple_a, weights=np.abs(coupling), minlength=len(con))
        if row_sum.max() >= 1.0:
            raise NumericalError(f"LINCS expansion diverges (coupling row sum {row_sum.max():.3f} >= 1)")
    new = _vectors(pos, con.atoms, box)
    rhs = s * (np.einsum("ij,ij->i", direction, new) - con.lengths)
    sol = _solve(con, coupling, rhs, order)
    _apply(pos, con, direction, s, sol)
    total = s * sol
    for _ in range(iterations):
        cur = _vectors(pos, con.atoms, box)
        l2 = np.einsum("ij,ij->i", cur, cur)
        p2 = 2.0 * con.lengths ** 2 - l2
        if np.any(p2 < 0):
            log.warning("LINCS: bond rotated more than 90 degrees in one step; clamping")
        p = np.sqrt(np.maximum(p2, 0.0))
        rhs = s * (con.lengths - p)
        sol = _solve(con, coupling, rhs, order)
        _apply(pos, con, direction, s, sol)
        total += s * sol
    if not np.all(np.isfinite(pos)):
        raise NumericalError("LINCS produced non-finite positions")
    return (pos, total) if return_multipliers else pos


def constrain_velocities(new_positions, old_positions, dt: float) -> np.ndarray:
    return (np.asarray(new_positions) - np.asarray(old_positions)) / dt
