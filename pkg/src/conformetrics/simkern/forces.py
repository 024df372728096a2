"""Shifted-cutoff LJ + Coulomb, harmonic bonds and position restraints."""

from __future__ import annotations

import math
from typing import Optional

import numba
import numpy as np

from ..core import BAR_PER_KJ_MOL_NM3, Box, minimum_image
from ..errors import NumericalError
from .neighbors import NeighborList
from .params import ForceFieldParams

# pairs closer than this are treated as overlapping atoms
OVERLAP_DISTANCE = 1e-6


def _accumulate(n: int, idx: np.ndarray, vec: np.ndarray) -> np.ndarray:
    out = np.empty((n, 3))
    for c in range(3):
        out[:, c] = np.bincount(idx, weights=vec[:, c], minlength=n)
    return out


def _displacements(pos, i, j, box):
    d = pos[j] - pos[i]
    if box is not None:
        d = minimum_image(d, box.lengths)
    return d


# numpy error model: a zero distance gives inf instead of raising, and the
# overlap check below turns it into a NumericalError
@numba.njit(cache=True, error_model="numpy")
def _pair_kernel(pos, i, j, lengths, periodic, species, c6, c12, shift, charges, kc, rc, n_parts):
    n = pos.shape[0]
    m = i.shape[0]
    forces = np.zeros((n_parts, n, 3))
    energy = np.zeros(n_parts)
    virial = np.zeros(n_parts)
    closest = np.full(n_parts, np.inf)
    closest_at = np.zeros(n_parts, dtype=np.int64)
    rc2 = rc * rc
    inv_rc = 1.0 / rc
    chunk = (m + n_parts - 1) // n_parts
    for p in range(n_parts):
        for k in range(p * chunk, min(m, (p + 1) * chunk)):
            a = i[k]
            b = j[k]
            d0 = pos[b, 0] - pos[a, 0]
            d1 = pos[b, 1] - pos[a, 1]
            d2 = pos[b, 2] - pos[a, 2]
            if periodic:
                d0 -= lengths[0] * np.ceil(d0 / lengths[0] - 0.5)
                d1 -= lengths[1] * np.ceil(d1 / lengths[1] - 0.5)
                d2 -= lengths[2] * np.ceil(d2 / lengths[2] - 0.5)
            r2 = d0 * d0 + d1 * d1 + d2 * d2
            if r2 >= rc2:
                continue
            if r2 < closest[p]:
                closest[p] = r2
                closest_at[p] = k
            sa = species[a]
            sb = species[b]
            inv2 = 1.0 / r2
            inv6 = inv2 * inv2 * inv2
            rep = c12[sa, sb] * inv6 * inv6
            disp = c6[sa, sb] * inv6
            e = rep - disp - shift[sa, sb]
            f_over_r = (12.0 * rep - 6.0 * disp) * inv2
            qq = charges[a] * charges[b]
            if qq != 0.0:
                r = np.sqrt(r2)
                e += kc * qq * (1.0 / r - inv_rc)
                f_over_r += kc * qq / (r * r2)
            energy[p] += e
            virial[p] += f_over_r * r2
            forces[p, a, 0] -= f_over_r * d0
            forces[p, a, 1] -= f_over_r * d1
            forces[p, a, 2] -= f_over_r * d2
            forces[p, b, 0] += f_over_r * d0
            forces[p, b, 1] += f_over_r * d1
            forces[p, b, 2] += f_over_r * d2
    return forces, energy, virial, closest, closest_at


def nonbonded(positions, box: Optional[Box], params: ForceFieldParams, i, j, workers: int = 1):
    """Energy, forces and virial of the shifted LJ and Coulomb pair terms over candidate pairs.

    Pairs are split into ``workers`` contiguous partitions, each with its
    own force buffer; the buffers are summed in partition order so a given
    worker count always produces the same bits.
    """
    pos = np.ascontiguousarray(positions, dtype=float)
    n = pos.shape[0]
    if len(i) == 0:
        return 0.0, np.zeros((n, 3)), 0.0
    periodic = box is not None
    lengths = box.lengths if periodic else np.ones(3)
    parts = max(1, min(int(workers), len(i)))
    f, e, w, closest, at = _pair_kernel(pos, np.asarray(i, dtype=np.int64), np.asarray(j, dtype=np.int64),
                                        lengths, periodic, params.species, params.c6, params.c12,
                                        params.lj_shift, params.charges, params.coulomb_constant,
                                        params.cutoff, parts)
    p = int(np.argmin(closest))
    if closest[p] < OVERLAP_DISTANCE ** 2:
        k = at[p]
        raise NumericalError(f"atoms {i[k]} and {j[k]} overlap (r = {math.sqrt(closest[p]):.3g} nm)")
    forces = f[0]
    energy, virial = float(e[0]), float(w[0])
    for q in range(1, parts):
        forces = forces + f[q]
        energy += float(e[q])
        virial += float(w[q])
    return energy, forces, virial


def bonded(positions, box: Optional[Box], params: ForceFieldParams):
    n = positions.shape[0]
    active = params.bond_k != 0
    if not np.any(active):
        return 0.0, np.zeros((n, 3)), 0.0
    b = params.bonds[active]
    k = params.bond_k[active]
    r0 = params.bond_r0[active]
    d = _displacements(positions, b[:, 0], b[:, 1], box)
    r = np.sqrt(np.einsum("ij,ij->i", d, d))
    if r.min() < OVERLAP_DISTANCE:
        raise NumericalError("bonded atoms overlap")
    stretch = r - r0
    energy = float(0.5 * np.sum(k * stretch * stretch))
    du = k * stretch
    fij = (du / r)[:, None] * d
    forces = _accumulate(n, b[:, 0], fij) - _accumulate(n, b[:, 1], fij)
    virial = float(-np.sum(du * r))
    return energy, forces, virial


def restraints(positions, box: Optional[Box], params: ForceFieldParams):
    """Harmonic tethers ``k/2 |r - r_ref|^2``; they add nothing to the virial."""
    n = positions.shape[0]
    forces = np.zeros((n, 3))
    if params.restraint_k == 0 or params.restraint_indices.size == 0:
        return 0.0, forces
    idx = params.restraint_indices
    d = positions[idx] - params.restraint_reference
    if box is not None:
        d = minimum_image(d, box.lengths)
    energy = float(0.5 * params.restraint_k * np.sum(d * d))
    np.add.at(forces, idx, -params.restraint_k * d)
    return energy, forces


def _mean_dispersion(params: ForceFieldParams):
    counts = np.bincount(params.species, minlength=params.epsilon.size).astype(float)
    n = counts.sum()
    w = np.outer(counts, counts) / (n * n)
    return float(np.sum(w * params.c6)), float(np.sum(w * params.c12))


def tail_corrections(params: ForceFieldParams, volume: float):
    """Homogeneous-fluid LJ tail corrections (energy kJ/mol, pressure bar) beyond the cutoff."""
    c6, c12 = _mean_dispersion(params)
    n = params.n_atoms
    rho = n / volume
    rc = params.cutoff
    energy = 2.0 * math.pi * n * rho * (c12 / (9.0 * rc ** 9) - c6 / (3.0 * rc ** 3))
    pressure = (2.0 * math.pi / 3.0) * rho * rho * (4.0 * c12 / (3.0 * rc ** 9) - 2.0 * c6 / rc ** 3)
    return energy, pressure * BAR_PER_KJ_MOL_NM3


def compute_forces(positions, box: Optional[Box], params: ForceFieldParams,
                   nlist: Optional[NeighborList] = None, workers: int = 1):
    """Total forces, potential energy and scalar virial ``sum r_ij . F_ij``.

    Without a neighbour list every pair is considered. The dispersion
    tail is *not* added here; see :func:`tail_corrections`.
    """
    pos = np.asarray(positions, dtype=float)
    if nlist is None:
        n = pos.shape[0]
        i, j = np.triu_indices(n, 1)
        excl = params.exclusion_keys()
        if excl.size:
            keep = ~np.isin(i.astype(np.int64) * n + j, excl)
            i, j = i[keep], j[keep]
    else:
        i, j = nlist.i, nlist.j
    e_nb, f, w_nb = nonbonded(pos, box, params, i, j, workers)
    e_b, f_b, w_b = bonded(pos, box, params)
    e_r, f_r = restraints(pos, box, params)
    forces = f + f_b + f_r
    if not np.all(np.isfinite(forces)):
        raise NumericalError("non-finite forces")
    return forces, e_nb + e_b + e_r, w_nb + w_b


def pressure_bar(kinetic_energy: float, virial: float, volume: float) -> float:
    return BAR_PER_KJ_MOL_NM3 * (2.0 * kinetic_energy + virial) / (3.0 * volume)
