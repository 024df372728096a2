"""Stochastic velocity rescaling (canonical sampling through velocity rescaling)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..core import BOLTZMANN
from ..errors import UsageError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CouplingGroup:
    """Atoms coupled to one heat bath, with their degrees of freedom."""

    indices: np.ndarray
    ndf: float
    label: str = ""

    def __post_init__(self):
        if not self.ndf >= 1:
            raise UsageError(f"coupling group {self.label!r} has {self.ndf:g} degrees of freedom (need >= 1)")


def coupling_groups(index_sets, labels, n_atoms: int, constraints=None, com_removed: bool = True):
    """Build coupling groups, subtracting constraints and the removed COM motion.

    A constraint between two groups costs each of them half a degree of
    freedom. The three COM degrees of freedom are shared in proportion to
    group size.
    """
    owner = np.full(n_atoms, -1)
    for g, idx in enumerate(index_sets):
        if np.any(owner[idx] >= 0):
            raise UsageError("thermostat coupling groups overlap")
        owner[idx] = g
    if np.any(owner < 0):
        raise UsageError(f"{int(np.sum(owner < 0))} atoms are not in any thermostat coupling group")
    ndf = np.array([3.0 * len(idx) for idx in index_sets])
    if constraints is not None and len(constraints):
        for a, b in constraints.atoms:
            ndf[owner[a]] -= 0.5
            ndf[owner[b]] -= 0.5
    if com_removed:
        ndf -= 3.0 * np.array([len(idx) for idx in index_sets]) / n_atoms
    return [CouplingGroup(np.asarray(idx, dtype=int), float(d), lab)
            for idx, d, lab in zip(index_sets, ndf, labels)]


def _sum_noises(nn: float, rng: np.random.Generator) -> float:
    """Sum of ``nn`` squared standard normals (chi-squared draw)."""
    if nn <= 0:
        return 0.0
    return 2.0 * rng.standard_gamma(0.5 * nn)


def vrescale_factor(ke: float, ndf: float, temperature: float, tau: float, dt: float,
                    rng: np.random.Generator, stochastic: bool = True) -> float:
    """Velocity scale factor lambda for one group.

    The kinetic energy is propagated over ``dt`` by the stochastic
    differential equation whose stationary distribution is canonical. With
    ``stochastic=False`` only the deterministic relaxation toward
    ``ndf*kT/2`` with time constant ``tau`` is kept. ``tau = inf`` returns 1.
    """
    if math.isinf(tau):
        return 1.0
    target = 0.5 * ndf * BOLTZMANN * temperature
    c = math.exp(-dt / tau)
    if stochastic:
        r1 = rng.standard_normal()
        new = (ke + (1.0 - c) * (target * (r1 * r1 + _sum_noises(ndf - 1.0, rng)) / ndf - ke)
               + 2.0 * r1 * math.sqrt(c * (1.0 - c) * ke * target / ndf))
    else:
        new = ke + (1.0 - c) * (target - ke)
    return math.sqrt(max(new, 0.0) / ke)


def vrescale_step(velocities, masses, groups, temperature: float, tau: float, dt: float,
                  rng: np.random.Generator, stochastic: bool = True) -> np.ndarray:
    """Apply one thermostat step per coupling group; returns new velocities.

    A group with zero kinetic energy cannot be rescaled; it is resampled
    from the Maxwell-Boltzmann distribution at ``temperature`` and the
    event is logged.
    """
    v = np.array(velocities, dtype=float)
    if math.isinf(tau):
        return v
    for g in groups:
        vg = v[g.indices]
        mg = masses[g.indices]
        ke = 0.5 * float(np.sum(mg[:, None] * vg * vg))
        if ke <= 0.0:
            log.warning("coupling group %r has zero kinetic energy; resampling from Maxwell-Boltzmann",
                        g.label)
            v[g.indices] = maxwell_boltzmann(mg, temperature, rng)
            continue
        v[g.indices] = vg * vrescale_factor(ke, g.ndf, temperature, tau, dt, rng, stochastic)
    return v


def maxwell_boltzmann(masses, temperature: float, rng: np.random.Generator) -> np.ndarray:
    masses = np.asarray(masses, dtype=float)
    sd = np.sqrt(BOLTZMANN * temperature / masses)
    return rng.standard_normal((masses.size, 3)) * sd[:, None]
