"""Steepest-descent energy minimisation with an adaptive step."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import Box, wrap_positions
from ..errors import NumericalError
from .forces import compute_forces
from .neighbors import build_neighbor_list
from .params import ForceFieldParams, MinimizerConfig, NeighborConfig

log = logging.getLogger(__name__)

# a step this small (nm) no longer moves anything representable
MIN_STEP = 1e-12


@dataclass
class MinimizeResult:
    positions: np.ndarray
    energies: np.ndarray  # accepted-step energy trace, starting with the initial energy
    fmax: float
    steps: int
    converged: bool
    stalled: bool

    @property
    def energy(self) -> float:
        return float(self.energies[-1])


class _Evaluator:
    """Force evaluation with a Verlet list that is refreshed as atoms move."""

    def __init__(self, params, box, neighbor: Optional[NeighborConfig]):
        self.params = params
        self.box = box
        self.neighbor = neighbor or NeighborConfig()
        self.nlist = None

    def __call__(self, pos):
        if self.box is not None:
            if self.nlist is None or self.nlist.needs_rebuild(pos, self.box):
                self.nlist = build_neighbor_list(pos, self.box, self.params.cutoff, self.neighbor.buffer,
                                                 self.params.exclusion_keys())
        return compute_forces(pos, self.box, self.params, self.nlist)


def max_force(forces) -> float:
    return float(np.sqrt(np.max(np.einsum("ij,ij->i", forces, forces)))) if len(forces) else 0.0


def steepest_descent(positions, box: Optional[Box], params: ForceFieldParams,
                     config: MinimizerConfig = MinimizerConfig(),
                     neighbor: Optional[NeighborConfig] = None) -> MinimizeResult:
    """Minimise the potential energy by steepest descent.

    Each trial moves every atom along its force, scaled so the largest
    displacement is ``h``. Lower energy accepts the move and grows ``h`` by
    1.2; otherwise the move is rejected and ``h`` shrinks by 0.2. Stops
    once the largest atomic force is below ``config.fmax_tol``, after
    ``config.max_steps`` trials, or when ``h`` underflows; the latter counts
    as converged with ``stalled`` set.
    """
    evaluate = _Evaluator(params, box, neighbor)
    x = np.array(positions, dtype=float)
    forces, energy, _ = evaluate(x)
    if not math.isfinite(energy):
        raise NumericalError("initial energy is not finite")
    energies = [energy]
    h = config.initial_step
    fmax = max_force(forces)
    steps = 0
    converged = stalled = False
    while True:
        if fmax < config.fmax_tol:
            converged = True
            break
        if steps >= config.max_steps:
            break
        if h < MIN_STEP:
            converged = stalled = True
            log.warning("steepest descent stalled: step %.3g nm, Fmax %.4g", h, fmax)
            break
        steps += 1
        trial = x + (h / fmax) * forces
        try:
            f_trial, e_trial, _ = evaluate(trial)
        except NumericalError:
            h *= 0.2
            continue
        if e_trial < energy:
            x, forces, energy = trial, f_trial, e_trial
            fmax = max_force(forces)
            energies.append(energy)
            h *= 1.2
        else:
            h *= 0.2
    if box is not None:
        x = wrap_positions(x, box)
    return MinimizeResult(x, np.array(energies), fmax, steps, converged, stalled)
