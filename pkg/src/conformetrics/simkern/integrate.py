"""Leap-frog integration and the per-step MD driver.

Velocities live at half steps. A step from t to t + dt does, in order:
kick with F(t), thermostat, COM-motion removal, drift, constraints,
pressure coupling, wrap, and force evaluation at t + dt. Scalars are
logged for time t, with the kinetic energy taken as the mean of the two
half-step values around t.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from ..core import BOLTZMANN, Box, wrap_positions
from ..errors import NumericalError
from .barostat import berendsen_scale, parrinello_rahman_step
from .forces import compute_forces, pressure_bar, tail_corrections
from .lincs import Constraints, lincs_project
from .neighbors import build_neighbor_list
from .params import ForceFieldParams, SimConfig, SimState
from .thermostat import CouplingGroup, coupling_groups, maxwell_boltzmann, vrescale_step

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "time_ps", "E_pot", "E_kin", "T_K", "P_bar", "box_nm")


def kinetic_energy(velocities, masses) -> float:
    return 0.5 * float(np.sum(masses[:, None] * velocities * velocities))


def remove_com_motion(velocities, masses) -> np.ndarray:
    p = masses @ velocities
    return velocities - p / masses.sum()


def leapfrog_step(positions, velocities, forces, masses, dt: float, box: Optional[Box] = None):
    """Plain leap-frog update ``v += dt F/m``, ``x += dt v``; positions wrapped into ``box``."""
    v = np.asarray(velocities) + dt * np.asarray(forces) / np.asarray(masses)[:, None]
    x = np.asarray(positions) + dt * v
    if box is not None:
        x = wrap_positions(x, box)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise NumericalError("non-finite positions or velocities after leap-frog step")
    return x, v


@dataclass
class LogRow:
    step: int
    time: float
    potential: float
    kinetic: float
    temperature: float
    pressure: float
    box: float

    @property
    def total(self) -> float:
        return self.potential + self.kinetic

    def as_tuple(self):
        return (self.step, self.time, self.potential, self.kinetic, self.temperature, self.pressure, self.box)


class MDEngine:
    """Owns the state, neighbour list and coupling machinery for one run.

    ``groups`` is a list of ``(label, indices)`` thermostat groups
    (default: one group with every atom). ``constraints`` are enforced with
    LINCS when ``config.constraint.kind == "lincs"``. ``workers`` sets the
    number of pair-list partitions in the force kernel; results are
    bit-reproducible for a fixed worker count.
    """

    def __init__(self, state: SimState, masses, params: ForceFieldParams, config: SimConfig,
                 groups=None, constraints: Optional[Constraints] = None, workers: int = 1):
        self.state = state
        self.masses = np.asarray(masses, dtype=float)
        self.params = params
        self.config = config
        self.constraints = constraints if config.constraint.kind == "lincs" else None
        n = self.masses.size
        if groups is None:
            groups = [("all", np.arange(n))]
        self.groups: List[CouplingGroup] = coupling_groups([g[1] for g in groups], [g[0] for g in groups],
                                                           n, self.constraints, config.remove_com)
        self.ndf = float(sum(g.ndf for g in self.groups))
        self.stochastic_thermostat = True
        self.workers = workers
        self.nlist = None
        self.step_count = 0
        self.start_time = state.time
        self.local_steps = 0
        self.constraint_virial = 0.0
        self._refresh_forces()

    # -- forces -----------------------------------------------------------
    def _refresh_forces(self):
        st = self.state
        if st.box is not None:
            if self.nlist is None or self.nlist.needs_rebuild(st.positions, st.box):
                self.nlist = build_neighbor_list(st.positions, st.box, self.params.cutoff,
                                                 self.config.neighbor.buffer, self.params.exclusion_keys())
        st.forces, st.potential_energy, st.virial = compute_forces(st.positions, st.box, self.params, self.nlist,
                                                                      self.workers)

    def _tail(self):
        if not self.params.dispersion_correction or self.state.box is None:
            return 0.0, 0.0
        return tail_corrections(self.params, self.state.box.volume)

    def temperature(self, ke: float) -> float:
        return 2.0 * ke / (self.ndf * BOLTZMANN)

    def half_step_kinetic_energy(self) -> float:
        return kinetic_energy(self.state.velocities, self.masses)

    # -- stepping ---------------------------------------------------------
    def step(self) -> LogRow:
        cfg = self.config
        st = self.state
        dt = cfg.dt
        m = self.masses
        ke_prev = kinetic_energy(st.velocities, m)
        v = st.velocities + dt * st.forces / m[:, None]
        th = cfg.thermostat
        if th.kind == "v-rescale":
            v = vrescale_step(v, m, self.groups, th.temperature, th.tau, dt, st.rng, self.stochastic_thermostat)
        if cfg.remove_com:
            v = remove_com_motion(v, m)
        x = st.positions + dt * v
        w_con = 0.0
        if self.constraints is not None:
            x, g = lincs_project(x, st.positions, self.constraints, cfg.constraint.order,
                                 cfg.constraint.iterations, st.box, return_multipliers=True)
            v = (x - st.positions) / dt
            w_con = -float(np.dot(self.constraints.lengths, g)) / (dt * dt)
        ke_next = kinetic_energy(v, m)
        ke = 0.5 * (ke_prev + ke_next)
        e_tail, p_tail = self._tail()
        if st.box is not None:
            pressure = pressure_bar(ke, st.virial + w_con, st.box.volume) + p_tail
            box_edge = st.box.volume ** (1.0 / 3.0)
        else:
            pressure = box_edge = float("nan")
        row = LogRow(self.step_count, st.time, st.potential_energy + e_tail, ke, self.temperature(ke),
                     pressure, box_edge)

        ba = cfg.barostat
        if ba.kind != "none" and st.box is not None:
            old_lengths = st.box.lengths
            if ba.kind == "berendsen":
                x, st.box, _ = berendsen_scale(x, st.box, pressure, ba.pressure, ba.tau, ba.compressibility, dt)
            else:
                x, st.box, st.box_velocity, friction = parrinello_rahman_step(
                    x, st.box, st.box_velocity, pressure, ba.pressure, ba.tau, ba.compressibility, dt)
                if friction:
                    v = v * (1.0 - dt * friction)
            scale = st.box.lengths / old_lengths
            if np.any(scale != 1.0) and self.params.restraint_indices.size:
                self.params = replace(self.params, restraint_reference=self.params.restraint_reference * scale)
        if st.box is not None:
            x = wrap_positions(x, st.box)
        st.positions = x
        st.velocities = v
        self.step_count += 1
        self.local_steps += 1
        st.time = self.start_time + self.local_steps * dt
        self.constraint_virial = w_con
        self._refresh_forces()
        st.check()
        return row

    def run(self, n_steps: int, frame_stride: int = 0, log_stride: Optional[int] = None,
            on_frame=None) -> List[LogRow]:
        """Advance ``n_steps`` and return the logged rows.

        With a positive ``frame_stride``, ``on_frame(state)`` sees the
        starting state and every state whose step index is a multiple of
        the stride.
        """
        log_stride = log_stride or self.config.log_stride
        rows = []
        if frame_stride and on_frame is not None:
            on_frame(self.state)
        for k in range(1, n_steps + 1):
            row = self.step()
            if row.step % log_stride == 0:
                rows.append(row)
            if frame_stride and on_frame is not None and k % frame_stride == 0:
                on_frame(self.state)
        return rows


def initial_velocities(masses, temperature: float, rng: np.random.Generator, remove_com: bool = True):
    v = maxwell_boltzmann(masses, temperature, rng)
    if remove_com and len(masses) > 1:
        v = remove_com_motion(v, np.asarray(masses, dtype=float))
    return v


def total_energy_drift(rows: List[LogRow]) -> float:
    """Largest ``|E(t) - E(0)| / |E(0)|`` over the logged rows."""
    e = np.array([r.total for r in rows])
    if e[0] == 0 or not math.isfinite(e[0]):
        raise NumericalError("initial total energy is zero or non-finite; relative drift undefined")
    return float(np.max(np.abs(e - e[0])) / abs(e[0]))
