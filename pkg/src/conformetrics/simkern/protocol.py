"""Staged simulation protocols: minimise, NVT, NPT and production.

Simulation time runs continuously across the dynamics stages; the
minimiser does not advance it. Every dynamics stage logs one row per
``log_stride`` steps. Frames are written at each stage's stride, and a
stage does not repeat a frame already written at its start time.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from ..core import Box, Frame, Topology
from ..errors import ConfigError, ConformetricsError, UsageError
from ..selection import select
from ..trajio.cfrm import write_cfrm
from .integrate import LOG_COLUMNS, LogRow, MDEngine, initial_velocities
from .lincs import Constraints
from .minimize import MinimizeResult, steepest_descent
from .params import BarostatConfig, ForceFieldParams, SimConfig, SimState, ThermostatConfig

log = logging.getLogger(__name__)

STAGE_KINDS = ("minimize", "nvt", "npt", "production")
DEFAULT_STRIDE = {"minimize": 1, "nvt": 0, "npt": 0, "production": 500}


@dataclass(frozen=True)
class Stage:
    """One protocol stage.

    ``stride`` is the frame interval in steps (0 writes no frames; for
    ``minimize`` any positive value writes the initial and final
    structures). ``restrain`` is a selection tethered to its stage-start
    coordinates with force constant ``restraint_k``, which must then be
    given explicitly. ``thermostat``/``barostat`` name a coupling kind
    that overrides the run-level kind; the coupling constants always come
    from the run configuration.
    """

    kind: str
    duration_ps: float = 0.0
    stride: Optional[int] = None
    restrain: Optional[str] = None
    restraint_k: Optional[float] = None
    thermostat: Optional[str] = None
    barostat: Optional[str] = None
    generate_velocities: Optional[bool] = None

    def __post_init__(self):
        if self.kind not in STAGE_KINDS:
            raise UsageError(f"unknown stage kind {self.kind!r}; choose from {STAGE_KINDS}")
        if self.duration_ps < 0:
            raise UsageError("stage duration must be >= 0")
        if self.stride is not None and self.stride < 0:
            raise UsageError("stage stride must be >= 0")
        if self.restrain is not None and self.restraint_k is None:
            raise UsageError("restrained stage needs an explicit restraint_k")
        if self.restraint_k is not None and self.restraint_k < 0:
            raise UsageError("restraint_k must be >= 0")

    @property
    def frame_stride(self) -> int:
        return DEFAULT_STRIDE[self.kind] if self.stride is None else self.stride

    def n_steps(self, dt: float) -> int:
        steps = self.duration_ps / dt
        n = int(round(steps))
        if abs(n - steps) > 1e-6 * max(1.0, steps):
            raise UsageError(f"{self.kind} duration {self.duration_ps} ps is not a whole number of "
                             f"{dt} ps steps")
        return n

    def couplings(self, config: SimConfig):
        th = config.thermostat
        ba = config.barostat
        if self.kind == "minimize":
            return ThermostatConfig(kind="none"), BarostatConfig(kind="none")
        th_kind = self.thermostat or th.kind
        if self.kind == "nvt":
            ba_kind = self.barostat or "none"
        elif self.kind == "npt":
            ba_kind = self.barostat or (ba.kind if ba.kind != "none" else "berendsen")
        else:
            ba_kind = self.barostat or ba.kind
        return replace(th, kind=th_kind), replace(ba, kind=ba_kind)


@dataclass
class ProtocolResult:
    frames: List[Frame] = field(default_factory=list)
    rows: List[LogRow] = field(default_factory=list)
    minimizations: List[MinimizeResult] = field(default_factory=list)
    state: Optional[SimState] = None

    def cfrm_bytes(self) -> bytes:
        if not self.frames:
            raise UsageError("the protocol wrote no frames; set a positive stride on some stage")
        return write_cfrm(self.frames)

    def log_csv(self) -> bytes:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in self.rows:
            w.writerow([r.step, f"{r.time:.4f}", f"{r.potential:.6f}", f"{r.kinetic:.6f}",
                        f"{r.temperature:.4f}", f"{r.pressure:.4f}", f"{r.box:.6f}"])
        return buf.getvalue().encode()


def constraint_set(topology: Topology, params: ForceFieldParams, config: SimConfig):
    """Constraints implied by the config, and params with those bonds' springs removed."""
    if config.constraint.kind == "none" or not topology.bonds:
        return None, params
    elements = topology.elements
    pairs, lengths, mask = [], [], np.zeros(len(params.bonds), dtype=bool)
    for k, (i, j, r) in enumerate(topology.bonds):
        if config.constraint.bonds == "all-bonds" or "H" in (elements[i], elements[j]):
            pairs.append((i, j))
            lengths.append(r)
            mask[k] = True
    if not pairs:
        return None, params
    return Constraints.build(pairs, lengths, topology.masses), params.without_bonds(mask)


def _groups(topology: Topology, config: SimConfig):
    return [(q, select(topology, q).indices) for q in config.thermostat.groups]


def run_protocol(topology: Topology, positions, box: Optional[Box], params: ForceFieldParams,
                 config: SimConfig, stages: Sequence[Stage], velocities=None,
                 workers: int = 1) -> ProtocolResult:
    """Run ``stages`` in order starting from ``positions``.

    Velocities are drawn from Maxwell-Boltzmann at the thermostat
    temperature (seeded by ``config.seed``) at the first dynamics stage
    unless given. Any failure is re-raised with the stage number and kind
    prefixed.
    """
    if not stages:
        raise UsageError("empty protocol")
    rng = np.random.default_rng(config.seed)
    masses = topology.masses
    constraints, md_params = constraint_set(topology, params, config)
    groups = _groups(topology, config)
    pos = np.array(positions, dtype=float)
    n = pos.shape[0]
    vel = None if velocities is None else np.array(velocities, dtype=float)
    state = SimState(pos, np.zeros((n, 3)) if vel is None else vel, np.zeros((n, 3)), box, rng=rng)
    result = ProtocolResult()
    step_offset = 0
    have_velocities = vel is not None

    def emit(st):
        if result.frames and result.frames[-1].time == st.time and stage.kind != "minimize":
            return
        result.frames.append(Frame(st.time, st.positions.copy(), st.box))

    for number, stage in enumerate(stages, start=1):
        tag = f"stage {number} ({stage.kind})"
        try:
            stage_params = params if stage.kind == "minimize" else md_params
            if stage.restrain is not None:
                idx = select(topology, stage.restrain).indices
                stage_params = stage_params.with_restraints(idx, state.positions[idx], stage.restraint_k)
            if stage.kind == "minimize":
                if stage.frame_stride:
                    emit(state)
                res = steepest_descent(state.positions, state.box, stage_params, config.minimizer, config.neighbor)
                result.minimizations.append(res)
                state.positions = res.positions
                log.info("%s: %d steps, E = %.4f kJ/mol, Fmax = %.4g%s", tag, res.steps, res.energy, res.fmax,
                         " (stalled)" if res.stalled else "")
                if stage.frame_stride:
                    emit(state)
                continue
            th, ba = stage.couplings(config)
            stage_config = replace(config, thermostat=th, barostat=ba)
            if stage.generate_velocities or (stage.generate_velocities is None and not have_velocities):
                temp = config.thermostat.temperature
                state.velocities = initial_velocities(masses, temp, state.rng, config.remove_com)
                have_velocities = True
            if ba.kind != "parrinello-rahman":
                state.box_velocity = 0.0
            if md_params.dispersion_correction and state.box is not None:
                log.info("%s: analytic LJ tail corrections applied to energy and pressure", tag)
            engine = MDEngine(state, masses, stage_params, stage_config, groups, constraints, workers)
            engine.step_count = step_offset
            n_steps = stage.n_steps(config.dt)
            rows = engine.run(n_steps, stage.frame_stride, config.log_stride, emit)
            result.rows.extend(rows)
            step_offset = engine.step_count
            state = engine.state
        except ConfigError:
            raise
        except ConformetricsError as exc:
            raise type(exc)(f"{tag}: {exc}") from exc
    result.state = state
    return result
