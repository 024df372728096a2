"""Force-field parameters, run configuration and the mutable simulation state."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..core import COULOMB_CONSTANT, Box
from ..errors import NumericalError, UsageError


@dataclass
class ForceFieldParams:
    """Nonbonded and bonded parameters for one system.

    LJ parameters are per species; pairs mix geometrically for epsilon
    and arithmetically for sigma. Bonded pairs listed in ``bonds`` are
    excluded from the nonbonded sum. Both LJ and Coulomb are truncated
    at ``cutoff`` and shifted so the pair energy is zero there.
    """

    species: np.ndarray
    epsilon: np.ndarray
    sigma: np.ndarray
    charges: np.ndarray
    bonds: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    bond_k: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bond_r0: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cutoff: float = 1.4
    coulomb_constant: float = COULOMB_CONSTANT
    dispersion_correction: bool = False
    restraint_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    restraint_reference: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    restraint_k: float = 0.0

    def __post_init__(self):
        self.species = np.asarray(self.species, dtype=int)
        self.epsilon = np.asarray(self.epsilon, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.charges = np.asarray(self.charges, dtype=float)
        self.bonds = np.asarray(self.bonds, dtype=int).reshape(-1, 2)
        self.bond_k = np.broadcast_to(np.asarray(self.bond_k, dtype=float), (len(self.bonds),)).copy()
        self.bond_r0 = np.broadcast_to(np.asarray(self.bond_r0, dtype=float), (len(self.bonds),)).copy()
        self.restraint_indices = np.asarray(self.restraint_indices, dtype=int)
        self.restraint_reference = np.asarray(self.restraint_reference, dtype=float).reshape(-1, 3)
        if np.any(self.epsilon < 0) or np.any(self.sigma <= 0):
            raise UsageError("LJ parameters need epsilon >= 0 and sigma > 0")
        if self.sigma.size and self.cutoff <= self.sigma.max():
            raise UsageError(f"cutoff {self.cutoff} nm must exceed the largest sigma {self.sigma.max()} nm")
        if self.charges.shape != self.species.shape:
            raise UsageError("one charge per atom is required")
        if len(self.restraint_indices) != len(self.restraint_reference):
            raise UsageError("restraint indices and reference positions differ in length")
        eps_ij = np.sqrt(np.outer(self.epsilon, self.epsilon))
        sig_ij = 0.5 * (self.sigma[:, None] + self.sigma[None, :])
        self.c6 = 4.0 * eps_ij * sig_ij ** 6
        self.c12 = 4.0 * eps_ij * sig_ij ** 12
        rc6 = self.cutoff ** -6
        self.lj_shift = self.c12 * rc6 * rc6 - self.c6 * rc6

    @property
    def n_atoms(self) -> int:
        return self.species.size

    def exclusion_keys(self) -> np.ndarray:
        if not len(self.bonds):
            return np.zeros(0, dtype=np.int64)
        lo = self.bonds.min(axis=1).astype(np.int64)
        hi = self.bonds.max(axis=1).astype(np.int64)
        return np.unique(lo * self.n_atoms + hi)

    def with_restraints(self, indices, reference, k) -> "ForceFieldParams":
        return replace(self, restraint_indices=np.asarray(indices, dtype=int),
                       restraint_reference=np.asarray(reference, dtype=float), restraint_k=float(k))

    def without_bonds(self, mask) -> "ForceFieldParams":
        """Drop the harmonic terms for bonds selected by ``mask`` (they become constraints).

        The exclusions stay: constrained pairs still get no nonbonded term.
        """
        out = replace(self)
        keep = ~np.asarray(mask, dtype=bool)
        out.bond_k = np.where(keep, self.bond_k, 0.0)
        return out


@dataclass(frozen=True)
class ThermostatConfig:
    kind: str = "v-rescale"
    temperature: float = 300.0
    tau: float = 0.1
    groups: tuple = ("all",)

    def __post_init__(self):
        if self.kind not in ("none", "v-rescale"):
            raise UsageError(f"unknown thermostat {self.kind!r}")
        if self.kind != "none" and not (self.tau > 0 and self.temperature >= 0):
            raise UsageError("thermostat needs tau > 0 and temperature >= 0")


@dataclass(frozen=True)
class BarostatConfig:
    kind: str = "none"
    pressure: float = 1.0
    tau: float = 1.0
    compressibility: float = 4.5e-5

    def __post_init__(self):
        if self.kind not in ("none", "berendsen", "parrinello-rahman"):
            raise UsageError(f"unknown barostat {self.kind!r}")
        if self.kind != "none" and not (self.tau > 0 and self.compressibility > 0):
            raise UsageError("barostat needs tau > 0 and compressibility > 0")


@dataclass(frozen=True)
class ConstraintConfig:
    kind: str = "none"
    bonds: str = "h-bonds"
    order: int = 4
    iterations: int = 1

    def __post_init__(self):
        if self.kind not in ("none", "lincs"):
            raise UsageError(f"unknown constraint algorithm {self.kind!r}")
        if self.bonds not in ("h-bonds", "all-bonds"):
            raise UsageError(f"constraint bonds must be h-bonds or all-bonds, got {self.bonds!r}")
        if self.order < 1 or self.iterations < 0:
            raise UsageError("LINCS needs order >= 1 and iterations >= 0")


@dataclass(frozen=True)
class NeighborConfig:
    buffer: float = 0.1
    check_interval: int = 1

    def __post_init__(self):
        if self.buffer < 0 or self.check_interval < 1:
            raise UsageError("neighbour list needs buffer >= 0 and check_interval >= 1")


@dataclass(frozen=True)
class MinimizerConfig:
    max_steps: int = 5000
    fmax_tol: float = 1000.0
    initial_step: float = 0.01

    def __post_init__(self):
        if self.max_steps < 0 or self.fmax_tol <= 0 or self.initial_step <= 0:
            raise UsageError("minimizer needs max_steps >= 0, fmax_tol > 0, initial_step > 0")


@dataclass(frozen=True)
class SimConfig:
    """Every protocol knob. Defaults are the production-protocol values
    (2 fs step, tau_T 0.1 ps, tau_P 1 ps, 4.5e-5 bar^-1, LINCS order 4 with
    one iteration, 1.4 nm cutoff via ForceFieldParams)."""

    dt: float = 0.002
    thermostat: ThermostatConfig = ThermostatConfig(kind="none")
    barostat: BarostatConfig = BarostatConfig()
    constraint: ConstraintConfig = ConstraintConfig()
    neighbor: NeighborConfig = NeighborConfig()
    minimizer: MinimizerConfig = MinimizerConfig()
    seed: int = 0
    remove_com: bool = True
    log_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise UsageError("dt must be positive")
        if self.log_stride < 1:
            raise UsageError("log_stride must be >= 1")


@dataclass
class SimState:
    """Positions at t, velocities at t - dt/2 (leapfrog), forces at t."""

    positions: np.ndarray
    velocities: np.ndarray
    forces: np.ndarray
    box: Optional[Box]
    time: float = 0.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    box_velocity: float = 0.0
    potential_energy: float = float("nan")
    virial: float = float("nan")

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float)
        self.velocities = np.array(self.velocities, dtype=float)
        self.forces = np.array(self.forces, dtype=float)
        n = self.positions.shape[0]
        if self.velocities.shape != (n, 3) or self.forces.shape != (n, 3):
            raise UsageError("positions, velocities and forces must all be (n, 3)")

    def check(self):
        for name in ("positions", "velocities", "forces"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericalError(f"non-finite {name} at t = {self.time:g} ps")

    def copy(self) -> "SimState":
        return replace(self, positions=self.positions.copy(), velocities=self.velocities.copy(),
                       forces=self.forces.copy(), rng=copy.deepcopy(self.rng))
