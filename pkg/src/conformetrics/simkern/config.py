"""INI-style simulation config files.

Schema (every key optional unless marked; ``lj.<Element>`` may repeat)::

    [run]          dt, seed, log_stride, remove_com
    [forcefield]   cutoff, coulomb_constant, dispersion_correction, bond_k, angle_k,
                   lj.<Element> = epsilon_kj_mol, sigma_nm
    [neighbor]     buffer, check_interval
    [thermostat]   kind (none | v-rescale), temperature, tau, groups (selections joined by ';')
    [barostat]     kind (none | berendsen | parrinello-rahman), pressure, tau, compressibility
    [constraints]  kind (none | lincs), bonds (h-bonds | all-bonds), order, iterations
    [minimizer]    max_steps, fmax_tol, initial_step
    [stage N]      kind (required: minimize | nvt | npt | production), duration_ps, stride,
                   restrain (selection), restraint_k (required with restrain),
                   thermostat, barostat (coupling-kind overrides), generate_velocities

Stages run in ascending ``N``. All schema problems are collected and
reported together.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from ..core import COULOMB_CONSTANT
from ..errors import ConfigError, ConformetricsError
from .params import (BarostatConfig, ConstraintConfig, MinimizerConfig, NeighborConfig, SimConfig,
                     ThermostatConfig)
from .protocol import STAGE_KINDS, Stage


@dataclass(frozen=True)
class ForceFieldSpec:
    cutoff: float = 1.4
    coulomb_constant: float = COULOMB_CONSTANT
    dispersion_correction: bool = False
    bond_k: float = 5.0e4
    angle_k: float = 0.0
    lj: Dict[str, Tuple[float, float]] = field(default_factory=dict)


@dataclass(frozen=True)
class SimulationSetup:
    config: SimConfig
    forcefield: ForceFieldSpec
    stages: List[Stage]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _str(text):
    return text.strip()


def _groups(text):
    parts = tuple(p.strip() for p in text.split(";") if p.strip())
    if not parts:
        raise ValueError("at least one selection is required")
    return parts


def _pair(text):
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if len(parts) != 2:
        raise ValueError(f"expected 'epsilon, sigma', got {text!r}")
    return float(parts[0]), float(parts[1])


SCHEMA = {
    "run": {"dt": float, "seed": int, "log_stride": int, "remove_com": _bool},
    "forcefield": {"cutoff": float, "coulomb_constant": float, "dispersion_correction": _bool,
                   "bond_k": float, "angle_k": float},
    "neighbor": {"buffer": float, "check_interval": int},
    "thermostat": {"kind": _str, "temperature": float, "tau": float, "groups": _groups},
    "barostat": {"kind": _str, "pressure": float, "tau": float, "compressibility": float},
    "constraints": {"kind": _str, "bonds": _str, "order": int, "iterations": int},
    "minimizer": {"max_steps": int, "fmax_tol": float, "initial_step": float},
}
STAGE_SCHEMA = {"kind": _str, "duration_ps": float, "stride": int, "restrain": _str, "restraint_k": float,
                "thermostat": _str, "barostat": _str, "generate_velocities": _bool}
_STAGE_SECTION = re.compile(r"^stage\s+(\d+)$")


def parse_config(text: str) -> SimulationSetup:
    """Parse and validate a config; raises :class:`ConfigError` listing every problem."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    problems: List[str] = []
    values: Dict[str, dict] = {}
    stages: Dict[int, dict] = {}
    for name in parser.sections():
        m = _STAGE_SECTION.match(name)
        if m:
            schema, target = STAGE_SCHEMA, stages.setdefault(int(m.group(1)), {})
        elif name in SCHEMA:
            schema, target = SCHEMA[name], values.setdefault(name, {})
        else:
            problems.append(f"unknown section [{name}]; valid sections: "
                            f"{', '.join(sorted(SCHEMA))}, stage N")
            continue
        for key, raw in parser.items(name):
            if name == "forcefield" and key.startswith("lj."):
                try:
                    target.setdefault("lj", {})[key[3:]] = _pair(raw)
                except ValueError as exc:
                    problems.append(f"[{name}] {key}: {exc}")
                continue
            if key not in schema:
                extra = ", lj.<Element>" if name == "forcefield" else ""
                problems.append(f"[{name}] unknown key {key!r}; valid keys: {', '.join(sorted(schema))}{extra}")
                continue
            try:
                target[key] = schema[key](raw)
            except ValueError as exc:
                problems.append(f"[{name}] {key}: {exc}")

    def build(label, cls, kwargs):
        try:
            return cls(**kwargs)
        except (ConformetricsError, TypeError) as exc:
            problems.append(f"[{label}] {exc}")
            return None

    run = values.get("run", {})
    th = build("thermostat", ThermostatConfig, values.get("thermostat", {"kind": "none"}))
    ba = build("barostat", BarostatConfig, values.get("barostat", {}))
    co = build("constraints", ConstraintConfig, values.get("constraints", {}))
    nb = build("neighbor", NeighborConfig, values.get("neighbor", {}))
    mi = build("minimizer", MinimizerConfig, values.get("minimizer", {}))
    ff = build("forcefield", ForceFieldSpec, values.get("forcefield", {}))
    if ff is not None:
        for element, (eps, sig) in ff.lj.items():
            if eps < 0 or sig <= 0:
                problems.append(f"[forcefield] lj.{element}: need epsilon >= 0 and sigma > 0")
            elif sig >= ff.cutoff:
                problems.append(f"[forcefield] lj.{element}: sigma {sig} must be below the cutoff {ff.cutoff}")
    stage_list = []
    if not stages:
        problems.append("no [stage N] sections; at least one stage is required")
    for number in sorted(stages):
        spec = stages[number]
        if "kind" not in spec:
            problems.append(f"[stage {number}] missing required key 'kind' ({' | '.join(STAGE_KINDS)})")
            continue
        st = build(f"stage {number}", Stage, spec)
        if st is None:
            continue
        if st.kind != "minimize" and st.duration_ps <= 0:
            problems.append(f"[stage {number}] {st.kind} needs duration_ps > 0")
        for coupling, valid in (("thermostat", ("none", "v-rescale")),
                                ("barostat", ("none", "berendsen", "parrinello-rahman"))):
            kind = getattr(st, coupling)
            if kind is not None and kind not in valid:
                problems.append(f"[stage {number}] {coupling} {kind!r} not one of {valid}")
        stage_list.append((number, st))
    config = None
    if None not in (th, ba, co, nb, mi):
        try:
            config = SimConfig(thermostat=th, barostat=ba, constraint=co, neighbor=nb, minimizer=mi, **run)
        except (ConformetricsError, TypeError) as exc:
            problems.append(f"[run] {exc}")
    if config is not None:
        for number, st in stage_list:
            if st.kind != "minimize":
                try:
                    st.n_steps(config.dt)
                except ConformetricsError as exc:
                    problems.append(f"[stage {number}] {exc}")
            if st.kind in ("nvt", "npt") and (st.thermostat or config.thermostat.kind) == "none":
                problems.append(f"[stage {number}] {st.kind} needs a thermostat ([thermostat] kind = v-rescale)")
    if problems:
        raise ConfigError(problems)
    return SimulationSetup(config, ff, [st for _, st in stage_list])


def config_keys() -> Dict[str, List[str]]:
    """Valid keys per section (for help text)."""
    out = {k: sorted(v) for k, v in SCHEMA.items()}
    out["stage N"] = sorted(STAGE_SCHEMA)
    return out


