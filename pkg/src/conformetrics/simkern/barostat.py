"""Isotropic pressure coupling: weak (Berendsen) and extended-system (Parrinello-Rahman).

For Parrinello-Rahman the box edge L carries a momentum. Its inverse mass
follows the usual mapping from the coupling constants,
``W^-1 = 4 pi^2 kappa / (3 tau_P^2 L)``, which makes the box oscillate with
period ``tau_P`` when ``kappa`` equals the true isothermal compressibility.
The resulting equation of motion is
``L'' = (4 pi^2 kappa L / (3 tau_P^2)) (P - P0)``. Non-cubic boxes use
``L = V^(1/3)`` and every edge is scaled by the same factor.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from ..errors import NumericalError

log = logging.getLogger(__name__)

MU_BOUNDS = (0.98, 1.02)
# largest relative box change per step tolerated before the run is halted
PR_MAX_RELATIVE_RATE = 0.01


def berendsen_mu(pressure: float, p0: float, tau: float, compressibility: float, dt: float) -> float:
    """Isotropic Berendsen scale factor, clamped to ``MU_BOUNDS``."""
    arg = 1.0 - (dt / tau) * compressibility * (p0 - pressure)
    mu = arg ** (1.0 / 3.0) if arg > 0 else 0.0
    lo, hi = MU_BOUNDS
    if not lo <= mu <= hi:
        clamped = min(max(mu, lo), hi)
        log.warning("Berendsen scale factor %.6f outside [%g, %g]; clamped to %g (P = %.1f bar)",
                    mu, lo, hi, clamped, pressure)
        return clamped
    return mu


def berendsen_scale(positions, box, pressure, p0, tau, compressibility, dt):
    """Scale box and positions by the Berendsen factor; returns ``(positions, box, mu)``."""
    mu = berendsen_mu(pressure, p0, tau, compressibility, dt)
    if mu == 1.0:
        return np.array(positions, dtype=float), box, mu
    return np.asarray(positions) * mu, box.scaled(mu), mu


def pr_acceleration(length: float, pressure: float, p0: float, tau: float, compressibility: float) -> float:
    return length * (4.0 * math.pi ** 2 * compressibility / (3.0 * tau * tau)) * (pressure - p0)


def parrinello_rahman_step(positions, box, box_velocity: float, pressure, p0, tau, compressibility, dt):
    """Advance the isotropic box variable by one step.

    Returns ``(positions, box, box_velocity, friction)`` where ``friction``
    is ``L'/L``; particle velocities are damped by ``1 - dt*friction``.
    """
    length = box.volume ** (1.0 / 3.0)
    new_velocity = box_velocity + dt * pr_acceleration(length, pressure, p0, tau, compressibility)
    rate = dt * new_velocity / length
    if not math.isfinite(rate) or abs(rate) > PR_MAX_RELATIVE_RATE:
        raise NumericalError(f"Parrinello-Rahman box velocity blew up: relative change {rate:.3g} per step "
                             f"(P = {pressure:.1f} bar, P0 = {p0:g} bar)")
    if new_velocity == 0.0:
        return np.array(positions, dtype=float), box, 0.0, 0.0
    mu = 1.0 + rate
    return np.asarray(positions) * mu, box.scaled(mu), new_velocity, new_velocity / length
