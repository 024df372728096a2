"""Conformational metrics: RMSD, RMSF, radius of gyration, SASA and hydrogen bonds.

Every per-frame metric is a pure function of one frame. The series
helpers below map those over a trajectory, optionally in worker
processes, and always assemble results in frame order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from ..core import Selection, Trajectory
from .hbonds import HBondCriteria, donor_hydrogens, hbond_count, hbond_count_per_chain, hbond_triples
from .sasa import BONDI_RADII, SasaParams, load_radii, sasa, shrake_rupley, sphere_points
from .series import METRICS, MetricSeries
from .shape import radius_of_gyration, radius_of_gyration_per_chain
from .superpose import RmsfProfile, fit_coordinates, rmsd, rmsd_series, rmsf_profile, superpose

__all__ = [
    "BONDI_RADII", "HBondCriteria", "METRICS", "MetricSeries", "RmsfProfile", "SasaParams",
    "donor_hydrogens", "fit_coordinates", "hbond_count", "hbond_count_per_chain", "hbond_triples",
    "load_radii", "radius_of_gyration", "radius_of_gyration_per_chain", "rmsd", "rmsd_series",
    "rmsf_profile", "sasa", "shrake_rupley", "sphere_points", "superpose", "frame_metric_series",
]


def _rg_frame(frame, sel, topology):
    per = radius_of_gyration_per_chain(frame, sel, topology)
    return radius_of_gyration(frame, sel, topology), per


def _sasa_frame(frame, sel, topology, params):
    total, _ = sasa(frame, sel, topology, params)
    per = {}
    chains = topology.chain_ids[sel.indices]
    for c in np.unique(chains):
        sub = Selection(sel.indices[chains == c], label=f"{sel.label} chain {c}")
        per[int(c)] = sasa(frame, sub, topology, params)[0]
    return total, per


def _hbond_frame(frame, sel, topology, criteria, scope):
    per = hbond_count_per_chain(frame, sel, topology, criteria)
    total = sum(per.values()) if scope == "intra-chain" else hbond_count(frame, sel, topology, criteria, scope)
    return total, per


def _map_frames(func, frames, workers):
    if workers and workers > 1 and len(frames) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, frames, chunksize=max(1, len(frames) // (4 * workers))))
    return [func(f) for f in frames]


def frame_metric_series(traj: Trajectory, metric: str, sel: Selection, *, sasa_params=None,
                        hbond_criteria=None, hbond_scope="intra-chain", workers=1) -> list:
    """Series for ``rg``, ``sasa`` or ``hbonds``: the total scope first, then one per chain."""
    top = traj.topology
    if metric == "rg":
        func = partial(_rg_frame, sel=sel, topology=top)
    elif metric == "sasa":
        func = partial(_sasa_frame, sel=sel, topology=top, params=sasa_params or SasaParams())
    elif metric == "hbonds":
        func = partial(_hbond_frame, sel=sel, topology=top, criteria=hbond_criteria or HBondCriteria(),
                       scope=hbond_scope)
    else:
        raise ValueError(f"not a per-frame metric: {metric!r}")
    results = _map_frames(func, traj.frames, workers)
    times = traj.times
    out = [MetricSeries(metric, times, [r[0] for r in results], scope="total")]
    for c in sorted(results[0][1]) if results else []:
        out.append(MetricSeries(metric, times, [r[1][c] for r in results], scope=f"chain {c}"))
    return out
