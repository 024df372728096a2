"""Optimal rigid superposition, RMSD time series and per-residue RMSF."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import Frame, Selection, Trajectory
from ..errors import NumericalError, UsageError
from .series import MetricSeries

# relative singular-value floor below which a centred point set counts as
# collinear (or coincident) and the rotation is not determined
_CONDITION_FLOOR = 1e-9


def _check_conditioning(centred: np.ndarray, which: str) -> None:
    s = np.linalg.svd(centred, compute_uv=False)
    if s[0] == 0 or s[1] / s[0] < _CONDITION_FLOOR:
        raise NumericalError(f"{which} points are collinear or coincident; superposition is ill-conditioned")


def superpose(mobile, reference, weights=None):
    """Least-squares rigid fit of ``mobile`` onto ``reference`` (Kabsch).

    Parameters
    ----------
    mobile, reference : array_like, shape (n, 3)
        Paired coordinates, n >= 3.
    weights : array_like, shape (n,), optional
        Non-negative per-atom weights; uniform when omitted.

    Returns
    -------
    rotation : ndarray, shape (3, 3)
        Proper rotation (det = +1).
    translation : ndarray, shape (3,)
        Such that ``mobile @ rotation.T + translation`` is the fitted copy.
    rmsd : float
        Weighted RMSD after fitting.
    """
    p = np.asarray(mobile, dtype=float)
    q = np.asarray(reference, dtype=float)
    if p.shape != q.shape or p.ndim != 2 or p.shape[1] != 3:
        raise UsageError(f"mobile {p.shape} and reference {q.shape} must both be (n, 3)")
    n = p.shape[0]
    if n < 3:
        raise UsageError(f"superposition needs at least 3 atoms, got {n}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or not np.any(w > 0):
        raise UsageError("weights must be non-negative, one per atom, and not all zero")
    w = w / w.sum()
    pc = w @ p
    qc = w @ q
    p0 = p - pc
    q0 = q - qc
    _check_conditioning(p0[w > 0], "mobile")
    _check_conditioning(q0[w > 0], "reference")
    h = (p0 * w[:, None]).T @ q0
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    trans = qc - rot @ pc
    fitted = p @ rot.T + trans
    rmsd = float(np.sqrt(w @ np.sum((fitted - q) ** 2, axis=1)))
    return rot, trans, rmsd


def fit_coordinates(mobile, reference, weights=None):
    rot, trans, _ = superpose(mobile, reference, weights)
    return np.asarray(mobile, dtype=float) @ rot.T + trans


def rmsd(a, b, weights=None) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sq = np.sum((a - b) ** 2, axis=1)
    if weights is None:
        return float(np.sqrt(sq.mean()))
    w = np.asarray(weights, dtype=float)
    return float(np.sqrt(w @ sq / w.sum()))


def rmsd_series(traj: Trajectory, sel: Selection, reference: Frame, fit: bool = True,
                weights=None) -> MetricSeries:
    """Per-frame RMSD of ``sel`` against ``reference``.

    With ``fit=True`` each frame is superposed on the reference over the
    selection first. With ``fit=False`` raw coordinates are compared; no
    minimum-image unwrapping is applied in either case, so callers should
    make molecules whole beforehand.
    """
    idx = sel.indices
    if fit and idx.size < 3:
        raise UsageError(f"fitted RMSD needs >= 3 atoms, selection {sel.label!r} has {idx.size}")
    if reference.n_atoms != traj.topology.n_atoms:
        raise UsageError("reference frame does not match the trajectory topology")
    ref = reference.positions[idx]
    w = None if weights is None else np.asarray(weights, dtype=float)
    values = np.empty(len(traj))
    for k, frame in enumerate(traj):
        pos = frame.positions[idx]
        if fit:
            values[k] = superpose(pos, ref, w)[2]
        else:
            values[k] = rmsd(pos, ref, w)
    return MetricSeries("rmsd", traj.times, values, scope="total")


@dataclass(frozen=True)
class RmsfProfile:
    residue_seq: np.ndarray
    rmsf: np.ndarray
    per_chain: dict
    averaging: str = "mean over chain copies"


def _fluctuations(xyz: np.ndarray, fit_cols: np.ndarray, passes: int = 2) -> np.ndarray:
    """Per-atom RMS deviation about the fitted time-average structure."""
    avg = xyz[0]
    for _ in range(passes):
        fitted = np.empty_like(xyz)
        for k in range(xyz.shape[0]):
            rot, trans, _ = superpose(xyz[k, fit_cols], avg[fit_cols])
            fitted[k] = xyz[k] @ rot.T + trans
        avg = fitted.mean(axis=0)
    return np.sqrt(np.mean(np.sum((fitted - avg) ** 2, axis=2), axis=0))


def rmsf_profile(traj: Trajectory, sel: Selection, fit_sel: Optional[Selection] = None) -> RmsfProfile:
    """Per-residue RMSF averaged over chain copies.

    Each chain is handled on its own: frames are superposed (on the
    ``fit_sel`` atoms of that chain, default ``sel``) onto a reference that
    starts as the first frame and is then replaced by the fitted time
    average for a second pass. Per-atom RMSF is averaged within residues
    and the residue profiles are then averaged across chains, which must
    share residue numbering.
    """
    if len(traj) < 2:
        raise UsageError("RMSF needs at least 2 frames")
    top = traj.topology
    chain_ids = top.chain_ids
    seqs = top.residue_seqs
    fit_idx = sel.indices if fit_sel is None else fit_sel.indices
    xyz = traj.xyz
    per_chain = {}
    for chain in np.unique(chain_ids[sel.indices]):
        atoms = np.union1d(sel.indices[chain_ids[sel.indices] == chain],
                           fit_idx[chain_ids[fit_idx] == chain])
        fit_cols = np.flatnonzero(np.isin(atoms, fit_idx))
        if fit_cols.size < 3:
            raise UsageError(f"chain {chain} has {fit_cols.size} fitting atoms; need >= 3")
        fl = _fluctuations(xyz[:, atoms], fit_cols)
        keep = np.isin(atoms, sel.indices)
        atom_seqs = seqs[atoms[keep]]
        res = np.unique(atom_seqs)
        per_chain[int(chain)] = (res, np.array([fl[keep][atom_seqs == r].mean() for r in res]))
    chains = sorted(per_chain)
    res0 = per_chain[chains[0]][0]
    for c in chains[1:]:
        if not np.array_equal(per_chain[c][0], res0):
            raise UsageError(f"chain {c} residue numbering differs from chain {chains[0]}; cannot average RMSF")
    profile = np.mean([per_chain[c][1] for c in chains], axis=0)
    return RmsfProfile(residue_seq=res0, rmsf=profile, per_chain={c: per_chain[c][1] for c in chains})
