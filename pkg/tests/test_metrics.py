import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conformetrics.core import Box, Frame, Selection, Trajectory
from conformetrics.errors import FormatError, NumericalError, UsageError
from conformetrics.metrics import (HBondCriteria, SasaParams, frame_metric_series, hbond_count,
                                   hbond_count_per_chain, hbond_triples, load_radii, radius_of_gyration,
                                   radius_of_gyration_per_chain, rmsd, rmsd_series, rmsf_profile, sasa,
                                   shrake_rupley, sphere_points, superpose)
from conformetrics.selection import select

from conftest import backbone_chains, make_topology
from oracles import random_rotation


def _all(top):
    return Selection(np.arange(top.n_atoms))


# -- radius of gyration -------------------------------------------------------

def test_rg_matches_direct_formula(rng):
    top = make_topology(["C", "O", "H", "N", "S"])
    pos = rng.normal(size=(5, 3))
    m = top.masses
    com = (m[:, None] * pos).sum(axis=0) / m.sum()
    want = math.sqrt(sum(m[k] * np.sum((pos[k] - com) ** 2) for k in range(5)) / m.sum())
    assert radius_of_gyration(Frame(0.0, pos), _all(top), top) == pytest.approx(want, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2 ** 31 - 1))
def test_rg_invariant_under_rigid_motion(n, seed):
    gen = np.random.default_rng(seed)
    top = make_topology(list(gen.choice(["C", "N", "O", "H"], n)))
    pos = gen.normal(size=(n, 3))
    moved = pos @ random_rotation(gen).T + gen.uniform(-20, 20, 3)
    a = radius_of_gyration(Frame(0.0, pos), _all(top), top)
    b = radius_of_gyration(Frame(0.0, moved), _all(top), top)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_rg_per_chain_keys():
    top, frame = backbone_chains(4, 3)
    per = radius_of_gyration_per_chain(frame, _all(top), top)
    assert sorted(per) == [0, 1, 2, 3]
    # identical chain copies have identical Rg
    assert np.allclose(list(per.values()), per[0])


# -- superposition ------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.integers(3, 40), st.integers(0, 2 ** 31 - 1))
def test_superpose_is_proper_rotation_and_never_worse(n, seed):
    gen = np.random.default_rng(seed)
    ref = gen.normal(size=(n, 3))
    mob = gen.normal(size=(n, 3))
    rot, trans, value = superpose(mob, ref)
    assert np.allclose(rot @ rot.T, np.eye(3), atol=1e-10)
    assert np.linalg.det(rot) == pytest.approx(1.0)
    assert value <= rmsd(mob - mob.mean(0) + ref.mean(0), ref) + 1e-12
    assert value == pytest.approx(rmsd(mob @ rot.T + trans, ref), abs=1e-12)


def test_superpose_handles_reflection_case():
    ref = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0], [0, 0, 0]])
    mirror = ref * np.array([-1.0, 1.0, 1.0])
    rot, _, value = superpose(mirror, ref)
    assert np.linalg.det(rot) > 0
    assert value > 0.1


def test_superpose_errors():
    with pytest.raises(UsageError, match="at least 3"):
        superpose(np.zeros((2, 3)), np.zeros((2, 3)))
    line = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
    with pytest.raises(NumericalError, match="collinear"):
        superpose(line, line)


def test_rmsd_series_zero_for_rigid_copies(rng):
    top, frame = backbone_chains(2, 3)
    frames = [Frame(float(k), frame.positions @ random_rotation(rng).T + k, frame.box) for k in range(4)]
    series = rmsd_series(Trajectory(top, frames), select(top, "backbone"), frame)
    assert series.metric == "rmsd"
    assert np.all(series.values < 1e-10)
    unfit = rmsd_series(Trajectory(top, frames[1:2]), select(top, "backbone"), frame, fit=False)
    assert unfit.values[0] > 0.5


# -- RMSF ---------------------------------------------------------------------

def test_rmsf_zero_for_rigid_motion(rng):
    top, frame = backbone_chains(2, 4)
    frames = [Frame(float(k), frame.positions @ random_rotation(rng).T + rng.normal(size=3), None)
              for k in range(6)]
    prof = rmsf_profile(Trajectory(top, frames), select(top, "calpha"), select(top, "backbone"))
    assert prof.residue_seq.tolist() == [1, 2, 3, 4]
    assert np.all(prof.rmsf < 1e-9)
    assert sorted(prof.per_chain) == [0, 1]


def test_rmsf_scales_with_noise():
    top, frame = backbone_chains(2, 8)
    gen = np.random.default_rng(8)
    sigma = 0.01
    frames = [Frame(float(k), frame.positions + gen.normal(0, sigma, frame.positions.shape), None)
              for k in range(400)]
    prof = rmsf_profile(Trajectory(top, frames), select(top, "all"))
    # isotropic noise of sd sigma per axis gives an RMS displacement near sigma * sqrt(3)
    assert prof.rmsf.mean() == pytest.approx(sigma * math.sqrt(3), rel=0.1)


def test_rmsf_averages_chain_copies():
    top, frame = backbone_chains(2, 3)
    gen = np.random.default_rng(1)
    n_half = top.n_atoms // 2
    frames = []
    for k in range(20):
        noise = gen.normal(0, 0.02, (n_half, 3))
        frames.append(Frame(float(k), frame.positions + np.vstack([noise, 0.5 * noise]), None))
    prof = rmsf_profile(Trajectory(top, frames), select(top, "calpha"), select(top, "backbone"))
    assert np.allclose(prof.rmsf, 0.5 * (prof.per_chain[0] + prof.per_chain[1]))
    # the fit is only linear in the noise to first order
    assert np.allclose(prof.per_chain[1], 0.5 * prof.per_chain[0], rtol=0.05)


def test_rmsf_needs_two_frames():
    top, frame = backbone_chains(1, 3)
    with pytest.raises(UsageError, match="2 frames"):
        rmsf_profile(Trajectory(top, [frame]), _all(top))


# -- SASA ---------------------------------------------------------------------

def test_sphere_points_unit_and_balanced():
    pts = sphere_points(960)
    assert pts.shape == (960, 3)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    assert np.allclose(pts.mean(axis=0), 0.0, atol=1e-3)


def test_sasa_isolated_atoms_are_full_spheres():
    top = make_topology(["C", "O"])
    frame = Frame(0.0, np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]]))
    total, per = sasa(frame, _all(top), top)
    r = np.array([0.170, 0.152]) + 0.14
    assert np.allclose(per, 4 * np.pi * r ** 2)
    assert total == pytest.approx(per.sum())


def test_sasa_buried_atom_has_zero_area():
    pos = np.vstack([[0.0, 0.0, 0.0], 0.25 * np.vstack([np.eye(3), -np.eye(3)])])
    radii = np.array([0.1] + [0.3] * 6)
    assert shrake_rupley(pos, radii)[0] == 0.0


def test_sasa_periodic_image_occludes():
    box = Box.from_lengths(1.0)
    pos = np.array([[0.05, 0.5, 0.5], [0.95, 0.5, 0.5]])
    free = shrake_rupley(pos, np.array([0.2, 0.2]))
    wrapped = shrake_rupley(pos, np.array([0.2, 0.2]), box=box)
    assert wrapped.sum() < free.sum()


def test_sasa_radii_override_and_errors():
    table = load_radii("element,radius_nm\nC,0.2\n")
    assert table == {"C": 0.2}
    params = SasaParams().with_overrides(table)
    assert params.radii_table["C"] == 0.2 and params.radii_table["N"] == 0.155
    with pytest.raises(FormatError, match="header"):
        load_radii("el,r\nC,1\n")
    top = make_topology(["C"])
    object.__setattr__(top.atoms[0], "element", "Xx")
    with pytest.raises(FormatError, match="Xx"):
        sasa(Frame(0.0, np.zeros((1, 3))), _all(top), top)
    with pytest.raises(UsageError):
        SasaParams(probe_radius=0.0)


# -- hydrogen bonds -----------------------------------------------------------

def _linear_hbond(distance, angle_deg, chains=(0, 0, 0)):
    """N-H donor on the x axis and an O acceptor at ``distance`` from N, bent by the angle at H."""
    top = make_topology(["N", "H", "O"], chains=list(chains), bonds=[(0, 1, 0.1)])
    n = np.zeros(3)
    h = np.array([0.1, 0.0, 0.0])
    # place O so the N-H...O angle at H equals angle_deg and |N-O| equals distance
    theta = math.radians(180.0 - angle_deg)
    # solve |h + t*(cos, sin)| = distance for t > 0
    u = np.array([math.cos(theta), math.sin(theta), 0.0])
    b = 2 * h @ u
    c = h @ h - distance ** 2
    t = (-b + math.sqrt(b * b - 4 * c)) / 2
    return top, Frame(0.0, np.vstack([n, h, h + t * u]))


@pytest.mark.parametrize("distance,angle,count", [
    (0.29, 180.0, 1), (0.30, 180.0, 1), (0.31, 180.0, 0), (0.28, 151.0, 1), (0.28, 149.0, 0),
])
def test_hbond_thresholds(distance, angle, count):
    top, frame = _linear_hbond(distance, angle)
    assert hbond_count(frame, _all(top), top) == count


def test_hbond_scope_intra_chain():
    top, frame = _linear_hbond(0.29, 180.0, chains=(0, 0, 1))
    assert hbond_count(frame, _all(top), top, scope="intra-chain") == 0
    assert hbond_count(frame, _all(top), top, scope="all") == 1
    assert hbond_count_per_chain(frame, _all(top), top) == {0: 0, 1: 0}


def test_hbond_criteria_are_flags():
    top, frame = _linear_hbond(0.33, 140.0)
    loose = HBondCriteria(donor_acceptor_max=0.35, dha_angle_min=120.0)
    assert hbond_count(frame, _all(top), top) == 0
    assert hbond_count(frame, _all(top), top, loose) == 1


def test_hbond_unbonded_hydrogen_assigned_by_distance():
    top, frame = _linear_hbond(0.29, 180.0)
    bare = make_topology(["N", "H", "O"])
    assert hbond_triples(frame, _all(bare), bare).tolist() == [[0, 1, 2]]


def test_hbond_needs_hydrogens():
    top = make_topology(["N", "O"])
    with pytest.raises(UsageError, match="hydrogens"):
        hbond_count(Frame(0.0, np.zeros((2, 3)) + [[0, 0, 0], [0.3, 0, 0]]), _all(top), top)


# -- series -------------------------------------------------------------------

def test_frame_metric_series_scopes_and_workers(toy_trajectory):
    top = toy_trajectory.topology
    sel = select(top, "protein")
    for metric in ("rg", "sasa", "hbonds"):
        serial = frame_metric_series(toy_trajectory, metric, sel, sasa_params=SasaParams(sphere_points=120))
        parallel = frame_metric_series(toy_trajectory, metric, sel, sasa_params=SasaParams(sphere_points=120),
                                       workers=2)
        assert [s.scope for s in serial] == ["total", "chain 0", "chain 1"]
        for a, b in zip(serial, parallel):
            assert np.array_equal(a.values, b.values)
            assert np.array_equal(a.times, toy_trajectory.times)
    hb = frame_metric_series(toy_trajectory, "hbonds", sel)
    assert np.array_equal(hb[0].values, hb[1].values + hb[2].values)
    with pytest.raises(ValueError):
        frame_metric_series(toy_trajectory, "rmsf", sel)
