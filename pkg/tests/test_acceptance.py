"""Acceptance suite: one test per criterion, each printed as a pass/fail line in the summary.

The long molecular-dynamics runs (NVE, thermostat, barostat) take a few
minutes in total.
"""

import csv
import io
import json
import math
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from conformetrics.core import Box, Frame, Selection, Trajectory
from conformetrics.metrics import HBondCriteria, SasaParams, hbond_triples, sasa, shrake_rupley, superpose
from conformetrics.simkern.barostat import berendsen_mu, berendsen_scale
from conformetrics.simkern.forces import compute_forces
from conformetrics.simkern.integrate import MDEngine, initial_velocities, total_energy_drift
from conformetrics.simkern.lincs import Constraints, lincs_project
from conformetrics.simkern.params import (BarostatConfig, ForceFieldParams, NeighborConfig, SimConfig, SimState,
                                          ThermostatConfig)
from conformetrics.simkern.systems import lj_dimer, lj_fluid
from conformetrics.stats import (WindowSpec, WindowStats, block_average_se, integrated_autocorr_time,
                                 pct_delta)
from conformetrics.trajio import (MetricReport, comparison_table, parse_gro, read_cfrm, write_cfrm,
                                  write_gro)
from conformetrics.trajio.report import SINGLE_TRAJECTORY_CAVEAT, render_mean_sd

from conftest import make_topology
from oracles import (ar1_series, ar1_standard_error, ar1_tau_int, brute_hbonds, cap_area_two_spheres,
                     monte_carlo_sasa, numerical_gradient, pair_energy_reference, quaternion_grid_rmsd,
                     random_rotation, shake)

BOLTZMANN = 0.0083144626
criterion = pytest.mark.criterion


def _stats(mean, sd=0.0):
    return WindowStats(mean=mean, sd=sd, n_frames=100, window=WindowSpec(80000.0, 100000.0))


# -- 1 ------------------------------------------------------------------------

@criterion(1, "delta arithmetic reproduces the printed table percentages")
def test_delta_arithmetic_fixtures():
    t0 = time.perf_counter()
    q21_rg = 32.06
    assert [pct_delta(q21_rg, t) for t in (28.53, 37.10, 43.86)] == [-11, 16, 37]
    q40_rg = 33.38
    assert [pct_delta(q40_rg, t) for t in (32.05, 40.65, 34.01, 39.50)] == [-4, 22, 2, 18]
    assert pct_delta(32.06, 40.17) == 25
    assert pct_delta(25705, 37729) == 47
    assert pct_delta(24.0, 13.8) == -42
    # same numbers through the comparison table, in internal units
    reports = [MetricReport(label, {"rg": _stats(rg / 10.0), "sasa": _stats(s / 100.0)})
               for label, rg, s in (("Aqueous control", 32.06, 25705), ("+ Methanol (0.5 M)", 28.53, 25283),
                                    ("+ Hexane (1.0 M)", 37.10, 31331), ("+ TCE (1.0 M)", 43.86, 37729))]
    csv_bytes, text = comparison_table(reports, "Aqueous control")
    rows = list(csv.DictReader(io.StringIO(csv_bytes.decode())))
    assert [r["rg_delta_pct"] for r in rows] == ["", "-11", "+16", "+37"]
    assert [r["sasa_delta_pct"] for r in rows][3] == "+47"
    assert "+37%" in text.splitlines()[4]
    assert time.perf_counter() - t0 < 1.0


# -- 2 ------------------------------------------------------------------------

@criterion(2, "window statistics render as '32.06 ± 0.69' in the text report")
def test_rendering_fixture():
    st = _stats(3.206, 0.069)
    assert render_mean_sd("rg", st) == "32.06 ± 0.69"
    _, text = comparison_table([MetricReport("Q21", {"rg": st})])
    assert "32.06 ± 0.69" in text


# -- 3 ------------------------------------------------------------------------

@criterion(3, "SASA matches analytic spheres, cap formula and Monte Carlo")
def test_sasa_oracle():
    t0 = time.perf_counter()
    r = 0.17 + 0.14
    single = shrake_rupley(np.zeros((1, 3)), np.array([r]), 960).sum()
    assert abs(single / (4 * math.pi * r * r) - 1) < 0.005

    for r1, r2, d in ((0.31, 0.31, 0.3), (0.29, 0.34, 0.45), (0.25, 0.32, 0.2), (0.3, 0.3, 0.55)):
        pos = np.array([[0.0, 0.0, 0.0], [d, 0.0, 0.0]])
        got = shrake_rupley(pos, np.array([r1, r2]), 960).sum()
        assert abs(got / cap_area_two_spheres(r1, r2, d) - 1) < 0.01

    gen = np.random.default_rng(2024)
    elements = ["C", "N", "O", "S"]
    worst = 0.0
    for _ in range(8):
        els = list(gen.choice(elements, 20))
        top = make_topology(els)
        frame = Frame(0.0, gen.uniform(0.0, 1.0, (20, 3)))
        params = SasaParams()
        total, _ = sasa(frame, Selection(np.arange(20)), top, params)
        radii = np.array([params.radii_table[e] for e in els]) + params.probe_radius
        oracle = monte_carlo_sasa(frame.positions, radii, 10 ** 6, gen)
        worst = max(worst, abs(total / oracle - 1))
    assert worst < 0.01
    assert time.perf_counter() - t0 < 30


# -- 4 ------------------------------------------------------------------------

def _random_hbond_system(gen):
    n_heavy = int(gen.integers(10, 120))
    elements = list(gen.choice(["N", "O", "C"], n_heavy, p=[0.3, 0.3, 0.4]))
    donors = [k for k, e in enumerate(elements) if e in ("N", "O") and gen.random() < 0.6]
    edge = max(1.0, (n_heavy / 40.0) ** (1 / 3))
    heavy = gen.uniform(0.0, edge, (n_heavy, 3))
    hyd = []
    for d in donors:
        u = gen.standard_normal(3)
        hyd.append(heavy[d] + 0.1 * u / np.linalg.norm(u))
    n = n_heavy + len(donors)
    assert n <= 200
    elements += ["H"] * len(donors)
    positions = np.vstack([heavy] + ([np.array(hyd)] if hyd else []))
    bonds = [(d, n_heavy + k, 0.1) for k, d in enumerate(donors)]
    chains = list(gen.integers(0, 3, n_heavy)) + [None] * len(donors)
    for k, d in enumerate(donors):
        chains[n_heavy + k] = chains[d]
    chains = [int(c) for c in chains]
    present = sorted(set(chains))
    chains = [present.index(c) for c in chains]
    return make_topology(elements, chains=chains, bonds=bonds), positions, edge


@criterion(4, "hydrogen bonds agree exactly with brute force on 500 configurations")
def test_hbond_oracle():
    t0 = time.perf_counter()
    gen = np.random.default_rng(99)
    crit = HBondCriteria(donor_acceptor_max=0.30, dha_angle_min=150.0)
    total = 0
    for trial in range(500):
        top, pos, edge = _random_hbond_system(gen)
        if not any(e == "H" for e in top.elements):
            continue
        periodic = trial % 2 == 0 and edge > 0.61
        box = Box.from_lengths(edge) if periodic else None
        if periodic:
            pos = pos % edge
        scope = "intra-chain" if trial % 3 else "all"
        frame = Frame(0.0, pos, box)
        got = [tuple(t) for t in hbond_triples(frame, Selection(np.arange(top.n_atoms)), top, crit, scope)]
        bonds = [(i, j) for i, j, _ in top.bonds]
        want = brute_hbonds(pos, top.elements, top.chain_ids, bonds, 0.30, 150.0,
                            box.lengths if box else None, intra_chain=scope == "intra-chain")
        assert got == want, f"trial {trial}"
        total += len(want)
    assert total > 100
    assert time.perf_counter() - t0 < 30


# -- 5 ------------------------------------------------------------------------

@criterion(5, "superposition recovers rigid copies and matches a quaternion grid search")
def test_superposition():
    gen = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        n = int(gen.integers(3, 60))
        ref = gen.normal(0.0, 1.0, (n, 3))
        mobile = ref @ random_rotation(gen).T + gen.uniform(-10, 10, 3)
        worst = max(worst, superpose(mobile, ref)[2])
    assert worst < 1e-10
    for _ in range(20):
        n = int(gen.integers(5, 40))
        ref = gen.normal(0.0, 1.0, (n, 3))
        mobile = ref @ random_rotation(gen).T + gen.normal(0.0, 0.2, (n, 3)) + gen.uniform(-5, 5, 3)
        assert abs(superpose(mobile, ref)[2] - quaternion_grid_rmsd(mobile, ref)) < 1e-6


# -- 6 ------------------------------------------------------------------------

def _random_force_case(gen):
    n = int(gen.integers(6, 12))
    periodic = gen.random() < 0.5
    edge = 2.2
    rc = 1.0
    while True:
        pos = gen.uniform(0.0, edge if periodic else 1.2, (n, 3))
        d = pos[:, None, :] - pos[None, :, :]
        if periodic:
            d -= edge * np.round(d / edge)
        r = np.linalg.norm(d, axis=2)[np.triu_indices(n, 1)]
        if r.min() > 0.28 and np.all(np.abs(r - rc) > 1e-3):
            break
    species = gen.integers(0, 2, n)
    charges = gen.uniform(-0.5, 0.5, n)
    bonds = np.array([(0, 1), (2, 3), (1, 4)])
    r0 = gen.uniform(0.1, 0.3, len(bonds))
    k_bond = gen.uniform(1e3, 5e4, len(bonds))
    ridx = np.array([0, n - 1])
    ref = pos[ridx] + gen.normal(0, 0.05, (2, 3))
    params = ForceFieldParams(species=species, epsilon=[0.8, 0.4], sigma=[0.32, 0.27], charges=charges,
                              bonds=bonds, bond_k=k_bond, bond_r0=r0, cutoff=rc, restraint_indices=ridx,
                              restraint_reference=ref, restraint_k=float(gen.uniform(100, 2000)))
    return pos, (Box.from_lengths(edge) if periodic else None), params


@criterion(6, "forces equal minus the finite-difference energy gradient")
def test_force_finite_difference():
    gen = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        pos, box, params = _random_force_case(gen)
        forces, energy, _ = compute_forces(pos, box, params)
        lengths = None if box is None else box.lengths
        excluded = {(min(i, j), max(i, j)) for i, j in params.bonds}
        ref_e = pair_energy_reference(pos, lengths, params.species, params.epsilon, params.sigma, params.charges,
                                      params.coulomb_constant, params.cutoff, excluded, params.bonds,
                                      params.bond_k, params.bond_r0, params.restraint_indices,
                                      params.restraint_reference, params.restraint_k)
        assert energy == pytest.approx(ref_e, rel=1e-10, abs=1e-9)
        grad = numerical_gradient(lambda x: compute_forces(x, box, params)[1], pos)
        worst = max(worst, np.abs(forces + grad).max() / np.abs(grad).max())
    assert worst < 1e-6


# -- 7 ------------------------------------------------------------------------

def _equilibrated_fluid(seed, steps=10000, temperature=120.0, **fluid):
    system = lj_fluid(**fluid)
    gen = np.random.default_rng(seed)
    n = system.topology.n_atoms
    state = SimState(system.positions, initial_velocities(system.masses, temperature, gen), np.zeros((n, 3)),
                     system.box, rng=gen)
    config = SimConfig(thermostat=ThermostatConfig(temperature=temperature, tau=0.1),
                       neighbor=NeighborConfig(buffer=0.02))
    engine = MDEngine(state, system.masses, system.params, config)
    engine.run(steps)
    return system, engine, config


@criterion(7, "NVE energy drift below 1e-4 for the LJ dimer and the 108-atom fluid")
def test_nve_conservation():
    t0 = time.perf_counter()
    dimer = lj_dimer(1.2 * 0.34)
    state = SimState(dimer.positions, np.zeros((2, 3)), np.zeros((2, 3)), None)
    rows = MDEngine(state, dimer.masses, dimer.params, SimConfig(dt=0.002)).run(100000)
    assert len(rows) == 100000
    assert total_energy_drift(rows) < 1e-4

    system, engine, config = _equilibrated_fluid(7)
    nve = MDEngine(engine.state, system.masses, system.params,
                   replace(config, thermostat=ThermostatConfig(kind="none")))
    rows = nve.run(100000)
    assert config.dt == 0.002 and len(rows) == 100000
    assert total_energy_drift(rows) < 1e-4
    assert time.perf_counter() - t0 < 120


# -- 8 ------------------------------------------------------------------------

@criterion(8, "V-rescale gives the target temperature and canonical kinetic-energy variance")
def test_thermostat_ensemble():
    t0 = time.perf_counter()
    system, engine, _ = _equilibrated_fluid(11)
    n_steps = int(round(500.0 / 0.002))
    ke = np.empty(n_steps)
    for k in range(n_steps):
        engine.step()
        ke[k] = engine.half_step_kinetic_energy()
    temperature = 2.0 * ke.mean() / (engine.ndf * BOLTZMANN)
    assert abs(temperature / 120.0 - 1) < 0.02
    canonical = 2.0 / engine.ndf * ke.mean() ** 2
    assert abs(ke.var() / canonical - 1) < 0.10
    assert time.perf_counter() - t0 < 300


# -- 9 ------------------------------------------------------------------------

def _density_run(kind, seed=5, equil=25000, steps=150000):
    system = lj_fluid(reduced_density=0.7, cutoff=0.75)
    gen = np.random.default_rng(seed)
    n = system.topology.n_atoms
    state = SimState(system.positions, initial_velocities(system.masses, 120.0, gen), np.zeros((n, 3)),
                     system.box, rng=gen)
    config = SimConfig(thermostat=ThermostatConfig(temperature=120.0, tau=0.1),
                       barostat=BarostatConfig(kind=kind, pressure=500.0, tau=1.0, compressibility=3e-4),
                       neighbor=NeighborConfig(buffer=0.03))
    engine = MDEngine(state, system.masses, system.params, config)
    engine.run(equil)
    rows = engine.run(steps, log_stride=10)
    rho = np.array([n / r.box ** 3 for r in rows])
    block = block_average_se(rho)
    if block.plateau:
        se = block.plateau_se
    else:
        se = rho.std(ddof=1) * math.sqrt(integrated_autocorr_time(rho).tau_int / rho.size)
    return rho.mean(), se


@criterion(9, "Berendsen fixed point is exact; Berendsen and Parrinello-Rahman densities agree")
def test_barostat_consistency():
    t0 = time.perf_counter()
    for p0 in (1.0, 500.0, -20.0):
        assert berendsen_mu(p0, p0, 1.0, 4.5e-5, 0.002) == 1.0
    pos = np.random.default_rng(0).uniform(0, 3, (10, 3))
    box = Box.from_lengths(3.0)
    new_pos, new_box, mu = berendsen_scale(pos, box, 1.0, 1.0, 1.0, 4.5e-5, 0.002)
    assert mu == 1.0 and new_box == box and np.array_equal(new_pos, pos)

    rho_b, se_b = _density_run("berendsen")
    rho_pr, se_pr = _density_run("parrinello-rahman")
    combined = math.hypot(se_b, se_pr)
    print(f"\n  density: Berendsen {rho_b:.3f} ± {se_b:.3f}, Parrinello-Rahman {rho_pr:.3f} ± {se_pr:.3f} nm^-3, "
          f"|diff| = {abs(rho_b - rho_pr) / combined:.2f} combined SE")
    assert abs(rho_b - rho_pr) <= 2.0 * combined
    assert time.perf_counter() - t0 < 600


# -- 10 -----------------------------------------------------------------------

@criterion(10, "LINCS restores a single bond and matches converged SHAKE on a 3-bead chain")
def test_lincs():
    gen = np.random.default_rng(10)
    worst_single = 0.0
    for _ in range(200):
        u = gen.standard_normal(3)
        ref = np.array([np.zeros(3), 0.1 * u / np.linalg.norm(u)])
        masses = [12.011, 1.008]
        new = ref + gen.normal(0.0, 0.002, (2, 3))
        out = lincs_project(new, ref, Constraints.build([(0, 1)], [0.1], masses), order=4, iterations=1)
        worst_single = max(worst_single, abs(np.linalg.norm(out[1] - out[0]) / 0.1 - 1))
    assert worst_single < 1e-8

    masses = np.array([14.007, 12.011, 15.999])
    pairs, lengths = [(0, 1), (1, 2)], [0.1, 0.1]
    con = Constraints.build(pairs, lengths, masses)
    worst = 0.0
    for _ in range(500):
        angle = gen.uniform(1.7, 2.1)
        ref = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.1 - 0.1 * math.cos(angle), 0.1 * math.sin(angle), 0.0]])
        ref = ref @ random_rotation(gen).T
        # one 2 fs drift at thermal velocities (300 K)
        vel = gen.standard_normal((3, 3)) * np.sqrt(BOLTZMANN * 300.0 / masses)[:, None]
        new = ref + 0.002 * vel
        got = lincs_project(new, ref, con, order=4, iterations=1)
        want = shake(new, ref, pairs, lengths, masses)
        worst = max(worst, np.abs(got - want).max() / 0.1)
    assert worst < 1e-4


# -- 11 -----------------------------------------------------------------------

@criterion(11, "block SE and tau_int match AR(1) theory; white noise has tau_int near 1")
def test_convergence_diagnostics():
    gen = np.random.default_rng(11)
    rho = 0.9
    x = ar1_series(2 ** 20, rho, gen)
    block = block_average_se(x)
    assert block.plateau
    assert abs(block.plateau_se / ar1_standard_error(x.size, rho) - 1) < 0.15
    assert abs(integrated_autocorr_time(x).tau_int / ar1_tau_int(rho) - 1) < 0.15
    assert ar1_tau_int(rho) == pytest.approx(19.0)
    assert abs(integrated_autocorr_time(gen.standard_normal(2 ** 20)).tau_int - 1) < 0.10


# -- 12 -----------------------------------------------------------------------

def _cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "conformetrics", *args], cwd=cwd, capture_output=True,
                          text=True, timeout=600)


@criterion(12, "lossless GRO/CFRM round-trips and byte-identical repeated runs")
def test_round_trips_and_determinism(tmp_path):
    gen = np.random.default_rng(12)
    n = 50
    top = make_topology(["C", "N", "O", "H", "S"] * 10)
    frames = [Frame(0.5 * k, np.round(gen.uniform(0, 9.0, (n, 3)), 3), Box.from_lengths([9.0, 8.5, 7.25]))
              for k in range(4)]
    top_back, frames_back = parse_gro(write_gro(top, frames))
    assert [a.name for a in top_back.atoms] == [a.name for a in top.atoms]
    for a, b in zip(frames, frames_back):
        assert np.array_equal(a.positions, b.positions)
        assert a.box == b.box and a.time == b.time
    f32 = [Frame(f.time, f.positions.astype(np.float32), f.box) for f in frames]
    for a, b in zip(f32, read_cfrm(write_cfrm(f32))):
        assert np.array_equal(a.positions, b.positions) and a.time == b.time and a.box == b.box
    assert write_cfrm(read_cfrm(write_cfrm(f32))) == write_cfrm(f32)

    assert _cli("build-system", "toy", "--chains", "2", "--residues", "4", "--equil-ps", "0.2",
                "--production-ps", "1", "--stride", "25", "--out", "sys", cwd=tmp_path).returncode == 0
    outputs = {}
    for run in ("a", "b"):
        res = _cli("simulate", "--config", "sys/toy.ini", "--topology", "sys/toy.json", "--coords", "sys/toy.gro",
                   "--workers", "1", "--out", f"sim_{run}", cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        # both analyses read the same inputs, so their provenance blocks match too
        res = _cli("analyze", "--topology", "sim_a/topology.json", "--traj", "sim_a/traj.cfrm",
                   "--reference", "sys/toy.gro", "--label", "toy", "--workers", "1", "--sphere-points", "240",
                   "--out", f"an_{run}", cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        res = _cli("plot", f"an_{run}", "--out", f"fig_{run}/fig.svg", cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        outputs[run] = {name: (tmp_path / f"{prefix}_{run}" / name).read_bytes()
                        for prefix, names in (("sim", ("traj.cfrm", "energy.csv", "final.gro")),
                                              ("an", ("rmsd.csv", "rg.csv", "sasa.csv", "hbonds.csv", "rmsf.csv",
                                                      "report.json", "report.csv", "report.txt")),
                                              ("fig", ("fig.svg",)))
                        for name in names}
    differing = [name for name in outputs["a"] if outputs["a"][name] != outputs["b"][name]]
    assert not differing


# -- 13 -----------------------------------------------------------------------

@criterion(13, "simulate, analyze and plot run end to end on the four-chain toy system")
def test_end_to_end(tmp_path):
    t0 = time.perf_counter()
    steps = [
        ("build-system", "toy", "--equil-ps", "2", "--production-ps", "20", "--stride", "50", "--out", "system"),
        ("simulate", "--config", "system/toy.ini", "--topology", "system/toy.json", "--coords", "system/toy.gro",
         "--out", "sim"),
        ("analyze", "--topology", "sim/topology.json", "--traj", "sim/traj.cfrm", "--reference", "system/toy.gro",
         "--metrics", "rmsd,rg,sasa,hbonds,rmsf", "--label", "toy", "--out", "analysis"),
        ("plot", "analysis", "--panels", "rmsd,rg,sasa,rmsf,hbonds", "--out", "figure/toy.svg"),
    ]
    for args in steps:
        res = _cli(*args, cwd=tmp_path)
        assert res.returncode == 0, f"{args[0]} failed: {res.stderr}"
    top = json.loads((tmp_path / "system" / "toy.json").read_text())
    assert len({a["chain_id"] for a in top["atoms"]}) == 4
    report = json.loads((tmp_path / "analysis" / "report.json").read_text())
    assert report["caveat"] == SINGLE_TRAJECTORY_CAVEAT
    assert set(report["stats"]) == {"rmsd", "rg", "sasa", "hbonds"}
    times = [float(line.split(",")[0]) for line in
             (tmp_path / "analysis" / "rg.csv").read_text().splitlines()[1:] if line.endswith("total")]
    window = report["stats"]["rg"]
    assert window["window_end_ps"] == pytest.approx(times[-1])
    assert window["window_start_ps"] == pytest.approx(times[-1] - 0.2 * (times[-1] - times[0]))
    assert SINGLE_TRAJECTORY_CAVEAT in (tmp_path / "analysis" / "report.txt").read_text()
    assert (tmp_path / "analysis" / "rmsf.csv").exists()
    svg = (tmp_path / "figure" / "toy.svg").read_text()
    for letter in "ABCDE":
        assert f"{letter}) " in svg
    for manifest in ("system", "sim", "analysis", "figure"):
        assert (tmp_path / manifest / "manifest.json").exists()
    assert time.perf_counter() - t0 < 600
