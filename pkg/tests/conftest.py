import numpy as np
import pytest

from conformetrics.core import Atom, Box, Frame, Topology

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL", report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, seconds = _CRITERIA[number]
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {title} ({seconds:.1f} s)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_topology(elements, chains=None, residues=None, names=None, bonds=(), charges=None):
    n = len(elements)
    chains = chains if chains is not None else [0] * n
    residues = residues if residues is not None else list(range(1, n + 1))
    names = names if names is not None else list(elements)
    charges = charges if charges is not None else [0.0] * n
    mass = {"H": 1.008, "C": 12.011, "N": 14.007, "O": 15.999, "S": 32.06, "Ar": 39.948}
    atoms = tuple(Atom(index=k, name=names[k], element=elements[k], mass=mass[elements[k]],
                       charge=charges[k], residue_seq=residues[k], residue_name="GLY", chain_id=chains[k])
                  for k in range(n))
    return Topology(atoms, tuple(bonds))


def backbone_chains(n_chains=2, n_residues=4, seed=0, noise=0.0):
    """Small multi-chain backbone (N, H, CA, C, O per residue) with bonds and one frame."""
    from conformetrics.simkern.systems import toy_chains

    system = toy_chains(n_chains=n_chains, n_residues=n_residues)
    pos = system.positions
    if noise:
        pos = pos + np.random.default_rng(seed).normal(0.0, noise, pos.shape)
    return system.topology, Frame(0.0, pos, system.box)


@pytest.fixture
def toy_trajectory():
    """Five-frame trajectory of two jiggling backbone chains."""
    from conformetrics.core import Trajectory

    top, frame = backbone_chains(2, 4)
    gen = np.random.default_rng(3)
    frames = [Frame(2.0 * k, frame.positions + gen.normal(0, 0.01, frame.positions.shape), frame.box)
              for k in range(5)]
    return Trajectory(top, frames)


def cube(edge):
    return Box.from_lengths(edge)
