"""Command-line interface for trajectory analysis and toy simulations.

Exit codes: 0 success, 2 usage or flag error, 3 input-format error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .core import Frame, Trajectory, make_whole
from .errors import ConformetricsError, FormatError, NumericalError, UsageError
from .metrics import HBondCriteria, SasaParams, frame_metric_series, load_radii, rmsd_series, rmsf_profile
from .selection import select
from .stats import WindowSpec, convergence_diagnostics, window_stats
from .trajio import (MetricReport, atomic_write, comparison_table, emit_report, load_structure,
                     load_trajectory, read_series_csv, report_from_json, rmsf_to_csv, series_to_csv,
                     topology_to_json, write_gro)

log = logging.getLogger("conformetrics")

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_NUMERIC = 0, 2, 3, 4
WORKERS_ENV = "CONFORMETRICS_WORKERS"
ALL_METRICS = ("rmsd", "rg", "sasa", "hbonds", "rmsf")
MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    """Everything needed to reproduce one output directory."""

    subcommand: str
    inputs: dict
    selections: dict = field(default_factory=dict)
    metrics: list = field(default_factory=list)
    window: Optional[dict] = None
    control: Optional[str] = None
    output_dir: str = ""
    seed: Optional[int] = None
    tool_version: str = __version__
    arguments: dict = field(default_factory=dict)

    def to_json(self) -> bytes:
        return (json.dumps(asdict(self), indent=2) + "\n").encode()


def _write_manifest(out: Path, manifest: RunManifest) -> None:
    atomic_write(out / MANIFEST_NAME, manifest.to_json())


def _workers(value: Optional[int]) -> int:
    if value is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                value = int(env)
            except ValueError:
                raise UsageError(f"{WORKERS_ENV}={env!r} is not an integer") from None
        else:
            value = os.cpu_count() or 1
    if value < 1:
        raise UsageError("--workers must be >= 1")
    return value


def _abs(path) -> Optional[str]:
    return None if path is None else str(Path(path).resolve())


# -- analyze ------------------------------------------------------------------

_ANALYZE_REPLAY_KEYS = ("topology", "traj", "format", "bonds", "select", "fit_select", "metrics",
                        "window_start_ps", "window_end_ps", "reference", "label", "probe_radius",
                        "sphere_points", "radii", "hbond_distance", "hbond_angle", "hbond_scope")


def _parse_metrics(text: str) -> list:
    metrics = [m.strip().lower() for m in text.split(",") if m.strip()]
    unknown = [m for m in metrics if m not in ALL_METRICS]
    if unknown or not metrics:
        raise UsageError(f"unknown metrics {unknown}; choose from {', '.join(ALL_METRICS)}")
    return [m for m in ALL_METRICS if m in metrics]


def _apply_manifest(args) -> None:
    """Fill every analyze flag left at its default from an earlier run's manifest."""
    doc = json.loads(Path(args.from_manifest).read_text())
    if doc.get("subcommand") != "analyze":
        raise FormatError(f"{args.from_manifest} is not an analyze manifest")
    defaults = build_parser().parse_args(["analyze", "--out", "."])
    for key, value in doc.get("arguments", {}).items():
        if key in _ANALYZE_REPLAY_KEYS and getattr(args, key) == getattr(defaults, key):
            setattr(args, key, value)


def cmd_analyze(args) -> int:
    if args.from_manifest:
        _apply_manifest(args)
    if not args.topology or not args.traj:
        raise UsageError("analyze needs --topology and --traj (or --from-manifest)")
    metrics = _parse_metrics(args.metrics)
    if "rmsd" in metrics and not args.reference:
        raise UsageError("RMSD requested but no --reference structure given")
    workers = _workers(args.workers)
    out = Path(args.out)
    traj = load_trajectory(args.topology, args.traj, args.format, args.bonds)
    if len(traj) == 0:
        raise FormatError(f"{args.traj} holds no frames")
    top = traj.topology
    # unwrap molecules split by periodic boundaries before any geometry
    frames = [Frame(f.time, make_whole(f.positions, top, f.box), f.box) for f in traj]
    traj = Trajectory(top, frames)
    sel = select(top, args.select)
    times = traj.times
    if args.window_start_ps is None and args.window_end_ps is None:
        window = WindowSpec.final_fraction(times, 0.2)
    else:
        start = args.window_start_ps if args.window_start_ps is not None else float(times[0])
        end = args.window_end_ps if args.window_end_ps is not None else float(times[-1])
        window = WindowSpec(start, end)
    if window.end > times[-1] + 1e-6 or window.start < times[0] - 1e-6:
        raise UsageError(f"window [{window.start:g}, {window.end:g}] ps lies outside the trajectory "
                         f"time range [{times[0]:g}, {times[-1]:g}] ps")

    radii = load_radii(Path(args.radii).read_text()) if args.radii else None
    sasa_params = SasaParams(probe_radius=args.probe_radius, sphere_points=args.sphere_points)
    if radii:
        sasa_params = sasa_params.with_overrides(radii)
    criteria = HBondCriteria(donor_acceptor_max=args.hbond_distance, dha_angle_min=args.hbond_angle)

    series = {}
    if "rmsd" in metrics:
        ref_top, ref_frames = load_structure(args.reference, element_overrides=_element_map(top))
        if not ref_frames:
            raise FormatError(f"reference {args.reference} holds no coordinates")
        if ref_top.n_atoms != top.n_atoms:
            raise UsageError(f"reference has {ref_top.n_atoms} atoms, trajectory has {top.n_atoms}")
        ref = ref_frames[0]
        ref = Frame(ref.time, make_whole(ref.positions, top, ref.box), ref.box)
        series["rmsd"] = [rmsd_series(traj, sel, ref)]
    for metric in ("rg", "sasa", "hbonds"):
        if metric in metrics:
            series[metric] = frame_metric_series(traj, metric, sel, sasa_params=sasa_params,
                                                 hbond_criteria=criteria, hbond_scope=args.hbond_scope,
                                                 workers=workers)
    stats, per_chain, conv = {}, {}, {}
    for metric, items in series.items():
        total = items[0]
        stats[metric] = window_stats(total, window)
        mask = (total.times >= window.start - 1e-6) & (total.times <= window.end + 1e-6)
        conv[metric] = convergence_diagnostics(total.values[mask])
        chains = {int(s.scope.split()[1]): window_stats(s, window) for s in items[1:]}
        if chains:
            per_chain[metric] = chains
        atomic_write(out / f"{metric}.csv", series_to_csv(items))
    if "rmsf" in metrics:
        fit_sel = select(top, args.fit_select) if args.fit_select else None
        rmsf_sel = select(top, f"({args.select}) and calpha")
        profile = rmsf_profile(traj, rmsf_sel, fit_sel)
        atomic_write(out / "rmsf.csv", rmsf_to_csv(profile))

    times = traj.times
    provenance = {"topology": _abs(args.topology), "trajectory": _abs(args.traj), "selection": args.select,
                  "fit_selection": args.fit_select, "n_frames": len(traj),
                  "frame_interval_ps": float(np.median(np.diff(times))) if len(times) > 1 else None,
                  "window_ps": [window.start, window.end],
                  "parameters": {"probe_radius_nm": args.probe_radius, "sphere_points": args.sphere_points,
                                 "radii": _abs(args.radii), "hbond_distance_nm": args.hbond_distance,
                                 "hbond_angle_deg": args.hbond_angle, "hbond_scope": args.hbond_scope},
                  "tool_version": __version__}
    label = args.label or Path(args.traj).stem
    if stats:
        report = MetricReport(label, stats, per_chain=per_chain, convergence=conv, provenance=provenance)
        atomic_write(out / "report.json", emit_report(report, "json"))
        atomic_write(out / "report.csv", emit_report(report, "csv"))
        _, text = comparison_table([report])
        atomic_write(out / "report.txt", text.encode())
        sys.stdout.write(text)
    arguments = {k: getattr(args, k) for k in _ANALYZE_REPLAY_KEYS}
    for key in ("topology", "traj", "bonds", "reference", "radii"):
        arguments[key] = _abs(arguments[key])
    _write_manifest(out, RunManifest(
        subcommand="analyze",
        inputs={"topology": arguments["topology"], "traj": arguments["traj"], "reference": arguments["reference"],
                "bonds": arguments["bonds"], "radii": arguments["radii"]},
        selections={"select": args.select, "fit_select": args.fit_select},
        metrics=metrics, window={"start_ps": window.start, "end_ps": window.end},
        output_dir=str(out.resolve()), arguments=arguments))
    return EXIT_OK


# -- report -------------------------------------------------------------------

def cmd_report(args) -> int:
    reports = [report_from_json(Path(p).read_bytes()) for p in args.reports]
    csv_bytes, text = comparison_table(reports, args.control)
    out = Path(args.out)
    atomic_write(out / "comparison.csv", csv_bytes)
    atomic_write(out / "comparison.txt", text.encode())
    sys.stdout.write(text)
    _write_manifest(out, RunManifest(
        subcommand="report", inputs={"reports": [_abs(p) for p in args.reports]},
        metrics=reports[0].metrics() if reports else [], control=args.control, output_dir=str(out.resolve()),
        arguments={"reports": [_abs(p) for p in args.reports], "control": args.control}))
    return EXIT_OK


# -- plot ---------------------------------------------------------------------

def _run_label(run_dir: Path) -> str:
    report = run_dir / "report.json"
    if report.exists():
        return report_from_json(report.read_bytes()).condition_label
    return run_dir.name


def cmd_plot(args) -> int:
    from .plotting import order_panels, render_panels

    panels = order_panels([p.strip().lower() for p in args.panels.split(",") if p.strip()])
    runs = [Path(r) for r in args.runs]
    labels = [l.strip() for l in args.labels.split(",")] if args.labels else [_run_label(r) for r in runs]
    if len(labels) != len(runs):
        raise UsageError(f"{len(labels)} labels for {len(runs)} runs")
    if len(set(labels)) != len(labels):
        raise UsageError(f"duplicate condition labels {labels}")
    data = {}
    for panel in panels:
        data[panel] = {}
        for run, label in zip(runs, labels):
            path = run / f"{panel}.csv"
            if not path.exists():
                raise UsageError(f"{path} not found; run analyze with --metrics including {panel}")
            scopes = read_series_csv(path.read_text())
            scope = "mean" if panel == "rmsf" else "total"
            if scope not in scopes:
                raise FormatError(f"{path} has no {scope!r} scope")
            data[panel][label] = scopes[scope]
    svg = render_panels(data, panels)
    out = Path(args.out)
    atomic_write(out, svg)
    _write_manifest(out.parent, RunManifest(
        subcommand="plot", inputs={"runs": [_abs(r) for r in runs]}, metrics=panels,
        output_dir=str(out.parent.resolve()),
        arguments={"runs": [_abs(r) for r in runs], "labels": labels, "panels": panels, "out": _abs(out)}))
    return EXIT_OK


# -- simulate -----------------------------------------------------------------

def _element_map(topology) -> dict:
    return {a.name: a.element for a in topology.atoms}


def cmd_simulate(args) -> int:
    from .simkern.config import parse_config
    from .simkern.protocol import run_protocol
    from .simkern.systems import forcefield_for

    setup = parse_config(Path(args.config).read_text())
    topology, frames = load_structure(args.topology)
    if args.coords:
        coord_top, frames = load_structure(args.coords, element_overrides=_element_map(topology))
        if coord_top.n_atoms != topology.n_atoms:
            raise UsageError(f"{args.coords} has {coord_top.n_atoms} atoms, topology has {topology.n_atoms}")
    if not frames:
        raise UsageError("no starting coordinates: pass --coords with a GRO or PDB file")
    start = frames[0]
    ff = setup.forcefield
    params = forcefield_for(topology, start.positions, cutoff=ff.cutoff, bond_k=ff.bond_k, angle_k=ff.angle_k,
                            lj=ff.lj, dispersion_correction=ff.dispersion_correction,
                            coulomb_constant=ff.coulomb_constant)
    workers = _workers(args.workers)
    result = run_protocol(topology, start.positions, start.box, params, setup.config, setup.stages,
                          workers=workers)
    out = Path(args.out)
    atomic_write(out / "traj.cfrm", result.cfrm_bytes())
    atomic_write(out / "energy.csv", result.log_csv())
    atomic_write(out / "topology.json", topology_to_json(topology))
    final = Frame(result.state.time, result.state.positions, result.state.box)
    atomic_write(out / "final.gro", write_gro(topology, [final], title="final structure"))
    if result.minimizations:
        lines = ["stage,step,E_pot"]
        for k, res in enumerate(result.minimizations, start=1):
            lines += [f"{k},{i},{e:.6f}" for i, e in enumerate(res.energies)]
        atomic_write(out / "minimize.csv", ("\n".join(lines) + "\n").encode())
    _write_manifest(out, RunManifest(
        subcommand="simulate",
        inputs={"config": _abs(args.config), "topology": _abs(args.topology), "coords": _abs(args.coords)},
        selections={"thermostat_groups": list(setup.config.thermostat.groups)},
        output_dir=str(out.resolve()), seed=setup.config.seed,
        arguments={"workers": workers, "n_frames": len(result.frames)}))
    log.info("simulate: %d frames, %d log rows", len(result.frames), len(result.rows))
    return EXIT_OK


# -- build-system ---------------------------------------------------------------

TOY_CONFIG = """\
# four-chain toy system: minimise, restrained NVT and NPT, then production
[run]
dt = 0.002
seed = {seed}
log_stride = 50

[forcefield]
cutoff = 1.4
bond_k = 50000
angle_k = 10000
lj.N = 0.70, 0.30
lj.H = 0.05, 0.10
lj.C = 0.36, 0.34
lj.O = 0.60, 0.29

[neighbor]
buffer = 0.1

[thermostat]
kind = v-rescale
temperature = 300
tau = 0.1
groups = all

[barostat]
kind = berendsen
pressure = 1.0
tau = 1.0
compressibility = 4.5e-5

[constraints]
kind = lincs
bonds = h-bonds
order = 4
iterations = 1

[minimizer]
max_steps = 5000
fmax_tol = 1000
initial_step = 0.01

[stage 1]
kind = minimize
stride = 0

[stage 2]
kind = nvt
duration_ps = {equil_ps}
restrain = not element H
restraint_k = 1000

[stage 3]
kind = npt
duration_ps = {equil_ps}
restrain = not element H
restraint_k = 1000

[stage 4]
kind = production
duration_ps = {production_ps}
stride = {stride}
barostat = none
"""


def cmd_build_system(args) -> int:
    from .simkern.systems import lj_dimer, lj_fluid, toy_chains

    out = Path(args.out)
    if args.system == "toy":
        system = toy_chains(n_chains=args.chains, n_residues=args.residues)
        config = TOY_CONFIG.format(seed=args.seed, equil_ps=args.equil_ps, production_ps=args.production_ps,
                                   stride=args.stride)
    elif args.system == "lj-fluid":
        system = lj_fluid()
        config = None
    else:
        system = lj_dimer(1.5 * 0.34)
        config = None
    atomic_write(out / f"{args.system}.json", topology_to_json(system.topology))
    atomic_write(out / f"{args.system}.gro", write_gro(system.topology, [Frame(0.0, system.positions, system.box)],
                                                       title=f"{args.system} start"))
    if config:
        atomic_write(out / f"{args.system}.ini", config.encode())
    _write_manifest(out, RunManifest(subcommand="build-system", inputs={}, output_dir=str(out.resolve()),
                                     seed=args.seed, arguments={"system": args.system}))
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conformetrics", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="per-frame metric series, window statistics and diagnostics")
    a.add_argument("--topology", help="topology JSON, GRO or PDB")
    a.add_argument("--traj", help="trajectory file (CFRM, multi-frame GRO or multi-model PDB)")
    a.add_argument("--format", choices=("gro", "pdb", "cfrm"), help="trajectory format (default: from suffix)")
    a.add_argument("--bonds", help="bond list CSV with header i,j,length_nm")
    a.add_argument("--select", default="protein", help="atom selection (default: %(default)s)")
    a.add_argument("--fit-select", help="atoms used for RMSF superposition (default: the RMSF atoms)")
    a.add_argument("--metrics", default="rmsd,rg,sasa,hbonds,rmsf", help="comma list (default: %(default)s)")
    a.add_argument("--window-start-ps", type=float, help="window start (default: final 20%% of the run)")
    a.add_argument("--window-end-ps", type=float, help="window end (default: last frame)")
    a.add_argument("--reference", help="reference structure for RMSD (GRO or PDB)")
    a.add_argument("--label", help="condition label (default: trajectory file stem)")
    a.add_argument("--probe-radius", type=float, default=0.14, help="SASA probe radius, nm (default: %(default)s)")
    a.add_argument("--sphere-points", type=int, default=960, help="SASA points per atom (default: %(default)s)")
    a.add_argument("--radii", help="radius table CSV with header element,radius_nm")
    a.add_argument("--hbond-distance", type=float, default=0.30,
                   help="donor-acceptor cutoff, nm (default: %(default)s)")
    a.add_argument("--hbond-angle", type=float, default=150.0,
                   help="minimum donor-H-acceptor angle, degrees (default: %(default)s)")
    a.add_argument("--hbond-scope", choices=("intra-chain", "all"), default="intra-chain",
                   help="count bonds within chains only, or all (default: %(default)s)")
    a.add_argument("--workers", type=int, help=f"worker processes (default: ${WORKERS_ENV} or all cores)")
    a.add_argument("--from-manifest", help="replay the inputs and settings of an earlier analyze run")
    a.add_argument("--out", required=True, help="output directory")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("report", help="comparison table across conditions")
    r.add_argument("reports", nargs="+", help="report.json files from analyze")
    r.add_argument("--control", help="control condition label (adds delta columns for Rg and SASA)")
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_report)

    pl = sub.add_parser("plot", help="multi-panel SVG of analyze outputs")
    pl.add_argument("runs", nargs="+", help="analyze output directories, one per condition")
    pl.add_argument("--panels", default="rmsd,rg,sasa,rmsf,hbonds", help="comma list (default: %(default)s)")
    pl.add_argument("--labels", help="comma list of condition labels (default: from each report)")
    pl.add_argument("--out", required=True, help="SVG file to write")
    pl.set_defaults(func=cmd_plot)

    s = sub.add_parser("simulate", help="run a staged MD protocol on a toy system")
    s.add_argument("--config", required=True, help="simulation config (INI)")
    s.add_argument("--topology", required=True, help="topology JSON (or GRO/PDB with coordinates)")
    s.add_argument("--coords", help="starting coordinates and box (GRO or PDB)")
    s.add_argument("--workers", type=int, help=f"force-kernel partitions (default: ${WORKERS_ENV} or all cores; 1 is bit-exact)")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("build-system", help="write a ready-made test system")
    b.add_argument("system", choices=("toy", "lj-fluid", "lj-dimer"))
    b.add_argument("--chains", type=int, default=4)
    b.add_argument("--residues", type=int, default=8)
    b.add_argument("--seed", type=int, default=2024)
    b.add_argument("--equil-ps", type=float, default=10.0)
    b.add_argument("--production-ps", type=float, default=100.0)
    b.add_argument("--stride", type=int, default=250)
    b.add_argument("--out", required=True, help="output directory")
    b.set_defaults(func=cmd_build_system)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConformetricsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
