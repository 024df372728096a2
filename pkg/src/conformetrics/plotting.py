"""Multi-panel SVG figures of metric series.

Output is deterministic: fixed colour cycle, a fixed SVG hash salt and
no date metadata, so identical inputs give identical bytes.
"""

from __future__ import annotations

import io
import logging
from typing import Dict, Sequence, Tuple

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import UsageError  # noqa: E402

log = logging.getLogger(__name__)

PANEL_ORDER = ("rmsd", "rg", "sasa", "rmsf", "hbonds")
Y_LABELS = {"rmsd": "RMSD (Å)", "rg": "Rg (Å)", "sasa": "SASA (Å²)", "rmsf": "RMSF (Å)",
            "hbonds": "H-bonds (count)"}
TITLES = {"rmsd": "Root mean square deviation", "rg": "Total radius of gyration",
          "sasa": "Total solvent accessible surface area", "rmsf": "Root mean square fluctuation",
          "hbonds": "Total H-bond count"}
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def order_panels(panels: Sequence[str]) -> list:
    unknown = [p for p in panels if p not in PANEL_ORDER]
    if unknown:
        raise UsageError(f"unknown panels {unknown}; choose from {', '.join(PANEL_ORDER)}")
    if not panels:
        raise UsageError("no panels requested")
    return [p for p in PANEL_ORDER if p in panels]


def render_panels(data: Dict[str, Dict[str, Tuple[np.ndarray, np.ndarray]]], panels: Sequence[str]) -> bytes:
    """SVG bytes for ``data[panel][condition] = (x, y)`` in reporting units.

    Panels are drawn top to bottom in the canonical order and lettered
    A, B, ... in that order. Conditions keep their insertion order and
    colour across panels.
    """
    panels = order_panels(panels)
    conditions = []
    for p in panels:
        if not data.get(p):
            raise UsageError(f"no series for panel {p!r}")
        for cond, (x, y) in data[p].items():
            if len(x) == 0:
                raise UsageError(f"empty {p} series for {cond!r}")
            if cond not in conditions:
                conditions.append(cond)
    colors = {c: COLORS[k % len(COLORS)] for k, c in enumerate(conditions)}
    with plt.rc_context({"svg.hashsalt": "conformetrics", "svg.fonttype": "path",
                         "font.family": "DejaVu Sans", "font.size": 9}):
        fig, axes = plt.subplots(len(panels), 1, figsize=(6.4, 2.4 * len(panels)), squeeze=False)
        for k, (panel, ax) in enumerate(zip(panels, axes[:, 0])):
            series = data[panel]
            xs = [np.asarray(x) for x, _ in series.values()]
            if any(x.shape != xs[0].shape or not np.allclose(x, xs[0]) for x in xs[1:]):
                log.warning("panel %s: conditions have different %s axes; plotting anyway", panel,
                            "residue" if panel == "rmsf" else "time")
            for cond, (x, y) in series.items():
                ax.plot(x, y, color=colors[cond], linewidth=1.0, label=cond)
            ax.set_ylabel(Y_LABELS[panel])
            ax.set_xlabel("Residue" if panel == "rmsf" else "Time (ps)")
            ax.set_title(f"{chr(ord('A') + k)}) {TITLES[panel]}", loc="left", fontsize=9)
            ax.legend(loc="best", fontsize=7, frameon=False)
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()
