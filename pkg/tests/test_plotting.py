import numpy as np
import pytest

from conformetrics.errors import UsageError
from conformetrics.plotting import PANEL_ORDER, order_panels, render_panels


def _data(panels, conditions=("ctl", "mut")):
    x = np.linspace(0.0, 10.0, 11)
    return {p: {c: (x, np.sin(x) + k) for k, c in enumerate(conditions)} for p in panels}


def test_panels_follow_canonical_order():
    assert order_panels(["hbonds", "rmsd", "rmsf"]) == ["rmsd", "rmsf", "hbonds"]
    with pytest.raises(UsageError, match="unknown"):
        order_panels(["volume"])
    with pytest.raises(UsageError):
        order_panels([])


def test_labels_lettered_in_order():
    svg = render_panels(_data(PANEL_ORDER), list(reversed(PANEL_ORDER))).decode()
    positions = [svg.index(f"{letter}) ") for letter in "ABCDE"]
    assert positions == sorted(positions)
    assert "A) Root mean square deviation" in svg
    assert "E) Total H-bond count" in svg


def test_render_is_deterministic():
    data = _data(["rg", "sasa"])
    assert render_panels(data, ["rg", "sasa"]) == render_panels(data, ["rg", "sasa"])


def test_missing_or_empty_series():
    with pytest.raises(UsageError, match="no series"):
        render_panels(_data(["rg"]), ["rg", "sasa"])
    data = {"rg": {"ctl": (np.array([]), np.array([]))}}
    with pytest.raises(UsageError, match="empty"):
        render_panels(data, ["rg"])


def test_mismatched_time_axes_warn(caplog):
    data = {"rg": {"a": (np.arange(5.0), np.zeros(5)), "b": (np.arange(6.0), np.zeros(6))}}
    render_panels(data, ["rg"])
    assert "different time axes" in caplog.text
