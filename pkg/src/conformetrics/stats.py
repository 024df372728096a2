"""Windowed statistics, control-relative deltas and convergence diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import UsageError

SINGLE_TRAJECTORY_CAVEAT = "temporal SD within a single trajectory, not replicate uncertainty"

# slack for comparing window bounds against float frame times
_TIME_EPS = 1e-6


@dataclass(frozen=True)
class WindowSpec:
    start: float
    end: float

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise UsageError(f"window needs 0 <= start < end, got [{self.start}, {self.end}] ps")

    @classmethod
    def final_fraction(cls, times, fraction=0.2) -> "WindowSpec":
        """Window covering the last ``fraction`` of the time axis."""
        t0, t1 = float(times[0]), float(times[-1])
        return cls(t1 - fraction * (t1 - t0), t1)


@dataclass(frozen=True)
class WindowStats:
    mean: float
    sd: float
    n_frames: int
    window: WindowSpec
    caveat: str = field(default=SINGLE_TRAJECTORY_CAVEAT)


def window_stats(series, w: WindowSpec) -> WindowStats:
    """Mean and sample standard deviation (N-1) of values with start <= t <= end.

    ``series`` is anything with ``times`` and ``values`` arrays, normally a
    :class:`~conformetrics.metrics.MetricSeries`.
    """
    times = np.asarray(series.times, dtype=float)
    values = np.asarray(series.values, dtype=float)
    if times.size == 0:
        raise UsageError("cannot take window statistics of an empty series")
    lo, hi = times[0], times[-1]
    if w.start < lo - _TIME_EPS or w.end > hi + _TIME_EPS:
        raise UsageError(
            f"window [{w.start:g}, {w.end:g}] ps lies outside the series time range [{lo:g}, {hi:g}] ps")
    mask = (times >= w.start - _TIME_EPS) & (times <= w.end + _TIME_EPS)
    picked = values[mask]
    if picked.size < 2:
        raise UsageError(f"window [{w.start:g}, {w.end:g}] ps holds {picked.size} sample(s); need at least 2")
    return WindowStats(mean=float(np.mean(picked)), sd=float(np.std(picked, ddof=1)),
                       n_frames=int(picked.size), window=w)


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def pct_delta(control, treated) -> int:
    """Signed percentage change of ``treated`` relative to ``control``.

    Accepts :class:`WindowStats` or plain numbers. The result is rounded
    half away from zero to an integer.
    """
    c = control.mean if isinstance(control, WindowStats) else float(control)
    t = treated.mean if isinstance(treated, WindowStats) else float(treated)
    if c == 0:
        raise UsageError("percentage delta against a zero control mean is undefined")
    return round_half_away(100.0 * (t - c) / c)


def format_pct(delta: Optional[int]) -> str:
    if delta is None:
        return ""
    return f"{delta:+d}" if delta else "0"


@dataclass(frozen=True)
class BlockAverage:
    block_sizes: tuple
    n_blocks: tuple
    se: tuple
    plateau: bool
    plateau_block_size: Optional[int]
    plateau_se: Optional[float]

    def as_dict(self) -> dict:
        return {
            "block_sizes": list(self.block_sizes),
            "n_blocks": list(self.n_blocks),
            "se": list(self.se),
            "plateau": self.plateau,
            "plateau_block_size": self.plateau_block_size,
            "plateau_se": self.plateau_se,
        }


def default_block_sizes(n: int) -> list:
    """Powers of two up to n/4."""
    sizes = []
    b = 1
    while 4 * b <= n:
        sizes.append(b)
        b *= 2
    return sizes


def block_average_se(values, block_sizes: Optional[Sequence[int]] = None,
                     plateau_tol: float = 0.05) -> BlockAverage:
    """Standard error of the mean from non-overlapping block averages.

    For each block size ``b`` the series is cut into ``n // b`` contiguous
    blocks (trailing samples dropped) and ``SE = sd(block means) / sqrt(#blocks)``.
    A plateau is flagged at the first pair of successive block sizes whose
    SEs differ by less than ``plateau_tol`` (relative); the larger block
    size of that pair is reported.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if block_sizes is None:
        block_sizes = default_block_sizes(n)
    block_sizes = [int(b) for b in block_sizes]
    if not block_sizes or min(block_sizes) < 1:
        raise UsageError("block sizes must be positive integers")
    if n < 4 * max(block_sizes):
        raise UsageError(f"block averaging needs >= {4 * max(block_sizes)} samples, got {n}")
    ses, counts = [], []
    for b in block_sizes:
        nb = n // b
        means = x[: nb * b].reshape(nb, b).mean(axis=1)
        ses.append(float(np.std(means, ddof=1) / math.sqrt(nb)))
        counts.append(nb)
    plateau_b = plateau_se = None
    for k in range(1, len(ses)):
        prev, cur = ses[k - 1], ses[k]
        if prev == 0.0 and cur == 0.0:
            plateau_b, plateau_se = block_sizes[k], 0.0
            break
        if prev > 0 and abs(cur - prev) / prev < plateau_tol:
            plateau_b, plateau_se = block_sizes[k], cur
            break
    return BlockAverage(tuple(block_sizes), tuple(counts), tuple(ses),
                        plateau_b is not None, plateau_b, plateau_se)


@dataclass(frozen=True)
class AutocorrTime:
    tau_int: float
    n_eff: float
    window: int
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {"tau_int": self.tau_int, "n_eff": self.n_eff,
                "window": self.window, "degenerate": self.degenerate}


def autocorrelation(values) -> np.ndarray:
    """Normalised autocorrelation function via zero-padded FFT."""
    x = np.asarray(values, dtype=float)
    x = x - x.mean()
    n = x.size
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    if acov[0] == 0:
        return np.zeros(n)
    return acov / acov[0]


def integrated_autocorr_time(values, c: float = 5.0) -> AutocorrTime:
    """Integrated autocorrelation time in units of samples.

    ``tau(M) = 1 + 2 * sum_{k=1..M} rho(k)``, with the window ``M`` chosen
    self-consistently as the smallest ``M >= c * tau(M)``. A constant series
    is degenerate and reported with ``tau_int = n``.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 100:
        raise UsageError(f"autocorrelation analysis needs >= 100 samples, got {n}")
    if np.all(x == x[0]):
        return AutocorrTime(tau_int=float(n), n_eff=1.0, window=0, degenerate=True)
    rho = autocorrelation(x)
    taus = 1.0 + 2.0 * np.cumsum(rho[1:])
    m = np.arange(1, n)
    ok = m >= c * taus
    if np.any(ok):
        k = int(np.argmax(ok))
    else:
        k = n - 2
    tau = float(taus[k])
    return AutocorrTime(tau_int=tau, n_eff=n / tau, window=int(m[k]))


def convergence_diagnostics(values) -> dict:
    """Block SE and tau_int for a windowed series, skipping what is too short."""
    out = {}
    x = np.asarray(values, dtype=float)
    if x.size >= 4:
        out["block_se"] = block_average_se(x).as_dict()
    else:
        out["block_se"] = None
    out["tau_int"] = integrated_autocorr_time(x).as_dict() if x.size >= 100 else None
    return out
