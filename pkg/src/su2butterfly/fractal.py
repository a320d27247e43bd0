"""Level statistics of eigenphase sets: cumulative density, histograms, D_q.

The generalized dimensions use a box-counting estimator on dyadic
partitions. By default the partition spans the occupied arc of the circle
(the complement of the single largest gap between neighbouring phases),
because at small alpha*J the spectrum fills only part of [0, 2pi) and a
full-circle partition adds an edge effect to every scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyWindow, InsufficientLevels
from .spectrum import EVEN, ODD, TWO_PI, EigenphaseSet

MIN_LEVELS = 64
DEFAULT_Q = tuple(np.round(np.arange(-5.0, 5.0001, 0.25), 10))


@dataclass
class CumulativeDensity:
    """Staircase N(eps): number of phases <= eps."""

    phases: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return len(self.phases)

    @property
    def normalized(self) -> np.ndarray:
        return self.counts / self.total

    def __call__(self, eps, normalized: bool = False):
        n = np.searchsorted(self.phases, eps, side="right")
        return n / self.total if normalized else n


def cumulative_density(phases) -> CumulativeDensity:
    e = np.sort(np.mod(np.asarray(phases, dtype=float), TWO_PI))
    if len(e) == 0:
        raise ValueError("cumulative density of an empty phase set")
    # step heights at coincident phases collapse onto the last duplicate
    counts = np.searchsorted(e, e, side="right")
    return CumulativeDensity(e, counts)


def circular_gaps(phases) -> np.ndarray:
    """Gaps between circular neighbours; the last one wraps through 2pi."""
    e = np.sort(np.mod(phases, TWO_PI))
    return np.diff(np.concatenate([e, [e[0] + TWO_PI]]))


def support_arc(phases):
    """(start, width) of the shortest arc holding every phase."""
    e = np.sort(np.mod(phases, TWO_PI))
    gaps = circular_gaps(e)
    k = int(np.argmax(gaps))
    start = e[(k + 1) % len(e)]
    return float(start), float(TWO_PI - gaps[k])


def max_gap_ratio(phases) -> float:
    """Largest internal gap over the mean spacing, both inside the occupied arc.

    A ratio near 1 means evenly spread levels; a large value means a
    plateau in the cumulative density.
    """
    gaps = np.sort(circular_gaps(phases))
    n = len(gaps)
    if n < 3:
        return 1.0
    inner = gaps[:-1]
    mean = inner.sum() / (n - 1)
    return float(inner.max() / mean) if mean > 0 else math.inf


def density_histogram(phases, window=(0.0, TWO_PI), bins: int = 64):
    """Counts of phases in ``bins`` equal bins over ``window``; returns (counts, edges)."""
    lo, hi = window
    if not 0 <= lo < hi <= TWO_PI:
        raise ValueError(f"window {window} not inside [0, 2pi)")
    if bins < 2:
        raise ValueError("need at least two bins")
    e = np.mod(np.asarray(phases, dtype=float), TWO_PI)
    e = e[(e >= lo) & (e <= hi)]
    if len(e) == 0:
        raise EmptyWindow(f"no phases in [{lo}, {hi}]")
    return np.histogram(e, bins=bins, range=(lo, hi))


def nested_windows(center: float, width: float, ratios: Sequence[float] = (1, 1 / 8, 1 / 64)):
    """Windows sharing a centre, each ``ratio`` times the outer width."""
    out = []
    for r in ratios:
        half = 0.5 * width * r
        out.append((max(0.0, center - half), min(TWO_PI, center + half)))
    return out


@dataclass
class DqCurve:
    q_values: np.ndarray
    D_q: np.ndarray
    fit_scales: np.ndarray
    fit_r2: np.ndarray
    fit_stderr: np.ndarray
    n_levels: int
    domain: tuple = field(default=(0.0, TWO_PI))

    def at(self, q: float) -> float:
        k = int(np.argmin(np.abs(self.q_values - q)))
        if abs(self.q_values[k] - q) > 1e-9:
            raise KeyError(f"q={q} not in curve")
        return float(self.D_q[k])


def _box_scales(n_levels: int, min_boxes: int = 4, coarse: int = 8) -> np.ndarray:
    scales = []
    M = min_boxes
    while M <= n_levels / coarse:
        scales.append(M)
        M *= 2
    return np.array(scales, dtype=int)


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = coef[0]
    fitted = A @ coef
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = len(x) - 2
    if dof > 0:
        sxx = float(np.sum((x - x.mean()) ** 2))
        stderr = math.sqrt(ss_res / dof / sxx)
    else:
        stderr = 0.0
    return slope, r2, stderr


def dq_spectrum(
    phases,
    q_values: Iterable[float] = DEFAULT_Q,
    scale_range: Optional[Sequence[int]] = None,
    domain: str = "support",
) -> DqCurve:
    """Generalized dimensions D_q by dyadic box counting.

    ``scale_range`` lists box counts M; by default every power of two with
    4 <= M <= N/8. ``domain`` is "support" (partition the occupied arc) or
    "circle" (partition the whole of [0, 2pi)).
    """
    e = np.mod(np.asarray(phases, dtype=float), TWO_PI)
    n = len(e)
    if n < MIN_LEVELS:
        raise InsufficientLevels(f"{n} levels, need at least {MIN_LEVELS}")
    if domain == "support":
        start, width = support_arc(e)
    elif domain == "circle":
        start, width = 0.0, TWO_PI
    else:
        raise ValueError(f"unknown domain {domain!r}")
    q_values = np.asarray(list(q_values), dtype=float)
    scales = np.asarray(scale_range if scale_range is not None else _box_scales(n), dtype=int)
    if len(scales) < 2:
        raise InsufficientLevels(f"{n} levels give fewer than two usable box scales")

    if width <= 0:
        # point support: every box count sees a single occupied box
        x = np.zeros(n)
    else:
        x = np.mod(e - start, TWO_PI) / width
    log_m = np.log(scales.astype(float))
    probs = []
    for M in scales:
        idx = np.minimum((x * M).astype(np.int64), M - 1)
        c = np.bincount(idx, minlength=M)
        probs.append(c[c > 0] / n)

    dq, r2, se = [], [], []
    for q in q_values:
        if abs(q - 1) < 1e-12:
            y = np.array([np.sum(p * np.log(p)) for p in probs])
            scale = -1.0
        else:
            y = np.array([math.log(np.sum(p**q)) for p in probs])
            scale = -1.0 / (q - 1)
        slope, fit_r2, stderr = _linfit(log_m, y)
        dq.append(scale * slope)
        r2.append(fit_r2)
        se.append(abs(scale) * stderr)
    return DqCurve(
        q_values=q_values,
        D_q=np.array(dq),
        fit_scales=scales,
        fit_r2=np.array(r2),
        fit_stderr=np.array(se),
        n_levels=n,
        domain=(start, width),
    )


def sector_dq(
    spectrum: EigenphaseSet,
    q_values: Iterable[float] = DEFAULT_Q,
    combined: bool = False,
    **kwargs,
) -> dict:
    """D_q per parity sector ("even", "odd"), or of the whole set ("all")."""
    q_values = list(q_values)
    if combined or not np.any(spectrum.parities != 0):
        return {"all": dq_spectrum(spectrum.phases, q_values, **kwargs)}
    return {
        "even": dq_spectrum(spectrum.sector(EVEN), q_values, **kwargs),
        "odd": dq_spectrum(spectrum.sector(ODD), q_values, **kwargs),
    }
