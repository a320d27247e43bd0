"""Eigenphases of unitary operators and heta sweeps ("butterfly" datasets).

Eigenphase convention: U|psi> = exp(-i eps)|psi>, eps folded to [0, 2pi).
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from . import __version__
from .errors import ConvergenceFailure
from .floquet import FOUR_PI, ModelParams, build_floquet, fold_heta, parity_blocks
from .su2 import parity_decompose

log = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
RESIDUAL_BOUND = 1e-11

EVEN, ODD, UNRESOLVED = 1, -1, 0


@dataclass
class EigenphaseSet:
    """Sorted eigenphases with parity labels and optional eigenvectors.

    ``vectors[:, k]`` is the eigenvector of ``phases[k]`` in the |m> basis.
    """

    phases: np.ndarray
    parities: np.ndarray
    vectors: Optional[np.ndarray] = None
    residual: float = 0.0

    def __len__(self):
        return len(self.phases)

    def sector(self, parity: int) -> np.ndarray:
        return self.phases[self.parities == parity]


def to_phase(eigenvalues: np.ndarray) -> np.ndarray:
    eps = np.mod(-np.angle(eigenvalues), TWO_PI)
    eps[eps >= TWO_PI] = 0.0
    return eps


def circular_distance(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b)) % TWO_PI
    return np.minimum(d, TWO_PI - d)


def _diagonalize(U: np.ndarray):
    # Complex Schur form of a normal matrix is diagonal with a unitary Z,
    # which keeps eigenvectors orthonormal inside degenerate clusters.
    T, Z = scipy.linalg.schur(U, output="complex")
    return np.diag(T).copy(), Z


def eigenphases(U: np.ndarray, want_vectors: bool = False, parity: int = UNRESOLVED) -> EigenphaseSet:
    """Full eigen-decomposition of a unitary matrix.

    Raises :class:`ConvergenceFailure` if max_k |U v_k - lambda_k v_k|
    exceeds 1e-11.
    """
    U = np.asarray(U, dtype=complex)
    lam, Z = _diagonalize(U)
    residual = float(np.abs(U @ Z - Z * lam).max(initial=0.0))
    if residual > RESIDUAL_BOUND:
        raise ConvergenceFailure(f"eigen residual {residual:.3e} exceeds {RESIDUAL_BOUND:.0e}")
    eps = to_phase(lam)
    order = np.argsort(eps, kind="stable")
    return EigenphaseSet(
        phases=eps[order],
        parities=np.full(len(eps), parity, dtype=np.int8),
        vectors=Z[:, order] if want_vectors else None,
        residual=residual,
    )


def merge_sets(parts: Sequence[EigenphaseSet], want_vectors: bool) -> EigenphaseSet:
    phases = np.concatenate([p.phases for p in parts])
    parities = np.concatenate([p.parities for p in parts])
    order = np.argsort(phases, kind="stable")
    vectors = None
    if want_vectors:
        vectors = np.concatenate([p.vectors for p in parts], axis=1)[:, order]
    return EigenphaseSet(
        phases=phases[order],
        parities=parities[order],
        vectors=vectors,
        residual=max(p.residual for p in parts),
    )


def floquet_spectrum(p: ModelParams, want_vectors: bool = False) -> EigenphaseSet:
    """Spectrum of build_floquet(p); split by parity for the XX variant."""
    F = build_floquet(p)
    if p.variant == "XY":
        return eigenphases(F, want_vectors)
    d = parity_decompose(p.basis)
    even, odd = parity_blocks(F, d)
    parts = [eigenphases(even, want_vectors, EVEN), eigenphases(odd, want_vectors, ODD)]
    if want_vectors:
        parts[0].vectors = d.even @ parts[0].vectors
        parts[1].vectors = d.odd @ parts[1].vectors
    return merge_sets(parts, want_vectors)


def params_hash(p: ModelParams) -> str:
    return hashlib.sha256(repr(p).encode()).hexdigest()[:16]


@dataclass
class ButterflyDataset:
    params: ModelParams
    grid: np.ndarray
    columns: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def phase_matrix(self) -> np.ndarray:
        return np.array([c.phases for c in self.columns])

    def parity_matrix(self) -> np.ndarray:
        return np.array([c.parities for c in self.columns])


def fold_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    folded = np.array([fold_heta(h) for h in grid])
    if np.any(folded != grid):
        log.warning("folded %d heta values into [0, 4pi)", int(np.sum(folded != grid)))
    return folded


def uniform_grid(steps: int, lo: float = 0.0, hi: float = FOUR_PI) -> np.ndarray:
    """``steps`` points on [lo, hi), endpoint excluded."""
    return lo + (hi - lo) * np.arange(steps) / steps


def butterfly_scan(
    template: ModelParams,
    grid,
    want_vectors: bool = False,
    workers: Optional[int] = None,
) -> ButterflyDataset:
    """Diagonalize the Floquet operator at every heta in ``grid``."""
    grid = fold_grid(grid)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing after folding into [0, 4pi)")

    def column(h):
        try:
            return floquet_spectrum(template.with_heta(float(h)), want_vectors)
        except ConvergenceFailure as exc:
            raise ConvergenceFailure(f"at heta={h!r}: {exc}") from exc

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(column, grid))
    else:
        columns = [column(h) for h in grid]
    return ButterflyDataset(
        params=template,
        grid=grid,
        columns=columns,
        provenance={"params_hash": params_hash(template), "engine": __version__},
    )


def multiset_distance(a, b) -> float:
    """Smallest achievable max circular distance pairing sorted a with sorted b.

    Both inputs are treated as points on the circle; cyclic shifts of the
    sorted order are tried so sets straddling 0 pair correctly.
    """
    a = np.sort(np.mod(a, TWO_PI))
    b = np.sort(np.mod(b, TWO_PI))
    if a.shape != b.shape:
        raise ValueError("multisets differ in size")
    n = len(a)
    if n == 0:
        return 0.0
    idx = (np.arange(n)[None, :] + np.arange(n)[:, None]) % n
    d = circular_distance(a[None, :], b[idx])
    return float(d.max(axis=1).min())


def arc_spread(phases) -> float:
    """Length of the shortest arc containing all phases."""
    e = np.sort(np.mod(phases, TWO_PI))
    if len(e) < 2:
        return 0.0
    gaps = np.diff(np.concatenate([e, [e[0] + TWO_PI]]))
    return float(TWO_PI - gaps.max())


@dataclass
class SymmetryReport:
    mode: str
    passed: bool
    max_deviation: float
    details: dict = field(default_factory=dict)


def symmetry_check(
    p: ModelParams,
    mode: str,
    hetas: Optional[Sequence[float]] = None,
    tol: float = 1e-10,
) -> SymmetryReport:
    """Check one of the exact spectral symmetries.

    periodicity: spectrum(h) == spectrum(h + 4pi)
    reflection:  spectrum(h) == spectrum(4pi - h)
    collapse:    spectrum at h = 2pi is a single point (expected iff J is integer)
    """
    if mode == "collapse":
        s = floquet_spectrum(p.with_heta(TWO_PI))
        spread = arc_spread(s.phases)
        return SymmetryReport(mode, spread <= tol, spread, {"J": p.J, "spread": spread})
    if mode not in ("periodicity", "reflection"):
        raise ValueError(f"unknown symmetry mode {mode!r}")
    hetas = [p.heta] if hetas is None else list(hetas)
    deviations = []
    for h in hetas:
        partner = h + FOUR_PI if mode == "periodicity" else FOUR_PI - h
        a = floquet_spectrum(p.with_heta(h)).phases
        b = floquet_spectrum(p.with_heta(partner)).phases
        deviations.append(multiset_distance(a, b))
    worst = max(deviations)
    return SymmetryReport(mode, worst <= tol, worst, {"hetas": hetas, "deviations": deviations})
