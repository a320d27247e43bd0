"""Level tracking across heta and location of level crossings.

Levels are followed from one grid column to the next by maximizing the
total squared eigenvector overlap. Because the Floquet operator is an
analytic unitary family in heta, eigenvectors continue smoothly through a
true crossing and the tracked (diabatic) phases pass through each other;
at an avoided crossing they do not. Every candidate is refined locally and
classified by the residual phase gap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .errors import AmbiguousTracking, RefinementBudgetExceeded
from .floquet import FOUR_PI, ModelParams, prefactor_diagonal
from .spectrum import TWO_PI, ButterflyDataset, EVEN, ODD, UNRESOLVED, floquet_spectrum, to_phase
from .su2 import parity_decompose, rotation_x, rotation_y

log = logging.getLogger(__name__)

TAU_TRUE = 1e-10
DEFAULT_MAX_J = 12
# irrational fraction of a step; keeps grid points off rational multiples of pi
GRID_OFFSET = (math.sqrt(5) - 1) / 2

SECTOR_NAMES = {EVEN: "even", ODD: "odd", UNRESOLVED: "unresolved"}


@dataclass
class CrossingRecord:
    heta_star: float
    kind: str
    sector_pair: tuple
    level_ids: tuple
    gap_bound: float
    alpha_independent: Optional[bool] = None

    @property
    def is_true(self) -> bool:
        return self.kind in ("different-parity", "same-parity", "collapse")


def classify_crossing(record: CrossingRecord, tau_true: float = TAU_TRUE) -> str:
    """Kind of a refined record: true crossing iff gap_bound <= tau_true."""
    if record.kind == "collapse":
        return "collapse"
    if record.gap_bound > tau_true:
        return "avoided"
    a, b = record.sector_pair
    if "unresolved" in (a, b):
        return "same-parity"
    return "same-parity" if a == b else "different-parity"


# ---------------------------------------------------------------- tracking


def match_columns(prev: np.ndarray, nxt: np.ndarray, greedy_threshold: float = 0.9):
    """Permutation ``perm`` such that nxt[:, perm[i]] continues prev[:, i].

    Returns (perm, weakest matched overlap).
    """
    ov = np.abs(prev.conj().T @ nxt) ** 2
    n = ov.shape[0]
    perm = ov.argmax(axis=1)
    best = ov[np.arange(n), perm]
    if best.min() > greedy_threshold and len(np.unique(perm)) == n:
        return perm, float(best.min())
    _, perm = linear_sum_assignment(-ov)
    return perm, float(ov[np.arange(n), perm].min())


def _wrap(x):
    return np.mod(x + math.pi, TWO_PI) - math.pi


@dataclass
class LevelTracks:
    """Continuous (unwrapped) phase trajectories on a heta grid.

    ``phases[g, i]`` is level ``i`` at ``grid[g]``; ``parities[i]`` its sector.
    """

    grid: np.ndarray
    phases: np.ndarray
    parities: np.ndarray
    min_overlap: float
    vectors: Optional[np.ndarray] = None


def _track_sector(phases, vectors, min_overlap, refine=None):
    """Follow levels through columns of one sector.

    ``refine(g)`` may return a list of intermediate (phases, vectors)
    columns between g and g+1 to retry a weak match.
    """
    G, n = phases.shape
    out = np.empty((G, n))
    order0 = np.argsort(phases[0], kind="stable")
    cur_v = vectors[0][:, order0]
    out[0] = phases[0][order0]
    tracked_v = np.empty_like(vectors)
    tracked_v[0] = cur_v
    step_overlap = np.ones(max(G - 1, 0))
    for g in range(1, G):
        perm, worst = match_columns(cur_v, vectors[g])
        if worst < min_overlap and refine is not None:
            steps = refine(g - 1)
            v, th = cur_v, out[g - 1]
            worst = 1.0
            for ph_mid, vec_mid in steps + [(phases[g], vectors[g])]:
                p_mid, w = match_columns(v, vec_mid)
                worst = min(worst, w)
                v = vec_mid[:, p_mid]
                th = th + _wrap(ph_mid[p_mid] - th)
            perm = np.array([int(np.argmax(np.abs(v[:, i].conj() @ vectors[g]))) for i in range(n)])
            if len(np.unique(perm)) != n:
                _, perm = linear_sum_assignment(-np.abs(v.conj().T @ vectors[g]) ** 2)
        if worst < min_overlap:
            raise AmbiguousTracking(
                f"overlap {worst:.3f} below {min_overlap} between columns {g - 1} and {g}"
            )
        step_overlap[g - 1] = worst
        cur_v = vectors[g][:, perm]
        tracked_v[g] = cur_v
        out[g] = out[g - 1] + _wrap(phases[g][perm] - out[g - 1])
    return out, tracked_v, step_overlap


def track_levels(
    dataset: ButterflyDataset,
    min_overlap: float = 0.7,
    max_depth: int = 6,
    keep_vectors: bool = False,
) -> LevelTracks:
    """Continuous level curves from a dataset computed with eigenvectors.

    Weakly matched column pairs are bridged by recomputing intermediate
    columns (bisection up to ``max_depth`` levels); if that still fails,
    :class:`AmbiguousTracking` is raised.
    """
    cols = dataset.columns
    if not cols or cols[0].vectors is None:
        raise ValueError("dataset must be computed with want_vectors=True")
    grid = np.asarray(dataset.grid)
    labels = sorted(set(int(x) for x in cols[0].parities), reverse=True)

    def sector_arrays(col, lab):
        mask = col.parities == lab
        return col.phases[mask], col.vectors[:, mask]

    phases_out, par_out, vec_out = [], [], []
    weakest = 1.0
    for lab in labels:
        ph = np.array([sector_arrays(c, lab)[0] for c in cols])
        vec = np.array([sector_arrays(c, lab)[1] for c in cols])

        def refine(g, lab=lab):
            return _bridge(dataset.params, grid[g], grid[g + 1], lab, vec[g], min_overlap, max_depth)

        th, tv, w = _track_sector(ph, vec, min_overlap, refine)
        weakest = min(weakest, float(w.min(initial=1.0)))
        phases_out.append(th)
        par_out.extend([lab] * th.shape[1])
        vec_out.append(tv)
    return LevelTracks(
        grid=grid,
        phases=np.concatenate(phases_out, axis=1),
        parities=np.array(par_out, dtype=np.int8),
        min_overlap=weakest,
        vectors=np.concatenate(vec_out, axis=2) if keep_vectors else None,
    )


def _bridge(params, h0, h1, lab, v0, min_overlap, max_depth):
    """Intermediate columns between h0 and h1 dense enough for clean matching."""
    def column(h):
        s = floquet_spectrum(params.with_heta(h), want_vectors=True)
        mask = s.parities == lab
        return s.phases[mask], s.vectors[:, mask]

    pts = [h0, h1]
    cols = {h1: column(h1)}
    for _ in range(max_depth):
        ok = True
        new_pts = [pts[0]]
        v = v0
        for a, b in zip(pts[:-1], pts[1:]):
            _, w = match_columns(v, cols[b][1])
            if w < min_overlap:
                ok = False
                mid = 0.5 * (a + b)
                cols[mid] = column(mid)
                new_pts.append(mid)
            new_pts.append(b)
            v = cols[b][1]
        pts = new_pts
        if ok:
            break
    return [cols[h] for h in pts[1:-1]]


# ---------------------------------------------------------------- sweeps


class SectorSweep:
    """Batched sector-resolved diagonalization on a heta grid, with tracking.

    Grid steps across which some level's eigenvector overlap drops below
    ``min_overlap`` are bisected (all sectors together, so pairs share one
    grid) until every step is clean or ``max_depth`` bisections were spent
    on it. Narrow avoided crossings are thereby followed adiabatically.
    """

    def __init__(self, params: ModelParams, grid, min_overlap: float = 0.8, max_depth: int = 24):
        self.params = params
        basis = params.basis
        self._m2 = basis.m_values**2
        self._R = rotation_x(basis, params.alpha)
        self._last = self._R if params.variant == "XX" else rotation_y(basis, params.alpha)
        self._pre = prefactor_diagonal(basis, params.prefactor)
        if params.variant == "XX":
            d = parity_decompose(basis)
            self.sectors = {EVEN: d.even, ODD: d.odd}
        else:
            self.sectors = {UNRESOLVED: np.eye(basis.dim)}

        hs = np.asarray(grid, dtype=float)
        raw = {lab: _batched_eig(self._sector_matrices(hs, B)) for lab, B in self.sectors.items()}
        depth = np.zeros(len(hs), dtype=int)  # bisection depth of the step starting at each point
        while True:
            tracked = {lab: _track_sector(ph, vec, 0.0) for lab, (ph, vec) in raw.items()}
            worst = np.min([t[2] for t in tracked.values()], axis=0) if len(hs) > 1 else np.ones(0)
            weak = np.nonzero((worst < min_overlap) & (depth[:-1] < max_depth))[0]
            if len(weak) == 0:
                break
            mids = 0.5 * (hs[weak] + hs[weak + 1])
            new_depth = depth[weak] + 1
            depth[weak] = new_depth
            hs = np.insert(hs, weak + 1, mids)
            depth = np.insert(depth, weak + 1, new_depth)
            for lab, B in self.sectors.items():
                ph_new, vec_new = _batched_eig(self._sector_matrices(mids, B))
                ph, vec = raw[lab]
                raw[lab] = (np.insert(ph, weak + 1, ph_new, axis=0), np.insert(vec, weak + 1, vec_new, axis=0))
        self.grid = hs
        self.phases = {lab: t[0] for lab, t in tracked.items()}
        self.vectors = {lab: t[1] for lab, t in tracked.items()}
        self.step_overlap = worst
        self.min_overlap = float(worst.min(initial=1.0))

    def _sector_matrices(self, hs, B):
        t = np.exp(0.5j * np.outer(hs, self._m2))
        A = (t[:, :, None] * self._R[None]) * t.conj()[:, None, :]
        F = A @ self._last
        if self._pre is not None:
            F = self._pre[None, :, None] * F
        return np.einsum("ji,gjk,kl->gil", B, F, B, optimize=True)

    def eig_at(self, h: float, lab: int):
        mats = self._sector_matrices(np.array([h]), self.sectors[lab])
        ph, vec = _batched_eig(mats)
        return ph[0], vec[0]


def _batched_eig(mats):
    w, V = np.linalg.eig(mats)
    # eig vectors are unit-norm but need not be orthogonal inside
    # near-degenerate clusters; redo those columns with a Schur form
    gram = np.einsum("gki,gkj->gij", V.conj(), V)
    n = mats.shape[-1]
    bad = np.abs(gram - np.eye(n)).reshape(len(mats), -1).max(axis=1) > 1e-8
    for g in np.nonzero(bad)[0]:
        T, Z = scipy.linalg.schur(mats[g], output="complex")
        w[g] = np.diag(T)
        V[g] = Z
    return to_phase(w), V


# ---------------------------------------------------------------- pairs


class _PairProbe:
    """Evaluates the signed phase difference of two tracked levels off-grid."""

    def __init__(self, sweep: SectorSweep, la, i, lb, j, g, multiple):
        self.sweep = sweep
        self.la, self.i, self.lb, self.j = la, i, lb, j
        self.h_ref = sweep.grid[g]
        self.va = sweep.vectors[la][g][:, i]
        self.vb = sweep.vectors[lb][g][:, j]
        self.ta = sweep.phases[la][g, i]
        self.tb = sweep.phases[lb][g, j]
        self.target = TWO_PI * multiple
        self.calls = 0
        self._cache = {}

    def _level(self, h, lab, v_ref, t_ref):
        key = (h, lab)
        if key not in self._cache:
            self._cache[key] = self.sweep.eig_at(h, lab)
            self.calls += 1
        ph, vec = self._cache[key]
        k = int(np.argmax(np.abs(v_ref.conj() @ vec)))
        return t_ref + _wrap(ph[k] - t_ref), vec[:, k]

    def __call__(self, h):
        if self.la == self.lb and self.i != self.j:
            # same sector: both levels from one diagonalization, assigned jointly
            key = (h, self.la)
            if key not in self._cache:
                self._cache[key] = self.sweep.eig_at(h, self.la)
                self.calls += 1
            ph, vec = self._cache[key]
            ov = np.abs(np.stack([self.va, self.vb]).conj() @ vec) ** 2
            _, cols = linear_sum_assignment(-ov)
            a = self.ta + _wrap(ph[cols[0]] - self.ta)
            b = self.tb + _wrap(ph[cols[1]] - self.tb)
        else:
            a, _ = self._level(h, self.la, self.va, self.ta)
            b, _ = self._level(h, self.lb, self.vb, self.tb)
        return a - b - self.target


def _bisect(probe: _PairProbe, lo, hi, g_lo, g_hi, tol_gap=1e-13, max_steps=60):
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = probe(mid)
        if abs(g_mid) <= tol_gap:
            return mid, abs(g_mid)
        if (g_mid < 0) == (g_lo < 0):
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    if abs(g_lo) <= abs(g_hi):
        return lo, abs(g_lo)
    return hi, abs(g_hi)


@dataclass
class CrossingSearch:
    """Result of :func:`find_crossings` with bookkeeping."""

    records: list
    grid_size: int
    min_overlap: float
    refinements: int
    params: ModelParams = None

    def count(self, kind: str) -> int:
        return sum(1 for r in self.records if r.kind == kind)


def _pairs(sweep: SectorSweep, selection: str):
    labs = list(sweep.sectors)
    n = {lab: sweep.phases[lab].shape[1] for lab in labs}
    out = []
    want_same = selection in ("all", "same", "even", "odd", "unresolved")
    want_diff = selection in ("all", "different")
    for a_idx, la in enumerate(labs):
        for lb in labs[a_idx:]:
            same = la == lb
            if same and not want_same:
                continue
            if not same and not want_diff:
                continue
            if selection in ("even", "odd") and not (same and SECTOR_NAMES[la] == selection):
                continue
            for i in range(n[la]):
                for j in range(i + 1 if same else 0, n[lb]):
                    out.append((la, i, lb, j))
    return out


def find_crossings(
    template: ModelParams,
    J=None,
    sector: str = "all",
    heta_range=(0.0, FOUR_PI),
    density: float = 10.0,
    tau_true: float = TAU_TRUE,
    report_gap: float = 1e-4,
    max_j: float = DEFAULT_MAX_J,
    max_refinements: int = 200_000,
    grid_size: Optional[int] = None,
) -> CrossingSearch:
    """Locate level crossings of the Floquet operator over a heta range.

    ``sector`` selects pairs: "all", "different" (even-odd), "same" (both
    same-parity sectors), "even", "odd", or "unresolved" for the XY variant.
    The initial grid spacing is 4 pi / (density * J^3). Sign changes of the
    tracked phase differences are bisected; local minima of the difference
    are refined by bounded minimization, which also exposes pairs of
    crossings hidden inside one grid step. The all-level collapse at
    heta = 2 pi for integer J is returned as one record of kind "collapse".
    """
    p = template if J is None else ModelParams(J, template.alpha_scaled, template.heta, template.variant, template.prefactor)
    if p.J > max_j:
        raise ValueError(f"J={p.J} exceeds the configured maximum {max_j}")
    if p.variant == "XY" and sector not in ("all", "unresolved", "same"):
        raise ValueError("XY variant has no parity sectors")
    lo, hi = heta_range
    G = grid_size or max(64, int(math.ceil(density * p.J**3 * (hi - lo) / FOUR_PI)))
    step = (hi - lo) / G
    grid = lo + (np.arange(G) + GRID_OFFSET) * step
    sweep = SectorSweep(p, grid)
    grid = sweep.grid

    records = []
    budget = [max_refinements]

    def spend(probe):
        budget[0] -= probe.calls
        if budget[0] < 0:
            raise RefinementBudgetExceeded("refinement budget exhausted", partial=list(records))

    for la, i, lb, j in _pairs(sweep, sector):
        f = sweep.phases[la][:, i] - sweep.phases[lb][:, j]
        sector_pair = (SECTOR_NAMES[la], SECTOR_NAMES[lb])
        cnt = np.floor(f / TWO_PI)
        events = np.nonzero(np.diff(cnt))[0]
        for g in events:
            jumps = int(cnt[g + 1] - cnt[g])
            multiples = range(int(cnt[g]) + 1, int(cnt[g + 1]) + 1) if jumps > 0 else range(int(cnt[g]), int(cnt[g + 1]), -1)
            for mult in multiples:
                probe = _PairProbe(sweep, la, i, lb, j, g, mult)
                g_lo = f[g] - TWO_PI * mult
                g_hi = f[g + 1] - TWO_PI * mult
                h_star, gap = _bisect(probe, grid[g], grid[g + 1], g_lo, g_hi)
                spend(probe)
                rec = CrossingRecord(h_star, "", sector_pair, (i, j), gap)
                rec.kind = classify_crossing(rec, tau_true)
                if rec.kind != "avoided" or gap <= report_gap:
                    records.append(rec)

        # local minima of the distance to the nearest multiple without a sign change
        s = f - TWO_PI * np.round(f / TWO_PI)
        a = np.abs(s)
        k = np.nonzero((a[1:-1] <= a[:-2]) & (a[1:-1] <= a[2:]))[0] + 1
        if len(k) == 0:
            continue
        same_sign = (np.sign(s[k - 1]) == np.sign(s[k])) & (np.sign(s[k + 1]) == np.sign(s[k]))
        k = k[same_sign]
        local = np.maximum(np.abs(s[k - 1] - s[k]), np.abs(s[k + 1] - s[k]))
        k = k[(a[k] <= 4 * local) | (a[k] <= report_gap)]
        for g in k:
            mult = int(np.round(f[g] / TWO_PI))
            probe = _PairProbe(sweep, la, i, lb, j, g, mult)
            sgn = 1.0 if s[g] > 0 else -1.0
            res = minimize_scalar(
                lambda h: sgn * probe(h),
                bounds=(grid[g - 1], grid[g + 1]),
                method="bounded",
                options={"xatol": 1e-14},
            )
            h_min, v_min = float(res.x), sgn * float(res.fun)
            if sgn * v_min < 0:
                # dipped through zero: two crossings inside the bracket
                for a_end, b_end in ((grid[g - 1], h_min), (h_min, grid[g + 1])):
                    h_star, gap = _bisect(probe, a_end, b_end, probe(a_end), probe(b_end))
                    rec = CrossingRecord(h_star, "", sector_pair, (i, j), gap)
                    rec.kind = classify_crossing(rec, tau_true)
                    records.append(rec)
            elif abs(v_min) <= report_gap:
                rec = CrossingRecord(h_min, "", sector_pair, (i, j), abs(v_min))
                rec.kind = classify_crossing(rec, tau_true)
                records.append(rec)
            spend(probe)

    records = _collapse_and_dedupe(records, p, hi - lo)
    return CrossingSearch(records, G, sweep.min_overlap, max_refinements - budget[0], p)


def _collapse_and_dedupe(records, p: ModelParams, span, tol=1e-9):
    out = []
    collapse = []
    for r in records:
        if p.basis.is_integer and p.variant == "XX" and p.prefactor is None and abs(r.heta_star - math.pi * 2) <= 1e-7 and r.is_true:
            collapse.append(r)
        else:
            out.append(r)
    # per pair, drop duplicates closer than tol in heta
    out.sort(key=lambda r: (r.sector_pair, r.level_ids, r.heta_star))
    deduped = []
    for r in out:
        prev = deduped[-1] if deduped else None
        if (
            prev is not None
            and prev.sector_pair == r.sector_pair
            and prev.level_ids == r.level_ids
            and abs(prev.heta_star - r.heta_star) < tol
        ):
            if r.gap_bound < prev.gap_bound:
                deduped[-1] = r
            continue
        deduped.append(r)
    if collapse:
        gap = max(c.gap_bound for c in collapse)
        pairs = sorted({c.sector_pair for c in collapse})
        deduped.append(
            CrossingRecord(2 * math.pi, "collapse", tuple(pairs[0]) if len(pairs) == 1 else ("all", "all"), (), gap)
        )
    deduped.sort(key=lambda r: (r.heta_star, r.sector_pair, r.level_ids))
    return deduped


def reproduce_gap(p: ModelParams, record: CrossingRecord) -> float:
    """Smallest circular distance between two phases at heta_star (within the record's sectors)."""
    s = floquet_spectrum(p.with_heta(record.heta_star))
    names = {v: k for k, v in SECTOR_NAMES.items()}
    a_lab, b_lab = (names.get(x, None) for x in record.sector_pair)
    if a_lab is None or b_lab is None or p.variant == "XY":
        e = np.sort(s.phases)
        d = np.diff(np.concatenate([e, [e[0] + TWO_PI]]))
        return float(d.min())
    A, B = s.sector(a_lab), s.sector(b_lab)
    D = np.abs(A[:, None] - B[None, :]) % TWO_PI
    D = np.minimum(D, TWO_PI - D)
    if a_lab == b_lab:
        D[np.arange(len(A)), np.arange(len(A))] = np.inf
    return float(D.min())


# ---------------------------------------------------------------- scaling


@dataclass
class ScalingFit:
    exponent: float
    stderr: float
    prefactor: float
    J_values: np.ndarray
    counts: np.ndarray


def scaling_fit(J_values: Sequence[float], counts: Sequence[float]) -> ScalingFit:
    """Least-squares power law count ~ C * J^exponent in log-log space."""
    J_values = np.asarray(J_values, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if len(np.unique(J_values)) < 5:
        raise ValueError("need counts for at least five distinct J values")
    if np.any(counts <= 0):
        raise ValueError("counts must be positive for a log-log fit")
    x, y = np.log(J_values), np.log(counts)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = len(x) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else 0.0
    return ScalingFit(float(coef[0]), stderr, float(math.exp(coef[1])), J_values, counts)


def crossing_counts(alpha_scaled: float, J: float, density: float = 10.0, variant: str = "XX") -> dict:
    """Numbers of true crossings by kind over heta in [0, 4pi), collapse excluded."""
    search = find_crossings(ModelParams(J, alpha_scaled, variant=variant), density=density)
    return {
        "different-parity": search.count("different-parity"),
        "same-parity": search.count("same-parity"),
        "avoided": search.count("avoided"),
        "collapse": search.count("collapse"),
        "min_avoided_gap": min((r.gap_bound for r in search.records if r.kind == "avoided"), default=math.inf),
    }
