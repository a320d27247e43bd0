"""Mean-field limit of the Floquet maps on the unit sphere.

With x = J_x/J, y = J_y/J, z = J_z/J and J -> infinity at fixed alpha and
eta, exp(-i alpha J_x) rotates the vector about x by alpha, and the torsion
exp(-+i eta J_z^2/2J) rotates it about z by an angle proportional to eta*z.
Factors are applied in the same right-to-left order as the quantum product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .floquet import ModelParams, build_floquet
from .su2 import SpinBasis, coherent_state, spin_expectation

# Fixed by correspondence_check against the quantum evolution (see tests).
DEFAULT_TORSION_SIGN = -1

SECTION_GRID = 50


@dataclass(frozen=True)
class SphereState:
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.x**2 + self.y**2 + self.z**2)
        if not math.isfinite(n) or abs(n - 1.0) > 1e-9:
            raise ValueError(f"state not on the unit sphere (|s| = {n})")

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> "SphereState":
        st = math.sin(theta)
        return cls(st * math.cos(phi), st * math.sin(phi), math.cos(theta))

    @classmethod
    def from_array(cls, v) -> "SphereState":
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class ClassicalParams:
    """``alpha`` and ``eta`` are the unscaled angle and torsion strength."""

    alpha: float
    eta: float
    torsion_sign: int = DEFAULT_TORSION_SIGN
    variant: str = "XX"

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.eta)):
            raise ValueError("alpha and eta must be finite")
        if self.torsion_sign not in (1, -1):
            raise ValueError("torsion_sign must be +1 or -1")
        if self.variant not in ("XX", "XY"):
            raise ValueError(f"unknown variant {self.variant!r}")


def _rot_x(v, a):
    c, s = math.cos(a), math.sin(a)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    return np.stack([x, c * y - s * z, s * y + c * z], axis=-1)


def _rot_y(v, a):
    c, s = math.cos(a), math.sin(a)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    return np.stack([c * x + s * z, y, -s * x + c * z], axis=-1)


def _torsion(v, angle_per_z):
    # rotation about z by angle_per_z * z; z itself is unchanged
    a = angle_per_z * v[..., 2]
    c, s = np.cos(a), np.sin(a)
    x, y = v[..., 0], v[..., 1]
    return np.stack([c * x - s * y, s * x + c * y, v[..., 2]], axis=-1)


def map_vectors(v: np.ndarray, p: ClassicalParams) -> np.ndarray:
    """One period applied to an array of unit vectors (shape (..., 3))."""
    v = np.asarray(v, dtype=float)
    v = _rot_y(v, p.alpha) if p.variant == "XY" else _rot_x(v, p.alpha)
    v = _torsion(v, -p.torsion_sign * p.eta)
    v = _rot_x(v, p.alpha)
    v = _torsion(v, p.torsion_sign * p.eta)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def classical_map_step(s: SphereState, p: ClassicalParams) -> SphereState:
    return SphereState.from_array(map_vectors(s.as_array(), p))


@numba.njit(cache=True)
def _orbit_kernel(v0, alpha, eta, sign, xy, n_steps, out):
    ca, sa = math.cos(alpha), math.sin(alpha)
    x, y, z = v0[0], v0[1], v0[2]
    for k in range(n_steps):
        if xy:
            x, z = ca * x + sa * z, -sa * x + ca * z
        else:
            y, z = ca * y - sa * z, sa * y + ca * z
        a = -sign * eta * z
        c, s = math.cos(a), math.sin(a)
        x, y = c * x - s * y, s * x + c * y
        y, z = ca * y - sa * z, sa * y + ca * z
        a = sign * eta * z
        c, s = math.cos(a), math.sin(a)
        x, y = c * x - s * y, s * x + c * y
        n = math.sqrt(x * x + y * y + z * z)
        x, y, z = x / n, y / n, z / n
        out[k, 0] = x
        out[k, 1] = y
        out[k, 2] = z


def orbit(seed, p: ClassicalParams, n_steps: int) -> np.ndarray:
    """Iterates 1..n_steps of ``seed`` as an (n_steps, 3) array."""
    v0 = seed.as_array() if isinstance(seed, SphereState) else np.asarray(seed, dtype=float)
    out = np.empty((int(n_steps), 3))
    _orbit_kernel(v0, float(p.alpha), float(p.eta), float(p.torsion_sign), p.variant == "XY", int(n_steps), out)
    return out


def random_seeds(n: int, rng_seed: int = 0) -> list:
    """``n`` points uniform on the sphere from a seeded generator."""
    rng = np.random.default_rng(rng_seed)
    v = rng.normal(size=(n, 3))
    return [SphereState.from_array(r) for r in v]


@dataclass
class PoincareSection:
    """(y, z) of the iterates with x > 0, one array per seed."""

    seeds: list
    points: list
    params: ClassicalParams
    n_steps: int
    rng_seed: Optional[int] = None

    def occupied_fractions(self, grid: int = SECTION_GRID) -> np.ndarray:
        return np.array([occupied_cell_fraction(pts, grid) for pts in self.points])


def poincare_section(
    seeds: Sequence[SphereState],
    p: ClassicalParams,
    n_steps: int,
    rng_seed: Optional[int] = None,
) -> PoincareSection:
    points = []
    for s in seeds:
        o = orbit(s, p, n_steps)
        keep = o[:, 0] > 0
        points.append(o[keep][:, 1:].copy())
    return PoincareSection(list(seeds), points, p, int(n_steps), rng_seed)


def _disk_cells(grid: int) -> np.ndarray:
    c = -1 + (np.arange(grid) + 0.5) * 2 / grid
    return (c[:, None] ** 2 + c[None, :] ** 2) <= 1.0


def occupied_cell_fraction(points: np.ndarray, grid: int = SECTION_GRID) -> float:
    """Fraction of the grid cells inside the unit (y, z) disk that hold a point.

    A cell belongs to the disk when its centre does; points falling in
    rim cells outside that set are ignored.
    """
    inside = _disk_cells(grid)
    if len(points) == 0:
        return 0.0
    idx = np.clip(((np.asarray(points) + 1) * grid / 2).astype(int), 0, grid - 1)
    hit = np.zeros((grid, grid), dtype=bool)
    hit[idx[:, 0], idx[:, 1]] = True
    return float(np.sum(hit & inside) / np.sum(inside))


@numba.njit(cache=True)
def _lyapunov_kernel(v0, alpha, eta, sign, xy, n_steps, d0):
    ca, sa = math.cos(alpha), math.sin(alpha)
    a = np.empty(3)
    b = np.empty(3)
    a[:] = v0
    # displaced partner, tangent to the sphere
    t = np.array([1.0, 0.0, 0.0]) if abs(v0[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t = t - np.dot(t, v0) * v0
    t /= math.sqrt(np.dot(t, t))
    b[:] = v0 + d0 * t
    b /= math.sqrt(np.dot(b, b))
    total = 0.0
    for k in range(n_steps):
        for v in (a, b):
            x, y, z = v[0], v[1], v[2]
            if xy:
                x, z = ca * x + sa * z, -sa * x + ca * z
            else:
                y, z = ca * y - sa * z, sa * y + ca * z
            ang = -sign * eta * z
            c, s = math.cos(ang), math.sin(ang)
            x, y = c * x - s * y, s * x + c * y
            y, z = ca * y - sa * z, sa * y + ca * z
            ang = sign * eta * z
            c, s = math.cos(ang), math.sin(ang)
            x, y = c * x - s * y, s * x + c * y
            n = math.sqrt(x * x + y * y + z * z)
            v[0], v[1], v[2] = x / n, y / n, z / n
        d = b - a
        dist = math.sqrt(np.dot(d, d))
        if dist == 0.0:
            dist = 1e-300
        total += math.log(dist / d0)
        b[:] = a + d * (d0 / dist)
        b /= math.sqrt(np.dot(b, b))
    return total / n_steps


def lyapunov_estimate(seed, p: ClassicalParams, n_steps: int = 10_000, d0: float = 1e-8) -> float:
    """Largest Lyapunov exponent per map application, two-trajectory method.

    The partner trajectory is pulled back to distance ``d0`` after every step.
    """
    if n_steps < 10_000:
        raise ValueError("n_steps must be at least 1e4")
    v0 = seed.as_array() if isinstance(seed, SphereState) else np.asarray(seed, dtype=float)
    return float(
        _lyapunov_kernel(v0, float(p.alpha), float(p.eta), float(p.torsion_sign), p.variant == "XY", int(n_steps), d0)
    )


@dataclass
class CorrespondenceResult:
    max_deviation: float
    deviations: np.ndarray = field(repr=False)
    J: float = 0.0


def correspondence_check(J, theta: float, phi: float, p: ClassicalParams, n_periods: int) -> CorrespondenceResult:
    """Compare <J>/J of an evolved coherent state with the classical orbit.

    The quantum side uses alpha unchanged and heta = eta/J.
    """
    basis = SpinBasis.from_j(J)
    mp = ModelParams(J=basis.J, alpha_scaled=p.alpha * basis.J, heta=p.eta / basis.J, variant=p.variant)
    F = build_floquet(mp)
    psi = coherent_state(basis, theta, phi)
    v = SphereState.from_angles(theta, phi).as_array()
    devs = [float(np.linalg.norm(spin_expectation(basis, psi) / basis.J - v))]
    for _ in range(n_periods):
        psi = F @ psi
        v = map_vectors(v, p)
        devs.append(float(np.linalg.norm(spin_expectation(basis, psi) / basis.J - v)))
    devs = np.array(devs)
    return CorrespondenceResult(float(devs.max()), devs, basis.J)
