"""Construction of the driven-SU(2) one-period evolution operators.

All operators act in the ascending-|m> basis of :mod:`su2butterfly.su2`.
Products are evaluated right to left, the rightmost factor acting first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Optional, Union

import numpy as np

from .errors import ParityViolation
from .su2 import (
    ParityDecomposition,
    SpinBasis,
    jx_matrix,
    jy_matrix,
    rotation_x,
    rotation_y,
    torsion_phase,
)

FOUR_PI = 4 * math.pi

Variant = Literal["XX", "XY"]


@dataclass(frozen=True)
class Rational:
    """Prefactor exp(i 2 pi J_z^2 nu/mu) with coprime integers."""

    nu: int
    mu: int

    def __post_init__(self):
        if self.mu < 1:
            raise ValueError(f"mu must be >= 1, got {self.mu}")
        if math.gcd(self.nu, self.mu) != 1:
            raise ValueError(f"nu={self.nu} and mu={self.mu} are not coprime")


@dataclass(frozen=True)
class Angle:
    """Prefactor exp(-i beta J_z^2)."""

    beta: float


Prefactor = Optional[Union[Rational, Angle]]


@dataclass(frozen=True)
class ModelParams:
    """One Floquet system.

    ``alpha_scaled`` is alpha*J (alpha measured in units of the effective
    Planck constant 1/J) and ``heta`` is eta/J.
    """

    J: float
    alpha_scaled: float
    heta: float = 0.0
    variant: Variant = "XX"
    prefactor: Prefactor = None

    def __post_init__(self):
        basis = SpinBasis.from_j(self.J)
        object.__setattr__(self, "J", basis.J)
        if self.variant not in ("XX", "XY"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not math.isfinite(self.alpha_scaled) or self.alpha_scaled < 0:
            raise ValueError("alpha_scaled must be finite and non-negative")
        if not math.isfinite(self.heta):
            raise ValueError("heta must be finite")
        if isinstance(self.prefactor, Rational) and not basis.is_integer:
            raise ValueError("rational prefactor family is defined for integer J only")

    @property
    def basis(self) -> SpinBasis:
        return SpinBasis.from_j(self.J)

    @property
    def alpha(self) -> float:
        return self.alpha_scaled / self.J

    @property
    def eta(self) -> float:
        return self.heta * self.J

    def with_heta(self, heta: float) -> "ModelParams":
        return replace(self, heta=heta)


def prefactor_diagonal(basis: SpinBasis, prefactor: Prefactor) -> Optional[np.ndarray]:
    if prefactor is None:
        return None
    if isinstance(prefactor, Rational):
        if not basis.is_integer:
            raise ValueError("rational prefactor family is defined for integer J only")
        # m^2 nu reduced mod mu in integers before the trig evaluation
        m_sq = basis.two_m_sq // 4
        residue = (m_sq * prefactor.nu) % prefactor.mu
        return np.exp(2j * np.pi * residue / prefactor.mu)
    if isinstance(prefactor, Angle):
        return np.exp(-1j * prefactor.beta * basis.m_values**2)
    raise TypeError(f"unsupported prefactor {prefactor!r}")


def first_three_factors(p: ModelParams) -> np.ndarray:
    """exp(i eta Jz^2/2J) exp(-i alpha Jx) exp(-i eta Jz^2/2J)."""
    b = p.basis
    t = torsion_phase(b, p.heta, +1)
    return (t[:, None] * rotation_x(b, p.alpha)) * t.conj()[None, :]


def build_floquet(p: ModelParams) -> np.ndarray:
    b = p.basis
    last = rotation_x(b, p.alpha) if p.variant == "XX" else rotation_y(b, p.alpha)
    F = first_three_factors(p) @ last
    pre = prefactor_diagonal(b, p.prefactor)
    if pre is not None:
        F = pre[:, None] * F
    return F


def build_kicked_top(p: ModelParams) -> np.ndarray:
    """The first two factors only: exp(i eta Jz^2/2J) exp(-i alpha Jx)."""
    b = p.basis
    t = torsion_phase(b, p.heta, +1)
    return t[:, None] * rotation_x(b, p.alpha)


def bch_generator(p: ModelParams) -> np.ndarray:
    """G = (J_+/2) exp(i heta (2J_z+1)/2) + h.c."""
    b = p.basis
    jplus = jx_matrix(b) + 1j * jy_matrix(b)
    phase = np.exp(0.5j * p.heta * (2 * b.m_values + 1))
    half = 0.5 * jplus * phase[None, :]
    return half + half.conj().T


def bch_rhs(p: ModelParams) -> np.ndarray:
    """exp(-i alpha G), the closed form of the first three factors."""
    G = bch_generator(p)
    w, V = np.linalg.eigh(G)
    return (V * np.exp(-1j * p.alpha * w)) @ V.conj().T


def parity_blocks(U: np.ndarray, d: ParityDecomposition, tol: float = 1e-12):
    """Split U into its even and odd parity blocks.

    Raises :class:`ParityViolation` when the off-diagonal blocks in the
    parity basis exceed ``tol``.
    """
    T = d.transform
    C = T.T @ U @ T
    e = d.even_dim
    leak = max(
        float(np.abs(C[:e, e:]).max(initial=0.0)),
        float(np.abs(C[e:, :e]).max(initial=0.0)),
    )
    if leak > tol:
        raise ParityViolation(f"off-block leakage {leak:.3e} exceeds {tol:.1e}")
    return C[:e, :e].copy(), C[e:, e:].copy()


def parity_commutator(U: np.ndarray) -> float:
    """max |[U, P]| entrywise, with P|m> = |-m>."""
    return float(np.abs(U - U[::-1, ::-1]).max())


@dataclass(frozen=True)
class PhysicalMapping:
    params: ModelParams
    beta: float
    reduces_to_floquet: bool


def physical_to_model(g0: float, tau: float, xi: float, J, alpha: float) -> PhysicalMapping:
    """Map kick strength, period and delay onto model parameters.

    heta = 8 g0 and the extra torsion angle is beta = 4 g0 tau / xi. The
    extra factor is the identity when beta is a multiple of 2 pi (integer J)
    or 8 pi (half-integer J).
    """
    if tau <= 0 or xi <= 0:
        raise ValueError("tau and xi must be positive")
    basis = SpinBasis.from_j(J)
    beta = 4 * g0 * tau / xi
    period = 2 * math.pi if basis.is_integer else 8 * math.pi
    k = beta / period
    reduces = abs(k - round(k)) <= 1e-12 * max(1.0, abs(k))
    params = ModelParams(
        J=basis.J,
        alpha_scaled=alpha * basis.J,
        heta=8 * g0,
        prefactor=Angle(beta),
    )
    return PhysicalMapping(params, beta, reduces)


def fold_heta(heta: float) -> float:
    """Map heta onto the canonical period [0, 4 pi)."""
    folded = math.fmod(heta, FOUR_PI)
    if folded < 0:
        folded += FOUR_PI
    if folded >= FOUR_PI:
        folded = 0.0
    return folded
