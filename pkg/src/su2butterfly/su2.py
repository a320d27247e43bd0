"""Angular-momentum algebra in the |m> basis.

Basis ordering is fixed to ascending m, from -J to +J, everywhere in the
package. Rotations are exponentiated through the eigendecomposition of the
tridiagonal generator with its exact eigenvalues (the m values) substituted,
so no series truncation enters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


def _as_two_j(J) -> int:
    twice = 2 * float(J)
    two_j = int(round(twice))
    if abs(twice - two_j) > 1e-9 or two_j < 1:
        raise ValueError(f"J must be a positive multiple of 1/2, got {J!r}")
    return two_j


@dataclass(frozen=True)
class SpinBasis:
    """The 2J+1 eigenstates of J_z, ordered by ascending m."""

    two_j: int

    def __post_init__(self):
        if self.two_j < 1:
            raise ValueError("2J must be a positive integer")

    @classmethod
    def from_j(cls, J) -> "SpinBasis":
        return cls(_as_two_j(J))

    @property
    def J(self) -> float:
        return self.two_j / 2

    @property
    def dim(self) -> int:
        return self.two_j + 1

    @property
    def is_integer(self) -> bool:
        return self.two_j % 2 == 0

    @cached_property
    def m_values(self) -> np.ndarray:
        return np.arange(self.dim) - self.two_j / 2

    @cached_property
    def two_m_sq(self) -> np.ndarray:
        """Exact integers (2m)^2, for phase reductions without float drift."""
        two_m = 2 * np.arange(self.dim, dtype=np.int64) - self.two_j
        return two_m * two_m

    def index(self, m) -> int:
        k = int(round(m + self.J))
        if not 0 <= k < self.dim or abs(self.m_values[k] - m) > 1e-12:
            raise ValueError(f"m={m} is not in the basis for J={self.J}")
        return k


def _ladder(basis: SpinBasis) -> np.ndarray:
    # <m+1|J_+|m> for m = -J .. J-1
    J = basis.J
    m = basis.m_values[:-1]
    return np.sqrt(J * (J + 1) - m * (m + 1))


def jx_matrix(basis: SpinBasis) -> np.ndarray:
    """Real symmetric tridiagonal J_x."""
    off = _ladder(basis) / 2
    return np.diag(off, 1) + np.diag(off, -1)


def jy_matrix(basis: SpinBasis) -> np.ndarray:
    """Hermitian tridiagonal J_y = (J_+ - J_-)/(2i)."""
    off = _ladder(basis) / 2
    # J_+ has its elements below the diagonal in ascending-m ordering
    return 1j * np.diag(off, 1) - 1j * np.diag(off, -1)


def jz_diagonal(basis: SpinBasis) -> np.ndarray:
    return basis.m_values.copy()


def _jx_eigensystem(basis: SpinBasis):
    key = basis.two_j
    cached = _EIG_CACHE.get(key)
    if cached is None:
        _, vecs = np.linalg.eigh(jx_matrix(basis))
        cached = (basis.m_values.copy(), vecs)
        if len(_EIG_CACHE) > 64:
            _EIG_CACHE.clear()
        _EIG_CACHE[key] = cached
    return cached


_EIG_CACHE: dict = {}


def rotation_x(basis: SpinBasis, alpha: float) -> np.ndarray:
    """exp(-i alpha J_x) in the |m> basis."""
    m, vecs = _jx_eigensystem(basis)
    return (vecs * np.exp(-1j * alpha * m)) @ vecs.T


def rotation_y(basis: SpinBasis, alpha: float) -> np.ndarray:
    """exp(-i alpha J_y), the real Wigner small-d matrix.

    J_y = Z J_x Z^dagger with Z = exp(-i pi J_z / 2), so the eigenvectors of
    J_y are those of J_x rotated by a diagonal phase.
    """
    m, vecs = _jx_eigensystem(basis)
    z = np.exp(-0.5j * np.pi * basis.m_values)
    rx = (vecs * np.exp(-1j * alpha * m)) @ vecs.T
    d = (z[:, None] * rx) * z.conj()[None, :]
    return d.real.copy()


def rotation_z(basis: SpinBasis, angle: float) -> np.ndarray:
    """Diagonal of exp(-i angle J_z)."""
    return np.exp(-1j * angle * basis.m_values)


def torsion_phase(basis: SpinBasis, heta: float, sign: int = 1) -> np.ndarray:
    """Diagonal of exp(sign * i * (heta/2) * J_z^2).

    ``heta`` is the effective Planck constant eta/J, so eta J_z^2/(2J)
    becomes heta m^2 / 2.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return np.exp(sign * 0.5j * heta * basis.m_values**2)


@dataclass(frozen=True)
class ParityDecomposition:
    """Orthogonal change of basis to the mode-exchange parity eigenbasis.

    Columns of ``transform`` are the new basis vectors: the even block first,
    (|m>+|-m>)/sqrt2 for m = J, J-1, ... > 0 followed by |0> for integer J,
    then the odd block (|m>-|-m>)/sqrt2 for m = J, J-1, ... > 0.
    """

    basis: SpinBasis
    transform: np.ndarray = field(repr=False)
    even_dim: int
    odd_dim: int

    @property
    def even(self) -> np.ndarray:
        return self.transform[:, : self.even_dim]

    @property
    def odd(self) -> np.ndarray:
        return self.transform[:, self.even_dim :]


def parity_matrix(basis: SpinBasis) -> np.ndarray:
    """P|m> = |-m>."""
    return np.eye(basis.dim)[::-1].copy()


def parity_decompose(basis: SpinBasis) -> ParityDecomposition:
    n = basis.dim
    s = np.sqrt(0.5)
    even_cols, odd_cols = [], []
    for k in range(n - 1, -1, -1):
        m = basis.m_values[k]
        if m < 0:
            break
        if m == 0:
            v = np.zeros(n)
            v[k] = 1.0
            even_cols.append(v)
            continue
        plus = np.zeros(n)
        plus[k], plus[n - 1 - k] = s, s
        minus = np.zeros(n)
        minus[k], minus[n - 1 - k] = s, -s
        even_cols.append(plus)
        odd_cols.append(minus)
    T = np.column_stack(even_cols + odd_cols)
    return ParityDecomposition(basis, T, len(even_cols), len(odd_cols))


def coherent_state(basis: SpinBasis, theta: float, phi: float) -> np.ndarray:
    """Spin coherent state exp(-i phi J_z) exp(-i theta J_y) |m=J>."""
    col = rotation_y(basis, theta)[:, -1]
    return np.exp(-1j * phi * basis.m_values) * col


def spin_expectation(basis: SpinBasis, psi: np.ndarray) -> np.ndarray:
    """(<J_x>, <J_y>, <J_z>) for a normalized state (or a stack of states as rows)."""
    psi = np.asarray(psi)
    lad = _ladder(basis)
    # <J_+> = sum_m conj(c_{m+1}) c_m sqrt(...)
    jp = np.sum(np.conj(psi[..., 1:]) * psi[..., :-1] * lad, axis=-1)
    jz = np.sum(np.abs(psi) ** 2 * basis.m_values, axis=-1)
    return np.stack([jp.real, jp.imag, jz], axis=-1)


def max_unitarity_error(U: np.ndarray) -> float:
    """max |U^dagger U - I| entrywise."""
    U = np.asarray(U)
    return float(np.abs(U.conj().T @ U - np.eye(U.shape[0])).max())
