import math

import numpy as np
import pytest

from su2butterfly.errors import ConvergenceFailure
from su2butterfly.floquet import ModelParams, build_floquet
from su2butterfly.spectrum import (
    EVEN,
    ODD,
    arc_spread,
    butterfly_scan,
    eigenphases,
    floquet_spectrum,
    multiset_distance,
    symmetry_check,
    uniform_grid,
)
from su2butterfly.su2 import parity_matrix


def test_identity_and_diagonal():
    assert np.all(eigenphases(np.eye(4)).phases == 0)
    s = eigenphases(np.diag(np.exp(-1j * np.array([1.7, 0.3]))))
    assert np.allclose(s.phases, [0.3, 1.7], atol=1e-14)


def test_characteristic_polynomial_oracle():
    F = build_floquet(ModelParams(3, 1.0, 1.0))
    roots = np.roots(np.poly(F))
    oracle = np.sort(np.mod(-np.angle(roots), 2 * math.pi))
    assert multiset_distance(eigenphases(F).phases, oracle) < 1e-10


def test_non_unitary_input_rejected():
    with pytest.raises(ConvergenceFailure):
        eigenphases(np.array([[1.0, 1e3], [0.0, 1.0]]))


def test_block_split_matches_full():
    p = ModelParams(12, 1.0, 2.3)
    s = floquet_spectrum(p, want_vectors=True)
    full = eigenphases(build_floquet(p)).phases
    assert multiset_distance(s.phases, full) < 1e-10
    assert np.sum(s.parities == EVEN) == 13 and np.sum(s.parities == ODD) == 12
    P = parity_matrix(p.basis)
    for k in range(len(s)):
        v = s.vectors[:, k]
        assert np.linalg.norm(P @ v - s.parities[k] * v) < 1e-8
    assert np.abs(s.vectors.conj().T @ s.vectors - np.eye(25)).max() < 1e-10
    assert s.residual < 1e-11


def test_phase_range_and_order():
    s = floquet_spectrum(ModelParams(9.5, 1.0, 5.1))
    assert np.all((s.phases >= 0) & (s.phases < 2 * math.pi))
    assert np.all(np.diff(s.phases) >= 0)


@pytest.mark.parametrize("J", [2, 10, 20, 30])
def test_collapse_integer(J):
    r = symmetry_check(ModelParams(J, 1.0), "collapse")
    assert r.passed and r.max_deviation <= 1e-10


def test_no_collapse_half_integer():
    r = symmetry_check(ModelParams(30.5, 1.0), "collapse")
    assert not r.passed and r.max_deviation >= 0.1


def test_periodicity_and_reflection():
    assert symmetry_check(ModelParams(30, 1.0), "periodicity", [0.7]).max_deviation < 1e-10
    assert symmetry_check(ModelParams(20, 1.0), "reflection", [1.3]).max_deviation < 1e-10
    assert symmetry_check(ModelParams(20.5, 1.0), "reflection", [1.3]).max_deviation < 1e-10


def test_scan_folds_and_is_deterministic():
    p = ModelParams(4, 1.0)
    grid = uniform_grid(16)
    a = butterfly_scan(p, grid)
    b = butterfly_scan(p, grid, workers=4)
    assert np.array_equal(a.phase_matrix(), b.phase_matrix())
    assert a.phase_matrix().shape == (16, 9)
    col = butterfly_scan(p, [2 * math.pi]).columns[0]
    assert arc_spread(col.phases) < 1e-10
    folded = butterfly_scan(p, [0.5 + 4 * math.pi])
    assert folded.grid[0] == pytest.approx(0.5)


def test_scan_rejects_unordered_grid():
    with pytest.raises(ValueError):
        butterfly_scan(ModelParams(2, 1.0), [1.0, 0.5])


def test_multiset_distance_wraps():
    assert multiset_distance([0.01, 3.0], [2 * math.pi - 0.01, 3.0]) == pytest.approx(0.02)
