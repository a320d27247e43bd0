import math

import numpy as np
import pytest

from su2butterfly.errors import ParityViolation
from su2butterfly.floquet import (
    Angle,
    ModelParams,
    Rational,
    bch_rhs,
    build_floquet,
    build_kicked_top,
    first_three_factors,
    fold_heta,
    parity_blocks,
    parity_commutator,
    physical_to_model,
)
from su2butterfly.su2 import max_unitarity_error, parity_decompose


def test_factor_order_against_explicit_product():
    p = ModelParams(3, 1.3, 0.9)
    b = p.basis
    from su2butterfly.su2 import rotation_x, torsion_phase

    T = np.diag(torsion_phase(b, p.heta))
    R = rotation_x(b, p.alpha)
    assert np.abs(build_floquet(p) - T @ R @ T.conj().T @ R).max() < 1e-14


@pytest.mark.parametrize("J", [1, 2, 3, 5])
def test_three_factor_closed_form(J):
    rng = np.random.default_rng(J)
    for _ in range(5):
        p = ModelParams(J, rng.uniform(0, 3) * J, rng.uniform(0, 4 * math.pi))
        assert np.abs(first_three_factors(p) - bch_rhs(p)).max() < 1e-11


def test_unitary_and_parity():
    p = ModelParams(10, 1.0, 1.7)
    F = build_floquet(p)
    assert max_unitarity_error(F) < 1e-12
    assert parity_commutator(F) < 1e-12
    assert parity_commutator(build_kicked_top(p)) < 1e-12


def test_xy_breaks_parity():
    p = ModelParams(10, 1.0, 1.7, "XY")
    F = build_floquet(p)
    assert max_unitarity_error(F) < 1e-12
    assert parity_commutator(F) > 0.1
    with pytest.raises(ParityViolation):
        parity_blocks(F, parity_decompose(p.basis))


def test_j2_odd_block_identity():
    p = ModelParams(2, 1.0, 2 * math.pi / 3)
    _, odd = parity_blocks(build_floquet(p), parity_decompose(p.basis))
    assert np.abs(odd - np.eye(2)).max() < 1e-12


def test_rational_prefactor_reduction():
    # nu/mu = 1 and nu/mu = 0/1 leave F unchanged for integer J
    p = ModelParams(4, 1.0, 0.7)
    for pre in (Rational(1, 1), Rational(0, 1), Rational(3, 1)):
        q = ModelParams(4, 1.0, 0.7, prefactor=pre)
        assert np.abs(build_floquet(q) - build_floquet(p)).max() < 1e-13
    # exp(i 2pi m^2 /2) = (-1)^(m^2) is parity preserving
    q = ModelParams(4, 1.0, 0.7, prefactor=Rational(1, 2))
    d = np.exp(1j * np.pi * p.basis.m_values**2)
    assert np.abs(build_floquet(q) - d[:, None] * build_floquet(p)).max() < 1e-13


def test_rational_rejected_for_half_integer():
    with pytest.raises(ValueError):
        ModelParams(2.5, 1.0, prefactor=Rational(1, 3))
    with pytest.raises(ValueError):
        Rational(2, 4)


def test_physical_mapping():
    m = physical_to_model(g0=0.1, tau=2 * math.pi / 0.4, xi=1.0, J=10, alpha=0.1)
    assert m.params.heta == pytest.approx(0.8)
    assert m.beta == pytest.approx(2 * math.pi)
    assert m.reduces_to_floquet
    base = ModelParams(10, 1.0, 0.8)
    assert np.abs(build_floquet(m.params) - build_floquet(base)).max() < 1e-12
    half = physical_to_model(g0=0.1, tau=2 * math.pi / 0.4, xi=1.0, J=10.5, alpha=0.1)
    assert not half.reduces_to_floquet
    assert isinstance(half.params.prefactor, Angle)


def test_fold_heta():
    assert fold_heta(4 * math.pi + 1.0) == pytest.approx(1.0)
    assert fold_heta(-1.0) == pytest.approx(4 * math.pi - 1.0)
    assert 0 <= fold_heta(-1e-300) < 4 * math.pi


@pytest.mark.parametrize("kw", [dict(alpha_scaled=-1), dict(variant="ZZ"), dict(heta=math.inf)])
def test_param_validation(kw):
    args = dict(J=2, alpha_scaled=1.0)
    args.update(kw)
    with pytest.raises(ValueError):
        ModelParams(**args)
