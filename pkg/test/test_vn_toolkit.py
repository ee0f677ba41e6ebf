import numpy as np
import pytest

from app.core.lto_checks import haag_duality
from app.core.vn_toolkit import (
    State,
    VNAlgebra,
    algebra_closure,
    commutant,
    cond_expectation,
    double_commutant_angle,
    faithful_on_corner,
    full_matrix_algebra,
    gns,
    modular_data,
    orthonormal_span,
    random_faithful_state,
    random_multimatrix_algebra,
    subspace_equal,
    support_projections,
    tomita,
    wedderburn_blocks,
)
from app.errors import AlgebraError, OperatorError
from app.handlers.toolkit_handler import abelian_pair

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


def units(d):
    out = []
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            out.append(e)
    return out


def left_factor():
    return VNAlgebra(orthonormal_span([np.kron(e, I2) for e in units(2)]), np.eye(4, dtype=complex), "M2x1")


def right_factor():
    return VNAlgebra(orthonormal_span([np.kron(I2, e) for e in units(2)]), np.eye(4, dtype=complex), "1xM2")


def test_orthonormal_span_rank_and_empty():
    span = orthonormal_span([X, 2 * X, Z])
    assert span.rank == 2
    assert span.contains(X + Z)
    assert not span.contains(I2)
    with pytest.raises(OperatorError):
        orthonormal_span([])
    assert orthonormal_span([], dim=3).rank == 0


def test_subspace_equal_reports_right_angle():
    equal, angle = subspace_equal(orthonormal_span([X]), orthonormal_span([Z]))
    assert not equal
    assert angle == pytest.approx(np.pi / 2)


def test_closure_of_single_generator():
    algebra = algebra_closure([X])
    assert algebra.dim == 2
    assert algebra.contains(I2)


def test_commutant_of_tensor_factor():
    prime = commutant(left_factor())
    assert prime.dim == 4
    equal, _ = subspace_equal(prime.space, right_factor().space)
    assert equal
    assert commutant(full_matrix_algebra(3)).dim == 1


def test_double_commutant_of_random_algebras(rng):
    for blocks in ([(2, 1)], [(1, 2), (2, 1)], [(1, 1), (1, 1), (2, 2)]):
        same, angle = double_commutant_angle(random_multimatrix_algebra(rng, blocks))
        assert same, angle


def test_wedderburn_blocks_in_standard_frame(rng):
    algebra = random_multimatrix_algebra(rng, [(2, 1), (1, 2)], conjugate=False)
    assert wedderburn_blocks(algebra) == [(2, 1), (1, 2)]


def test_qubit_modular_spectrum():
    lam = 0.25
    data = modular_data(full_matrix_algebra(2), State(np.diag([lam, 1 - lam]).astype(complex)))
    spectrum = sorted(data.spectrum)
    assert spectrum == pytest.approx(sorted([1.0, 1.0, lam / (1 - lam), (1 - lam) / lam]))
    residuals = data.residuals()
    assert residuals["delta_omega"] < 1e-9
    assert residuals["j_omega"] < 1e-9
    assert residuals["j_squared"] < 1e-9
    assert data.duality_angle < 1e-8


def test_kms_and_invariance(rng):
    algebra = random_multimatrix_algebra(rng, [(2, 1), (1, 1)])
    phi = random_faithful_state(rng, algebra)
    data = modular_data(algebra, phi)
    B = data.algebra
    x, y = B.random_element(rng), B.random_element(rng)
    scale = float(np.linalg.norm(x) * np.linalg.norm(y))
    assert data.kms_residual(x, y) < 1e-8 * max(1.0, scale)
    assert abs(data.expectation(data.sigma(x, 0.7)) - data.expectation(x)) < 1e-8 * max(1.0, float(np.linalg.norm(x)))


def test_tracial_state_has_trivial_modular_operator():
    data = modular_data(full_matrix_algebra(2), State.tracial(full_matrix_algebra(2)))
    assert data.is_tracial


def test_tomita_needs_cyclic_vector():
    omega = np.zeros(4, dtype=complex)
    omega[0] = 1.0
    with pytest.raises(AlgebraError) as info:
        tomita(left_factor(), omega)
    assert info.value.code == "NOT_CYCLIC"


def test_gns_of_pure_state_is_two_dimensional():
    rep = gns(full_matrix_algebra(2), State(np.diag([1.0, 0.0]).astype(complex)))
    assert rep.dim == 2
    assert rep.expectation(Z) == pytest.approx(1.0)


def test_not_a_state():
    with pytest.raises(AlgebraError) as info:
        gns(full_matrix_algebra(2), State(np.diag([1.0, 1.0]).astype(complex)))
    assert info.value.code == "NOT_A_STATE"


def test_support_projections_of_abelian_counterexample():
    supports = support_projections(abelian_pair(), State(np.diag([1.0, 0.0]).astype(complex)))
    summary = supports.to_json()
    assert summary["support_rank"] == 1
    assert summary["central_support_rank"] == 1
    assert supports.agree


def test_faithful_on_corner_matches_support_meet():
    algebra = full_matrix_algebra(2)
    phi = State(np.diag([1.0, 0.0]).astype(complex))
    assert faithful_on_corner(algebra, phi, np.diag([1.0, 0.0]).astype(complex))
    assert not faithful_on_corner(algebra, phi, np.diag([0.0, 1.0]).astype(complex))


def test_haag_duality_for_bell_vector():
    omega = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / np.sqrt(2)
    result = haag_duality(left_factor(), right_factor(), omega)
    assert result["commutant_equal"]
    assert result["j_equal"]
    assert result["dims"]["commutant"] == 4


def test_conditional_expectation_onto_tensor_factor(rng):
    rho = np.kron(np.diag([0.6, 0.4]), np.diag([0.7, 0.3])).astype(complex)
    E = cond_expectation(full_matrix_algebra(4), left_factor(), State(rho))
    assert np.allclose(E(np.kron(X, Z)), 0.4 * np.kron(X, I2))
    assert max(E.residuals(rng).values()) < 1e-9


def test_conditional_expectation_errors():
    rho = np.kron(np.diag([0.6, 0.4]), np.diag([0.7, 0.3])).astype(complex)
    with pytest.raises(AlgebraError) as info:
        cond_expectation(left_factor(), right_factor(), State(rho))
    assert info.value.code == "NOT_SUBALGEBRA"
    pure = np.zeros((4, 4), dtype=complex)
    pure[0, 0] = 1.0
    with pytest.raises(AlgebraError) as info:
        cond_expectation(full_matrix_algebra(4), left_factor(), State(pure))
    assert info.value.code == "NOT_FAITHFUL"
