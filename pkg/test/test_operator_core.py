import numpy as np
import pytest

from app.core.operator_core import (
    LocalOperator,
    PauliString,
    PauliSum,
    ProductSpace,
    SparseOperator,
    check_dense,
    dense_budget,
    embed_local,
    operator_schmidt,
    pauli_algebra,
    partial_trace,
    range_projection,
)
from app.errors import OperatorError

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def test_x_times_z_is_minus_i_y():
    xz = PauliString.from_label("X") * PauliString.from_label("Z")
    assert xz.label() == "Y"
    assert xz.y_phase() == 3
    assert np.allclose(xz.to_dense(), X @ Z)


def test_commutation_from_symplectic_form():
    a = PauliString.from_label("XXI")
    b = PauliString.from_label("IZZ")
    assert not a.commutes(b)
    assert a.commutes(PauliString.from_label("ZZI"))


def test_adjoint_inverts_string():
    s = PauliString((0, 1), (1, 2), (2, 1), 1, 3)
    assert (s * s.adjoint()).is_identity()
    assert (s * s.adjoint()).phase == 0


def test_qutrit_power_cycles():
    x = PauliString.single((0,), 0, x=1, p=3)
    assert x.power(3).is_identity()
    assert x.power(3).phase == 0


def test_restrict_drops_phase_and_extend_pads():
    s = PauliString.from_label("YX", modes=("a", "b"))
    assert s.restrict(("a",)).phase == 0
    wide = s.extend(("a", "b", "c"))
    assert wide.label() == "YXI"
    with pytest.raises(OperatorError):
        s.extend(("a",))


def test_pauli_sum_decomposes_dense_matrix():
    decomposed = PauliSum.from_dense(np.kron(X, Z), (0, 1))
    assert decomposed.terms == pytest.approx({((1, 0), (0, 1)): 1.0})


def test_pauli_sum_product_and_trace():
    zz = PauliSum.from_string(PauliString.from_label("ZZ"))
    ident = PauliSum.identity((0, 1))
    proj = (ident + zz).scaled(0.5)
    assert np.allclose((proj * proj).to_dense(), proj.to_dense())
    assert proj.trace() == pytest.approx(2.0)


def test_budget_guard(monkeypatch):
    with pytest.raises(OperatorError) as info:
        check_dense(100, 10)
    assert info.value.code == "BUDGET_EXCEEDED"
    monkeypatch.setenv("LTO_VERIFY_BUDGET", "12")
    assert dense_budget() == 12
    assert dense_budget(5) == 5


def test_product_space_rejects_bad_factors():
    with pytest.raises(OperatorError):
        ProductSpace(((1, 2), (0, 2)))
    with pytest.raises(OperatorError):
        ProductSpace(((0, 1),))
    assert ProductSpace.of([2, 0, 1], 3).dim == 27


def test_embed_local_orders_factors():
    space = ProductSpace.of([0, 1], 2)
    embedded = embed_local(Z, [1], space).to_dense()
    assert np.allclose(embedded, np.kron(np.eye(2), Z))


def test_range_projection_checks_inputs():
    space = ProductSpace.of([0, 1], 2)
    p0 = SparseOperator(space, embed_local((np.eye(2) + Z) / 2, [0], space).matrix, True, True)
    p1 = SparseOperator(space, embed_local((np.eye(2) + Z) / 2, [1], space).matrix, True, True)
    product = range_projection([p0, p1])
    assert product.rank() == 1
    px = embed_local((np.eye(2) + X) / 2, [0], space)
    with pytest.raises(OperatorError) as info:
        range_projection([p0, px])
    assert info.value.code == "NOT_COMMUTING"
    with pytest.raises(OperatorError) as info:
        range_projection([embed_local(X, [0], space)])
    assert info.value.code == "NOT_PROJECTION"
    assert range_projection([], space).rank() == 4


def test_partial_trace_of_product():
    space = ProductSpace.of([0, 1], 2)
    rho = SparseOperator.from_dense(space, np.kron(np.diag([0.25, 0.75]), np.diag([0.5, 0.5])))
    reduced = partial_trace(rho, [0]).to_dense()
    assert np.allclose(reduced, np.diag([0.25, 0.75]))


def test_operator_schmidt_rank_of_zz_plus_xx():
    space = ProductSpace.of([0, 1], 2)
    x = np.kron(Z, Z) + np.kron(X, X)
    decomposition = operator_schmidt(x, [0], [1], space)
    assert len(decomposition) == 2
    assert np.allclose(decomposition.reconstruct(), x)


def test_operator_schmidt_cutoff_drops_small_terms():
    space = ProductSpace.of([0, 1], 2)
    x = np.kron(Z, Z) + 1e-6 * np.kron(X, X)
    assert len(operator_schmidt(x, [0], [1], space)) == 2
    assert len(operator_schmidt(x, [0], [1], space, cutoff=1e-4)) == 1


def test_local_operator_product_on_union_of_supports():
    a = LocalOperator((0,), X, (2,), "X0")
    b = LocalOperator((1,), Z, (2,), "Z1")
    ab = a @ b
    assert ab.support == (0, 1)
    assert np.allclose(ab.matrix, np.kron(X, Z))
    with pytest.raises(OperatorError):
        LocalOperator((0,), np.eye(4), (2,))


def test_pauli_algebra_dispatch():
    x, z = PauliString.from_label("X"), PauliString.from_label("Z")
    assert pauli_algebra(x, z, "mul").y_phase() == 3
    assert (x * pauli_algebra(x, x, "adjoint")).is_identity()
    assert not pauli_algebra(PauliString.from_label("XXI"), PauliString.from_label("IZZ"), "commutes")
    with pytest.raises(ValueError):
        pauli_algebra(x, z, "divide")
