import numpy as np
import pytest

from app.core.operator_core import PauliString, PauliSum
from app.core.stabilizer import (
    StabilizerGroup,
    Subspace,
    WeylFrame,
    class_representatives,
    reflect_string,
    solve_left,
    split_string,
)
from app.errors import OperatorError


def bell_group():
    frame = WeylFrame((0, 1), 2)
    return StabilizerGroup([PauliString.from_label("XX"), PauliString.from_label("ZZ")], frame), frame


def test_subspace_sum_and_intersection():
    a = Subspace.span([[1, 0, 0], [0, 1, 0]], 2, 3)
    b = Subspace.span([[0, 1, 0], [0, 0, 1]], 2, 3)
    assert (a + b).dim == 3
    meet = a.intersection(b)
    assert meet.dim == 1
    assert meet.contains(np.array([0, 1, 0]))
    assert not a.equals(b)


def test_solve_left_over_gf3():
    matrix = np.array([[1, 0], [1, 1]])
    coeffs = solve_left(matrix, np.array([2, 1]), 3)
    assert np.array_equal((coeffs @ matrix) % 3, [2, 1])
    assert solve_left(np.array([[1, 0]]), np.array([0, 1]), 3) is None


def test_group_rank_and_commutant():
    group, frame = bell_group()
    assert group.rank == 2
    assert group.log_trace() == 0
    commutant = frame.commutant(group.matrix)
    assert commutant.equals(group.subspace)


def test_non_commuting_generators_rejected():
    frame = WeylFrame((0,), 2)
    with pytest.raises(OperatorError) as info:
        StabilizerGroup([PauliString.from_label("X"), PauliString.from_label("Z")], frame)
    assert info.value.code == "NOT_COMMUTING"


def test_expectation_in_bell_state():
    group, _ = bell_group()
    assert group.expectation(PauliString.from_label("YY")) == pytest.approx(-1.0)
    assert group.expectation(PauliString.from_label("XX")) == pytest.approx(1.0)
    assert group.expectation(PauliString.from_label("XI")) == 0
    total = PauliSum.from_string(PauliString.from_label("XX")) + PauliSum.from_string(PauliString.from_label("ZZ"))
    assert group.expectation(total) == pytest.approx(2.0)


def test_projector_sum_is_rank_one_projection():
    group, _ = bell_group()
    dense = group.projector_sum().to_dense()
    assert np.allclose(dense @ dense, dense)
    assert np.trace(dense).real == pytest.approx(1.0)


def test_inconsistent_generators_detected():
    frame = WeylFrame((0,), 2)
    group = StabilizerGroup([PauliString.from_label("Z"), PauliString.from_label("Z").times_phase(2)], frame)
    with pytest.raises(OperatorError) as info:
        group.check_consistent()
    assert info.value.code == "NOT_PROJECTION"


def test_class_representatives_count_quotient():
    frame = WeylFrame((0, 1), 2)
    local = frame.local((0,))
    modulo = Subspace.span([frame.vector(PauliString.from_label("ZI"))], 2, frame.ncols)
    reps = class_representatives(local, modulo)
    assert len(reps) == 2


def test_split_keeps_phase_on_plus_factor():
    s = PauliString.from_label("YX", modes=("m", "p"))
    minus, plus = split_string(s, ["m"])
    assert minus.phase == 0
    assert plus.phase == s.phase
    assert (minus * plus).extend(("m", "p")) == s


def test_reflect_conjugates_clock():
    s = PauliString.single((0,), 0, x=1, z=1, p=3)
    image = reflect_string(s, {0: 5})
    assert image.modes == (5,)
    assert image.x == (1,) and image.z == (2,)
