import numpy as np
import pytest

from app.core.lattice import Interval, Region
from app.core.models import (
    FiniteGroup,
    ProjectionNet,
    boundary_generators,
    build_model,
    ground_projection,
    model_from_descriptor,
    reflection,
    straddle_identities,
)
from app.errors import CheckError, LtoError, ModelError, RegionError


def test_toric_geometry(toric):
    assert toric.cut == 1.5
    assert toric.plus_column == 1
    assert len(toric.modes) == 32
    assert len(toric.terms) == 18
    assert len(toric.straddling_terms()) == 6


def test_descriptor_round_trip(toric):
    rebuilt = model_from_descriptor(toric.descriptor())
    assert rebuilt.descriptor() == toric.descriptor()
    assert [t.name for t in rebuilt.terms] == [t.name for t in toric.terms]


def test_cut_through_sites_is_rejected():
    with pytest.raises(RegionError) as info:
        build_model("toric", {"patch": [4, 4], "cut": 2.0})
    assert info.value.code == "BAD_AXIS"


def test_unknown_kind_and_group():
    with pytest.raises(ModelError) as info:
        build_model("honeycomb")
    assert info.value.code == "BAD_GROUP"
    with pytest.raises(ModelError):
        build_model("qd", {"group": "Q8"})


def test_group_tables():
    s3 = FiniteGroup.from_spec("S3")
    assert s3.order == 6
    assert not s3.is_abelian
    assert s3.prime_cyclic is None
    z5 = FiniteGroup.from_spec("Z5")
    assert z5.prime_cyclic == 5
    assert z5.mul(3, 4) == 2
    assert z5.inv(2) == 3
    for g in s3.elements():
        assert s3.mul(g, s3.inv(g)) == s3.unit


def test_explicit_table_must_be_a_group():
    with pytest.raises(ModelError) as info:
        FiniteGroup([[0, 1], [1, 1]])
    assert info.value.code == "BAD_GROUP"
    assert FiniteGroup([[0, 1], [1, 0]]).prime_cyclic == 2


def test_nonabelian_double_has_no_weyl_form():
    model = build_model("qd", {"group": "S3", "patch": [3, 3]})
    assert model.local_dim == 6
    assert not model.is_weyl
    with pytest.raises(CheckError) as info:
        model.term_string(model.terms[0])
    assert info.value.code == "NEEDS_EXACT_BACKEND"


def test_ground_projection_rank(toric_net):
    R = Region.rectangle(0, 0, 2, 2)
    assert len(toric_net.model.terms_in(R)) == 2
    P = toric_net.projection(R)
    assert P.space.dim == 256
    assert P.rank() == 64
    assert toric_net.projection(R) is P
    assert toric_net.group(R).rank == 2


def test_exact_and_dense_projections_agree(toric_net):
    R = Region.rectangle(0, 0, 2, 2)
    group = toric_net.group(R)
    dense = toric_net.projection(R).to_dense()
    modes = toric_net.model.modes_of(R)
    for generator in group.generators:
        local = generator.restrict(modes)
        assert np.allclose(dense @ local.to_dense(), dense)


def test_patch_group_is_consistent(toric_net):
    toric_net.group(toric_net.model.patch).check_consistent()


def test_toric_straddle_identities(toric):
    report = straddle_identities(toric, Interval.on_cut(1, 0, 4, "+"))
    assert report.passed
    assert report.dims["straddling_terms"] == 6
    assert report.residuals["exact_failures"] == 0


def test_qutrit_double_straddle_identities():
    model = build_model("qd", {"group": "Z3", "patch": [4, 4], "layout": "square"})
    report = straddle_identities(model, Interval.on_cut(1, 0, 4, "+"))
    assert report.passed
    assert report.residuals["max_group_residual"] == pytest.approx(0.0, abs=1e-12)
    assert len(report.details["derived_shapes"]) == report.dims["straddling_terms"]


def test_interval_off_the_cut(toric):
    with pytest.raises(LtoError) as info:
        straddle_identities(toric, Interval.on_cut(0, 0, 2, "+"))
    assert info.value.code == "BAD_INTERVAL"


def test_reflection_needs_rotated_symmetric_patch(toric, rotated):
    with pytest.raises(ModelError) as info:
        reflection(toric)
    assert info.value.code == "NOT_SYMMETRIC"
    theta = reflection(rotated)
    assert theta.region(rotated.patch) == rotated.patch
    for m in rotated.modes:
        assert theta.mode(theta.mode(m)) == m


def test_projection_net_cache_is_bounded(toric):
    net = ProjectionNet(toric, cache_bytes=1)
    net.projection(Region.rectangle(0, 0, 2, 2))
    net.projection(Region.rectangle(1, 0, 2, 2))
    assert len(net) == 1


def test_ground_projection_is_monotone(toric):
    R = Region.rectangle(0, 0, 2, 1)
    S = Region.rectangle(0, 0, 2, 2)
    modes = toric.modes_of(S)
    p_R = ground_projection(toric, R, modes)
    p_S = ground_projection(toric, S, modes)
    assert (p_S @ p_R).trace() == pytest.approx(p_S.trace())
    dense = p_S.to_dense()
    assert np.allclose(dense @ dense, dense)
    assert np.allclose(dense, dense.conj().T)


def test_toric_boundary_generators(toric):
    Z = np.diag([1.0, -1.0])
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    plus = boundary_generators(toric, "+", Interval.on_cut(1, 0, 4, "+"))
    minus = boundary_generators(toric, "-", Interval.on_cut(2, 0, 4, "-"))
    assert len(plus) == len(minus) == 6
    for op in plus:
        if op.name.startswith("C_l"):
            assert np.allclose(op.matrix, Z)
        else:
            assert op.name.startswith("D_p")
            assert np.allclose(op.matrix, np.kron(np.kron(X, X), X))
    for op in minus:
        if op.name.startswith("C_s"):
            assert np.allclose(op.matrix, np.kron(np.kron(Z, Z), Z))
        else:
            assert op.name.startswith("D_l")
            assert np.allclose(op.matrix, X)
