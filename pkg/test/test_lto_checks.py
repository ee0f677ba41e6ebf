import numpy as np
import pytest

from app.core.lattice import Region, region_ladder
from app.core.models import ProjectionNet, build_model
from app.core import lto_checks
from app.core.lto_checks import (
    SQUARE_HD_NOTE,
    canonical_state,
    check_canonical_state,
    check_finite_haag,
    check_hd,
    check_lto1,
    check_lto3_lto4,
    check_product_state,
    check_rp,
    check_rp_hamiltonian,
    extract_boundary_algebra,
    interaction_algebra,
    os_map_check,
    surrounding_regions,
)
from app.core.operator_core import LocalOperator
from app.errors import CheckError, LtoError, ModelError, RegionError

UNIT = LocalOperator((), np.eye(1), (), "1")


def test_lto1_on_toric_patch(toric_net):
    report = check_lto1(toric_net, Region.rectangle(1, 1, 1, 1), Region.rectangle(0, 0, 3, 3))
    assert report.passed
    assert report.dims["span_rank"] == 1
    assert report.residuals["max_residual"] == 0.0


def test_lto1_needs_nested_regions(toric_net):
    with pytest.raises(RegionError) as info:
        check_lto1(toric_net, Region.rectangle(0, 0, 3, 3), Region.rectangle(1, 1, 1, 1))
    assert info.value.code == "REGION_NOT_NESTED"


def test_canonical_state_is_independent_of_surrounding_region(toric_net):
    R = Region.rectangle(1, 1, 1, 1)
    assert len(surrounding_regions(toric_net.model, R)) >= 2
    report = check_canonical_state(toric_net, R)
    assert report.passed
    assert report.residuals["unit"] == 0.0
    assert report.details["values"][0] == {"operator": "1", "value": 1.0}


def test_canonical_state_needs_room_to_surround(toric_net):
    with pytest.raises(CheckError) as info:
        canonical_state(toric_net, UNIT, toric_net.model.patch)
    assert info.value.code == "NO_SURROUNDING_REGION"


def test_boundary_algebra_needs_a_larger_region(toric_net):
    with pytest.raises(CheckError) as info:
        extract_boundary_algebra(toric_net, Region.rectangle(0, 1, 2, 2), toric_net.model.patch)
    assert info.value.code == "NO_ENLARGEMENTS"


def test_product_state_on_separated_squares(toric_net):
    report = check_product_state(toric_net, Region.rectangle(1, 1, 1, 1), Region.rectangle(3, 3, 1, 1), samples=6)
    assert report.passed
    assert report.dims["pairs"] == 7
    assert report.residuals["max_deviation"] < 1e-12


def test_product_state_rejects_adjacent_regions(toric_net):
    with pytest.raises(CheckError) as info:
        check_product_state(toric_net, Region.rectangle(1, 1, 1, 1), Region.rectangle(2, 2, 1, 1))
    assert info.value.code == "NOT_SEPARATED"


def test_exact_checks_refuse_nonabelian_double():
    net = ProjectionNet(build_model("qd", {"group": "S3", "patch": [3, 3]}))
    R = Region.rectangle(0, 0, 1, 1)
    for run in (
        lambda: check_product_state(net, R, Region.rectangle(2, 2, 1, 1)),
        lambda: extract_boundary_algebra(net, R, net.model.patch),
        lambda: check_hd(net, R, net.model.patch),
        lambda: check_lto3_lto4(net, R, R, net.model.patch, net.model.patch),
        lambda: check_finite_haag(net, R, net.model.patch),
        lambda: interaction_algebra(net, R, net.model.patch),
        lambda: os_map_check(net, R, net.model.patch),
    ):
        with pytest.raises(LtoError) as info:
            run()
        assert info.value.code == "NEEDS_EXACT_BACKEND"


def test_rp_on_mirror_symmetric_rung(rotated_net):
    step = region_ladder(rotated_net.model, [2])[0]
    report = check_rp(rotated_net, step.R, step.S)
    assert report.passed
    assert report.residuals["rp"] < 1e-12
    assert report.dims["boundary_algebra"] == 2


def test_rp_needs_symmetric_layout(toric_net):
    with pytest.raises(ModelError) as info:
        check_rp(toric_net, Region.rectangle(1, 1, 2, 2), Region.rectangle(0, 0, 4, 4))
    assert info.value.code == "NOT_SYMMETRIC"


def test_rp_rejects_wrong_axis(rotated_net):
    with pytest.raises(RegionError) as info:
        check_rp(rotated_net, Region.rectangle(1, 1, 2, 2), Region.rectangle(0, 0, 4, 4), axis=0.5)
    assert info.value.code == "BAD_AXIS"


def test_rp_hamiltonian_on_rotated_patch(rotated):
    report = check_rp_hamiltonian(rotated)
    assert report.passed
    assert report.details["negative_control_detected"]
    assert report.details["missing_images"] == []


def test_lto3_lto4_needs_nested_pairs(toric_net):
    with pytest.raises(RegionError) as info:
        check_lto3_lto4(
            toric_net,
            Region.rectangle(1, 1, 2, 1),
            Region.rectangle(2, 1, 1, 1),
            Region.rectangle(0, 0, 3, 3),
            Region.rectangle(0, 0, 4, 4),
        )
    assert info.value.code == "REGION_NOT_NESTED"


def test_finite_haag_needs_region_across_cut(toric_net):
    with pytest.raises(RegionError) as info:
        check_finite_haag(toric_net, Region.rectangle(0, 0, 1, 1), Region.rectangle(0, 0, 3, 3))
    assert info.value.code == "BAD_INTERVAL"


def test_interaction_algebra_checks_the_cut(toric_net):
    with pytest.raises(RegionError) as info:
        interaction_algebra(toric_net, Region.rectangle(1, 1, 2, 1), Region.rectangle(0, 0, 4, 3), cut=2.5)
    assert info.value.code == "BAD_AXIS"


def test_os_map_needs_mirror_symmetry(toric_net):
    with pytest.raises(ModelError) as info:
        os_map_check(toric_net, Region.rectangle(1, 1, 2, 1), Region.rectangle(0, 0, 4, 3))
    assert info.value.code == "NOT_SYMMETRIC"


ROTATED_MODELS = [
    pytest.param({"kind": "toric"}, 2, id="toric"),
    pytest.param({"kind": "qd", "group": "Z3"}, 3, id="qd-z3"),
]


def rotated_rung(params, size=2):
    kind = params["kind"]
    rest = {k: v for k, v in params.items() if k != "kind"}
    net = ProjectionNet(build_model(kind, {**rest, "patch": [4, 5], "layout": "rotated"}))
    return net, region_ladder(net.model, [size])[0]


@pytest.mark.parametrize("params, p", ROTATED_MODELS)
def test_hd_on_rotated_rung(params, p):
    net, step = rotated_rung(params)
    report = check_hd(net, step.R, step.S)
    assert report.passed
    assert report.details["control_distinct"]
    assert [report.dims[k] for k in ("plus", "middle", "minus")] == [p, p, p]
    for pair in ("plus_middle", "middle_minus", "plus_minus"):
        assert report.residuals[f"{pair}_angle"] == 0.0


def test_hd_fails_across_straight_cut_of_square_layout(toric_net):
    step = region_ladder(toric_net.model, [1])[0]
    report = check_hd(toric_net, step.R, step.S)
    assert not report.passed
    assert SQUARE_HD_NOTE in report.notes


@pytest.mark.parametrize("params, p", ROTATED_MODELS)
def test_boundary_algebra_on_rotated_rung(params, p):
    net, step = rotated_rung(params)
    R_plus, _ = net.model.halves(step.R)
    S_plus, _ = net.model.halves(step.S)
    algebra, report = extract_boundary_algebra(net, R_plus, S_plus)
    assert report.passed
    assert algebra.dim == p
    assert report.dims["boundary_algebra"] == p
    assert report.residuals["angle"] == 0.0
    assert report.residuals["invariant_violations"] == 0


def test_boundary_algebra_on_square_layout(toric_net):
    step = region_ladder(toric_net.model, [1])[0]
    R_plus, _ = toric_net.model.halves(step.R)
    S_plus, _ = toric_net.model.halves(step.S)
    algebra, report = extract_boundary_algebra(toric_net, R_plus, S_plus)
    assert report.passed
    assert algebra.dim == 2
    assert report.residuals["angle"] == 0.0


@pytest.mark.parametrize("params, p", ROTATED_MODELS)
def test_lto3_lto4_on_rotated_patch(params, p):
    net, _ = rotated_rung(params)
    report = check_lto3_lto4(
        net,
        Region.rectangle(2, 1, 1, 1),
        Region.rectangle(1, 1, 2, 1),
        Region.rectangle(0, 0, 3, 3),
        Region.rectangle(0, 0, 4, 4),
    )
    assert report.passed
    assert report.residuals["lto3_angle"] == 0.0
    assert report.residuals["lto4_min_singular_value"] == 1.0
    assert report.dims["boundary_algebra_1"] == report.dims["boundary_algebra_2"] == 1


@pytest.mark.parametrize("params, p", ROTATED_MODELS)
def test_finite_haag_on_rotated_rung(params, p):
    net, step = rotated_rung(params)
    report = check_finite_haag(net, step.R, step.S)
    assert report.passed
    assert report.residuals["minus_leakage"] == 0
    assert report.dims["space"] == p
    assert report.residuals["commutant_angle"] < 1e-8
    assert report.residuals["j_angle"] < 1e-8


@pytest.mark.parametrize("params, p", ROTATED_MODELS)
def test_interaction_algebra_matches_boundary_algebra(params, p):
    net, step = rotated_rung(params)
    _, report = interaction_algebra(net, step.R, step.S)
    assert report.passed
    assert report.residuals["angle"] == 0.0
    assert report.dims["schmidt_rank"] == p
    assert report.dims["interaction"] == report.dims["boundary_algebra"] == p


def test_os_map_on_mirror_symmetric_rung(rotated_net):
    step = region_ladder(rotated_net.model, [2])[0]
    report = os_map_check(rotated_net, step.R, step.S)
    assert report.passed
    assert report.dims["operators"] == 16
    assert report.residuals["unmatched"] == 0
    assert report.residuals["max_residual"] < 1e-9


def test_canonical_state_records_spread(toric_net, monkeypatch):
    R = Region.rectangle(1, 1, 1, 1)
    exact = lto_checks._expectation
    monkeypatch.setattr(lto_checks, "_expectation", lambda net, x, S: exact(net, x, S) + 1e-13 * len(S))
    report = check_canonical_state(toric_net, R)
    assert report.passed
    assert 0.0 < report.residuals["spread"] < 1e-9
