from types import SimpleNamespace

import pytest

from app.core.lattice import (
    Interval,
    Region,
    Site,
    completely_surrounds,
    euler_characteristic,
    is_disk_like,
    reflect_region,
    region_ladder,
    weakly_surrounds,
)
from app.errors import LtoError, RegionError


def test_rectangle_and_set_operations():
    R = Region.rectangle(0, 0, 2, 3)
    assert len(R) == 6
    assert Site(1, 2) in R
    assert Site(2, 0) not in R
    assert R.bounding_box() == (0, 0, 1, 2)
    assert Region.rectangle(0, 0, 1, 1).issubset(R)
    assert len(R.union(Region.rectangle(2, 0, 1, 3))) == 9
    assert len(R.difference(Region.rectangle(0, 0, 1, 3))) == 3


def test_region_json_is_sorted_and_parses_back():
    R = Region.from_coords([[2, 0], [0, 1], [0, 0]])
    assert R.to_json() == {"sites": [[0, 0], [0, 1], [2, 0]]}
    assert Region.from_json(R.key) == R


def test_grown_square():
    assert len(Region.rectangle(1, 1, 1, 1).grown(1)) == 9
    assert len(Region.rectangle(0, 0, 2, 2).grown(2)) == 36


def test_halves_split_at_cut():
    plus, minus = Region.rectangle(0, 0, 4, 1).halves(1.5)
    assert {z.x for z in plus} == {0, 1}
    assert {z.x for z in minus} == {2, 3}


def test_halves_reject_integer_free_axis():
    with pytest.raises(RegionError) as info:
        Region.rectangle(0, 0, 4, 1).halves(1.3)
    assert info.value.code == "BAD_AXIS"


def test_reflection_about_half_integer():
    R = Region.from_coords([(1, 0), (2, 3)])
    assert reflect_region(R, 0.5) == Region.from_coords([(0, 0), (-1, 3)])


def test_reflection_through_sites_needs_opt_in():
    R = Region.from_coords([(1, 0)])
    with pytest.raises(RegionError) as info:
        reflect_region(R, 1.0)
    assert info.value.code == "BAD_AXIS"
    assert reflect_region(R, 1.0, allow_on_site=True) == R


def test_completely_surrounds_margin():
    R = Region.rectangle(1, 1, 2, 2)
    S = Region.rectangle(0, 0, 4, 4)
    assert completely_surrounds(R, S, 1)
    assert not completely_surrounds(R, S, 2)


def test_weakly_surrounds_on_left_face():
    R = Region.rectangle(0, 1, 2, 2)
    S = Region.rectangle(0, 0, 4, 4)
    ok, interval = weakly_surrounds(R, S, 1)
    assert ok
    assert interval.face == "left"
    assert interval.sites == (Site(0, 1), Site(0, 2))


def test_weakly_surrounds_fails_without_shared_boundary():
    ok, interval = weakly_surrounds(Region.rectangle(1, 1, 2, 2), Region.rectangle(0, 0, 4, 4), 1)
    assert not ok
    assert interval is None


def test_weakly_surrounds_needs_nesting():
    with pytest.raises(LtoError) as info:
        weakly_surrounds(Region.rectangle(0, 0, 3, 3), Region.rectangle(0, 0, 2, 2), 1)
    assert info.value.code == "REGION_NOT_NESTED"


def test_disk_like_regions():
    square = Region.rectangle(0, 0, 3, 3)
    annulus = square.difference(Region.from_coords([(1, 1)]))
    diagonal = Region.from_coords([(0, 0), (1, 1)])
    assert euler_characteristic(square) == 1
    assert is_disk_like(square)
    assert euler_characteristic(annulus) == 0
    assert not is_disk_like(annulus)
    assert not is_disk_like(diagonal)
    assert not is_disk_like(Region.empty())


def test_interval_validation():
    assert len(Interval.on_cut(1, 1, 3, "+")) == 3
    assert Interval.on_cut(1, 1, 3, "-").face == "left"
    with pytest.raises(RegionError) as info:
        Interval((Site(0, 0), Site(0, 2)), "left")
    assert info.value.code == "BAD_INTERVAL"
    with pytest.raises(RegionError):
        Interval((), "left")
    with pytest.raises(RegionError):
        Interval((Site(0, 0),), "north")


def test_region_ladder_skips_rungs_outside_patch():
    model = SimpleNamespace(patch=Region.rectangle(0, 0, 4, 5), cut=1.5)
    steps = region_ladder(model, [1, 2, 3])
    assert [s.size for s in steps] == [1, 2]
    first = steps[0]
    assert first.R == Region.rectangle(1, 1, 2, 1)
    assert first.S == Region.rectangle(0, 0, 4, 3)
    assert first.R.issubset(first.S) and first.S.issubset(first.S_hat)
    assert completely_surrounds(first.R, first.S, 1)
    assert reflect_region(first.S, 1.5) == first.S
