"""
Lattice sites, finite regions and the geometric predicates used by the checks.

Everything here is a pure value type. Regions are frozen sets of integer
sites; the union of closed unit squares [R] is what the topological
predicates talk about.
"""

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

from app.errors import RegionError

logger = logging.getLogger(__name__)

FACES = ("left", "right", "bottom", "top")


@dataclass(frozen=True, order=True)
class Site:
    """A point of the square lattice; ordered lexicographically."""

    x: int
    y: int

    def shifted(self, dx: int, dy: int) -> "Site":
        return Site(self.x + dx, self.y + dy)

    def to_list(self) -> List[int]:
        return [self.x, self.y]


@dataclass(frozen=True)
class Interval:
    """
    Boundary sites on one straight face, ordered along it.

    ``face`` names the face of the surrounding region (or the cut side for
    intervals built from a cut); ``side`` is ``"+"`` or ``"-"`` when the
    interval lies next to a cut.
    """

    sites: Tuple[Site, ...]
    face: str
    side: Optional[str] = None

    def __post_init__(self):
        if self.face not in FACES:
            raise RegionError("BAD_INTERVAL", f"Unknown face {self.face!r}")
        if self.side not in (None, "+", "-"):
            raise RegionError("BAD_INTERVAL", f"Unknown side {self.side!r}")
        if not self.sites:
            raise RegionError("BAD_INTERVAL", "Interval must contain at least one site")
        vertical = self.face in ("left", "right")
        fixed = {s.x if vertical else s.y for s in self.sites}
        if len(fixed) != 1:
            raise RegionError("BAD_INTERVAL", "Interval sites are not on a single line")
        run = [s.y if vertical else s.x for s in self.sites]
        if run != list(range(run[0], run[0] + len(run))):
            raise RegionError("BAD_INTERVAL", "Interval sites are not contiguous")

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def line(self) -> int:
        first = self.sites[0]
        return first.x if self.face in ("left", "right") else first.y

    def to_json(self) -> Dict:
        return {"sites": [s.to_list() for s in self.sites], "face": self.face, "side": self.side}

    @classmethod
    def on_cut(cls, column: int, y0: int, length: int, side: str) -> "Interval":
        """Interval of ``length`` sites in lattice column ``column`` starting at ``y0``."""
        face = "right" if side == "+" else "left"
        return cls(tuple(Site(column, y0 + k) for k in range(length)), face, side)


@dataclass(frozen=True)
class Region:
    """A finite set of lattice sites."""

    sites: FrozenSet[Site] = field(default_factory=frozenset)

    # construction

    @classmethod
    def empty(cls) -> "Region":
        return cls(frozenset())

    @classmethod
    def from_coords(cls, coords: Iterable[Sequence[int]]) -> "Region":
        return cls(frozenset(Site(int(c[0]), int(c[1])) for c in coords))

    @classmethod
    def rectangle(cls, x0: int, y0: int, width: int, height: int) -> "Region":
        return cls(
            frozenset(Site(x, y) for x in range(x0, x0 + width) for y in range(y0, y0 + height))
        )

    @classmethod
    def from_json(cls, data) -> "Region":
        if isinstance(data, str):
            data = json.loads(data)
        return cls.from_coords(data["sites"])

    # set behaviour

    def __contains__(self, site: Site) -> bool:
        return site in self.sites

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self) -> Iterator[Site]:
        return iter(self.sorted_sites)

    def __bool__(self) -> bool:
        return bool(self.sites)

    def issubset(self, other: "Region") -> bool:
        return self.sites <= other.sites

    def union(self, other: "Region") -> "Region":
        return Region(self.sites | other.sites)

    def intersection(self, other: "Region") -> "Region":
        return Region(self.sites & other.sites)

    def difference(self, other: "Region") -> "Region":
        return Region(self.sites - other.sites)

    @cached_property
    def sorted_sites(self) -> Tuple[Site, ...]:
        return tuple(sorted(self.sites))

    @cached_property
    def key(self) -> str:
        """Canonical serialization, used as a cache key."""
        return json.dumps(self.to_json(), separators=(",", ":"))

    def to_json(self) -> Dict:
        return {"sites": [s.to_list() for s in self.sorted_sites]}

    # geometry

    def bounding_box(self) -> Tuple[int, int, int, int]:
        """(xmin, ymin, xmax, ymax) of the sites."""
        if not self.sites:
            raise ValueError("Empty region has no bounding box")
        xs = [s.x for s in self.sites]
        ys = [s.y for s in self.sites]
        return min(xs), min(ys), max(xs), max(ys)

    @cached_property
    def squares(self) -> FrozenSet[Tuple[int, int]]:
        """Lower-left corners of the closed unit squares whose union is [R]."""
        return frozenset((s.x, s.y) for s in self.sites)

    def boundary(self) -> "Region":
        """Sites whose square touches the topological boundary of [R]."""
        return Region(
            frozenset(
                z
                for z in self.sites
                if any(z.shifted(dx, dy) not in self.sites for dx, dy in _ball_offsets(1))
            )
        )

    def grown(self, s: int) -> "Region":
        """The ℓ∞ s-neighbourhood of the region."""
        return Region(frozenset(z.shifted(dx, dy) for z in self.sites for dx, dy in _ball_offsets(s)))

    def halves(self, cut: float) -> Tuple["Region", "Region"]:
        """Split along the vertical line x = cut into (R ∩ ℍ₊, R ∩ ℍ₋), ℍ₊ = {x < cut}."""
        axis2 = _doubled_axis(cut)
        plus = frozenset(z for z in self.sites if 2 * z.x < axis2)
        minus = frozenset(z for z in self.sites if 2 * z.x > axis2)
        return Region(plus), Region(minus)


def _ball_offsets(s: int) -> List[Tuple[int, int]]:
    return [(dx, dy) for dx in range(-s, s + 1) for dy in range(-s, s + 1)]


def _doubled_axis(c: float) -> int:
    axis2 = int(round(2 * c))
    if abs(2 * c - axis2) > 1e-9:
        raise RegionError("BAD_AXIS", f"Axis {c} is not on the half-integer grid")
    return axis2


def completely_surrounds(R: Region, S: Region, s: int) -> bool:
    """R ≪_s S: every ℓ∞ s-ball around a point of R lies in S."""
    offsets = _ball_offsets(s)
    return all(z.shifted(dx, dy) in S.sites for z in R.sites for dx, dy in offsets)


def _face_of(interval_sites: FrozenSet[Site], S: Region) -> Optional[str]:
    for face in FACES:
        if face in ("left", "right"):
            if len({z.x for z in interval_sites}) != 1:
                continue
            dx = -1 if face == "left" else 1
            outward = [z.shifted(dx, 0) for z in interval_sites]
        else:
            if len({z.y for z in interval_sites}) != 1:
                continue
            dy = -1 if face == "bottom" else 1
            outward = [z.shifted(0, dy) for z in interval_sites]
        if all(w not in S.sites for w in outward):
            return face
    return None


def inner_half_plane(face: str, line: int, site: Site) -> bool:
    if face == "left":
        return site.x >= line
    if face == "right":
        return site.x <= line
    if face == "bottom":
        return site.y >= line
    return site.y <= line


def weakly_surrounds(R: Region, S: Region, s: int) -> Tuple[bool, Optional[Interval]]:
    """
    Decide R ⋐_s S.

    Args:
        R: Inner region
        S: Surrounding region, must contain R
        s: Margin

    Returns:
        (True, I) with I = ∂R ∩ ∂S when the predicate holds, else (False, None)
    """
    if not R.issubset(S):
        raise RegionError("REGION_NOT_NESTED", "weakly_surrounds needs R ⊆ S")
    shared = R.boundary().sites & S.boundary().sites
    if not shared:
        return False, None

    face = _face_of(shared, S)
    if face is None:
        return False, None
    vertical = face in ("left", "right")
    ordered = tuple(sorted(shared, key=lambda z: z.y if vertical else z.x))
    try:
        interval = Interval(ordered, face)
    except RegionError:
        return False, None
    line = interval.line

    offsets = _ball_offsets(s)
    for z in R.sites:
        for dx, dy in offsets:
            w = z.shifted(dx, dy)
            if inner_half_plane(face, line, w) and w not in S.sites:
                return False, None

    rest = S.sites - R.sites
    for w in rest:
        if not _in_free_block(w, rest, s):
            return False, None
    return True, interval


def _in_free_block(w: Site, rest: FrozenSet[Site], s: int) -> bool:
    for ox in range(s):
        for oy in range(s):
            corner = w.shifted(-ox, -oy)
            if all(corner.shifted(a, b) in rest for a in range(s) for b in range(s)):
                return True
    return False


def _connected(cells: FrozenSet[Tuple[int, int]]) -> bool:
    if not cells:
        return False
    start = next(iter(cells))
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for nxt in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nxt in cells and nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(cells)


def euler_characteristic(R: Region) -> int:
    """V − E + F of the closed square complex [R]."""
    vertices = set()
    edges = set()
    for x, y in R.squares:
        vertices.update({(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)})
        edges.update({(x, y, "h"), (x, y + 1, "h"), (x, y, "v"), (x + 1, y, "v")})
    return len(vertices) - len(edges) + len(R.squares)


def _has_pinch(R: Region) -> bool:
    squares = R.squares
    corners = {(x + a, y + b) for x, y in squares for a in (0, 1) for b in (0, 1)}
    for u, w in corners:
        ll = (u - 1, w - 1) in squares
        lr = (u, w - 1) in squares
        ul = (u - 1, w) in squares
        ur = (u, w) in squares
        if (ll and ur and not lr and not ul) or (lr and ul and not ll and not ur):
            return True
    return False


def is_disk_like(R: Region) -> bool:
    """[R] is a closed topological disk."""
    if not R.sites:
        return False
    if not _connected(R.squares):
        return False
    if _has_pinch(R):
        return False
    return euler_characteristic(R) == 1


def reflect_region(R: Region, cut: float, allow_on_site: bool = False) -> Region:
    """
    Mirror a region in the vertical line x = cut.

    Args:
        R: Region to reflect
        cut: Axis position, a half-integer unless ``allow_on_site``
        allow_on_site: Accept integer axes (sites on the axis are fixed)

    Returns:
        θR
    """
    axis2 = _doubled_axis(cut)
    if axis2 % 2 == 0 and not allow_on_site:
        raise RegionError("BAD_AXIS", f"Axis x={cut} runs through lattice sites")
    return Region(frozenset(Site(axis2 - z.x, z.y) for z in R.sites))


@dataclass(frozen=True)
class LadderStep:
    """One rung of a region ladder: R ≪ S ⊊ Ŝ, all inside the patch and mirror symmetric about the cut."""

    size: int
    R: Region
    S: Region
    S_hat: Region

    def to_json(self) -> Dict:
        return {"size": self.size, "R": self.R.to_json(), "S": self.S.to_json(), "S_hat": self.S_hat.to_json()}


def region_ladder(model, sizes: Iterable[int]) -> List[LadderStep]:
    """
    Nested regions straddling the cut, one rung per interval length.

    R is two columns wide (one on each side of the cut) and ``size`` rows
    high starting at row 1; S is R grown by one site; Ŝ adds one more row on
    top. Sizes whose rungs do not fit into the patch are skipped.

    Args:
        model: Anything with ``patch`` (a Region) and ``cut``
        sizes: Interval lengths

    Returns:
        The rungs that fit, in the order of ``sizes``
    """
    column = int(_doubled_axis(model.cut) // 2)
    steps = []
    for size in sizes:
        R = Region.rectangle(column, 1, 2, size)
        S = Region.rectangle(column - 1, 0, 4, size + 2)
        S_hat = Region.rectangle(column - 1, 0, 4, size + 3)
        if not S_hat.issubset(model.patch):
            logger.debug("Ladder size %d does not fit the patch", size)
            continue
        steps.append(LadderStep(int(size), R, S, S_hat))
    return steps
