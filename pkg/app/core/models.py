"""
Commuting-projector lattice models on finite patches.

Two models are provided: the toric code and Kitaev's quantum double D(G)
for a finite group given by its multiplication table. Both live on the
edges of a square lattice; edges are attached to sites either in the
``rotated`` layout (one edge per site, lattice turned by 45°, the default; the
vertical cut is then a diagonal cut of the edge lattice) or the ``square``
layout (site (i, j) owns the edge to its right and the edge above it).
"""

import itertools
import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, FrozenSet, Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.lattice import Interval, Region, Site, _doubled_axis, reflect_region
from app.core.operator_core import (
    LocalOperator,
    PauliString,
    ProductSpace,
    SparseOperator,
    TOL,
    check_dense,
    dense_budget,
    range_projection,
)
from app.core.stabilizer import StabilizerGroup, WeylFrame, reflect_string
from app.core.report import CheckReport
from app.errors import CheckError, ModelError, RegionError

logger = logging.getLogger(__name__)

Mode = Tuple[Site, str]

LAYOUTS = ("square", "rotated")
DEFAULT_LAYOUT = "rotated"
CONVENTIONS = ("z_star", "x_star")
MAX_WEYL_MODES = 1024

STAR_ROLES = ("left", "up", "right", "down")
PLAQUETTE_ROLES = ("bottom", "right", "top", "left")
# exponents of the Weyl forms a_s = Z_l Z_u⁻¹ Z_r⁻¹ Z_d and b_p = X_b X_r X_t⁻¹ X_l⁻¹
STAR_EXPONENTS = {"left": 1, "up": -1, "right": -1, "down": 1}
PLAQUETTE_EXPONENTS = {"bottom": 1, "right": 1, "top": -1, "left": -1}


# ---------------------------------------------------------------------------
# Finite groups


def _is_prime(n: int) -> bool:
    return n >= 2 and all(n % k for k in range(2, int(n**0.5) + 1))


class FiniteGroup:
    """A finite group given by its multiplication table, table[a, b] = a·b."""

    def __init__(self, table, names: Optional[Sequence[str]] = None, name: str = "G"):
        try:
            table = np.asarray(table, dtype=np.int64)
        except (TypeError, ValueError):
            raise ModelError("BAD_GROUP", "Multiplication table must be a square integer array")
        if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] == 0:
            raise ModelError("BAD_GROUP", "Multiplication table must be square and nonempty")
        n = table.shape[0]
        if table.min() < 0 or table.max() >= n:
            raise ModelError("BAD_GROUP", "Table entries must be element indices")
        self.table = table
        self.name = name
        self.names = tuple(names) if names is not None else tuple(str(k) for k in range(n))
        self.unit = self._find_unit()
        self._inverse = self._find_inverses()
        self._check_associative()

    def _find_unit(self) -> int:
        n = self.order
        ar = np.arange(n)
        for e in range(n):
            if np.array_equal(self.table[e], ar) and np.array_equal(self.table[:, e], ar):
                return e
        raise ModelError("BAD_GROUP", f"Group {self.name} has no unit element")

    def _find_inverses(self) -> Tuple[int, ...]:
        inverse = []
        for a in range(self.order):
            found = [b for b in range(self.order) if self.table[a, b] == self.unit and self.table[b, a] == self.unit]
            if not found:
                raise ModelError("BAD_GROUP", f"Element {self.names[a]} has no inverse")
            inverse.append(found[0])
        return tuple(inverse)

    def _check_associative(self) -> None:
        T = self.table
        n = self.order
        lhs = T[T]
        rhs = T[np.arange(n)[:, None, None], T[None, :, :]]
        if not np.array_equal(lhs, rhs):
            a, b, c = (int(t) for t in np.argwhere(lhs != rhs)[0])
            raise ModelError(
                "BAD_GROUP",
                f"Associativity fails for ({self.names[a]}, {self.names[b]}, {self.names[c]})",
                {"triple": [a, b, c]},
            )

    @property
    def order(self) -> int:
        return int(self.table.shape[0])

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def inv(self, a: int) -> int:
        return self._inverse[a]

    def elements(self) -> range:
        return range(self.order)

    @cached_property
    def is_abelian(self) -> bool:
        return bool(np.array_equal(self.table, self.table.T))

    @cached_property
    def prime_cyclic(self) -> Optional[int]:
        """p when the group is ℤ/p written as addition mod p, else None."""
        n = self.order
        ar = np.arange(n)
        if _is_prime(n) and np.array_equal(self.table, (ar[:, None] + ar[None, :]) % n):
            return n
        return None

    # representations on ℂ[G]

    def left(self, g: int) -> np.ndarray:
        """L_g|h⟩ = |gh⟩."""
        m = np.zeros((self.order, self.order))
        for h in self.elements():
            m[self.mul(g, h), h] = 1.0
        return m

    def right(self, g: int) -> np.ndarray:
        """R_g|h⟩ = |hg⟩."""
        m = np.zeros((self.order, self.order))
        for h in self.elements():
            m[self.mul(h, g), h] = 1.0
        return m

    def delta(self, g: int) -> np.ndarray:
        """P_g|h⟩ = δ_{g,h}|h⟩."""
        m = np.zeros((self.order, self.order))
        m[g, g] = 1.0
        return m

    def to_json(self) -> Union[str, List[List[int]]]:
        if self.name in BUILTIN_GROUPS:
            return self.name
        return self.table.tolist()

    # construction

    @classmethod
    def cyclic(cls, n: int) -> "FiniteGroup":
        ar = np.arange(n)
        return cls((ar[:, None] + ar[None, :]) % n, name=f"Z{n}")

    @classmethod
    def symmetric3(cls) -> "FiniteGroup":
        perms = list(itertools.permutations(range(3)))
        index = {p: k for k, p in enumerate(perms)}
        table = [[index[tuple(a[b[i]] for i in range(3))] for b in perms] for a in perms]
        names = ["".join(str(t) for t in p) for p in perms]
        return cls(table, names, "S3")

    @classmethod
    def from_spec(cls, spec) -> "FiniteGroup":
        """Build from a built-in name (``Z2``, ``Z3``, ``S3``, ``Zn``) or an explicit table."""
        if isinstance(spec, FiniteGroup):
            return spec
        if isinstance(spec, str):
            key = spec.strip()
            if key == "S3":
                return cls.symmetric3()
            if key.upper().startswith("Z") and key[1:].isdigit() and int(key[1:]) >= 2:
                return cls.cyclic(int(key[1:]))
            raise ModelError("BAD_GROUP", f"Unknown group {spec!r}")
        return cls(spec)


BUILTIN_GROUPS = ("Z2", "Z3", "Z5", "S3")


# ---------------------------------------------------------------------------
# Geometry


@dataclass(frozen=True)
class Term:
    """A star (at a vertex) or plaquette (at its lower-left vertex) with its role → mode map."""

    kind: str
    at: Tuple[int, int]
    roles: Tuple[Tuple[str, Mode], ...]

    @property
    def name(self) -> str:
        return f"{'A_s' if self.kind == 'star' else 'B_p'}{self.at}"

    @property
    def modes(self) -> Tuple[Mode, ...]:
        return tuple(sorted(m for _, m in self.roles))

    @property
    def sites(self) -> FrozenSet[Site]:
        return frozenset(m[0] for _, m in self.roles)

    def mode(self, role: str) -> Mode:
        return dict(self.roles)[role]


def edge_mode(layout: str, orientation: str, i: int, j: int) -> Mode:
    """Mode carrying the horizontal (``h``) or vertical (``v``) edge starting at vertex (i, j)."""
    if layout == "square":
        return (Site(i, j), orientation)
    if orientation == "h":
        return (Site(i + j, j - i - 1), "q")
    return (Site(i + j, j - i), "q")


def star_roles(layout: str, i: int, j: int) -> Tuple[Tuple[str, Mode], ...]:
    return (
        ("left", edge_mode(layout, "h", i - 1, j)),
        ("up", edge_mode(layout, "v", i, j)),
        ("right", edge_mode(layout, "h", i, j)),
        ("down", edge_mode(layout, "v", i, j - 1)),
    )


def plaquette_roles(layout: str, i: int, j: int) -> Tuple[Tuple[str, Mode], ...]:
    return (
        ("bottom", edge_mode(layout, "h", i, j)),
        ("right", edge_mode(layout, "v", i + 1, j)),
        ("top", edge_mode(layout, "h", i, j + 1)),
        ("left", edge_mode(layout, "v", i, j)),
    )


def _local_kron(factors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(1)
    for f in factors:
        out = np.kron(out, f)
    return out


# ---------------------------------------------------------------------------
# Models


class LatticeModel:
    """Common geometry of the edge models."""

    kind = "lattice"

    def __init__(self, width: int, height: int, cut: Optional[float] = None, layout: str = DEFAULT_LAYOUT):
        if width < 2 or height < 2:
            raise RegionError("BAD_INTERVAL", "Patch must be at least 2×2")
        if layout not in LAYOUTS:
            raise ModelError("NOT_SYMMETRIC", f"Unknown layout {layout!r}")
        self.width = int(width)
        self.height = int(height)
        self.layout = layout
        self.cut = float(cut) if cut is not None else self.width // 2 - 0.5
        axis2 = _doubled_axis(self.cut)
        if axis2 % 2 == 0:
            raise RegionError("BAD_AXIS", f"Cut x={self.cut} runs through lattice sites")
        self.patch = Region.rectangle(0, 0, self.width, self.height)
        self.terms = self._enumerate_terms()
        logger.debug("Built %s %dx%d (%s): %d terms", self.kind, self.width, self.height, layout, len(self.terms))

    # geometry

    @cached_property
    def modes(self) -> Tuple[Mode, ...]:
        return self.modes_of(self.patch)

    def modes_of(self, R: Region) -> Tuple[Mode, ...]:
        slots = ("h", "v") if self.layout == "square" else ("q",)
        return tuple(sorted((z, s) for z in R.sites for s in slots))

    def _enumerate_terms(self) -> List[Term]:
        terms = []
        span = self.width + self.height + 2
        for i in range(-span, span + 1):
            for j in range(-span, span + 1):
                for kind, roles in (("star", star_roles(self.layout, i, j)), ("plaquette", plaquette_roles(self.layout, i, j))):
                    if all(m[0] in self.patch for _, m in roles):
                        terms.append(Term(kind, (i, j), roles))
        return sorted(terms, key=lambda t: (t.modes, t.kind))

    def terms_in(self, R: Region) -> List[Term]:
        return [t for t in self.terms if t.sites <= R.sites]

    def is_plus(self, mode: Mode) -> bool:
        return mode[0].x < self.cut

    @property
    def plus_column(self) -> int:
        return int(np.floor(self.cut))

    def straddling_terms(self) -> List[Term]:
        return [t for t in self.terms if len({self.is_plus(m) for m in t.modes}) == 2]

    def space(self, modes: Sequence[Mode]) -> ProductSpace:
        return ProductSpace.of(modes, self.local_dim)

    def halves(self, R: Region) -> Tuple[Region, Region]:
        return R.halves(self.cut)

    # backend

    local_dim = 2

    @property
    def p(self) -> Optional[int]:
        return None

    @property
    def is_weyl(self) -> bool:
        return self.p is not None

    @cached_property
    def frame(self) -> WeylFrame:
        if not self.is_weyl:
            raise CheckError("NEEDS_EXACT_BACKEND", f"{self.kind} model has no Weyl form")
        return WeylFrame(self.modes, self.p)

    def term_string(self, term: Term) -> PauliString:
        raise CheckError("NEEDS_EXACT_BACKEND", f"{self.kind} model has no Weyl form")

    def term_projector(self, term: Term) -> LocalOperator:
        raise NotImplementedError

    def descriptor(self) -> Dict:
        raise NotImplementedError

    # boundary structure

    def _check_interval(self, I: Interval, side: str) -> int:
        if side not in ("+", "-"):
            raise RegionError("BAD_INTERVAL", f"Unknown side {side!r}")
        column = self.plus_column if side == "+" else self.plus_column + 1
        if any(z.x != column for z in I.sites) or any(z not in self.patch for z in I.sites):
            raise RegionError(
                "BAD_INTERVAL", f"Interval does not lie on the {side} column x={column} of the cut", I.to_json()
            )
        return column

    def straddling_on(self, I: Interval, side: str) -> List[Tuple[Term, Tuple[Mode, ...]]]:
        """Straddling terms whose ``side`` part lies on I, with those modes."""
        self._check_interval(I, side)
        on_side = set(I.sites)
        out = []
        for t in self.straddling_terms():
            part = tuple(m for m in t.modes if self.is_plus(m) == (side == "+"))
            if {m[0] for m in part} <= on_side:
                out.append((t, part))
        return out

    def boundary_strings(self, side: str, I: Interval) -> List[Tuple[str, PauliString]]:
        """Side restrictions of straddling Weyl terms, named after the term they come from."""
        out = []
        for t, part in self.straddling_on(I, side):
            s = self.term_string(t)
            restricted = s.restrict(part)
            out.append((_generator_name(self, t, side), restricted))
        return out


def _generator_name(model: LatticeModel, term: Term, side: str) -> str:
    if model.kind == "toric" and model.layout == "square":
        names = {("star", "+"): "C_l", ("star", "-"): "C_s", ("plaquette", "+"): "D_p", ("plaquette", "-"): "D_l"}
        return f"{names[(term.kind, side)]}{term.at}"
    return f"{term.name}{side}"


class ToricCodeModel(LatticeModel):
    """Kitaev's toric code with open boundaries."""

    kind = "toric"
    local_dim = 2

    def __init__(
        self,
        width: int,
        height: int,
        cut: Optional[float] = None,
        layout: str = DEFAULT_LAYOUT,
        convention: str = "z_star",
    ):
        if convention not in CONVENTIONS:
            raise ModelError("BAD_GROUP", f"Unknown convention {convention!r}")
        self.convention = convention
        super().__init__(width, height, cut, layout)

    @property
    def p(self) -> int:
        return 2

    def term_string(self, term: Term) -> PauliString:
        # z_star: stars Z-type, plaquettes X-type
        z_type = (term.kind == "star") == (self.convention == "z_star")
        roles = dict(term.roles)
        modes = term.modes
        exps = STAR_EXPONENTS if term.kind == "star" else PLAQUETTE_EXPONENTS
        by_mode = {roles[r]: e for r, e in exps.items()}
        powers = tuple(by_mode[m] for m in modes)
        zeros = (0,) * len(modes)
        if z_type:
            return PauliString(modes, zeros, powers, 0, 2)
        return PauliString(modes, powers, zeros, 0, 2)

    def term_projector(self, term: Term) -> LocalOperator:
        s = self.term_string(term)
        matrix = 0.5 * (np.eye(2 ** len(s.modes)) + s.to_dense())
        return LocalOperator(s.modes, matrix, (2,) * len(s.modes), term.name)

    def descriptor(self) -> Dict:
        return {
            "kind": "toric",
            "patch": [self.width, self.height],
            "cut": self.cut,
            "layout": self.layout,
            "convention": self.convention,
        }


class QuantumDoubleModel(LatticeModel):
    """
    Kitaev's quantum double D(G).

    Edges point right and up. A_s projects onto x_left = x_up·x_right·x_down⁻¹;
    B_p^g acts as L_g on the bottom and right edges and as R_{g⁻¹} on the top
    and left edges, and B_p averages B_p^g over G.
    """

    kind = "qd"

    def __init__(
        self,
        group: Union[FiniteGroup, str, Sequence],
        width: int,
        height: int,
        cut: Optional[float] = None,
        layout: str = DEFAULT_LAYOUT,
    ):
        self.group = FiniteGroup.from_spec(group)
        super().__init__(width, height, cut, layout)

    @property
    def local_dim(self) -> int:
        return self.group.order

    @property
    def p(self) -> Optional[int]:
        return self.group.prime_cyclic

    def term_string(self, term: Term) -> PauliString:
        if not self.is_weyl:
            return super().term_string(term)
        roles = dict(term.roles)
        modes = term.modes
        zeros = (0,) * len(modes)
        if term.kind == "star":
            by_mode = {roles[r]: e for r, e in STAR_EXPONENTS.items()}
            return PauliString(modes, zeros, tuple(by_mode[m] for m in modes), 0, self.p)
        by_mode = {roles[r]: e for r, e in PLAQUETTE_EXPONENTS.items()}
        return PauliString(modes, tuple(by_mode[m] for m in modes), zeros, 0, self.p)

    # dense group operators

    def _configs(self, n: int):
        return itertools.product(range(self.group.order), repeat=n)

    def star_projector(self, term: Term) -> LocalOperator:
        G = self.group
        modes = term.modes
        roles = dict(term.roles)
        position = {m: k for k, m in enumerate(modes)}
        diag = []
        for cfg in self._configs(len(modes)):
            x = {r: cfg[position[roles[r]]] for r in STAR_ROLES}
            rhs = G.mul(G.mul(x["up"], x["right"]), G.inv(x["down"]))
            diag.append(1.0 if x["left"] == rhs else 0.0)
        return LocalOperator(modes, np.diag(diag), (G.order,) * len(modes), term.name)

    def role_action(self, role: str, g: int) -> np.ndarray:
        """Factor of B_p^g on an edge with the given plaquette role."""
        G = self.group
        if role in ("bottom", "right"):
            return G.left(g)
        return G.right(G.inv(g))

    def plaquette_action(self, term: Term, g: int, roles: Optional[Sequence[str]] = None) -> LocalOperator:
        """B_p^g, or its factor on the given roles."""
        names = dict((m, r) for r, m in term.roles)
        modes = tuple(m for m in term.modes if roles is None or names[m] in roles)
        factors = [self.role_action(names[m], g) for m in modes]
        return LocalOperator(modes, _local_kron(factors), (self.group.order,) * len(modes), f"{term.name}^{g}")

    def plaquette_projector(self, term: Term) -> LocalOperator:
        total = sum(self.plaquette_action(term, g).matrix for g in self.group.elements()) / self.group.order
        return LocalOperator(term.modes, total, (self.group.order,) * len(term.modes), term.name)

    def term_projector(self, term: Term) -> LocalOperator:
        if term.kind == "star":
            return self.star_projector(term)
        return self.plaquette_projector(term)

    def star_split(self, term: Term) -> Tuple[Callable[[Dict[str, int]], int], Callable[[Dict[str, int]], int]]:
        """
        Functions of the edge values whose equality is the star constraint.

        The first only reads plus-side edges and the second only minus-side
        edges, so P(first = g)·A_s = P(second = g)·A_s.
        """
        G = self.group
        if self.layout == "square":
            return (
                lambda x: x["left"],
                lambda x: G.mul(G.mul(x["up"], x["right"]), G.inv(x["down"])),
            )
        return (
            lambda x: G.mul(x["left"], x["down"]),
            lambda x: G.mul(x["up"], x["right"]),
        )

    def charge_projector(self, term: Term, side: str, g: int) -> LocalOperator:
        """P(side value = g) on the side part of a straddling star."""
        roles = dict(term.roles)
        plus_fn, minus_fn = self.star_split(term)
        fn = plus_fn if side == "+" else minus_fn
        part = tuple(m for m in term.modes if self.is_plus(m) == (side == "+"))
        part_roles = {m: r for r, m in term.roles}
        diag = []
        for cfg in self._configs(len(part)):
            values = {part_roles[m]: v for m, v in zip(part, cfg)}
            full = {r: values.get(r, self.group.unit) for r in roles}
            diag.append(1.0 if fn(full) == g else 0.0)
        label = ("P_l" if side == "+" else "S_s") if self.layout == "square" else f"P{side}_s"
        return LocalOperator(part, np.diag(diag), (self.group.order,) * len(part), f"{label}{term.at}^{g}")

    def boundary_generators(self, side: str, I: Interval) -> List[LocalOperator]:
        out = []
        for t, part in self.straddling_on(I, side):
            part_roles = [r for r, m in t.roles if m in part]
            for g in self.group.elements():
                if t.kind == "star":
                    out.append(self.charge_projector(t, side, g))
                else:
                    op = self.plaquette_action(t, g, part_roles)
                    label = ("Q_p" if side == "+" else "L_l") if self.layout == "square" else f"B{side}_p"
                    out.append(LocalOperator(op.support, op.matrix, op.dims, f"{label}{t.at}^{g}"))
        return out

    def descriptor(self) -> Dict:
        return {
            "kind": "qd",
            "group": self.group.to_json(),
            "patch": [self.width, self.height],
            "cut": self.cut,
            "layout": self.layout,
        }


def build_model(kind: str, params: Optional[Dict] = None, budget: Optional[int] = None) -> LatticeModel:
    """
    Construct a model from its kind and parameters.

    Args:
        kind: ``toric``, ``qd`` or ``quantum_double``
        params: ``patch`` [w, h], ``cut``, ``layout``, ``convention`` (toric), ``group`` (qd)
        budget: Dense budget for models without a Weyl form

    Returns:
        The model with its terms enumerated
    """
    params = dict(params or {})
    width, height = params.get("patch", (4, 4))
    cut = params.get("cut")
    layout = params.get("layout", DEFAULT_LAYOUT)
    if kind == "toric":
        model = ToricCodeModel(width, height, cut, layout, params.get("convention", "z_star"))
    elif kind in ("qd", "quantum_double"):
        model = QuantumDoubleModel(params.get("group", "Z2"), width, height, cut, layout)
    else:
        raise ModelError("BAD_GROUP", f"Unknown model kind {kind!r}")
    if model.is_weyl:
        if len(model.modes) > MAX_WEYL_MODES:
            raise ModelError("BUDGET_EXCEEDED", f"{len(model.modes)} modes exceed the exact backend limit")
    else:
        check_dense(model.local_dim**4, budget, "quantum double term")
    return model


def model_from_descriptor(descriptor: Dict, budget: Optional[int] = None) -> LatticeModel:
    params = {k: v for k, v in descriptor.items() if k != "kind"}
    return build_model(descriptor.get("kind", "toric"), params, budget)


# ---------------------------------------------------------------------------
# Projection net


class ReadWriteLock:
    """Many concurrent readers or one writer."""

    def __init__(self):
        self._cond = threading.Condition(threading.Lock())
        self._readers = 0
        self._writing = False

    def acquire_read(self):
        with self._cond:
            while self._writing:
                self._cond.wait()
            self._readers += 1

    def release_read(self):
        with self._cond:
            self._readers -= 1
            if self._readers == 0:
                self._cond.notify_all()

    def acquire_write(self):
        with self._cond:
            while self._writing or self._readers:
                self._cond.wait()
            self._writing = True

    def release_write(self):
        with self._cond:
            self._writing = False
            self._cond.notify_all()


def _nbytes(value) -> int:
    if isinstance(value, SparseOperator):
        m = value.matrix
        return int(m.data.nbytes + m.indices.nbytes + m.indptr.nbytes)
    if isinstance(value, StabilizerGroup):
        return int(value.matrix.nbytes)
    return 1024


class ProjectionNet:
    """
    Region → p_R for a model, cached.

    Exact groups are keyed by the region alone; numeric projections by the
    region and the product space they are written on.
    """

    def __init__(self, model: LatticeModel, budget: Optional[int] = None, cache_bytes: int = 64 << 20):
        self.model = model
        self.budget = dense_budget(budget)
        self.cache_bytes = cache_bytes
        self._cache: "OrderedDict[Tuple, object]" = OrderedDict()
        self._size = 0
        self._lock = ReadWriteLock()

    def _get(self, key):
        self._lock.acquire_read()
        try:
            value = self._cache.get(key)
        finally:
            self._lock.release_read()
        if value is not None:
            self._lock.acquire_write()
            try:
                if key in self._cache:
                    self._cache.move_to_end(key)
            finally:
                self._lock.release_write()
        return value

    def _put(self, key, value) -> None:
        self._lock.acquire_write()
        try:
            if key in self._cache:
                return
            self._cache[key] = value
            self._size += _nbytes(value)
            while self._size > self.cache_bytes and len(self._cache) > 1:
                _, old = self._cache.popitem(last=False)
                self._size -= _nbytes(old)
        finally:
            self._lock.release_write()

    def __len__(self) -> int:
        return len(self._cache)

    def group(self, R: Region) -> StabilizerGroup:
        """Exact stabilizer group of the terms inside R, written in the patch frame."""
        key = ("group", R.key)
        cached = self._get(key)
        if cached is not None:
            return cached
        model = self.model
        group = StabilizerGroup([model.term_string(t) for t in model.terms_in(R)], model.frame)
        self._put(key, group)
        return group

    def projection(self, R: Region, modes: Optional[Sequence[Mode]] = None) -> SparseOperator:
        """Numeric p_R written on ``modes`` (default: the modes of R)."""
        modes = tuple(sorted(modes)) if modes is not None else self.model.modes_of(R)
        key = ("dense", R.key, modes)
        cached = self._get(key)
        if cached is not None:
            return cached
        space = self.model.space(modes)
        check_dense(space.dim, self.budget, "ground projection")
        terms = self.model.terms_in(R)
        missing = [t.name for t in terms if not set(t.modes) <= set(modes)]
        if missing:
            raise RegionError("REGION_NOT_NESTED", f"Terms {missing[:3]} leave the requested modes")
        projections = []
        for t in terms:
            local = self.model.term_projector(t)
            op = local.embed(space)
            projections.append(SparseOperator(space, op.matrix, True, True))
        result = range_projection(projections, space)
        self._put(key, result)
        return result


def ground_projection(model: Union[LatticeModel, ProjectionNet], R: Region, modes: Optional[Sequence[Mode]] = None):
    """p_R: the product of the commuting terms inside R."""
    net = model if isinstance(model, ProjectionNet) else ProjectionNet(model)
    return net.projection(R, modes)


# ---------------------------------------------------------------------------
# Boundary generators and straddle identities


def boundary_generators(model: LatticeModel, side: str, I: Interval) -> List[LocalOperator]:
    """
    Generators of the one-sided boundary algebra along I.

    Toric code: {C_ℓ, D_p} on the plus side, {C_s, D_ℓ} on the minus side.
    Quantum double: {P_ℓ^g, Q_p^(g)} and {S_s^(g), L_ℓ^g}.
    """
    if isinstance(model, QuantumDoubleModel):
        return model.boundary_generators(side, I)
    out = []
    for name, s in model.boundary_strings(side, I):
        support = s.support
        local = s.restrict(support)
        out.append(LocalOperator(support, local.to_dense(), (2,) * len(support), name))
    return out


def _derived_shapes(model: LatticeModel, terms: Sequence[Term]) -> List[Dict]:
    """Mirror images of the plus-side generator shapes, for the minus side."""
    axis2 = _doubled_axis(model.cut)
    shapes = []
    for t in terms:
        part = tuple(m for m in t.modes if model.is_plus(m))
        edges = []
        names = {m: r for r, m in t.roles}
        for m in part:
            role = names[m]
            if t.kind == "star":
                op = "P_g"
            else:
                op = "L_g" if role in ("bottom", "right") else "R_{g^-1}"
            site = m[0]
            horizontal = role in ("left", "right") if t.kind == "star" else role in ("bottom", "top")
            if model.layout == "square":
                if m[1] == "h":
                    image = (Site(axis2 - site.x - 1, site.y), "h")
                    reversed_edge = True
                else:
                    image = (Site(axis2 - site.x, site.y), "v")
                    reversed_edge = False
            else:
                image = (Site(axis2 - site.x, site.y), "q")
                reversed_edge = horizontal
            if reversed_edge:
                op = {"L_g": "R_{g^-1}", "R_{g^-1}": "L_g", "P_g": "P_{g^-1}"}[op]
            edges.append({"edge": [image[0].to_list(), image[1]], "op": op})
        shapes.append({"generator": f"{t.name}+", "mirror": edges})
    return shapes


def straddle_identities(model: LatticeModel, I: Interval, tol: float = 1e-12) -> CheckReport:
    """
    Verify that every term crossing the cut along I factorizes through the boundary generators.

    Weyl models are checked with integer arithmetic (A_s = C_ℓ⊗C_s, B_p = D_p⊗D_ℓ);
    quantum doubles additionally check P_ℓ^g A_s = S_s^(g) A_s and
    Q_p^(g⁻¹) B_p^g = L_ℓ^g densely on the term's edges.
    """
    report = CheckReport.start("straddle_identities", model.descriptor())
    report.regions["interval"] = I.to_json()
    side = interval_side(model, I)
    terms = sorted((t for t, _ in model.straddling_on(I, side)), key=lambda t: (t.kind, t.at))
    report.tolerances["tol"] = tol
    if not terms:
        report.finish(False, note="no straddling terms on the interval")
        return report

    exact_failures = 0
    max_residual = 0.0
    entries = []
    for t in terms:
        entry = {"term": t.name}
        if model.is_weyl:
            s = model.term_string(t)
            part_plus = tuple(m for m in t.modes if model.is_plus(m))
            part_minus = tuple(m for m in t.modes if not model.is_plus(m))
            product = s.restrict(part_plus) * s.restrict(part_minus)
            exact = product.extend(s.modes) == s
            entry["exact"] = bool(exact)
            exact_failures += 0 if exact else 1
        if isinstance(model, QuantumDoubleModel):
            residual = _qd_identity_residual(model, t)
            entry["residual"] = residual
            max_residual = max(max_residual, residual)
        entries.append(entry)

    report.dims["straddling_terms"] = len(terms)
    report.residuals["max_group_residual"] = max_residual
    report.residuals["exact_failures"] = exact_failures
    report.details["terms"] = entries
    if isinstance(model, QuantumDoubleModel):
        report.details["derived_shapes"] = _derived_shapes(model, terms)
    report.finish(exact_failures == 0 and max_residual < tol)
    return report


def interval_side(model: LatticeModel, I: Interval) -> str:
    """The side of the cut an interval sits on: its tag, else its column."""
    if I.side is not None:
        return I.side
    columns = {z.x for z in I.sites}
    if columns == {model.plus_column}:
        return "+"
    if columns == {model.plus_column + 1}:
        return "-"
    raise RegionError("BAD_INTERVAL", "Interval is not adjacent to the cut", I.to_json())


def _qd_identity_residual(model: QuantumDoubleModel, term: Term) -> float:
    G = model.group
    space = model.space(term.modes)
    worst = 0.0
    if term.kind == "star":
        A = model.star_projector(term).embed(space).to_dense()
        for g in G.elements():
            P = model.charge_projector(term, "+", g).embed(space).to_dense()
            S = model.charge_projector(term, "-", g).embed(space).to_dense()
            worst = max(worst, float(np.abs(P @ A - S @ A).max()))
        return worst
    names = {m: r for r, m in term.roles}
    plus_roles = [names[m] for m in term.modes if model.is_plus(m)]
    minus_roles = [names[m] for m in term.modes if not model.is_plus(m)]
    for g in G.elements():
        B = model.plaquette_action(term, g).embed(space).to_dense()
        Q = model.plaquette_action(term, G.inv(g), plus_roles).embed(space).to_dense()
        L = model.plaquette_action(term, g, minus_roles).embed(space).to_dense()
        worst = max(worst, float(np.abs(Q @ B - L).max()))
    return worst


# ---------------------------------------------------------------------------
# Reflection


@dataclass(frozen=True)
class Reflection:
    """Θ = θ̂ ∘ k: the mirror x ↦ 2c − x on sites composed with complex conjugation."""

    model: LatticeModel

    @property
    def cut(self) -> float:
        return self.model.cut

    def site(self, z: Site) -> Site:
        return Site(_doubled_axis(self.cut) - z.x, z.y)

    def mode(self, m: Mode) -> Mode:
        return (self.site(m[0]), m[1])

    @cached_property
    def mode_map(self) -> Dict[Mode, Mode]:
        return {m: self.mode(m) for m in self.model.modes}

    def region(self, R: Region) -> Region:
        return reflect_region(R, self.cut)

    def string(self, s: PauliString) -> PauliString:
        return reflect_string(s, {m: self.mode(m) for m in s.modes})

    def local(self, op: LocalOperator) -> LocalOperator:
        support = tuple(self.mode(m) for m in op.support)
        return LocalOperator(support, op.matrix.conj(), op.dims, f"Θ({op.name})")

    def sparse(self, op: SparseOperator) -> SparseOperator:
        """Θ of an operator, returned on the mirrored modes."""
        images = tuple(self.mode(m) for m in op.space.keys)
        target = ProductSpace.of(images, dict(zip(images, op.space.dims)))
        return LocalOperator(images, op.to_dense().conj(), op.space.dims).embed(target)


def reflection(model: LatticeModel) -> Reflection:
    """
    The antiunitary reflection of a cut-symmetric model.

    Raises NOT_SYMMETRIC unless the layout is ``rotated`` (where the mirror
    is a site map sending stars to stars and plaquettes to plaquettes) and
    the patch is symmetric about the cut.
    """
    if model.layout != "rotated":
        raise ModelError("NOT_SYMMETRIC", "The mirror is not a site map in the square layout; use layout=rotated")
    if _doubled_axis(model.cut) != model.width - 1:
        raise ModelError("NOT_SYMMETRIC", f"Patch of width {model.width} is not symmetric about x={model.cut}")
    theta = Reflection(model)
    images = {(theta.region(Region(t.sites)).key, t.kind) for t in model.terms}
    if images != {(Region(t.sites).key, t.kind) for t in model.terms}:
        raise ModelError("NOT_SYMMETRIC", "Term set is not mirror invariant")
    return theta
