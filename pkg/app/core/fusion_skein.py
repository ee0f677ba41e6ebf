"""
Fusion-category boundary algebras in a left-canonical path basis.

𝔅_n = End(X^⊗n) with X = ⊕ x over the simples is the multimatrix algebra
⊕_c Mat_{m_c}, rows and columns indexed by fusion paths 1 → c of length n.
Only fusion rules and quantum dimensions enter; no F-symbols are needed for
the traces, states, gluing operators, modular data and conditional
expectations computed here.

Skein vectors of H_n share the coordinates of 𝔅_n elements. With the weights
W_pq = d_c / sqrt(d_p d_q), where d_p is the product of the edge dimensions
of path p, the vectors sqrt(W)·f are orthonormal coordinates in which Γ is
left and Γ̃ right multiplication.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.operator_core import check_dense
from app.core.report import CheckReport
from app.core.vn_toolkit import (
    State,
    VNAlgebra,
    commutant,
    cond_expectation,
    orthonormal_span,
    subspace_equal,
    tomita,
)
from app.errors import FusionError

logger = logging.getLogger(__name__)

BUILTIN_CATEGORIES = ("vec_zn", "fibonacci", "ising")
DIM_TOL = 1e-9


# ---------------------------------------------------------------------------
# Category data


@dataclass(frozen=True, eq=False)
class FusionCategoryData:
    """
    Fusion rules and dimensions of a fusion category.

    ``N[a, b, c]`` is N^c_{ab}; simples are referred to by index, label 0 is
    not assumed to be the unit.
    """

    labels: Tuple[str, ...]
    unit: int
    dual: Tuple[int, ...]
    N: np.ndarray
    dims: np.ndarray
    name: str = "explicit"

    def __post_init__(self):
        self.validate()

    @property
    def rank(self) -> int:
        return len(self.labels)

    @property
    def global_dim(self) -> float:
        return float(np.sum(self.dims**2))

    def index(self, label: Union[str, int]) -> int:
        if isinstance(label, (int, np.integer)):
            return int(label)
        try:
            return self.labels.index(label)
        except ValueError:
            raise FusionError("INVALID_FUSION_DATA", f"Unknown simple {label!r}", {"labels": list(self.labels)})

    def fuse(self, a: int, b: int) -> Dict[int, int]:
        return {c: int(self.N[a, b, c]) for c in range(self.rank) if self.N[a, b, c]}

    @cached_property
    def adjacency(self) -> np.ndarray:
        """A[c', c] = Σ_x N^c_{c' x}: one step of a path with X = ⊕ x."""
        return self.N.sum(axis=1)

    def validate(self) -> None:
        r = len(self.labels)

        def bad(identity: str, message: str, **detail):
            raise FusionError("INVALID_FUSION_DATA", f"{identity}: {message}", {"identity": identity, **detail})

        if self.N.shape != (r, r, r):
            bad("shape", f"N has shape {self.N.shape}, expected {(r, r, r)}")
        if np.any(self.N < 0) or np.any(self.N != np.round(self.N)):
            bad("multiplicities", "N must hold nonnegative integers")
        if not 0 <= self.unit < r or len(self.dual) != r:
            bad("shape", "unit or dual map out of range")
        eye = np.eye(r)
        if not (np.array_equal(self.N[self.unit], eye) and np.array_equal(self.N[:, self.unit, :], eye)):
            bad("unit", "N^c_{1a} must equal δ_{ac}")
        for a in range(r):
            expected = np.zeros(r)
            expected[self.dual[a]] = 1
            if not np.array_equal(self.N[a, :, self.unit], expected):
                bad("duality", f"N^1_{{{self.labels[a]} b}} must be δ_{{b, dual}}", simple=self.labels[a])
        left = np.einsum("abe,ecd->abcd", self.N, self.N)
        right = np.einsum("afd,bcf->abcd", self.N, self.N)
        if not np.array_equal(left, right):
            bad("associativity", "Σ_e N^e_{ab}N^d_{ec} ≠ Σ_f N^d_{af}N^f_{bc}")
        if self.dims.shape != (r,) or np.any(self.dims <= 0):
            bad("dimensions", "quantum dimensions must be positive")
        lhs = np.outer(self.dims, self.dims)
        rhs = np.einsum("abc,c->ab", self.N, self.dims)
        if not np.allclose(lhs, rhs, atol=DIM_TOL):
            bad("dimension homomorphism", "d_a d_b ≠ Σ_c N^c_{ab} d_c", residual=float(np.max(np.abs(lhs - rhs))))

    def to_json(self) -> Dict:
        return {
            "name": self.name,
            "labels": list(self.labels),
            "unit": self.labels[self.unit],
            "dual": [self.labels[a] for a in self.dual],
            "N": self.N.astype(int).tolist(),
            "dims": [float(d) for d in self.dims],
            "D": self.global_dim,
        }


def perron_frobenius_dims(N: np.ndarray, unit: int) -> np.ndarray:
    """Dimensions as the positive eigenvector of Σ_a L_a, normalized by d_1 = 1."""
    total = N.sum(axis=0).astype(float)
    w, v = np.linalg.eig(total)
    vec = np.abs(np.real(v[:, int(np.argmax(np.real(w)))]))
    if vec[unit] <= 0:
        raise FusionError("INVALID_FUSION_DATA", "dimensions: Perron–Frobenius vector vanishes on the unit")
    return vec / vec[unit]


def _vec_zn(n: int) -> FusionCategoryData:
    if n < 1:
        raise FusionError("INVALID_FUSION_DATA", f"Vec(Z/{n}) needs a positive order")
    N = np.zeros((n, n, n))
    for a, b in product(range(n), repeat=2):
        N[a, b, (a + b) % n] = 1
    return FusionCategoryData(
        tuple(str(a) for a in range(n)), 0, tuple((-a) % n for a in range(n)), N, np.ones(n), f"vec_z{n}"
    )


def _fibonacci() -> FusionCategoryData:
    N = np.zeros((2, 2, 2))
    N[0, 0, 0] = N[0, 1, 1] = N[1, 0, 1] = 1
    N[1, 1, 0] = N[1, 1, 1] = 1
    phi = (1 + math.sqrt(5)) / 2
    return FusionCategoryData(("1", "tau"), 0, (0, 1), N, np.array([1.0, phi]), "fibonacci")


def _ising() -> FusionCategoryData:
    one, sigma, psi = 0, 1, 2
    N = np.zeros((3, 3, 3))
    for a in range(3):
        N[one, a, a] = N[a, one, a] = 1
    N[sigma, sigma, one] = N[sigma, sigma, psi] = 1
    N[sigma, psi, sigma] = N[psi, sigma, sigma] = 1
    N[psi, psi, one] = 1
    return FusionCategoryData(("1", "sigma", "psi"), 0, (0, 1, 2), N, np.array([1.0, math.sqrt(2), 1.0]), "ising")


def _explicit(data: Dict) -> FusionCategoryData:
    try:
        labels = tuple(str(x) for x in data["labels"])
        unit = labels.index(str(data["unit"])) if not isinstance(data["unit"], int) else int(data["unit"])
        dual = tuple(labels.index(str(x)) if not isinstance(x, int) else int(x) for x in data["dual"])
        N = np.asarray(data["N"], dtype=float)
    except (KeyError, ValueError, TypeError) as e:
        raise FusionError("INVALID_FUSION_DATA", f"shape: malformed category JSON ({e})", {"identity": "shape"})
    if N.shape != (len(labels),) * 3:
        raise FusionError("INVALID_FUSION_DATA", f"shape: N has shape {N.shape}", {"identity": "shape"})
    dims = data.get("dims")
    dims = np.asarray(dims, dtype=float) if dims is not None else perron_frobenius_dims(N, unit)
    return FusionCategoryData(labels, unit, dual, N, dims, str(data.get("name", "explicit")))


def build_category(spec: Union[str, Dict]) -> FusionCategoryData:
    """
    Build and validate a category.

    ``spec`` is ``"vec_zn(N)"`` (also ``"vec_zN"``), ``"fibonacci"``,
    ``"ising"`` or the explicit JSON object
    ``{labels, unit, dual, N, dims?}``.
    """
    if isinstance(spec, dict):
        return _explicit(spec)
    name = spec.strip().lower()
    match = re.fullmatch(r"vec_zn?\(?(\d+)\)?", name)
    if match:
        return _vec_zn(int(match.group(1)))
    if name in ("fibonacci", "fib"):
        return _fibonacci()
    if name == "ising":
        return _ising()
    raise FusionError("INVALID_FUSION_DATA", f"Unknown category {spec!r}", {"builtins": list(BUILTIN_CATEGORIES)})


# ---------------------------------------------------------------------------
# Paths


@dataclass(frozen=True)
class FusionPath:
    charges: Tuple[int, ...]
    edges: Tuple[int, ...]
    mults: Tuple[int, ...]

    @property
    def end(self) -> int:
        return self.charges[-1]

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def prefix(self) -> "FusionPath":
        return FusionPath(self.charges[:-1], self.edges[:-1], self.mults[:-1])

    @property
    def last_step(self) -> Tuple[int, int, int, int]:
        return self.charges[-2], self.edges[-1], self.mults[-1], self.charges[-1]

    def sort_key(self) -> Tuple[int, ...]:
        return tuple(v for step in zip(self.edges, self.mults, self.charges[1:]) for v in step)

    def label(self, cat: FusionCategoryData) -> str:
        parts = [cat.labels[self.charges[0]]]
        for x, mu, c in zip(self.edges, self.mults, self.charges[1:]):
            tag = f"{cat.labels[x]}" + (f"#{mu}" if cat.N.max() > 1 else "")
            parts.append(f"-{tag}->{cat.labels[c]}")
        return "".join(parts)


def path_basis(cat: FusionCategoryData, n: int) -> Dict[int, List[FusionPath]]:
    """Admissible paths 1 → c of length ``n`` per total charge c, in the fixed lexicographic order."""
    if n < 0:
        raise FusionError("INVALID_FUSION_DATA", "Path length must be nonnegative")
    paths = [FusionPath((cat.unit,), (), ())]
    for _ in range(n):
        grown = []
        for p in paths:
            for x in range(cat.rank):
                for c, mult in cat.fuse(p.end, x).items():
                    for mu in range(mult):
                        grown.append(FusionPath(p.charges + (c,), p.edges + (x,), p.mults + (mu,)))
        paths = grown
    out: Dict[int, List[FusionPath]] = {}
    for p in sorted(paths, key=FusionPath.sort_key):
        out.setdefault(p.end, []).append(p)
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# Path algebra


class PathAlgebra:
    """𝔅_n = ⊕_c Mat_{m_c} for one category and length."""

    def __init__(self, cat: FusionCategoryData, n: int):
        self.cat = cat
        self.n = n
        self.paths = path_basis(cat, n)
        self._index = {p: (c, i) for c, ps in self.paths.items() for i, p in enumerate(ps)}

    @property
    def charges(self) -> Tuple[int, ...]:
        return tuple(self.paths)

    def multiplicities(self) -> Dict[str, int]:
        return {self.cat.labels[c]: len(self.paths.get(c, [])) for c in range(self.cat.rank)}

    def block_size(self, c: int) -> int:
        return len(self.paths[c])

    @property
    def dim(self) -> int:
        return sum(len(ps) ** 2 for ps in self.paths.values())

    @property
    def size(self) -> int:
        """Dimension Σ m_c of the regular path representation."""
        return sum(len(ps) for ps in self.paths.values())

    def edge_dims(self, c: int) -> np.ndarray:
        """d_p for the paths of block c."""
        d = self.cat.dims
        return np.array([float(np.prod([d[x] for x in p.edges])) for p in self.paths[c]])

    def sectors(self, c: int) -> List[Tuple[int, ...]]:
        return [p.edges for p in self.paths[c]]

    def identity(self) -> "PathElement":
        return PathElement(self, {c: np.eye(len(ps), dtype=complex) for c, ps in self.paths.items()})

    def zero(self) -> "PathElement":
        return PathElement(self, {c: np.zeros((len(ps), len(ps)), dtype=complex) for c, ps in self.paths.items()})

    def matrix_unit(self, c: int, i: int, j: int) -> "PathElement":
        x = self.zero()
        x.blocks[c][i, j] = 1.0
        return x

    def matrix_units(self) -> Iterable["PathElement"]:
        for c, ps in self.paths.items():
            for i in range(len(ps)):
                for j in range(len(ps)):
                    yield self.matrix_unit(c, i, j)

    def random_element(self, rng: np.random.Generator) -> "PathElement":
        return PathElement(
            self,
            {c: rng.normal(size=(len(ps), len(ps))) + 1j * rng.normal(size=(len(ps), len(ps))) for c, ps in self.paths.items()},
        )

    def sector_element(self, source: Sequence[int], target: Sequence[int], rng: Optional[np.random.Generator] = None) -> "PathElement":
        """An element mapping the edge sector ``source`` to ``target`` (all ones, or random with ``rng``)."""
        x = self.zero()
        for c, ps in self.paths.items():
            for i, p in enumerate(ps):
                for j, q in enumerate(ps):
                    if p.edges == tuple(target) and q.edges == tuple(source):
                        x.blocks[c][i, j] = 1.0 if rng is None else rng.normal() + 1j * rng.normal()
        return x

    def to_matrices(self, x: "PathElement") -> np.ndarray:
        """Regular path representation: the block-diagonal matrix on ℂ^{Σ m_c}."""
        out = np.zeros((self.size, self.size), dtype=complex)
        offset = 0
        for c in self.charges:
            m = self.block_size(c)
            out[offset : offset + m, offset : offset + m] = x.blocks[c]
            offset += m
        return out

    def from_matrix(self, matrix: np.ndarray) -> "PathElement":
        blocks = {}
        offset = 0
        for c in self.charges:
            m = self.block_size(c)
            blocks[c] = np.array(matrix[offset : offset + m, offset : offset + m], dtype=complex)
            offset += m
        return PathElement(self, blocks)

    def vn_algebra(self) -> VNAlgebra:
        units = [self.to_matrices(e) for e in self.matrix_units()]
        return VNAlgebra(orthonormal_span(units, dim=self.size), np.eye(self.size, dtype=complex), f"B{self.n}")

    def psi_density(self) -> np.ndarray:
        D = self.cat.global_dim
        diag = np.concatenate([self.edge_dims(c) * self.cat.dims[c] for c in self.charges]) / D**self.n
        return np.diag(diag).astype(complex)

    def omega_density(self) -> np.ndarray:
        diag = np.concatenate([self.cat.dims[c] / self.edge_dims(c) for c in self.charges])
        return np.diag(diag).astype(complex)

    @cached_property
    def previous(self) -> "PathAlgebra":
        if self.n < 1:
            raise FusionError("INVALID_FUSION_DATA", "𝔅_0 has no predecessor")
        return PathAlgebra(self.cat, self.n - 1)

    def embed_previous(self, y: "PathElement") -> "PathElement":
        """φ ↦ φ ⊗ id_X: copies of y's blocks on paths sharing their last step."""
        prev = self.previous
        x = self.zero()
        for c, ps in self.paths.items():
            for i, p in enumerate(ps):
                cp, ip = prev._index[p.prefix]
                for j, q in enumerate(ps):
                    if q.last_step == p.last_step:
                        _, jq = prev._index[q.prefix]
                        x.blocks[c][i, j] = y.blocks[cp][ip, jq]
        return x

    def restrict_previous(self, x: "PathElement") -> "PathElement":
        """Inverse of ``embed_previous`` on its image, read off the first copy of each block."""
        prev = self.previous
        y = prev.zero()
        chosen: Dict[int, Tuple[int, int, int, int]] = {}
        for c, ps in self.paths.items():
            for i, p in enumerate(ps):
                cp, ip = prev._index[p.prefix]
                if chosen.setdefault(cp, p.last_step) != p.last_step:
                    continue
                for j, q in enumerate(ps):
                    if q.last_step == p.last_step:
                        y.blocks[cp][ip, prev._index[q.prefix][1]] = x.blocks[c][i, j]
        return y


@dataclass(eq=False)
class PathElement:
    algebra: PathAlgebra
    blocks: Dict[int, np.ndarray]

    def __matmul__(self, other: "PathElement") -> "PathElement":
        return PathElement(self.algebra, {c: self.blocks[c] @ other.blocks[c] for c in self.blocks})

    def __add__(self, other: "PathElement") -> "PathElement":
        return PathElement(self.algebra, {c: self.blocks[c] + other.blocks[c] for c in self.blocks})

    def __sub__(self, other: "PathElement") -> "PathElement":
        return PathElement(self.algebra, {c: self.blocks[c] - other.blocks[c] for c in self.blocks})

    def scaled(self, s: complex) -> "PathElement":
        return PathElement(self.algebra, {c: s * b for c, b in self.blocks.items()})

    def adjoint(self) -> "PathElement":
        return PathElement(self.algebra, {c: b.conj().T for c, b in self.blocks.items()})

    def norm(self) -> float:
        return float(math.sqrt(sum(np.linalg.norm(b) ** 2 for b in self.blocks.values())))

    def weighted(self, power: float) -> "PathElement":
        """Entry (p, q) times (d_p / d_q)^power, i.e. sector a⃗ → b⃗ times (d_b⃗ / d_a⃗)^power."""
        out = {}
        for c, b in self.blocks.items():
            d = self.algebra.edge_dims(c)
            out[c] = b * np.power(np.outer(d, 1.0 / d), power)
        return PathElement(self.algebra, out)


# ---------------------------------------------------------------------------
# Traces, states and the weight


def spherical_trace(x: PathElement) -> complex:
    dims = x.algebra.cat.dims
    return complex(sum(dims[c] * np.trace(b) for c, b in x.blocks.items()))


def canonical_state_psi(x: PathElement) -> complex:
    """ψ_n(x) = D^{−n} Σ_p d_{edges(p)} d_{end(p)} x_pp."""
    alg = x.algebra
    D = alg.cat.global_dim
    total = sum(alg.cat.dims[c] * np.dot(alg.edge_dims(c), np.diag(b)) for c, b in x.blocks.items())
    return complex(total / D**alg.n)


def weight_omega(x: PathElement) -> complex:
    """ω(x) = Σ_p d_{end(p)} / d_{edges(p)} x_pp."""
    alg = x.algebra
    return complex(sum(alg.cat.dims[c] * np.dot(1.0 / alg.edge_dims(c), np.diag(b)) for c, b in x.blocks.items()))


def _weights(alg: PathAlgebra, c: int) -> np.ndarray:
    d = alg.edge_dims(c)
    return alg.cat.dims[c] / np.sqrt(np.outer(d, d))


def skein_inner(f: PathElement, g: PathElement) -> complex:
    """⟨f|g⟩ = Σ over sectors (d_a⃗ d_b⃗)^{−1/2} tr_𝒳(f†g) restricted to the sector."""
    if f.algebra.n != g.algebra.n:
        raise FusionError("INVALID_FUSION_DATA", "Skein vectors of different lengths")
    alg = f.algebra
    return complex(sum(np.sum(_weights(alg, c) * np.conj(f.blocks[c]) * g.blocks[c]) for c in f.blocks))


def partial_trace_last(x: PathElement, edge: Optional[int] = None) -> PathElement:
    """
    Spherical partial trace over the last strand.

    With ``edge`` only the part whose last edge is that simple on both sides
    is closed. Block c' of the result collects (d_c / d_c') times the
    sub-blocks reached by the steps c' → c.
    """
    alg = x.algebra
    prev = alg.previous
    y = prev.zero()
    dims = alg.cat.dims
    for c, ps in alg.paths.items():
        for i, p in enumerate(ps):
            cp, ip, step = p.charges[-2], prev._index[p.prefix][1], p.last_step
            if edge is not None and p.edges[-1] != edge:
                continue
            for j, q in enumerate(ps):
                if q.last_step == step:
                    y.blocks[cp][ip, prev._index[q.prefix][1]] += dims[c] / dims[cp] * x.blocks[c][i, j]
    return y


def cap_expectation(x: PathElement) -> PathElement:
    """E^n_{n−1}(x) = D^{−1} Σ_x d_x (cap the last strand in the x sector)."""
    cat = x.algebra.cat
    out = x.algebra.previous.zero()
    for e in range(cat.rank):
        out = out + partial_trace_last(x, e).scaled(cat.dims[e])
    return out.scaled(1.0 / cat.global_dim)


# ---------------------------------------------------------------------------
# Skein standard form


class SkeinSpace:
    """H_n in orthonormal coordinates v = sqrt(W)·f, one coordinate per matrix entry of 𝔅_n."""

    def __init__(self, alg: PathAlgebra, budget: Optional[int] = None):
        check_dense(alg.dim, budget, "skein space")
        self.algebra = alg
        self.coords: List[Tuple[int, int, int]] = [
            (c, i, j) for c in alg.charges for i in range(alg.block_size(c)) for j in range(alg.block_size(c))
        ]
        self._sqrt_w = np.concatenate([np.sqrt(_weights(alg, c)).reshape(-1) for c in alg.charges])
        self._swap = np.array([self.coords.index((c, j, i)) for c, i, j in self.coords])

    @property
    def dim(self) -> int:
        return len(self.coords)

    def vector(self, f: PathElement) -> np.ndarray:
        return self._sqrt_w * np.concatenate([f.blocks[c].reshape(-1) for c in self.algebra.charges])

    def element(self, v: np.ndarray) -> PathElement:
        flat = np.asarray(v, dtype=complex) / self._sqrt_w
        blocks, offset = {}, 0
        for c in self.algebra.charges:
            m = self.algebra.block_size(c)
            blocks[c] = flat[offset : offset + m * m].reshape(m, m).copy()
            offset += m * m
        return PathElement(self.algebra, blocks)

    @property
    def omega(self) -> np.ndarray:
        """Ω_n, the identity of 𝔅_n as a skein vector."""
        return self.vector(self.algebra.identity())

    def _assemble(self, per_block) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        offset = 0
        for c in self.algebra.charges:
            m = self.algebra.block_size(c)
            out[offset : offset + m * m, offset : offset + m * m] = per_block(c, m)
            offset += m * m
        scale = self._sqrt_w
        return scale[:, None] * out / scale[None, :]

    def gluing(self, phi: PathElement, side: str = "post") -> np.ndarray:
        """
        Γ_φ (``post``: f ↦ (d_b⃗/d_a⃗)^{1/4} φ∘f) or Γ̃_φ (``pre``:
        f ↦ (d_a⃗/d_b⃗)^{1/4} f∘φ) as a matrix in orthonormal coordinates.
        """
        if side == "post":
            scaled = phi.weighted(0.25)
            return self._assemble(lambda c, m: np.kron(scaled.blocks[c], np.eye(m)))
        if side == "pre":
            scaled = phi.weighted(-0.25)
            return self._assemble(lambda c, m: np.kron(np.eye(m), scaled.blocks[c].T))
        raise FusionError("INVALID_FUSION_DATA", f"Unknown gluing side {side!r}", {"side": side})

    def apply_j(self, v: np.ndarray) -> np.ndarray:
        """J_n: f ↦ f† blockwise, conjugate-linear."""
        return np.conj(np.asarray(v)[self._swap])

    @property
    def j_matrix(self) -> np.ndarray:
        """J_n = P∘K with P the transpose permutation."""
        return np.eye(self.dim)[:, self._swap].T.astype(complex)

    @property
    def delta(self) -> np.ndarray:
        """Diagonal of Δ_ω: sector a⃗ → b⃗ multiplied by d_a⃗ / d_b⃗."""
        parts = []
        for c in self.algebra.charges:
            d = self.algebra.edge_dims(c)
            parts.append(np.outer(1.0 / d, d).reshape(-1))
        return np.concatenate(parts)


def gluing(phi: PathElement, side: str = "post", budget: Optional[int] = None) -> np.ndarray:
    return SkeinSpace(phi.algebra, budget).gluing(phi, side)


@dataclass(eq=False)
class ModularSkeinData:
    space: SkeinSpace
    delta: np.ndarray
    extra: Dict = field(default_factory=dict)

    @property
    def omega(self) -> np.ndarray:
        return self.space.omega

    def apply_j(self, v: np.ndarray) -> np.ndarray:
        return self.space.apply_j(v)

    def apply_s(self, v: np.ndarray) -> np.ndarray:
        """S_ω = J_nΔ_ω^{1/2} = Δ_ω^{−1/2}J_n."""
        return self.apply_j(np.sqrt(self.delta) * v)

    def sigma_omega(self, phi: PathElement, t: complex) -> PathElement:
        """σ^ω_t(φ) = (d_a⃗/d_b⃗)^{it} φ."""
        return phi.weighted(-1j * t)

    def sigma_psi(self, phi: PathElement, t: complex) -> PathElement:
        """σ^ψ_t(φ) = (d_b⃗/d_a⃗)^{it} φ."""
        return phi.weighted(1j * t)

    def spectrum(self) -> Dict[str, float]:
        """Δ_ω eigenvalue per nonempty sector pair, keyed ``a⃗->b⃗``."""
        labels = self.space.algebra.cat.labels
        out = {}
        for c in self.space.algebra.charges:
            sectors = self.space.algebra.sectors(c)
            d = self.space.algebra.edge_dims(c)
            for i, b in enumerate(sectors):
                for j, a in enumerate(sectors):
                    key = f"{','.join(labels[x] for x in a)}->{','.join(labels[x] for x in b)}"
                    out[key] = float(d[j] / d[i])
        return dict(sorted(out.items()))

    def residuals(self, rng: np.random.Generator, samples: int = 3) -> Dict[str, float]:
        sp = self.space
        alg = sp.algebra
        out = {"j_squared": 0.0, "j_gamma_j": 0.0, "s_on_gamma_omega": 0.0, "sigma_psi_vs_omega": 0.0, "omega_weight": 0.0}
        for _ in range(samples):
            v = rng.normal(size=sp.dim) + 1j * rng.normal(size=sp.dim)
            out["j_squared"] = max(out["j_squared"], float(np.linalg.norm(self.apply_j(self.apply_j(v)) - v)))
            phi = alg.random_element(rng)
            g_dag = sp.gluing(phi.adjoint(), "post")
            jgj = sp.j_matrix @ np.conj(g_dag) @ sp.j_matrix
            out["j_gamma_j"] = max(out["j_gamma_j"], float(np.linalg.norm(jgj - sp.gluing(phi, "pre"))))
            lhs = self.apply_s(sp.gluing(phi, "post") @ self.omega)
            rhs = g_dag @ self.omega
            out["s_on_gamma_omega"] = max(out["s_on_gamma_omega"], float(np.linalg.norm(lhs - rhs)))
            t = float(rng.uniform(-2, 2))
            out["sigma_psi_vs_omega"] = max(
                out["sigma_psi_vs_omega"], (self.sigma_psi(phi, t) - self.sigma_omega(phi, -t)).norm()
            )
            route = np.vdot(self.omega, sp.gluing(phi, "post") @ self.omega)
            out["omega_weight"] = max(out["omega_weight"], abs(route - weight_omega(phi)))
        return out

    def to_json(self) -> Dict:
        return {"dim": self.space.dim, "spectrum": self.spectrum(), **self.extra}


def skein_modular(cat: FusionCategoryData, n: int, budget: Optional[int] = None) -> ModularSkeinData:
    if n < 1:
        raise FusionError("INVALID_FUSION_DATA", "skein_modular needs n ≥ 1")
    space = SkeinSpace(PathAlgebra(cat, n), budget)
    if np.any(space.delta <= 0):
        raise FusionError("INVALID_FUSION_DATA", "Δ_ω is not positive")
    return ModularSkeinData(space, space.delta)


# ---------------------------------------------------------------------------
# Conditional expectation 𝔅_n → 𝔅_{n−1}


@dataclass(eq=False)
class BoundaryExpectation:
    """E^n_{n−1} realized as ι*(·)ι on the regular path representation."""

    algebra: PathAlgebra
    _expectation: object

    def __call__(self, x: PathElement) -> PathElement:
        image = self._expectation(self.algebra.to_matrices(x))
        return self.algebra.restrict_previous(self.algebra.from_matrix(image))

    def choi_min_eig(self) -> float:
        """Smallest Choi eigenvalue over the blocks of 𝔅_n; ≥ 0 for a completely positive map."""
        alg = self.algebra
        prev = alg.previous
        worst = math.inf
        for c in alg.charges:
            m = alg.block_size(c)
            choi = np.zeros((m * prev.size, m * prev.size), dtype=complex)
            for i in range(m):
                for j in range(m):
                    image = prev.to_matrices(self(alg.matrix_unit(c, i, j)))
                    choi[i * prev.size : (i + 1) * prev.size, j * prev.size : (j + 1) * prev.size] = image
            worst = min(worst, float(np.linalg.eigvalsh((choi + choi.conj().T) / 2)[0]))
        return worst

    def residuals(self, rng: np.random.Generator, samples: int = 3) -> Dict[str, float]:
        alg = self.algebra
        prev = alg.previous
        one = self(alg.identity())
        out = {
            "unital": (one - prev.identity()).norm(),
            "psi_preserving": 0.0,
            "bimodular": 0.0,
            "oracle": 0.0,
            "choi_min_eig": self.choi_min_eig(),
        }
        for _ in range(samples):
            x = alg.random_element(rng)
            a, b = prev.random_element(rng), prev.random_element(rng)
            e = self(x)
            out["psi_preserving"] = max(out["psi_preserving"], abs(canonical_state_psi(x) - canonical_state_psi(e)))
            moved = self(alg.embed_previous(a) @ x @ alg.embed_previous(b))
            out["bimodular"] = max(out["bimodular"], (moved - a @ e @ b).norm())
            out["oracle"] = max(out["oracle"], (e - cap_expectation(x)).norm())
        return out


def boundary_cond_exp(cat: FusionCategoryData, n: int) -> BoundaryExpectation:
    """The ψ-preserving conditional expectation 𝔅_n → 𝔅_{n−1} ⊗ id_X."""
    if n < 1:
        raise FusionError("INVALID_FUSION_DATA", "boundary_cond_exp needs n ≥ 1")
    alg = PathAlgebra(cat, n)
    prev = alg.previous
    big = alg.vn_algebra()
    units = [alg.to_matrices(alg.embed_previous(e)) for e in prev.matrix_units()]
    small = VNAlgebra(orthonormal_span(units, dim=alg.size), np.eye(alg.size, dtype=complex), f"B{n - 1}")
    return BoundaryExpectation(alg, cond_expectation(big, small, State(alg.psi_density())))


# ---------------------------------------------------------------------------
# Report


def skein_duality_report(cat: FusionCategoryData, n: int, seed: int = 0, tol: float = 1e-9, budget: Optional[int] = None) -> CheckReport:
    """
    Cross-checks of the skein standard form of 𝔅_n.

    Commutant duality Γ(𝔅_n)′ = Γ̃(𝔅_n), J_nΓ(𝔅_n)J_n = Γ̃(𝔅_n), the toolkit's
    Tomita data of (Γ(𝔅_n), Ω_n) against Δ_ω, the skein identities on random
    elements and, for n ≥ 1, the conditional expectation against the cap
    formula.
    """
    report = CheckReport.start("skein_duality", {"category": cat.name}, {"n": n, "seed": seed})
    rng = np.random.default_rng(seed)
    alg = PathAlgebra(cat, n)
    data = skein_modular(cat, n, budget)
    sp = data.space
    report.dims.update({"m": alg.multiplicities(), "algebra": alg.dim, "skein_space": sp.dim, "D": cat.global_dim})
    report.tolerances.update({"tol": tol, "angle": 1e-8})

    units = list(alg.matrix_units())
    gamma = VNAlgebra(orthonormal_span([sp.gluing(u, "post") for u in units], dim=sp.dim), np.eye(sp.dim), "Gamma")
    gamma_t = orthonormal_span([sp.gluing(u, "pre") for u in units], dim=sp.dim)
    same, angle = subspace_equal(commutant(gamma, budget).space, gamma_t)
    turned = orthonormal_span([sp.j_matrix @ np.conj(g) @ sp.j_matrix for g in gamma.basis], dim=sp.dim)
    j_same, j_angle = subspace_equal(turned, gamma_t)
    modular = tomita(gamma, sp.omega, budget=budget, check_duality=False)
    spectrum_gap = float(np.max(np.abs(np.sort(modular.spectrum) - np.sort(sp.delta))))

    residuals = data.residuals(rng)
    residuals.update({"commutant_angle": angle, "j_duality_angle": j_angle, "tomita_spectrum": spectrum_gap})
    residuals["psi_unit"] = abs(canonical_state_psi(alg.identity()) - 1)
    residuals["omega_unit"] = abs(weight_omega(alg.identity()) - cat.rank**n)
    passed = same and j_same
    for key, value in boundary_cond_exp(cat, n).residuals(rng).items():
        residuals[f"cond_exp_{key}"] = value
    for key, value in residuals.items():
        if key == "cond_exp_choi_min_eig":
            passed = passed and value > -tol
        elif not key.endswith("angle"):
            passed = passed and value < tol * max(1.0, float(sp.dim))
    report.residuals.update(residuals)
    report.details["spectrum"] = data.spectrum()
    logger.info("skein duality %s n=%d: %s", cat.name, n, "pass" if passed else "FAIL")
    return report.finish(passed)
