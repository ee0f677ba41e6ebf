"""
Operator arithmetic on tensor-product Hilbert spaces.

Two backends live here: exact Weyl strings over ℤ/p (``PauliString`` and
``PauliSum``, qubits being p = 2) and numeric sparse matrices
(``SparseOperator``) on a ``ProductSpace``. Factor order is always the sorted
order of the mode keys.
"""

import cmath
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from app.errors import OperatorError

logger = logging.getLogger(__name__)

TOL = 1e-9
RANK_CUTOFF = 1e-8
DEFAULT_DENSE_BUDGET = 4096
SPARSE_BUDGET = 1 << 22
BUDGET_ENV = "LTO_VERIFY_BUDGET"


def dense_budget(budget: Optional[int] = None) -> int:
    """Resolve the dense dimension budget: explicit value, then environment, then default."""
    if budget is not None:
        return int(budget)
    env = os.environ.get(BUDGET_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", BUDGET_ENV, env)
    return DEFAULT_DENSE_BUDGET


def check_dense(dim: int, budget: Optional[int] = None, what: str = "operator") -> None:
    limit = dense_budget(budget)
    if dim > limit:
        raise OperatorError(
            "BUDGET_EXCEEDED", f"Dense {what} of dimension {dim} exceeds budget {limit}", {"dim": dim, "budget": limit}
        )


# ---------------------------------------------------------------------------
# Product spaces


@dataclass(frozen=True)
class ProductSpace:
    """Ordered tensor factors ``(mode key, local dimension)``."""

    factors: Tuple[Tuple[Hashable, int], ...]

    def __post_init__(self):
        keys = [k for k, _ in self.factors]
        if list(keys) != sorted(keys):
            raise OperatorError("DIM_MISMATCH", "ProductSpace factors must be sorted by key")
        if len(set(keys)) != len(keys):
            raise OperatorError("DIM_MISMATCH", "Duplicate mode in ProductSpace")
        for _, d in self.factors:
            if d < 2:
                raise OperatorError("DIM_MISMATCH", "Local dimension must be at least 2")

    @classmethod
    def of(cls, modes: Iterable[Hashable], dim: Union[int, Dict[Hashable, int]]) -> "ProductSpace":
        modes = sorted(set(modes))
        if isinstance(dim, dict):
            return cls(tuple((m, dim[m]) for m in modes))
        return cls(tuple((m, dim) for m in modes))

    @cached_property
    def keys(self) -> Tuple[Hashable, ...]:
        return tuple(k for k, _ in self.factors)

    @cached_property
    def dims(self) -> Tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @cached_property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    @cached_property
    def _index(self) -> Dict[Hashable, int]:
        return {k: i for i, k in enumerate(self.keys)}

    def index(self, key: Hashable) -> int:
        try:
            return self._index[key]
        except KeyError:
            raise OperatorError("DIM_MISMATCH", f"Mode {key!r} not in space")

    def local_dim(self, key: Hashable) -> int:
        return self.dims[self.index(key)]

    def subspace(self, keys: Iterable[Hashable]) -> "ProductSpace":
        keys = set(keys)
        return ProductSpace(tuple(f for f in self.factors if f[0] in keys))

    def union(self, other: "ProductSpace") -> "ProductSpace":
        merged = dict(self.factors)
        for k, d in other.factors:
            if merged.get(k, d) != d:
                raise OperatorError("DIM_MISMATCH", f"Mode {k!r} has two local dimensions")
            merged[k] = d
        return ProductSpace(tuple(sorted(merged.items(), key=lambda f: f[0])))

    def __contains__(self, key: Hashable) -> bool:
        return key in self._index


def _digit_permutation(space: ProductSpace, order: Sequence[Hashable]) -> np.ndarray:
    """perm[i] = index of basis state i of ``space`` in the factor ordering ``order``."""
    dims = space.dims
    space_strides = [int(np.prod(dims[i + 1 :], dtype=np.int64)) for i in range(len(dims))]
    positions = [space.index(k) for k in order]
    ordered_dims = [dims[i] for i in positions]
    ordered_strides = [int(np.prod(ordered_dims[j + 1 :], dtype=np.int64)) for j in range(len(positions))]
    idx = np.arange(space.dim, dtype=np.int64)
    perm = np.zeros(space.dim, dtype=np.int64)
    for j, i in enumerate(positions):
        perm += ((idx // space_strides[i]) % dims[i]) * ordered_strides[j]
    return perm


# ---------------------------------------------------------------------------
# Exact Weyl strings


def _omega(p: int) -> complex:
    return cmath.exp(2j * cmath.pi / p)


def _tau(p: int) -> complex:
    return cmath.exp(1j * cmath.pi / p)


def local_shift(p: int) -> np.ndarray:
    """X|h⟩ = |h+1⟩."""
    return np.roll(np.eye(p), 1, axis=0).astype(complex)


def local_clock(p: int) -> np.ndarray:
    """Z|h⟩ = ω^h|h⟩."""
    return np.diag([_omega(p) ** h for h in range(p)])


@dataclass(frozen=True)
class PauliString:
    """
    Weyl operator τ^phase · X^x · Z^z over ordered modes, τ = e^{iπ/p}.

    All arithmetic is integer arithmetic: exponents mod p, phase mod 2p.
    For qubits τ = i.
    """

    modes: Tuple[Hashable, ...]
    x: Tuple[int, ...]
    z: Tuple[int, ...]
    phase: int = 0
    p: int = 2

    def __post_init__(self):
        if not (len(self.modes) == len(self.x) == len(self.z)):
            raise OperatorError("DIM_MISMATCH", "Mode and exponent lengths differ")
        object.__setattr__(self, "x", tuple(int(v) % self.p for v in self.x))
        object.__setattr__(self, "z", tuple(int(v) % self.p for v in self.z))
        object.__setattr__(self, "phase", int(self.phase) % (2 * self.p))

    # construction

    @classmethod
    def identity(cls, modes: Sequence[Hashable], p: int = 2) -> "PauliString":
        n = len(modes)
        return cls(tuple(modes), (0,) * n, (0,) * n, 0, p)

    @classmethod
    def single(cls, modes: Sequence[Hashable], mode: Hashable, x: int = 0, z: int = 0, p: int = 2) -> "PauliString":
        modes = tuple(modes)
        i = modes.index(mode)
        xs = [0] * len(modes)
        zs = [0] * len(modes)
        xs[i] = x
        zs[i] = z
        return cls(modes, tuple(xs), tuple(zs), 0, p)

    @classmethod
    def from_label(cls, label: str, modes: Optional[Sequence[Hashable]] = None) -> "PauliString":
        """Qubit string from letters I, X, Y, Z (Y = iXZ)."""
        modes = tuple(modes) if modes is not None else tuple(range(len(label)))
        xs, zs, phase = [], [], 0
        for ch in label.upper():
            if ch not in "IXYZ":
                raise OperatorError("DIM_MISMATCH", f"Bad Pauli letter {ch!r}")
            xs.append(1 if ch in "XY" else 0)
            zs.append(1 if ch in "YZ" else 0)
            if ch == "Y":
                phase += 1
        return cls(modes, tuple(xs), tuple(zs), phase, 2)

    @classmethod
    def from_vector(cls, modes: Sequence[Hashable], vector: Sequence[int], p: int, phase: int = 0) -> "PauliString":
        n = len(modes)
        vector = [int(v) for v in vector]
        return cls(tuple(modes), tuple(vector[:n]), tuple(vector[n:]), phase, p)

    # views

    @property
    def vector(self) -> Tuple[int, ...]:
        return self.x + self.z

    @property
    def key(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        return self.x, self.z

    @property
    def coefficient(self) -> complex:
        return _tau(self.p) ** self.phase

    @property
    def support(self) -> Tuple[Hashable, ...]:
        return tuple(m for m, a, b in zip(self.modes, self.x, self.z) if a or b)

    @property
    def weight(self) -> int:
        return len(self.support)

    def is_identity(self) -> bool:
        return not any(self.x) and not any(self.z)

    def y_phase(self) -> int:
        """Qubit phase exponent e in the Y-convention, operator = i^e ⊗ σ."""
        if self.p != 2:
            raise OperatorError("DIM_MISMATCH", "y_phase is defined for qubits only")
        ys = sum(1 for a, b in zip(self.x, self.z) if a and b)
        return (self.phase - ys) % 4

    def label(self) -> str:
        if self.p != 2:
            return " ".join(f"X{a}Z{b}" for a, b in zip(self.x, self.z))
        letters = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
        return "".join(letters[(a, b)] for a, b in zip(self.x, self.z))

    # alignment

    def extend(self, modes: Sequence[Hashable]) -> "PauliString":
        """The same operator written over a superset of modes, in the given order."""
        modes = tuple(modes)
        if modes == self.modes:
            return self
        own = dict(zip(self.modes, zip(self.x, self.z)))
        missing = set(own) - set(modes)
        if missing:
            raise OperatorError("DIM_MISMATCH", f"Modes {sorted(missing)} dropped by extend")
        xs = tuple(own.get(m, (0, 0))[0] for m in modes)
        zs = tuple(own.get(m, (0, 0))[1] for m in modes)
        return PauliString(modes, xs, zs, self.phase, self.p)

    def restrict(self, modes: Sequence[Hashable]) -> "PauliString":
        """Tensor factor on ``modes`` (phase dropped)."""
        own = dict(zip(self.modes, zip(self.x, self.z)))
        modes = tuple(modes)
        return PauliString(modes, tuple(own.get(m, (0, 0))[0] for m in modes), tuple(own.get(m, (0, 0))[1] for m in modes), 0, self.p)

    def _aligned(self, other: "PauliString") -> Tuple["PauliString", "PauliString"]:
        if self.p != other.p:
            raise OperatorError("DIM_MISMATCH", "Weyl strings over different ℤ/p")
        if self.modes == other.modes:
            return self, other
        modes = tuple(sorted(set(self.modes) | set(other.modes)))
        return self.extend(modes), other.extend(modes)

    # algebra

    def __mul__(self, other: "PauliString") -> "PauliString":
        a, b = self._aligned(other)
        cross = sum(bz * cx for bz, cx in zip(a.z, b.x))
        phase = a.phase + b.phase + 2 * cross
        xs = tuple(u + v for u, v in zip(a.x, b.x))
        zs = tuple(u + v for u, v in zip(a.z, b.z))
        return PauliString(a.modes, xs, zs, phase, a.p)

    def adjoint(self) -> "PauliString":
        dot = sum(u * v for u, v in zip(self.x, self.z))
        return PauliString(
            self.modes, tuple(-u for u in self.x), tuple(-v for v in self.z), -self.phase + 2 * dot, self.p
        )

    def power(self, k: int) -> "PauliString":
        k = k % (2 * self.p * self.p)
        result = PauliString.identity(self.modes, self.p)
        for _ in range(k):
            result = result * self
        return result

    def times_phase(self, k: int) -> "PauliString":
        return PauliString(self.modes, self.x, self.z, self.phase + k, self.p)

    def symplectic(self, other: "PauliString") -> int:
        """s with self·other = ω^s · other·self."""
        a, b = self._aligned(other)
        s = sum(bz * cx for bz, cx in zip(a.z, b.x)) - sum(ax * dz for ax, dz in zip(a.x, b.z))
        return s % a.p

    def commutes(self, other: "PauliString") -> bool:
        return self.symplectic(other) == 0

    def to_dense(self) -> np.ndarray:
        check_dense(self.p ** len(self.modes), what="Weyl string")
        X, Z = local_shift(self.p), local_clock(self.p)
        locals_ = [
            np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Z, b) for a, b in zip(self.x, self.z)
        ]
        return self.coefficient * reduce(np.kron, locals_, np.eye(1, dtype=complex))

    def __str__(self) -> str:
        return f"τ^{self.phase}·{self.label()}"


def pauli_algebra(a: PauliString, b: PauliString, op: str):
    """Dispatch exact Weyl arithmetic: ``mul``, ``adjoint`` (of ``a``) or ``commutes``."""
    if op == "mul":
        return a * b
    if op == "adjoint":
        return a.adjoint()
    if op == "commutes":
        return a.commutes(b)
    raise ValueError(f"Unknown Pauli operation {op!r}")


@dataclass
class PauliSum:
    """Linear combination Σ c_k X^a Z^b with complex coefficients over fixed modes."""

    modes: Tuple[Hashable, ...]
    p: int = 2
    terms: Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], complex] = field(default_factory=dict)

    @classmethod
    def from_string(cls, string: PauliString, coef: complex = 1.0) -> "PauliSum":
        return cls(string.modes, string.p, {string.key: coef * string.coefficient})

    @classmethod
    def identity(cls, modes: Sequence[Hashable], p: int = 2) -> "PauliSum":
        return cls.from_string(PauliString.identity(tuple(modes), p))

    @classmethod
    def zero(cls, modes: Sequence[Hashable], p: int = 2) -> "PauliSum":
        return cls(tuple(modes), p, {})

    def strings(self) -> Iterable[Tuple[PauliString, complex]]:
        for (xs, zs), c in self.terms.items():
            yield PauliString(self.modes, xs, zs, 0, self.p), c

    def extend(self, modes: Sequence[Hashable]) -> "PauliSum":
        modes = tuple(modes)
        if modes == self.modes:
            return self
        out = PauliSum(modes, self.p, {})
        for s, c in self.strings():
            out._accumulate(s.extend(modes).key, c)
        return out

    def _accumulate(self, key, c: complex) -> None:
        self.terms[key] = self.terms.get(key, 0.0) + c

    def _aligned(self, other: "PauliSum") -> Tuple["PauliSum", "PauliSum"]:
        if self.modes == other.modes:
            return self, other
        modes = tuple(sorted(set(self.modes) | set(other.modes)))
        return self.extend(modes), other.extend(modes)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        a, b = self._aligned(other)
        out = PauliSum(a.modes, a.p, dict(a.terms))
        for k, c in b.terms.items():
            out._accumulate(k, c)
        return out

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + other.scaled(-1.0)

    def scaled(self, c: complex) -> "PauliSum":
        return PauliSum(self.modes, self.p, {k: c * v for k, v in self.terms.items()})

    def __mul__(self, other: Union["PauliSum", PauliString, complex, float]) -> "PauliSum":
        if isinstance(other, PauliString):
            other = PauliSum.from_string(other)
        if not isinstance(other, PauliSum):
            return self.scaled(complex(other))
        a, b = self._aligned(other)
        out = PauliSum(a.modes, a.p, {})
        for s, c in a.strings():
            for t, d in b.strings():
                prod = s * t
                out._accumulate(prod.key, c * d * prod.coefficient)
        return out

    def adjoint(self) -> "PauliSum":
        out = PauliSum(self.modes, self.p, {})
        for s, c in self.strings():
            adj = s.adjoint()
            out._accumulate(adj.key, np.conj(c) * adj.coefficient)
        return out

    def trace(self) -> complex:
        ident = ((0,) * len(self.modes), (0,) * len(self.modes))
        return self.terms.get(ident, 0.0) * self.p ** len(self.modes)

    def to_dense(self) -> np.ndarray:
        dim = self.p ** len(self.modes)
        check_dense(dim, what="Weyl sum")
        out = np.zeros((dim, dim), dtype=complex)
        for s, c in self.strings():
            out += c * s.to_dense()
        return out

    @classmethod
    def from_dense(cls, matrix: np.ndarray, modes: Sequence[Hashable], p: int = 2, tol: float = 1e-13) -> "PauliSum":
        """
        Weyl decomposition c(a,b) = Tr((X^a Z^b)† M) / p^n.

        Tr((X^aZ^b)† M) = Σ_c ω^{-b·c} M[c+a, c], a discrete Fourier transform
        in c for each shift a.
        """
        modes = tuple(modes)
        n = len(modes)
        dim = p ** n
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (dim, dim):
            raise OperatorError("DIM_MISMATCH", f"Matrix shape {matrix.shape} does not fit {n} modes of dim {p}")
        digits = np.array(np.unravel_index(np.arange(dim), (p,) * n)).T
        out = cls(modes, p, {})
        for a_idx in range(dim):
            a = digits[a_idx]
            shifted = (digits + a) % p
            rows = np.ravel_multi_index(shifted.T, (p,) * n)
            v = matrix[rows, np.arange(dim)].reshape((p,) * n)
            coeffs = np.fft.fftn(v).reshape(dim) / dim
            for b_idx in np.nonzero(np.abs(coeffs) > tol)[0]:
                out.terms[(tuple(int(t) for t in a), tuple(int(t) for t in digits[b_idx]))] = complex(coeffs[b_idx])
        return out


# ---------------------------------------------------------------------------
# Sparse operators


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """A complex sparse matrix on a ProductSpace."""

    space: ProductSpace
    matrix: sp.csr_matrix
    hermitian: bool = False
    projection: bool = False

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise OperatorError("DIM_MISMATCH", f"Matrix shape {m.shape} does not match dim {self.space.dim}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, space: ProductSpace) -> "SparseOperator":
        return cls(space, sp.identity(space.dim, dtype=complex, format="csr"), True, True)

    @classmethod
    def from_dense(cls, space: ProductSpace, matrix: np.ndarray) -> "SparseOperator":
        return cls(space, sp.csr_matrix(np.asarray(matrix, dtype=complex)))

    @property
    def dim(self) -> int:
        return self.space.dim

    def to_dense(self, budget: Optional[int] = None) -> np.ndarray:
        check_dense(self.dim, budget)
        return self.matrix.toarray()

    def adjoint(self) -> "SparseOperator":
        return SparseOperator(self.space, self.matrix.conj().T.tocsr(), self.hermitian, self.projection)

    def __matmul__(self, other: "SparseOperator") -> "SparseOperator":
        self._same_space(other)
        return SparseOperator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        self._same_space(other)
        return SparseOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        self._same_space(other)
        return SparseOperator(self.space, self.matrix - other.matrix)

    def scaled(self, c: complex) -> "SparseOperator":
        return SparseOperator(self.space, self.matrix * c)

    def _same_space(self, other: "SparseOperator") -> None:
        if self.space != other.space:
            raise OperatorError("DIM_MISMATCH", "Operators live on different spaces")

    def norm(self) -> float:
        """Frobenius norm, an upper bound for the operator norm."""
        if self.matrix.nnz == 0:
            return 0.0
        return float(spla.norm(self.matrix))

    def trace(self) -> complex:
        return complex(self.matrix.diagonal().sum())

    def is_projection(self, tol: float = TOL) -> bool:
        m = self.matrix
        if m.nnz and spla.norm(m @ m - m) > tol:
            return False
        return not (m.nnz and spla.norm(m - m.conj().T) > tol)

    def rank(self, budget: Optional[int] = None, cutoff: float = RANK_CUTOFF) -> int:
        """Rank of a projection from its trace, of anything else from its singular values."""
        if self.projection:
            return int(round(self.trace().real))
        s = np.linalg.svd(self.to_dense(budget), compute_uv=False)
        return int(np.sum(s >= cutoff * s[0])) if s.size and s[0] > 0 else 0

    def to_json(self) -> Dict:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        triplets = [
            [int(coo.row[i]), int(coo.col[i]), float(coo.data[i].real), float(coo.data[i].imag)] for i in order
        ]
        return {"dim": self.dim, "triplets": triplets}

    @classmethod
    def from_json(cls, data: Dict, space: ProductSpace) -> "SparseOperator":
        if int(data["dim"]) != space.dim:
            raise OperatorError("DIM_MISMATCH", "Serialized dimension does not match space")
        trip = np.array(data["triplets"], dtype=float).reshape(-1, 4)
        values = trip[:, 2] + 1j * trip[:, 3]
        m = sp.coo_matrix((values, (trip[:, 0].astype(int), trip[:, 1].astype(int))), shape=(space.dim, space.dim))
        return cls(space, m.tocsr())


def _as_matrix(op) -> sp.spmatrix:
    if isinstance(op, PauliString):
        return sp.csr_matrix(op.to_dense())
    if isinstance(op, PauliSum):
        return sp.csr_matrix(op.to_dense())
    if isinstance(op, SparseOperator):
        return op.matrix
    if sp.issparse(op):
        return sp.csr_matrix(op, dtype=complex)
    return sp.csr_matrix(np.asarray(op, dtype=complex))


def embed_local(op, support: Sequence[Hashable], space: ProductSpace) -> SparseOperator:
    """
    Place a local operator on ``space`` as op ⊗ 1.

    Args:
        op: Matrix (dense or sparse), SparseOperator, PauliString or PauliSum acting on ``support`` in the given order
        support: Mode keys the operator acts on
        space: Target product space

    Returns:
        The embedded operator
    """
    support = list(support)
    if len(set(support)) != len(support):
        raise OperatorError("DIM_MISMATCH", "Repeated mode in support")
    for key in support:
        if key not in space:
            raise OperatorError("DIM_MISMATCH", f"Mode {key!r} not in target space")
    local = _as_matrix(op)
    local_dim = int(np.prod([space.local_dim(k) for k in support], dtype=np.int64)) if support else 1
    if local.shape != (local_dim, local_dim):
        raise OperatorError(
            "DIM_MISMATCH", f"Operator shape {local.shape} does not match support dimension {local_dim}"
        )
    if space.dim > SPARSE_BUDGET:
        raise OperatorError("BUDGET_EXCEEDED", f"Sparse dimension {space.dim} exceeds {SPARSE_BUDGET}")
    rest = [k for k in space.keys if k not in set(support)]
    rest_dim = space.dim // local_dim
    ordered = sp.kron(local, sp.identity(rest_dim, dtype=complex, format="csr"), format="coo")
    perm = _digit_permutation(space, support + rest)
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(space.dim)
    m = sp.coo_matrix((ordered.data, (inverse[ordered.row], inverse[ordered.col])), shape=(space.dim, space.dim))
    return SparseOperator(space, m.tocsr())


def range_projection(
    projections: Sequence[SparseOperator], space: Optional[ProductSpace] = None, tol: float = TOL
) -> SparseOperator:
    """
    Projection onto the intersection of the ranges of commuting projections.

    Args:
        projections: Commuting projections on a common space
        space: Space to use when ``projections`` is empty
        tol: Tolerance on ‖P²−P‖, ‖P†−P‖ and pairwise commutators

    Returns:
        The product of the inputs, flagged as a projection
    """
    if not projections:
        if space is None:
            raise OperatorError("DIM_MISMATCH", "Empty projection list needs an explicit space")
        return SparseOperator.identity(space)
    space = projections[0].space
    for k, P in enumerate(projections):
        if P.space != space:
            raise OperatorError("DIM_MISMATCH", "Projections live on different spaces")
        if not P.is_projection(tol):
            raise OperatorError("NOT_PROJECTION", f"Input {k} is not a projection", {"index": k})
    for i in range(len(projections)):
        for j in range(i + 1, len(projections)):
            a, b = projections[i].matrix, projections[j].matrix
            comm = a @ b - b @ a
            if comm.nnz and spla.norm(comm) > tol:
                raise OperatorError("NOT_COMMUTING", f"Inputs {i} and {j} do not commute", {"pair": [i, j]})
    product = projections[0].matrix
    for P in projections[1:]:
        product = product @ P.matrix
    product.eliminate_zeros()
    result = SparseOperator(space, product, True, True)
    if not result.is_projection(max(tol, 1e-8)):
        raise OperatorError("NOT_PROJECTION", "Product of projections is not idempotent")
    return result


def partial_trace(x: SparseOperator, keep: Sequence[Hashable]) -> SparseOperator:
    """Trace out every mode of ``x.space`` not in ``keep``."""
    for key in keep:
        if key not in x.space:
            raise OperatorError("DIM_MISMATCH", f"Mode {key!r} not in operator space")
    keep_set = set(keep)
    space = x.space
    kept = space.subspace(keep_set)
    traced = [k for k in space.keys if k not in keep_set]
    dims = space.dims
    strides = [int(np.prod(dims[i + 1 :], dtype=np.int64)) for i in range(len(dims))]

    def project(indices: np.ndarray, keys: Sequence[Hashable]) -> np.ndarray:
        out = np.zeros_like(indices)
        sub = [space.index(k) for k in keys]
        sub_dims = [dims[i] for i in sub]
        for j, i in enumerate(sub):
            out += ((indices // strides[i]) % dims[i]) * int(np.prod(sub_dims[j + 1 :], dtype=np.int64))
        return out

    coo = x.matrix.tocoo()
    rows = coo.row.astype(np.int64)
    cols = coo.col.astype(np.int64)
    same = project(rows, traced) == project(cols, traced)
    m = sp.coo_matrix(
        (coo.data[same], (project(rows[same], kept.keys), project(cols[same], kept.keys))),
        shape=(kept.dim, kept.dim),
    )
    return SparseOperator(kept, m.tocsr())


@dataclass
class SchmidtDecomposition:
    """x = Σ_j s_j · left_j ⊗ right_j with HS-orthonormal factors."""

    space: ProductSpace
    minus: ProductSpace
    plus: ProductSpace
    left: List[np.ndarray]
    right: List[np.ndarray]
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def reconstruct(self) -> np.ndarray:
        dm, dp = self.minus.dim, self.plus.dim
        block = np.zeros((dm * dm, dp * dp), dtype=complex)
        for s, a, b in zip(self.values, self.left, self.right):
            block += s * np.outer(a.reshape(-1), b.reshape(-1))
        return _unshuffle(block, self.space, self.minus.keys, self.plus.keys)


def _reshuffle(x: np.ndarray, space: ProductSpace, minus: Sequence[Hashable], plus: Sequence[Hashable]) -> np.ndarray:
    n = len(space.dims)
    tensor = x.reshape(space.dims + space.dims)
    lpos = [space.index(k) for k in minus]
    rpos = [space.index(k) for k in plus]
    axes = lpos + [n + i for i in lpos] + rpos + [n + i for i in rpos]
    dm = int(np.prod([space.dims[i] for i in lpos], dtype=np.int64))
    dp = int(np.prod([space.dims[i] for i in rpos], dtype=np.int64))
    return tensor.transpose(axes).reshape(dm * dm, dp * dp)


def _unshuffle(block: np.ndarray, space: ProductSpace, minus: Sequence[Hashable], plus: Sequence[Hashable]) -> np.ndarray:
    n = len(space.dims)
    lpos = [space.index(k) for k in minus]
    rpos = [space.index(k) for k in plus]
    axes = lpos + [n + i for i in lpos] + rpos + [n + i for i in rpos]
    shape = [space.dims[i] for i in lpos] * 2 + [space.dims[i] for i in rpos] * 2
    tensor = block.reshape(shape).transpose(np.argsort(axes))
    return tensor.reshape(space.dim, space.dim)


def operator_schmidt(
    x: Union[SparseOperator, np.ndarray],
    minus: Sequence[Hashable],
    plus: Sequence[Hashable],
    space: Optional[ProductSpace] = None,
    budget: Optional[int] = None,
    cutoff: float = RANK_CUTOFF,
) -> SchmidtDecomposition:
    """
    Operator Schmidt decomposition across the partition (minus | plus).

    Args:
        x: Operator on ``space`` (taken from ``x`` when it is a SparseOperator)
        minus: Modes on the ℍ₋ side
        plus: Modes on the ℍ₊ side
        space: Space of a dense ``x``
        budget: Dense budget override
        cutoff: Singular values below ``cutoff`` times the largest are dropped

    Returns:
        Factors left_j on ``minus``, right_j on ``plus`` and singular values
    """
    if isinstance(x, SparseOperator):
        space = x.space
        dense = x.to_dense(budget)
    else:
        if space is None:
            raise OperatorError("DIM_MISMATCH", "Dense input needs its ProductSpace")
        check_dense(space.dim, budget)
        dense = np.asarray(x, dtype=complex)
    if set(minus) | set(plus) != set(space.keys) or set(minus) & set(plus):
        raise OperatorError("DIM_MISMATCH", "Cut must partition the operator's modes")
    minus_space = space.subspace(minus)
    plus_space = space.subspace(plus)
    block = _reshuffle(dense, space, minus_space.keys, plus_space.keys)
    U, s, Vh = np.linalg.svd(block, full_matrices=False)
    keep = s >= cutoff * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    dm, dp = minus_space.dim, plus_space.dim
    left = [U[:, j].reshape(dm, dm) for j in np.nonzero(keep)[0]]
    right = [Vh[j].reshape(dp, dp) for j in np.nonzero(keep)[0]]
    return SchmidtDecomposition(space, minus_space, plus_space, left, right, s[keep])


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """A dense operator on a few modes, the numeric counterpart of a Weyl string."""

    support: Tuple[Hashable, ...]
    matrix: np.ndarray
    dims: Tuple[int, ...]
    name: str = ""

    def __post_init__(self):
        dim = int(np.prod(self.dims, dtype=np.int64)) if self.dims else 1
        m = np.asarray(self.matrix, dtype=complex)
        if len(self.support) != len(self.dims) or m.shape != (dim, dim):
            raise OperatorError("DIM_MISMATCH", f"Local operator {self.name!r} does not fit its support")
        object.__setattr__(self, "matrix", m)

    @property
    def space(self) -> ProductSpace:
        return ProductSpace(tuple(sorted(zip(self.support, self.dims), key=lambda f: f[0])))

    def embed(self, space: ProductSpace) -> SparseOperator:
        return embed_local(self.matrix, self.support, space)

    def __matmul__(self, other: "LocalOperator") -> "LocalOperator":
        space = self.space.union(other.space)
        product = (self.embed(space) @ other.embed(space)).to_dense()
        return LocalOperator(space.keys, product, space.dims, f"{self.name}·{other.name}")

    def scaled(self, c: complex) -> "LocalOperator":
        return LocalOperator(self.support, c * self.matrix, self.dims, self.name)

    def adjoint(self) -> "LocalOperator":
        return LocalOperator(self.support, self.matrix.conj().T, self.dims, f"{self.name}†")
