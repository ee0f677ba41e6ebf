"""
Exact stabilizer arithmetic over GF(p).

A Weyl string τ^k X^a Z^b over an ordered list of modes is identified with
the vector (a|b) ∈ GF(p)^{2n} plus an integer phase. Abelian groups of Weyl
strings (the ground projections of the lattice models) and the operator
spaces span{W p_S} the checks compare become subspaces, so span equalities
are decided by ranks instead of floating point angles.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import galois
import numpy as np

from app.core.operator_core import PauliString, PauliSum
from app.errors import OperatorError

logger = logging.getLogger(__name__)

CLASS_LIMIT = 1 << 14


@lru_cache(maxsize=None)
def field(p: int):
    """The Galois field GF(p)."""
    return galois.GF(p)


def _as_int(array) -> np.ndarray:
    return np.asarray(array.view(np.ndarray) if isinstance(array, galois.FieldArray) else array, dtype=np.int64)


def rref(rows: np.ndarray, p: int, ncols: int) -> np.ndarray:
    """Nonzero rows of the reduced row echelon form."""
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, ncols) % p
    if rows.shape[0] == 0 or ncols == 0:
        return np.zeros((0, ncols), dtype=np.int64)
    reduced = _as_int(field(p)(rows).row_reduce())
    return reduced[np.any(reduced != 0, axis=1)]


def null_space(matrix: np.ndarray, p: int, ncols: int) -> np.ndarray:
    """Rows x spanning {x : matrix · x = 0}."""
    matrix = np.asarray(matrix, dtype=np.int64).reshape(-1, ncols) % p
    if ncols == 0:
        return np.zeros((0, 0), dtype=np.int64)
    if matrix.shape[0] == 0 or not np.any(matrix):
        return np.eye(ncols, dtype=np.int64)
    return _as_int(field(p)(matrix).null_space()).reshape(-1, ncols)


def solve_left(matrix: np.ndarray, v: np.ndarray, p: int) -> Optional[np.ndarray]:
    """
    Find c with c · matrix = v over GF(p).

    Args:
        matrix: (k, N) integer matrix, rows need not be independent
        v: Target vector of length N
        p: Field characteristic

    Returns:
        Coefficient vector of length k, or None when v is not in the row space
    """
    matrix = np.asarray(matrix, dtype=np.int64) % p
    v = np.asarray(v, dtype=np.int64) % p
    k = matrix.shape[0]
    if k == 0:
        return np.zeros(0, dtype=np.int64) if not np.any(v) else None
    augmented = np.concatenate([matrix.T, v.reshape(-1, 1)], axis=1)
    reduced = _as_int(field(p)(augmented).row_reduce())
    coeffs = np.zeros(k, dtype=np.int64)
    for row in reduced:
        nonzero = np.nonzero(row)[0]
        if nonzero.size == 0:
            continue
        pivot = nonzero[0]
        if pivot == k:
            return None
        coeffs[pivot] = row[k]
    return coeffs


@dataclass(frozen=True, eq=False)
class Subspace:
    """A subspace of GF(p)^N stored as RREF rows."""

    basis: np.ndarray
    p: int
    ncols: int

    @classmethod
    def span(cls, rows: Iterable, p: int, ncols: int) -> "Subspace":
        rows = np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=np.int64)
        return cls(rref(rows.reshape(-1, ncols), p, ncols), p, ncols)

    @classmethod
    def zero(cls, p: int, ncols: int) -> "Subspace":
        return cls(np.zeros((0, ncols), dtype=np.int64), p, ncols)

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    @cached_property
    def pivots(self) -> Tuple[int, ...]:
        return tuple(int(np.nonzero(row)[0][0]) for row in self.basis)

    def reduce(self, v: np.ndarray) -> np.ndarray:
        """Canonical representative of v modulo this subspace."""
        v = np.asarray(v, dtype=np.int64) % self.p
        for pivot, row in zip(self.pivots, self.basis):
            if v[pivot]:
                v = (v - v[pivot] * row) % self.p
        return v

    def contains(self, v: np.ndarray) -> bool:
        return not np.any(self.reduce(v))

    def issubset(self, other: "Subspace") -> bool:
        return all(other.contains(row) for row in self.basis)

    def __add__(self, other: "Subspace") -> "Subspace":
        self._compatible(other)
        return Subspace.span(np.concatenate([self.basis, other.basis]), self.p, self.ncols)

    def intersection(self, other: "Subspace") -> "Subspace":
        self._compatible(other)
        if self.dim == 0 or other.dim == 0:
            return Subspace.zero(self.p, self.ncols)
        stacked = np.concatenate([self.basis.T, (-other.basis.T) % self.p], axis=1)
        kernel = null_space(stacked, self.p, self.dim + other.dim)
        return Subspace.span(kernel[:, : self.dim] @ self.basis, self.p, self.ncols)

    def equals(self, other: "Subspace") -> bool:
        return self.dim == other.dim and self.issubset(other)

    def quotient_basis(self, modulo: "Subspace") -> np.ndarray:
        """Rows completing ``modulo ∩ self`` to a basis of ``self``, in canonical form."""
        reduced = [modulo.reduce(row) for row in self.basis]
        return rref(np.array(reduced).reshape(-1, self.ncols), self.p, self.ncols)

    def _compatible(self, other: "Subspace") -> None:
        if self.p != other.p or self.ncols != other.ncols:
            raise OperatorError("DIM_MISMATCH", "Subspaces of different ambient spaces")


class WeylFrame:
    """Coordinates (a|b) for Weyl strings over a fixed ordered list of modes."""

    def __init__(self, modes: Sequence[Hashable], p: int):
        self.modes = tuple(sorted(set(modes)))
        self.p = p
        self.n = len(self.modes)
        self._index = {m: i for i, m in enumerate(self.modes)}

    @property
    def ncols(self) -> int:
        return 2 * self.n

    def vector(self, string: PauliString) -> np.ndarray:
        if string.p != self.p:
            raise OperatorError("DIM_MISMATCH", "Weyl string over a different ℤ/p")
        v = np.zeros(self.ncols, dtype=np.int64)
        for m, a, b in zip(string.modes, string.x, string.z):
            if not (a or b):
                continue
            i = self._index.get(m)
            if i is None:
                raise OperatorError("DIM_MISMATCH", f"Mode {m!r} outside the frame")
            v[i] = a
            v[self.n + i] = b
        return v

    def string(self, v: np.ndarray, phase: int = 0) -> PauliString:
        v = np.asarray(v, dtype=np.int64) % self.p
        return PauliString.from_vector(self.modes, v, self.p, phase)

    def columns(self, modes: Iterable[Hashable]) -> np.ndarray:
        idx = sorted(self._index[m] for m in modes if m in self._index)
        return np.array(idx + [self.n + i for i in idx], dtype=np.int64)

    def local(self, modes: Iterable[Hashable]) -> Subspace:
        """All Weyl strings supported on ``modes``."""
        cols = self.columns(modes)
        rows = np.zeros((len(cols), self.ncols), dtype=np.int64)
        rows[np.arange(len(cols)), cols] = 1
        return Subspace.span(rows, self.p, self.ncols)

    def restrict_vector(self, v: np.ndarray, modes: Iterable[Hashable]) -> np.ndarray:
        out = np.zeros(self.ncols, dtype=np.int64)
        cols = self.columns(modes)
        out[cols] = np.asarray(v)[cols]
        return out

    def constraint_rows(self, rows: np.ndarray) -> np.ndarray:
        """Rows c with c·w = symplectic(g, w) for each generator row g."""
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, self.ncols)
        return np.concatenate([rows[:, self.n :], (-rows[:, : self.n]) % self.p], axis=1) % self.p

    def commutant(self, constraints: np.ndarray, modes: Optional[Iterable[Hashable]] = None) -> Subspace:
        """
        Weyl strings supported on ``modes`` commuting with every row of ``constraints``.

        Args:
            constraints: (k, 2n) generator vectors
            modes: Support restriction, all modes when None

        Returns:
            The commuting subspace
        """
        cols = self.columns(self.modes if modes is None else modes)
        if len(cols) == 0:
            return Subspace.zero(self.p, self.ncols)
        cons = self.constraint_rows(constraints)[:, cols]
        kernel = null_space(cons, self.p, len(cols))
        full = np.zeros((kernel.shape[0], self.ncols), dtype=np.int64)
        full[:, cols] = kernel
        return Subspace.span(full, self.p, self.ncols)

    def symplectic(self, v: np.ndarray, w: np.ndarray) -> int:
        v = np.asarray(v, dtype=np.int64)
        w = np.asarray(w, dtype=np.int64)
        return int((v[self.n :] @ w[: self.n] - v[: self.n] @ w[self.n :]) % self.p)


class StabilizerGroup:
    """
    The abelian group generated by commuting Weyl strings.

    Its ground projection is p = ∏_i (1/p) Σ_k g_i^k, the average over the
    group; every statement about p reduces to statements about the
    generator subspace and the phases of group elements.
    """

    def __init__(self, generators: Sequence[PauliString], frame: WeylFrame):
        self.frame = frame
        self.generators = [g.extend(frame.modes) if set(g.modes) <= set(frame.modes) else g for g in generators]
        for g in self.generators:
            if g.modes != frame.modes:
                raise OperatorError("DIM_MISMATCH", "Generator does not fit the frame")
        if self.generators:
            self.matrix = np.array([frame.vector(g) for g in self.generators], dtype=np.int64)
        else:
            self.matrix = np.zeros((0, frame.ncols), dtype=np.int64)
        self.subspace = Subspace.span(self.matrix, frame.p, frame.ncols)
        self._check_commuting()

    @property
    def p(self) -> int:
        return self.frame.p

    @property
    def rank(self) -> int:
        return self.subspace.dim

    def __len__(self) -> int:
        return len(self.generators)

    def _check_commuting(self) -> None:
        cons = self.frame.constraint_rows(self.matrix)
        gram = (cons @ self.matrix.T) % self.p
        if np.any(gram):
            i, j = (int(t) for t in np.argwhere(gram)[0])
            raise OperatorError("NOT_COMMUTING", f"Generators {i} and {j} do not commute", {"pair": [i, j]})

    def element(self, v: np.ndarray) -> Optional[PauliString]:
        """The group element with vector v (exact phase), or None when v is outside the group."""
        coeffs = solve_left(self.matrix, v, self.p)
        if coeffs is None:
            return None
        result = PauliString.identity(self.frame.modes, self.p)
        for g, c in zip(self.generators, coeffs):
            if c:
                result = result * g.power(int(c))
        return result

    def check_consistent(self) -> None:
        """Raise when a product of generators is a nontrivial scalar (p = 0)."""
        if self.matrix.shape[0] == 0:
            return
        relations = null_space(self.matrix.T, self.p, self.matrix.shape[0])
        for rel in relations:
            prod = PauliString.identity(self.frame.modes, self.p)
            for g, c in zip(self.generators, rel):
                if c:
                    prod = prod * g.power(int(c))
            if prod.phase != 0:
                raise OperatorError("NOT_PROJECTION", "Generators multiply to a nontrivial scalar")

    def coefficient_of(self, string: PauliString) -> Optional[complex]:
        """c with string = c·g for a group element g, None when no such g exists."""
        string = string.extend(self.frame.modes)
        g = self.element(self.frame.vector(string))
        if g is None:
            return None
        return (string * g.adjoint()).coefficient

    def expectation(self, x) -> complex:
        """Tr(p x)/Tr(p) for a Weyl string or Weyl sum supported in the frame."""
        if isinstance(x, PauliSum):
            total = 0j
            for s, c in x.strings():
                total += c * self.expectation(s)
            return total
        c = self.coefficient_of(x)
        return 0j if c is None else complex(c)

    def commutes_with_all(self, string: PauliString) -> bool:
        v = self.frame.vector(string.extend(self.frame.modes))
        return not np.any((self.frame.constraint_rows(self.matrix) @ v) % self.p)

    def log_trace(self) -> int:
        """log_p Tr(p) over the frame's Hilbert space."""
        return self.frame.n - self.rank

    def canonical(self, v: np.ndarray) -> Tuple[int, ...]:
        return tuple(int(t) for t in self.subspace.reduce(v))

    def projector_sum(self, limit: int = CLASS_LIMIT) -> PauliSum:
        """p as an explicit Weyl sum; only for small groups."""
        count = self.p ** self.rank
        if count > limit:
            raise OperatorError("BUDGET_EXCEEDED", f"Group of order {count} is too large to expand")
        out = PauliSum.zero(self.frame.modes, self.p)
        for v in enumerate_span(self.subspace):
            g = self.element(v)
            out = out + PauliSum.from_string(g, 1.0 / count)
        return out


def enumerate_span(space: Subspace, limit: int = CLASS_LIMIT) -> List[np.ndarray]:
    """Every vector of a small subspace."""
    count = space.p ** space.dim
    if count > limit:
        raise OperatorError("BUDGET_EXCEEDED", f"Subspace with {count} vectors exceeds enumeration limit {limit}")
    out = []
    for coeffs in itertools.product(range(space.p), repeat=space.dim):
        if space.dim:
            out.append((np.array(coeffs, dtype=np.int64) @ space.basis) % space.p)
        else:
            out.append(np.zeros(space.ncols, dtype=np.int64))
    return out


def class_representatives(space: Subspace, modulo: Subspace, limit: int = CLASS_LIMIT) -> List[np.ndarray]:
    """Canonical representatives of (space + modulo)/modulo."""
    quotient = Subspace(space.quotient_basis(modulo), space.p, space.ncols)
    return enumerate_span(quotient, limit)


def reflect_string(string: PauliString, mode_map: Dict[Hashable, Hashable]) -> PauliString:
    """
    Θ = (mode permutation) ∘ (entrywise conjugation) on a Weyl string.

    X is real and Z̄ = Z⁻¹, so Θ(τ^k X^a Z^b) = τ^{-k} X^a Z^{-b} on the image modes.
    """
    parts = {}
    for m, a, b in zip(string.modes, string.x, string.z):
        if m not in mode_map:
            raise OperatorError("DIM_MISMATCH", f"Mode {m!r} has no mirror image")
        parts[mode_map[m]] = (a, -b)
    modes = tuple(sorted(parts))
    return PauliString(
        modes, tuple(parts[m][0] for m in modes), tuple(parts[m][1] for m in modes), -string.phase, string.p
    )


def split_string(string: PauliString, minus: Iterable[Hashable]) -> Tuple[PauliString, PauliString]:
    """Write a string as (minus factor without phase) ⊗ (plus factor carrying the phase)."""
    minus = set(minus)
    mm = tuple(m for m in string.modes if m in minus)
    pm = tuple(m for m in string.modes if m not in minus)
    left = string.restrict(mm)
    right = string.restrict(pm).times_phase(string.phase)
    return left, right
