"""
Finite-dimensional von Neumann algebra machinery.

Operators are dense ``numpy`` matrices on a common ambient space ℂ^d. A span
of operators is an ``OperatorSpace`` (Hilbert–Schmidt orthonormal basis), an
algebra is a ``VNAlgebra`` (a span closed under products and adjoints, with
its unit). States are density operators paired through the trace.

Modular theory follows the β = −1 convention: σ_t(x) = Δ^{it} x Δ^{−it}, so
the KMS pairing reads ⟨Ω, x σ_{−i}(y) Ω⟩ = ⟨Ω, y x Ω⟩ and the analytic
continuation used by the OS map is σ_{−i/2}(x) = Δ^{1/2} x Δ^{−1/2}.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.operator_core import RANK_CUTOFF, check_dense
from app.errors import AlgebraError, OperatorError

logger = logging.getLogger(__name__)

ANGLE_TOL = 1e-8
SAMPLE_TIMES = (0.5, -1.25, 2.0)
CLOSURE_CHECK_LIMIT = 64


def _dense(op) -> np.ndarray:
    if hasattr(op, "to_dense"):
        op = op.to_dense()
    return np.asarray(op, dtype=complex)


# ---------------------------------------------------------------------------
# Spans


@dataclass(frozen=True, eq=False)
class OperatorSpace:
    """Span of d×d operators with a Hilbert–Schmidt orthonormal basis."""

    dim: int
    basis: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.basis.shape[0])

    @property
    def flat(self) -> np.ndarray:
        return self.basis.reshape(self.rank, self.dim * self.dim)

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        return self.flat.conj() @ _dense(x).reshape(-1)

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.rank == 0:
            return np.zeros((self.dim, self.dim), dtype=complex)
        return (self.coordinates(x) @ self.flat).reshape(self.dim, self.dim)

    def residual(self, x: np.ndarray) -> float:
        x = _dense(x)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = _dense(x)
        return self.residual(x) <= tol * max(1.0, float(np.linalg.norm(x)))

    def to_json(self) -> Dict:
        return {"dim": self.dim, "rank": self.rank}


def orthonormal_span(ops: Sequence, cutoff: float = RANK_CUTOFF, dim: Optional[int] = None) -> OperatorSpace:
    """
    Hilbert–Schmidt orthonormal basis of ``span(ops)``.

    The rank counts singular values at or above ``cutoff`` times the largest
    one. ``dim`` is required only when ``ops`` is empty.
    """
    mats = [_dense(op) for op in ops]
    if not mats:
        if dim is None:
            raise OperatorError("DIM_MISMATCH", "An empty span needs an explicit ambient dimension")
        return OperatorSpace(dim, np.zeros((0, dim, dim), dtype=complex))
    d = mats[0].shape[0]
    for m in mats:
        if m.shape != (d, d):
            raise OperatorError("DIM_MISMATCH", f"Operator of shape {m.shape} in a span on dimension {d}")
    stacked = np.stack([m.reshape(-1) for m in mats], axis=1)
    u, s, _ = np.linalg.svd(stacked, full_matrices=False)
    if s.size == 0 or s[0] < 1e-300:
        return OperatorSpace(d, np.zeros((0, d, d), dtype=complex))
    rank = int(np.sum(s >= cutoff * s[0]))
    return OperatorSpace(d, u[:, :rank].T.reshape(rank, d, d).copy())


def subspace_equal(U: OperatorSpace, V: OperatorSpace, tol: float = ANGLE_TOL) -> Tuple[bool, float]:
    """Equal ranks and largest principal angle below ``tol``; returns (equal, angle)."""
    if U.dim != V.dim:
        raise OperatorError("DIM_MISMATCH", f"Spans on dimensions {U.dim} and {V.dim}")
    if U.rank != V.rank:
        return False, math.pi / 2
    if U.rank == 0:
        return True, 0.0
    # sin of the largest angle is the norm of V's basis leaving U.
    qu, qv = U.flat.T, V.flat.T
    leak = qv - qu @ (qu.conj().T @ qv)
    angle = math.asin(min(1.0, float(np.linalg.norm(leak, 2))))
    return angle < tol, angle


# ---------------------------------------------------------------------------
# Algebras


@dataclass(frozen=True, eq=False)
class VNAlgebra:
    space: OperatorSpace
    unit: np.ndarray
    name: str = ""

    @property
    def dim(self) -> int:
        return self.space.rank

    @property
    def ambient(self) -> int:
        return self.space.dim

    @property
    def basis(self) -> np.ndarray:
        return self.space.basis

    def contains(self, x, tol: float = 1e-9) -> bool:
        return self.space.contains(x, tol)

    def closure_residual(self) -> float:
        """Largest distance from the span of a product of two basis elements or an adjoint."""
        worst = 0.0
        for a in self.basis:
            worst = max(worst, self.space.residual(a.conj().T))
            for b in self.basis:
                worst = max(worst, self.space.residual(a @ b))
        return worst

    def random_element(self, rng: np.random.Generator) -> np.ndarray:
        c = rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim)
        return np.tensordot(c, self.basis, axes=1)

    def to_json(self) -> Dict:
        return {"name": self.name, "dim": self.dim, "ambient": self.ambient}


def full_matrix_algebra(d: int) -> VNAlgebra:
    units = []
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            units.append(e)
    return VNAlgebra(OperatorSpace(d, np.stack(units)), np.eye(d, dtype=complex), f"M{d}")


def algebra_closure(
    generators: Sequence, unit: Optional[np.ndarray] = None, cutoff: float = RANK_CUTOFF, name: str = ""
) -> VNAlgebra:
    """
    Smallest unital *-closed span containing ``generators``.

    Words are grown by left multiplication with the generators and their
    adjoints until the rank stops growing.
    """
    gens = [_dense(g) for g in generators]
    if unit is None:
        if not gens:
            raise OperatorError("DIM_MISMATCH", "algebra_closure needs generators or a unit")
        unit = np.eye(gens[0].shape[0], dtype=complex)
    unit = _dense(unit)
    d = unit.shape[0]
    gens = gens + [g.conj().T for g in gens]
    span = orthonormal_span([unit] + gens, cutoff, dim=d)
    for rounds in range(d * d + 1):
        words = list(span.basis) + [g @ b for g in gens for b in span.basis]
        grown = orthonormal_span(words, cutoff, dim=d)
        if grown.rank == span.rank:
            algebra = VNAlgebra(grown, unit, name)
            if algebra.dim <= CLOSURE_CHECK_LIMIT:
                residual = algebra.closure_residual()
                if residual > 1e-8:
                    raise AlgebraError("NON_CONVERGED", f"Closure residual {residual:.2e}", {"residual": residual})
            logger.debug("Closed %s after %d rounds: dim %d on ℂ^%d", name or "algebra", rounds, algebra.dim, d)
            return algebra
        span = grown
    raise AlgebraError("NON_CONVERGED", "Generated span still growing at the d² bound", {"rank": span.rank, "d": d})


def _generic_hermitian(A: VNAlgebra, rng: np.random.Generator, count: int = 3) -> List[np.ndarray]:
    out = []
    for _ in range(count):
        a = A.random_element(rng)
        out.append((a + a.conj().T) / 2)
    return out


def commutant(A: VNAlgebra, budget: Optional[int] = None, cutoff: float = 1e-9, seed: int = 0) -> VNAlgebra:
    """
    Commutant of ``A`` in B(ℂ^d).

    A is generated by a few generic hermitian elements h_k, so A′ is their
    common commutant. Unknowns live block-diagonally in the eigenbasis of
    h_1 and the Gram matrix of the commutators [E_ab, h] has a closed form.
    """
    d = A.ambient
    check_dense(d, budget, "commutant space")
    eye = np.eye(d, dtype=complex)
    if A.dim == 0:
        return full_matrix_algebra(d)
    hs = _generic_hermitian(A, np.random.default_rng(seed))
    w, v = np.linalg.eigh(hs[0])
    rows, cols = [], []
    for group in _cluster(w, 1e-8 * max(1.0, float(np.max(np.abs(w))))):
        for a in group:
            for b in group:
                rows.append(a)
                cols.append(b)
    ar, br = np.array(rows), np.array(cols)
    same_a = ar[:, None] == ar[None, :]
    same_b = br[:, None] == br[None, :]
    gram = np.zeros((len(ar), len(ar)), dtype=complex)
    for h in hs:
        h = v.conj().T @ h @ v
        sq = h @ h
        # Tr([E_ab, h]† [E_cd, h]) for hermitian h
        gram += (
            same_a * sq[br[None, :], br[:, None]]
            - h[br[None, :], br[:, None]] * h[ar[:, None], ar[None, :]]
            - h[ar[:, None], ar[None, :]] * h[br[None, :], br[:, None]]
            + same_b * sq[ar[:, None], ar[None, :]]
        )
    gram = (gram + gram.conj().T) / 2
    lam, vec = np.linalg.eigh(gram)
    null = vec[:, lam <= cutoff * max(1.0, float(lam[-1]))]
    mats = []
    for k in range(null.shape[1]):
        x = np.zeros((d, d), dtype=complex)
        x[ar, br] = null[:, k]
        mats.append(v @ x @ v.conj().T)
    return VNAlgebra(orthonormal_span(mats, dim=d), eye, f"{A.name}'" if A.name else "")


def double_commutant_angle(A: VNAlgebra, budget: Optional[int] = None) -> Tuple[bool, float]:
    """Whether A″ = A, for algebras whose unit is the ambient identity."""
    return subspace_equal(commutant(commutant(A, budget), budget).space, A.space, 1e-10 if A.dim else ANGLE_TOL)


def center(A: VNAlgebra, seed: int = 0) -> OperatorSpace:
    """A ∩ A′ as a span inside A, from commutators with generic hermitian elements."""
    B = A.basis
    k, d = B.shape[0], A.ambient
    if k == 0:
        return A.space
    system = np.zeros((k, k), dtype=complex)
    for h in _generic_hermitian(A, np.random.default_rng(seed)):
        cols = (B @ h - np.einsum("ab,jbc->jac", h, B)).reshape(k, d * d).T
        system += cols.conj().T @ cols
    system = (system + system.conj().T) / 2
    w, v = np.linalg.eigh(system)
    null = v[:, w <= 1e-9 * max(1.0, float(w[-1]))]
    mats = [np.tensordot(null[:, i], B, axes=1) for i in range(null.shape[1])]
    return orthonormal_span(mats, dim=d)


def _cluster(values: np.ndarray, tol: float) -> List[np.ndarray]:
    order = np.argsort(values)
    groups: List[List[int]] = [[int(order[0])]]
    for prev, cur in zip(order, order[1:]):
        if values[cur] - values[prev] > tol:
            groups.append([])
        groups[-1].append(int(cur))
    return [np.array(g) for g in groups]


def minimal_central_projections(A: VNAlgebra, seed: int = 0) -> List[np.ndarray]:
    """
    Minimal central projections of ``A``, summing to its unit.

    They are the spectral projections of a random hermitian central element,
    restricted to the range of the unit.
    """
    Z = center(A)
    rng = np.random.default_rng(seed)
    h = np.zeros((A.ambient, A.ambient), dtype=complex)
    for z in Z.basis:
        h += rng.uniform(1.0, 2.0) * (z + z.conj().T) / 2 + rng.uniform(1.0, 2.0) * (z - z.conj().T) / 2j
    h = A.unit @ h @ A.unit
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    scale = max(1.0, float(np.max(np.abs(w))))
    out = []
    for group in _cluster(w, 1e-7 * scale):
        p = v[:, group] @ v[:, group].conj().T
        p = A.unit @ p @ A.unit
        if np.real(np.trace(p)) > 0.5:
            out.append(p)
    out.sort(key=lambda p: int(np.argmax(np.abs(np.diag(p)) > 1e-6)))
    return out


def wedderburn_blocks(A: VNAlgebra) -> List[Tuple[int, int]]:
    """(matrix size, multiplicity) of each summand, in the order of ``minimal_central_projections``."""
    blocks = []
    for z in minimal_central_projections(A):
        corner = orthonormal_span([z @ b for b in A.basis], dim=A.ambient)
        n = int(round(math.sqrt(corner.rank)))
        blocks.append((n, int(round(np.real(np.trace(z)))) // max(n, 1)))
    return blocks


# ---------------------------------------------------------------------------
# States


@dataclass(frozen=True, eq=False)
class State:
    """φ(x) = Tr(ρ x)."""

    density: np.ndarray

    def __call__(self, x) -> complex:
        return complex(np.einsum("ij,ji->", self.density, _dense(x)))

    @classmethod
    def vector(cls, psi: np.ndarray) -> "State":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def tracial(cls, A: VNAlgebra) -> "State":
        return cls(A.unit / np.real(np.trace(A.unit)))

    def restricted(self, A: VNAlgebra, tol: float = 1e-9) -> np.ndarray:
        """Density of φ|_A inside A; raises NOT_A_STATE unless φ is positive and normalized on A."""
        rho = A.space.project(self.density)
        if np.linalg.norm(rho - rho.conj().T) > tol:
            raise AlgebraError("NOT_A_STATE", "State density is not hermitian on the algebra")
        rho = (rho + rho.conj().T) / 2
        low = float(np.linalg.eigvalsh(rho)[0])
        norm = self(A.unit)
        if low < -tol or abs(norm - 1) > tol:
            raise AlgebraError("NOT_A_STATE", "Functional is not a state", {"min_eig": low, "phi_unit": abs(norm)})
        return rho


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_multimatrix_algebra(
    rng: np.random.Generator, blocks: Sequence[Tuple[int, int]], conjugate: bool = True
) -> VNAlgebra:
    """⊕_k M_{n_k} ⊗ 1_{m_k} on ℂ^{Σ n_k m_k}, optionally in a random unitary frame."""
    d = sum(n * m for n, m in blocks)
    u = random_unitary(rng, d) if conjugate else np.eye(d, dtype=complex)
    mats = []
    offset = 0
    for n, m in blocks:
        for i in range(n):
            for j in range(n):
                e = np.zeros((d, d), dtype=complex)
                unit = np.zeros((n, n))
                unit[i, j] = 1.0
                e[offset : offset + n * m, offset : offset + n * m] = np.kron(unit, np.eye(m))
                mats.append(u @ e @ u.conj().T)
        offset += n * m
    label = "+".join(f"M{n}x{m}" for n, m in blocks)
    return VNAlgebra(orthonormal_span(mats, dim=d), np.eye(d, dtype=complex), label)


def random_faithful_state(rng: np.random.Generator, A: VNAlgebra) -> State:
    a = A.random_element(rng)
    rho = a.conj().T @ a + 0.1 * np.real(np.trace(a.conj().T @ a)) / max(1.0, np.real(np.trace(A.unit))) * A.unit
    rho = A.unit @ rho @ A.unit
    return State(rho / np.real(np.trace(rho)))


def random_projection(rng: np.random.Generator, A: VNAlgebra) -> np.ndarray:
    """A spectral projection of a random hermitian element, so it lies in A below its unit."""
    a = A.random_element(rng)
    h = (a + a.conj().T) / 2
    h = h / max(1.0, float(np.linalg.norm(h, 2))) + 10.0 * A.unit
    w, v = np.linalg.eigh(h)
    inside = w > 5.0
    threshold = float(np.median(w[inside]))
    keep = w > threshold + 1e-9 if rng.random() < 0.5 else w >= threshold - 1e-9
    keep &= inside
    return v[:, keep] @ v[:, keep].conj().T


def faithful_on_corner(A: VNAlgebra, phi: State, p: np.ndarray, cutoff: float = RANK_CUTOFF) -> bool:
    """Whether φ is faithful on pAp."""
    corner = orthonormal_span([p @ b @ p for b in A.basis], cutoff, dim=A.ambient)
    if corner.rank == 0:
        return True
    w = np.linalg.eigvalsh(_phi_gram(corner.basis, phi))
    return bool(w[0] > cutoff * max(1e-300, float(w[-1])))


def _phi_gram(basis: np.ndarray, phi: State) -> np.ndarray:
    """G_ij = φ(b_i† b_j)."""
    left = basis @ phi.density
    k = basis.shape[0]
    gram = left.reshape(k, -1).conj() @ basis.reshape(k, -1).T
    return (gram + gram.conj().T) / 2


# ---------------------------------------------------------------------------
# Supports and GNS


@dataclass(frozen=True, eq=False)
class GNSRepresentation:
    """π_φ on L²(A, φ) = A/N_φ in an orthonormal basis of classes."""

    algebra: VNAlgebra
    state: State
    vectors: np.ndarray
    omega: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[0])

    def represent(self, x) -> np.ndarray:
        x = _dense(x)
        r = self.dim
        left = (self.vectors @ self.state.density).reshape(r, -1)
        moved = np.einsum("ab,sbc->sac", x, self.vectors).reshape(r, -1)
        return left.conj() @ moved.T

    def expectation(self, x) -> complex:
        return complex(np.vdot(self.omega, self.represent(x) @ self.omega))

    def represented_algebra(self, cutoff: float = RANK_CUTOFF) -> VNAlgebra:
        images = [self.represent(b) for b in self.algebra.basis]
        return VNAlgebra(orthonormal_span(images, cutoff, dim=self.dim), self.represent(self.algebra.unit), "π(A)")


def gns(A: VNAlgebra, phi: State, cutoff: float = RANK_CUTOFF) -> GNSRepresentation:
    """
    GNS construction for ``phi`` on ``A``.

    The Gram matrix G_ij = φ(b_i†b_j) is diagonalized; eigenvectors above
    the cutoff give an orthonormal basis of A/N_φ, and Ω is the class of the
    unit.
    """
    phi.restricted(A)
    gram = _phi_gram(A.basis, phi)
    w, u = np.linalg.eigh(gram)
    keep = w > cutoff * max(1e-300, float(w[-1]))
    coeffs = u[:, keep] / np.sqrt(w[keep])
    vectors = np.tensordot(coeffs.T, A.basis, axes=1)
    r = vectors.shape[0]
    left = (vectors @ phi.density).reshape(r, -1)
    omega = left.conj() @ A.unit.reshape(-1)
    logger.debug("GNS space of dimension %d for an algebra of dimension %d", r, A.dim)
    return GNSRepresentation(A, phi, vectors, omega)


@dataclass(frozen=True, eq=False)
class SupportProjections:
    support: np.ndarray
    central_support: np.ndarray
    kernel_projection: np.ndarray

    @property
    def agree(self) -> bool:
        return bool(np.allclose(self.central_support, self.kernel_projection, atol=1e-8))

    def to_json(self) -> Dict:
        return {
            "support_rank": int(round(np.real(np.trace(self.support)))),
            "central_support_rank": int(round(np.real(np.trace(self.central_support)))),
            "kernel_projection_rank": int(round(np.real(np.trace(self.kernel_projection)))),
            "agree": self.agree,
        }


def support_projections(A: VNAlgebra, phi: State, tol: float = 1e-9) -> SupportProjections:
    """
    ([φ], z([φ]), z_φ) for a state on ``A``.

    [φ] is the range projection of φ's density inside A; z([φ]) sums the
    minimal central projections meeting it; z_φ sums those not killed by
    the GNS representation.
    """
    rho = phi.restricted(A, tol)
    w, v = np.linalg.eigh(rho)
    keep = w > tol * max(1.0, float(w[-1]))
    support = v[:, keep] @ v[:, keep].conj().T
    rep = gns(A, phi)
    central = np.zeros_like(support)
    kernel = np.zeros_like(support)
    for z in minimal_central_projections(A):
        if np.linalg.norm(z @ support) > tol:
            central = central + z
        if np.linalg.norm(rep.represent(z)) > tol:
            kernel = kernel + z
    result = SupportProjections(support, central, kernel)
    if not result.agree:
        logger.error("Central support and GNS kernel projection disagree")
    return result


# ---------------------------------------------------------------------------
# Tomita–Takesaki


@dataclass(eq=False)
class ModularData:
    """
    (Ω, S, Δ, J) with S = M∘K and J = J_M∘K, K complex conjugation in the
    standard basis, so S ξ = M ξ̄ and J ξ = J_M ξ̄.
    """

    algebra: VNAlgebra
    omega: np.ndarray
    s_matrix: np.ndarray
    delta: np.ndarray
    j_matrix: np.ndarray
    spectrum: np.ndarray
    eigvecs: np.ndarray
    duality_angle: Optional[float] = None
    invariance_residual: Optional[float] = None
    extra: Dict = field(default_factory=dict)

    def delta_power(self, z: complex) -> np.ndarray:
        phases = np.exp(z * np.log(self.spectrum))
        return (self.eigvecs * phases) @ self.eigvecs.conj().T

    def analytic(self, x, z: complex) -> np.ndarray:
        """σ_z(x) = Δ^{iz} x Δ^{−iz} for complex z."""
        return self.delta_power(1j * z) @ _dense(x) @ self.delta_power(-1j * z)

    def sigma(self, x, t: float) -> np.ndarray:
        return self.analytic(x, t)

    def sigma_half(self, x) -> np.ndarray:
        """σ_{−i/2}(x) = Δ^{1/2} x Δ^{−1/2}."""
        return self.analytic(x, -0.5j)

    def apply_s(self, xi: np.ndarray) -> np.ndarray:
        return self.s_matrix @ np.conj(xi)

    def apply_j(self, xi: np.ndarray) -> np.ndarray:
        return self.j_matrix @ np.conj(xi)

    def conjugate_by_j(self, x) -> np.ndarray:
        return self.j_matrix @ np.conj(_dense(x)) @ np.conj(self.j_matrix)

    def expectation(self, x) -> complex:
        return complex(np.vdot(self.omega, _dense(x) @ self.omega))

    def kms_residual(self, x, y) -> float:
        lhs = self.expectation(_dense(x) @ self.analytic(y, -1j))
        rhs = self.expectation(_dense(y) @ _dense(x))
        return float(abs(lhs - rhs))

    @property
    def is_tracial(self) -> bool:
        return bool(np.allclose(self.spectrum, 1.0, atol=1e-9))

    def residuals(self) -> Dict[str, float]:
        d = self.delta.shape[0]
        half = self.delta_power(0.5)
        return {
            "s_polar": float(np.linalg.norm(self.s_matrix - self.j_matrix @ np.conj(half))),
            "j_squared": float(np.linalg.norm(self.j_matrix @ np.conj(self.j_matrix) - np.eye(d))),
            "delta_omega": float(np.linalg.norm(self.delta @ self.omega - self.omega)),
            "j_omega": float(np.linalg.norm(self.apply_j(self.omega) - self.omega)),
        }

    def to_json(self) -> Dict:
        out = {
            "dim": int(self.delta.shape[0]),
            "spectrum": sorted(float(s) for s in self.spectrum),
            "residuals": self.residuals(),
        }
        if self.duality_angle is not None:
            out["duality_angle"] = self.duality_angle
        if self.invariance_residual is not None:
            out["invariance_residual"] = self.invariance_residual
        return out


def tomita(
    A: VNAlgebra,
    omega: np.ndarray,
    cutoff: float = RANK_CUTOFF,
    budget: Optional[int] = None,
    check_duality: bool = True,
) -> ModularData:
    """
    Modular data of ``A`` with respect to the vector ``omega``.

    Ω must be cyclic (AΩ = ℂ^d) and separating (xΩ = 0 forces x = 0); the
    vectors b_iΩ then form a basis and S is fixed by S(b_iΩ) = b_i†Ω.
    With ``check_duality`` the result records the principal angle between
    JAJ and A′ and the drift of A under Δ^{it} at sample times.
    """
    omega = np.asarray(omega, dtype=complex)
    d = A.ambient
    check_dense(d, budget, "Tomita space")
    W = np.einsum("kab,b->ak", A.basis, omega)
    s = np.linalg.svd(W, compute_uv=False)
    rank = int(np.sum(s >= cutoff * max(1e-300, float(s[0])))) if s.size else 0
    if rank < d:
        raise AlgebraError("NOT_CYCLIC", f"AΩ spans {rank} of {d} dimensions", {"rank": rank, "dim": d})
    if rank < A.dim:
        raise AlgebraError("NOT_SEPARATING", f"x ↦ xΩ has rank {rank} on an algebra of dimension {A.dim}")
    flipped = np.einsum("kba,b->ak", np.conj(A.basis), omega)
    M = flipped @ np.linalg.inv(np.conj(W))
    delta = np.conj(M.conj().T @ M)
    delta = (delta + delta.conj().T) / 2
    spectrum, eigvecs = np.linalg.eigh(delta)
    if spectrum[0] <= 0:
        raise AlgebraError("NOT_SEPARATING", "Modular operator is not invertible", {"min_eig": float(spectrum[0])})
    inv_half = (eigvecs / np.sqrt(spectrum)) @ eigvecs.conj().T
    J = M @ np.conj(inv_half)
    data = ModularData(A, omega, M, delta, J, spectrum, eigvecs)
    if check_duality:
        prime = commutant(A, budget)
        turned = orthonormal_span([data.conjugate_by_j(b) for b in A.basis], cutoff, dim=d)
        _, data.duality_angle = subspace_equal(turned, prime.space)
        data.invariance_residual = max(A.space.residual(data.sigma(b, t)) for t in SAMPLE_TIMES for b in A.basis)
        if data.duality_angle > ANGLE_TOL:
            logger.warning("JAJ and A' differ by angle %.2e", data.duality_angle)
    return data


def modular_data(A: VNAlgebra, phi: State, check_duality: bool = True, budget: Optional[int] = None) -> ModularData:
    """Tomita data of π_φ(A) on its GNS space with Ω the class of the unit."""
    rep = gns(A, phi)
    return tomita(rep.represented_algebra(), rep.omega, budget=budget, check_duality=check_duality)


# ---------------------------------------------------------------------------
# Conditional expectations


def modular_flow(B: VNAlgebra, phi: State, t: float) -> np.ndarray:
    """ρ^{it} for the density of φ inside B; σ^φ_t(x) = ρ^{it} x ρ^{−it} on B."""
    rho = phi.restricted(B)
    w, v = np.linalg.eigh(rho)
    keep = w > 1e-12
    phases = np.zeros(w.shape, dtype=complex)
    phases[keep] = np.exp(1j * t * np.log(w[keep]))
    return (v * phases) @ v.conj().T


@dataclass(frozen=True, eq=False)
class ConditionalExpectation:
    """E = ι*(·)ι for ι: L²(A, φ) → L²(B, φ)."""

    big: VNAlgebra
    small: VNAlgebra
    state: State
    _left: np.ndarray
    _gram: np.ndarray

    def __call__(self, b) -> np.ndarray:
        b = _dense(b)
        k = self.small.dim
        rhs = self._left.reshape(k, -1).conj() @ b.reshape(-1)
        c = np.linalg.solve(self._gram, rhs)
        return np.tensordot(c, self.small.basis, axes=1)

    def residuals(self, rng: np.random.Generator, samples: int = 4) -> Dict[str, float]:
        """Idempotence, A-bimodularity and φ∘E = φ on random elements."""
        out = {"idempotent": 0.0, "bimodular": 0.0, "state_preserving": 0.0}
        for _ in range(samples):
            b = self.big.random_element(rng)
            a1, a2 = self.small.random_element(rng), self.small.random_element(rng)
            e = self(b)
            out["idempotent"] = max(out["idempotent"], float(np.linalg.norm(self(e) - e)))
            out["bimodular"] = max(out["bimodular"], float(np.linalg.norm(self(a1 @ b @ a2) - a1 @ e @ a2)))
            out["state_preserving"] = max(out["state_preserving"], abs(self.state(e) - self.state(b)))
        return out


def cond_expectation(B: VNAlgebra, A: VNAlgebra, phi: State, tol: float = 1e-8) -> ConditionalExpectation:
    """
    The φ-preserving conditional expectation B → A.

    Raises NOT_FAITHFUL when φ is not faithful on B, NOT_SUBALGEBRA when A is
    not a unital subalgebra of B, and NOT_MODULAR_INVARIANT when σ^φ moves A
    out of itself at one of the sample times.
    """
    gram_b = _phi_gram(B.basis, phi)
    w = np.linalg.eigvalsh(gram_b)
    if w[0] <= tol * max(1e-300, float(w[-1])):
        raise AlgebraError("NOT_FAITHFUL", "State is not faithful on the larger algebra", {"min_eig": float(w[0])})
    outside = max([B.space.residual(a) for a in A.basis] + [float(np.linalg.norm(A.unit - B.unit))])
    if outside > tol:
        raise AlgebraError("NOT_SUBALGEBRA", "A is not a unital subalgebra of B", {"residual": outside})
    drift = 0.0
    for t in SAMPLE_TIMES:
        u = modular_flow(B, phi, t)
        drift = max(drift, max(A.space.residual(u @ a @ u.conj().T) for a in A.basis))
    if drift > tol:
        raise AlgebraError("NOT_MODULAR_INVARIANT", f"σ^φ moves A by {drift:.2e}", {"residual": drift})
    left = A.basis @ phi.density
    return ConditionalExpectation(B, A, phi, left, _phi_gram(A.basis, phi))
