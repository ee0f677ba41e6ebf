"""
Verification of the local topological order axioms on finite patches.

Weyl models (toric code, ℤ/p quantum doubles) are checked exactly: for a
region S with stabilizer group G_S, an operator span {W p_S : W ∈ C} over a
subgroup C of Weyl strings has the orthonormal basis indexed by
(C + G_S)/G_S, so span equalities become GF(p) subspace equalities and
angles are 0 or π/2. Boundary algebras are materialized as finite algebras
in that class basis when modular theory is needed (reflection positivity,
the OS map, finite Haag duality). Non-abelian doubles fall back to dense
linear algebra inside the dense budget for the canonical state, LTO1 and
the reflection-positive-interaction check; the other checks raise
NEEDS_EXACT_BACKEND on them.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.lattice import (
    Interval,
    Region,
    completely_surrounds,
    inner_half_plane,
    is_disk_like,
    weakly_surrounds,
)
from app.core.models import LatticeModel, ProjectionNet, reflection
from app.core.operator_core import (
    RANK_CUTOFF,
    TOL,
    LocalOperator,
    PauliString,
    PauliSum,
    _reshuffle,
    check_dense,
    embed_local,
    operator_schmidt,
)
from app.core.report import CheckReport
from app.core.stabilizer import (
    CLASS_LIMIT,
    StabilizerGroup,
    Subspace,
    class_representatives,
    enumerate_span,
    solve_left,
    split_string,
)
from app.core.vn_toolkit import (
    ANGLE_TOL,
    State,
    SupportProjections,
    VNAlgebra,
    algebra_closure,
    commutant,
    gns,
    orthonormal_span,
    subspace_equal,
    support_projections,
    tomita,
)
from app.errors import AlgebraError, CheckError, ModelError, OperatorError, RegionError

logger = logging.getLogger(__name__)

SURROUND = 1
INTERACTION_RANGE = 2
RIGHT_ANGLE = math.pi / 2
TRUNCATION_NOTE = "TRUNCATION: commutation imposed only for the enlargements that fit into the patch"
SQUARE_HD_NOTE = (
    "square layout: a straight cut leaves the single-edge generators at the ends of the interval "
    "without a partner on the other side; use layout=rotated"
)

LatticeOperator = Union[PauliString, PauliSum, LocalOperator]


# ---------------------------------------------------------------------------
# Shared plumbing


def _start(check: str, net: ProjectionNet, params: Optional[Dict] = None, **regions) -> CheckReport:
    report = CheckReport.start(check, net.model.descriptor(), {"s": SURROUND, "r": INTERACTION_RANGE, **(params or {})})
    for name, value in regions.items():
        if value is None:
            continue
        if isinstance(value, (list, tuple)):
            report.regions[name] = [v.to_json() for v in value]
        else:
            report.regions[name] = value.to_json()
    return report


def _require_exact(model: LatticeModel, check: str) -> None:
    if not model.is_weyl:
        raise CheckError(
            "NEEDS_EXACT_BACKEND", f"{check} needs the Weyl backend; the {model.kind} model has none", {"check": check}
        )


def _check_cut(model: LatticeModel, cut: Optional[float]) -> None:
    if cut is not None and abs(float(cut) - model.cut) > 1e-9:
        raise RegionError("BAD_AXIS", f"Model is cut at x={model.cut}, not x={cut}", {"cut": cut})


def _nested(inner: Region, outer: Region, names: str) -> None:
    if not inner.issubset(outer):
        raise RegionError("REGION_NOT_NESTED", f"{names} are not nested", {"inner": inner.to_json()})


def _angle(equal: bool) -> float:
    return 0.0 if equal else RIGHT_ANGLE


def _count(p: int, log_dim: int) -> int:
    return int(p) ** int(log_dim)


def _commuting(model: LatticeModel, R: Region, groups: Sequence[StabilizerGroup]) -> Subspace:
    """Weyl strings on the modes of R commuting with every group in ``groups``."""
    frame = model.frame
    if groups:
        constraints = np.concatenate([g.matrix for g in groups])
    else:
        constraints = np.zeros((0, frame.ncols), dtype=np.int64)
    return frame.commutant(constraints, model.modes_of(R))


def class_coordinates(group: StabilizerGroup, terms) -> Dict[Tuple[int, ...], complex]:
    """
    Coordinates of Σ a_k T_k p in the orthonormal basis {rep · p} of classes modulo the group.

    Args:
        group: Stabilizer group of the projection p
        terms: Pairs (Weyl string, coefficient)

    Returns:
        Canonical class vector → coefficient
    """
    frame = group.frame
    out: Dict[Tuple[int, ...], complex] = {}
    for string, coef in terms:
        if coef == 0:
            continue
        string = string.extend(frame.modes)
        rep_vec = group.subspace.reduce(frame.vector(string))
        rep = frame.string(rep_vec)
        c = group.coefficient_of(rep.adjoint() * string)
        if c is None:
            raise OperatorError("DIM_MISMATCH", "String left its class while reducing")
        key = tuple(int(t) for t in rep_vec)
        out[key] = out.get(key, 0j) + complex(coef) * c
    return out


def _distance(a: Dict, b: Dict) -> float:
    keys = set(a) | set(b)
    return float(math.sqrt(sum(abs(a.get(k, 0j) - b.get(k, 0j)) ** 2 for k in keys)))


def surrounding_regions(model: LatticeModel, R: Region, s: int = SURROUND) -> List[Region]:
    """Distinct regions S inside the patch with R ≪_s S, smallest first."""
    found: Dict[str, Region] = {}
    for k in range(s, max(model.width, model.height) + 1):
        S = R.grown(k).intersection(model.patch)
        if completely_surrounds(R, S, s):
            found.setdefault(S.key, S)
    if completely_surrounds(R, model.patch, s):
        found.setdefault(model.patch.key, model.patch)
    return sorted(found.values(), key=lambda S: (len(S), S.key))


def enlargements_of(model: LatticeModel, S: Region, I: Interval) -> List[Region]:
    """Regions Ŝ ⊋ S inside the patch that keep I on their boundary face."""
    found: Dict[str, Region] = {}
    for k in range(1, max(model.width, model.height) + 1):
        grown = frozenset(
            w for w in S.grown(k).sites if w in model.patch and inner_half_plane(I.face, I.line, w)
        )
        candidate = Region(grown | S.sites)
        if len(candidate) > len(S):
            found.setdefault(candidate.key, candidate)
    return sorted(found.values(), key=lambda E: (len(E), E.key))


def _keeps_interval(E: Region, I: Interval) -> bool:
    dx, dy = {"left": (-1, 0), "right": (1, 0), "bottom": (0, -1), "top": (0, 1)}[I.face]
    return all(z in E and z.shifted(dx, dy) not in E for z in I.sites)


# ---------------------------------------------------------------------------
# Canonical state


def _as_local(model: LatticeModel, x: LatticeOperator) -> LocalOperator:
    if isinstance(x, LocalOperator):
        return x
    support = tuple(sorted(set(x.modes)))
    if isinstance(x, PauliString):
        x = PauliSum.from_string(x)
    dense = x.extend(support).to_dense()
    return LocalOperator(support, dense, (model.local_dim,) * len(support))


def _expectation(net: ProjectionNet, x: LatticeOperator, S: Region) -> complex:
    """Tr(p_S x)/Tr(p_S)."""
    model = net.model
    if isinstance(x, LocalOperator) and not x.support:
        return complex(x.matrix[0, 0])
    if model.is_weyl:
        if isinstance(x, LocalOperator):
            x = PauliSum.from_dense(x.matrix, x.support, model.p)
        return complex(net.group(S).expectation(x))
    x = _as_local(model, x)
    modes = sorted(set(model.modes_of(S)) | set(x.support))
    P = net.projection(S, modes)
    X = embed_local(x.matrix, x.support, P.space)
    return (P @ X).trace() / P.trace()


def _unit_expectation(net: ProjectionNet, R: Region, S: Region) -> float:
    """ψ_S(p_R)."""
    model = net.model
    if model.is_weyl:
        G_S = net.group(S)
        ok = all(G_S.coefficient_of(g) == 1 for g in net.group(R).generators)
        return 1.0 if ok else 0.0
    P_S = net.projection(S)
    P_R = net.projection(R, model.modes_of(S))
    return float(((P_S @ P_R).trace() / P_S.trace()).real)


def canonical_state(
    net: ProjectionNet, x: LatticeOperator, R: Region, s: int = SURROUND, tol: float = TOL
) -> complex:
    """
    ψ(x) = Tr(p_S x)/Tr(p_S) for x ∈ 𝔄(R), using every S with R ≪_s S in the patch.

    Raises NO_SURROUNDING_REGION when fewer than two such S exist, and
    NOT_A_STATE when the value depends on S or ψ(p_R) ≠ 1.
    """
    return _canonical_value(net, x, R, s, tol)[0]


def _canonical_value(
    net: ProjectionNet, x: LatticeOperator, R: Region, s: int, tol: float
) -> Tuple[complex, float]:
    """ψ(x) together with its largest deviation across the surrounding regions."""
    candidates = surrounding_regions(net.model, R, s)
    if len(candidates) < 2:
        raise CheckError(
            "NO_SURROUNDING_REGION",
            "Need two distinct regions completely surrounding R",
            {"R": R.to_json(), "s": s, "found": len(candidates)},
        )
    values = [_expectation(net, x, S) for S in candidates]
    spread = max(abs(v - values[0]) for v in values)
    if spread > tol:
        raise AlgebraError("NOT_A_STATE", "ψ depends on the surrounding region", {"spread": spread})
    unit = max(abs(_unit_expectation(net, R, S) - 1.0) for S in candidates)
    if unit > tol:
        raise AlgebraError("NOT_A_STATE", "ψ(p_R) ≠ 1", {"residual": unit})
    return values[0], float(spread)


def _default_probes(model: LatticeModel, R: Region) -> List[Tuple[str, LatticeOperator]]:
    probes: List[Tuple[str, LatticeOperator]] = [("1", LocalOperator((), np.eye(1), (), "1"))]
    for t in model.terms_in(R):
        probes.append((t.name, model.term_projector(t)))
    if model.is_weyl:
        for m in model.modes_of(R):
            probes.append((f"Z{m[0].to_list()}{m[1]}", PauliString.single((m,), m, z=1, p=model.p)))
    return probes


def check_canonical_state(
    net: ProjectionNet,
    R: Region,
    probes: Optional[Sequence[Tuple[str, LatticeOperator]]] = None,
    s: int = SURROUND,
    tol: float = TOL,
) -> CheckReport:
    """Evaluate ψ on probe operators of 𝔄(R) and record its independence of S."""
    model = net.model
    candidates = surrounding_regions(model, R, s)
    report = _start("canonical_state", net, {"tol": tol}, R=R, S=candidates)
    report.tolerances["tol"] = tol
    values = []
    spread = 0.0
    for name, x in probes if probes is not None else _default_probes(model, R):
        value, deviation = _canonical_value(net, x, R, s, tol)
        values.append({"operator": name, "value": value})
        spread = max(spread, deviation)
    report.dims["surrounding_regions"] = len(candidates)
    report.dims["probes"] = len(values)
    report.residuals["spread"] = spread
    report.residuals["unit"] = max(abs(_unit_expectation(net, R, S) - 1.0) for S in candidates)
    report.details["values"] = values
    logger.debug("ψ on %d probes of %s", len(values), R.key)
    return report.finish(True)


# ---------------------------------------------------------------------------
# LTO1


def _range_basis(P: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((P + P.conj().T) / 2)
    return v[:, w > 0.5]


def _lto1_numeric(net: ProjectionNet, R: Region, S: Region, report: CheckReport, tol: float, cutoff: float) -> bool:
    model = net.model
    P = net.projection(S)
    space = P.space
    V = _range_basis(P.to_dense(net.budget))
    r = V.shape[1]
    inner = model.modes_of(R)
    rest = [k for k in space.keys if k not in set(inner)]
    axes = [space.index(k) for k in inner] + [space.index(k) for k in rest]
    D = int(np.prod([space.local_dim(k) for k in inner], dtype=np.int64))
    check_dense(D * r, net.budget, "compressed local basis")
    tensor = V.reshape(space.dims + (r,)).transpose(axes + [len(space.dims)]).reshape(D, -1, r)
    blocks = np.einsum("aki,bkj->abij", tensor.conj(), tensor)
    flat = blocks.reshape(D * D, r * r)
    s = np.linalg.svd(flat, compute_uv=False)
    rank = int(np.sum(s > cutoff * s[0])) if s.size and s[0] > 0 else 0
    psi = np.einsum("abii->ab", blocks) / r
    residual = float(np.abs(blocks - psi[:, :, None, None] * np.eye(r)).max())
    report.dims.update({"algebra": D * D, "span_rank": rank, "ground_rank": r})
    report.residuals["max_residual"] = residual
    report.note("numeric backend")
    return rank == 1 and residual < tol


def check_lto1(
    net: ProjectionNet, R: Region, S: Region, s: int = SURROUND, tol: float = TOL, cutoff: float = RANK_CUTOFF
) -> CheckReport:
    """
    p_S 𝔄(R) p_S = ℂ p_S.

    Exactly, the compressions W p_S of strings on R that commute with G_S
    span (C + G_S)/G_S for C = V_R ∩ G_S^⊥; the span has rank one iff C ⊆ G_S.
    """
    model = net.model
    _nested(R, S, "R and S")
    report = _start("lto1", net, {"tol": tol}, R=R, S=S)
    report.tolerances["tol"] = tol
    if not completely_surrounds(R, S, s):
        report.note("R is not completely surrounded by S")
    if not model.is_weyl:
        report.tolerances["rank_cutoff"] = cutoff
        return report.finish(_lto1_numeric(net, R, S, report, tol, cutoff))

    G_S = net.group(S)
    C = _commuting(model, R, [G_S])
    excess = (C + G_S.subspace).dim - G_S.rank
    rank = _count(model.p, excess)
    report.dims.update(
        {"algebra": _count(model.p, 2 * len(model.modes_of(R))), "span_rank": rank, "commuting": _count(model.p, C.dim)}
    )
    report.residuals["max_residual"] = 0.0 if excess == 0 else 1.0
    logger.debug("LTO1 %s in %s: span rank %d", R.key, S.key, rank)
    return report.finish(rank == 1)


# ---------------------------------------------------------------------------
# Boundary algebras (LTO2)


@dataclass(eq=False)
class BoundaryAlgebra:
    """
    𝔅(R ⋐_s S) = span{W p_R : W ∈ B} with B the strings on R commuting with G_S and every G_Ŝ.

    ``subspace`` is B; ``group`` is G_R, so classes of B modulo G_R index
    an orthonormal basis of the algebra.
    """

    interval: Interval
    R: Region
    S: Region
    enlargements: List[Region]
    subspace: Subspace
    group: StabilizerGroup

    @property
    def frame(self):
        return self.group.frame

    @property
    def log_dim(self) -> int:
        return self.subspace.dim - self.group.rank

    @property
    def dim(self) -> int:
        return _count(self.group.p, self.log_dim)

    def representatives(self, limit: int = CLASS_LIMIT) -> List[np.ndarray]:
        return [
            self.group.subspace.reduce(v) for v in class_representatives(self.subspace, self.group.subspace, limit)
        ]

    def strings(self, limit: int = CLASS_LIMIT) -> List[PauliString]:
        return [self.frame.string(v) for v in self.representatives(limit)]

    def generators(self) -> List[PauliString]:
        return [self.frame.string(v) for v in self.subspace.basis]

    def to_json(self) -> Dict:
        return {
            "interval": self.interval.to_json(),
            "R": self.R.to_json(),
            "S": self.S.to_json(),
            "enlargements": [E.to_json() for E in self.enlargements],
            "dim": self.dim,
            "generators": [g.label() for g in self.generators()],
        }


def extract_boundary_algebra(
    net: ProjectionNet,
    R: Region,
    S: Region,
    enlargements: Optional[Sequence[Region]] = None,
    s: int = SURROUND,
    tol: float = TOL,
) -> Tuple[BoundaryAlgebra, CheckReport]:
    """
    Extract 𝔅(R ⋐_s S) and check LTO2: span{p_S x p_S} = span{b p_S}.

    Args:
        net: Projection net of a Weyl model
        R: Inner region
        S: Region weakly surrounding R
        enlargements: Regions Ŝ ⊇ S keeping ∂R ∩ ∂S on their boundary;
            every one that fits into the patch when None
        s: Surround margin
        tol: Recorded tolerance

    Returns:
        The boundary algebra and the LTO2 report
    """
    model = net.model
    _require_exact(model, "extract_boundary_algebra")
    _nested(R, S, "R and S")
    ok, I = weakly_surrounds(R, S, s)
    if not ok:
        raise RegionError(
            "REGION_NOT_NESTED", "R is not weakly surrounded by S", {"R": R.to_json(), "S": S.to_json(), "s": s}
        )
    if enlargements is None:
        enlargements = enlargements_of(model, S, I)
    else:
        for E in enlargements:
            _nested(S, E, "S and an enlargement")
            if not _keeps_interval(E, I):
                raise RegionError("BAD_INTERVAL", "Enlargement does not keep ∂R ∩ ∂S on its boundary", E.to_json())
    larger = [E for E in enlargements if len(E) > len(S)]
    if not larger:
        raise CheckError(
            "NO_ENLARGEMENTS", "No region strictly larger than S shares the interval", {"S": S.to_json()}
        )

    report = _start("lto2", net, {"tol": tol}, R=R, S=S, enlargements=larger)
    report.regions["interval"] = I.to_json()
    report.tolerances["tol"] = tol
    G_R = net.group(R)
    G_S = net.group(S)
    constraints = [G_S] + [net.group(E) for E in larger]
    B = _commuting(model, R, constraints)
    C = _commuting(model, R, [G_S])
    algebra = BoundaryAlgebra(I, R, S, list(larger), B, G_R)

    violations = sum(
        0 if all(g.commutes_with_all(w) for g in constraints + [G_R]) else 1 for w in algebra.generators()
    )
    basis_span = B + G_S.subspace
    compressed = C + G_S.subspace
    equal = basis_span.equals(compressed)
    report.dims.update(
        {
            "boundary_algebra": algebra.dim,
            "basis_span": _count(model.p, basis_span.dim - G_S.rank),
            "compressed_span": _count(model.p, compressed.dim - G_S.rank),
            "enlargements": len(larger),
            "interval": len(I),
        }
    )
    report.residuals["angle"] = _angle(equal)
    report.residuals["invariant_violations"] = violations
    report.details["generators"] = [g.label() for g in algebra.generators()]
    report.note(TRUNCATION_NOTE)
    logger.debug("Boundary algebra of %s in %s: dim %d", R.key, S.key, algebra.dim)
    return algebra, report.finish(equal and violations == 0)


# ---------------------------------------------------------------------------
# LTO3 / LTO4


def check_lto3_lto4(
    net: ProjectionNet, R1: Region, R2: Region, S1: Region, S2: Region, s: int = SURROUND, tol: float = TOL
) -> CheckReport:
    """
    LTO3: 𝔅(R₁ ⋐ S₁) p_{S₁} = 𝔅(R₂ ⋐ S₁) p_{S₁}. LTO4: x p_{S₁} ↦ x p_{S₂} is injective on 𝔅(R₁ ⋐ S₁).

    With the normalized Hilbert–Schmidt product on both sides the map sends
    orthonormal classes to orthonormal classes, so its singular values are
    all 1 when it is injective and the smallest is 0 otherwise.
    """
    model = net.model
    _require_exact(model, "lto3_lto4")
    _nested(R1, R2, "R1 and R2")
    _nested(S1, S2, "S1 and S2")
    report = _start("lto3_lto4", net, {"tol": tol}, R1=R1, R2=R2, S1=S1, S2=S2)
    report.tolerances["tol"] = tol
    b1, rep1 = extract_boundary_algebra(net, R1, S1, None, s, tol)
    b2, rep2 = extract_boundary_algebra(net, R2, S1, None, s, tol)
    if set(b1.interval.sites) != set(b2.interval.sites):
        raise RegionError(
            "BAD_INTERVAL",
            "R1 and R2 meet S1 in different intervals",
            {"I1": b1.interval.to_json(), "I2": b2.interval.to_json()},
        )
    G1 = net.group(S1).subspace
    G2 = net.group(S2).subspace
    first = b1.subspace + G1
    lto3 = first.equals(b2.subspace + G1)
    injective = first.intersection(G2).dim == G1.dim
    faithful = b1.subspace.intersection(G2).dim == b1.group.rank

    report.regions["interval"] = b1.interval.to_json()
    report.dims.update({"boundary_algebra_1": b1.dim, "boundary_algebra_2": b2.dim, "compressed": _count(model.p, first.dim - G1.dim)})
    report.residuals["lto3_angle"] = _angle(lto3)
    report.residuals["lto4_min_singular_value"] = 1.0 if injective else 0.0
    report.details.update(
        {
            "lto3": lto3,
            "lto4": injective,
            "lto4_on_algebra": faithful,
            "lto2": {"R1": rep1.passed, "R2": rep2.passed},
        }
    )
    report.note(TRUNCATION_NOTE)
    return report.finish(lto3 and injective)


# ---------------------------------------------------------------------------
# Haag duality across the cut


def _halves(model: LatticeModel, R: Region) -> Tuple[Region, Region]:
    plus, minus = model.halves(R)
    if not plus or not minus:
        raise RegionError("BAD_INTERVAL", f"Region does not cross the cut x={model.cut}", R.to_json())
    return plus, minus


def check_hd(net: ProjectionNet, R: Region, S: Region, cut: Optional[float] = None, s: int = SURROUND) -> CheckReport:
    """
    p_{S₊} 𝔄(R₊) p_S = p_{S₊} p_{S₋} 𝔄(R) p_S = p_{S₋} 𝔄(R₋) p_S.

    Each span is (C + G_S)/G_S with C the strings on the respective region
    commuting with the compressing groups. The control compares the
    uncompressed one-sided spans, which must differ.
    """
    model = net.model
    _require_exact(model, "hd")
    _check_cut(model, cut)
    _nested(R, S, "R and S")
    R_plus, R_minus = _halves(model, R)
    S_plus, S_minus = _halves(model, S)
    report = _start("hd", net, {"cut": model.cut}, R=R, S=S, R_plus=R_plus, R_minus=R_minus, S_plus=S_plus, S_minus=S_minus)
    report.tolerances["angle"] = ANGLE_TOL
    if not completely_surrounds(R, S, s):
        report.note("R is not completely surrounded by S")
    for name, X in (("R+", R_plus), ("R-", R_minus), ("S+", S_plus), ("S-", S_minus)):
        if not is_disk_like(X):
            report.note(f"{name} is not disk-like")

    G_S = net.group(S).subspace
    G_plus = net.group(S_plus)
    G_minus = net.group(S_minus)
    spans = {
        "plus": _commuting(model, R_plus, [G_plus]) + G_S,
        "middle": _commuting(model, R, [G_plus, G_minus]) + G_S,
        "minus": _commuting(model, R_minus, [G_minus]) + G_S,
    }
    pairs = {
        "plus_middle": spans["plus"].equals(spans["middle"]),
        "middle_minus": spans["middle"].equals(spans["minus"]),
        "plus_minus": spans["plus"].equals(spans["minus"]),
    }
    local_plus = model.frame.local(model.modes_of(R_plus)) + G_S
    local_minus = model.frame.local(model.modes_of(R_minus)) + G_S
    control = not local_plus.equals(local_minus)

    for name, span in spans.items():
        report.dims[name] = _count(model.p, span.dim - G_S.dim)
    for name, equal in pairs.items():
        report.residuals[f"{name}_angle"] = _angle(equal)
    report.details["control_distinct"] = control
    if not control:
        report.note("uncompressed one-sided spans coincide; the comparison is vacuous")
    passed = all(pairs.values())
    if not passed and model.layout == "square":
        report.note(SQUARE_HD_NOTE)
    logger.info("LTO-HD on %s: %s", R.key, "pass" if passed else "fail")
    return report.finish(passed)


# ---------------------------------------------------------------------------
# Boundary algebras as finite algebras


class ClassAlgebra:
    """
    A boundary algebra in its class basis.

    The classes of B modulo G_R are orthonormal for the normalized trace
    Tr(p_R ·)/Tr(p_R), so left multiplication on ℂ^N (N classes) is a
    faithful *-representation.
    """

    def __init__(self, boundary: BoundaryAlgebra, budget: Optional[int] = None):
        self.boundary = boundary
        self.group = boundary.group
        self.frame = boundary.frame
        self.reps = boundary.representatives()
        check_dense(len(self.reps), budget, "boundary class algebra")
        self.strings = [self.frame.string(v) for v in self.reps]
        self._index = {tuple(int(t) for t in v): i for i, v in enumerate(self.reps)}
        self.unit_index = self._index[(0,) * self.frame.ncols]

    @property
    def size(self) -> int:
        return len(self.reps)

    def locate(self, string: PauliString) -> Optional[Tuple[int, complex]]:
        """(i, c) with string · p_R = c · b_i, None when the class is outside B."""
        ((key, c),) = class_coordinates(self.group, [(string, 1.0)]).items()
        i = self._index.get(key)
        return None if i is None else (i, c)

    @cached_property
    def left(self) -> np.ndarray:
        N = self.size
        out = np.zeros((N, N, N), dtype=complex)
        for i, Wi in enumerate(self.strings):
            for j, Wj in enumerate(self.strings):
                k, c = self.locate(Wi * Wj)
                out[i, k, j] = c
        return out

    def vn_algebra(self) -> VNAlgebra:
        N = self.size
        return VNAlgebra(orthonormal_span(list(self.left), dim=N), np.eye(N, dtype=complex), "boundary")

    def element(self, coeffs: np.ndarray) -> np.ndarray:
        return np.tensordot(coeffs, self.left, axes=1)

    def coefficients(self, matrix: np.ndarray) -> np.ndarray:
        return matrix[:, self.unit_index]

    def adjoint_coefficients(self, i: int) -> np.ndarray:
        j, c = self.locate(self.strings[i].adjoint())
        out = np.zeros(self.size, dtype=complex)
        out[j] = c
        return out


@dataclass(eq=False)
class BoundaryState:
    """The canonical state on a boundary algebra with its modular data."""

    classes: ClassAlgebra
    algebra: VNAlgebra
    state: State
    half: np.ndarray
    inverse_half: np.ndarray
    tracial: bool
    support: SupportProjections
    tomita_residual: float
    extra: Dict = field(default_factory=dict)

    def sigma_half(self, coeffs: np.ndarray) -> np.ndarray:
        """Class coefficients of σ^ψ_{−i/2}(b) = ρ^{1/2} b ρ^{−1/2}."""
        x = self.classes.element(coeffs)
        return self.classes.coefficients(self.half @ x @ self.inverse_half)

    def to_json(self) -> Dict:
        return {
            "dim": self.classes.size,
            "tracial": self.tracial,
            "support": self.support.to_json(),
            "tomita_residual": self.tomita_residual,
        }


def boundary_state(
    classes: ClassAlgebra, group_S: StabilizerGroup, tol: float = TOL, budget: Optional[int] = None
) -> BoundaryState:
    """
    ψ(b) = Tr(p_S b)/Tr(p_S) on a boundary algebra.

    The density is ρ = N⁻¹ Σ_i ψ(b_i) L_i† in the class representation.
    σ^ψ_{−i/2} is taken as Ad ρ^{1/2} and cross-checked against Tomita's
    Δ^{1/2} on the GNS space. Raises NOT_FAITHFUL for a degenerate ψ.
    """
    N = classes.size
    psi = np.array([group_S.expectation(W) for W in classes.strings], dtype=complex)
    rho = np.tensordot(psi, classes.left.conj().transpose(0, 2, 1), axes=1) / N
    rho = (rho + rho.conj().T) / 2
    algebra = classes.vn_algebra()
    state = State(rho)
    state.restricted(algebra, max(tol, 1e-9))
    w, v = np.linalg.eigh(rho)
    if w[0] <= 1e-9 * max(1.0, float(w[-1])):
        raise AlgebraError(
            "NOT_FAITHFUL", "Canonical state is degenerate on the boundary algebra", {"min_eig": float(w[0])}
        )
    half = (v * np.sqrt(w)) @ v.conj().T
    inverse_half = (v / np.sqrt(w)) @ v.conj().T
    tracial = bool(np.allclose(w, 1.0 / N, atol=tol))
    support = support_projections(algebra, state, max(tol, 1e-9))
    rep = gns(algebra, state)
    data = tomita(rep.represented_algebra(), rep.omega, budget=budget, check_duality=False)
    residual = max(
        float(np.linalg.norm(rep.represent(half @ b @ inverse_half) - data.sigma_half(rep.represent(b))))
        for b in classes.left
    )
    logger.debug("Boundary state on %d classes: tracial=%s", N, tracial)
    return BoundaryState(classes, algebra, state, half, inverse_half, tracial, support, residual)


def _require_symmetric(theta, **regions) -> None:
    for name, X in regions.items():
        if theta.region(X) != X:
            raise ModelError("NOT_SYMMETRIC", f"{name} is not mirror symmetric about the cut", X.to_json())


# ---------------------------------------------------------------------------
# Reflection positivity


def check_rp(
    net: ProjectionNet,
    R: Region,
    S: Region,
    axis: Optional[float] = None,
    s: int = SURROUND,
    tol: float = TOL,
    enlargements: Optional[Sequence[Region]] = None,
) -> CheckReport:
    """
    Θ(σ^ψ_{−i/2}(x†)) p_S = x p_S for x in a basis of 𝔅(R₊ ⋐ S₊).

    Also runs LTO-HD on the same symmetric configuration and records its
    verdict next to the reflection-positivity residual.
    """
    model = net.model
    _require_exact(model, "rp")
    theta = reflection(model)
    _check_cut(model, axis)
    _nested(R, S, "R and S")
    _require_symmetric(theta, R=R, S=S)
    R_plus, _ = _halves(model, R)
    S_plus, _ = _halves(model, S)
    boundary, lto2 = extract_boundary_algebra(net, R_plus, S_plus, enlargements, s, tol)

    report = _start("rp", net, {"cut": model.cut, "tol": tol}, R=R, S=S, R_plus=R_plus, S_plus=S_plus)
    report.regions["enlargements"] = [E.to_json() for E in boundary.enlargements]
    report.tolerances["tol"] = tol
    classes = ClassAlgebra(boundary, net.budget)
    G_S = net.group(S)
    bstate = boundary_state(classes, G_S, tol, net.budget)
    frame = model.frame
    mirrored = [theta.string(W).extend(frame.modes) for W in classes.strings]

    worst = 0.0
    for i, W in enumerate(classes.strings):
        coeffs = bstate.sigma_half(classes.adjoint_coefficients(i))
        lhs = class_coordinates(
            G_S, [(mirrored[k], np.conj(c)) for k, c in enumerate(coeffs) if abs(c) > 1e-14]
        )
        rhs = class_coordinates(G_S, [(W, 1.0)])
        worst = max(worst, _distance(lhs, rhs))

    hd = check_hd(net, R, S, s=s)
    passed = worst < tol
    report.dims["boundary_algebra"] = classes.size
    report.residuals["rp"] = worst
    report.residuals["tomita_consistency"] = bstate.tomita_residual
    report.details["boundary_state"] = bstate.to_json()
    report.details["lto2"] = lto2.passed
    report.details["hd"] = {"pass": hd.passed, "residuals": hd.residuals}
    if bstate.tracial:
        report.note("ψ is tracial on the boundary algebra; σ^ψ is the identity")
    if passed and not hd.passed:
        report.note("reflection positivity holds but LTO-HD fails on the same configuration")
    report.note(TRUNCATION_NOTE)
    logger.info("LTO-RP on %s: residual %.2e", R.key, worst)
    return report.finish(passed)


# ---------------------------------------------------------------------------
# Finite Haag duality


def haag_duality(
    plus: VNAlgebra,
    minus: VNAlgebra,
    omega: np.ndarray,
    tol: float = ANGLE_TOL,
    seed: int = 0,
    budget: Optional[int] = None,
) -> Dict:
    """
    Compare commutant(plus) and J·plus·J with ``minus`` on a common space.

    J is Tomita's conjugation of ``plus`` for the vector ``omega``, which
    must be cyclic and separating.
    """
    prime = commutant(plus, budget, seed=seed)
    commutant_equal, commutant_angle = subspace_equal(prime.space, minus.space, tol)
    data = tomita(plus, omega, budget=budget, check_duality=False)
    turned = orthonormal_span([data.conjugate_by_j(b) for b in plus.basis], dim=plus.ambient)
    j_equal, j_angle = subspace_equal(turned, minus.space, tol)
    return {
        "commutant_equal": commutant_equal,
        "commutant_angle": commutant_angle,
        "j_equal": j_equal,
        "j_angle": j_angle,
        "dims": {"plus": plus.dim, "minus": minus.dim, "commutant": prime.dim, "space": plus.ambient},
        "modular": data.residuals(),
    }


def _left_action(group: StabilizerGroup, reps: List[PauliString], index: Dict, strings: Sequence[PauliString]):
    N = len(reps)
    mats, leaks = [], 0
    for W in strings:
        M = np.zeros((N, N), dtype=complex)
        for j, Rj in enumerate(reps):
            for key, c in class_coordinates(group, [(W * Rj, 1.0)]).items():
                k = index.get(key)
                if k is None:
                    leaks += 1
                else:
                    M[k, j] = c
        mats.append(M)
    return mats, leaks


def check_finite_haag(
    net: ProjectionNet, R: Region, S: Region, s: int = SURROUND, seed: int = 0, tol: float = ANGLE_TOL
) -> CheckReport:
    """
    𝔅₊(I)′ = 𝔅₋(I) and J𝔅₊(I)J = 𝔅₋(I) on L²I = span{b₊ p_S}.

    Both boundary algebras act by left multiplication in the orthonormal
    class basis of (B₊ + G_S)/G_S; Ω is the class of p_S.
    """
    model = net.model
    _require_exact(model, "finite_haag")
    _nested(R, S, "R and S")
    R_plus, R_minus = _halves(model, R)
    S_plus, S_minus = _halves(model, S)
    plus, lto2_plus = extract_boundary_algebra(net, R_plus, S_plus, None, s)
    minus, lto2_minus = extract_boundary_algebra(net, R_minus, S_minus, None, s)
    report = _start("finite_haag", net, {"seed": seed}, R=R, S=S, R_plus=R_plus, S_plus=S_plus, R_minus=R_minus, S_minus=S_minus)
    report.regions["interval_plus"] = plus.interval.to_json()
    report.regions["interval_minus"] = minus.interval.to_json()
    report.tolerances["angle"] = tol

    G_S = net.group(S)
    frame = model.frame
    vectors = [G_S.subspace.reduce(v) for v in class_representatives(plus.subspace, G_S.subspace)]
    check_dense(len(vectors), net.budget, "L²I")
    index = {tuple(int(t) for t in v): j for j, v in enumerate(vectors)}
    reps = [frame.string(v) for v in vectors]
    N = len(reps)
    plus_ops, _ = _left_action(G_S, reps, index, plus.strings())
    minus_ops, leaks = _left_action(G_S, reps, index, minus.strings())
    report.dims.update({"space": N, "boundary_plus": plus.dim, "boundary_minus": minus.dim})
    report.residuals["minus_leakage"] = leaks
    if leaks:
        report.note("𝔅₋ does not preserve L²I; LTO-HD fails on this configuration")
        return report.finish(False)

    unit = np.eye(N, dtype=complex)
    A_plus = VNAlgebra(orthonormal_span(plus_ops, dim=N), unit, "B+")
    A_minus = VNAlgebra(orthonormal_span(minus_ops, dim=N), unit, "B-")
    omega = np.zeros(N, dtype=complex)
    omega[index[(0,) * frame.ncols]] = 1.0
    result = haag_duality(A_plus, A_minus, omega, tol, seed, net.budget)
    report.dims.update(result["dims"])
    report.residuals["commutant_angle"] = result["commutant_angle"]
    report.residuals["j_angle"] = result["j_angle"]
    report.residuals.update({f"modular_{k}": v for k, v in result["modular"].items()})
    report.details["lto2"] = {"plus": lto2_plus.passed, "minus": lto2_minus.passed}
    logger.info("Finite Haag duality on |I|=%d: angles %.2e / %.2e", len(plus.interval), result["commutant_angle"], result["j_angle"])
    return report.finish(result["commutant_equal"] and result["j_equal"])


# ---------------------------------------------------------------------------
# Product states on separated regions


def check_product_state(
    net: ProjectionNet,
    R1: Region,
    R2: Region,
    samples: int = 8,
    seed: int = 0,
    s: int = SURROUND,
    tol: float = TOL,
) -> CheckReport:
    """
    |ψ(xy) − ψ(x)ψ(y)| for Weyl strings x on R₁ and y on R₂.

    Samples alternate between stabilizer elements of R₁/R₂ (ψ = 1) and
    uniformly random strings, drawn from ``seed``.
    """
    model = net.model
    _require_exact(model, "product_state")
    shield = R1.grown(s)
    if not shield.issubset(model.patch) or shield.intersection(R2):
        raise CheckError(
            "NOT_SEPARATED",
            "No region completely surrounding R1 inside the patch avoids R2",
            {"R1": R1.to_json(), "R2": R2.to_json(), "s": s},
        )
    report = _start("product_state", net, {"samples": samples, "seed": seed, "tol": tol}, R1=R1, R2=R2, S=model.patch)
    report.tolerances["tol"] = tol
    frame = model.frame
    p = model.p
    G = net.group(model.patch)
    rng = np.random.default_rng(seed)

    def sample(R: Region, k: int) -> PauliString:
        local = net.group(R)
        if k % 2 == 0 and local.rank:
            coeffs = rng.integers(0, p, size=local.matrix.shape[0])
            return local.element((coeffs @ local.matrix) % p)
        v = np.zeros(frame.ncols, dtype=np.int64)
        cols = frame.columns(model.modes_of(R))
        v[cols] = rng.integers(0, p, size=len(cols))
        return frame.string(v)

    identity = frame.string(np.zeros(frame.ncols, dtype=np.int64))
    pairs = [(identity, identity)] + [(sample(R1, k), sample(R2, k)) for k in range(samples)]
    worst = 0.0
    nontrivial = 0
    for x, y in pairs:
        px, py = G.expectation(x), G.expectation(y)
        nontrivial += int(abs(px * py) > 0.5)
        worst = max(worst, abs(G.expectation(x * y) - px * py))
    report.dims.update({"pairs": len(pairs), "nontrivial_pairs": nontrivial})
    report.residuals["max_deviation"] = float(worst)
    return report.finish(worst < tol)


# ---------------------------------------------------------------------------
# Interaction algebra and the OS map


def interaction_algebra(
    net: ProjectionNet,
    R: Region,
    S: Region,
    cut: Optional[float] = None,
    s: int = SURROUND,
    cutoff: float = RANK_CUTOFF,
) -> Tuple[Optional[VNAlgebra], CheckReport]:
    """
    ℐ(R): the algebra generated by the ℍ₊ Schmidt factors of p_R; checks ℐ(R) p_{S₊} = 𝔅(R₊ ⋐ S₊) p_{S₊}.

    p_R = |G_R|⁻¹ Σ_g g₋ ⊗ g₊ groups by the minus part: the right factors
    are (g_a)₊ p_K with K = G_R ∩ V₊, one per class of Π₋(G_R). The
    comparison is made modulo G_{S₊} + K. The algebra is returned densely
    on the modes of R₊ when that fits the budget, else None.
    """
    model = net.model
    _require_exact(model, "interaction_algebra")
    _check_cut(model, cut)
    _nested(R, S, "R and S")
    R_plus, _ = _halves(model, R)
    S_plus, _ = _halves(model, S)
    report = _start("interaction_algebra", net, {"cut": model.cut}, R=R, S=S, R_plus=R_plus, S_plus=S_plus)
    frame = model.frame
    p = model.p
    G_R = net.group(R)
    modes = model.modes_of(R)
    plus_modes = tuple(m for m in modes if model.is_plus(m))
    minus_modes = tuple(m for m in modes if not model.is_plus(m))
    proj_plus = Subspace.span([frame.restrict_vector(v, plus_modes) for v in G_R.subspace.basis], p, frame.ncols)
    proj_minus = Subspace.span([frame.restrict_vector(v, minus_modes) for v in G_R.subspace.basis], p, frame.ncols)
    K = G_R.subspace.intersection(frame.local(plus_modes))
    generated = proj_plus + K

    boundary, lto2 = extract_boundary_algebra(net, R_plus, S_plus, None, s)
    G_Sp = net.group(S_plus).subspace
    lhs = generated + G_Sp
    rhs = boundary.subspace + G_Sp + K
    equal = lhs.equals(rhs)
    schmidt_rank = _count(p, proj_minus.dim)
    report.dims.update(
        {
            "schmidt_rank": schmidt_rank,
            "interaction": _count(p, generated.dim - K.dim),
            "boundary_algebra": boundary.dim,
        }
    )
    report.residuals["angle"] = _angle(equal)
    report.details["k_inside_s_plus"] = K.issubset(G_Sp)
    report.details["lto2"] = lto2.passed

    algebra = None
    try:
        algebra = _dense_interaction(net, R, G_R, K, plus_modes, minus_modes, report, cutoff)
    except OperatorError as err:
        if err.code != "BUDGET_EXCEEDED":
            raise
        report.note("dense interaction algebra skipped: over budget")
    report.note(TRUNCATION_NOTE)
    return algebra, report.finish(equal)


def _dense_on(terms, modes: Sequence, p: int) -> np.ndarray:
    out = None
    for string, coef in terms:
        dense = coef * string.restrict(modes).to_dense() * string.coefficient
        out = dense if out is None else out + dense
    return out


def _dense_interaction(net, R, G_R, K, plus_modes, minus_modes, report, cutoff: float = RANK_CUTOFF) -> VNAlgebra:
    model = net.model
    p = model.p
    check_dense(p ** len(plus_modes), net.budget, "interaction algebra")
    frame = model.frame
    k_elements = [G_R.element(v) for v in enumerate_span(K)]
    p_K = _dense_on([(k, 1.0 / len(k_elements)) for k in k_elements], plus_modes, p)
    factors = []
    for v in class_representatives(G_R.subspace, K):
        _, right = split_string(G_R.element(v), minus_modes)
        factors.append(_dense_on([(right.extend(frame.modes), 1.0)], plus_modes, p) @ p_K)
    algebra = algebra_closure(factors, unit=p_K, cutoff=cutoff, name="I(R)")
    report.dims["interaction_dense"] = algebra.dim

    P = net.projection(R)
    decomposition = operator_schmidt(P, minus_modes, plus_modes, budget=net.budget, cutoff=cutoff)
    report.residuals["schmidt_rank_mismatch"] = abs(len(decomposition) - report.dims["schmidt_rank"])
    numeric = orthonormal_span(list(decomposition.right), cutoff, dim=p ** len(plus_modes))
    exact = orthonormal_span(factors, cutoff, dim=p ** len(plus_modes))
    _, angle = subspace_equal(numeric, exact)
    report.residuals["schmidt_factor_angle"] = angle
    return algebra


def os_map_check(
    net: ProjectionNet,
    R: Region,
    S: Region,
    operators: Optional[Sequence[PauliString]] = None,
    s: int = SURROUND,
    tol: float = TOL,
    enlargements: Optional[Sequence[Region]] = None,
) -> CheckReport:
    """
    ℰ_S(x) = σ^ψ_{−i/2}(𝔼_{S₊}(x)) · Δ_ψF for x in 𝔄(R₊) (a full string basis by default).

    With K = G_S ∩ V_{S₊} both sides are multiples of F = p^{dim K − |S₊|}:
    Δ_ψF = F p_K, ℰ_S(W) = F c₀ (g₀)₊ p_K for g₀ ∈ G_S with (g₀)₋ = Θ(W†)⁻¹
    (zero when no such g₀ exists), and the right side is F Σ_k s_k W_k p_K
    through the boundary algebra's modular data. Both are compared in the
    class basis modulo K after dividing by F.
    """
    model = net.model
    _require_exact(model, "os_map")
    theta = reflection(model)
    _nested(R, S, "R and S")
    _require_symmetric(theta, R=R, S=S)
    R_plus, _ = _halves(model, R)
    S_plus, S_minus = _halves(model, S)
    boundary, lto2 = extract_boundary_algebra(net, R_plus, S_plus, enlargements, s, tol)
    report = _start("os_map", net, {"tol": tol}, R=R, S=S, R_plus=R_plus, S_plus=S_plus)
    report.tolerances["tol"] = tol

    frame = model.frame
    p = model.p
    classes = ClassAlgebra(boundary, net.budget)
    G_S = net.group(S)
    G_Sp = net.group(S_plus)
    bstate = boundary_state(classes, G_S, tol, net.budget)
    plus_modes = model.modes_of(S_plus)
    minus_modes = model.modes_of(S_minus)
    K = G_S.subspace.intersection(frame.local(plus_modes))
    K_group = StabilizerGroup([G_S.element(v) for v in K.basis], frame)
    scale = float(p) ** (K.dim - len(plus_modes))
    by_plus: Dict[Tuple[int, ...], int] = {}
    for i, W in enumerate(classes.strings):
        by_plus.setdefault(G_Sp.canonical(frame.vector(W)), i)
    minus_cols = frame.columns(minus_modes)

    if operators is None:
        operators = [frame.string(v) for v in enumerate_span(frame.local(model.modes_of(R_plus)))]
    worst, unmatched = 0.0, 0
    for W in operators:
        W = W.extend(frame.modes)
        target = theta.string(W.adjoint()).extend(frame.modes)
        need = (-frame.vector(target)) % p
        lhs: Dict = {}
        coeffs = solve_left(G_S.matrix[:, minus_cols], need[minus_cols], p)
        if coeffs is not None:
            g0 = G_S.element((coeffs @ G_S.matrix) % p)
            g_minus, g_plus = split_string(g0, minus_modes)
            c0 = (g_minus * target).coefficient
            lhs = class_coordinates(K_group, [(g_plus, c0)])

        rhs: Dict = {}
        if G_Sp.commutes_with_all(W):
            i = by_plus.get(G_Sp.canonical(frame.vector(W)))
            if i is None:
                unmatched += 1
                worst = max(worst, 1.0)
                continue
            c = G_Sp.coefficient_of(classes.strings[i].adjoint() * W)
            e = np.zeros(classes.size, dtype=complex)
            e[i] = c
            sigma = bstate.sigma_half(e)
            rhs = class_coordinates(
                K_group, [(classes.strings[k], a) for k, a in enumerate(sigma) if abs(a) > 1e-14]
            )
        worst = max(worst, _distance(lhs, rhs))

    report.dims.update({"operators": len(operators), "boundary_algebra": classes.size, "log_p_k": K.dim})
    report.residuals["max_residual"] = worst
    report.residuals["unmatched"] = unmatched
    report.details["density_scale"] = scale
    report.details["boundary_state"] = bstate.to_json()
    report.details["lto2"] = lto2.passed
    report.note(TRUNCATION_NOTE)
    return report.finish(worst < tol)


# ---------------------------------------------------------------------------
# Reflection positive interactions


def _rp_form(model: LatticeModel, theta, term, sign: float) -> Tuple[float, float]:
    plus = sorted(m for m in term.modes if model.is_plus(m))
    minus = [theta.mode(m) for m in plus]
    if sorted(minus) != sorted(m for m in term.modes if not model.is_plus(m)):
        raise ModelError("NOT_SYMMETRIC", f"Term {term.name} is not mirror symmetric across the cut")
    space = model.space(term.modes)
    dense = sign * model.term_projector(term).embed(space).to_dense()
    C = _reshuffle(dense, space, minus, plus)
    hermitian = float(np.linalg.norm(C - C.conj().T))
    low = float(np.linalg.eigvalsh((C + C.conj().T) / 2)[0])
    return hermitian, low


def check_rp_hamiltonian(
    model: LatticeModel, axis: Optional[float] = None, tol: float = TOL, negate: Optional[str] = None
) -> CheckReport:
    """
    Θ-covariance of the one-sided terms and the form Σ_jk C_jk Θ(e_j) ⊗ e_k, C ≥ 0, of the straddling ones.

    C is the straddling term reshuffled with its minus factors ordered as the
    mirror images of its plus factors. ``negate`` flips the sign of the named
    term; independently, the first straddling term is negated as a control
    that the positivity test can fail.
    """
    theta = reflection(model)
    _check_cut(model, axis)
    report = CheckReport.start("rp_hamiltonian", model.descriptor(), {"cut": model.cut, "negate": negate})
    report.tolerances["tol"] = tol
    straddling = model.straddling_terms()
    crossing = {t.name for t in straddling}
    by_sites = {(Region(t.sites).key, t.kind): t for t in model.terms}

    covariance, missing = 0.0, []
    for t in model.terms:
        if t.name in crossing:
            continue
        image = by_sites.get((theta.region(Region(t.sites)).key, t.kind))
        if image is None:
            missing.append(t.name)
            continue
        space = model.space(image.modes)
        mirrored = theta.local(model.term_projector(t)).embed(space).to_dense()
        target = model.term_projector(image).embed(space).to_dense()
        covariance = max(covariance, float(np.linalg.norm(mirrored - target)))

    hermitian, low = 0.0, math.inf
    for t in straddling:
        h, e = _rp_form(model, theta, t, -1.0 if t.name == negate else 1.0)
        hermitian, low = max(hermitian, h), min(low, e)
    control = True
    if straddling:
        _, control_low = _rp_form(model, theta, straddling[0], -1.0)
        control = control_low < -tol

    report.dims.update({"one_sided": len(model.terms) - len(straddling), "straddling": len(straddling)})
    report.residuals.update(
        {"covariance": covariance, "hermitian": hermitian, "min_eigenvalue": low if straddling else 0.0}
    )
    report.details["missing_images"] = missing
    report.details["negative_control_detected"] = control
    positive = not straddling or (hermitian < tol and low > -tol)
    return report.finish(covariance < tol and not missing and positive and control)
