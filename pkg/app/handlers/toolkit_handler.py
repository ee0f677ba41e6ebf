"""
Handler for the finite von Neumann algebra toolkit self-tests.

Both suites run on random multimatrix algebras ⊕ M_n ⊗ 1_m in a random
unitary frame, drawn from a fixed seed.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from app.core.report import CheckReport
from app.core.vn_toolkit import (
    ANGLE_TOL,
    State,
    VNAlgebra,
    double_commutant_angle,
    faithful_on_corner,
    modular_data,
    orthonormal_span,
    random_faithful_state,
    random_multimatrix_algebra,
    random_projection,
    support_projections,
)
from app.errors import CheckError

logger = logging.getLogger(__name__)

SAMPLE_TIME = 0.7


def random_blocks(rng: np.random.Generator) -> List[Tuple[int, int]]:
    count = int(rng.integers(1, 4))
    return [(int(rng.integers(1, 3)), int(rng.integers(1, 3))) for _ in range(count)]


def _meet_rank(p: np.ndarray, q: np.ndarray, tol: float = 1e-8) -> int:
    """dim(ran p ∩ ran q) for orthogonal projections."""
    return int(np.sum(np.linalg.eigvalsh(p @ q @ p) > 1 - tol))


def abelian_pair() -> VNAlgebra:
    """ℂ⊕ℂ as the diagonal of M₂."""
    units = [np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)]
    return VNAlgebra(orthonormal_span(units, dim=2), np.eye(2, dtype=complex), "C+C")


class ToolkitHandler:
    """Property checks of commutants, Tomita–Takesaki data and support projections."""

    def __init__(self, samples: int = 200, seed: int = 0, tol: float = 1e-9, budget: Optional[int] = None):
        self.samples = samples
        self.seed = seed
        self.tol = tol
        self.budget = budget

    def modular_report(self) -> CheckReport:
        """A″ = A, JAJ = A′, ΔΩ = Ω, φ∘σ_t = φ and the KMS pairing on every sample."""
        report = CheckReport.start("toolkit_modular", {"kind": "random_multimatrix"}, {"samples": self.samples, "seed": self.seed})
        report.tolerances.update({"tol": self.tol, "angle": ANGLE_TOL})
        rng = np.random.default_rng(self.seed)
        worst = {
            "double_commutant_angle": 0.0,
            "j_duality_angle": 0.0,
            "delta_omega": 0.0,
            "j_omega": 0.0,
            "state_invariance": 0.0,
            "kms": 0.0,
        }
        failures = 0
        for _ in range(self.samples):
            A = random_multimatrix_algebra(rng, random_blocks(rng))
            phi = random_faithful_state(rng, A)
            same, angle = double_commutant_angle(A, self.budget)
            data = modular_data(A, phi, check_duality=True, budget=self.budget)
            residuals = data.residuals()
            B = data.algebra
            x, y = B.random_element(rng), B.random_element(rng)
            invariance = abs(data.expectation(data.sigma(x, SAMPLE_TIME)) - data.expectation(x))
            scale = max(1.0, float(np.linalg.norm(x) * np.linalg.norm(y)))
            kms = data.kms_residual(x, y) / scale
            sample = {
                "double_commutant_angle": angle,
                "j_duality_angle": float(data.duality_angle or 0.0),
                "delta_omega": residuals["delta_omega"],
                "j_omega": residuals["j_omega"],
                "state_invariance": invariance / max(1.0, float(np.linalg.norm(x))),
                "kms": kms,
            }
            for key, value in sample.items():
                worst[key] = max(worst[key], float(value))
            failures += 0 if same else 1
        report.dims["samples"] = self.samples
        report.residuals.update(worst)
        report.residuals["double_commutant_failures"] = failures
        passed = (
            failures == 0
            and worst["j_duality_angle"] < ANGLE_TOL
            and all(worst[k] < self.tol for k in ("delta_omega", "j_omega", "state_invariance", "kms"))
        )
        logger.info("Toolkit modular suite on %d algebras: %s", self.samples, "pass" if passed else "FAIL")
        return report.finish(passed)

    def support_report(self) -> CheckReport:
        """
        Support projections of random states, faithful or not.

        For every sample z([φ]) = z_φ, and φ is faithful on pAp exactly when
        p ∧ (1 − [φ]) = 0. The diagonal ℂ⊕ℂ ⊂ M₂ with the state of e₁₁
        reproduces a central support different from 1.
        """
        report = CheckReport.start("toolkit_support", {"kind": "random_multimatrix"}, {"samples": self.samples, "seed": self.seed})
        report.tolerances["tol"] = self.tol
        rng = np.random.default_rng(self.seed)
        disagreements, mismatches = 0, 0
        for _ in range(self.samples):
            A = random_multimatrix_algebra(rng, random_blocks(rng))
            q = random_projection(rng, A) if rng.random() < 0.5 else A.unit
            a = A.random_element(rng)
            rho = q @ a.conj().T @ a @ q
            trace = float(np.real(np.trace(rho)))
            if trace < 1e-12:
                continue
            phi = State(rho / trace)
            supports = support_projections(A, phi, 1e-9)
            disagreements += 0 if supports.agree else 1
            p = random_projection(rng, A)
            expected = _meet_rank(p, A.unit - supports.support) == 0
            mismatches += 0 if faithful_on_corner(A, phi, p) == expected else 1

        counter = support_projections(abelian_pair(), State(np.diag([1.0, 0.0]).astype(complex)))
        central_rank = counter.to_json()["central_support_rank"]
        report.dims["samples"] = self.samples
        report.residuals.update({"support_disagreements": disagreements, "corner_mismatches": mismatches})
        report.details["counterexample"] = counter.to_json()
        passed = disagreements == 0 and mismatches == 0 and central_rank == 1
        return report.finish(passed)

    def run(self, check: str) -> CheckReport:
        if check == "toolkit_modular":
            return self.modular_report()
        if check == "toolkit_support":
            return self.support_report()
        raise CheckError("UNKNOWN_CHECK", f"No toolkit runner for {check}")
