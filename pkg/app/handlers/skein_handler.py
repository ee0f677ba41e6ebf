"""
Handler for the fusion-category (skein) checks.
"""

import logging
from typing import Optional

import numpy as np

from app.core.fusion_skein import (
    FusionCategoryData,
    boundary_cond_exp,
    build_category,
    canonical_state_psi,
    skein_duality_report,
    skein_modular,
    weight_omega,
)
from app.core.report import CheckReport
from app.errors import CheckError, FusionError

logger = logging.getLogger(__name__)


class SkeinHandler:
    """Runs the skein-module checks for one category and boundary length n."""

    def __init__(self, tol: float = 1e-9, seed: int = 0, budget: Optional[int] = None):
        self.tol = tol
        self.seed = seed
        self.budget = budget

    def modular_report(self, cat: FusionCategoryData, n: int) -> CheckReport:
        """
        Modular data of ω on H_n: J² = 1, J Γ_φ† J = Γ̃_φ, S_ω Γ_φ Ω = Γ_φ† Ω,
        σ^ψ_t = σ^ω_{−t}, ω(1) = |Irr|ⁿ and ψ(1) = 1.
        """
        report = CheckReport.start("skein_modular", {"category": cat.name}, {"n": n, "seed": self.seed})
        report.tolerances["tol"] = self.tol
        rng = np.random.default_rng(self.seed)
        data = skein_modular(cat, n, self.budget)
        alg = data.space.algebra
        residuals = data.residuals(rng)

        adjoint = 0.0
        for _ in range(3):
            phi = alg.random_element(rng)
            lhs = data.space.gluing(phi.adjoint(), "post")
            adjoint = max(adjoint, float(np.linalg.norm(lhs - data.space.gluing(phi, "post").conj().T)))
        residuals["gamma_adjoint"] = adjoint
        residuals["psi_unit"] = abs(canonical_state_psi(alg.identity()) - 1)
        residuals["omega_unit"] = abs(weight_omega(alg.identity()) - cat.rank**n)

        report.dims.update({"m": alg.multiplicities(), "algebra": alg.dim, "skein_space": data.space.dim})
        report.residuals.update(residuals)
        report.details["spectrum"] = data.spectrum()
        scale = max(1.0, float(data.space.dim))
        return report.finish(all(v < self.tol * scale for v in residuals.values()))

    def cond_exp_report(self, cat: FusionCategoryData, n: int) -> CheckReport:
        """E^n_{n−1} is unital, ψ-preserving, bimodular, completely positive and matches the cap formula."""
        report = CheckReport.start("skein_cond_exp", {"category": cat.name}, {"n": n, "seed": self.seed})
        report.tolerances["tol"] = self.tol
        if n < 1:
            raise CheckError("NO_ENLARGEMENTS", "The conditional expectation needs n ≥ 1", {"n": n})
        expectation = boundary_cond_exp(cat, n)
        residuals = expectation.residuals(np.random.default_rng(self.seed))
        report.dims.update({"algebra": expectation.algebra.dim, "previous": expectation.algebra.previous.dim})
        report.residuals.update(residuals)
        passed = residuals["choi_min_eig"] > -self.tol and all(
            v < self.tol for k, v in residuals.items() if k != "choi_min_eig"
        )
        return report.finish(passed)

    def run(self, check: str, spec, n: int) -> CheckReport:
        cat = build_category(spec)
        logger.debug("Running %s on %s n=%d", check, cat.name, n)
        if check == "skein_modular":
            return self.modular_report(cat, n)
        if check == "skein_cond_exp":
            return self.cond_exp_report(cat, n)
        if check == "skein_duality":
            return skein_duality_report(cat, n, self.seed, self.tol, self.budget)
        raise CheckError("UNKNOWN_CHECK", f"No skein runner for {check}")

    @staticmethod
    def category_name(spec) -> str:
        try:
            return build_category(spec).name
        except FusionError:
            return str(spec)
