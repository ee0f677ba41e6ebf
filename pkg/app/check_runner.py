"""
Check orchestration.

``CheckRunner`` turns a RunConfig into jobs, dispatches every job to the
handler for its family, runs the jobs on a bounded worker pool and merges the
reports into one deterministic document.
"""

import asyncio
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

from app.config import LATTICE_CHECKS, SKEIN_CHECKS, SUITES, TOOLKIT_CHECKS, RunConfig
from app.core.report import CheckReport
from app.errors import LtoError
from app.handlers.lattice_handler import LatticeHandler
from app.handlers.skein_handler import SkeinHandler
from app.handlers.toolkit_handler import ToolkitHandler
from app.utils.file_utils import write_report
from app.utils.report_utils import canonical_dumps

logger = logging.getLogger(__name__)

CHECK_DESCRIPTIONS = {
    "straddle_identities": "Terms crossing the cut factorize through the boundary generators",
    "canonical_state": "ψ(x) = Tr(p_S x)/Tr(p_S) is independent of the surrounding region",
    "lto1": "p_S 𝔄(R) p_S = ℂ p_S",
    "lto2": "p_S 𝔄(R) p_S = 𝔅(R ⋐ S) p_S",
    "lto3_lto4": "Boundary algebras agree for nested regions and x ↦ x p_S₂ is injective",
    "hd": "The three compressed spans across the cut coincide",
    "rp": "Θ(σ^ψ_{−i/2}(x†)) p_S = x p_S on the boundary algebra",
    "finite_haag": "𝔅₊(I)′ = 𝔅₋(I) = J𝔅₊(I)J on L²I",
    "product_state": "ψ(xy) = ψ(x)ψ(y) for separated regions",
    "interaction_algebra": "ℐ(R) p_S₊ = 𝔅(R₊ ⋐ S₊) p_S₊",
    "os_map": "ℰ_S(x) = σ^ψ_{−i/2}(𝔼_S₊(x)) Δ_ψF",
    "rp_hamiltonian": "Θ-covariant one-sided terms and a positive cross form for straddling terms",
    "skein_modular": "J, Δ_ω and σ identities on the skein module H_n",
    "skein_cond_exp": "The conditional expectation 𝔅_n → 𝔅_{n−1} against the cap formula",
    "skein_duality": "Γ(𝔅_n)′ = Γ̃(𝔅_n) = J Γ(𝔅_n) J on H_n",
    "toolkit_modular": "Commutants and Tomita–Takesaki data of random multimatrix algebras",
    "toolkit_support": "Support projections of random states",
}


@dataclass
class Job:
    """A unit of work: a label for sorting and a thunk producing a report."""

    key: tuple
    check: str
    execute: Callable[[], CheckReport]
    on_error: Callable[[LtoError], CheckReport]


def registry() -> Dict[str, Any]:
    """Known checks and suites, as served by ``GET /api/checks``."""
    return {
        "checks": [
            {"name": name, "family": _family(name), "description": CHECK_DESCRIPTIONS[name]}
            for name in LATTICE_CHECKS + SKEIN_CHECKS + TOOLKIT_CHECKS
        ],
        "suites": {name: list(checks) for name, checks in SUITES.items()},
    }


def _family(check: str) -> str:
    if check in LATTICE_CHECKS:
        return "lattice"
    if check in SKEIN_CHECKS:
        return "skein"
    return "toolkit"


class CheckRunner:
    """
    Runs the checks of one configuration.

    Lattice checks run once per model and region assignment, skein checks
    once per category, toolkit checks once. Errors raised by a job are
    recorded in its report and never abort the run.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        tol = config.tolerances.tol
        self.lattice = LatticeHandler(config)
        self.skein = SkeinHandler(tol, config.seed, config.dense_budget)
        self.toolkit = ToolkitHandler(max(config.samples, 1), config.seed, tol, config.dense_budget)

    def plan(self) -> List[Job]:
        jobs: List[Job] = []
        for check in self.config.expanded_checks():
            if check in LATTICE_CHECKS:
                jobs.extend(self._lattice_jobs(check))
            elif check in SKEIN_CHECKS:
                for i, spec in enumerate(self.config.categories):
                    jobs.append(self._skein_job(check, i, spec.cat, spec.n))
            else:
                jobs.append(
                    Job(
                        (check, 0, 0),
                        check,
                        lambda check=check: self.toolkit.run(check),
                        lambda err, check=check: CheckReport.start(check).fail_with(err),
                    )
                )
        return jobs

    def _lattice_jobs(self, check: str) -> List[Job]:
        jobs = []
        for m in range(len(self.config.models)):
            try:
                planned = self.lattice.plan(check, m)
            except LtoError as err:
                logger.error("Cannot plan %s on model %d: %s", check, m, err.code)
                descriptor = self.config.models[m].model_dump()
                jobs.append(Job((check, m, 0), check, _raiser(err), lambda e, c=check, d=descriptor: CheckReport.start(c, d).fail_with(e)))
                continue
            for k, lattice_job in enumerate(planned):
                jobs.append(
                    Job(
                        (check, m, k),
                        check,
                        lambda j=lattice_job: self.lattice.run(j),
                        lambda err, j=lattice_job: self.lattice.failure_report(j, err),
                    )
                )
        return jobs

    def _skein_job(self, check: str, index: int, spec, n: int) -> Job:
        def failed(err: LtoError) -> CheckReport:
            return CheckReport.start(check, {"category": SkeinHandler.category_name(spec)}, {"n": n}).fail_with(err)

        return Job((check, index, 0), check, lambda: self.skein.run(check, spec, n), failed)

    @staticmethod
    def _execute(job: Job) -> CheckReport:
        try:
            return job.execute()
        except LtoError as err:
            logger.error("%s failed with %s: %s", job.check, err.code, err.message)
            return job.on_error(err)

    async def run(self) -> Dict[str, Any]:
        """
        Execute every planned job and merge the reports.

        Returns:
            ``{"pass", "count", "failed", "reports"}`` with reports ordered by
            check name, then model or category index, then region assignment
        """
        jobs = self.plan()
        semaphore = asyncio.Semaphore(self.config.jobs)

        async def bounded(job: Job):
            async with semaphore:
                report = await asyncio.to_thread(self._execute, job)
                return job.key, report

        results = await asyncio.gather(*(bounded(job) for job in jobs))
        merged = merge_reports(results, self.config.timing)
        if self.config.out:
            await write_report(self.config.out, canonical_dumps(merged))
        logger.info("%d/%d checks passed", merged["count"] - len(merged["failed"]), merged["count"])
        return merged


def _raiser(err: LtoError) -> Callable[[], CheckReport]:
    def raise_it() -> CheckReport:
        raise err

    return raise_it


def merge_reports(results, timing: bool = False) -> Dict[str, Any]:
    ordered = sorted(results, key=lambda item: item[0])
    reports = [report.to_json(timing) for _, report in ordered]
    failed = [f"{r['check']}#{i}" for i, r in enumerate(reports) if not r["pass"]]
    return {"pass": not failed, "count": len(reports), "failed": failed, "reports": reports}


def run_config(config: RunConfig, loop_runner: Optional[Callable] = None) -> Dict[str, Any]:
    """Synchronous entry point for the CLI."""
    return (loop_runner or asyncio.run)(CheckRunner(config).run())
