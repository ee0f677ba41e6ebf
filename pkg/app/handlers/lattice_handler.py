"""
Handler for the lattice-model checks.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List

from app.config import RegionSpec, RunConfig
from app.core import lto_checks
from app.core.lattice import Interval, Region, region_ladder
from app.core.models import LatticeModel, ProjectionNet, straddle_identities
from app.core.report import CheckReport
from app.errors import CheckError, RegionError

logger = logging.getLogger(__name__)

LADDER_CHECKS = ("straddle_identities", "lto2", "hd", "rp", "finite_haag", "interaction_algebra", "os_map")


@dataclass
class LatticeJob:
    """One check on one model with concrete regions."""

    check: str
    model_index: int
    regions: Dict[str, object] = field(default_factory=dict)
    label: str = ""


class LatticeHandler:
    """Resolves regions for lattice checks and runs them on a shared projection net."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.tol = config.tolerances.tol
        self._nets: Dict[int, ProjectionNet] = {}

    def net(self, model_index: int) -> ProjectionNet:
        net = self._nets.get(model_index)
        if net is None:
            model = self.config.models[model_index].build(self.config.dense_budget)
            net = ProjectionNet(model, self.config.dense_budget)
            self._nets[model_index] = net
        return net

    # job planning

    def plan(self, check: str, model_index: int) -> List[LatticeJob]:
        """
        Jobs for ``check`` on one model: the explicit region specs for that check
        when the config has any, else the default geometry.
        """
        explicit = [spec for spec in self.config.regions if spec.check == check]
        if explicit:
            return [
                LatticeJob(check, model_index, self._explicit(spec), f"regions[{i}]")
                for i, spec in enumerate(explicit)
            ]
        model = self.net(model_index).model
        if check == "rp_hamiltonian":
            return [LatticeJob(check, model_index, {}, "model")]
        if check in LADDER_CHECKS:
            steps = region_ladder(model, self.config.ladder)
            if not steps:
                raise RegionError(
                    "BAD_INTERVAL",
                    f"No ladder rung of sizes {self.config.ladder} fits the {model.width}x{model.height} patch",
                )
            return [LatticeJob(check, model_index, self._from_step(check, model, step), f"k={step.size}") for step in steps]
        return [LatticeJob(check, model_index, self.default_regions(check, model), "default")]

    @staticmethod
    def _explicit(spec: RegionSpec) -> Dict[str, object]:
        out: Dict[str, object] = {}
        for name in ("R", "S", "R2", "S2"):
            region = spec.region(name)
            if region is not None:
                out[name] = region
        if spec.enlargements is not None:
            out["enlargements"] = spec.enlargement_regions()
        return out

    @staticmethod
    def _from_step(check: str, model: LatticeModel, step) -> Dict[str, object]:
        if check == "straddle_identities":
            return {"I": LatticeHandler.straddle_interval(model, step)}
        if check == "lto2":
            R_plus, _ = model.halves(step.R)
            S_plus, _ = model.halves(step.S)
            return {"R": R_plus, "S": S_plus}
        return {"R": step.R, "S": step.S}

    @staticmethod
    def straddle_interval(model: LatticeModel, step) -> Interval:
        """
        The plus column of the rung's S, where S meets the cut.

        It spans ``size + 2`` rows, so every rung has straddling terms in
        both layouts.
        """
        _, y0, _, y1 = step.S.bounding_box()
        return Interval.on_cut(model.plus_column, y0, y1 - y0 + 1, "+")

    @staticmethod
    def default_regions(check: str, model: LatticeModel) -> Dict[str, object]:
        """
        Geometry for the checks that do not follow the ladder.

        The single-site region sits at (1, 1); LTO3/LTO4 nest a one-site and a
        two-site region against the right face of a 3×3 block.
        """
        site = Region.rectangle(1, 1, 1, 1)
        if check == "canonical_state":
            return {"R": site}
        if check == "lto1":
            return {"R": site, "S": site.grown(1).intersection(model.patch)}
        if check == "lto3_lto4":
            x = min(model.width - 1, 2)
            S2 = Region.rectangle(max(0, x - 2), 0, min(model.width, 4), min(model.height, 4)).intersection(model.patch)
            return {
                "R": Region.rectangle(x, 1, 1, 1),
                "R2": Region.rectangle(x - 1, 1, 2, 1),
                "S": Region.rectangle(x - 2, 0, 3, 3),
                "S2": S2,
            }
        if check == "product_state":
            return {"R": site, "R2": Region.rectangle(model.width - 1, model.height - 1, 1, 1)}
        raise CheckError("UNKNOWN_CHECK", f"No default geometry for {check}")

    # execution

    def run(self, job: LatticeJob) -> CheckReport:
        net = self.net(job.model_index)
        r = job.regions
        tol = self.tol
        check = job.check
        logger.debug("Running %s (%s) on %s", check, job.label, net.model.descriptor())
        if check == "straddle_identities":
            return straddle_identities(net.model, r["I"], min(tol, 1e-12))
        if check == "canonical_state":
            return lto_checks.check_canonical_state(net, r["R"], tol=tol)
        if check == "lto1":
            return lto_checks.check_lto1(net, r["R"], r["S"], tol=tol, cutoff=self.config.tolerances.rank_cutoff)
        if check == "lto2":
            _, report = lto_checks.extract_boundary_algebra(net, r["R"], r["S"], r.get("enlargements"), tol=tol)
            return report
        if check == "lto3_lto4":
            return lto_checks.check_lto3_lto4(net, r["R"], r["R2"], r["S"], r["S2"], tol=tol)
        if check == "hd":
            return lto_checks.check_hd(net, r["R"], r["S"])
        if check == "rp":
            return lto_checks.check_rp(net, r["R"], r["S"], tol=tol, enlargements=r.get("enlargements"))
        if check == "finite_haag":
            return lto_checks.check_finite_haag(net, r["R"], r["S"], seed=self.config.seed, tol=self.config.tolerances.angle)
        if check == "product_state":
            return lto_checks.check_product_state(
                net, r["R"], r["R2"], samples=self.config.samples, seed=self.config.seed, tol=tol
            )
        if check == "interaction_algebra":
            _, report = lto_checks.interaction_algebra(net, r["R"], r["S"], cutoff=self.config.tolerances.rank_cutoff)
            return report
        if check == "os_map":
            return lto_checks.os_map_check(net, r["R"], r["S"], tol=tol, enlargements=r.get("enlargements"))
        if check == "rp_hamiltonian":
            return lto_checks.check_rp_hamiltonian(net.model, tol=tol)
        raise CheckError("UNKNOWN_CHECK", f"No lattice runner for {check}")

    def failure_report(self, job: LatticeJob, error) -> CheckReport:
        report = CheckReport.start(job.check, self.config.models[job.model_index].model_dump())
        report.regions = {k: _region_json(v) for k, v in job.regions.items()}
        return report.fail_with(error)


def _region_json(value) -> object:
    if isinstance(value, list):
        return [v.to_json() for v in value]
    return value.to_json()
