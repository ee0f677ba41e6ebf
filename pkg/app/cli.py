"""
Command line for lto-verify.

    lto-verify check --model toric --patch 4x4 --suite lto
    lto-verify skein --cat fibonacci --n 3 --suite modular
    lto-verify tomita --samples 200
    lto-verify report results.json

Exit status is 0 when every report passes, 1 when a check fails and 2 for an
invalid configuration.
"""

import asyncio
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Tuple

import click

from app import __version__
from app.check_runner import run_config
from app.config import ModelSpec, RunConfig, load_config, merge_overrides, validate_config
from app.errors import ConfigError, LtoError
from app.utils.file_utils import compare_golden, read_report
from app.utils.report_utils import canonical_dumps, render_table, report_frame, summary

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, force=True)


def parse_patch(value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    parts = value.lower().split("x")
    if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
        raise ConfigError(f"--patch must look like WxH, got {value!r}", "models.0.patch")
    return [int(parts[0]), int(parts[1])]


def build_config(config_path: Optional[str], data: Dict[str, Any], overrides: Dict[str, Any]) -> RunConfig:
    """File values, then flags, then the environment."""
    if config_path:
        return load_config(config_path, {**data, **overrides})
    return validate_config(merge_overrides(data, overrides))


def _common_overrides(checks, tol, dense_budget, jobs, seed, out) -> Dict[str, Any]:
    return {
        "checks": list(checks) or None,
        "tolerances": {"tol": tol} if tol is not None else None,
        "dense_budget": dense_budget,
        "jobs": jobs,
        "seed": seed,
        "out": out,
    }


def emit(merged: Dict[str, Any], as_json: bool) -> int:
    if as_json:
        click.echo(canonical_dumps(merged))
    else:
        frame = report_frame(merged)
        click.echo(render_table(frame))
        counts = summary(frame)
        click.echo(f"\n{counts['passed']}/{counts['total']} passed")
    return 0 if merged["pass"] else 1


def execute(config: RunConfig, as_json: bool) -> None:
    logger.debug("Running checks %s", config.expanded_checks())
    merged = run_config(config)
    sys.exit(emit(merged, as_json))


def common_options(func):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON or YAML RunConfig."),
        click.option("--suite", multiple=True, help="Suite name (repeatable)."),
        click.option("--check", multiple=True, help="Single check name (repeatable)."),
        click.option("--tol", type=float, default=None, help="Residual tolerance."),
        click.option("--dense-budget", type=int, default=None, help="Largest dense dimension."),
        click.option("--jobs", type=int, default=None, help="Worker pool size."),
        click.option("--seed", type=int, default=None, help="Seed for sampled checks."),
        click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the JSON report here."),
        click.option("--json", "as_json", is_flag=True, help="Print JSON instead of a table."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.version_option(__version__, prog_name="lto-verify")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging.")
def main(verbose: bool) -> None:
    """Finite-volume verification of local topological order axioms."""
    configure_logging(verbose)


def _checks_or_default(suite, check, config_path, default: str) -> Tuple[str, ...]:
    """Flags win; without flags the file's checks stand, and without a file the command's default suite runs."""
    chosen = tuple(suite) + tuple(check)
    if chosen or config_path:
        return chosen
    return (default,)


@main.command()
@click.option("--model", type=click.Choice(["toric", "qd"]), default=None, help="Lattice model kind.")
@click.option("--patch", default=None, help="Patch size WxH.")
@click.option("--group", default=None, help="Group of the quantum double (Z2, Z3, Z5, S3).")
@click.option("--cut", type=float, default=None, help="Half-integer x of the cut.")
@click.option("--layout", type=click.Choice(["square", "rotated"]), default=None, help="Edge layout.")
@click.option("--convention", type=click.Choice(["z_star", "x_star"]), default=None, help="Toric code convention: z_star puts Z on the stars, x_star puts X there.")
@click.option("--ladder", type=int, multiple=True, help="Interval length of a region ladder rung (repeatable).")
@click.option("--samples", type=int, default=None, help="Sampled pairs for the product-state check.")
@click.option("--timing", is_flag=True, help="Record wall-clock seconds in the reports.")
@common_options
def check(model, patch, group, cut, layout, convention, ladder, samples, timing, config_path, suite, check, tol, dense_budget, jobs, seed, out, as_json):
    """Run lattice-model checks."""
    try:
        data: Dict[str, Any] = {}
        spec: Dict[str, Any] = {}
        for key, value in (
            ("kind", model),
            ("patch", parse_patch(patch)),
            ("group", group),
            ("cut", cut),
            ("layout", layout),
            ("convention", convention),
        ):
            if value is not None:
                spec[key] = value
        if spec:
            data["models"] = [spec]
        overrides = _common_overrides(_checks_or_default(suite, check, config_path, "lto"), tol, dense_budget, jobs, seed, out)
        overrides.update({"ladder": list(ladder) or None, "samples": samples, "timing": timing or None})
        config = build_config(config_path, data, overrides)
        if not config.models:
            config = config.model_copy(update={"models": [ModelSpec()]})
    except LtoError as err:
        _fail_config(err)
    execute(config, as_json)


@main.command()
@click.option("--cat", default="fibonacci", show_default=True, help="vec_zN, fibonacci, ising.")
@click.option("--n", "n", type=int, default=2, show_default=True, help="Boundary length.")
@common_options
def skein(cat, n, config_path, suite, check, tol, dense_budget, jobs, seed, out, as_json):
    """Run skein-module checks for a fusion category."""
    try:
        data = {} if config_path else {"categories": [{"cat": cat, "n": n}]}
        overrides = _common_overrides(_checks_or_default(suite, check, config_path, "modular"), tol, dense_budget, jobs, seed, out)
        config = build_config(config_path, data, overrides)
    except LtoError as err:
        _fail_config(err)
    execute(config, as_json)


@main.command()
@click.option("--samples", type=int, default=200, show_default=True, help="Random algebras per suite.")
@common_options
def tomita(samples, config_path, suite, check, tol, dense_budget, jobs, seed, out, as_json):
    """Run the von Neumann algebra toolkit self-tests."""
    try:
        overrides = _common_overrides(_checks_or_default(suite, check, config_path, "tomita"), tol, dense_budget, jobs, seed, out)
        overrides["samples"] = samples
        config = build_config(config_path, {}, overrides)
    except LtoError as err:
        _fail_config(err)
    execute(config, as_json)


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Print the summary as JSON.")
@click.option(
    "--golden",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Golden report to compare against; differences fail the command.",
)
@click.option("--golden-tol", type=float, default=1e-9, show_default=True, help="Allowed residual drift.")
def report(path, as_json, golden, golden_tol):
    """Pretty-print a JSON report, optionally against a golden copy."""
    try:
        data = asyncio.run(read_report(path))
        frame = report_frame(data)
        expected = asyncio.run(read_report(golden)) if golden else None
    except LtoError as err:
        _fail_config(err)
    differences = compare_golden(data, expected, golden_tol) if expected is not None else []
    for line in differences:
        click.echo(f"golden mismatch {line}", err=True)
    if as_json:
        click.echo(json.dumps({"summary": summary(frame), "rows": frame.to_dict(orient="records")}, indent=2, sort_keys=True))
    else:
        click.echo(render_table(frame))
    sys.exit(0 if bool(frame["pass"].all()) and not differences else 1)


def _fail_config(err: LtoError) -> None:
    field = err.detail.get("field", "")
    where = f" ({field})" if field else ""
    click.echo(f"{err.code}{where}: {err.message}", err=True)
    sys.exit(2)


if __name__ == "__main__":
    main()
