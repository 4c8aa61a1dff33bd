#!/usr/bin/env python3

"""
Main script for generalized Newton transformation computations.

This script ties the library together with reproducible, file-based runs.

It performs the following steps:
1. Parses command-line arguments and resolves the run configuration
2. Dispatches to a subcommand (sigma, average, functional, minimality, variation, gallery)
3. Writes a deterministic JSON report that echoes the seed
4. Exits 0 when every check passes, 1 when a check fails, 2 on bad usage or input
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Tuple

import utils
from gallery import GALLERY
from haar import averaged_sections, node_rng, sigma_hat
from infotypes import SigmaReport
from minimality import VariationSpec, first_variation_check, functional_value, minimality_residual
from multiindex import MultiIndex
from newton import (
    IDENTITY_TOLERANCE,
    OperatorSystem,
    identity_residual,
    newton_table,
    right_recursion_check,
    sigma_oracle,
    trace_residual,
)
from runconfig import RunConfig, resolve_config

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
ORACLE_TOLERANCE = 1e-10


def _load_systems(config: RunConfig) -> List[OperatorSystem]:
    if not config.inputs:
        raise ValueError("No input file given (use --input)")
    systems = []
    for path in config.inputs:
        systems.extend(utils.get_input_processor(path).get_systems())
    return systems


def _require(value, flag: str):
    if value is None:
        raise ValueError(f"{flag} is required for this command")
    return value


def sigma_report(system: OperatorSystem, config: RunConfig) -> Tuple[SigmaReport, bool]:
    """
    sigma_u table, identity residuals and optional oracle comparison for one system.
    """
    table = newton_table(system)
    selected = [MultiIndex(config.u)] if config.u is not None else list(table)
    sigmas = {u.to_json(): table.sigma(u) for u in selected}
    traces, identities = trace_residual(table), identity_residual(table)
    tolerance = IDENTITY_TOLERANCE * max(1.0, system.norm()) ** system.n
    passed = traces <= tolerance and identities <= tolerance
    max_rel_err = None
    if config.oracle:
        oracle = sigma_oracle(system)
        max_rel_err = max(abs(table.sigma(u) - value) / max(1.0, abs(value)) for u, value in oracle.items())
        passed = passed and max_rel_err <= ORACLE_TOLERANCE
    report = SigmaReport(
        n=system.n,
        q=system.q,
        sigma=sigmas,
        trace_residual=traces,
        identity_residual=identities,
        recursion_residual=right_recursion_check(system, table),
        max_rel_err=max_rel_err,
    )
    return report, passed


def cmd_sigma(config: RunConfig) -> Tuple[Any, bool]:
    results = [sigma_report(system, config) for system in _load_systems(config)]
    return [r.model_dump(mode="json") for r, _ in results], all(passed for _, passed in results)


def cmd_average(config: RunConfig) -> Tuple[Any, bool]:
    u = MultiIndex(_require(config.u, "--u"))
    reports = []
    for k, system in enumerate(_load_systems(config)):
        scheme = config.fiber_scheme(system.q)
        reports.append({
            "sigma_hat": sigma_hat(system, u, scheme, node_rng(config.seed, k)).model_dump(mode="json"),
            "sections": averaged_sections(system, u, config.curvature, scheme, node_rng(config.seed, k)).model_dump(
                mode="json"
            ),
        })
    return reports, True


def cmd_functional(config: RunConfig) -> Tuple[Any, bool]:
    patch = utils.parse_patch(_require(config.patch, "--patch"))
    value = functional_value(
        patch, _require(config.u, "--u"), config.resolution, config.fiber_scheme(patch.q), config.seed,
        workers=config.threads, progress=config.progress,
    )
    return {"patch": patch.describe(), "functional": value.model_dump(mode="json")}, True


def cmd_minimality(config: RunConfig) -> Tuple[Any, bool]:
    patch = utils.parse_patch(_require(config.patch, "--patch"))
    report = minimality_residual(
        patch, _require(config.u, "--u"), config.resolution, config.fiber_scheme(patch.q), config.seed,
        config.tolerance, config.threads, config.progress,
    )
    return {"patch": patch.describe(), "report": report.model_dump(mode="json")}, report.verdict


def cmd_variation(config: RunConfig) -> Tuple[Any, bool]:
    patch = utils.parse_patch(_require(config.patch, "--patch"))
    spec = VariationSpec(patch, utils.parse_field(config.field, patch.n), tuple(config.steps))
    report = first_variation_check(
        spec, _require(config.u, "--u"), config.resolution, config.fiber_scheme(patch.q), config.seed,
        config.threads, config.progress,
    )
    return {"patch": patch.describe(), "field": config.field, "report": report.model_dump(mode="json")}, report.passed


def cmd_gallery(config: RunConfig) -> Tuple[Any, bool]:
    if config.entry is None:
        return {"entries": sorted(GALLERY)}, True
    entry = utils.get_gallery_entry(config.entry)
    results = entry.run_expectations(config, config.output_dir)
    return {
        "entry": entry.name,
        "expectations": [r.model_dump(mode="json") for r in results],
        "passed": all(r.passed for r in results),
    }, all(r.passed for r in results)


COMMANDS = {
    "sigma": cmd_sigma,
    "average": cmd_average,
    "functional": cmd_functional,
    "minimality": cmd_minimality,
    "variation": cmd_variation,
    "gallery": cmd_gallery,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Generalized Newton transformations and u-minimality checks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of run settings (flags override it)")
    common.add_argument("--seed", type=int, help="Seed (default: $NEWTONFRAME_SEED or 0)")
    common.add_argument("--group", choices=["O", "SO"], help="Fiber group (default: O)")
    common.add_argument("--scheme", choices=["mc", "exact", "auto"], help="Fiber scheme (default: auto)")
    common.add_argument("--samples", type=int, help="Monte Carlo samples per average")
    common.add_argument("--nodes", type=int, help="Angle nodes of the exact q=2 scheme")
    common.add_argument("--resolution", type=int, help="Mesh nodes per chart axis")
    common.add_argument("--tolerance", type=float, help="Verdict tolerance override")
    common.add_argument("--threads", type=int, help="Worker threads (results do not depend on it)")
    common.add_argument("--progress", action="store_true", default=None, help="Show progress bars")
    common.add_argument("--out", help="Write the JSON report here instead of stdout")
    common.add_argument("--verbose", action="store_true", help="Log debug output to stderr")

    sub = parser.add_subparsers(dest="command", required=True)
    sigma = sub.add_parser("sigma", parents=[common], help="sigma_u table of operator systems")
    sigma.add_argument("--input", action="append", dest="inputs", help="JSON file of systems")
    sigma.add_argument("--u", help="Only this multi-index, e.g. 2,0")
    sigma.add_argument("--oracle", action="store_true", default=None, help="Cross-check with determinant expansion")

    average = sub.add_parser("average", parents=[common], help="Fiber averages of sigma_u and sections")
    average.add_argument("--input", action="append", dest="inputs", help="JSON file of systems")
    average.add_argument("--u", help="Multi-index, e.g. 2,0")
    average.add_argument("--curvature", type=float, help="Ambient curvature c for R_u")

    for name, text in (
        ("functional", "Integral of sigma_hat_u over a patch"),
        ("minimality", "u-minimality residual over a mesh"),
        ("variation", "First-variation finite-difference check"),
    ):
        command = sub.add_parser(name, parents=[common], help=text)
        command.add_argument("--patch", help="Patch spec, e.g. umbilical:n=2,q=2,r=1")
        command.add_argument("--u", help="Multi-index, e.g. 2,0")
        if name == "variation":
            command.add_argument("--field", help="Field spec, e.g. bump:amp=0.1,width=1")
            command.add_argument("--steps", help="Decreasing steps, e.g. 1e-2,5e-3,2.5e-3")

    gallery = sub.add_parser("gallery", parents=[common], help="Built-in patches with expectations")
    gallery.add_argument("action", choices=["list", "check"])
    gallery.add_argument("entry", nargs="?", help="Entry name for 'check'")
    gallery.add_argument("--all-u-upto", type=int, dest="all_u_upto", help="Also sweep every u with |u| ≤ K")
    gallery.add_argument("--output-dir", dest="output_dir", help="Directory for per-step JSON records")
    return parser


def _flags(args: argparse.Namespace) -> Dict[str, Any]:
    flags = {key: value for key, value in vars(args).items() if key not in ("config", "verbose", "action")}
    if isinstance(flags.get("u"), str):
        flags["u"] = list(utils.parse_index(flags["u"]))
    if isinstance(flags.get("steps"), str):
        flags["steps"] = utils.parse_floats(flags["steps"])
    if args.command == "gallery":
        if args.action == "check" and not args.entry:
            raise ValueError("gallery check needs an entry name (see 'gallery list')")
        if args.action == "list":
            flags["entry"] = None
    return flags


def _write(payload: Dict[str, Any], out: Optional[str]):
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out:
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
        with open(out, "w") as f:
            f.write(text + "\n")
        print(f"Report written to {out}", file=sys.stderr)
    else:
        print(text)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = resolve_config(_flags(args), args.config)
        result, passed = COMMANDS[args.command](config)
    except (ValueError, NotImplementedError, OSError) as e:
        # pydantic ValidationError and JSONDecodeError are ValueErrors
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    payload = {"command": args.command, "seed": config.seed, "passed": passed, "result": result}
    _write(payload, config.out)
    return EXIT_PASS if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
