"""Command-line front end.

Commands::

    hsm hc-z            --instance FILE
    hsm estimate        --instance FILE [--cover SPEC] [--epsilon E] [--seed S]
    hsm hs-estimate     --instance FILE [--epsilon E] [--delta D] [--seed S]
    hsm converge-study  --instance FILE --rho-list 4,8,16 [--epsilon E] [--seed S]
    hsm verify          [--suite NAME] [--seed S] [--instance FILE]

Exit codes: 0 success, 1 validation error, 2 cap exceeded, 3 regime violation.
Outputs are pure functions of the input files and flags.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .estimator import (EstimatorConfig, RegimeViolation, ZeroRatioError, estimate_grid_partition_function,
                        estimate_hard_sphere, estimate_partition_function)
from .hardcore import (CapExceededError, CliqueCover, InvalidGraphError, greedy_clique_cover, instance_from_dict,
                       partition_function_bruteforce, validate_clique_cover)
from .spheres import (CellCover, Discretization, HardSphereInstance, cell_clique_cover,
                      explicit_graph, tonks_gas_Z)
from .verify import SUITES, run_suite

EXIT_OK, EXIT_VALIDATION, EXIT_CAP, EXIT_REGIME = 0, 1, 2, 3
BRUTE_FORCE_GRID = 24


class UsageError(ValueError):
    """Bad flags or malformed input files (exit 1)."""


# -- schemas --------------------------------------------------------------------------------

def _schema_registry():
    from referencing import Registry, Resource

    schemas = {}
    for entry in resources.files("hsm").joinpath("schemas").iterdir():
        if entry.name.endswith(".schema.json"):
            schemas[entry.name] = json.loads(entry.read_text())
    registry = Registry().with_resources(
        (name, Resource.from_contents(s)) for name, s in schemas.items())
    return schemas, registry


def validate_output(payload: dict, schema_name: str) -> None:
    """Raise ``jsonschema.ValidationError`` if ``payload`` does not match the shipped schema."""
    import jsonschema

    schemas, registry = _schema_registry()
    validator = jsonschema.Draft202012Validator(schemas[schema_name], registry=registry)
    validator.validate(payload)


# -- helpers --------------------------------------------------------------------------------

def _read_json(path: str | None) -> dict:
    if path is None:
        raise UsageError("--instance is required")
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("HSM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"HSM_THREADS must be an integer, got {env!r}") from exc
    return 1


def _config(args, epsilon: float | None = None) -> EstimatorConfig:
    return EstimatorConfig(epsilon=epsilon if epsilon is not None else args.epsilon, master_seed=args.seed,
                           parallel_chains=args.chains, threads=_threads(args))


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _is_grid_spec(data: dict) -> bool:
    return "d" in data and "ell" in data


def _parse_cover(spec: str, instance) -> CliqueCover:
    if spec == "singletons":
        return CliqueCover.singletons(instance.n)
    if spec == "greedy":
        return greedy_clique_cover(instance.graph)
    text = spec
    if not spec.lstrip().startswith("["):
        try:
            text = Path(spec).read_text()
        except OSError as exc:
            raise UsageError(f"cover must be 'singletons', 'greedy', 'cells', a JSON list or a file: {spec!r}") from exc
    try:
        cliques = json.loads(text)
        if isinstance(cliques, dict):
            cliques = cliques["cliques"]
        cover = CliqueCover(cliques)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed cover {spec!r}: {exc}") from exc
    report = validate_clique_cover(instance, cover)
    if not report.valid:
        raise UsageError("invalid clique cover: " + "; ".join(report.failures))
    return cover


# -- commands -------------------------------------------------------------------------------

def cmd_hc_z(args) -> int:
    inst = instance_from_dict(_read_json(args.instance))
    _emit(f"{partition_function_bruteforce(inst)!r}\n", args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    data = _read_json(args.instance)
    cfg = _config(args)
    if _is_grid_spec(data):
        if args.cover not in ("cells", None):
            raise UsageError("grid instances only support --cover cells")
        disc = Discretization(HardSphereInstance.from_dict(data), Fraction(str(data["rho"])))
        cover = CellCover(disc, int(data["cell_side"])) if "cell_side" in data else cell_clique_cover(disc)
        report = estimate_grid_partition_function(cover, cfg)
    else:
        if args.cover == "cells":
            raise UsageError("--cover cells needs a grid instance (keys d, ell, lambda, rho)")
        inst = instance_from_dict(data)
        cover = _parse_cover(args.cover or "singletons", inst)
        report = estimate_partition_function(inst, cover, cfg)
    return _emit_report(report, args, "estimate_report.schema.json")


def _emit_report(report, args, schema: str) -> int:
    payload = report.to_dict(include_time=args.timing)
    validate_output(payload, schema)
    if args.format == "csv":
        _emit(report.to_csv(), args.out)
    else:
        _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_hs_estimate(args) -> int:
    inst = HardSphereInstance.from_dict(_read_json(args.instance))
    report = estimate_hard_sphere(inst, args.epsilon, args.delta, seed=args.seed, config=_config(args))
    return _emit_report(report, args, "hs_estimate_report.schema.json")


def loglog_slope(rhos, errs) -> float | None:
    pts = [(math.log(r), math.log(e)) for r, e in zip(rhos, errs) if e > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def converge_rows(instance: HardSphereInstance, rhos, config: EstimatorConfig) -> list[dict]:
    """``Z_rho`` by brute force while the grid has at most 24 points, by the estimator beyond."""
    z_tonks = tonks_gas_Z(instance.ell, instance.lam)
    rows = []
    for rho in rhos:
        disc = Discretization(instance, rho)
        if disc.vertex_count <= BRUTE_FORCE_GRID:
            z, method = partition_function_bruteforce(explicit_graph(disc)), "bruteforce"
        else:
            z, method = estimate_grid_partition_function(cell_clique_cover(disc), config).estimate, "estimator"
        rows.append({"rho": float(rho), "Z_rho": z, "Z_tonks": z_tonks, "rel_err": abs(z - z_tonks) / z_tonks,
                     "method": method})
    return rows


def cmd_converge_study(args) -> int:
    inst = HardSphereInstance.from_dict(_read_json(args.instance))
    if inst.d != 1:
        raise UsageError("the convergence study compares against the exact d = 1 (Tonks) value")
    if not args.rho_list:
        raise UsageError("--rho-list is required")
    try:
        rhos = [Fraction(tok.strip()) for tok in args.rho_list.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --rho-list: {exc}") from exc
    rows = converge_rows(inst, rhos, _config(args))
    errs = [r["rel_err"] for r in rows]
    if any(b > a for a, b in zip(errs, errs[1:])):
        print("warning: relative error is not decreasing in rho", file=sys.stderr)
    slope = loglog_slope([r["rho"] for r in rows], errs)
    if args.format == "json":
        payload = {"instance": inst.to_dict(), "rows": rows, "loglog_slope": slope}
        validate_output(payload, "converge_study.schema.json")
        _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    else:
        lines = ["rho,Z_rho,Z_tonks,rel_err"]
        lines += [f"{r['rho']!r},{r['Z_rho']!r},{r['Z_tonks']!r},{r['rel_err']!r}" for r in rows]
        lines.append(f"# loglog_slope={slope!r}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    family = None
    if args.instance is not None:
        data = _read_json(args.instance)
        family = [(Path(args.instance).stem, instance_from_dict(data))]
    report = run_suite(args.suite, args.seed, family)
    validate_output(report, "verify_report.schema.json")
    for r in report["results"]:
        status = "ok" if r["passed"] else ("diag" if r["diagnostic"] else "FAIL")
        print(f"{status:4s} {r['lemma']:32s} checks={r['checks']:<5d} worst_slack={r['worst_slack']}",
              file=sys.stderr)
    _emit(json.dumps(report, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


# -- entry point ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsm", description="Hard-core and hard-sphere partition functions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, epsilon=0.1):
        p.add_argument("--instance", help="instance JSON file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--epsilon", type=float, default=epsilon)
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: $HSM_THREADS or 1)")
        p.add_argument("--chains", type=int, default=4,
                       help="independent chain streams per ratio; fixes the output, unlike --threads")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--timing", action="store_true", help="include wall time in JSON reports")

    p = sub.add_parser("hc-z", help="exact partition function by enumeration")
    common(p)
    p.set_defaults(func=cmd_hc_z)
    p = sub.add_parser("estimate", help="telescoping Monte Carlo estimate")
    common(p)
    p.add_argument("--cover", default=None, help="singletons | greedy | cells | JSON list | file")
    p.set_defaults(func=cmd_estimate)
    p = sub.add_parser("hs-estimate", help="end-to-end hard-sphere estimate")
    common(p, epsilon=0.3)
    p.add_argument("--delta", type=float, default=0.2)
    p.set_defaults(func=cmd_hs_estimate)
    p = sub.add_parser("converge-study", help="d = 1 discretization error against the exact value")
    common(p, epsilon=0.01)
    p.add_argument("--rho-list", default=None, help="comma-separated resolutions")
    p.set_defaults(func=cmd_converge_study, format="csv")
    p = sub.add_parser("verify", help="numerical verification suites")
    common(p)
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except CapExceededError as exc:
        print(f"error: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except RegimeViolation as exc:
        print(f"error: regime violation: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except InvalidGraphError as exc:
        print(f"error: invalid instance, violated invariant {exc.invariant}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (UsageError, ZeroRatioError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
