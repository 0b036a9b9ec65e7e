import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from dataclasses import asdict
from typing import Any, Dict, List, Optional

from asymptotics import (
    RegimeClass, fit_rows, leading_term, predicted_exponent, scan_and_fit, slice_sum,
    ScanRow,
)
from counting import (
    DEFAULT_TOL, METHOD_SLICED, count, count_multiplicative,
)
from descriptors import (
    ConfigError, embedded, eps_label, lattice_json, load_json, parse_domain, parse_eps_list,
    parse_float, parse_int, parse_lattice, parse_matrix, parse_multiplier, parse_scalar,
    parse_subspace, parse_vector,
)
from domains import QMC_SAMPLES, QMC_SEED
from exact_scalar import GeometryError, to_float
from lattice_core import BUDGET_ENV_VAR, DEFAULT_POINT_BUDGET
from numberfield import (
    analyze_field, canonical_embedding, field_norm, good_position_check,
)
from reports import (
    COUNT_COLUMNS, SCAN_COLUMNS, SPECTRUM_COLUMNS, loglog_svg, read_csv, write_csv,
    write_json, write_svg,
)
from spectral import (
    FlatTorus, counting_function, eigenvalues_below, leading_term_spectral,
    partial_density_of_states, pdos_remainder,
)
from splitter import split, verify_trivial_intersection

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_VERDICT_FAIL = 2

DEFAULT_CONFIG = {
    "counting": {"tol": DEFAULT_TOL, "point_budget": DEFAULT_POINT_BUDGET, "workers": 1},
    "qmc": {"seed": QMC_SEED, "samples": QMC_SAMPLES},
    "fit": {"slack": 0.15, "min_magnitude": 0.5, "min_rows": 4, "delta": 0.1},
    "output": {"dir": "results", "svg": True},
}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(experiment_path: Optional[str] = None) -> Dict[str, Any]:
    """Load configuration from file, merged over defaults and under the experiment file"""
    config = DEFAULT_CONFIG
    config_path = Path(__file__).parent / "config.json"
    if config_path.exists():
        config = deep_merge(config, load_json(config_path))
    logger.info("Configuration loaded")
    if experiment_path:
        config = deep_merge(config, load_json(experiment_path))
        logger.info(f"Experiment loaded from {experiment_path}")
    return config


def apply_flags(config: Dict[str, Any], args: argparse.Namespace) -> Dict[str, Any]:
    """Command-line flags take precedence over every file"""
    overrides: Dict[str, Any] = {}
    if args.workers is not None:
        overrides.setdefault("counting", {})["workers"] = args.workers
    if args.tol is not None:
        overrides.setdefault("counting", {})["tol"] = args.tol
    if args.seed is not None:
        try:
            overrides.setdefault("qmc", {})["seed"] = int(args.seed, 0)
        except ValueError:
            raise ConfigError(f"Seed must be an integer, got {args.seed!r}", field="--seed")
    if args.out is not None:
        overrides.setdefault("output", {})["dir"] = args.out
    return deep_merge(config, overrides)


def point_budget(config: Dict[str, Any]) -> Optional[int]:
    """None lets LATGEO_BUDGET win when it is set"""
    if os.environ.get(BUDGET_ENV_VAR):
        return None
    return parse_int(config["counting"]["point_budget"], "counting.point_budget")


def require(config: Dict[str, Any], key: str) -> Any:
    if key not in config:
        raise ConfigError(f"Experiment is missing '{key}'", field=key)
    return config[key]


def _dim(dims: Dict[str, Any], key: str) -> Any:
    if key not in dims:
        raise ConfigError(f"Missing '{key}'", field=f"dims.{key}")
    return dims[key]


def output_dir(config: Dict[str, Any]) -> Path:
    return Path(config["output"]["dir"])


def build_problem(config: Dict[str, Any]):
    lattice = embedded(parse_lattice(require(config, "lattice")))
    subspace = parse_subspace(config.get("subspace", {"rows": []}), lattice.dim)
    domain = parse_domain(require(config, "domain"))
    domain.configure_qmc(config["qmc"]["seed"], config["qmc"]["samples"])
    return lattice, subspace, domain


def build_regime(config: Dict[str, Any], sd) -> RegimeClass:
    data = require(config, "regime")
    if isinstance(data, str):
        data = {"name": data}
    return RegimeClass.from_split(
        sd, data.get("name", ""), ell=data.get("ell"), s=data.get("s"), t=data.get("t"),
        delta=parse_float(data.get("delta", config["fit"]["delta"]), "regime.delta"),
    )


def cmd_count(config: Dict[str, Any]) -> int:
    lattice, subspace, domain = build_problem(config)
    counting_cfg = config["counting"]
    shift = parse_vector(config["shift"], "shift") if "shift" in config else None
    rows = []
    if "multiplier" in config or "multipliers" in config:
        multipliers = config.get("multipliers") or [config["multiplier"]]
        for i, multiplier in enumerate(multipliers):
            result = count_multiplicative(
                lattice, parse_multiplier(multiplier, f"multiplier[{i}]"), domain, shift,
                tol=counting_cfg["tol"], budget=point_budget(config), workers=counting_cfg["workers"],
            )
            rows.append(result.as_row())
            print(f"{result.parameter}: {result.certain} (+{result.boundary_hits} boundary)")
    else:
        method = config.get("method")
        for eps in parse_eps_list(require(config, "eps")):
            result = count(lattice, subspace, domain, eps, shift, method=method, tol=counting_cfg["tol"],
                           budget=point_budget(config), workers=counting_cfg["workers"])
            rows.append(result.as_row())
            print(f"eps={eps_label(eps)}: {result.certain} (+{result.boundary_hits} boundary) [{result.method}]")
    write_csv(output_dir(config) / "counts.csv", COUNT_COLUMNS, rows)
    return EXIT_PASS


def cmd_leading(config: Dict[str, Any]) -> int:
    lattice, subspace, domain = build_problem(config)
    sd = split(lattice, subspace)
    slices = slice_sum(sd, domain, point_budget(config))
    report = {"slice_sum": slices[0], "slice_stderr": slices[1], "leading": {}}
    for eps in parse_eps_list(require(config, "eps")):
        value = leading_term(sd, domain, eps, slices)
        report["leading"][eps_label(eps)] = value
        print(f"eps={eps_label(eps)}: leading term {value:.12g}")
    write_json(output_dir(config) / "leading.json", report)
    return EXIT_PASS


def _write_scan(config: Dict[str, Any], rows: List[ScanRow], fit, title: str):
    out = output_dir(config)
    write_csv(out / "scan.csv", SCAN_COLUMNS, [asdict(row) for row in rows])
    write_json(out / "fit.json", fit.to_json())
    if config["output"].get("svg", True):
        points = [(1 / row.epsilon, row.magnitude) for row in rows]
        # |R| = C eps^beta is a line of slope -beta against log(1/eps).
        reference = (-fit.beta, math.log10(fit.C) if fit.C > 0 else 0.0)
        write_svg(out / "scan.svg", loglog_svg(points, title=title, reference=reference))


def cmd_scan(config: Dict[str, Any]) -> int:
    lattice, subspace, domain = build_problem(config)
    sd = split(lattice, subspace)
    regime = build_regime(config, sd)
    predicted_exponent(regime)
    fit_cfg = config["fit"]
    scan = scan_and_fit(
        sd, domain, parse_eps_list(require(config, "eps")), regime,
        tol=config["counting"]["tol"], budget=point_budget(config), workers=config["counting"]["workers"],
        method=config.get("method", METHOD_SLICED), slack=fit_cfg["slack"],
        min_magnitude=fit_cfg["min_magnitude"], min_rows=fit_cfg["min_rows"],
    )
    _write_scan(config, scan.rows, scan.fit, title=f"{regime.name}: {domain.describe()}")
    print(json.dumps(scan.fit.to_json(), indent=2, default=str))
    return EXIT_PASS if scan.fit.verdict else EXIT_VERDICT_FAIL


def cmd_fit(config: Dict[str, Any], csv_path: str) -> int:
    try:
        rows = [
            ScanRow(epsilon=float(r["epsilon"]), count_lo=int(r["count_lo"]), count_hi=int(r["count_hi"]),
                    leading=float(r["leading"]), rem_lo=float(r["rem_lo"]), rem_hi=float(r["rem_hi"]),
                    method=r.get("method") or METHOD_SLICED)
            for r in read_csv(Path(csv_path))
        ]
    except FileNotFoundError:
        raise ConfigError(f"Scan CSV not found: {csv_path}", field="--csv")
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"Malformed scan CSV {csv_path}: {e}", field="--csv")
    data = require(config, "regime")
    data = {"name": data} if isinstance(data, str) else data
    dims = require(config, "dims")
    n, p, r = (parse_int(_dim(dims, key), f"dims.{key}") for key in ("n", "p", "r"))
    regime = RegimeClass(name=data.get("name", ""), n=n, p=p, q=n - p, r=r,
                         ell=data.get("ell"), s=data.get("s"), t=data.get("t"),
                         delta=parse_float(data.get("delta", config["fit"]["delta"]), "regime.delta"))
    fit_cfg = config["fit"]
    fit = fit_rows(rows, predicted_exponent(regime), slack=fit_cfg["slack"],
                   min_magnitude=fit_cfg["min_magnitude"], min_rows=fit_cfg["min_rows"])
    write_json(output_dir(config) / "fit.json", fit.to_json())
    print(json.dumps(fit.to_json(), indent=2, default=str))
    return EXIT_PASS if fit.verdict else EXIT_VERDICT_FAIL


def cmd_spectrum(config: Dict[str, Any], dump: bool) -> int:
    lattice = embedded(parse_lattice(require(config, "lattice")))
    subspace = parse_subspace(config.get("subspace", {"rows": []}), lattice.dim)
    metric = parse_matrix(config["metric"], "metric") if "metric" in config else None
    torus = FlatTorus(lattice, metric, subspace)
    spec = require(config, "spectrum")
    scaled = bool(spec.get("scaled", False))
    lambdas = [parse_scalar(v, "spectrum.lambda") for v in require(spec, "lambda")]
    rows = []
    for lam in lambdas:
        for eps in parse_eps_list(require(spec, "eps"), "spectrum.eps"):
            result = counting_function(torus, lam, eps, scaled=scaled, tol=config["counting"]["tol"],
                                       budget=point_budget(config), workers=config["counting"]["workers"])
            lt = leading_term_spectral(torus, lam, eps, scaled=scaled)
            lo, hi = result.interval
            rows.append({"lambda": to_float(lam), "epsilon": to_float(eps), "N_lo": lo, "N_hi": hi,
                         "leading": lt, "rem_lo": lo - lt, "rem_hi": hi - lt})
            print(f"lambda={to_float(lam):.6g} eps={eps_label(eps)}: N in [{lo}, {hi}], leading {lt:.6f}")
            if dump:
                values = eigenvalues_below(torus, lam, eps, scaled=scaled)
                write_json(output_dir(config) / f"eigenvalues_{len(rows)}.json",
                           {"lambda": to_float(lam), "epsilon": to_float(eps),
                            "eigenvalues": [{"value": v, "k": list(k)} for v, k in values]})
    write_csv(output_dir(config) / "spectrum.csv", SPECTRUM_COLUMNS, rows)
    return EXIT_PASS


def cmd_pdos(config: Dict[str, Any]) -> int:
    spec = require(config, "pdos")
    center = [parse_float(x, f"pdos.center[{i}]") for i, x in enumerate(require(spec, "center"))]
    d, k = parse_int(require(spec, "d"), "pdos.d"), parse_int(require(spec, "k"), "pdos.k")
    rows = []
    for i, raw in enumerate(require(spec, "rho")):
        rho = parse_float(raw, f"pdos.rho[{i}]")
        value = partial_density_of_states(rho, center, d, k)
        rows.append({"rho": rho, "value": value, "remainder": pdos_remainder(rho, center, d, k)})
        print(f"rho={rho:.6g}: S={value:.12g}")
    write_csv(output_dir(config) / "pdos.csv", ["rho", "value", "remainder"], rows)
    return EXIT_PASS


def cmd_lattice_info(config: Dict[str, Any]) -> int:
    lattice = embedded(parse_lattice(require(config, "lattice")))
    subspace = parse_subspace(config.get("subspace", {"rows": []}), lattice.dim)
    sd = split(lattice, subspace)
    report = sd.summary()
    report["gamma_f_generators"] = lattice_json(sd.gamma_f)["basis"]
    report["gamma_perp_basis"] = lattice_json(sd.gamma_perp)["basis"]
    if sd.gamma_perp.rank:
        certificate = verify_trivial_intersection(
            sd, parse_float(config.get("search_radius", 10), "search_radius"), point_budget(config))
        report["trivial_intersection"] = {
            "radius": certificate.radius, "points_checked": certificate.points_checked,
            "min_ratio": certificate.min_ratio, "intersection_dim": certificate.intersection_dim,
            "passed": certificate.passed,
        }
    print(json.dumps(report, indent=2, default=str))
    write_json(output_dir(config) / "lattice_info.json", report)
    return EXIT_PASS


def cmd_field(config: Dict[str, Any]) -> int:
    spec = require(config, "field")
    field = analyze_field(require(spec, "minpoly"))
    generators = spec.get("generators") or [[0] * i + [1] for i in range(field.degree)]
    module = canonical_embedding(field, parse_matrix(generators, "field.generators"))
    s, t = field.signature
    report = {
        "minpoly": list(field.minpoly), "s": s, "t": t,
        "roots": [str(field.root_value(i)) for i in range(s + t)],
        "lattice": lattice_json(module.embedded),
        "generator_norms": [str(field_norm(g)) for g in module.generators],
        "denominator": module.denominator,
    }
    print(json.dumps(report, indent=2, default=str))
    write_json(output_dir(config) / "field.json", report)
    return EXIT_PASS


def cmd_good_position(config: Dict[str, Any]) -> int:
    lattice = parse_lattice(require(config, "lattice"))
    spec = config.get("good_position", {})
    frame = parse_matrix(spec["frame"], "good_position.frame") if "frame" in spec else None
    try:
        verdict = good_position_check(lattice, frame=frame, mode=spec.get("mode", "certified"),
                                      radius=spec.get("radius"), budget=point_budget(config))
    except ValueError as e:
        raise ConfigError(str(e), field="good_position")
    report = {"status": verdict.status, "mode": verdict.mode, "bound": verdict.bound,
              "radius": verdict.radius, "witness": verdict.witness,
              "points_checked": verdict.points_checked, "details": verdict.details}
    print(json.dumps(report, indent=2, default=str))
    write_json(output_dir(config) / "good_position.json", report)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Lattice points in anisotropically expanding domains")
    parser.add_argument("command", choices=[
        "count", "leading", "scan", "fit", "spectrum", "pdos", "lattice-info", "field", "good-position",
    ])
    parser.add_argument("--config", help="experiment JSON file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, help="worker threads")
    parser.add_argument("--tol", type=float, help="boundary tolerance")
    parser.add_argument("--seed", help="QMC seed (e.g. 0x5EED)")
    parser.add_argument("--csv", help="scan CSV to re-fit (fit command)")
    parser.add_argument("--dump", action="store_true", help="write eigenvalues below each lambda (spectrum command)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        config = apply_flags(load_config(args.config), args)
        if args.command == "count":
            code = cmd_count(config)
        elif args.command == "leading":
            code = cmd_leading(config)
        elif args.command == "scan":
            code = cmd_scan(config)
        elif args.command == "fit":
            if not args.csv:
                raise ConfigError("fit needs --csv", field="--csv")
            code = cmd_fit(config, args.csv)
        elif args.command == "spectrum":
            code = cmd_spectrum(config, args.dump)
        elif args.command == "pdos":
            code = cmd_pdos(config)
        elif args.command == "lattice-info":
            code = cmd_lattice_info(config)
        elif args.command == "field":
            code = cmd_field(config)
        else:
            code = cmd_good_position(config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_ERROR
    except GeometryError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_ERROR
    logger.info(f"{args.command} finished in {time.perf_counter() - started:.2f}s with exit code {code}")
    return code


if __name__ == '__main__':
    sys.exit(main())
