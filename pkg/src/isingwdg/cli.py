"""Command-line surface: JSON-configured runs with deterministic,
machine-readable outputs.

Every command validates its configuration against the published JSON schema
before any computation, writes no partial outputs on validation failure, and
stamps each output with the resolved configuration and a version string.
Floating-point values are printed with 17 significant digits so files
round-trip exactly. Exit codes: 0 success, 1 config error, 2 resource cap,
3 acceptance failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import jsonschema

from . import __version__
from .errors import ConfigError, ResourceCapError
from .gibbs_exact import (BoundaryCondition, ExactGibbs, IsingParams)
from .lattice import Box
from .clt_harness import (ChainSettings, CltExperiment, GlobalPattern,
                          Magnetization, check_criterion_conditions,
                          global_variance_scaling, run_clt_experiment,
                          variance_series_estimate)
from .cumulants import (estimated_cumulant_table, exact_cumulant_table,
                        format_multiset, multisets_up_to)
from .expansions import verify_representations
from .patterns import count_global, count_local, parse_pattern
from .sampler import ChainSpec, SampleBatch, UpdateKind, read_spool, run_chain, \
    write_spool
from .treelen import check_two_factor
from .wdg import (IsingWdgSpec, check_wdg_inequality, fit_epsilon,
                  ising_spin_graph, pair_decay_data)

_SITE = {"type": "array", "items": {"type": "integer"}, "minItems": 1}
_BOX = {
    "type": "object",
    "oneOf": [
        {"required": ["n"]},
        {"required": ["lo", "hi"]},
    ],
    "properties": {
        "n": {"type": "integer", "minimum": 0},
        "lo": _SITE,
        "hi": _SITE,
    },
    "additionalProperties": False,
}
_CHAIN = {
    "type": "object",
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "burn_in": {"type": "integer", "minimum": 0},
        "thinning": {"type": "integer", "minimum": 1},
        "n_samples": {"type": "integer", "minimum": 1},
        "update": {"enum": ["single-flip", "cluster-zero-field"]},
    },
    "additionalProperties": False,
}
_PATTERN = {
    "type": "object",
    "properties": {
        "local": {
            "type": "object",
            "required": ["shape", "signs"],
            "properties": {"shape": {"type": "array", "items": _SITE},
                           "signs": {"type": "string"}},
            "additionalProperties": False,
        },
        "global": {
            "type": "object",
            "required": ["m", "orders", "signs"],
            "properties": {
                "m": {"type": "integer", "minimum": 1},
                "orders": {"type": "array",
                           "items": {"type": "array",
                                     "items": {"type": "integer"}}},
                "signs": {"type": "string"},
            },
            "additionalProperties": False,
        },
    },
    "minProperties": 1,
    "maxProperties": 1,
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["dimension", "params"],
    "properties": {
        "dimension": {"type": "integer", "minimum": 1},
        "params": {
            "type": "object",
            "required": ["beta", "h", "bc"],
            "properties": {
                "beta": {"type": "number", "minimum": 0},
                "h": {"type": "number"},
                "bc": {"enum": ["free", "plus", "minus"]},
            },
            "additionalProperties": False,
        },
        "exact": {
            "type": "object",
            "required": ["box"],
            "properties": {
                "box": _BOX,
                "expectations": {"type": "array",
                                 "items": {"type": "array", "items": _SITE}},
                "cumulants": {
                    "type": "object",
                    "required": ["sites", "r_max"],
                    "properties": {
                        "sites": {"type": "array", "items": _SITE},
                        "r_max": {"type": "integer", "minimum": 1, "maximum": 6},
                        "include_duplicates": {"type": "boolean"},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "sample": {
            "type": "object",
            "required": ["box", "chain"],
            "properties": {"box": _BOX, "chain": _CHAIN,
                           "spool": {"type": "string"}},
            "additionalProperties": False,
        },
        "cumulants": {
            "type": "object",
            "required": ["box", "chain", "sites", "r_max"],
            "properties": {
                "box": _BOX,
                "chain": _CHAIN,
                "sites": {"type": "array", "items": _SITE},
                "r_max": {"type": "integer", "minimum": 1, "maximum": 4},
                "include_duplicates": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "treelen": {
            "type": "object",
            "required": ["terminals"],
            "properties": {"terminals": {"type": "array", "items": _SITE,
                                         "minItems": 1}},
            "additionalProperties": False,
        },
        "wdg-check": {
            "type": "object",
            "required": ["box", "r_max"],
            "properties": {
                "box": _BOX,
                "r_max": {"type": "integer", "minimum": 1, "maximum": 6},
                "epsilon": {"type": "number", "exclusiveMinimum": 0,
                            "exclusiveMaximum": 1},
                "include_duplicates": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "pattern-count": {
            "type": "object",
            "required": ["pattern", "box"],
            "properties": {
                "pattern": _PATTERN,
                "box": _BOX,
                "chain": _CHAIN,
                "spool": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "verify-expansions": {
            "type": "object",
            "properties": {
                "boxes": {"type": "array", "items": _BOX, "minItems": 1},
                "betas": {"type": "array", "items": {"type": "number"},
                          "minItems": 1},
                "hs": {"type": "array", "items": {"type": "number"},
                       "minItems": 1},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "self_test_perturbation": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "clt": {
            "type": "object",
            "required": ["pattern", "box_sizes", "replicas"],
            "properties": {
                "pattern": {"oneOf": [{"const": "magnetization"}, _PATTERN]},
                "box_sizes": {"type": "array",
                              "items": {"type": "integer", "minimum": 1},
                              "minItems": 1},
                "replicas": {"type": "integer", "minimum": 2},
                "base_seed": {"type": "integer", "minimum": 0},
                "chain": _CHAIN,
                "variance_radius": {"type": "integer", "minimum": 1},
                "criterion_s": {"type": "integer", "minimum": 3},
            },
            "additionalProperties": False,
        },
        "variance-scaling": {
            "type": "object",
            "required": ["pattern", "sizes", "replicas"],
            "properties": {
                "pattern": _PATTERN,
                "sizes": {"type": "array",
                          "items": {"type": "integer", "minimum": 1},
                          "minItems": 3},
                "replicas": {"type": "integer", "minimum": 2},
                "base_seed": {"type": "integer", "minimum": 0},
                "chain": _CHAIN,
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

COMMANDS = ("exact", "sample", "cumulants", "treelen", "wdg-check",
            "pattern-count", "verify-expansions", "clt", "variance-scaling")


def get_config_schema() -> dict:
    return CONFIG_SCHEMA


# ---------------------------------------------------------------------------
# deterministic serialization (floats at 17 significant digits)

def _render(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {_render(v, indent + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_render(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return "NaN"
        if math.isinf(obj):
            return "Infinity" if obj > 0 else "-Infinity"
        return format(obj, ".17g")
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(obj)


def render_json(payload: dict) -> str:
    return _render(payload) + "\n"


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: Path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")


def version_string() -> str:
    base = f"isingwdg {__version__}"
    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent, capture_output=True,
            text=True, timeout=5)
        if described.returncode == 0 and described.stdout.strip():
            return f"{base} ({described.stdout.strip()})"
    except OSError:
        pass
    return base


def _payload(command: str, config: dict, results) -> dict:
    return {"tool": "isingwdg", "version": version_string(),
            "command": command, "config": config, "results": results}


# ---------------------------------------------------------------------------
# config helpers

def _parse_box(obj: dict, dimension: int) -> Box:
    if "n" in obj:
        return Box.centered(int(obj["n"]), dimension)
    return Box(tuple(obj["lo"]), tuple(obj["hi"]))


def _parse_params(config: dict) -> IsingParams:
    p = config["params"]
    return IsingParams(config["dimension"], float(p["beta"]), float(p["h"]),
                       BoundaryCondition.parse(p["bc"]))


def _parse_chain(block: dict, params: IsingParams, box: Box,
                 seed_override) -> ChainSpec:
    seed = seed_override if seed_override is not None else block.get("seed", 0)
    return ChainSpec(
        params, box, seed=seed,
        burn_in=block.get("burn_in", 1000),
        thinning=block.get("thinning", 10),
        n_samples=block.get("n_samples", 1),
        update=UpdateKind.parse(block.get("update", "single-flip")))


def _chain_settings(block: dict) -> ChainSettings:
    return ChainSettings(
        burn_in=block.get("burn_in", 1000),
        thinning=block.get("thinning", 10),
        update=UpdateKind.parse(block.get("update", "single-flip")))


def _require_block(config: dict, key: str) -> dict:
    if key not in config:
        raise ConfigError(f"config is missing the {key!r} block")
    return config[key]


# ---------------------------------------------------------------------------
# commands

def cmd_exact(config, out_dir: Path, seed, workers) -> int:
    block = _require_block(config, "exact")
    params = _parse_params(config)
    box = _parse_box(block["box"], config["dimension"])
    system = ExactGibbs(box, params)
    results = {"box": {"lo": list(box.lo), "hi": list(box.hi)},
               "log_z": system.log_z, "z": system.z}
    expectations = {}
    for sites in block.get("expectations", []):
        key = format_multiset(tuple(tuple(s) for s in sites))
        expectations[key] = system.spin_product_mean([tuple(s) for s in sites])
    results["expectations"] = expectations
    cum = block.get("cumulants")
    if cum is not None:
        multisets = multisets_up_to([tuple(s) for s in cum["sites"]],
                                    cum["r_max"],
                                    cum.get("include_duplicates", True))
        table = exact_cumulant_table(system, multisets)
        table.write_csv(out_dir / "cumulants.csv")
        results["cumulant_table"] = "cumulants.csv"
        results["cumulant_entries"] = len(table)
    (out_dir / "exact.json").write_text(
        render_json(_payload("exact", config, results)))
    return 0


def cmd_sample(config, out_dir: Path, seed, workers) -> int:
    block = _require_block(config, "sample")
    params = _parse_params(config)
    box = _parse_box(block["box"], config["dimension"])
    spec = _parse_chain(block["chain"], params, box, seed)
    batch = run_chain(spec)
    spool_name = block.get("spool", "samples.iwdg")
    write_spool(batch, out_dir / spool_name)
    mag = batch.magnetization()
    results = {"spool": spool_name, "n_samples": batch.n_samples,
               "seed": spec.seed,
               "mean_magnetization": float(mag.mean()),
               "mean_abs_magnetization": float(abs(mag).mean())}
    (out_dir / "sample.json").write_text(
        render_json(_payload("sample", config, results)))
    return 0


def cmd_cumulants(config, out_dir: Path, seed, workers) -> int:
    block = _require_block(config, "cumulants")
    params = _parse_params(config)
    box = _parse_box(block["box"], config["dimension"])
    spec = _parse_chain(block["chain"], params, box, seed)
    batch = run_chain(spec)
    multisets = multisets_up_to([tuple(s) for s in block["sites"]],
                                block["r_max"],
                                block.get("include_duplicates", True))
    table = estimated_cumulant_table(batch, multisets)
    table.write_csv(out_dir / "cumulants_estimated.csv")
    results = {"table": "cumulants_estimated.csv", "entries": len(table),
               "n_samples": batch.n_samples, "seed": spec.seed}
    (out_dir / "cumulants.json").write_text(
        render_json(_payload("cumulants", config, results)))
    return 0


def cmd_treelen(config, out_dir: Path, seed, workers) -> int:
    block = _require_block(config, "treelen")
    result = check_two_factor([tuple(s) for s in block["terminals"]])
    results = {"lT": result.steiner, "lT_prime": result.mst, "ok": result.ok}
    (out_dir / "treelen.json").write_text(
        render_json(_payload("treelen", config, results)))
    return 0


def cmd_wdg_check(config, out_dir: Path, seed, workers) -> int:
    block = _require_block(config, "wdg-check")
    params = _parse_params(config)
    box = _parse_box(block["box"], config["dimension"])
    system = ExactGibbs(box, params)
    epsilon = block.get("epsilon")
    if epsilon is None:
        epsilon = fit_epsilon(pair_decay_data(system))
    spec = IsingWdgSpec(float(epsilon), config["dimension"])
    multisets = multisets_up_to(box.sites(), block["r_max"],
                                block.get("include_duplicates", True))
    table = exact_cumulant_table(system, multisets)
    report = check_wdg_inequality(table, ising_spin_graph(spec),
                                  block["r_max"], epsilon=spec.epsilon)
    results = report.to_jsonable()
    finite = all(math.isfinite(b.c_r) for b in report.per_order.values())
    results["all_finite"] = finite
    (out_dir / "wdg_check.json").write_text(
        render_json(_payload("wdg-check", config, results)))
    return 0 if finite else 3


def cmd_pattern_count(config, out_dir: Path, seed, workers) -> int:
    block = _require_block(config, "pattern-count")
    params = _parse_params(config)
    box = _parse_box(block["box"], config["dimension"])
    pattern = parse_pattern(block["pattern"])
    if "spool" in block:
        batch = read_spool(Path(block["spool"]))
        if batch.box != box:
            raise ConfigError("spool box does not match the configured box")
    elif "chain" in block:
        batch = run_chain(_parse_chain(block["chain"], params, box, seed))
    else:
        raise ConfigError("pattern-count needs a 'chain' or 'spool' source")
    counts = []
    for cfg in batch.configurations():
        if hasattr(pattern, "shape"):
            counts.append(count_local(cfg, pattern).value)
        else:
            counts.append(count_global(cfg, pattern).value)
    write_csv(out_dir / "pattern_counts.csv", ("sample", "count"),
              list(enumerate(counts)))
    arr = [float(c) for c in counts]
    mean = sum(arr) / len(arr)
    results = {"counts": "pattern_counts.csv", "n_samples": len(arr),
               "mean_count": mean}
    (out_dir / "pattern_count.json").write_text(
        render_json(_payload("pattern-count", config, results)))
    return 0


def cmd_verify_expansions(config, out_dir: Path, seed, workers) -> int:
    block = config.get("verify-expansions", {})
    dimension = config["dimension"]
    boxes = [_parse_box(b, dimension) for b in block.get(
        "boxes", [{"lo": [0] * dimension, "hi": [0] * dimension},
                  {"lo": [0] * dimension, "hi": [1] * dimension},
                  {"n": 1}])]
    betas = block.get("betas", [0.0, 0.2, 0.5, 1.2])
    hs = block.get("hs", [0.0, 0.5, 1.5])
    tolerance = block.get("tolerance", 1e-8)
    perturbation = block.get("self_test_perturbation", 0.0)
    checks = verify_representations(boxes, betas, hs)
    rows = []
    n_failed = 0
    for check in checks:
        lhs = check.lhs * (1.0 + perturbation)
        scale = max(abs(lhs), abs(check.rhs), 1e-300)
        rel_err = abs(lhs - check.rhs) / scale
        ok = rel_err <= tolerance
        n_failed += 0 if ok else 1
        rows.append({"name": check.name, "lhs": lhs, "rhs": check.rhs,
                     "rel_err": rel_err, "ok": ok, "detail": check.detail})
    results = {"tolerance": tolerance, "n_checks": len(rows),
               "n_failed": n_failed, "checks": rows}
    (out_dir / "expansions_report.json").write_text(
        render_json(_payload("verify-expansions", config, results)))
    return 0 if n_failed == 0 else 3


def _parse_clt_pattern(obj):
    if obj == "magnetization":
        return Magnetization()
    return parse_pattern(obj)


def cmd_clt(config, out_dir: Path, seed, workers) -> int:
    block = _require_block(config, "clt")
    params = _parse_params(config)
    pattern = _parse_clt_pattern(block["pattern"])
    base_seed = seed if seed is not None else block.get("base_seed", 0)
    experiment = CltExperiment(
        params, pattern, tuple(block["box_sizes"]), block["replicas"],
        base_seed=base_seed, chain=_chain_settings(block.get("chain", {})),
        workers=workers)
    report = run_clt_experiment(experiment)
    write_csv(out_dir / "clt_samples.csv", ("n", "replica", "statistic"),
              report.csv_rows())
    results = report.to_jsonable()
    radius = block.get("variance_radius")
    if radius is not None and not isinstance(pattern, GlobalPattern):
        series = variance_series_estimate(params, pattern, radius,
                                          seed=base_seed + 10 ** 6)
        results["variance_series"] = series.to_jsonable()
    results["samples"] = "clt_samples.csv"
    (out_dir / "clt_report.json").write_text(
        render_json(_payload("clt", config, results)))
    return 0


def cmd_variance_scaling(config, out_dir: Path, seed, workers) -> int:
    block = _require_block(config, "variance-scaling")
    params = _parse_params(config)
    pattern = parse_pattern(block["pattern"])
    base_seed = seed if seed is not None else block.get("base_seed", 0)
    fit = global_variance_scaling(
        params, pattern, block["sizes"], block["replicas"],
        base_seed=base_seed, chain=_chain_settings(block.get("chain", {})),
        workers=workers)
    (out_dir / "variance_scaling.json").write_text(
        render_json(_payload("variance-scaling", config, fit.to_jsonable())))
    return 0


_HANDLERS = {
    "exact": cmd_exact,
    "sample": cmd_sample,
    "cumulants": cmd_cumulants,
    "treelen": cmd_treelen,
    "wdg-check": cmd_wdg_check,
    "pattern-count": cmd_pattern_count,
    "verify-expansions": cmd_verify_expansions,
    "clt": cmd_clt,
    "variance-scaling": cmd_variance_scaling,
}


def _resolve_workers(flag) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("IWDG_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"IWDG_WORKERS is not an integer: {env!r}")
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="isingwdg",
        description="Ising cumulant/CLT verification toolbox")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--seed", type=int, default=None,
                        help="override every configured seed")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker threads (fallback: IWDG_WORKERS)")
    parser.add_argument("--out", default=".", help="output directory")
    args = parser.parse_args(argv)

    try:
        config = json.loads(Path(args.config).read_text())
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc}",
              file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"config error: invalid JSON: {exc}", file=sys.stderr)
        return 1

    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        print(f"config error at {exc.json_path}: {exc.message}",
              file=sys.stderr)
        return 1

    try:
        workers = _resolve_workers(args.workers)
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _HANDLERS[args.command](config, out_dir, args.seed, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ResourceCapError as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
