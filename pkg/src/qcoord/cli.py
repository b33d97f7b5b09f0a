"""Batch front end: run experiment configs, write CSV artifacts + manifest.

Usage:  qcoord --config experiment.json --out results/ [--seed N]
        [--threads N] [--quiet]

Exit codes: 0 success, 2 config parse error, 3 validation failure,
4 infeasible optimization, 5 resource cap exceeded, 1 unexpected error.

Artifacts are written atomically (temp file + rename).  CSV bodies are
byte-stable across reruns of the same config; the manifest carries the
config hash, library version, seeds, tolerances and wall time.  Every
CSV row repeats the config hash for provenance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .classical import PmfError
from .config import (
    ConfigError,
    apply_sweep_value,
    build_ensemble,
    build_extension,
    config_hash,
    load_config,
    resolve_family,
)
from .coordination import (
    CoordinationError,
    cascade_rate_point,
    isolated_rate,
    two_node_rate,
    validate_extension,
)
from .optimizer import optimize
from .protocol import (
    MemoryCapError,
    ProtocolError,
    converse_check,
    derandomize,
    simulate_cascade,
    simulate_two_node,
)
from .quantum import QuantumError

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_INFEASIBLE = 4
EXIT_RESOURCE = 5


class ValidationFailure(RuntimeError):
    pass


class InfeasibleFailure(RuntimeError):
    pass


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv_atomic(path: str, header: list, rows: list) -> None:
    body = ",".join(header) + "\n"
    for row in rows:
        body += ",".join(_fmt(v) for v in row) + "\n"
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path: str, payload: dict) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _built(cfg: dict):
    resolved = resolve_family(cfg)
    ens = build_ensemble(resolved)
    ext = build_extension(resolved, ens)
    report = validate_extension(ext, ens)
    if not report.passed:
        raise ValidationFailure(
            "extension fails validation against the ensemble:\n"
            + str(report))
    return ens, ext


def _rate_rows(cfg: dict, chash: str) -> list:
    ens, ext = _built(cfg)
    if ext.kind == "two-node":
        value = two_node_rate(ext)
        return [[chash, ext.kind, repr(value), "", ""]]
    if ext.kind == "cascade":
        pt = cascade_rate_point(ext)
        return [[chash, ext.kind, "", repr(pt.r12), repr(pt.r23)]]
    value = isolated_rate(ext)
    return [[chash, ext.kind, repr(value), "", ""]]


def cmd_rate(cfg, out_dir, opts) -> list:
    rows = _rate_rows(cfg, config_hash(cfg))
    path = os.path.join(out_dir, "rate.csv")
    write_csv_atomic(path, ["config_hash", "kind", "rate", "r12", "r23"],
                     rows)
    if not opts.quiet:
        row = rows[0]
        if row[2]:
            print(f"rate: {float(row[2]):.6f} bits/symbol")
        else:
            print(f"rate region corner: ({float(row[3]):.6f}, "
                  f"{float(row[4]):.6f}) bits/symbol")
    return [path]


def cmd_optimize(cfg, out_dir, opts) -> list:
    resolved = resolve_family(cfg)
    ens = build_ensemble(resolved)
    block = cfg.get("optimize", {})
    kind = block.get("kind", "two-node")
    res = optimize(ens, kind=kind,
                   max_merge_order=int(block.get("max_merge_order", 3)),
                   lam=float(block.get("lambda", 0.0)),
                   max_iters=int(block.get("max_iters", 10_000)))
    if not res.feasible:
        raise InfeasibleFailure(res.message)
    chash = config_hash(cfg)
    rows = [[chash, kind, repr(res.value), res.iterations,
             repr(res.max_residual),
             repr(res.rate_point.r12) if res.rate_point else "",
             repr(res.rate_point.r23) if res.rate_point else ""]]
    path = os.path.join(out_dir, "optimize.csv")
    write_csv_atomic(path, ["config_hash", "kind", "value", "iterations",
                            "max_residual", "r12", "r23"], rows)
    return [path]


def _sim_block(cfg: dict, opts) -> dict:
    block = dict(cfg.get("simulate", {}))
    for key in ("derandomize", "converse"):
        if cfg.get("command") == key:
            block.update(cfg.get(key, {}))
    if opts.seed is not None:
        block["seed"] = opts.seed
    block.setdefault("seed", 0)
    block.setdefault("delta", 0.02)
    block.setdefault("trials", 100)
    block.setdefault("engine", "auto")
    return block


def _run_cells(cfg, opts):
    ens, ext = _built(cfg)
    block = _sim_block(cfg, opts)
    n_grid = block.get("n_grid", [200])
    rates = block.get("rates", [0.5])
    rates23 = block.get("rates23")
    cells = []
    for n in n_grid:
        for idx, rate in enumerate(rates):
            kwargs = dict(
                n=int(n), rate=float(rate), trials=int(block["trials"]),
                seed=int(block["seed"]), delta=float(block["delta"]),
                engine=block["engine"], threads=opts.threads)
            if block.get("gamma_coeff") is not None:
                kwargs["gamma_coeff"] = float(block["gamma_coeff"])
            if ext.kind == "two-node":
                if block.get("codeword_rate") is not None:
                    kwargs["codeword_rate"] = float(block["codeword_rate"])
                traces = simulate_two_node(ens, ext, **kwargs)
                r23 = None
            else:
                r23 = float(rates23[idx]) if rates23 else 0.0
                kwargs.pop("rate")
                for key in ("codeword_rate_y", "codeword_rate_z"):
                    if block.get(key) is not None:
                        kwargs[key] = float(block[key])
                traces = simulate_cascade(
                    ens, ext, rate12=float(rate), rate23=r23, **kwargs)
            cells.append((int(n), float(rate), r23, traces))
    return ens, ext, block, cells


def cmd_simulate(cfg, out_dir, opts) -> list:
    chash = config_hash(cfg)
    ens, ext, block, cells = _run_cells(cfg, opts)
    rows, summary = [], []
    for n, rate, r23, traces in cells:
        dists = [t.distance_to_target for t in traces]
        for t in traces:
            rows.append([
                chash, n, rate, r23, t.seed, t.trial, t.engine,
                repr(t.distance_to_target), repr(t.distance_to_tau),
                t.encoder_fallback, t.decoder_fallback,
                t.index_match,
            ])
        summary.append([
            chash, n, rate, r23, len(traces),
            repr(float(np.median(dists))),
            repr(float(np.percentile(dists, 25))),
            repr(float(np.percentile(dists, 75))),
            repr(float(np.mean(dists))),
            repr(float(np.mean([t.encoder_fallback for t in traces]))),
            repr(float(np.mean([t.decoder_fallback for t in traces]))),
        ])
    p1 = os.path.join(out_dir, "simulate.csv")
    write_csv_atomic(p1, ["config_hash", "n", "rate", "rate23", "seed",
                          "trial", "engine", "distance_to_target",
                          "distance_to_tau", "encoder_fallback",
                          "decoder_fallback", "bob_charlie_index_match"],
                     rows)
    p2 = os.path.join(out_dir, "simulate_summary.csv")
    write_csv_atomic(p2, ["config_hash", "n", "rate", "rate23", "trials",
                          "median", "q25", "q75", "mean",
                          "encoder_fallback_rate", "decoder_fallback_rate"],
                     summary)
    return [p1, p2]


def cmd_derandomize(cfg, out_dir, opts) -> list:
    chash = config_hash(cfg)
    ens, ext = _built(cfg)
    block = _sim_block(cfg, opts)
    n = int(block.get("n_grid", [200])[0])
    rate = float(block.get("rates", [0.5])[0])
    kwargs = {}
    if block.get("codeword_rate") is not None:
        kwargs["codeword_rate"] = float(block["codeword_rate"])
    report = derandomize(
        ens, ext, n=n, rate=rate, trials=int(block["trials"]),
        num_seeds=int(block.get("num_seeds", 10)),
        epsilon=float(block.get("epsilon", 0.1)),
        seed=int(block["seed"]), delta=float(block["delta"]),
        engine=block["engine"], **kwargs)
    rows = [[chash, n, rate, s, repr(float(d)),
             1 if i == report.best_index else 0]
            for i, (s, d) in enumerate(zip(report.seeds, report.distances))]
    p1 = os.path.join(out_dir, "derandomize.csv")
    write_csv_atomic(p1, ["config_hash", "n", "rate", "codebook_seed",
                          "mean_distance", "selected"], rows)
    p2 = os.path.join(out_dir, "derandomize_summary.csv")
    write_csv_atomic(p2, ["config_hash", "best_seed", "best_distance",
                          "mean_distance", "q25", "q50", "q75",
                          "epsilon", "meets_epsilon"],
                     [[chash, report.best_seed, repr(report.best_distance),
                       repr(report.mean_distance),
                       repr(report.quantiles[25]),
                       repr(report.quantiles[50]),
                       repr(report.quantiles[75]),
                       repr(report.epsilon), report.meets_epsilon]])
    return [p1, p2]


def cmd_converse(cfg, out_dir, opts) -> list:
    chash = config_hash(cfg)
    ens, ext, block, cells = _run_cells(cfg, opts)
    slack = float(cfg.get("converse", {}).get("slack", 0.02))
    rows = []
    for n, rate, r23, traces in cells:
        report = converse_check(traces, ens, ext, rate=rate, rate23=r23,
                                slack=slack)
        for iq in report.inequalities:
            rows.append([chash, n, rate, r23, iq.name,
                         repr(iq.information_bits), repr(iq.rate_bound),
                         repr(report.alpha), repr(slack), repr(iq.margin),
                         iq.passed])
    path = os.path.join(out_dir, "converse.csv")
    write_csv_atomic(path, ["config_hash", "n", "rate", "rate23",
                            "inequality", "information_bits", "rate_bound",
                            "alpha_n", "slack", "margin", "passed"], rows)
    return [path]


def cmd_sweep(cfg, out_dir, opts) -> list:
    block = cfg.get("sweep")
    if not block:
        raise ConfigError("sweep command needs a sweep block")
    path_keys = block["path"]
    values = block["values"]
    inner_cmd = block.get("command", "rate")
    if inner_cmd not in ("rate", "optimize"):
        raise ConfigError("sweep supports the rate and optimize commands")
    chash = config_hash(cfg)
    rows = []
    for value in values:
        sub = apply_sweep_value(cfg, path_keys, value)
        sub["command"] = inner_cmd
        if inner_cmd == "rate":
            ens, ext = _built(sub)
            if ext.kind == "two-node":
                rows.append([chash, repr(float(value)),
                             repr(two_node_rate(ext)), "", ""])
            elif ext.kind == "cascade":
                pt = cascade_rate_point(ext)
                rows.append([chash, repr(float(value)), "",
                             repr(pt.r12), repr(pt.r23)])
            else:
                rows.append([chash, repr(float(value)),
                             repr(isolated_rate(ext)), "", ""])
        else:
            resolved = resolve_family(sub)
            ens = build_ensemble(resolved)
            ob = sub.get("optimize", {})
            res = optimize(ens, kind=ob.get("kind", "two-node"),
                           max_merge_order=int(ob.get("max_merge_order", 3)),
                           lam=float(ob.get("lambda", 0.0)))
            if not res.feasible:
                raise InfeasibleFailure(res.message)
            rows.append([chash, repr(float(value)), repr(res.value),
                         repr(res.rate_point.r12) if res.rate_point else "",
                         repr(res.rate_point.r23) if res.rate_point else ""])
    path = os.path.join(out_dir, "sweep.csv")
    write_csv_atomic(path, ["config_hash", "value", "rate", "r12", "r23"],
                     rows)
    return [path]


_COMMANDS = {
    "rate": cmd_rate,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "derandomize": cmd_derandomize,
    "converse": cmd_converse,
    "sweep": cmd_sweep,
}


def run(config_path: str, out_dir: str, opts) -> int:
    start = time.time()
    cfg = load_config(config_path)
    os.makedirs(out_dir, exist_ok=True)
    artifacts = _COMMANDS[cfg["command"]](cfg, out_dir, opts)
    manifest = {
        "config_hash": config_hash(cfg),
        "command": cfg["command"],
        "library_version": __version__,
        "seed_override": opts.seed,
        "threads": opts.threads,
        "artifacts": [os.path.basename(a) for a in artifacts],
        "wall_time_s": round(time.time() - start, 3),
        "tolerances": {"validation": 1e-9, "feasibility": 1e-8},
    }
    write_json_atomic(os.path.join(out_dir, "manifest.json"), manifest)
    if not opts.quiet:
        for a in artifacts:
            print(a)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qcoord",
        description="Coordination rates and protocol simulation for "
                    "separable quantum states over classical networks.")
    parser.add_argument("--config", required=True, help="experiment JSON")
    parser.add_argument("--out", default="qcoord-out", help="output dir")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--threads", type=int, default=0,
                        help="worker threads for trials (0 = auto)")
    parser.add_argument("--quiet", action="store_true")
    opts = parser.parse_args(argv)
    if opts.threads == 0:
        opts.threads = min(8, os.cpu_count() or 1)
    try:
        return run(opts.config, opts.out, opts)
    except (ConfigError,) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValidationFailure, CoordinationError, PmfError,
            QuantumError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InfeasibleFailure as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (MemoryCapError,) as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ProtocolError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # pragma: no cover
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
