"""Command-line front end: config-driven band, solve, and verification runs.

Exit codes: 0 success, 2 config error, 3 hypothesis gate failure,
4 solver failure, 5 verification failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .fields import GraphGrid, random_smooth_field, check_gagliardo_nirenberg, save_field_csv
from .graphs import GraphError, PeriodicGraph, build_example, close_periodically
from .nonlinearity import (
    HypothesisError,
    check_hypotheses,
    make_asym_linear,
    make_power,
    theorem_mode_hypotheses,
)
from .operator import Potential, ProblemParameters, assemble
from .spectra import (
    SplitParameters,
    check_norm_inequalities,
    check_window_inequality,
    cutoff_test_functions,
    decompose,
    estimate_band_tol,
    interpolation_identity_check,
    verify_gap,
)
from .variational import (
    ActionContext,
    SolverError,
    linking_diagnostics,
    orbit_distance,
    residual_report,
    solve_bound_state,
    solve_distinct_states,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_SOLVER = 4
EXIT_VERIFY = 5

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dirac-graph run configuration",
    "type": "object",
    "required": ["graph", "problem"],
    "additionalProperties": False,
    "properties": {
        "graph": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {
                    "enum": ["chain", "decorated_chain", "ladder", "strip", "square_lattice"]
                },
                "params": {"type": "object"},
                "path": {"type": "string"},
            },
        },
        "closure_cells": {
            "type": "array",
            "items": {"type": "integer", "minimum": 3},
            "minItems": 1,
            "maxItems": 2,
        },
        "nodes_per_edge": {"type": "integer", "minimum": 2},
        "problem": {
            "type": "object",
            "required": ["a"],
            "additionalProperties": False,
            "properties": {
                "a": {"type": "number", "exclusiveMinimum": 0},
                "omega": {"type": "number"},
                "V": {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["constant", "per_edge", "cosine"]},
                        "value": {"type": "number", "minimum": 0},
                        "values": {"type": "array", "items": {"type": "number", "minimum": 0}},
                        "amp": {"type": "number", "minimum": 0},
                    },
                },
            },
        },
        "nonlinearity": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["power", "asym_linear"]},
                "p": {"type": "number"},
                "b": {
                    "oneOf": [
                        {"type": "number"},
                        {
                            "type": "object",
                            "required": ["per_edge"],
                            "additionalProperties": False,
                            "properties": {
                                "per_edge": {"type": "array", "items": {"type": "number"}}
                            },
                        },
                    ]
                },
            },
        },
        "bands": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "num_thetas": {"type": "integer", "minimum": 1},
                "num_bands": {"type": "integer", "minimum": 1},
                "thetas": {"type": "array"},
            },
        },
        "solve": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "init": {"type": "object"},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "deflate": {"type": "integer", "minimum": 1},
                "distinct_threshold": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "cutoff_cells": {"type": "array", "items": {"type": "integer", "minimum": 4}},
                "num_fields": {"type": "integer", "minimum": 1},
                "theta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "gn_pairs": {"type": "array"},
                "sample_count": {"type": "integer", "minimum": 1},
            },
        },
        "seed": {"type": "integer"},
        "output_dir": {"type": "string"},
    },
}

DEFAULTS = {
    "closure_cells": [12],
    "nodes_per_edge": 16,
    "problem": {"omega": 0.0, "V": {"kind": "constant", "value": 0.0}},
    "bands": {"num_thetas": 24, "num_bands": 8},
    "solve": {"tol": 1e-9, "max_iter": 80, "deflate": 1, "distinct_threshold": 0.1,
              "init": {"kind": "band_edge_mode", "scale": 1.0}},
    "verify": {"cutoff_cells": [16, 32, 64], "num_fields": 100, "theta": 0.5,
               "gn_pairs": [[4.0, 2.0], ["inf", 2.0]], "sample_count": 1000},
    "seed": 0,
    "output_dir": "out",
}


class ConfigError(ValueError):
    pass


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    import jsonschema

    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config schema violation at {where}: {exc.message}") from exc
    cfg = json.loads(json.dumps(DEFAULTS))
    for key, val in doc.items():
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    return cfg


def build_problem(cfg):
    g = cfg["graph"]
    if "path" in g:
        periodic = PeriodicGraph.load_json(g["path"])
    elif "kind" in g:
        periodic = build_example(g["kind"], **g.get("params", {}))
    else:
        raise ConfigError("graph needs either 'kind' or 'path'")
    p = cfg["problem"]
    vspec = p.get("V", {"kind": "constant", "value": 0.0})
    if vspec["kind"] == "constant":
        V = Potential.constant(vspec.get("value", 0.0))
    elif vspec["kind"] == "per_edge":
        vals = vspec["values"]
        if len(vals) != periodic.cell.num_edges:
            raise ConfigError("per_edge potential needs one value per cell edge")
        V = Potential.per_edge(vals)
    else:
        V = Potential.cosine(vspec.get("amp", 0.0))
    try:
        params = ProblemParameters(a=p["a"], omega=p.get("omega", 0.0), V=V)
    except GraphError as exc:
        raise HypothesisError(str(exc)) from exc
    return periodic, params


def build_nonlinearity(cfg, params, cell):
    spec = cfg.get("nonlinearity")
    if spec is None:
        raise ConfigError("this command needs a 'nonlinearity' section")
    if spec["kind"] == "power":
        return make_power(spec["p"])
    b = spec["b"]
    if isinstance(b, dict):
        vals = b["per_edge"]
        if len(vals) != cell.num_edges:
            raise ConfigError("per_edge coefficient needs one value per cell edge")
        b = np.asarray(vals, dtype=float)
    return make_asym_linear(b, params, cell)


def _write_json(path, payload, cfg):
    payload = dict(payload)
    payload["config"] = cfg
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def cmd_bands(cfg, outdir):
    periodic, params = build_problem(cfg)
    nb = cfg["bands"]["num_bands"]
    if "thetas" in cfg["bands"]:
        thetas = cfg["bands"]["thetas"]
    else:
        # include theta = 0 (and pi for even counts): band extrema sit at
        # high-symmetry points and the gap bounds need them sampled
        nt = cfg["bands"]["num_thetas"]
        if periodic.dim == 1:
            thetas = [(j * 2 * np.pi / nt,) for j in range(nt)]
        else:
            k = max(int(np.sqrt(nt)), 2)
            thetas = [
                (i * 2 * np.pi / k, j * 2 * np.pi / k) for i in range(k) for j in range(k)
            ]
    bands, tol_h = estimate_band_tol(periodic, cfg["nodes_per_edge"], params, thetas, nb)
    report = verify_gap(bands, params, tol_h)
    with open(outdir / "bands.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["theta_1"] + (["theta_2"] if periodic.dim == 2 else []) + ["band_index", "lambda"]
        w.writerow(head)
        for th, row in zip(bands.thetas, bands.bands):
            for j, lam in enumerate(row):
                w.writerow([f"{t:.17g}" for t in th] + [j, f"{lam:.17g}"])
    _write_json(outdir / "gap_report.json", report, cfg)
    plotting.plot_bands(bands, outdir / "bands.png")
    if report["lemma31_pass"] and report["lemma33_pass"]:
        print(f"gap check passed: min|lambda| = {report['min_abs_lambda']:.6g}")
        return EXIT_OK
    print(f"gap check FAILED: {report}", file=sys.stderr)
    return EXIT_VERIFY


def _hypothesis_gate(cfg, params, nl):
    which = theorem_mode_hypotheses(nl)
    report = check_hypotheses(nl, which, params=params, seed=cfg["seed"])
    failed = [name for name in which if not report[name]["pass"]]
    return report, failed


def cmd_solve(cfg, outdir, deflate=None):
    periodic, params = build_problem(cfg)
    nl = build_nonlinearity(cfg, params, periodic.cell)
    gate, failed = _hypothesis_gate(cfg, params, nl)
    if failed:
        print(f"hypothesis gate failed: {', '.join(failed)}", file=sys.stderr)
        _write_json(outdir / "hypothesis_report.json", {"report": gate, "failed": failed}, cfg)
        return EXIT_HYPOTHESIS
    closure = close_periodically(periodic, cfg["closure_cells"])
    grid = GraphGrid(closure.graph, cfg["nodes_per_edge"])
    op = assemble(closure, grid, params)
    dec = decompose(op)
    ctx = ActionContext(closure, grid, op, dec, params, nl)
    scfg = cfg["solve"]
    k = deflate if deflate is not None else scfg["deflate"]
    try:
        if k <= 1:
            states = [
                solve_bound_state(
                    ctx, scfg["init"], tol=scfg["tol"], max_iter=scfg["max_iter"]
                )
            ]
        else:
            states = solve_distinct_states(
                ctx,
                k,
                tol=scfg["tol"],
                max_iter=scfg["max_iter"],
                distinct_threshold=scfg["distinct_threshold"],
                extra_inits=[scfg["init"]],
            )
    except SolverError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    reports = []
    for i, s in enumerate(states):
        save_field_csv(s.field, outdir / f"state_{i}.csv")
        sidecar = s.summary()
        sidecar["a"] = params.a
        sidecar["N"] = list(closure.N)
        sidecar["p_or_b"] = nl.describe()
        sidecar["seed"] = cfg["seed"]
        _write_json(outdir / f"state_{i}.json", sidecar, cfg)
        reports.append(residual_report(ctx, s))
        plotting.plot_state(s, closure, outdir / f"state_{i}.png")
    _write_json(outdir / "residual_report.json", {"states": reports}, cfg)
    if len(states) > 1:
        with open(outdir / "distinctness_matrix.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "orbit_distance"])
            for i in range(len(states)):
                for j in range(len(states)):
                    d = 0.0 if i == j else orbit_distance(closure, states[i].field, states[j].field)
                    w.writerow([i, j, f"{d:.17g}"])
    print(
        f"{len(states)} state(s): "
        + ", ".join(f"residual {s.residual:.2e}, action {s.action:.6g}" for s in states)
    )
    return EXIT_OK


def _verify_gap(cfg, outdir):
    code = cmd_bands(cfg, outdir)
    rep = json.loads((outdir / "gap_report.json").read_text())
    rep["pass"] = bool(rep["lemma31_pass"] and rep["lemma33_pass"])
    with open(outdir / "verify_gap.json", "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True)
    return code


def _verify_cutoff(cfg, outdir):
    periodic, params = build_problem(cfg)
    Ns = cfg["verify"]["cutoff_cells"]
    recs = cutoff_test_functions(periodic, Ns, params, nodes_per_edge=cfg["nodes_per_edge"])
    ok = True
    ratios = []
    for r0, r1 in zip(recs, recs[1:]):
        if r1["N"] == 2 * r0["N"]:
            ratio = r1["v_prime_sq"] / r0["v_prime_sq"]
            ratios.append(ratio)
            if not (1 / 2.4 <= ratio <= 1 / 1.6):
                ok = False
    bound = params.a + params.V.sup(periodic.cell) + 0.05
    if recs[-1]["av_norm"] > bound:
        ok = False
    payload = {"records": recs, "halving_ratios": ratios, "av_bound": bound, "pass": ok}
    _write_json(outdir / "verify_cutoff.json", payload, cfg)
    plotting.plot_cutoff(recs, outdir / "verify_cutoff.png")
    return EXIT_OK if ok else EXIT_VERIFY


def _small_context(cfg):
    periodic, params = build_problem(cfg)
    closure = close_periodically(periodic, cfg["closure_cells"])
    grid = GraphGrid(closure.graph, cfg["nodes_per_edge"])
    op = assemble(closure, grid, params)
    dec = decompose(op)
    return periodic, params, closure, grid, op, dec


def _verify_interpolation(cfg, outdir):
    _, params, closure, grid, op, dec = _small_context(cfg)
    rng = np.random.default_rng(cfg["seed"])
    theta = cfg["verify"]["theta"]
    ratios = []
    minimality = True
    for _ in range(20):
        f = random_smooth_field(grid, rng)
        rep = interpolation_identity_check(dec, theta, f, rng=rng)
        ratios.append(rep["ratio"])
        minimality = minimality and rep["minimality_ok"]
    c_theta = rep["C_theta"]
    ok = all(abs(r - 1.0) <= 1e-3 for r in ratios) and minimality
    if abs(theta - 0.5) < 1e-12:
        ok = ok and abs(c_theta - np.pi) <= 1e-6
    payload = {
        "theta": theta,
        "C_theta": c_theta,
        "ratios": ratios,
        "max_ratio_error": max(abs(r - 1.0) for r in ratios),
        "minimality_ok": minimality,
        "pass": ok,
    }
    _write_json(outdir / "verify_interpolation.json", payload, cfg)
    return EXIT_OK if ok else EXIT_VERIFY


def _verify_norms(cfg, outdir):
    _, params, closure, grid, op, dec = _small_context(cfg)
    rep = check_norm_inequalities(dec, params, n_samples=cfg["verify"]["num_fields"], seed=cfg["seed"])
    split = SplitParameters.from_problem(params, closure.periodic.cell)
    win = check_window_inequality(dec, split, seed=cfg["seed"])
    ok = rep["violations"] == 0 and win["violations"] == 0
    payload = {"corpus": rep, "window": win, "pass": ok}
    _write_json(outdir / "verify_norms.json", payload, cfg)
    return EXIT_OK if ok else EXIT_VERIFY


def _verify_hypotheses(cfg, outdir):
    periodic, params = build_problem(cfg)
    nl = build_nonlinearity(cfg, params, periodic.cell)
    report = check_hypotheses(nl, params=params, seed=cfg["seed"])
    which = theorem_mode_hypotheses(nl)
    failed = [name for name in which if not report[name]["pass"]]
    payload = {"report": report, "theorem_set": list(which), "failed": failed, "pass": not failed}
    _write_json(outdir / "verify_hypotheses.json", payload, cfg)
    return EXIT_OK if not failed else EXIT_VERIFY


def _verify_linking(cfg, outdir):
    periodic, params = build_problem(cfg)
    nl = build_nonlinearity(cfg, params, periodic.cell)
    closure = close_periodically(periodic, cfg["closure_cells"])
    grid = GraphGrid(closure.graph, cfg["nodes_per_edge"])
    op = assemble(closure, grid, params)
    dec = decompose(op)
    ctx = ActionContext(closure, grid, op, dec, params, nl)
    rep = linking_diagnostics(ctx, sample_count=cfg["verify"]["sample_count"], seed=cfg["seed"])
    ok = (
        rep["eta_positive"]
        and rep["dq_nonpositive"]
        and rep["y_minus_max_phi"] <= 0
        and np.isfinite(rep["small_rho_slope"])
        and abs(rep["small_rho_slope"] - 2.0) <= 0.1
    )
    payload = dict(rep)
    payload["pass"] = bool(ok)
    _write_json(outdir / "verify_linking.json", payload, cfg)
    plotting.plot_linking(rep, outdir / "verify_linking.png")
    return EXIT_OK if ok else EXIT_VERIFY


def _verify_gn(cfg, outdir):
    periodic, params = build_problem(cfg)
    closure = close_periodically(periodic, cfg["closure_cells"])
    rng = np.random.default_rng(cfg["seed"])
    pairs = [
        (np.inf if p == "inf" else float(p), float(q)) for p, q in cfg["verify"]["gn_pairs"]
    ]
    results = []
    ok = True
    for p, q in pairs:
        sups = []
        for n in (cfg["nodes_per_edge"], 2 * cfg["nodes_per_edge"]):
            grid = GraphGrid(closure.graph, n)
            rng_local = np.random.default_rng(cfg["seed"])
            sup = 0.0
            for _ in range(cfg["verify"]["num_fields"]):
                f = random_smooth_field(grid, rng_local)
                sup = max(sup, check_gagliardo_nirenberg(f, p, q)["ratio"])
            sups.append(sup)
        drift = abs(sups[1] - sups[0]) / sups[0]
        stable = drift <= 0.1
        ok = ok and np.isfinite(sups[1]) and stable
        results.append(
            {"p": "inf" if p == np.inf else p, "q": q, "sup_coarse": sups[0], "sup_fine": sups[1], "drift": drift}
        )
    payload = {"pairs": results, "pass": ok}
    _write_json(outdir / "verify_gn.json", payload, cfg)
    return EXIT_OK if ok else EXIT_VERIFY


VERIFY_DISPATCH = {
    "gap": _verify_gap,
    "cutoff": _verify_cutoff,
    "interpolation": _verify_interpolation,
    "norms": _verify_norms,
    "hypotheses": _verify_hypotheses,
    "linking": _verify_linking,
    "gn": _verify_gn,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dirac-graph",
        description="Dirac operators on periodic metric graphs: bands, bound states, verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("bands", "solve", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None, help="output directory (default from config)")
        sp.add_argument("--seed", type=int, default=None)
        if name == "solve":
            sp.add_argument("--deflate", type=int, default=None)
        if name == "verify":
            sp.add_argument("--which", required=True, choices=sorted(VERIFY_DISPATCH))
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg["seed"] = args.seed
    outdir = Path(args.out if args.out is not None else cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "bands":
            return cmd_bands(cfg, outdir)
        if args.command == "solve":
            return cmd_solve(cfg, outdir, deflate=args.deflate)
        return VERIFY_DISPATCH[args.which](cfg, outdir)
    except HypothesisError as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except SolverError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
