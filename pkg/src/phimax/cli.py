"""Command-line front end: ``phimax {simulate,maxima,norm,check,experiment}``.

Structured inputs (families, distributions, tail models, experiment configs)
are JSON given inline, as a file path, or by a short name. Every run writes
its outputs plus ``manifest.json`` listing each file with its SHA-256 digest.

Exit status: 0 on success, 2 on invalid input, 3 when ``--strict`` is set
and a numerical diagnostic fails.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from phimax import __version__
from phimax.conditions import (
    RateParams,
    Verdict,
    check_corollary2,
    check_theorem1,
    check_theorem2,
    check_theorem4,
    normalizer_spec,
    parse_g,
    theorem3_partial_sum,
)
from phimax.maxima import deviations
from phimax.montecarlo import ExperimentConfig, run_experiment
from phimax.orlicz import family_from_dict
from phimax.simulate import read_grid, sample, validate_distribution, write_grid_binary, write_grid_csv
from phimax.tails import log_mgf_from_dict, tail_model_from_dict, tau_phi_estimate

EXIT_OK, EXIT_CONFIG, EXIT_DIAGNOSTIC = 0, 2, 3

SHORT_NAMES = {
    "family": {
        "gaussian": {"kind": "gaussian"},
        "weibull": {"kind": "weibull", "theta": 9.0, "b": 1.25},
    },
    "dist": {
        "gaussian": {"kind": "gaussian"},
        "weibull": {"kind": "weibull", "theta": 9.0, "b": 1.25},
        "zero": {"kind": "constant", "value": 0.0},
    },
    "tail-model": {
        "gaussian": {"kind": "gaussian"},
        "weibull": {"kind": "weibull", "theta": 9.0, "b": 1.25},
    },
}


class ConfigError(Exception):
    """Invalid user input; the message names the offending field."""


def load_json_arg(text: str, what: str):
    """Resolve a short name, inline JSON, or a path to a JSON file."""
    if text in SHORT_NAMES.get(what, {}):
        return dict(SHORT_NAMES[what][text])
    stripped = text.lstrip()
    try:
        if stripped.startswith(("{", "[")):
            return json.loads(text)
        path = Path(text)
        if not path.exists():
            names = ", ".join(SHORT_NAMES.get(what, {})) or "none"
            raise ConfigError(f"--{what}: {text!r} is not a file, inline JSON or known name ({names})")
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--{what}: malformed JSON ({exc})") from None


def _float_list(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--{what}: expected comma-separated numbers, got {text!r}") from None


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir: Path, subcommand: str, config: dict, seed, outputs) -> Path:
    manifest = {
        "tool": "phimax",
        "version": __version__,
        "subcommand": subcommand,
        "config": _jsonable(config),
        "seed": seed,
        "outputs": [{"path": p.name, "sha256": _sha256(p)} for p in outputs],
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        return args.threads
    env = os.environ.get("PHIMAX_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"PHIMAX_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("PHIMAX_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


def _family(text):
    desc = load_json_arg(text, "family")
    try:
        return family_from_dict(desc), desc
    except ValueError as exc:
        raise ConfigError(f"family: {exc}") from None


def _seed(args) -> int:
    if args.seed is None:
        print("warning: --seed not given, using 0", file=sys.stderr)
        return 0
    if args.seed < 0:
        raise ConfigError("--seed must be nonnegative")
    return args.seed


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    desc = load_json_arg(args.dist, "dist")
    try:
        desc = validate_distribution(desc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.m is None or args.j is None:
        raise ConfigError("--m and --j are required")
    if args.m < 1 or args.j < 1:
        raise ConfigError("--m and --j must be positive")
    seed = _seed(args)
    grid = sample(desc, seed, args.m, args.j, realization=args.realization).values
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    out = outdir / (args.out or ("grid.csv" if args.format == "csv" else "grid.bin"))
    (write_grid_csv if args.format == "csv" else write_grid_binary)(out, grid)
    cfg = {"distribution": desc, "m": args.m, "j": args.j, "realization": args.realization, "format": args.format}
    write_manifest(outdir, "simulate", cfg, seed, [out])
    print(str(out))
    return EXIT_OK


def cmd_maxima(args) -> int:
    try:
        grid = read_grid(args.grid)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"--grid: {exc}") from None
    family, fdesc = _family(args.family)
    try:
        spec = normalizer_spec(family, parse_g(args.g))
    except ValueError as exc:
        raise ConfigError(f"--g: {exc}") from None
    m, j = grid.shape
    if args.windows:
        wins = load_json_arg(args.windows, "windows")
        if not isinstance(wins, list) or not all(isinstance(w, list) and len(w) == 2 for w in wins):
            raise ConfigError("--windows must be a JSON list of [m, j] pairs")
        for i, (a, b) in enumerate(wins):
            if not (1 <= int(a) <= m and 1 <= int(b) <= j):
                raise ConfigError(f"windows[{i}] = {[a, b]} is outside the {m}x{j} grid")
        cells = [(int(a), int(b)) for a, b in wins]
    else:
        cells = [(a, b) for a in range(1, m + 1) for b in range(1, j + 1)]
    res = deviations(grid, spec)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    out = outdir / (args.out or "maxima.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "j", "M", "a", "Y", "Yplus", "Yminus", "kstar", "nstar"])
        for a, b in cells:
            i, k = a - 1, b - 1
            w.writerow([a, b, repr(float(res.prefix_max[i, k])), repr(float(res.a[i, k])), repr(float(res.y[i, k])),
                        repr(float(res.y_plus[i, k])), repr(float(res.y_minus[i, k])),
                        int(res.argmax[i, k, 0]), int(res.argmax[i, k, 1])])
    cfg = {"grid": str(args.grid), "family": fdesc, "g": parse_g(args.g), "windows": args.windows or "all"}
    write_manifest(outdir, "maxima", cfg, None, [out])
    print(str(out))
    return EXIT_OK


def cmd_norm(args) -> int:
    family, fdesc = _family(args.family)
    dist = load_json_arg(args.dist, "dist")
    if args.M < 1:
        raise ConfigError("--M must be at least 1")
    try:
        log_mgf = log_mgf_from_dict(dist, args.M)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"dist: {exc}") from None
    est = tau_phi_estimate(log_mgf, family, series_terms=args.M if dist.get("kind") == "weibull" else None,
                           keep_curve=bool(args.curve))
    result = est.to_dict()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []
    out = outdir / "norm.json"
    out.write_text(json.dumps(_jsonable(result), indent=2, sort_keys=True) + "\n")
    outputs.append(out)
    if args.curve:
        curve = outdir / "norm_curve.csv"
        with open(curve, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "h"])
            for lam, h in zip(*est.objective_curve):
                w.writerow([repr(float(lam)), repr(float(h))])
        outputs.append(curve)
    write_manifest(outdir, "norm", {"family": fdesc, "distribution": dist, "M": args.M}, None, outputs)
    print(json.dumps(_jsonable(result), sort_keys=True))
    return EXIT_DIAGNOSTIC if args.strict and not est.ok else EXIT_OK


def _verdict_record(condition, eps, v, **extra):
    return {"condition": condition, "epsilon": eps, "verdict": v.verdict.value, "partial_value": v.partial_value,
            "log_partial_value": v.log_partial_value, "tail_ratio": v.tail_ratio, "message": v.message, **extra}


def cmd_check(args) -> int:
    family, fdesc = _family(args.family)
    try:
        g_desc = parse_g(load_json_arg(args.g, "g") if args.g.lstrip().startswith("{") else args.g)
        spec = normalizer_spec(family, g_desc)
    except ValueError as exc:
        raise ConfigError(f"--g: {exc}") from None
    conds = {"thm1", "thm2", "cor2", "thm3", "thm4"} if args.condition == "all" else {args.condition}
    eps_list = _float_list(args.eps, "eps")
    alpha_list = _float_list(args.alpha, "alpha") if args.alpha else []
    model = None
    if conds & {"thm2", "cor2", "thm4"}:
        if not args.tail_model:
            raise ConfigError(f"--tail-model is required for condition(s) {sorted(conds & {'thm2', 'cor2', 'thm4'})}")
        tdesc = load_json_arg(args.tail_model, "tail-model")
        try:
            model = tail_model_from_dict(tdesc, family)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"tail_model: {exc}") from None
    if conds & {"thm1", "thm2", "cor2", "thm4"} and not eps_list:
        raise ConfigError("--eps is required")
    if conds & {"thm3", "thm4"} and not alpha_list:
        raise ConfigError("--alpha is required for thm3/thm4")
    records = []
    for eps in eps_list:
        if "thm1" in conds:
            if eps <= 0:
                raise ConfigError("--eps values must be positive for thm1")
            records.append(_verdict_record("thm1", eps, check_theorem1(spec, eps)))
        if "thm2" in conds:
            first, second = check_theorem2(spec, model, eps, args.A)
            records.append(_verdict_record("thm2.first", eps, first, A=args.A))
            records.append(_verdict_record("thm2.second", eps, second, A=args.A))
        if "cor2" in conds:
            first, second = check_corollary2(family, model, eps, args.A)
            records.append(_verdict_record("cor2.4", eps, first, A=args.A))
            records.append(_verdict_record("cor2.5", eps, second, A=args.A))
        if "thm4" in conds:
            for alpha in alpha_list:
                rep = check_theorem4(family, model, eps, alpha)
                records.append({"condition": "thm4", "epsilon": eps, "verdict": "diverges" if rep.diverges else "not-shown",
                                **rep.to_dict()})
    if "thm3" in conds:
        for alpha in alpha_list:
            sums, v = theorem3_partial_sum(RateParams(alpha=alpha, epsilon=0.0, f=args.f), args.cap)
            records.append(_verdict_record("thm3", None, v, alpha=alpha, f=args.f,
                                           partial_sums=[[n, s] for n, s in sums]))
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    out = outdir / "check.jsonl"
    lines = [json.dumps(_jsonable(r), sort_keys=True) for r in records]
    out.write_text("".join(line + "\n" for line in lines))
    cfg = {"family": fdesc, "g": g_desc, "tail_model": args.tail_model, "eps": eps_list, "alpha": alpha_list,
           "condition": args.condition, "A": args.A, "f": args.f, "cap": args.cap}
    write_manifest(outdir, "check", cfg, None, [out])
    for line in lines:
        print(line)
    failed = any(r.get("verdict") == Verdict.INCONCLUSIVE.value for r in records)
    return EXIT_DIAGNOSTIC if args.strict and failed else EXIT_OK


def cmd_experiment(args) -> int:
    raw = load_json_arg(args.config, "config")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key, table in (("distribution", "dist"), ("family", "family")):
        if isinstance(raw.get(key), str):
            if raw[key] not in SHORT_NAMES[table]:
                raise ConfigError(f"config: {key} {raw[key]!r} is not a known name ({', '.join(SHORT_NAMES[table])})")
            raw = {**raw, key: dict(SHORT_NAMES[table][raw[key]])}
    if args.seed is not None:
        raw = {**raw, "seed": args.seed}
    if "seed" not in raw:
        raise ConfigError("seed is required for experiment (in the config or via --seed)")
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config: {exc}") from None
    report = run_experiment(cfg, threads=_threads(args))
    outdir = Path(args.outdir)
    outputs = report.write(outdir)
    write_manifest(outdir, "experiment", cfg.to_dict(), cfg.seed, outputs)
    print(str(outdir / "report.json"))
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    failed = any(row.get("violation") for row in report.tail_check)
    return EXIT_DIAGNOSTIC if args.strict and failed else EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phimax", description="phi-subgaussian running maxima of double arrays")
    p.add_argument("--version", action="version", version=f"phimax {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--outdir", default=".", help="directory for outputs and manifest.json (default: .)")
        sp.add_argument("--strict", action="store_true", help="exit 3 when a numerical diagnostic fails")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="master seed (nonnegative integer)")

    s = sub.add_parser("simulate", help="generate a seeded double array")
    s.add_argument("--dist", required=True, help="distribution: gaussian, weibull, zero, inline JSON or a JSON file")
    s.add_argument("--m", type=int, help="number of rows")
    s.add_argument("--j", type=int, help="number of columns")
    s.add_argument("--realization", type=int, default=0, help="realization index (default 0)")
    s.add_argument("--format", choices=["bin", "csv"], default="bin", help="grid file format (default bin)")
    s.add_argument("--out", help="output file name inside --outdir")
    common(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("maxima", help="running maxima and deviations of a grid file")
    s.add_argument("--grid", required=True, help="grid file (PMAX binary or k,n,value CSV)")
    s.add_argument("--family", default="gaussian", help="Orlicz family: name, inline JSON or JSON file")
    s.add_argument("--g", default="const:1", help="norm-growth function, e.g. const:1 or exp:1")
    s.add_argument("--windows", help="JSON list of [m, j] windows (default: every window)")
    s.add_argument("--out", help="output CSV name inside --outdir")
    common(s, seed=False)
    s.set_defaults(func=cmd_maxima)

    s = sub.add_parser("norm", help="estimate the phi-subgaussian norm from the MGF")
    s.add_argument("--family", required=True, help="Orlicz family: name, inline JSON or JSON file")
    s.add_argument("--dist", required=True, help="distribution: name, inline JSON or JSON file")
    s.add_argument("--M", type=int, default=50, help="MGF series truncation (default 50)")
    s.add_argument("--curve", action="store_true", help="also write the sampled objective as norm_curve.csv")
    common(s, seed=False)
    s.set_defaults(func=cmd_norm)

    s = sub.add_parser("check", help="numerical checks of the integrability and series conditions")
    s.add_argument("--family", required=True, help="Orlicz family: name, inline JSON or JSON file")
    s.add_argument("--g", default="const:1", help="norm-growth function: shorthand or JSON")
    s.add_argument("--tail-model", help="lower-tail model: gaussian, weibull, inline JSON or JSON file")
    s.add_argument("--eps", default="", help="comma-separated epsilon values")
    s.add_argument("--alpha", default="", help="comma-separated alpha values")
    s.add_argument("--condition", choices=["thm1", "thm2", "cor2", "thm3", "thm4", "all"], default="thm1")
    s.add_argument("--A", type=float, default=2.0, help="lower limit of the lower-tail integrals (default 2)")
    s.add_argument("--f", type=float, default=1.0, help="constant f for the rate series (default 1)")
    s.add_argument("--cap", type=int, default=4096, help="largest N of the rate partial sums (default 4096)")
    common(s, seed=False)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("experiment", help="replicated Monte Carlo study from a JSON config")
    s.add_argument("--config", required=True, help="experiment config: inline JSON or JSON file")
    s.add_argument("--threads", type=int, default=None, help="worker threads (default: PHIMAX_THREADS or all cores)")
    common(s)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
