"""Command line front end: ``bestchoice {design,analyze,simulate,diagnose}``.

Every output carries a run manifest (command, hash of the inputs, seed,
version, timestamps).  Runs without ``--seed`` draw one from system entropy
and report it on stderr so they can be replayed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import secrets
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import McConfig, regime_classify, variance_vKT
from .design import Assignment, best_choice, estimate_propensities, make_rng
from .errors import BestChoiceError, ConfigError, DataFormatError
from .inference import HC_VARIANTS, METHODS, ObservedData, analyze
from .io import align, dump_json, read_column, read_population, read_sim_config, write_csv
from .population import TrimSpec, compute_moments, trim
from .simulation import (
    CSV_COLUMNS,
    SimConfig,
    compute_truth,
    delta_bound,
    gamma_n,
    report_rows,
    run_replications,
    worst_case_mse,
)


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def manifest(command: str, inputs: dict, files: dict, seed, started: str) -> dict:
    """Run manifest; ``config_hash`` covers the arguments and the bytes of every input file."""
    payload = {"command": command, "inputs": inputs, "files": {k: _file_digest(v) for k, v in sorted(files.items())}}
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()
    return {
        "command": command,
        "config_hash": digest,
        "master_seed": seed,
        "tool_version": __version__,
        "timestamps": {"started": started, "finished": _now()},
    }


def _seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    seed = secrets.randbits(63)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _trim_spec(s: str) -> TrimSpec:
    try:
        lo, hi = (float(v) for v in s.split(","))
        return TrimSpec(lo, hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi' quantiles, got {s!r}: {exc}") from None


def _emit(obj, out):
    text = dump_json(obj, out)
    if out is None:
        sys.stdout.write(text)


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


# --------------------------------------------------------------------------


def cmd_design(args) -> int:
    started = _now()
    seed = _seed(args)
    pop = read_population(args.covariates)
    if args.trim is not None:
        pop = trim(pop, args.trim)
    moments = compute_moments(pop, args.n1, ridge=args.ridge)
    res = best_choice(pop, args.n1, args.T, make_rng(seed), moments)
    out = Path(args.out)
    write_csv(out, ["unit_id", "z"], [[u, int(v)] for u, v in zip(pop.unit_ids, res.chosen.z)])
    inputs = {
        "n1": args.n1,
        "T": args.T,
        "trim": None if args.trim is None else [args.trim.lo_q, args.trim.hi_q],
        "ridge": args.ridge,
    }
    side = {
        "n": pop.n,
        "n1": args.n1,
        "T": args.T,
        "K": pop.K,
        "covariates": list(pop.covariate_names),
        "trim": inputs["trim"],
        "ridge": moments.ridge,
        "m_min": res.m_min,
        "chosen_index": res.chosen_index,
        "tie_count": res.tie_count,
        "seed_info": res.seed_info,
        "m_all_summary": res.m_summary,
        "manifest": manifest("design", inputs, {"covariates": args.covariates}, seed, started),
    }
    dump_json(side, _sidecar(out))
    print(f"wrote {out} and {_sidecar(out)} (m_min={res.m_min:.6g})", file=sys.stderr)
    return 0


def cmd_analyze(args) -> int:
    started = _now()
    design_path = Path(args.design)
    side = {}
    if _sidecar(design_path).exists():
        side = json.loads(_sidecar(design_path).read_text(encoding="utf-8"))
    T = args.T if args.T is not None else side.get("T")
    if T is None and args.method == "constrained":
        raise ConfigError("--T is required (no design sidecar found)")
    pop = read_population(args.covariates)
    if side.get("trim"):
        pop = trim(pop, TrimSpec(*side["trim"]))
    z = align(read_column(design_path, "z"), pop.unit_ids, str(design_path)).astype(int)
    y = align(read_column(args.outcomes, "y"), pop.unit_ids, str(args.outcomes))
    n1 = int(z.sum())
    data = ObservedData(Assignment(z, n1), y, pop.covariates)
    moments = compute_moments(pop, n1, ridge=bool(side.get("ridge")))
    seed = args.seed if args.seed is not None else 0
    mc = McConfig(draws=args.mc_draws, seed=seed)
    res = analyze(data, moments, args.method, args.hc, int(T or 1), args.alpha, mc)
    inputs = {"alpha": args.alpha, "method": args.method, "hc": args.hc, "T": T, "mc_draws": args.mc_draws}
    files = {"design": design_path, "outcomes": args.outcomes, "covariates": args.covariates}
    out = {
        "tau_hat": res.tau_hat,
        "Vtt_hat": res.variance.Vtt_hat if res.variance else None,
        "R2_hat": res.variance.R2_hat if res.variance else None,
        "ci": [res.ci_lo, res.ci_hi],
        "method": res.method,
        "meta": {
            "alpha": args.alpha,
            "hc": res.variance.hc if res.variance else None,
            "K": pop.K,
            "T": T,
            "n": pop.n,
            "n1": n1,
            "mc": res.mc_meta,
            "components": res.variance.components if res.variance else None,
            "manifest": manifest("analyze", inputs, files, seed, started),
        },
    }
    _emit(out, args.out)
    return 0


def cmd_simulate(args) -> int:
    started = _now()
    raw = read_sim_config(args.config)
    pop = read_population(raw["population"])
    if not pop.has_outcomes:
        raise ConfigError("simulate.population: CSV needs y1 and y0 columns")
    if raw["K_used"] > pop.K or raw["K_used"] < 1:
        raise ConfigError(f"simulate.K_used: {raw['K_used']} outside [1, {pop.K}]")
    if "trim" in raw:
        pop = trim(pop, TrimSpec(*raw["trim"]))
    try:
        cfg = SimConfig(
            pop=pop,
            n1=raw["n1"],
            K_used=raw["K_used"],
            T=raw["T"],
            reps=raw.get("reps", 1000),
            alpha=raw.get("alpha", 0.05),
            methods=raw.get("methods", METHODS),
            hc_variants=raw.get("hc", HC_VARIANTS),
            master_seed=raw.get("seed", 0),
            cre_baseline=raw.get("cre_baseline", True),
            mc=McConfig(draws=raw.get("mc_draws", 200_000), seed=raw.get("mc_seed", 0)),
            n_jobs=raw.get("n_jobs", 1),
        )
    except ValueError as exc:
        if isinstance(exc, BestChoiceError):
            raise
        raise ConfigError(f"simulate: {exc}") from exc
    report = run_replications(cfg)
    stem = Path(args.config).with_suffix("")
    out_json = Path(args.out_json) if args.out_json else stem.with_name(stem.name + "_report.json")
    out_csv = Path(args.out_csv) if args.out_csv else stem.with_name(stem.name + "_report.csv")
    body = report.to_dict()
    inputs = {k: v for k, v in raw.items() if k != "population"}
    body["manifest"] = manifest("simulate", inputs, {"population": raw["population"]}, cfg.master_seed, started)
    dump_json(body, out_json)
    write_csv(out_csv, CSV_COLUMNS, report_rows(report))
    print(f"wrote {out_json} and {out_csv}", file=sys.stderr)
    return 0


def cmd_diagnose(args) -> int:
    started = _now()
    sub = args.what
    if sub == "vkt":
        mc = McConfig(draws=args.draws, seed=args.seed if args.seed is not None else 0)
        rows = [[K] + [variance_vKT(K, T, mc).value for T in args.T] for K in args.K]
        header = ["K"] + [f"T={T}" for T in args.T]
        if args.out:
            write_csv(args.out, header, rows)
        else:
            sys.stdout.write(",".join(header) + "\n")
            for r in rows:
                sys.stdout.write(",".join(str(v) for v in r) + "\n")
        return 0
    if sub == "regime":
        mc = McConfig(draws=args.draws, seed=args.seed if args.seed is not None else 0)
        rec = regime_classify(args.K, args.T, mc)
        rec["manifest"] = manifest("diagnose regime", {"K": args.K, "T": args.T, "draws": args.draws}, {}, mc.seed, started)
        _emit(rec, args.out)
        return 0

    pop = read_population(args.covariates)
    if getattr(args, "trim", None) is not None:
        pop = trim(pop, args.trim)
    if sub == "gamma":
        if not pop.has_outcomes:
            raise DataFormatError(f"{args.covariates}: gamma needs y1 and y0 columns")
        K = args.K_used or pop.K
        truth = compute_truth(pop, args.n1, K)
        g = gamma_n(pop, args.n1, K)
        rec = {
            "gamma_n": g,
            "delta_bound": delta_bound(g),
            "K_used": K,
            "n": pop.n,
            "n1": args.n1,
            "Vtt": truth.Vtt,
            "R2": truth.R2,
            "manifest": manifest("diagnose gamma", {"n1": args.n1, "K_used": K}, {"covariates": args.covariates}, None, started),
        }
        _emit(rec, args.out)
        return 0

    seed = _seed(args)
    rng = make_rng(seed)
    files = {"covariates": args.covariates}
    if sub == "propensity":
        p = estimate_propensities(pop, args.n1, args.T, args.reps, rng)
        se = np.sqrt(p * (1 - p) / args.reps)
        rec = {
            "n1_over_n": args.n1 / pop.n,
            "min": float(p.min()),
            "max": float(p.max()),
            "units": [{"unit_id": u, "propensity": float(v), "se": float(s)} for u, v, s in zip(pop.unit_ids, p, se)],
            "manifest": manifest("diagnose propensity", {"n1": args.n1, "T": args.T, "reps": args.reps}, files, seed, started),
        }
        _emit(rec, args.out)
        return 0
    if sub == "worstcase":
        rows = [worst_case_mse(pop.covariates, args.n1, T, args.reps, rng) for T in args.T]
        rec = {
            "results": rows,
            "manifest": manifest("diagnose worstcase", {"n1": args.n1, "T": args.T, "reps": args.reps}, files, seed, started),
        }
        _emit(rec, args.out)
        return 0
    raise ConfigError(f"unknown diagnose subcommand {sub!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bestchoice", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sp = p.add_subparsers(dest="command", required=True)

    d = sp.add_parser("design", help="draw a best-choice rerandomized assignment")
    d.add_argument("--covariates", required=True, help="CSV with unit_id and covariate columns")
    d.add_argument("--n1", type=int, required=True, help="number of treated units")
    d.add_argument("--T", type=int, default=1000, help="complete randomizations to try (default 1000)")
    d.add_argument("--seed", type=int)
    d.add_argument("--trim", type=_trim_spec, nargs="?", const=TrimSpec(), default=None,
                   help="winsorize covariates at quantiles 'lo,hi' (default 0.025,0.975)")
    d.add_argument("--ridge", action="store_true", help="add 1e-8*trace/K to the covariance diagonal")
    d.add_argument("--out", default="assignment.csv")
    d.set_defaults(func=cmd_design)

    a = sp.add_parser("analyze", help="estimate the effect and a confidence interval")
    a.add_argument("--design", required=True, help="assignment CSV written by 'design'")
    a.add_argument("--outcomes", required=True, help="CSV with unit_id,y")
    a.add_argument("--covariates", required=True)
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--method", choices=METHODS, default="constrained")
    a.add_argument("--hc", type=str.upper, choices=HC_VARIANTS, default="HC0")
    a.add_argument("--T", type=int, help="tries used by the design (read from the sidecar if omitted)")
    a.add_argument("--mc-draws", type=int, default=200_000)
    a.add_argument("--seed", type=int, help="Monte Carlo seed for the quantile (default 0)")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    s = sp.add_parser("simulate", help="repeated-sampling evaluation from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out-json")
    s.add_argument("--out-csv")
    s.set_defaults(func=cmd_simulate)

    g = sp.add_parser("diagnose", help="design diagnostics")
    gs = g.add_subparsers(dest="what", required=True)
    v = gs.add_parser("vkt", help="grid of v_{K,T}")
    v.add_argument("--K", type=_int_list, required=True)
    v.add_argument("--T", type=_int_list, required=True)
    v.add_argument("--draws", type=int, default=200_000)
    v.add_argument("--seed", type=int)
    v.add_argument("--out")
    r = gs.add_parser("regime", help="log(T)/K and v_{K,T} classification")
    r.add_argument("--K", type=int, required=True)
    r.add_argument("--T", type=int, required=True)
    r.add_argument("--draws", type=int, default=200_000)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    pr = gs.add_parser("propensity", help="Monte Carlo propensity scores")
    wc = gs.add_parser("worstcase", help="worst-case bias and RMSE relative to complete randomization")
    ga = gs.add_parser("gamma", help="gamma_n and the Gaussian approximation bound")
    for q in (pr, wc, ga):
        q.add_argument("--covariates", required=True)
        q.add_argument("--n1", type=int, required=True)
        q.add_argument("--out")
    for q in (pr, wc):
        q.add_argument("--seed", type=int)
        q.add_argument("--trim", type=_trim_spec, nargs="?", const=TrimSpec(), default=None)
    pr.add_argument("--T", type=int, required=True)
    pr.add_argument("--reps", type=int, default=10_000)
    wc.add_argument("--T", type=_int_list, required=True)
    wc.add_argument("--reps", type=int, default=100_000)
    ga.add_argument("--K-used", type=int, dest="K_used")
    g.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BestChoiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
