"""Command-line harness: ``optinject {fit,iterate,sweep,demo,verify}``.

Every run is driven by a :class:`RunConfig` assembled from defaults, an
optional JSON config file, and command-line flags (flags win). Reports are
JSON with sorted keys and shortest round-trip floats, so identical inputs
give byte-identical files. Wall-clock timings are only recorded with
``--timings``.

Exit codes: 0 success, 1 a ``verify`` check failed, 2 configuration error,
3 data error, 4 numerical failure. Errors print one line to stderr,
``optinject: <kind>-error: <message>``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .decorrelate import (
    InjectionFamily,
    LiftInjection,
    check_pairwise_uncorrelated,
    decorrelate,
    parse_family,
)
from .demo import NONLINEARITIES, make_data
from .ensemble import DataError, load_csv, save_csv
from .estimator import (
    EST_VERSION,
    Estimator,
    FullRankEstimator,
    NumericalError,
    RankProfile,
    degree_comparison,
    diagnostics,
    empirical_error,
    estimator_from_json,
    fit_full_rank,
    fit_rank_constrained,
    predicted_error_full,
    predicted_error_rank,
)
from .injection_opt import B_MODES, Z_MODES, iterate
from .linalg_core import LinalgError
from .oracle import (
    compare,
    naive_objective,
    oracle_full_solution,
    oracle_rank_solution,
    perturbation_sweep,
)

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4

AGREE_TOL = 1e-8
NAIVE_TOL = 1e-12
MONOTONE_TOL = 1e-10
UNCORRELATED_TOL = 1e-9

DEMO_LABEL = "synthetic demo data: seeded saturating mixture generated by this tool"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    x: str | None = None
    y: str | None = None
    transpose: bool = False
    demo: bool = False
    m: int = 6
    n: int = 5
    samples: int = 400
    nonlinearity: str = "tanh"
    noise: float = 0.05
    injections: str = ""
    ranks: list | None = None
    delta: float | None = 1e-10
    max_iter: int = 100
    seed: int | None = None
    b_mode: str = "direct"
    z_update: str = "joint"
    out: str = "out"
    trace: str | None = None
    axis: str | None = None
    values: list | None = None
    block: int | None = None
    estimator: str | None = None
    count: int = 1000
    magnitude: float = 1e-2
    timings: bool = False

    def echo(self) -> dict:
        d = asdict(self)
        if not self.timings:
            d.pop("timings")
        return d


_FIELDS = {f.name for f in fields(RunConfig)}


def _int_list(text, what: str) -> list[int]:
    if isinstance(text, list):
        items = text
    else:
        items = [t for t in str(text).split(",") if t.strip()]
    try:
        return [int(t) for t in items]
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a comma-separated list of integers, got {text!r}") from None


def _merge(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"config file {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config}: invalid JSON ({exc.msg}, line {exc.lineno})") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {args.config}: top level must be an object")
        for key, value in doc.items():
            name = key.replace("-", "_")
            if name not in _FIELDS:
                raise ConfigError(f"config file {args.config}: unknown key {key!r}")
            setattr(cfg, name, value)
    for name in _FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if args.no_delta:
        cfg.delta = None
    return _validate(cfg)


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.ranks is not None:
        cfg.ranks = _int_list(cfg.ranks, "ranks")
    if cfg.values is not None:
        cfg.values = _int_list(cfg.values, "values")
    try:
        parse_family(cfg.injections)
    except ValueError as exc:
        raise ConfigError(f"injections: {exc}") from None
    if cfg.b_mode not in B_MODES:
        raise ConfigError(f"b_mode must be one of {list(B_MODES)}, got {cfg.b_mode!r}")
    if cfg.z_update not in Z_MODES:
        raise ConfigError(f"z_update must be one of {list(Z_MODES)}, got {cfg.z_update!r}")
    if cfg.delta is not None and not float(cfg.delta) >= 0:
        raise ConfigError(f"delta must be >= 0, got {cfg.delta}")
    if int(cfg.max_iter) < 1:
        raise ConfigError(f"max_iter must be >= 1, got {cfg.max_iter}")
    if cfg.nonlinearity not in NONLINEARITIES:
        raise ConfigError(f"nonlinearity must be one of {sorted(NONLINEARITIES)}, got {cfg.nonlinearity!r}")
    if min(int(cfg.m), int(cfg.n), int(cfg.samples)) < 1:
        raise ConfigError("m, n and samples must all be >= 1")
    if int(cfg.count) < 1:
        raise ConfigError(f"count must be >= 1, got {cfg.count}")
    return cfg


# data ----------------------------------------------------------------------
def _need_seed(cfg: RunConfig, what: str) -> int:
    if cfg.seed is None:
        raise ConfigError(f"seed is required for {what}")
    return int(cfg.seed)


def _load(cfg: RunConfig):
    """``(x, y, source)`` from CSV files or the demo generator."""
    if cfg.x is not None or cfg.y is not None:
        if cfg.x is None or cfg.y is None:
            raise ConfigError("both --x and --y are needed when reading CSV files")
        x = load_csv(cfg.x, transpose=cfg.transpose)
        y = load_csv(cfg.y, transpose=cfg.transpose)
        if x.n_samples != y.n_samples:
            raise DataError(f"{cfg.x} has {x.n_samples} samples but {cfg.y} has {y.n_samples}")
        return x, y, {"kind": "csv", "x": cfg.x, "y": cfg.y, "transpose": cfg.transpose}
    if cfg.demo:
        seed = _need_seed(cfg, "the demo generator")
        x, y, params = make_data(seed, int(cfg.m), int(cfg.n), int(cfg.samples),
                                 cfg.nonlinearity, float(cfg.noise))
        return x, y, {"kind": "demo", "label": DEMO_LABEL, **params}
    raise ConfigError("no data: give --x and --y, or --demo")


def _profile(cfg: RunConfig, m: int, n: int, p: int) -> RankProfile:
    if cfg.ranks is None:
        raise ConfigError("ranks are required (e.g. --ranks 2,1)")
    if len(cfg.ranks) != p + 1:
        raise ConfigError(f"ranks has {len(cfg.ranks)} entries but the injection family "
                          f"needs p + 1 = {p + 1}")
    try:
        return RankProfile(tuple(cfg.ranks), m, n)
    except ValueError as exc:
        raise ConfigError(f"ranks: {exc}") from None


# output --------------------------------------------------------------------
def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(doc), indent=1, sort_keys=True, allow_nan=False) + "\n",
                    encoding="utf-8")


def _versions() -> dict:
    return {"optinject": __version__, "estimator_format": EST_VERSION,
            "numpy": np.__version__, "scipy": scipy.__version__}


def _base_report(cfg: RunConfig, command: str, source: dict, x, y) -> dict:
    return {
        "command": command,
        "config": cfg.echo(),
        "data": {"source": source, "m": x.dim, "n": y.dim, "samples": x.n_samples},
        "tolerances": {"agreement_rel": AGREE_TOL, "naive_rel": NAIVE_TOL,
                       "monotone_abs": MONOTONE_TOL, "uncorrelated_rel": UNCORRELATED_TOL},
        "versions": _versions(),
    }


def _rel_gap(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def _error_block(x, sys, profile) -> tuple[dict, Estimator, FullRankEstimator]:
    est = fit_rank_constrained(x, sys, profile)
    full = fit_full_rank(x, sys)
    pr, er = predicted_error_rank(x, sys, profile), empirical_error(x, est, sys)
    pf, ef = predicted_error_full(x, sys), empirical_error(x, full, sys)
    block = {
        "rank": {"predicted": pr, "empirical": er, "rel_gap": _rel_gap(pr, er),
                 "agree": _rel_gap(pr, er) <= AGREE_TOL},
        "full": {"predicted": pf, "empirical": ef, "rel_gap": _rel_gap(pf, ef),
                 "agree": _rel_gap(pf, ef) <= AGREE_TOL},
        "full_not_above_rank": pf <= pr + MONOTONE_TOL,
    }
    return block, est, full


def _system_checks(x, sys, profile) -> dict:
    ok, rep = check_pairwise_uncorrelated(sys, UNCORRELATED_TOL)
    diag = diagnostics(x, sys, profile)
    comps = [degree_comparison(x, sys, profile, g) for g in range(profile.degree)]
    for c in comps:
        c["error_p_below_g"] = c["error_p"] < c["error_g"]
    return {
        "decorrelation": {"ok": ok, "worst_pair": list(rep.worst_pair) if rep.worst_pair else None,
                          "worst_relative": rep.relative},
        "diagnostics": diag.to_dict(),
        "degree_comparisons": comps,
    }


# commands ------------------------------------------------------------------
def cmd_fit(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    x, y, source = _load(cfg)
    family = parse_family(cfg.injections)
    profile = _profile(cfg, x.dim, y.dim, family.degree)
    sys_ = decorrelate([y] + family.apply(y))
    errors, est, _ = _error_block(x, sys_, profile)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    est_path = out / "estimator.json"
    est_path.write_text(est.to_json(), encoding="utf-8")
    report = _base_report(cfg, "fit", source, x, y)
    report.update(_system_checks(x, sys_, profile))
    report["errors"] = errors
    report["estimator"] = str(est_path)
    report["ranks"] = {"ranks": list(profile.ranks), "r": profile.r, "c": profile.c}
    if cfg.timings:
        report["timings_ms"] = {"total": 1e3 * (time.perf_counter() - t0)}
    _write_json(out / "report.json", report)
    print(f"fit: predicted {errors['rank']['predicted']!r} empirical "
          f"{errors['rank']['empirical']!r} -> {est_path}")
    return EXIT_OK


def cmd_iterate(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    x, y, source = _load(cfg)
    family = parse_family(cfg.injections)
    profile = _profile(cfg, x.dim, y.dim, family.degree)
    res = iterate(x, y, family, profile, delta=cfg.delta, max_iter=int(cfg.max_iter),
                  b_mode=cfg.b_mode, z_update=cfg.z_update)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = Path(cfg.trace) if cfg.trace else out / "trace.csv"
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    res.trace.to_csv(trace_path, timings=cfg.timings)
    est_path = out / "estimator.json"
    est_path.write_text(res.estimator.to_json(), encoding="utf-8")
    eps = res.trace.eps
    steps = [b - a for a, b in zip(eps, eps[1:])]
    report = _base_report(cfg, "iterate", source, x, y)
    report["iteration"] = {
        "eps_initial": eps[0],
        "eps_final": res.eps,
        "loops": len(res.trace.records),
        "stop_reason": res.trace.stop_reason,
        "max_increase": max(steps, default=0.0),
        "monotone": all(s <= MONOTONE_TOL for s in steps),
        "branches": [r.branch for r in res.trace.records],
        "solvers": sorted({s for r in res.trace.records for s in r.solvers}),
        "all_uncorrelated": all(r.uncorrelated for r in res.trace.records),
        "trace": str(trace_path),
    }
    report["estimator"] = str(est_path)
    report["initial_predicted_error"] = predicted_error_rank(x, res.initial_system, profile)
    if cfg.timings:
        report["timings_ms"] = {"total": 1e3 * (time.perf_counter() - t0)}
    _write_json(out / "report.json", report)
    print(f"iterate: eps {eps[0]!r} -> {res.eps!r} after {len(res.trace.records)} "
          f"loop(s), stop: {res.trace.stop_reason}")
    return EXIT_OK


def _sweep_points(cfg: RunConfig, family: InjectionFamily, m: int, n: int):
    """Yield ``(value, family, ranks)`` for each sweep value."""
    if cfg.axis not in ("rank", "q", "degree"):
        raise ConfigError(f"axis must be one of rank, q, degree; got {cfg.axis!r}")
    if not cfg.values:
        raise ConfigError("values are required for sweep (e.g. --values 1,2,3)")
    vals = cfg.values
    if any(b < a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"sweep values must be non-decreasing, got {vals}")
    p = family.degree
    if cfg.axis == "degree":
        if cfg.ranks is None or len(cfg.ranks) != p + 1:
            raise ConfigError(f"degree sweep needs ranks for the full family (p + 1 = {p + 1})")
        for v in vals:
            if not 0 <= v <= p:
                raise ConfigError(f"degree value {v} outside 0..{p}")
            yield v, family.prefix(v), cfg.ranks[: v + 1]
        return
    block = cfg.block
    if cfg.axis == "rank":
        for v in vals:
            if block is None:
                ranks = [v] * (p + 1)
            else:
                if cfg.ranks is None or not 0 <= block <= p:
                    raise ConfigError(f"block must be in 0..{p} and ranks must be given")
                ranks = list(cfg.ranks)
                ranks[block] = v
            yield v, family, ranks
        return
    # q axis: resize one lift injection, keeping its seed so draws are nested
    if cfg.ranks is None:
        raise ConfigError("ranks are required for a q sweep")
    block = p if block is None else block
    if not 1 <= block <= p or not isinstance(family.generators[block - 1], LiftInjection):
        raise ConfigError(f"q sweep needs a lift injection at block {block}")
    gen = family.generators[block - 1]
    for v in vals:
        if v < 1:
            raise ConfigError(f"q values must be >= 1, got {v}")
        gens = list(family.generators)
        gens[block - 1] = LiftInjection(v, gen.seed)
        yield v, InjectionFamily(tuple(gens)), cfg.ranks


def cmd_sweep(cfg: RunConfig) -> int:
    x, y, source = _load(cfg)
    family = parse_family(cfg.injections)
    rows = []
    for value, fam, ranks in _sweep_points(cfg, family, x.dim, y.dim):
        prof = _profile(RunConfig(ranks=list(ranks)), x.dim, y.dim, fam.degree)
        sys_ = decorrelate([y] + fam.apply(y))
        est = fit_rank_constrained(x, sys_, prof)
        rows.append((value, predicted_error_rank(x, sys_, prof), empirical_error(x, est, sys_)))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("value,predicted,empirical\n")
        for v, pr, em in rows:
            fh.write(f"{v},{pr!r},{em!r}\n")
    steps = [b[2] - a[2] for a, b in zip(rows, rows[1:])]
    report = _base_report(cfg, "sweep", source, x, y)
    report["sweep"] = {"axis": cfg.axis, "csv": str(csv_path),
                       "rows": [list(r) for r in rows],
                       "non_increasing": all(s <= MONOTONE_TOL for s in steps)}
    _write_json(out / "report.json", report)
    print(f"sweep: {len(rows)} row(s) -> {csv_path}")
    return EXIT_OK


def cmd_demo(cfg: RunConfig) -> int:
    seed = _need_seed(cfg, "demo")
    x, y, params = make_data(seed, int(cfg.m), int(cfg.n), int(cfg.samples),
                             cfg.nonlinearity, float(cfg.noise))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_csv(x, out / "x.csv")
    save_csv(y, out / "y.csv")
    _write_json(out / "manifest.json", {
        "label": DEMO_LABEL, "generator": params,
        "files": {"x": "x.csv", "y": "y.csv"},
        "layout": "rows are vector components, columns are samples",
        "versions": _versions(),
    })
    print(f"demo: wrote x.csv ({x.dim}x{x.n_samples}) and y.csv ({y.dim}x{y.n_samples}) to {out}")
    return EXIT_OK


def _product_gap(name: str, a: np.ndarray, b: np.ndarray, tol: float, inst: dict) -> dict:
    """Frobenius gap between two block products, relative to ``max(1, ||b||)``."""
    gap = float(np.linalg.norm(a - b))
    ref = float(np.linalg.norm(b))
    rel = gap / max(1.0, ref)
    return {"name": name, "primary": float(np.linalg.norm(a)), "oracle": ref,
            "abs_gap": gap, "rel_gap": rel, "tol": tol, "passed": rel <= tol,
            "instance": inst}


def cmd_verify(cfg: RunConfig) -> int:
    x, y, source = _load(cfg)
    family = parse_family(cfg.injections)
    profile = _profile(cfg, x.dim, y.dim, family.degree)
    seed = _need_seed(cfg, "verify (perturbation sweeps)")
    sys_ = decorrelate([y] + family.apply(y))
    inst = {"m": x.dim, "n": y.dim, "samples": x.n_samples, "seed": seed,
            "injections": family.spec, "ranks": list(profile.ranks)}

    est = fit_rank_constrained(x, sys_, profile)
    full = fit_full_rank(x, sys_)
    if cfg.estimator:
        try:
            loaded = estimator_from_json(Path(cfg.estimator).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"{cfg.estimator}: cannot read ({exc.strerror})") from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{cfg.estimator}: malformed estimator file ({exc})") from exc
        expected = [(x.dim, q) for q in sys_.dims]
        got = [p.shape for p in loaded.products()]
        if got != expected:
            raise DataError(f"{cfg.estimator}: block shapes {got} do not match data {expected}")
        if isinstance(loaded, FullRankEstimator):
            full = loaded
        else:
            est = loaded

    checks = []
    ok, rep = check_pairwise_uncorrelated(sys_, UNCORRELATED_TOL)
    checks.append({"name": "decorrelation", "primary": rep.worst_value, "oracle": 0.0,
                   "abs_gap": rep.worst_value, "rel_gap": rep.relative,
                   "tol": UNCORRELATED_TOL, "passed": ok, "instance": inst})
    for j, s in enumerate(est.products()):
        o = oracle_rank_solution(x, sys_.z[j], profile.ranks[j], floor=sys_.floors[j])
        checks.append(_product_gap(f"rank_block_{j}_two_path", s, o, AGREE_TOL, inst))
    for j, s in enumerate(full.products()):
        o = oracle_full_solution(x, sys_.z[j], floor=sys_.floors[j])
        checks.append(_product_gap(f"full_block_{j}_two_path", s, o, AGREE_TOL, inst))
    er = empirical_error(x, est, sys_)
    ef = empirical_error(x, full, sys_)
    checks.append(compare("rank_error_formula", er, predicted_error_rank(x, sys_, profile),
                          AGREE_TOL, inst).to_dict())
    checks.append(compare("full_error_formula", ef, predicted_error_full(x, sys_),
                          AGREE_TOL, inst).to_dict())
    checks.append(compare("rank_naive_objective", er, naive_objective(x, est.blocks, sys_.z),
                          NAIVE_TOL, inst).to_dict())
    checks.append(compare("full_naive_objective", ef, naive_objective(x, full.blocks, sys_.z),
                          NAIVE_TOL, inst).to_dict())
    for name, e in (("rank_perturbation_sweep", est), ("full_perturbation_sweep", full)):
        r = perturbation_sweep(x, sys_, e, count=int(cfg.count),
                               magnitude=float(cfg.magnitude), seed=seed).to_dict()
        r["name"] = name
        r["instance"] = {**inst, **r["instance"]}
        checks.append(r)

    failed = [c["name"] for c in checks if not c["passed"]]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report = _base_report(cfg, "verify", source, x, y)
    report["checks"] = checks
    report["failed"] = failed
    report["passed"] = not failed
    _write_json(out / "verify.json", report)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']} "
              f"abs_gap={c['abs_gap']:.3e} rel_gap={c['rel_gap']:.3e} tol={c['tol']:.0e}")
    return EXIT_OK if not failed else EXIT_VERIFY


COMMANDS = {"fit": cmd_fit, "iterate": cmd_iterate, "sweep": cmd_sweep,
            "demo": cmd_demo, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="JSON file with the same keys as the flags; flags override it")
    a("--x", help="CSV of target samples (rows = components, columns = samples)")
    a("--y", help="CSV of observation samples, same layout as --x")
    a("--transpose", action="store_const", const=True, default=None,
      help="CSV rows are samples instead of components")
    a("--demo", action="store_const", const=True, default=None,
      help="use the seeded synthetic generator instead of CSV files")
    a("--m", type=int, help="demo: target dimension")
    a("--n", type=int, help="demo: observation dimension")
    a("--samples", type=int, help="demo: number of samples")
    a("--nonlinearity", help=f"demo: one of {', '.join(sorted(NONLINEARITIES))}")
    a("--noise", type=float, help="demo: additive noise level")
    a("--injections", help="e.g. poly:2,lift:4:7,fourier:6:1 (empty = none)")
    a("--ranks", help="block ranks r_0,...,r_p, e.g. 2,1,1")
    a("--delta", type=float, help="iterate: stop when (eps_new - eps_old)^2 <= delta")
    a("--no-delta", action="store_true", help="iterate: disable the tolerance stop")
    a("--max-iter", dest="max_iter", type=int, help="iterate: loop cap")
    a("--seed", type=int, help="seed for the demo generator and verify sweeps")
    a("--b-mode", dest="b_mode", choices=B_MODES, help="iterate: injection recovery target")
    a("--z-update", dest="z_update", choices=Z_MODES, help="iterate: z-step rule")
    a("--out", help="output directory")
    a("--trace", help="iterate: trace CSV path (default <out>/trace.csv)")
    a("--axis", choices=("rank", "q", "degree"), help="sweep: axis")
    a("--values", help="sweep: comma-separated non-decreasing values")
    a("--block", type=int, help="sweep: vary only this block (rank or q axis)")
    a("--estimator", help="verify: estimator JSON to check instead of a fresh fit")
    a("--count", type=int, help="verify: perturbation candidates (default 1000)")
    a("--magnitude", type=float, help="verify: relative perturbation size (default 1e-2)")
    a("--timings", action="store_const", const=True, default=None,
      help="record wall-clock timings (makes outputs run-dependent)")

    parser = argparse.ArgumentParser(prog="optinject",
                                     description="Rank-constrained estimators with optimized injections.")
    parser.add_argument("--version", action="version", version=f"optinject {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"fit": "fit closed-form estimators and report errors",
             "iterate": "refine the injections by alternating minimization",
             "sweep": "tabulate the error along a rank, q or degree axis",
             "demo": "write seeded synthetic x.csv / y.csv",
             "verify": "check a fit against the independent oracles"}
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _fail(kind: str, msg: str, code: int) -> int:
    line = " ".join(str(msg).split())
    print(f"optinject: {kind}-error: {line}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage; normalise its exit code
        code = exc.code if isinstance(exc.code, int) else EXIT_CONFIG
        return EXIT_OK if code == 0 else EXIT_CONFIG
    try:
        cfg = _merge(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except DataError as exc:
        return _fail("data", exc, EXIT_DATA)
    except (NumericalError, LinalgError, FloatingPointError) as exc:
        return _fail("numerical", exc, EXIT_NUMERIC)
    except OSError as exc:
        return _fail("data", f"{exc.filename or ''}: {exc.strerror}", EXIT_DATA)
    except ValueError as exc:
        return _fail("config", exc, EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
