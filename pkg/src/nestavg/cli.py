"""Command line entry point: ``nestavg {sim, oracle, asym, verify}``.

Exit codes: 0 success, 2 invalid input, 3 failed verification.
"""
from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__, asymptotics, simlab, verify
from .errors import ConfigError, NestavgError

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 2, 3

log = logging.getLogger("nestavg")


def config_digest(cfg) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return cfg


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def parse_range(text: str) -> list[int]:
    """``"1..10"`` or ``"1,2,4"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(t) for t in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse integer list {text!r}") from exc


def parse_floats(text: str) -> list[float]:
    try:
        return [math.inf if t.strip().lower() in ("inf", "infinity") else float(t) for t in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _guard(paths, force: bool):
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise ConfigError(f"refusing to overwrite {', '.join(existing)}; pass --force")


def _write_manifest(out_dir: Path, command: str, cfg: dict, seed, outputs, t0: float, force: bool):
    path = out_dir / f"manifest_{command}.json"
    _guard([path], force)
    manifest = {
        "command": command,
        "config_digest": config_digest(cfg),
        "config": cfg,
        "seed": seed,
        "version": __version__,
        "outputs": [str(p) for p in outputs],
        "wall_time_s": time.time() - t0,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


# ---------------------------------------------------------------------------- sim

SIM_KEYS = {"example", "n", "decay", "decay_param", "r2", "rho1", "rho2", "replications", "seed",
            "methods", "fixed_design", "M", "p", "sigma2"}
GRID_KEYS = ("n", "decay_param", "r2")


def expand_sim_config(cfg: dict) -> list[list[simlab.DgpConfig]]:
    """One list of configs per output file, i.e. per (example, decay family)."""
    blocks = cfg.get("studies", [cfg])
    groups: dict[tuple, list] = {}
    for block in blocks:
        unknown = set(block) - SIM_KEYS - {"studies"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        base = {k: v for k, v in block.items() if k in SIM_KEYS and k not in GRID_KEYS}
        for ex, dec in itertools.product(_as_list(block.get("example", "ex1")), _as_list(block.get("decay", "algebraic"))):
            for n, a, r2 in itertools.product(*(_as_list(block.get(k, d)) for k, d in zip(GRID_KEYS, (500, 1.0, 0.75)))):
                c = simlab.DgpConfig(**{**base, "example": ex, "decay": dec, "n": int(n), "decay_param": float(a), "r2": float(r2)})
                groups.setdefault((ex, dec), []).append(c)
    return list(groups.values())


def case_name(cfg: simlab.DgpConfig) -> str:
    return f"{cfg.example}_case{1 if cfg.decay == 'algebraic' else 2}"


def cmd_sim(args) -> int:
    t0 = time.time()
    raw = load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.fixed_design:
        raw["fixed_design"] = True
    groups = expand_sim_config(raw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    planned = []
    for g in groups:
        stem = out / case_name(g[0])
        planned += [stem.with_suffix(".csv"), stem.with_suffix(".png")]
        if args.audit:
            planned.append(Path(f"{stem}_audit.jsonl"))
    _guard(planned + [out / "manifest_sim.json"], args.force)

    from . import plotting

    outputs = []
    for g in groups:
        stem = out / case_name(g[0])
        results = []
        for c in g:
            log.info("running %s n=%d decay=%g r2=%g", case_name(c), c.n, c.decay_param, c.r2)
            results.append(simlab.run_study(c, jobs=args.jobs, audit=args.audit))
        simlab.write_sim_csv(stem.with_suffix(".csv"), results)
        plotting.plot_sim(results, stem.with_suffix(".png"), title=case_name(g[0]))
        outputs += [stem.with_suffix(".csv"), stem.with_suffix(".png")]
        if args.audit:
            ap = Path(f"{stem}_audit.jsonl")
            with open(ap, "w") as fh:
                for res in results:
                    for rec in res.audit:
                        fh.write(json.dumps({"n": res.cfg.n, "r2": res.cfg.r2, "decay_param": res.cfg.decay_param, **rec}) + "\n")
            outputs.append(ap)
        for res in results:
            print(f"{case_name(res.cfg)} n={res.cfg.n} decay={res.cfg.decay_param:g} r2={res.cfg.r2:g}: "
                  + ", ".join(f"{m}={v:.4f}" for m, v in zip(res.methods, res.normalized)))
    _write_manifest(out, "sim", raw, raw.get("seed", 0), outputs, t0, args.force)
    return EXIT_OK


# ---------------------------------------------------------------------------- oracle

def cmd_oracle(args) -> int:
    t0 = time.time()
    raw = load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    n_grid = [int(n) for n in _as_list(raw.pop("n_grid", [500, 2000, 8000, 32000]))]
    shortcut = bool(raw.pop("shortcut", True))
    unknown = set(raw) - SIM_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    cfg = simlab.DgpConfig(**{**raw, "n": n_grid[0]})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = out / f"oracle_{case_name(cfg)}"
    paths = [stem.with_suffix(".csv"), stem.with_suffix(".png")]
    _guard(paths + [out / "manifest_oracle.json"], args.force)
    rows = simlab.oracle_diagnostics(cfg, n_grid, shortcut=shortcut)
    simlab.write_diagnostics_csv(paths[0], rows)
    from . import plotting

    plotting.plot_diagnostics(rows, paths[1], title=case_name(cfg))
    for r in rows:
        print(f"n={r.n} M={r.M} m*={r.m_star} m**={r.m_star_star} delta/R(m*)={r.ratio:.4f} {r.regime}")
    _write_manifest(out, "oracle", {**raw, "n_grid": n_grid, "shortcut": shortcut}, cfg.seed, paths, t0, args.force)
    return EXIT_OK


# ---------------------------------------------------------------------------- asym

ASYM_COLUMNS = ("alpha", "kappa", "N", "psi_star", "limit_ratio")


def cmd_asym(args) -> int:
    t0 = time.time()
    kappas = parse_floats(args.kappa)
    Ns = parse_range(args.N)
    if any(N < 1 for N in Ns):
        raise ConfigError("N values must be >= 1")
    out = Path(args.out)
    if out.suffix == ".csv":
        out.parent.mkdir(parents=True, exist_ok=True)
        csv_path = out
    else:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "asym.csv"
    png_path = csv_path.with_suffix(".png")
    manifest_dir = csv_path.parent
    _guard([csv_path, png_path, manifest_dir / "manifest_asym.json"], args.force)

    table = {}
    lines = [",".join(ASYM_COLUMNS)]
    for kappa in kappas:
        ratios = []
        for N in Ns:
            model = asymptotics.DecayModel("algebraic", args.alpha, kappa=kappa, N=N)
            psi = asymptotics.psi_star(N, args.alpha, kappa)
            ratio = asymptotics.limit_ratio(model)
            ratios.append(ratio)
            lines.append(",".join([f"{args.alpha:.16e}", "inf" if math.isinf(kappa) else f"{kappa:.16e}", str(N),
                                   f"{psi:.16e}", f"{ratio:.16e}"]))
        table[kappa] = (Ns, ratios)
    csv_path.write_text("\n".join(lines) + "\n")
    from . import plotting

    plotting.plot_limit_ratio(table, png_path, args.alpha)
    print("\n".join(lines))
    cfg = {"alpha": args.alpha, "kappa": [str(k) for k in kappas], "N": Ns}
    _write_manifest(manifest_dir, "asym", cfg, None, [csv_path, png_path], t0, args.force)
    return EXIT_OK


# ---------------------------------------------------------------------------- verify

def cmd_verify(args) -> int:
    seed = 7 if args.seed is None else args.seed
    checks = verify.run_battery(seed=seed, instances=args.instances)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: $NESTAVG_JOBS or logical cores)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--audit", action="store_true", help="write per-replicate choices")
    common.add_argument("--fixed-design", action="store_true", help="draw the design once per setting")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nestavg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nestavg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sim", parents=[common], help="Monte Carlo study")
    sub.add_parser("oracle", parents=[common], help="exact oracle diagnostics over an n-grid")
    p = sub.add_parser("asym", parents=[common], help="limiting risk-ratio curves")
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--kappa", default="0.5,1,2", help="comma list; 'inf' allowed")
    p.add_argument("--N", default="1..10", help="range like 1..10 or list like 1,2,4")
    p = sub.add_parser("verify", parents=[common], help="oracle inequality battery")
    p.add_argument("--instances", type=int, default=200)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.jobs is None:
            args.jobs = simlab.default_jobs()
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        handler = {"sim": cmd_sim, "oracle": cmd_oracle, "asym": cmd_asym, "verify": cmd_verify}[args.command]
        return handler(args)
    except (NestavgError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
