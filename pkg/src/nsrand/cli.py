"""Command line entry point: ``nsrand <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import nsrf
from .config import load_config, serialize_config
from .decomp import CubeFamily, DecompParams, build_cubes, inventory
from .errors import ConfigError, NSRandError, NumericalGuardError, StatisticalPowerError
from .mc import largest_shell, run_experiment
from .parallel import default_workers
from .norms import NormSpec
from .profiles import KINDS, make_profile
from .randomize import RandomDraw, min_admissible_a, randomize
from .solver import SolverConfig, energy_report, integrate
from .spectral import SpectralGrid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_POWER = 4

log = logging.getLogger("nsrand")

CRITERIA = {
    1: "Partition of unity",
    2: "Frame bounds",
    3: "Uniform Bernstein constant",
    4: "Moment growth",
    5: "Gaussian tails",
    6: "Almost-sure membership proxy",
    7: "Solver oracle",
    8: "Local well-posedness (Picard)",
    9: "Global 2D ensemble",
    10: "Determinism across worker counts",
}


def _dump(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


# -- subcommands --------------------------------------------------------------

def cmd_decompose(args) -> int:
    params = DecompParams(args.d, args.a, args.eps, args.s, args.n_max)
    fam = build_cubes(params)
    _dump(inventory(fam, include_cubes=not args.no_cubes), args.out)
    return EXIT_OK


def cmd_profile(args) -> int:
    grid = SpectralGrid(args.d, args.L, args.M)
    kw = {}
    if args.kind == "power-law" and args.band is not None:
        kw["band"] = args.band
    if args.kind == "single-shell":
        kw["N"] = args.shell
    u = make_profile(args.kind, args.s, grid, seed=args.seed, **kw)
    nsrf.write(args.out, u)
    return EXIT_OK


def cmd_randomize(args) -> int:
    f = nsrf.read(args.profile)
    f = f.with_spectral()
    a = args.a if args.a is not None else min_admissible_a(args.s, args.eps, f.grid.d)
    n_max = args.n_max if args.n_max is not None else largest_shell(f.grid)
    fam = CubeFamily(DecompParams(f.grid.d, a, args.eps, args.s, n_max))
    u = randomize(f, fam, RandomDraw(args.seed, args.sample), hermitian=True)
    nsrf.write(args.out, u)
    meta = {"seed": args.seed, "sample_index": args.sample, "a": a, "epsilon": args.eps, "s": args.s,
            "n_max": n_max, "hermitian": True, "profile": str(args.profile),
            "min_admissible_a": min_admissible_a(args.s, args.eps, f.grid.d)}
    _dump(meta, args.out + ".json")
    return EXIT_OK


def cmd_norms(args) -> int:
    u = nsrf.read(args.inp)
    spec = NormSpec.parse(args.spec)
    res = spec.evaluate(u)
    res.setdefault("blocks", [])
    res["spec"] = str(spec)
    _dump(res, args.out)
    return EXIT_OK


def cmd_mc(args) -> int:
    cfg = load_config(args.config)
    workers = args.workers or default_workers()
    report = run_experiment(cfg, workers=workers)
    report["config_text"] = serialize_config(cfg)
    _dump(report, args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    u0 = nsrf.read(args.init)
    cfg = SolverConfig(args.dt, args.T, scheme=args.scheme, dealias=not args.no_dealias,
                       cfl_guard=args.cfl, nu=args.nu, adaptive=args.adaptive,
                       snapshot_every=args.snapshot_every)
    traj = integrate(u0, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "series.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "energy", "enstrophy", "max_div"])
        for row in zip(traj.times, traj.energy, traj.enstrophy, traj.max_divergence):
            w.writerow([repr(float(x)) for x in row])
    for i, (t, snap) in enumerate(zip(traj.snapshot_times, traj.snapshots)):
        nsrf.write(out / f"snapshot_{i:04d}.nsrf", snap)
    summary = {"status": traj.status, "message": traj.message, "steps": traj.steps,
               "snapshot_times": traj.snapshot_times, "T_reached": traj.times[-1],
               "energy": energy_report(traj, check=False).to_dict(),
               "max_divergence": max(traj.max_divergence), "config": vars(args) | {"func": None}}
    _dump(summary, str(out / "summary.json"))
    if traj.status != "ok":
        log.error("run stopped early: %s", traj.message)
        return EXIT_GUARD
    energy_report(traj)
    return EXIT_OK


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def render_report(docs: list[tuple[str, dict]]) -> str:
    """Markdown summary of JSON artifacts (acceptance results, mc and solve reports)."""
    lines = ["# nsrand report", ""]
    results = {}
    for _, doc in docs:
        for c in doc.get("criteria", []):
            results[int(c["criterion"])] = c
    lines += ["## Acceptance criteria", "", "| # | Criterion | Status | Details |", "|---|---|---|---|"]
    for n, name in CRITERIA.items():
        c = results.get(n)
        status = "not run" if c is None else ("PASS" if c.get("passed") else "FAIL")
        detail = "" if c is None else c.get("summary", "").replace("|", "\\|")
        lines.append(f"| {n} | {name} | {status} | {detail} |")
    lines.append("")
    for name, doc in docs:
        if "moments" in doc and "tail" in doc:
            m, t, h = doc["moments"], doc["tail"], doc["headline"]
            lines += [f"## Monte Carlo: {name}", "",
                      f"- norm: `{doc['norm']}`, a = {doc['a']} (admissible minimum {doc['min_admissible_a']})"
                      + (" **hypothesis violated**" if doc["hypothesis_violated"] else ""),
                      f"- orthogonality ratio {_fmt(doc['orthogonality']['ratio'])}, K = {doc['orthogonality']['K']}",
                      f"- moment slope {_fmt(m['fit_exponent'])} over rho = {m['rho_list']}",
                      f"- tail fit r^2: lambda^2 {_fmt(t['r_squared'])}, lambda {_fmt(t['linear_r_squared'])}"
                      f" (preferred: {t['preferred_model']})",
                      f"- median {_fmt(h['median'])} at M = {h['M']}, {_fmt(h['median_refined'])} at M = "
                      f"{h['M_refined']} (change {_fmt(h['relative_change'])})", ""]
        elif "status" in doc and "energy" in doc:
            e = doc["energy"]
            lines += [f"## Solver run: {name}", "",
                      f"- status {doc['status']}, {doc['steps']} steps, reached t = {_fmt(doc['T_reached'])}",
                      f"- energy {_fmt(e['initial_energy'])} -> {_fmt(e['final_energy'])}, balance defect "
                      f"{_fmt(e['balance_defect'])}, monotone {e['monotone']}", ""]
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    docs = []
    for p in args.inputs:
        path = Path(p)
        if path.is_dir():
            path = path / "summary.json"
        try:
            docs.append((str(p), json.loads(path.read_text())))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {p}: {exc}") from None
    text = render_report(docs)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _pow2(text: str) -> int:
    v = int(text)
    if v <= 0 or v & (v - 1):
        raise argparse.ArgumentTypeError(f"{text} is not a power of two")
    return v


def _length(text: str) -> float:
    t = text.strip().lower().replace("*", "")
    if t.endswith("pi"):
        coef = t[:-2]
        return (float(coef) if coef else 1.0) * math.pi
    return float(t)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsrand", description="Randomized Navier-Stokes data laboratory.")
    p.add_argument("--workers", type=int, default=0, help="worker processes (default: available cores)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("decompose", help="emit the cube inventory as JSON")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--a", type=int, default=0)
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--s", type=float, default=0.0)
    s.add_argument("--n-max", type=_pow2, default=8)
    s.add_argument("--no-cubes", action="store_true", help="shell summary only")
    s.add_argument("--out")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("profile", help="write a test profile as NSRF")
    s.add_argument("--kind", choices=KINDS, default="power-law")
    s.add_argument("--s", type=float, default=0.0)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--M", type=_pow2, default=256)
    s.add_argument("--L", type=_length, default=2 * math.pi, help="box side, e.g. 8pi")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--band", type=float, help="zero frequencies with max|k_i| above this")
    s.add_argument("--shell", type=int, default=1, help="shell N for single-shell")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("randomize", help="randomize a profile (hermitian pairing)")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--sample", type=int, required=True)
    s.add_argument("--profile", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--s", type=float, default=0.0)
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--a", type=int, help="narrowing exponent (default: smallest admissible)")
    s.add_argument("--n-max", type=_pow2, help="largest shell (default: largest the grid covers)")
    s.set_defaults(func=cmd_randomize)

    s = sub.add_parser("norms", help="evaluate a norm of an NSRF field")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--spec", required=True, help='e.g. "Bdot:s=-0.8,p=20,q=4"')
    s.add_argument("--out")
    s.set_defaults(func=cmd_norms)

    s = sub.add_parser("mc", help="Monte Carlo experiment from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker processes")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("solve", help="integrate Navier-Stokes from an NSRF datum")
    s.add_argument("--init", required=True)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.add_argument("--scheme", choices=("ifrk4", "etdrk4"), default="ifrk4")
    s.add_argument("--adaptive", action="store_true", help="shrink dt to respect the CFL guard")
    s.add_argument("--cfl", type=float, default=0.5)
    s.add_argument("--nu", type=float, default=1.0)
    s.add_argument("--snapshot-every", type=float)
    s.add_argument("--no-dealias", action="store_true")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("report", help="merge JSON artifacts into a Markdown summary")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StatisticalPowerError as exc:
        log.error("%s", exc)
        return EXIT_POWER
    except NumericalGuardError as exc:
        log.error("%s", exc)
        return EXIT_GUARD
    except NSRandError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
