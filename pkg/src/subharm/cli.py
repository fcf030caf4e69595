"""Command-line front end.

Every subcommand writes its outputs plus ``manifest.json`` into ``--out``.
Settings come from an optional JSON ``--config`` file; explicit flags win.
Exit codes: 0 success, 1 internal invariant violation, 2 user input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .atomize import atomize_pair, check_pair
from .counterexample import UPhiSpec, best_rounding, build_u_phi, sharpness_ratio
from .decomposition import (
    SlowlyVarying,
    annular_split,
    heavy_tail_schedule,
    normalize_origin,
    verify_decomposition,
    verify_schedule,
    write_decomposition_csv,
)
from .measure import Measure, MeasureError, generic_origin_shift, read_measure, verify_generic_origin
from .metrics import error_report, integrated_counting, circle_mean
from .partition import LogRectangle, partition_with_stats, verify_partition, write_pieces_csv
from .potential import ConsistencyError, approximate, write_zeros

DEFAULTS = {
    "input": None,
    "generator": None,
    "phi": "const:2",
    "count": 12,
    "max_radius": None,
    "psi": "log",
    "r_grid": "pow2:4:12",
    "tol": 1e-3,
    "seed": 0,
    "out": "out",
    "alpha": "0",
    "rect": None,
}


class UserInputError(Exception):
    """Bad flags, configuration or input files."""


def parse_psi(spec: str) -> SlowlyVarying:
    """``log``, ``exp-sqrt-log[:c]``, ``const:c`` or ``sigma-inv-log``."""
    name, _, arg = spec.partition(":")
    try:
        if name == "log":
            return SlowlyVarying.log_e()
        if name == "exp-sqrt-log":
            return SlowlyVarying.exp_sqrt_log(float(arg) if arg else 1.0)
        if name == "const":
            return SlowlyVarying.constant(float(arg))
        if name == "sigma-inv-log":
            return SlowlyVarying.from_sigma(lambda t: 1.0 / np.log(np.e * t), name="1/log(et)")
    except (ValueError, MeasureError) as exc:
        raise UserInputError(f"bad psi spec {spec!r}: {exc}") from None
    raise UserInputError(f"unknown psi spec {spec!r}")


def parse_grid(spec) -> list[float]:
    """``pow2:a:b`` (radii ``2**a .. 2**b``) or a comma list of radii."""
    if isinstance(spec, (list, tuple)):
        vals = [float(x) for x in spec]
    elif str(spec).startswith("pow2:"):
        try:
            _, a, b = str(spec).split(":")
            vals = [2.0 ** k for k in range(int(a), int(b) + 1)]
        except ValueError:
            raise UserInputError(f"bad grid {spec!r}") from None
    else:
        try:
            vals = [float(x) for x in str(spec).split(",") if x.strip()]
        except ValueError:
            raise UserInputError(f"bad grid {spec!r}") from None
    if not vals or any(not (v > 0 and math.isfinite(v)) for v in vals) or any(
        b <= a for a, b in zip(vals, vals[1:])
    ):
        raise UserInputError("grid must be a nonempty increasing list of positive radii")
    return vals


def _alphas(spec) -> list[float]:
    try:
        vals = [float(x) for x in str(spec).split(",")]
    except ValueError:
        raise UserInputError(f"bad alpha list {spec!r}") from None
    if any(not 0 <= a < 1 for a in vals):
        raise UserInputError("alpha must lie in [0, 1)")
    return vals


def load_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UserInputError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise UserInputError(f"unknown config keys {sorted(unknown)}")
        cfg.update(data)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def load_measure(cfg: dict) -> Measure:
    if cfg["input"] and cfg["generator"]:
        raise UserInputError("give either --input or --generator")
    if cfg["generator"] == "u_phi":
        phi = parse_psi(cfg["phi"])
        mr = cfg["max_radius"]
        spec = UPhiSpec(phi, count=None if mr else int(cfg["count"]), max_radius=mr)
        return build_u_phi(spec)
    if cfg["generator"]:
        raise UserInputError(f"unknown generator {cfg['generator']!r}")
    if not cfg["input"]:
        raise UserInputError("no input measure (use --input or --generator)")
    try:
        return read_measure(cfg["input"])
    except OSError as exc:
        raise UserInputError(str(exc)) from None
    except MeasureError as exc:
        raise UserInputError(f"{cfg['input']}: {exc}") from None


def _out(cfg: dict) -> Path:
    p = Path(cfg["out"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_manifest(out: Path, command: str, cfg: dict, extra: dict | None = None) -> None:
    data = {
        "command": command,
        "config": cfg,
        "seed": cfg["seed"],
        "versions": {
            "subharm": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extra:
        data["results"] = extra
    with open(out / "manifest.json", "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _rect(cfg: dict, nu: Measure) -> LogRectangle:
    if cfg["rect"]:
        try:
            vals = [float(x) for x in str(cfg["rect"]).split(",")]
            return LogRectangle(*vals)
        except (TypeError, ValueError, MeasureError) as exc:
            raise UserInputError(f"bad rectangle {cfg['rect']!r}: {exc}") from None
    x, y = nu.positions.real, nu.positions.imag
    w = max(np.ptp(x), np.ptp(y), 1e-9)
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(y.min()), float(y.max())
    return LogRectangle(x0, max(x1, x0 + w * 1e-6), y0, max(y1, y0 + w * 1e-6))


# ---------------------------------------------------------------------------
# Subcommands


def cmd_approximate(cfg: dict) -> int:
    m = load_measure(cfg)
    psi = parse_psi(cfg["psi"])
    out = _out(cfg)
    res = approximate(m, psi, seed=int(cfg["seed"]))
    write_zeros(res.zeros.sorted(), out / "zeros.txt")
    write_decomposition_csv(res.decomposition, out / "decomposition.csv")
    if len(m):
        rep = error_report(m, res.zeros, psi, parse_grid(cfg["r_grid"]), rtol=float(cfg["tol"]))
    else:
        rep = error_report(m, res.zeros, psi, [], rtol=float(cfg["tol"]))
    rep.to_csv(out / "error_report.csv")
    write_manifest(out, "approximate", cfg, {
        "zero_count": res.zeros.count,
        "total_mass": m.total_mass(),
        "annuli": len(res.decomposition.mu1),
        "blocks": len(res.schedule.pieces),
        "truncation_radius": res.truncation_radius,
        "shift": [res.shift.real, res.shift.imag],
    })
    return 0


def cmd_partition(cfg: dict) -> int:
    nu = load_measure(cfg)
    out = _out(cfg)
    rect = _rect(cfg, nu)
    try:
        pieces, stats = partition_with_stats(rect, nu)
    except MeasureError as exc:
        raise UserInputError(str(exc)) from None
    write_pieces_csv(pieces, out / "pieces.csv")
    rep = verify_partition(pieces, rect, nu, seed=int(cfg["seed"]))
    write_manifest(out, "partition", cfg, {"pieces": len(pieces), "properties": rep.as_dict(),
                                           "third_rule_ok_fraction": stats.ok_fraction})
    return 0 if rep.all_pass else 1


def cmd_atomize(cfg: dict) -> int:
    nu = load_measure(cfg)
    out = _out(cfg)
    rect = _rect(cfg, nu)
    try:
        pieces, _ = partition_with_stats(rect, nu)
    except MeasureError as exc:
        raise UserInputError(str(exc)) from None
    worst, violations = 0.0, 0
    with open(out / "pairs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["piece", "omega1_re", "omega1_im", "omega2_re", "omega2_im", "d", "moment_error"])
        for i, p in enumerate(pieces):
            pair = atomize_pair(p)
            chk = check_pair(pair)
            worst = max(worst, chk.moment_error)
            violations += chk.center_violations + chk.spread_violations
            w.writerow([i] + [repr(float(x)) for x in (pair.omega1.real, pair.omega1.imag,
                                                       pair.omega2.real, pair.omega2.imag,
                                                       pair.d, chk.moment_error)])
    write_manifest(out, "atomize", cfg, {"pairs": len(pieces), "max_moment_error": worst,
                                         "bound_violations": violations})
    return 0 if violations == 0 and worst <= 1e-10 else 1


def cmd_sharpness(cfg: dict) -> int:
    psi = parse_psi(cfg["psi"])
    grid = parse_grid(cfg["r_grid"])
    spec = UPhiSpec(psi, max_radius=float(cfg["max_radius"] or grid[-1] * 1e6))
    u, f = build_u_phi(spec), best_rounding(spec)
    out = _out(cfg)
    rows = []
    for a in _alphas(cfg["alpha"]):
        rep = sharpness_ratio(u, f, a, psi, grid, rtol=float(cfg["tol"]))
        rows.extend(zip([a] * len(grid), rep.radii, rep.I, rep.norm, rep.ratio, rep.error_bound))
    with open(out / "sharpness.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "R", "I", "norm", "ratio", "error_bound"])
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
    write_manifest(out, "sharpness", cfg, {"radii": spec.radii.size, "zeros": f.count})
    return 0


def cmd_jensen(cfg: dict) -> int:
    m = load_measure(cfg)
    out = _out(cfg)
    grid = parse_grid(cfg["r_grid"])
    worst = 0.0
    with open(out / "jensen.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "circle_mean", "N", "residual"])
        for r in grid:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                cm = circle_mean(m, r)
            N = integrated_counting(m, r)
            worst = max(worst, abs(cm - N))
            w.writerow([repr(float(x)) for x in (r, cm, N, cm - N)])
    write_manifest(out, "jensen", cfg, {"max_abs_residual": worst})
    return 0


def cmd_verify(cfg: dict) -> int:
    m = load_measure(cfg)
    psi = parse_psi(cfg["psi"])
    out = _out(cfg)
    results: dict = {}
    if len(m):
        r = 1e-3 * min(1.0, float(np.min(m.moduli)))
        z0 = generic_origin_shift(m, r, seed=int(cfg["seed"]))
        results["generic_origin"] = bool(verify_generic_origin(m, z0)["ok"])
        rest, corr = normalize_origin(m.translate(-z0))
        inner = rest.moduli <= 1.0
        rest = rest.select(~inner)
        if len(rest):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                dec = annular_split(rest, psi, origin_correction=corr)
            rep = verify_decomposition(dec, rest)
            results["decomposition"] = rep.all_pass
            results["decomposition_details"] = rep.details
            sched = heavy_tail_schedule(dec.mu2, psi)
            upto = dec.R[-2] if len(dec.R) > 2 else 0.0
            ok, det = verify_schedule(sched, psi, upto=upto)
            results["schedule"] = ok
            results["schedule_details"] = det
        try:
            res = approximate(m, psi, seed=int(cfg["seed"]), check_annulus_mass=False)
            results["zero_count"] = res.zeros.count
            results["assembly"] = True
        except ConsistencyError as exc:
            results["assembly"] = False
            results["assembly_error"] = str(exc)
    with open(out / "verify.json", "w") as fh:
        json.dump(results, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(out, "verify", cfg)
    flags = [v for k, v in results.items() if isinstance(v, bool)]
    return 0 if all(flags) else 1


COMMANDS = {
    "approximate": cmd_approximate,
    "partition": cmd_partition,
    "atomize": cmd_atomize,
    "sharpness": cmd_sharpness,
    "jensen": cmd_jensen,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subharm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with default settings")
        p.add_argument("--input", help="measure file with 're im mass' lines")
        p.add_argument("--generator", choices=["u_phi"], help="builtin measure instead of --input")
        p.add_argument("--phi", help="spacing function for the u_phi generator")
        p.add_argument("--count", type=int, help="number of u_phi radii")
        p.add_argument("--max-radius", type=float, help="largest u_phi radius")
        p.add_argument("--psi", help="log | exp-sqrt-log[:c] | const:c | sigma-inv-log")
        p.add_argument("--r-grid", help="pow2:a:b or comma-separated radii")
        p.add_argument("--tol", type=float, help="relative quadrature tolerance")
        p.add_argument("--seed", type=int, help="seed for the origin shift and sampling")
        p.add_argument("--out", help="output directory")
        p.add_argument("--alpha", help="comma-separated alpha values (sharpness)")
        p.add_argument("--rect", help="sigma_min,sigma_max,t_min,t_max (partition, atomize)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except UserInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConsistencyError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
