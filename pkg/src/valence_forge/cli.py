"""valence-forge: command-line front end.

Every subcommand writes one CSV plus ``manifest.json`` into the output
directory.  Exit codes: 0 success, 2 validation failure (bad parameters,
failed checks), 3 numerical failure, 4 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .analysis import RatioModel, objective_table, optimize_C, sweep
from .area import area_counting_oracle, area_quadrature, area_rows
from .config import ConfigError, RunConfig, load_config
from .construction import DomainError, ParamsError, ToppilaFunction, dump_zeros_poles
from .sphere import INFINITY, ExtComplex
from .verify import failures, format_table, run_all
from .winding import count_in_disk_many, count_rows

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 4
SUBCOMMANDS = ("verify", "construct", "eval", "count", "area", "sweep", "optimize-c")

COLUMNS = {
    "construct": ("k", "parity", "N_k", "alpha_k", "type", "re", "im", "multiplicity"),
    "eval": ("re", "im", "f_re", "f_im", "f_is_inf", "log_abs_f", "fsharp"),
    "count": ("r", "a_re", "a_im", "a_is_inf", "count", "samples", "clearance"),
    "area": ("r", "method", "value", "error", "work_units"),
    "verify": ("check_id", "anchor", "status", "measured", "bound", "margin"),
    "sweep": ("r", "interval", "n_r", "attain_re", "attain_im", "attain_is_inf", "A_quad", "A_quad_err",
              "A_mc", "A_mc_err", "ratio", "predicted"),
    "optimize-c": ("C", "objective"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(v) -> str:
    """17 significant digits for floats, so every double round-trips."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: str, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])


def parse_value(text: str) -> ExtComplex:
    """'RE,IM', 'RE' or 'inf'."""
    s = text.strip().lower()
    if s in ("inf", "infinity"):
        return INFINITY
    parts = s.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise UsageError(f"cannot read value {text!r}; use RE,IM or inf")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="valence-forge", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--out", help="output directory (default: config 'output')")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--r", type=float, help="single radius")
    ap.add_argument("--r-min", type=float)
    ap.add_argument("--r-max", type=float)
    ap.add_argument("--r-steps", type=int)
    ap.add_argument("--a", action="append", default=[], help="target value RE,IM or inf (repeatable)")
    ap.add_argument("--z", action="append", default=[], help="evaluation point RE,IM for 'eval' (repeatable)")
    return ap


def _radii(args, cfg: RunConfig) -> list[float]:
    if args.r is not None:
        if any(v is not None for v in (args.r_min, args.r_max, args.r_steps)):
            raise UsageError("--r cannot be combined with --r-min/--r-max/--r-steps")
        return [args.r]
    steps = cfg.r_steps
    if steps == 1:
        return [cfg.r_min]
    return [float(f"{cfg.r_min + (cfg.r_max - cfg.r_min) * i / (steps - 1):.12g}") for i in range(steps)]


def _run(sub: str, args, cfg: RunConfig, fun: ToppilaFunction) -> tuple[int, list[dict], dict]:
    """(exit code, CSV rows, summary for the manifest)."""
    if sub == "optimize-c":
        opt = optimize_C(RatioModel())
        print(f"C_star,value\n{fmt(opt.C_star)},{fmt(opt.value)}")
        rows = [dict(C=c, objective=v) for c, v in objective_table(RatioModel())]
        return EXIT_OK, rows, dict(C_star=opt.C_star, value=opt.value, closed_form=opt.closed_form)

    if sub == "construct":
        rows = dump_zeros_poles(fun)
        for c in fun.cells:
            print(f"cell {c.k}: {c.parity}, N_k = {c.n}, alpha_k = {c.alpha:.6g}")
        return EXIT_OK, rows, dict(degrees={str(c.k): c.n for c in fun.cells})

    if sub == "verify":
        reports = run_all(fun, cfg.seed)
        print(format_table(reports))
        bad = failures(reports)
        print(f"{len(reports)} checks, {len(bad)} failed")
        return (EXIT_VALIDATION if bad else EXIT_OK), [r.csv_row() for r in reports], dict(
            checks=len(reports), failed=[r.check_id for r in bad])

    if sub == "eval":
        pts = [parse_value(z) for z in args.z] or [0j] + [c.special_point for c in fun.cells]
        if any(p is INFINITY for p in pts):
            raise UsageError("evaluation points must be finite")
        z = np.array(pts, dtype=complex)
        L = fun.log_value(z)
        fs = fun.spherical_derivative(z)
        rows = []
        for zi, li, si in zip(z, L, fs):
            inf = bool(np.isposinf(li.real) or li.real > 709)
            val = 0j if np.isneginf(li.real) else (0j if inf else complex(np.exp(li)))
            rows.append(dict(re=zi.real, im=zi.imag, f_re=val.real, f_im=val.imag, f_is_inf=inf,
                             log_abs_f=float(li.real), fsharp=float(si)))
            print(f"f({zi.real:.6g}{zi.imag:+.6g}i) = {'inf' if inf else f'{val:.6g}'}  f# = {si:.6g}")
        return EXIT_OK, rows, {}

    radii = _radii(args, cfg)
    if sub == "count":
        targets = [parse_value(a) for a in args.a] or [0j, INFINITY, 1 + 0j]
        rows = []
        for r in radii:
            res = count_in_disk_many(fun, r, targets)
            rows += count_rows(r, targets, res)
            for a, c in zip(targets, res):
                print(f"n({r:g}, {a}) = {c.count}")
        return EXIT_OK, rows, {}

    if sub == "area":
        rows = []
        for r in radii:
            q = area_quadrature(fun, r)
            m = area_counting_oracle(fun, r, max(100, cfg.mc_samples), cfg.seed)
            rows += area_rows(r, [q, m])
            print(f"A({r:g}): quadrature {q.value:.10g} +- {q.error_estimate:.3g}, "
                  f"counting {m.value:.10g} +- {m.error_estimate:.3g}")
        return EXIT_OK, rows, {}

    if sub == "sweep":
        if args.r is not None:
            raise UsageError("sweep takes --r-min/--r-max/--r-steps, not --r")
        if cfg.r_steps < 2:
            raise UsageError("sweep needs r_steps >= 2")
        result = sweep(fun, cfg.r_min, cfg.r_max, cfg.r_steps, cfg.seed, cfg.probe_grid_size,
                       max(100, cfg.mc_samples))
        rows = []
        for row in result:
            rows.append(row.csv_row())
            print(f"r={row.r:<8g} {row.interval:<5} n={row.n_r:<7d} A={row.A_quad:<14.8g} "
                  f"ratio={row.ratio:<10.6g} predicted={row.predicted:<10.6g} {row.status}")
        errors = [r.r for r in result if r.status.startswith("error")]
        return (EXIT_NUMERICAL if errors else EXIT_OK), rows, dict(error_rows=errors)

    raise UsageError(f"unknown subcommand {sub}")


def _manifest(path: str, sub: str, cfg: RunConfig | None, status: int, wall: float, extra: dict) -> None:
    doc = dict(
        subcommand=sub, exit_code=status, wall_time_s=wall,
        seed=None if cfg is None else cfg.seed,
        config=None if cfg is None else cfg.as_dict(),
        versions=dict(valence_forge=__version__, python=platform.python_version(), numpy=np.__version__),
        **extra,
    )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (np.integer, np.floating)):
        return v.item()
    return str(v)


def main(argv=None) -> int:
    t0 = time.perf_counter()
    sub, cfg, out_dir = "?", None, None
    try:
        args = build_parser().parse_args(argv)
        sub, out_dir = args.subcommand, args.out
        cfg = load_config(args.config)
        overrides = {k: v for k, v in (("seed", args.seed), ("r_min", args.r_min), ("r_max", args.r_max),
                                       ("r_steps", args.r_steps), ("output", args.out)) if v is not None}
        if overrides:
            cfg = cfg.replace(**overrides)
        fun = ToppilaFunction.build(cfg.params)
        os.makedirs(cfg.output, exist_ok=True)
        status, rows, extra = _run(sub, args, cfg, fun)
        name = sub.replace("-", "_")
        write_csv(os.path.join(cfg.output, f"{name}.csv"), COLUMNS[sub], rows)
        _manifest(os.path.join(cfg.output, "manifest.json"), sub, cfg, status, time.perf_counter() - t0, extra)
        return status
    except UsageError as err:
        return _fail(EXIT_USAGE, "usage", err, sub, cfg, out_dir)
    except (ParamsError, ConfigError, DomainError) as err:
        return _fail(EXIT_VALIDATION, "validation", err, sub, cfg, out_dir)
    except OSError as err:
        return _fail(EXIT_USAGE, "io", err, sub, cfg, out_dir)
    except (ArithmeticError, ValueError) as err:
        return _fail(EXIT_NUMERICAL, "numerical", err, sub, cfg, out_dir)


def _fail(code: int, kind: str, err: Exception, sub: str, cfg: RunConfig | None,
          out_dir: str | None = None) -> int:
    record = dict(error=kind, type=type(err).__name__, message=str(err), subcommand=sub, exit_code=code)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    # a config that failed to load still reports into --out when given
    target = cfg.output if cfg is not None else out_dir
    if target is not None and os.path.isdir(target):
        with open(os.path.join(target, "error.json"), "w", encoding="utf-8") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
