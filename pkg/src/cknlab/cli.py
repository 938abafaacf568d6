"""Command line interface.

Every command echoes the resolved parameter set (with the derived ``a``,
``b``, ``p`` and ``kappa``) next to its result. Tables are written as CSV
with 17 significant digits or as JSON ``{"config": ..., "rows": [...]}``.

Exit codes: 0 success, 2 parameter domain error, 3 numerical failure,
4 I/O error, 64 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .errors import CknError, DomainError
from .green_radial import green_hl, two_point_green, verify_estimates
from .mass import lambda_star_rad, mass, mass_sweep
from .params import derived_constants, make_params
from .variational import deficit_scaling, mass_sign_experiment, spectral_gap

__all__ = ["main", "emit_table", "run"]

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERIC, EXIT_IO, EXIT_USAGE = 0, 2, 3, 4, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text}") from exc


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def emit_table(rows, columns, fmt: str = "csv", config: dict | None = None,
               path=None) -> str:
    """Render ``rows`` (sequences aligned with ``columns``) as CSV or JSON text.

    The text is returned and, when ``path`` is given, also written there.
    """
    if fmt == "json":
        payload = {"config": config or {}, "rows": [dict(zip(columns, r)) for r in rows]}
        text = json.dumps(_jsonable(payload), allow_nan=False) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _emit_record(record: dict, fmt: str, config: dict) -> str:
    if fmt == "json":
        payload = {"config": config}
        payload.update(record)
        return json.dumps(_jsonable(payload), allow_nan=False) + "\n"
    cols = list(config) + list(record)
    return emit_table([[*config.values(), *record.values()]], cols, "csv")


def _config(args, params, **extra):
    c = derived_constants(params)
    cfg = {"d": params.d, "n": params.n, "alpha": params.alpha}
    if getattr(args, "lam", None) is not None:
        cfg["lambda"] = args.lam
    cfg.update(a=c.a, b=c.b, p=c.p, kappa=c.kappa)
    cfg.update(extra)
    return cfg


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--d", type=int, default=3)
    common.add_argument("--n", type=float, default=3.0)
    common.add_argument("--alpha", type=float, default=1.0)
    common.add_argument("--lambda", dest="lam", type=float, default=None)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--k-max", dest="k_max", type=int, default=32)

    p = _Parser(prog="cknlab", description="Weighted CKN radial Green functions and masses")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("constants", parents=[common], help="derived constants")
    sub.add_parser("mass", parents=[common], help="mass m_lambda")
    sub.add_parser("lambda-star", parents=[common], help="critical radial lambda")
    s = sub.add_parser("sweep", parents=[common], help="mass over an (n, lambda) grid")
    s.add_argument("--n-grid", type=_floats, default=None)
    s.add_argument("--lambda-grid", type=_floats, default=None)
    s = sub.add_parser("green", parents=[common], help="radial Green profile")
    s.add_argument("--points", type=int, default=200)
    s = sub.add_parser("two-point", parents=[common], help="two-point Green function")
    s.add_argument("--rho-x", type=float, required=True)
    s.add_argument("--rho-y", type=float, required=True)
    s.add_argument("--cos-theta", type=float, required=True)
    s.add_argument("--domain", choices=("ball", "cone"), default="ball")
    s.add_argument("--subtract-singular", action="store_true")
    s = sub.add_parser("verify-estimates", parents=[common], help="two-sided estimate ratios")
    s.add_argument("--samples", type=int, default=200)
    s = sub.add_parser("deficit", parents=[common], help="deficit of truncated bubbles")
    s.add_argument("--eps", type=_floats, default=[0.2, 0.1, 0.05, 0.025])
    s = sub.add_parser("sign-experiment", parents=[common], help="corrected test functions")
    s.add_argument("--eps", type=_floats, default=[0.1, 0.05, 0.025, 0.0125])
    s = sub.add_parser("spectral-gap", parents=[common], help="radial spectral gap")
    s.add_argument("--mesh", type=int, default=512)
    s.add_argument("--cap", type=float, default=1 - 1e-12)
    return p


def _lam(args, default=None):
    if args.lam is None:
        if default is None:
            raise UsageError(f"{args.command} needs --lambda")
        args.lam = default
    return args.lam


def run(args) -> str:
    """Execute a parsed command and return its rendered output."""
    params = make_params(args.d, args.n, args.alpha)
    cmd = args.command
    fmt = args.fmt
    if cmd == "constants":
        c = derived_constants(params)
        return _emit_record(c.as_dict(), fmt or "json", _config(args, params))
    if cmd == "mass":
        lam = _lam(args)
        r = mass(params, lam, args.tol)
        rec = {"m": r.value, "err_estimate": r.err_estimate, "chi_limit": r.chi_limit}
        return _emit_record(rec, fmt or "json", _config(args, params, tol=args.tol))
    if cmd == "lambda-star":
        val = lambda_star_rad(params, args.tol)
        return _emit_record({"lambda_star": val}, fmt or "json", _config(args, params, tol=args.tol))
    if cmd == "sweep":
        lam_grid = args.lambda_grid or [_lam(args, 1.0)]
        n_grid = args.n_grid or [params.n]
        pts = [(params.d, n, params.alpha, lam) for n in n_grid for lam in lam_grid]
        rows = mass_sweep(pts, args.tol)
        cols = ["d", "n", "alpha", "lambda", "m", "err_estimate", "status"]
        data = [[r.d, r.n, r.alpha, r.lam, r.m, r.err_estimate, r.status] for r in rows]
        return emit_table(data, cols, fmt or "csv", _config(args, params, tol=args.tol))
    if cmd == "green":
        lam = _lam(args)
        G = green_hl(params, lam)
        rho = (np.arange(args.points) + 0.5) / args.points
        phi = derived_constants(params).kappa * rho ** (2 - params.n)
        data = np.column_stack([rho, G(rho), phi, G.chi(rho)]).tolist()
        return emit_table(data, ["rho", "G", "phi", "chi"], fmt or "csv", _config(args, params))
    if cmd == "two-point":
        lam = _lam(args, 0.0)
        val = two_point_green(params, lam, args.rho_x, args.rho_y, args.cos_theta, args.k_max,
                              args.domain, args.subtract_singular)
        rec = {"rho_x": args.rho_x, "rho_y": args.rho_y, "cos_theta": args.cos_theta, "G": val}
        return _emit_record(rec, fmt or "json", _config(args, params, k_max=args.k_max))
    if cmd == "verify-estimates":
        lam = _lam(args)
        rep = verify_estimates(params, lam, args.samples, args.seed, args.k_max)
        cols = ["regime", "r_x", "r_y", "cos_theta", "G", "envelope", "ratio"]
        cfg = _config(args, params, k_max=args.k_max, seed=args.seed,
                      sup_ratio=rep.sup_ratio, inf_ratio=rep.inf_ratio)
        return emit_table(rep.rows, cols, fmt or "csv", cfg)
    if cmd == "deficit":
        rows = deficit_scaling(params, args.eps)
        return emit_table(rows, ["eps", "deficit", "f2_mass", "ratio"], fmt or "csv",
                          _config(args, params))
    if cmd == "sign-experiment":
        lam = _lam(args)
        ex = mass_sign_experiment(params, lam, args.eps)
        cfg = _config(args, params, c_rad=ex.c_rad, exponent=ex.exponent)
        return emit_table(ex.rows, ["eps", "quotient", "gap"], fmt or "csv", cfg)
    if cmd == "spectral-gap":
        val = spectral_gap(params, args.mesh, args.cap)
        return emit_table([[args.mesh, args.cap, val]], ["mesh", "cap", "value"], fmt or "csv",
                          _config(args, params))
    raise UsageError(f"unknown command {cmd}")


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        text = run(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cknlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"cknlab: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except CknError as exc:
        print(f"cknlab: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"cknlab: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
