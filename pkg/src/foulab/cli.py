"""
Command-line interface.

Exit codes: 0 success, 1 usage, 2 domain or degenerate input, 3 I/O.
Every subcommand accepts --config FILE.json; flags given on the command
line override values from the file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    asymptotic_constants,
    drift_clt_variance,
    figure1_data,
    lemma_at_limit,
    lemma_at_pair,
    nu_squared_normalized,
    table1,
)
from .drift_estimators import theta_bar
from .errors import ConfigurationError, DivergenceError, FouLabError
from .fou_model import VolatilitySpec, build_fou
from .fracgauss import GridSpec, read_path_csv, sample_fbm
from .mc_harness import McExperimentConfig, run_experiment
from .plotting import figure1_svg, histogram_svg
from .power_variation import PowerVariationConfig, sigma_hat_from_values

EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _num(x) -> str:
    return repr(float(x))


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"missing required parameter(s): {flags}")


# simulate

def cmd_simulate(args) -> int:
    _require(args, "hurst", "n", "step", "seed", "out")
    grid = GridSpec(args.n, args.step)
    fbm = sample_fbm(args.hurst, grid, args.seed)
    path = build_fou(fbm, args.theta, VolatilitySpec.constant(float(args.sigma)), x0=args.x0)
    out = Path(args.out)
    path.write(out, out.with_suffix(".json"))
    return 0


# estimate

def _load_grid(path):
    t, x = read_path_csv(path)
    if t.size < 2:
        raise ConfigurationError("need at least 2 observations")
    h = float(t[1] - t[0])
    if not h > 0:
        raise ConfigurationError("time column must be increasing")
    if np.max(np.abs(np.diff(t) - h)) >= 1e-9 * h:
        raise ConfigurationError("observations are not equally spaced")
    return t, x, h


def cmd_estimate(args) -> int:
    _require(args, "input", "hurst")
    t, x, h = _load_grid(args.input)
    H, k, p = args.hurst, args.k, args.p
    cfg = PowerVariationConfig(k, p, H)
    if x.size < k + 2:
        raise ConfigurationError(f"need at least k+2 = {k + 2} rows, got {x.size}")
    n_obs = x.size - 1
    T = n_obs * h
    report = {"input": str(args.input), "n": n_obs, "h": h, "T": T, "H": H}

    if args.sigma is None or args.sigma == "estimate":
        s = sigma_hat_from_values(x, h, cfg)
        entry = {"value": s, "k": k, "p": p, "asymptotic_se_of_sigma_p": None}
        try:
            nu = nu_squared_normalized(H, k, p).value
            # sqrt(1/h) (|sigma_hat|^p - |sigma|^p) -> N(0, nu^2 T / sigma^{2p} * sigma^{2p} / T)
            entry["asymptotic_se_of_sigma_p"] = math.sqrt(nu * s ** (2 * p) / T * h)
        except DivergenceError as exc:
            entry["note"] = f"no Gaussian limit for this (k, H): {exc}"
        report["sigma_hat"] = entry
        sigma = s
    else:
        try:
            sigma = float(args.sigma)
        except ValueError:
            raise UsageError(f"--sigma must be a number or 'estimate', got {args.sigma!r}") from None
        report["sigma_given"] = sigma

    grid = GridSpec(n_obs, h)
    est = theta_bar(x, grid, sigma, H, args.condition_p)
    d = est.to_dict()
    law = est.asymptotic
    if law is not None:
        rate = drift_clt_variance("ETE", H, est.value).rate_value(T) if T > 1 else None
        d["asymptotic_se"] = math.sqrt(law["variance"]) / rate if rate else None
    report["theta_bar"] = d
    _emit(_dump(report), args.out)
    return 0


# constants, table1, figure1, lemma-check

def cmd_constants(args) -> int:
    _require(args, "hurst")
    c = asymptotic_constants(args.hurst, args.k, args.p, args.theta, float(args.sigma))
    _emit(_dump(c.to_dict()), args.out)
    return 0


def table1_csv(tab) -> str:
    lines = ["H," + ",".join(f"k={k}" for k in tab.ks)]
    for H, row in tab.rows():
        cells = ["-" if v is None else f"{v:.4f}" for v in row]
        lines.append(f"{H:g}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_table1(args) -> int:
    tab = table1(p=args.p)
    if args.format == "json":
        rows = {f"{H:g}": row for H, row in tab.rows()}
        _emit(_dump({"p": tab.p, "k": list(tab.ks), "rows": rows}), args.out)
    else:
        _emit(table1_csv(tab), args.out)
    return 0


def cmd_figure1(args) -> int:
    rows = figure1_data(theta=args.theta)
    if args.format == "json":
        keys = ("H", "lse", "ete", "mle")
        _emit(_dump({"theta": args.theta, "rows": [dict(zip(keys, r)) for r in rows]}), args.out)
        return 0
    csv_text = "H,lse,ete,mle\n" + "".join(
        ",".join(_num(v) for v in r) + "\n" for r in rows)
    if args.out is None:
        if args.format == "svg":
            sys.stdout.write(figure1_svg(rows, args.theta))
        else:
            sys.stdout.write(csv_text)
        return 0
    stem = Path(args.out)
    if args.format in (None, "csv"):
        stem.with_suffix(".csv").write_text(csv_text)
    if args.format in (None, "svg"):
        stem.with_suffix(".svg").write_text(figure1_svg(rows, args.theta))
    return 0


def cmd_lemma_check(args) -> int:
    _require(args, "hurst")
    n = args.n if args.n is not None else 0
    ladder = args.ladder or [1e3, 1e4, 1e5]
    limit = lemma_at_limit(n, args.hurst, args.theta)
    log_scaled = args.hurst == 0.75
    rows = []
    for T in ladder:
        a1, a2 = lemma_at_pair(n, args.hurst, args.theta, T)
        scale = math.log(T) if log_scaled else 1.0
        rows.append({"T": T, "A1": a1, "A2": a2,
                     "A1_scaled": a1 / scale, "A2_scaled": a2 / scale,
                     "rel_gap": abs(a2 / scale - limit) / limit})
    out = {"n": n, "H": args.hurst, "theta": args.theta,
           "scaling": "A/log T" if log_scaled else "A", "limit": limit, "ladder": rows}
    _emit(_dump(out), args.out)
    return 0


# mc

_MC_PARAM_FLAGS = {"hurst": "H", "theta": "theta", "sigma": "sigma", "k": "k", "p": "p",
                   "T": "T", "n": "n", "step": "h"}


def cmd_mc(args) -> int:
    base = dict(args.file_config or {})
    params = dict(base.get("params", {}))
    for flag, key in _MC_PARAM_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            params[key] = float(v) if key not in ("k", "n") else int(v)
    base["params"] = params
    for flag in ("target", "replications", "seed", "threads"):
        if getattr(args, flag) is not None:
            base[flag] = getattr(args, flag)
    if "target" not in base or "H" not in params:
        raise UsageError("mc needs a target and --hurst (flags or --config)")
    base.setdefault("replications", 1000)
    base.setdefault("seed", 0)
    cfg = McExperimentConfig.from_dict(base)
    rep = run_experiment(cfg)
    _emit(rep.to_json() + "\n", args.out)
    if args.samples:
        Path(args.samples).write_text("statistic\n" + "".join(_num(v) + "\n" for v in rep.samples))
    if args.histogram:
        Path(args.histogram).write_text(
            histogram_svg(rep.samples, rep.theoretical_variance, f"{cfg.target} replications"))
    return 0


# parser

def _common(p, *, model=True):
    p.add_argument("--config", help="JSON file of parameter values (flags override)")
    p.add_argument("--out", help="output path ('-' or omitted: stdout where applicable)")
    p.add_argument("--format", choices=["csv", "json", "svg"])
    if model:
        p.add_argument("--hurst", type=float)
        p.add_argument("--theta", type=float)
        p.add_argument("--sigma")
        p.add_argument("-k", type=int)
        p.add_argument("-p", type=float)
        p.add_argument("-n", type=int)
        p.add_argument("--step", type=float)
        p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="foulab", description="Fractional OU estimation toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("simulate", help="simulate an fOU path to CSV + JSON sidecar")
    _common(p)
    p.add_argument("--x0", type=float)

    p = sub.add_parser("estimate", help="estimate sigma and theta from a t,value CSV")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--condition-p", type=float, help="p for the n h^p step condition")

    p = sub.add_parser("constants", help="asymptotic constants as JSON")
    _common(p)

    p = sub.add_parser("table1", help="normalized asymptotic variance table")
    _common(p)

    p = sub.add_parser("figure1", help="drift estimator variances: CSV and SVG")
    _common(p)

    p = sub.add_parser("mc", help="run a Monte Carlo experiment")
    _common(p)
    p.add_argument("--target")
    p.add_argument("--replications", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("-T", type=float, dest="T")
    p.add_argument("--samples", help="CSV dump of per-replication statistics")
    p.add_argument("--histogram", help="SVG histogram with the limit density")

    p = sub.add_parser("lemma-check", help="quadrature of the H >= 3/4 integrals vs their limits")
    _common(p)
    p.add_argument("--ladder", type=float, nargs="+", help="horizons T")
    return ap


_DEFAULTS = {"theta": 1.0, "sigma": 1.0, "k": 2, "p": 2.0, "x0": 0.0}
_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "constants": cmd_constants,
    "table1": cmd_table1,
    "figure1": cmd_figure1,
    "mc": cmd_mc,
    "lemma-check": cmd_lemma_check,
}


def _merge_config(args, parser):
    args.file_config = None
    if args.config:
        try:
            with open(args.config) as fh:
                conf = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(conf, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
        if args.command == "mc":
            args.file_config = conf
        else:
            for key, value in conf.items():
                dest = key.replace("-", "_")
                if dest not in vars(args) or dest in ("command", "config"):
                    raise UsageError(f"{args.config}: unknown key {key!r}")
                if getattr(args, dest) is None:
                    setattr(args, dest, value)
    if args.command != "mc":
        for key, value in _DEFAULTS.items():
            if args.command == "estimate" and key == "sigma":
                continue  # unknown sigma means: estimate it
            if key in vars(args) and getattr(args, key) is None:
                setattr(args, key, value)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args, parser)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"foulab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FouLabError, ValueError) as exc:
        print(f"foulab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"foulab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
