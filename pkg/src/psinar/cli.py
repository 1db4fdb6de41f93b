"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 estimation failure, 4 configuration
error.  Failures are reported on stderr as a JSON record.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import re
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import McConfig, compare_models, predict, run_mc_study
from .distributions import FAMILIES, INNOVATIONS, get_family, innovation_class
from .estimation import METHODS, fit
from .exceptions import ConvergenceError, EstimationError, InputError
from .process import DEFAULT_BURN_IN, CountSeries, InarModel, simulate

DEFAULT_SEED = 20240601
EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION, EXIT_CONFIG = 0, 2, 3, 4

_INT = re.compile(r"^[+]?\d+$")
_MISSING = {"", "na", "nan", "null", "none", "?"}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Input
# ---------------------------------------------------------------------------


def parse_series(text: str) -> CountSeries:
    """Parse a single-column CSV (optional header) or whitespace-separated counts."""
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    values = []
    seen_data = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            if seen_data:
                raise InputError("missing value", lineno)
            continue
        if "," in line or ";" in line:
            fields = [f.strip() for f in re.split(r"[,;]", line)]
            if len(fields) != 1 and not (len(fields) == 2 and fields[1] == ""):
                raise InputError(f"expected a single column, found {len(fields)} fields", lineno)
            tokens = [fields[0]]
        else:
            tokens = line.split()
        for tok in tokens:
            tok = tok.strip().strip('"').strip("'")
            if _INT.match(tok):
                values.append(int(tok))
                seen_data = True
                continue
            if tok.lower() in _MISSING:
                raise InputError("missing value", lineno)
            if not seen_data and not values and re.match(r"^[A-Za-z_][\w .-]*$", tok):
                break  # header line
            if re.match(r"^-\d+$", tok):
                raise InputError(f"negative value {tok}", lineno)
            raise InputError(f"not a non-negative integer: {tok!r}", lineno)
    if len(values) < 3:
        raise InputError(f"a series needs at least 3 values, found {len(values)}")
    return CountSeries(np.array(values, dtype=np.int64))


def ingest_series(path) -> CountSeries:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {p}: {exc.strerror}") from exc
    return parse_series(text)


def describe_series(series: CountSeries, path=None) -> dict:
    out = {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in series.summary().items()}
    out["min"] = int(series.values.min())
    out["max"] = int(series.values.max())
    if path is not None:
        out["sha256"] = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return out


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    return obj


def _write(args, text: str, config: dict):
    if args.output:
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        if args.format != "json":
            # delimited and text reports keep the run configuration in a sidecar
            Path(str(out) + ".config.json").write_text(json.dumps(_sanitize(config), indent=2) + "\n")
    else:
        sys.stdout.write(text)


def _csv(rows, fieldnames) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else v) for k, v in _sanitize(r).items()})
    return buf.getvalue()


def report_schema() -> dict:
    """The JSON schema every ``--format json`` report validates against."""
    return json.loads(resources.files(__package__).joinpath("schemas/report.schema.json").read_text())


def _json(obj) -> str:
    return json.dumps(_sanitize(obj), indent=2) + "\n"


def run_config(args) -> dict:
    skip = {"func", "output_format"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    cfg["version"] = __version__
    return cfg


def _fit_record(f):
    return {
        "alpha": f.alpha,
        f.param_name: f.param,
        "mu": f.mu,
        "loglik": f.loglik,
        "aic": f.aic,
        "bic": f.bic,
        "std_errors": list(f.std_errors) if f.std_errors else None,
        "diagnostics": {
            "converged": f.converged,
            "boundary": f.boundary,
            "n_iter": f.n_iter,
            "grad_norm": f.grad_norm,
            "message": f.message,
        },
    }


def _innovation(args):
    cls = innovation_class(args.innovation)
    value = args.param if args.param is not None else args.theta
    if value is None:
        raise ConfigError(f"--param (or --theta) is required for {cls.kind} innovations")
    return cls(value)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    model = InarModel(get_family(args.family), args.alpha, _innovation(args))
    out = simulate(model, args.length, args.burn_in, args.seed)
    values = np.atleast_1d(np.asarray(getattr(out, "values", out)))
    cfg = run_config(args)
    if args.format == "json":
        text = _json({"config": cfg, "model": model.name, "series": values.tolist()})
    elif args.format == "csv":
        text = "x\n" + "".join(f"{v}\n" for v in values)
    else:
        text = "".join(f"{v}\n" for v in values)
    _write(args, text, cfg)


def cmd_describe(args):
    s = ingest_series(args.input)
    d = describe_series(s, args.input)
    cfg = run_config(args)
    if args.format == "json":
        text = _json({"config": cfg, "summary": d})
    elif args.format == "csv":
        text = _csv([d], list(d))
    else:
        text = "".join(f"{k:<10} {v}\n" for k, v in d.items())
    _write(args, text, cfg)


def cmd_fit(args):
    s = ingest_series(args.input)
    methods = METHODS if args.method == "all" else (args.method,)
    fits = {m: fit(s, args.family, args.innovation, m) for m in methods}
    primary = fits.get("cmle") or fits[methods[0]]
    if not primary.ok:
        raise EstimationError(f"{primary.method} fit failed: {primary.message}")
    cfg = run_config(args)
    report = {
        "config": cfg,
        "model": primary.model_tag,
        "summary": describe_series(s),
        "estimates": {m: _fit_record(f) for m, f in fits.items()},
        "loglik": primary.loglik,
        "aic": primary.aic,
        "bic": primary.bic,
        "std_errors": list(primary.std_errors) if primary.std_errors else None,
        "diagnostics": _fit_record(primary)["diagnostics"],
    }
    if args.format == "json":
        text = _json(report)
    else:
        rows = [{"method": m, "model": f.model_tag, **_fit_record(f), "param_name": f.param_name,
                 "param": f.param} for m, f in fits.items()]
        for r in rows:
            r.pop("diagnostics")
            r["std_errors"] = ";".join(f"{v:.6g}" for v in r["std_errors"]) if r["std_errors"] else ""
        fields = ["method", "model", "alpha", "param_name", "param", "mu", "loglik", "aic", "bic", "std_errors"]
        if args.format == "csv":
            text = _csv(rows, fields)
        else:
            text = "".join(
                f"{r['method']:<5} alpha={r['alpha']:.4f} {r['param_name']}={r['param']:.4f} "
                f"loglik={r['loglik']:.4f} AIC={r['aic']:.4f} BIC={r['bic']:.4f}\n" for r in _sanitize_nan(rows)
            )
    _write(args, text, cfg)


def _sanitize_nan(rows):
    return [{k: (math.nan if v is None else v) for k, v in r.items()} for r in rows]


def cmd_compare(args):
    s = ingest_series(args.input)
    table = compare_models(s)
    cfg = run_config(args)
    if args.format == "json":
        text = _json({"config": cfg, "summary": describe_series(s), **table.to_dict()})
    elif args.format == "csv":
        rows = []
        for r in table.rows:
            for m, f in r.fits.items():
                rows.append({"model": r.tag, "method": m, "alpha": f.alpha, "param_name": f.param_name,
                             "param": f.param, "loglik": f.loglik, "aic": r.aic, "bic": r.bic})
        text = _csv(rows, ["model", "method", "alpha", "param_name", "param", "loglik", "aic", "bic"])
    else:
        text = table.format_table() + "\n"
    _write(args, text, cfg)


def cmd_predict(args):
    s = ingest_series(args.input)
    if args.alpha is not None:
        inn = _innovation(args)
        alpha, mean_w = args.alpha, inn.mean
    else:
        f = fit(s, args.family, args.innovation, args.method)
        if not f.ok:
            raise EstimationError(f"{args.method} fit failed: {f.message}")
        alpha, mean_w = f.alpha, f.model().innovation.mean
    trace = predict(s, alpha, mean_w, args.lag)
    cfg = run_config(args)
    if args.format == "json":
        text = _json({"config": cfg, "alpha": alpha, "innovation_mean": mean_w,
                      "first": trace.first, "intercept": trace.intercept, "rows": list(trace.rows())})
    else:
        text = _csv(trace.rows(), ["t", "observed", "predicted", "residual"])
    _write(args, text, cfg)


def cmd_mc_study(args):
    config = McConfig(
        family=args.family,
        alpha=args.alpha,
        theta=args.theta,
        lengths=[int(t) for t in args.lengths.split(",")],
        replicates=args.replicates,
        seed=args.seed,
        burn_in=args.burn_in,
        methods=args.methods.split(","),
        n_jobs=args.n_jobs,
    )
    report = run_mc_study(config)
    cfg = run_config(args)
    if args.format == "json":
        d = report.to_dict()
        text = _json({"config": cfg, "study": d["config"], "cells": d["cells"]})
    elif args.format == "csv":
        rows = [c.__dict__ for c in report.cells]
        text = _csv(rows, list(rows[0]))
    else:
        text = report.format_table() + "\n"
    _write(args, text, cfg)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _positive_int(v):
    try:
        n = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {v!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {v!r}")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="psinar", description="INAR(1) models with power-series thinning and Poisson-Lindley innovations")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, default_format):
        sp.add_argument("-o", "--output", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv", "text"), default=default_format)
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)

    def model_opts(sp, innovation=True):
        sp.add_argument("--family", choices=sorted(FAMILIES), default="bernoulli")
        if innovation:
            sp.add_argument("--innovation", choices=sorted(INNOVATIONS), default="pl")

    sp = sub.add_parser("simulate", help="simulate a series")
    common(sp, "csv")
    model_opts(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--theta", type=float, help="Poisson-Lindley theta")
    sp.add_argument("--param", type=float, help="innovation parameter (theta, lam or p)")
    sp.add_argument("--length", type=_positive_int, default=100)
    sp.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("describe", help="summary statistics of a series")
    sp.add_argument("input")
    common(sp, "text")
    sp.set_defaults(func=cmd_describe)

    sp = sub.add_parser("fit", help="estimate model parameters")
    sp.add_argument("input")
    common(sp, "json")
    model_opts(sp)
    sp.add_argument("--method", choices=(*METHODS, "all"), default="all")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("compare", help="fit and rank the five candidate models")
    sp.add_argument("input")
    common(sp, "text")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("predict", help="one-step-ahead predictions")
    sp.add_argument("input")
    common(sp, "csv")
    model_opts(sp)
    sp.add_argument("--method", choices=METHODS, default="cmle")
    sp.add_argument("--alpha", type=float, help="use this alpha instead of fitting")
    sp.add_argument("--theta", type=float)
    sp.add_argument("--param", type=float)
    sp.add_argument("--lag", choices=("observed", "predicted"), default="observed")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("mc-study", help="Monte Carlo study of the estimators")
    common(sp, "text")
    model_opts(sp, innovation=False)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--lengths", default="100,200,300")
    sp.add_argument("--replicates", type=_positive_int, default=1000)
    sp.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    sp.add_argument("--methods", default=",".join(METHODS))
    sp.add_argument("--n-jobs", type=int, default=1)
    sp.set_defaults(func=cmd_mc_study)
    return p


def _fail(kind, exc, code):
    record = {"error": {"type": kind, "message": str(exc), "exit_code": code}}
    sys.stderr.write(json.dumps(record) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        return _fail("configuration", exc, EXIT_CONFIG)
    try:
        args.func(args)
    except InputError as exc:
        return _fail("input", exc, EXIT_INPUT)
    except (EstimationError, ConvergenceError) as exc:
        return _fail("estimation", exc, EXIT_ESTIMATION)
    except (ConfigError, ValueError, TypeError) as exc:
        return _fail("configuration", exc, EXIT_CONFIG)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
