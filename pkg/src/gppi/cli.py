"""Command-line interface: ``gppi estimate | simulate | wine``.

Exit codes: 0 success, 2 data or configuration error, 3 degenerate estimand
(e.g. a TPR with no positive mass).
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import warnings

import numpy as np
import pandas as pd

from . import __version__
from .errors import DegenerateDenominator, InvalidInput, MissingColumn, PPIError
from .estimands import Estimand
from .rectifier import LabeledUnlabeledData, Mode, ppi_no_shift
from .shift import (
    LogisticConfig,
    ShiftSample,
    Target,
    fit_logistic_pi,
    ppi_shift,
    ppi_shift_estimated_pi,
)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_DEGENERATE = 3


class UsageError(PPIError):
    """Invalid flag combination."""


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _print_report(report: dict, fmt: str, out=None):
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(report, indent=2) + "\n")
        return
    width = max(len(k) for k in report)
    for key, value in report.items():
        out.write(f"{key:<{width}}  {_fmt(value)}\n")


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def _rows(mask) -> str:
    idx = np.flatnonzero(mask)
    # report 1-based data-row numbers (header excluded)
    shown = ", ".join(str(i + 1) for i in idx[:10])
    return shown + (" ..." if len(idx) > 10 else "")


def read_dataset(path, sep=","):
    """Load and validate a dataset file; returns a dict of columns."""
    try:
        df = pd.read_csv(path, sep=sep, float_precision="round_trip")
    except FileNotFoundError:
        raise InvalidInput(f"no such file: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InvalidInput(f"cannot parse {path}: {exc}") from None
    df.columns = [str(c).strip() for c in df.columns]
    for col in ("r", "f"):
        if col not in df.columns:
            raise MissingColumn(f"required column {col!r} is missing (found {list(df.columns)})")
    num = {}
    for col in df.columns:
        values = pd.to_numeric(df[col], errors="coerce")
        bad = values.isna() & df[col].notna()
        if bad.any():
            raise InvalidInput(f"column {col!r} has non-numeric values at rows {_rows(bad)}")
        num[col] = values.to_numpy(dtype=float)
    for col in ("r", "f"):
        missing = np.isnan(num[col])
        if missing.any():
            raise InvalidInput(f"column {col!r} is empty at rows {_rows(missing)}")
    f = num["f"]
    if np.any((f < 0) | (f > 1)):
        raise InvalidInput(f"predictions outside [0, 1] at rows {_rows((f < 0) | (f > 1))}")
    y = num.get("y", np.full(len(df), np.nan))
    has_y = ~np.isnan(y)
    if "c" in num:
        c = num["c"]
        if np.any(np.isnan(c)) or not np.all((c == 0) | (c == 1)):
            raise InvalidInput(f"column 'c' must be 0/1 at rows {_rows(~((c == 0) | (c == 1)))}")
        if np.any((c == 1) & ~has_y):
            raise InvalidInput(f"labeled rows without y at rows {_rows((c == 1) & ~has_y)}")
        if np.any((c == 0) & has_y):
            raise InvalidInput(f"unlabeled rows with y present at rows {_rows((c == 0) & has_y)}")
    else:
        warnings.warn("no 'c' column: labeling inferred from presence of y", stacklevel=2)
        c = has_y.astype(float)
    if np.any(has_y & ((y < 0) | (y > 1))):
        raise InvalidInput(f"labels outside [0, 1] at rows {_rows(has_y & ((y < 0) | (y > 1)))}")
    num["y"] = y
    num["c"] = c
    return num, list(df.columns)


def _estimand_from_args(args) -> Estimand:
    if args.metric in ("tpr", "fpr") and args.alpha is None:
        raise UsageError(f"--metric {args.metric} needs --alpha")
    return Estimand(args.metric, args.alpha if args.metric in ("tpr", "fpr") else None)


def run_estimate(args) -> dict:
    e = _estimand_from_args(args)
    cols, names = read_dataset(args.file, args.sep)
    r, f, y, c = cols["r"], cols["f"], cols["y"], cols["c"]

    pi_mode = args.pi
    fit_features = None
    if pi_mode.startswith("fit"):
        _, _, spec = pi_mode.partition(":")
        fit_features = [s.strip() for s in spec.split(",") if s.strip()]
        if not fit_features:
            fit_features = [n for n in names if n.startswith("x")]
        if not fit_features:
            raise UsageError("--pi fit needs feature columns (x1..xk or fit:<list>)")
        missing = [n for n in fit_features if n not in cols]
        if missing:
            raise MissingColumn(f"--pi fit: feature columns {missing} not in file")
        if args.target not in (None, "full"):
            raise UsageError("--pi fit supports the full target only")
        target = "full"
    else:
        target = args.target or "none"

    if (1 - c).sum() < 1:
        raise InvalidInput("no unlabeled data")
    if c.sum() < 2:
        raise InvalidInput("need at least 2 labeled rows")

    report = {"estimand": e.label, "target": target, "n_labeled": int(c.sum()),
              "n_unlabeled": int((1 - c).sum())}
    if target == "none":
        if pi_mode not in ("auto", "none"):
            raise UsageError("--pi only applies with a shift target")
        data = LabeledUnlabeledData.from_pooled(r, f, y, c)
        res = ppi_no_shift(e, data, level=args.level, mode=Mode(args.rectifier))
    else:
        sample_pi = None
        if fit_features is None:
            if pi_mode == "none":
                raise UsageError("shift targets need --pi known or --pi fit:<features>")
            if "pi" not in cols:
                raise MissingColumn("shift target with known pi needs a 'pi' column")
            sample_pi = cols["pi"]
            if np.any(np.isnan(sample_pi)):
                raise InvalidInput(f"column 'pi' is empty at rows {_rows(np.isnan(sample_pi))}")
        sample = ShiftSample(r, f, y, c, sample_pi)
        if fit_features is None:
            res = ppi_shift(e, sample, Target(target), level=args.level)
        else:
            x = np.column_stack([cols[n] for n in fit_features])
            model = fit_logistic_pi(x, c, LogisticConfig(ridge=args.ridge))
            res = ppi_shift_estimated_pi(e, sample, model, level=args.level)
            report["pi_features"] = ",".join(fit_features)
    report.update(res.to_dict())
    return report


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _csv_list(text):
    """Split on commas that are not inside parentheses."""
    return tuple(s.strip() for s in re.split(r",(?![^(]*\))", text) if s.strip())


def run_simulate(args, out=None) -> int:
    from .sim.harness import SimConfig, run_replications

    out = out or sys.stdout
    summaries = []
    for lam in args.lam:
        cfg = SimConfig(
            dgp=args.dgp, n=args.n, lam=lam, pooled_size=args.pooled_size,
            predictors=_csv_list(args.predictors), estimands=_csv_list(args.estimands),
            reps=args.reps, seed=args.seed, alpha_threshold=args.alpha,
            ci_levels=tuple(float(v) for v in _csv_list(args.levels)),
            target=None if args.target == "none" else args.target,
            labeling=args.labeling, pi=args.pi, md_form=args.md_form,
            train_size=args.train_size, workers=args.workers,
        )
        summaries.append(run_replications(cfg))
    if args.out:
        for lam, s in zip(args.lam, summaries):
            sub = args.out if len(summaries) == 1 else os.path.join(args.out, f"lam={lam:g}")
            s.write(sub)
    if args.format == "json":
        payload = [s.to_dict() for s in summaries]
        out.write(json.dumps(payload[0] if len(payload) == 1 else payload, indent=2) + "\n")
    else:
        for lam, s in zip(args.lam, summaries):
            if len(summaries) > 1:
                out.write(f"lambda = {lam:g}\n")
            out.write(s.to_text() + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# wine
# ---------------------------------------------------------------------------


def run_wine(args, out=None) -> int:
    from .sim.wine import find_wine_files, wine_analysis

    out = out or sys.stdout
    red, white = args.red, args.white
    if red is None or white is None:
        found = find_wine_files(args.data_dir)
        if found is None:
            raise InvalidInput("wine CSVs not found: pass --red/--white or set GPPI_WINE_DIR")
        red, white = red or found[0], white or found[1]
    report = wine_analysis(red, white, model_train_size=args.train_size, seed=args.seed,
                           split_seed=args.split_seed)
    if args.format == "json":
        out.write(json.dumps(report.to_dict(), indent=2) + "\n")
    else:
        out.write(report.to_text() + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _level(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    from .sim.harness import DEFAULT_ESTIMANDS, DEFAULT_PREDICTORS, default_workers

    p = argparse.ArgumentParser(prog="gppi", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="PPI estimate from a dataset file")
    est.add_argument("file")
    est.add_argument("--metric", choices=["mean", "tpr", "fpr", "auc", "mse"], default="mean")
    est.add_argument("--alpha", type=float, help="score threshold for tpr/fpr")
    est.add_argument("--target", choices=["none", "full", "unlabeled", "labeled"], default=None,
                     help="shift target (default none; --pi fit implies full)")
    est.add_argument("--pi", default="auto",
                     help="known | fit[:x1,x2,...] | none (default: known for shift targets)")
    est.add_argument("--level", type=_level, default=0.95)
    est.add_argument("--rectifier", choices=["all", "only-n"], default="all")
    est.add_argument("--ridge", type=float, default=0.0, help="ridge penalty for --pi fit")
    est.add_argument("--sep", default=",", help="field delimiter (default ',')")
    est.add_argument("--format", choices=["json", "table"], default="table")

    sim = sub.add_parser("simulate", help="Monte Carlo replications")
    sim.add_argument("--dgp", choices=["main", "alt"], default="main")
    sim.add_argument("--n", type=int, default=1000)
    sim.add_argument("--lam", type=float, nargs="+", default=[0.1],
                     help="one or more n/N ratios (no-shift runs)")
    sim.add_argument("--pooled-size", type=int, default=10_000, help="n+N for shift runs")
    sim.add_argument("--predictors", default=",".join(DEFAULT_PREDICTORS),
                     help="comma list of ideal, uniform, logistic, logistic(x1,x2)")
    sim.add_argument("--estimands", default=",".join(DEFAULT_ESTIMANDS))
    sim.add_argument("--alpha", type=float, default=0.6, help="threshold for tpr/fpr")
    sim.add_argument("--levels", default="0.8,0.9,0.95")
    sim.add_argument("--reps", type=int, default=500)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--target", choices=["none", "full", "unlabeled", "labeled"], default="none")
    sim.add_argument("--labeling", choices=["main", "logistic"], default="main")
    sim.add_argument("--pi", choices=["known", "estimated"], default="known")
    sim.add_argument("--md-form", action="store_true", help="also run the missing-data form")
    sim.add_argument("--train-size", type=int, default=100_000)
    sim.add_argument("--workers", type=int, default=default_workers(),
                     help="worker processes (default $GPPI_WORKERS or 1)")
    sim.add_argument("--out", help="directory for summary.json/.txt/.csv")
    sim.add_argument("--format", choices=["json", "table"], default="table")

    wine = sub.add_parser("wine", help="wine density as a biomarker of colour")
    wine.add_argument("--red")
    wine.add_argument("--white")
    wine.add_argument("--data-dir")
    wine.add_argument("--seed", type=int, default=0, help="labeling seed")
    wine.add_argument("--split-seed", type=int, default=0, help="model-building split seed")
    wine.add_argument("--train-size", type=int, default=2000)
    wine.add_argument("--format", choices=["json", "table"], default="table")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                if args.command == "estimate":
                    _print_report(run_estimate(args), args.format)
                    return EXIT_OK
                if args.command == "simulate":
                    return run_simulate(args)
                return run_wine(args)
            finally:
                for w in caught:
                    print(f"gppi: warning: {w.message}", file=sys.stderr)
    except DegenerateDenominator as exc:
        print(f"gppi: degenerate estimand: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (PPIError, ValueError, OSError) as exc:
        print(f"gppi: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
