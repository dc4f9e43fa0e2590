"""Monte Carlo replication loop and summaries.

Every replication draws from its own stream ``default_rng([seed, 0, i])``
and fitted predictors are trained once per run from ``[seed, 1, 0]``, so a
run is bit-identical for a given configuration regardless of how
replications are distributed over worker processes.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from ..errors import InvalidInput, PPIError
from ..estimands import Estimand
from ..rectifier import LabeledUnlabeledData, ppi_md_form, ppi_no_shift, z_quantile
from ..shift import (
    LogisticConfig,
    ShiftSample,
    Target,
    fit_logistic_pi,
    ppi_shift,
    ppi_shift_estimated_pi,
)
from .dgp import DGPS, LABELINGS, labeling_design
from .predictors import Predictor, make_predictor

WORKERS_ENV = "GPPI_WORKERS"
DEFAULT_ESTIMANDS = ("mean", "tpr", "fpr", "auc")
DEFAULT_PREDICTORS = ("ideal", "logistic", "uniform")
LAMBDA_GRID = (0.01, 0.1, 0.25, 0.5, 0.8)


class ReplicationError(PPIError):
    """A replication failed; the message carries its index."""


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class SimConfig:
    """One simulation experiment.

    ``target=None`` runs the no-shift design: ``n`` labeled rows and
    ``round(n / lam)`` unlabeled rows, the first ``n`` rows being labeled.
    Otherwise ``pooled_size`` rows are labeled by Bernoulli draws from the
    ``labeling`` mechanism and estimated with the given shift target;
    ``pi="estimated"`` fits a logistic labeling model (full target only).
    """

    dgp: str = "main"
    n: int = 1000
    lam: float = 0.1
    pooled_size: int = 10_000
    predictors: tuple = DEFAULT_PREDICTORS
    estimands: tuple = DEFAULT_ESTIMANDS
    reps: int = 500
    seed: int = 0
    alpha_threshold: float = 0.6
    ci_levels: tuple = (0.8, 0.9, 0.95)
    target: str | None = None
    labeling: str = "main"
    pi: str = "known"
    md_form: bool = False
    train_size: int = 100_000
    workers: int | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise InvalidInput("reps must be at least 1")
        if self.n < 10:
            raise InvalidInput("n must be at least 10")
        if not self.lam > 0:
            raise InvalidInput("lambda must be positive")
        if self.dgp not in DGPS:
            raise InvalidInput(f"unknown dgp {self.dgp!r}; choose from {sorted(DGPS)}")
        if self.labeling not in LABELINGS:
            raise InvalidInput(f"unknown labeling {self.labeling!r}")
        if self.pi not in ("known", "estimated"):
            raise InvalidInput("pi must be 'known' or 'estimated'")
        if self.target is not None:
            self.target = Target(self.target).value
            if self.dgp != "main":
                raise InvalidInput("shift runs use the main dgp (labeling needs 4 covariates)")
            if self.pooled_size < 20:
                raise InvalidInput("pooled_size must be at least 20")
            if self.pi == "estimated" and self.target != Target.FULL.value:
                raise InvalidInput("estimated pi supports the full target only")
        elif self.pi == "estimated":
            raise InvalidInput("estimated pi needs a shift target")
        for level in self.ci_levels:
            z_quantile(level)
        self.predictors = tuple(self.predictors)
        self.estimands = tuple(self.estimands)
        self.ci_levels = tuple(sorted(self.ci_levels))
        self.parsed_estimands()

    @property
    def N(self) -> int:
        return max(1, round(self.n / self.lam))

    def parsed_estimands(self) -> list[Estimand]:
        out = []
        for spec in self.estimands:
            if isinstance(spec, Estimand):
                out.append(spec)
                continue
            text = str(spec).strip().lower()
            if text in ("tpr", "fpr"):
                out.append(Estimand.parse(text, self.alpha_threshold))
            else:
                out.append(Estimand.parse(text))
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["predictors"] = [p if isinstance(p, str) else p.name for p in self.predictors]
        d["estimands"] = [e.label for e in self.parsed_estimands()]
        d.pop("workers")
        return d


# ---------------------------------------------------------------------------
# population truth
# ---------------------------------------------------------------------------


TRUTH_ROWS = 40_000_000
_TRUTH_CHUNK = 500_000
_BIN_WIDTH = 1e-4
_BIN_LO = -10.0


def _cache_dir():
    return os.environ.get("GPPI_CACHE_DIR", os.path.join(os.path.expanduser("~"), ".cache", "gppi"))


def _population_values(labels, dgp, target, labeling, m, seed):
    """One chunked pass over ``m`` rows accumulating every requested estimand.

    Ratio estimands are exact sums over the rows.  AUC uses a histogram of
    the score with bins of width 1e-4 (within-bin pairs count one half,
    which is exact in the continuous limit).
    """
    ests = [Estimand.parse(lab) for lab in labels]
    rng = np.random.default_rng(seed)
    sums = {lab: np.zeros(2) for lab in labels}
    nbins = int(2 * -_BIN_LO / _BIN_WIDTH) + 1
    pos_hist = np.zeros(nbins)
    neg_hist = np.zeros(nbins)
    want_auc = any(e.kind.value == "auc" for e in ests)
    done = 0
    while done < m:
        k = min(_TRUTH_CHUNK, m - done)
        done += k
        d = DGPS[dgp](k, rng)
        r, p = d.scores, d.true_prob
        if target in (None, Target.FULL.value):
            w = np.ones(k)
        else:
            pi = LABELINGS[labeling](d.features)
            w = pi if target == Target.LABELED.value else 1 - pi
        for e, lab in zip(ests, labels):
            kind = e.kind.value
            if kind == "mean":
                sums[lab] += [np.dot(w, p), w.sum()]
            elif kind == "mse":
                # E[(Y - R)^2 | X] for Bernoulli Y
                sums[lab] += [np.dot(w, p * (1 - r) ** 2 + (1 - p) * r**2), w.sum()]
            elif kind in ("tpr", "fpr"):
                mass = w * (p if kind == "tpr" else 1 - p)
                sums[lab] += [np.dot(mass, r > e.alpha), mass.sum()]
        if want_auc:
            idx = np.clip(((r - _BIN_LO) / _BIN_WIDTH).astype(int), 0, nbins - 1)
            pos_hist += np.bincount(idx, w * p, nbins)
            neg_hist += np.bincount(idx, w * (1 - p), nbins)
    out = {}
    for e, lab in zip(ests, labels):
        if e.kind.value == "auc":
            neg_below = np.concatenate(([0.0], np.cumsum(neg_hist)[:-1]))
            wins = np.dot(pos_hist, neg_below + 0.5 * neg_hist)
            out[lab] = float(wins / (pos_hist.sum() * neg_hist.sum()))
        else:
            num, den = sums[lab]
            out[lab] = float(num / den)
    return out


_TRUTH_MEMO: dict = {}


def true_values(estimands, dgp: str = "main", target: str | None = None,
                labeling: str = "main", m: int = TRUTH_ROWS, seed: int = 20240601) -> dict:
    """Population values keyed by estimand label.

    Approximated by a large Monte Carlo pass (``m`` rows) and cached in
    memory and under ``$GPPI_CACHE_DIR`` (default ``~/.cache/gppi``).
    """
    target = None if target is None else Target(target).value
    if target in (None, Target.FULL.value):
        labeling = "-"
    labels = [e.label for e in estimands]
    key = f"{dgp}|{target}|{labeling}|{m}|{seed}"
    memo = _TRUTH_MEMO.setdefault(key, {})
    missing = [lab for lab in labels if lab not in memo]
    path = os.path.join(_cache_dir(), "truth.json")
    if missing:
        try:
            with open(path) as fh:
                memo.update(json.load(fh).get(key, {}))
        except (OSError, ValueError):
            pass
        missing = [lab for lab in labels if lab not in memo]
    if missing:
        memo.update(_population_values(missing, dgp, target, labeling, m, seed))
        try:
            os.makedirs(_cache_dir(), exist_ok=True)
            try:
                with open(path) as fh:
                    disk = json.load(fh)
            except (OSError, ValueError):
                disk = {}
            disk.setdefault(key, {}).update(memo)
            tmp = f"{path}.{os.getpid()}.tmp"
            with open(tmp, "w") as fh:
                json.dump(disk, fh, indent=1, sort_keys=True)
            os.replace(tmp, path)
        except OSError:
            pass
    return {lab: memo[lab] for lab in labels}


def true_value(e: Estimand, dgp: str = "main", target: str | None = None,
               labeling: str = "main", m: int = TRUTH_ROWS) -> float:
    return true_values([e], dgp, target, labeling, m)[e.label]


# ---------------------------------------------------------------------------
# replications
# ---------------------------------------------------------------------------


def _record(i, predictor, e, method, res, truth):
    return {
        "rep": i,
        "predictor": predictor,
        "estimand": e.label,
        "method": method,
        "point": res.point,
        "se": res.se,
        "baseline_point": res.baseline_point,
        "baseline_se": res.baseline_se,
        "se_ratio": res.se_ratio,
        "omega_hat": res.omega_hat,
        "truth": truth,
    }


def _replicate_no_shift(i, cfg, predictors, estimands, truths):
    rng = np.random.default_rng([cfg.seed, 0, i])
    n = cfg.n
    data = DGPS[cfg.dgp](n + cfg.N, rng)
    r, y = data.scores, data.labels
    c = np.zeros(len(data))
    c[:n] = 1
    y_obs = np.where(c == 1, y, np.nan)
    out = []
    for pred in predictors:
        f = pred.predict(data, rng)
        lud = LabeledUnlabeledData(r[:n], f[:n], y[:n], r[n:], f[n:])
        for e in estimands:
            res = ppi_no_shift(e, lud)
            out.append(_record(i, pred.name, e, "ppi", res, truths[e.label]))
            if cfg.md_form:
                res = ppi_md_form(e, r, f, y_obs, c)
                out.append(_record(i, pred.name, e, "md", res, truths[e.label]))
    return out


def _replicate_shift(i, cfg, predictors, estimands, truths):
    rng = np.random.default_rng([cfg.seed, 0, i])
    data = DGPS[cfg.dgp](cfg.pooled_size, rng)
    pi = LABELINGS[cfg.labeling](data.features)
    c = (rng.random(len(data)) < pi).astype(float)
    y_obs = np.where(c == 1, data.labels, np.nan)
    model = None
    if cfg.pi == "estimated":
        model = fit_logistic_pi(labeling_design(data.features), c, LogisticConfig())
    out = []
    for pred in predictors:
        f = pred.predict(data, rng)
        if model is None:
            s = ShiftSample(data.scores, f, y_obs, c, pi)
        else:
            s = ShiftSample(data.scores, f, y_obs, c)
        for e in estimands:
            if model is None:
                res = ppi_shift(e, s, cfg.target)
                method = "ppi"
            else:
                res = ppi_shift_estimated_pi(e, s, model)
                method = "ppi-estpi"
            out.append(_record(i, pred.name, e, method, res, truths[e.label]))
    return out


def _run_chunk(args):
    indices, cfg, predictors, estimands, truths = args
    step = _replicate_no_shift if cfg.target is None else _replicate_shift
    out = []
    for i in indices:
        try:
            out.extend(step(i, cfg, predictors, estimands, truths))
        except Exception as exc:  # noqa: BLE001 - re-raised with the replication index
            raise ReplicationError(f"replication {i} failed: {type(exc).__name__}: {exc}") from exc
    return out


def build_predictors(cfg: SimConfig) -> list[Predictor]:
    train_rng = np.random.default_rng([cfg.seed, 1, 0])
    return [make_predictor(p, cfg.dgp, train_rng, cfg.train_size) for p in cfg.predictors]


def run_replications(cfg: SimConfig, shift: str | Target | None = None) -> "SimSummary":
    """Run ``cfg.reps`` replications and summarize them.

    ``shift`` overrides ``cfg.target`` when given.
    """
    if shift is not None:
        cfg = SimConfig(**{**asdict(cfg), "target": Target(shift).value})
    estimands = cfg.parsed_estimands()
    predictors = build_predictors(cfg)
    truths = true_values(estimands, cfg.dgp, cfg.target, cfg.labeling)

    workers = cfg.workers or default_workers()
    indices = list(range(cfg.reps))
    if workers <= 1 or cfg.reps < 2:
        records = _run_chunk((indices, cfg, predictors, estimands, truths))
    else:
        chunks = [indices[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk,
                             [(ch, cfg, predictors, estimands, truths) for ch in chunks if ch])
            records = [rec for part in parts for rec in part]
    frame = pd.DataFrame.from_records(records)
    frame = frame.sort_values(["rep"], kind="stable").reset_index(drop=True)
    return SimSummary.from_records(cfg, frame)


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------


def _mcse_mean(x):
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("nan")


def _mcse_prop(p, k):
    return math.sqrt(p * (1 - p) / k)


@dataclass
class SimSummary:
    """Per (predictor, estimand, method) summaries with Monte Carlo SEs."""

    config: dict
    table: pd.DataFrame
    records: pd.DataFrame = field(repr=False)

    @classmethod
    def from_records(cls, cfg: SimConfig, records: pd.DataFrame) -> "SimSummary":
        rows = []
        keys = ["predictor", "estimand", "method"]
        order = {name: k for k, name in enumerate(records["predictor"].unique())}
        for (pred, est, method), g in records.groupby(keys, sort=False):
            k = len(g)
            err = g["point"] - g["truth"]
            base_err = g["baseline_point"] - g["truth"]
            row = {
                "predictor": pred,
                "estimand": est,
                "method": method,
                "reps": k,
                "truth": float(g["truth"].iloc[0]),
                "se_ratio": float(g["se_ratio"].mean()),
                "se_ratio_mcse": _mcse_mean(g["se_ratio"]),
                "bias": float(err.mean()),
                "bias_mcse": _mcse_mean(err),
                "mean_se": float(g["se"].mean()),
                "empirical_sd": float(g["point"].std(ddof=1)) if k > 1 else float("nan"),
                "baseline_empirical_sd": float(g["baseline_point"].std(ddof=1)) if k > 1 else float("nan"),
                "se_violations": int((g["se"] > g["baseline_se"]).sum()),
            }
            for level in cfg.ci_levels:
                z = z_quantile(level)
                hit = float((err.abs() <= z * g["se"]).mean())
                base_hit = float((base_err.abs() <= z * g["baseline_se"]).mean())
                tag = f"{level:g}"
                row[f"coverage_{tag}"] = hit
                row[f"coverage_{tag}_mcse"] = _mcse_prop(hit, k)
                row[f"baseline_coverage_{tag}"] = base_hit
            rows.append(row)
        table = pd.DataFrame(rows)
        table["_o"] = table["predictor"].map(order)
        table = table.sort_values("_o", kind="stable").drop(columns="_o").reset_index(drop=True)
        return cls(cfg.to_dict(), table, records)

    def row(self, predictor: str, estimand: str, method: str | None = None) -> pd.Series:
        t = self.table
        mask = (t["predictor"] == predictor) & (t["estimand"] == estimand)
        if method is not None:
            mask &= t["method"] == method
        hits = t[mask]
        if len(hits) != 1:
            raise KeyError((predictor, estimand, method))
        return hits.iloc[0]

    def to_dict(self) -> dict:
        # undefined Monte Carlo SEs (e.g. a single replication) become null
        table = self.table.astype(object).where(self.table.notna(), None)
        return {"config": self.config, "summary": table.to_dict(orient="records")}

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)

    def to_text(self) -> str:
        cols = ["predictor", "estimand", "method", "reps", "se_ratio", "se_ratio_mcse",
                "bias", "bias_mcse"]
        cols += [c for c in self.table.columns
                 if c.startswith("coverage_") and not c.endswith("_mcse")]
        return self.table[cols].to_string(index=False, float_format=lambda v: f"{v:.6g}")

    def write(self, out_dir) -> dict:
        """Write ``summary.json``, ``summary.txt``, ``summary.csv`` and
        ``replications.csv`` into ``out_dir``; returns the paths."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "json": os.path.join(out_dir, "summary.json"),
            "text": os.path.join(out_dir, "summary.txt"),
            "csv": os.path.join(out_dir, "summary.csv"),
            "records": os.path.join(out_dir, "replications.csv"),
        }
        with open(paths["json"], "w") as fh:
            fh.write(self.to_json() + "\n")
        with open(paths["text"], "w") as fh:
            fh.write(self.to_text() + "\n")
        self.table.to_csv(paths["csv"], index=False)
        self.records.to_csv(paths["records"], index=False)
        return paths
