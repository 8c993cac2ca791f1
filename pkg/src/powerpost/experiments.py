"""Replication harness for data-driven tempering.

Simulates the three-covariate linear model, tunes ``alpha`` with each
selection method, fits ``log alpha_hat = log C + gamma log n`` to the
non-corner selections and sorts the result into one of three regimes.  The
same machinery runs on subsamples of a wage CSV.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import (
    ConfigError,
    InsufficientData,
    ParseError,
    PowerPostError,
    SizeTooLarge,
)
from .linmodel import Dataset, ModelSpec, apply_spec, estimate_sigma2, read_csv_columns
from .parallel import pmap
from .rng import stream
from .tuning import DATA_GRIDS, METHODS, SIMULATION_GRIDS, tune

log = logging.getLogger(__name__)

PAPER_BETA_MISSPECIFIED = (1.0, -0.5, 0.1)
PAPER_BETA_WELL = (0.0, -0.5, 0.1)
SPEC_LABELS = {True: "misspecified", False: "well-specified"}
AGGREGATES = ("pooled", "mean")

# regime thresholds; calibrated by hand, not normative
CORNER_FREE = 0.05
VANISHING_CEILING = -0.85
MIXED_CORNER_BAND = (0.2, 0.8)
MIXED_SLOPE_CEILING = -0.3
CONSTANT_BAND = 0.1


# --- simulation --------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """One simulation cell.

    The data have ``p`` standard-normal covariates and unit noise; the working
    model keeps ``working_columns`` only.  ``misspecified`` must agree with
    ``beta_star``: it is true exactly when an omitted column has a non-zero
    coefficient.
    """

    n: int
    beta_star: tuple = PAPER_BETA_MISSPECIFIED
    misspecified: bool = True
    reps: int = 1
    master_seed: int = 0
    p: int = 3
    working_columns: tuple = (1, 2)

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if len(self.beta_star) != self.p:
            raise ConfigError(f"beta_star has {len(self.beta_star)} entries, expected p={self.p}")
        if any(not 0 <= c < self.p for c in self.working_columns):
            raise ConfigError("working column outside the design")
        omitted = [j for j in range(self.p) if j not in self.working_columns]
        truly = any(self.beta_star[j] != 0 for j in omitted)
        if truly != bool(self.misspecified):
            raise ConfigError(
                f"misspecified={self.misspecified} contradicts beta_star={self.beta_star} "
                f"with working columns {self.working_columns}")

    @classmethod
    def standard(cls, n: int, misspecified: bool, reps: int = 1, master_seed: int = 0) -> "SimConfig":
        beta = PAPER_BETA_MISSPECIFIED if misspecified else PAPER_BETA_WELL
        return cls(n=n, beta_star=beta, misspecified=misspecified, reps=reps,
                   master_seed=master_seed)

    @property
    def spec(self) -> str:
        return SPEC_LABELS[bool(self.misspecified)]


def generate(sim: SimConfig, rep: int) -> Dataset:
    """Working-model dataset for replication ``rep``; a pure function of ``(seed, n, rep)``."""
    if not 0 <= rep < sim.reps:
        raise ConfigError(f"rep {rep} outside [0, {sim.reps})")
    rng = stream(sim.master_seed, sim.n, rep, "data")
    X = rng.standard_normal((sim.n, sim.p))
    y = X @ np.asarray(sim.beta_star, dtype=float) + rng.standard_normal(sim.n)
    return Dataset(X[:, list(sim.working_columns)], y)


@dataclass(frozen=True)
class AlphaSample:
    n: int
    method: str
    replication: int
    alpha_hat: float
    is_corner: bool
    spec: str = ""
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _split_seed(master: int, *keys) -> int:
    return int(stream(master, *keys, "split-seed").integers(0, 2 ** 62))


def _tune_all(d: Dataset, methods, grids, seed: int, n_label: int, rep: int, spec: str) -> list:
    out = []
    for m in methods:
        try:
            r = tune(d, m, grids[m], seed=seed)
            out.append(AlphaSample(n_label, m, rep, r.alpha_hat, r.is_corner, spec))
        except PowerPostError as exc:
            log.warning("n=%d rep=%d method=%s failed: %s", n_label, rep, m, exc)
            out.append(AlphaSample(n_label, m, rep, math.nan, False, spec,
                                   f"failed: {type(exc).__name__}"))
    return out


def _replication(task) -> list:
    sim, methods, grids, rep = task
    d = generate(sim, rep)
    seed = _split_seed(sim.master_seed, sim.n, rep)
    return _tune_all(d, methods, grids, seed, sim.n, rep, sim.spec)


def run_replications(sim: SimConfig, methods=METHODS, grids: dict | None = None,
                     threads: int = 1) -> list:
    """Tune every method on every replication of ``sim``.

    The data (and the train-test split) depend only on ``(master_seed, n, rep)``,
    so every method sees the same datasets and the output does not depend on
    ``threads``.  Failed fits are kept with ``status`` set and ``alpha_hat``
    NaN.
    """
    grids = {**SIMULATION_GRIDS, **(grids or {})}
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
    tasks = [(sim, tuple(methods), grids, rep) for rep in range(sim.reps)]
    return [s for chunk in pmap(_replication, tasks, threads) for s in chunk]


def run_study(n_grid, cells, reps: int, seed: int, grids: dict | None = None,
              threads: int = 1) -> list:
    """Run ``(method, misspecified)`` cells over ``n_grid``; rows ordered by spec, n, rep, method."""
    by_spec: dict[bool, list] = {}
    for method, mis in cells:
        by_spec.setdefault(bool(mis), [])
        if method not in by_spec[bool(mis)]:
            by_spec[bool(mis)].append(method)
    out = []
    for mis in sorted(by_spec, reverse=True):
        for n in n_grid:
            sim = SimConfig.standard(int(n), mis, reps, seed)
            out.extend(run_replications(sim, by_spec[mis], grids, threads))
    return out


# --- rate regression ---------------------------------------------------------

@dataclass(frozen=True)
class RegimeEstimate:
    gamma_hat: float
    ci_low: float
    ci_high: float
    log_c: float
    corner_proportion: float
    n_points_used: int
    corner_by_n: dict = field(default_factory=dict)
    dropped_nonpositive: int = 0
    failed: int = 0
    aggregate: str = "pooled"

    @property
    def corner_at_largest_n(self) -> float:
        return self.corner_by_n[max(self.corner_by_n)]


def _ols_slope(x, y):
    X = np.column_stack([np.ones_like(x), x])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = x.size - 2
    resid = y - X @ beta
    if dof <= 0:
        se = 0.0 if np.allclose(resid, 0) else math.inf
    else:
        se = math.sqrt(float(resid @ resid) / dof * np.linalg.inv(X.T @ X)[1, 1])
    return float(beta[0]), float(beta[1]), se


def estimate_rate(samples, aggregate: str = "pooled", level: float = 0.95) -> RegimeEstimate:
    """Fit ``log alpha_hat = log C + gamma log n`` to the non-corner samples.

    ``aggregate="pooled"`` regresses every replication's point;
    ``aggregate="mean"`` first averages the non-corner ``alpha_hat`` within
    each ``n``.  Selections at or below zero cannot enter the log fit and are
    dropped and counted.  The confidence interval is normal-theory from the
    OLS slope standard error.
    """
    if aggregate not in AGGREGATES:
        raise ConfigError(f"aggregate must be one of {AGGREGATES}")
    samples = list(samples)
    good = [s for s in samples if s.ok]
    if not good:
        raise InsufficientData("no successful samples")
    ns = sorted({s.n for s in good})
    corner_by_n = {n: float(np.mean([s.is_corner for s in good if s.n == n])) for n in ns}
    usable = [s for s in good if not s.is_corner and s.alpha_hat > 0]
    dropped = sum(1 for s in good if not s.is_corner and not s.alpha_hat > 0)
    if len({s.n for s in usable}) < 2:
        raise InsufficientData("need non-corner samples at two or more sample sizes")
    if aggregate == "pooled":
        x = np.log([s.n for s in usable])
        y = np.log([s.alpha_hat for s in usable])
    else:
        kept = sorted({s.n for s in usable})
        x = np.log(kept)
        y = np.log([np.mean([s.alpha_hat for s in usable if s.n == n]) for n in kept])
    log_c, gamma, se = _ols_slope(np.asarray(x, float), np.asarray(y, float))
    z = float(stats.norm.ppf(0.5 + level / 2))
    half = z * se if se > 0 else 0.0
    return RegimeEstimate(
        gamma_hat=gamma, ci_low=gamma - half, ci_high=gamma + half, log_c=log_c,
        corner_proportion=float(np.mean([s.is_corner for s in good])),
        n_points_used=int(x.size), corner_by_n=corner_by_n,
        dropped_nonpositive=dropped, failed=len(samples) - len(good), aggregate=aggregate,
    )


REGIMES = ("constant", "quickly_vanishing", "mixed", "unclassified")


def classify_regime(samples, aggregate: str = "pooled") -> tuple[str, RegimeEstimate]:
    """Label the asymptotic behaviour of ``alpha_hat``.

    * constant: no corners to speak of, and the exponent CI either covers 0
      or sits inside ``[-0.1, 0.1]``
    * quickly_vanishing: no corners, exponent CI at or below -0.85
    * mixed: corner share at the largest ``n`` in ``[0.2, 0.8]`` with the
      non-corner exponent below -0.3
    * unclassified: anything else
    """
    est = estimate_rate(samples, aggregate)
    if len(est.corner_by_n) < 2:
        raise InsufficientData("need samples at two or more sample sizes")
    corner_free = est.corner_proportion < CORNER_FREE
    covers_zero = est.ci_low <= 0 <= est.ci_high
    near_zero = -CONSTANT_BAND <= est.ci_low and est.ci_high <= CONSTANT_BAND
    if corner_free and (covers_zero or near_zero):
        return "constant", est
    if corner_free and est.ci_high <= VANISHING_CEILING:
        return "quickly_vanishing", est
    lo, hi = MIXED_CORNER_BAND
    if lo <= est.corner_at_largest_n <= hi and est.gamma_hat < MIXED_SLOPE_CEILING:
        return "mixed", est
    return "unclassified", est


def rate_table(samples, aggregate: str = "pooled") -> list:
    """One row per ``(method, spec)`` with the fitted exponent and regime."""
    samples = list(samples)
    rows = []
    for method, spec in sorted({(s.method, s.spec) for s in samples},
                               key=lambda k: (METHODS.index(k[0]) if k[0] in METHODS else 99, k[1])):
        cell = [s for s in samples if s.method == method and s.spec == spec]
        try:
            regime, est = classify_regime(cell, aggregate)
        except InsufficientData as exc:
            log.warning("%s/%s: %s", method, spec, exc)
            good = [s for s in cell if s.ok]
            corner = float(np.mean([s.is_corner for s in good])) if good else math.nan
            rows.append({"method": method, "spec": spec, "gamma_hat": math.nan,
                         "ci_low": math.nan, "ci_high": math.nan, "log_c": math.nan,
                         "corner_proportion": corner, "n_points_used": 0,
                         "aggregate": aggregate, "regime": "unclassified"})
            continue
        rows.append({"method": method, "spec": spec, "gamma_hat": est.gamma_hat,
                     "ci_low": est.ci_low, "ci_high": est.ci_high, "log_c": est.log_c,
                     "corner_proportion": est.corner_proportion,
                     "n_points_used": est.n_points_used, "aggregate": aggregate,
                     "regime": regime})
    return rows


# --- real-data subsampling ---------------------------------------------------

@dataclass(frozen=True)
class WageColumns:
    """CSV headers for the wage data and the ethnicity reference level."""

    wage: str = "wage"
    education: str = "education"
    experience: str = "experience"
    ethnicity: str = "ethnicity"
    reference_level: str = "cauc"


# raw design columns: 0 education, 1 ethnicity indicator, 2 experience
WAGE_SPECS = {
    "full": ModelSpec((0, 1, 2), True, ((2, "square"),), "full"),
    "no-ethnicity": ModelSpec((0, 2), True, ((2, "square"),), "no-ethnicity"),
    "no-experience2": ModelSpec((0, 1, 2), True, (), "no-experience2"),
}


def load_wage_data(path, columns: WageColumns = WageColumns()) -> Dataset:
    """Raw design (education, ethnicity indicator, experience) and log wage."""
    cols = read_csv_columns(path, [columns.wage, columns.education, columns.experience,
                                   columns.ethnicity])
    try:
        wage = cols[columns.wage].astype(float)
        edu = cols[columns.education].astype(float)
        exp_ = cols[columns.experience].astype(float)
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric wage, education or experience") from exc
    if np.any(wage <= 0):
        raise ParseError(f"{path}: wages must be positive to take logs")
    eth = np.asarray(cols[columns.ethnicity]).astype(str)
    ref = str(columns.reference_level)
    if ref not in set(eth):
        # numeric columns come back as floats; compare on the float value too
        try:
            indicator = (np.asarray(cols[columns.ethnicity], float) != float(ref)).astype(float)
        except ValueError as exc:
            raise ParseError(f"{path}: reference level {ref!r} not present") from exc
    else:
        indicator = (eth != ref).astype(float)
    return Dataset(np.column_stack([edu, indicator, exp_]), np.log(wage))


def _subsample_task(task) -> list:
    raw, specs, methods, grids, size, rep, seed = task
    rows = stream(seed, "subsample", size, rep).choice(raw.n, size=size, replace=False)
    sub = raw.subset(np.sort(rows))
    out = []
    for name, spec in specs.items():
        d = apply_spec(sub, spec)
        d = d.with_sigma2(estimate_sigma2(d))
        out.extend(_tune_all(d, methods, grids, _split_seed(seed, size, rep), size, rep, name))
    return out


def subsample_study(raw: Dataset, specs: dict | None = None, sizes=(100, 1000, 5000),
                    reps: int = 100, methods=METHODS, seed: int = 0,
                    grids: dict | None = None, threads: int = 1,
                    aggregate: str = "pooled") -> tuple[list, list]:
    """Tune on uniform without-replacement subsamples of a real dataset.

    Each subsample has its own plug-in noise variance ``RSS / (n - p)`` under
    each working model.  Returns the per-fit samples and the rate table.
    """
    specs = WAGE_SPECS if specs is None else specs
    grids = {**DATA_GRIDS, **(grids or {})}
    for size in sizes:
        if size > raw.n:
            raise SizeTooLarge(f"subsample size {size} exceeds dataset size {raw.n}")
        if size < 2:
            raise ConfigError("subsample size must be >= 2")
    tasks = [(raw, specs, tuple(methods), grids, int(size), rep, seed)
             for size in sizes for rep in range(reps)]
    samples = [s for chunk in pmap(_subsample_task, tasks, threads) for s in chunk]
    return samples, rate_table(samples, aggregate)


# --- CSV I/O -----------------------------------------------------------------

ALPHA_COLUMNS = ("n", "method", "spec", "rep", "alpha_hat", "is_corner", "status")
RATE_COLUMNS = ("method", "spec", "gamma_hat", "ci_low", "ci_high", "log_c",
                "corner_proportion", "n_points_used", "aggregate", "regime")


def fmt(v) -> str:
    """Stable text form of a CSV cell; infinities become ``inf``."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_rows(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])


def write_alpha_samples(path, samples) -> None:
    write_rows(path, ALPHA_COLUMNS, (
        {"n": s.n, "method": s.method, "spec": s.spec, "rep": s.replication,
         "alpha_hat": s.alpha_hat, "is_corner": s.is_corner, "status": s.status}
        for s in samples))


def read_alpha_samples(path) -> list:
    cols = read_csv_columns(path, ["n", "method", "rep", "alpha_hat", "is_corner"])
    extra = read_csv_columns(path)
    k = len(cols["n"])
    spec = extra.get("spec", np.array([""] * k)).astype(str)
    status = extra.get("status", np.array(["ok"] * k)).astype(str)
    try:
        return [AlphaSample(int(cols["n"][i]), str(cols["method"][i]), int(cols["rep"][i]),
                            float(cols["alpha_hat"][i]), bool(int(float(cols["is_corner"][i]))),
                            str(spec[i]), str(status[i]))
                for i in range(k)]
    except ValueError as exc:
        raise ParseError(f"{path}: malformed alpha sample row: {exc}") from exc


def write_rates(path, rows) -> None:
    write_rows(path, RATE_COLUMNS, rows)

