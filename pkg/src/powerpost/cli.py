"""Command-line entry point: ``powerpost <command> [options]``.

Settings are layered: built-in defaults, then ``--preset``, then the INI
file given by ``--config``, then explicit flags.  Every run writes its data
files, optional SVG figures and a ``manifest.json`` into ``--out``.

Config file layout (all keys optional)::

    [run]
    seed = 7
    reps = 50
    n_grid = 100,1000,5000
    methods = bcv,bcv-vi
    spec = misspecified          ; misspecified | well-specified | both
    threads = 1
    aggregate = pooled           ; pooled | mean

    [grids]
    bcv = 1e-12:10:200:log       ; lo:hi:count:{lin|log}

    [data]
    path = cps1988.csv
    wage = wage
    education = education
    experience = experience
    ethnicity = ethnicity
    reference_level = cauc
    sizes = 100,1000,5000
    specs = full,no-ethnicity,no-experience2
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, NumericalError, PowerPostError

log = logging.getLogger("powerpost")

COMMANDS = ("simulate", "tune", "rates", "subsample", "conjugate", "figure4",
            "theorem3", "metric", "plot")
SPEC_CHOICES = {"misspecified": (True,), "well-specified": (False,), "both": (True, False)}


# --- settings ----------------------------------------------------------------

def _ints(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(float(v)) for v in text)
    try:
        return tuple(int(float(v)) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _words(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(w.strip() for w in str(text).split(",") if w.strip())


def read_config(path) -> dict:
    """Flatten an INI file into a settings dict; ``[grids]`` becomes a nested dict."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out: dict = {}
    for section in cp.sections():
        if section == "grids":
            out["grids"] = dict(cp.items("grids"))
        elif section in ("run", "data"):
            out.update({k.replace("-", "_"): v for k, v in cp.items(section)})
        else:
            raise ConfigError(f"unknown config section [{section}]")
    return out


def _layer(args, defaults: dict, flags: tuple) -> dict:
    settings = dict(defaults)
    if getattr(args, "preset", None):
        from .presets import get_preset
        settings.update(get_preset(args.preset, args.command))
    if getattr(args, "config", None):
        settings.update(read_config(args.config))
    for name in flags:
        v = getattr(args, name, None)
        if v is not None and v is not False:
            settings[name] = v
    grid_flags = getattr(args, "grid", None) or []
    if grid_flags:
        grids = dict(settings.get("grids", {}))
        for item in grid_flags:
            if "=" not in item:
                raise ConfigError(f"--grid expects METHOD=lo:hi:count:{{lin|log}}, got {item!r}")
            k, v = item.split("=", 1)
            grids[k.strip()] = v.strip()
        settings["grids"] = grids
    return settings


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def config_digest(settings: dict) -> str:
    """sha256 of the canonical JSON of the data-determining settings."""
    keep = {k: v for k, v in settings.items() if k not in ("threads", "out", "source")}
    text = json.dumps(_canonical(keep), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _grids(settings: dict, base: dict) -> dict:
    from .tuning import METHODS, parse_grid

    out = {}
    for method, text in (settings.get("grids") or {}).items():
        if method not in METHODS:
            raise ConfigError(f"grid given for unknown method {method!r}")
        out[method] = parse_grid(text, base[method])
    return out


class Run:
    """Collects output files for one command and writes the manifest."""

    def __init__(self, command: str, settings: dict, out: str):
        self.command, self.settings, self.out = command, settings, out
        self.paths: list[str] = []
        os.makedirs(out, exist_ok=True)

    def path(self, name: str) -> str:
        p = os.path.join(self.out, name)
        self.paths.append(p)
        return p

    def done(self, summary: dict) -> None:
        for p, line in summary.items():
            print(f"{p}: {line}")
        manifest = {
            "command": self.command,
            "config_digest": config_digest(self.settings),
            "master_seed": int(self.settings.get("seed", 0)),
            "artifact_version": __version__,
            "output_paths": self.paths,
            "settings": _canonical(self.settings),
        }
        mpath = os.path.join(self.out, "manifest.json")
        with open(mpath, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"{mpath}: run manifest")


def _plot(run: Run, csv_path: str, kind: str, name: str, summary: dict) -> None:
    from .plotting import render_plot

    if run.settings.get("no_plots"):
        return
    p = run.path(name)
    render_plot(csv_path, kind, p)
    summary[p] = f"{kind} figure"


# --- commands ----------------------------------------------------------------

def cmd_simulate(args) -> None:
    from .experiments import rate_table, run_study, write_alpha_samples, write_rates
    from .tuning import METHODS, SIMULATION_GRIDS

    s = _layer(args, {"seed": 0, "reps": 100, "n_grid": (100, 1000, 5000), "threads": 1,
                      "aggregate": "pooled", "spec": "both", "methods": METHODS},
               ("seed", "reps", "n_grid", "threads", "aggregate", "spec", "methods", "no_plots"))
    if "cells" not in s or args.methods or args.spec:
        specs = SPEC_CHOICES.get(str(s["spec"]))
        if specs is None:
            raise ConfigError(f"spec must be one of {sorted(SPEC_CHOICES)}")
        s["cells"] = [(m, mis) for m in _words(s["methods"]) for mis in specs]
    s["cells"] = [(str(m), bool(mis)) for m, mis in s["cells"]]
    s.pop("methods", None)
    s.pop("spec", None)
    s["n_grid"], s["reps"], s["seed"] = _ints(s["n_grid"]), int(s["reps"]), int(s["seed"])
    grids = _grids(s, SIMULATION_GRIDS)
    run = Run("simulate", s, args.out)
    samples = run_study(s["n_grid"], s["cells"], s["reps"], s["seed"], grids, int(s["threads"]))
    a_path, r_path = run.path("alpha_samples.csv"), run.path("rates.csv")
    write_alpha_samples(a_path, samples)
    rows = rate_table(samples, s["aggregate"])
    write_rates(r_path, rows)
    summary = {a_path: f"{len(samples)} alpha samples", r_path: f"{len(rows)} rate rows"}
    _plot(run, a_path, "histogram_grid", "alpha_histograms.svg", summary)
    _plot(run, a_path, "loglog_fit", "alpha_rates.svg", summary)
    run.done(summary)


def cmd_rates(args) -> None:
    from .experiments import rate_table, read_alpha_samples, write_rates

    s = _layer(args, {"aggregate": "pooled"}, ("input", "aggregate", "no_plots"))
    if not s.get("input"):
        raise ConfigError("rates needs --input alpha_samples.csv")
    samples = read_alpha_samples(s["input"])
    run = Run("rates", s, args.out)
    r_path = run.path("rates.csv")
    rows = rate_table(samples, s["aggregate"])
    write_rates(r_path, rows)
    summary = {r_path: f"{len(rows)} rate rows"}
    _plot(run, s["input"], "loglog_fit", "alpha_rates.svg", summary)
    run.done(summary)


def cmd_tune(args) -> None:
    from .linmodel import estimate_sigma2, read_csv_dataset
    from .tuning import SIMULATION_GRIDS, DATA_GRIDS, tune

    s = _layer(args, {"seed": 0, "sigma2": "1", "method": "bcv", "train_fraction": 0.7,
                      "grid_set": "simulation"},
               ("input", "response", "covariates", "method", "sigma2", "seed",
                "train_fraction", "grid_set"))
    if not s.get("input") or not s.get("response"):
        raise ConfigError("tune needs --input and --response")
    covs = _words(s["covariates"]) if s.get("covariates") else None
    d = read_csv_dataset(s["input"], s["response"], covs)
    if str(s["sigma2"]) == "estimate":
        d = d.with_sigma2(estimate_sigma2(d))
    else:
        d = d.with_sigma2(float(s["sigma2"]))
    base = DATA_GRIDS if s["grid_set"] == "data" else SIMULATION_GRIDS
    method = s["method"]
    if method not in base:
        raise ConfigError(f"unknown method {method!r}")
    grid = _grids(s, base).get(method, base[method])
    res = tune(d, method, grid, int(s["seed"]), float(s["train_fraction"]))
    run = Run("tune", s, args.out)
    p = run.path("tuning.json")
    with open(p, "w", encoding="utf-8") as fh:
        fh.write(res.to_json())
        fh.write("\n")
    run.done({p: f"alpha_hat={res.alpha_hat} corner={res.is_corner}"})


def cmd_subsample(args) -> None:
    from .experiments import (WAGE_SPECS, WageColumns, load_wage_data, subsample_study,
                              write_alpha_samples, write_rates)
    from .tuning import DATA_GRIDS, METHODS

    s = _layer(args, {"seed": 0, "reps": 100, "sizes": (100, 1000, 5000), "threads": 1,
                      "aggregate": "pooled", "methods": METHODS, "specs": tuple(WAGE_SPECS),
                      **WageColumns().__dict__},
               ("input", "seed", "reps", "sizes", "threads", "aggregate", "methods", "specs",
                "wage", "education", "experience", "ethnicity", "reference_level", "no_plots"))
    path = s.get("input") or s.get("path")
    if not path:
        raise ConfigError("subsample needs --input (or [data] path)")
    s["input"] = path
    s.pop("path", None)
    cols = WageColumns(s["wage"], s["education"], s["experience"], s["ethnicity"],
                       s["reference_level"])
    specs = {}
    for name in _words(s["specs"]):
        if name not in WAGE_SPECS:
            raise ConfigError(f"unknown model {name!r}; expected one of {sorted(WAGE_SPECS)}")
        specs[name] = WAGE_SPECS[name]
    raw = load_wage_data(path, cols)
    run = Run("subsample", s, args.out)
    samples, rows = subsample_study(raw, specs, _ints(s["sizes"]), int(s["reps"]),
                                    _words(s["methods"]), int(s["seed"]),
                                    _grids(s, DATA_GRIDS), int(s["threads"]), s["aggregate"])
    a_path, r_path = run.path("alpha_samples.csv"), run.path("rates.csv")
    write_alpha_samples(a_path, samples)
    write_rates(r_path, rows)
    summary = {a_path: f"{len(samples)} alpha samples", r_path: f"{len(rows)} rate rows"}
    _plot(run, a_path, "histogram_grid", "alpha_histograms.svg", summary)
    _plot(run, a_path, "loglog_fit", "alpha_rates.svg", summary)
    run.done(summary)


def cmd_conjugate(args) -> None:
    from .conjugate import ConjugateFamily, bvm_failure_check, summarize_bvm
    from .experiments import write_rows

    s = _layer(args, {"family": "gauss-gauss", "a": 1.0, "b": 1.0, "mu0": 0.0,
                      "sigma0_sq": 1.0, "sigma2": 1.0, "x_m": 1.0, "alpha0": 1.0,
                      "theta_star": 1.0, "n_grid": (100, 1000, 10000), "reps": 100,
                      "seed": 0, "schedule": "inverse-n"},
               ("family", "a", "b", "mu0", "sigma0_sq", "sigma2", "x_m", "alpha0",
                "theta_star", "n_grid", "reps", "seed", "schedule"))
    f = ConjugateFamily(s["family"], float(s["a"]), float(s["b"]), float(s["mu0"]),
                        float(s["sigma0_sq"]), float(s["sigma2"]), float(s["x_m"]))
    eta = f.natural(float(s["theta_star"]))
    rows = bvm_failure_check(f, float(s["alpha0"]), eta, _ints(s["n_grid"]), int(s["seed"]),
                             int(s["reps"]), s["schedule"])
    run = Run("conjugate", s, args.out)
    p1, p2 = run.path("bvm.csv"), run.path("bvm_summary.csv")
    write_rows(p1, ("n", "rep", "alpha", "cf_gap", "tv_to_gaussian"), rows)
    summ = summarize_bvm(rows)
    write_rows(p2, ("n", "cf_gap", "tv_to_gaussian"), summ)
    run.done({p1: f"{len(rows)} replications", p2: f"{len(summ)} sample sizes"})


def cmd_figure4(args) -> None:
    from .experiments import write_rows
    from .mcmc import (FIGURE4_SCHEDULES, Figure4Config, MCMCConfig, figure4_experiment,
                       linear_threshold_experiment)

    s = _layer(args, {"seed": 0, "reps": 100, "n_grid": (200, 500, 1000, 2000), "threads": 1,
                      "schedules": FIGURE4_SCHEDULES, "draws": 50_000, "burn_in": 5_000,
                      "step_scale": None, "linear": False},
               ("seed", "reps", "n_grid", "threads", "schedules", "draws", "burn_in",
                "step_scale", "linear", "no_plots"))
    n_grid, reps, seed = _ints(s["n_grid"]), int(s["reps"]), int(s["seed"])
    schedules = _words(s["schedules"])
    linear = str(s["linear"]).lower() in ("true", "1", "yes")
    run = Run("figure4", s, args.out)
    if linear:
        rows, summ = linear_threshold_experiment(n_grid, schedules, reps, seed=seed)
        rep_cols = ("n", "schedule", "rep", "alpha", "scaled_diff_mle")
        sum_cols = ("n", "schedule", "mean_scaled_diff_mle", "mc_se")
    else:
        step = None if s["step_scale"] in (None, "", "None") else float(s["step_scale"])
        mc = MCMCConfig(int(s["draws"]), int(s["burn_in"]), step, seed)
        cfg = Figure4Config(n_grid=n_grid, schedules=schedules, reps=reps, mcmc=mc,
                            seed=seed, threads=int(s["threads"]))
        rows, summ = figure4_experiment(cfg)
        rep_cols = ("n", "schedule", "rep", "alpha", "attempts", "acceptance_rate",
                    "sq_scaled_diff_mle", "sq_scaled_diff_truth")
        sum_cols = ("n", "schedule", "mean_sq_scaled_diff_mle", "mean_sq_scaled_diff_truth",
                    "mc_se")
    p_rep, p_sum = run.path("figure4_reps.csv"), run.path("figure4.csv")
    write_rows(p_rep, rep_cols, rows)
    write_rows(p_sum, sum_cols, summ)
    summary = {p_rep: f"{len(rows)} replications", p_sum: f"{len(summ)} (n, schedule) cells"}
    _plot(run, p_sum, "decay_curves", "figure4.svg", summary)
    run.done(summary)


def cmd_theorem3(args) -> None:
    from .experiments import write_rows
    from .metrics import theorem3_check

    s = _layer(args, {"seed": 0, "q": 0.5, "alpha_small": "n^-1/2", "gamma_large": "n",
                      "n_grid": (100, 1000, 10000), "reps": 1, "draws": 20_000},
               ("seed", "q", "alpha_small", "gamma_large", "n_grid", "reps", "draws", "no_plots"))
    rows = theorem3_check(float(s["q"]), s["alpha_small"], s["gamma_large"], _ints(s["n_grid"]),
                          int(s["seed"]), int(s["reps"]), coupling_draws=int(s["draws"]))
    report = []
    for r in rows:
        for metric in ("w2_bound", "w2_component", "w2_point"):
            report.append({"n": r["n"], "rep": r["rep"], "metric": metric, "value": r[metric],
                           "mc_se": 0.0})
        report.append({"n": r["n"], "rep": r["rep"], "metric": "w2sq_coupling",
                       "value": r["w2sq_coupling"], "mc_se": r["w2sq_coupling_se"]})
    run = Run("theorem3", s, args.out)
    p = run.path("theorem3.csv")
    write_rows(p, ("n", "rep", "metric", "value", "mc_se"), report)
    summary = {p: f"{len(report)} report rows"}
    _plot(run, p, "decay_curves", "theorem3.svg", summary)
    run.done(summary)


def parse_distribution(text: str):
    """``normal:MEAN,VAR`` | ``point:LOC`` | ``mixture:Q;SPEC;SPEC`` (1D)."""
    from .metrics import Gaussian, Mixture, PointMass

    kind, _, rest = str(text).partition(":")
    try:
        if kind == "normal":
            m, v = (float(x) for x in rest.split(","))
            return Gaussian([m], [[v]])
        if kind == "point":
            return PointMass([float(rest)])
        if kind == "mixture":
            q, a, b = rest.split(";")
            return Mixture(float(q), parse_distribution(a), parse_distribution(b))
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ConfigError(f"bad distribution {text!r}: {exc}") from exc
    raise ConfigError(f"unknown distribution {text!r}; use normal:, point: or mixture:")


def cmd_metric(args) -> None:
    from .experiments import write_rows
    from .metrics import moment_discrepancy, tv_distance, wasserstein_p

    s = _layer(args, {"kind": "tv", "p": 2, "k": 0, "center": 0.0, "scale": 1.0,
                      "samples": 100_000, "seed": 0},
               ("kind", "a", "b", "p", "k", "center", "scale", "samples", "seed"))
    if not s.get("a") or not s.get("b"):
        raise ConfigError("metric needs --a and --b")
    a, b = parse_distribution(s["a"]), parse_distribution(s["b"])
    se = 0.0
    if s["kind"] == "tv":
        value = tv_distance(a, b, int(s["samples"]), int(s["seed"]))
    elif s["kind"] == "w2":
        value = wasserstein_p(a, b, int(s["p"]))
    elif s["kind"] == "moment":
        value, se = moment_discrepancy(a, b, int(s["k"]), float(s["center"]), float(s["scale"]),
                                       int(s["samples"]), int(s["seed"]))
    else:
        raise ConfigError("--kind must be tv, w2 or moment")
    run = Run("metric", s, args.out)
    p = run.path("metric.csv")
    write_rows(p, ("n", "metric", "value", "mc_se"),
               [{"n": "", "metric": s["kind"], "value": float(value), "mc_se": float(se)}])
    run.done({p: f"{s['kind']}={value:.6g}"})


def cmd_plot(args) -> None:
    from .plotting import render_plot

    s = _layer(args, {}, ("input", "kind"))
    if not s.get("input") or not s.get("kind"):
        raise ConfigError("plot needs --input and --kind")
    run = Run("plot", s, args.out)
    p = run.path(args.name or f"{s['kind']}.svg")
    render_plot(s["input"], s["kind"], p)
    run.done({p: f"{s['kind']} figure"})


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="powerpost",
                                 description="Data-driven tempering experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, preset=False, seed=True, threads=False):
        p.add_argument("--config", help="INI settings file")
        p.add_argument("--out", default=".", help="output directory")
        if seed:
            p.add_argument("--seed", type=int)
        if threads:
            p.add_argument("--threads", type=int, help="worker processes")
        if preset:
            p.add_argument("--preset")
        return p

    p = common(sub.add_parser("simulate", help="replicate alpha selection on simulated data"),
               preset=True, threads=True)
    p.add_argument("--reps", type=int)
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--methods")
    p.add_argument("--spec", choices=sorted(SPEC_CHOICES))
    p.add_argument("--grid", action="append", metavar="METHOD=lo:hi:count:{lin|log}")
    p.add_argument("--aggregate", choices=("pooled", "mean"))
    p.add_argument("--no-plots", dest="no_plots", action="store_true")

    p = common(sub.add_parser("tune", help="select alpha on one CSV dataset"))
    p.add_argument("--input")
    p.add_argument("--response")
    p.add_argument("--covariates")
    p.add_argument("--method")
    p.add_argument("--sigma2", help="noise variance or 'estimate'")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--grid-set", dest="grid_set", choices=("simulation", "data"))
    p.add_argument("--grid", action="append", metavar="METHOD=lo:hi:count:{lin|log}")

    p = common(sub.add_parser("rates", help="fit alpha_hat = C n^gamma to alpha samples"),
               seed=False)
    p.add_argument("--input")
    p.add_argument("--aggregate", choices=("pooled", "mean"))
    p.add_argument("--no-plots", dest="no_plots", action="store_true")

    p = common(sub.add_parser("subsample", help="alpha selection on subsamples of wage data"),
               threads=True)
    p.add_argument("--input")
    p.add_argument("--reps", type=int)
    p.add_argument("--sizes")
    p.add_argument("--methods")
    p.add_argument("--specs")
    for col in ("wage", "education", "experience", "ethnicity"):
        p.add_argument(f"--{col}-col", dest=col)
    p.add_argument("--reference-level", dest="reference_level")
    p.add_argument("--grid", action="append", metavar="METHOD=lo:hi:count:{lin|log}")
    p.add_argument("--aggregate", choices=("pooled", "mean"))
    p.add_argument("--no-plots", dest="no_plots", action="store_true")

    p = common(sub.add_parser("conjugate", help="tempered conjugate posteriors versus their limits"))
    p.add_argument("--family")
    for name in ("a", "b", "mu0", "sigma2", "alpha0"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--sigma0-sq", dest="sigma0_sq", type=float)
    p.add_argument("--x-m", dest="x_m", type=float)
    p.add_argument("--theta-star", dest="theta_star", type=float)
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--reps", type=int)
    p.add_argument("--schedule", choices=("inverse-n", "inverse-sqrt-n"))

    p = common(sub.add_parser("figure4", help="tempered posterior mean versus MLE"),
               preset=True, threads=True)
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--reps", type=int)
    p.add_argument("--schedules")
    p.add_argument("--draws", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--step-scale", dest="step_scale", type=float)
    p.add_argument("--linear", action="store_true", help="closed-form Gaussian linear arm")
    p.add_argument("--no-plots", dest="no_plots", action="store_true")

    p = common(sub.add_parser("theorem3", help="W2 decay of mixed tempered posteriors"))
    p.add_argument("--q", type=float)
    p.add_argument("--alpha-small", dest="alpha_small")
    p.add_argument("--gamma-large", dest="gamma_large")
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--reps", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("--no-plots", dest="no_plots", action="store_true")

    p = common(sub.add_parser("metric", help="distance between two distributions"))
    p.add_argument("--kind", choices=("tv", "w2", "moment"))
    p.add_argument("--a", help="normal:MEAN,VAR | point:LOC | mixture:Q;A;B")
    p.add_argument("--b")
    p.add_argument("--p", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--center", type=float)
    p.add_argument("--scale", type=float)
    p.add_argument("--samples", type=int)

    p = common(sub.add_parser("plot", help="render an SVG from a result CSV"), seed=False)
    p.add_argument("--input")
    p.add_argument("--kind", choices=("histogram_grid", "loglog_fit", "decay_curves"))
    p.add_argument("--name", help="output file name inside --out")
    return ap


HANDLERS = {
    "simulate": cmd_simulate, "tune": cmd_tune, "rates": cmd_rates,
    "subsample": cmd_subsample, "conjugate": cmd_conjugate, "figure4": cmd_figure4,
    "theorem3": cmd_theorem3, "metric": cmd_metric, "plot": cmd_plot,
}


def dispatch(argv=None) -> int:
    """Run one command; returns 0, or 2/3/4 for config, data and numerical errors."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        HANDLERS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except PowerPostError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def main() -> None:
    sys.exit(dispatch())
