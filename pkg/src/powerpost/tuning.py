"""Data-driven selection of the tempering parameter.

Five criteria are supported:

``bcv``        maximise the leave-one-out log pointwise predictive density
``bcv-vi``     the same with the mean-field posterior in each fold
``loocv``      minimise Allen's PRESS statistic
``train-test`` minimise held-out squared error of the ridge fit
``safebayes``  minimise the prequential posterior-expected squared loss

All losses are evaluated on a grid; the selected grid value is mapped to an
``alpha`` and values above ``CORNER_THRESHOLD`` are recoded to ``inf``.

The leave-one-out losses share one eigendecomposition of ``X'X`` so a whole
grid costs ``O(n p k)``: with ``M = X'X + cI`` and leverages
``h_i = x_i' M^{-1} x_i`` the fold-``-i`` fit satisfies
``y_i - x_i' beta_{-i} = (y_i - yhat_i) / (1 - h_i)`` and
``x_i' (M - x_i x_i')^{-1} x_i = h_i / (1 - h_i)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    AlphaOutOfRange,
    ConfigError,
    DegenerateFold,
    DegenerateLeverage,
    EmptyFold,
    NonPositiveAlpha,
)
from .linmodel import Dataset
from .rng import stream

CORNER_THRESHOLD = 1e6
DEFAULT_TRAIN_FRACTION = 0.70
SAFEBAYES_VARIANT = "R-square prequential posterior-expected squared loss (known variance)"

METHODS = ("bcv", "bcv-vi", "loocv", "train-test", "safebayes")
MAXIMISED = {"bcv", "bcv-vi"}

MAPPINGS = ("inv_n_minus_1_lambda", "inv_lambda", "inv_n_lambda", "identity")


@dataclass(frozen=True)
class Grid:
    parameter: str
    spacing: str
    lower: float
    upper: float
    density: int
    mapping: str

    def __post_init__(self):
        if self.parameter not in ("lambda", "alpha"):
            raise ConfigError(f"grid parameter must be lambda or alpha, got {self.parameter!r}")
        if self.spacing not in ("linear", "logarithmic"):
            raise ConfigError(f"grid spacing must be linear or logarithmic, got {self.spacing!r}")
        if not self.lower < self.upper:
            raise ConfigError("grid needs lower < upper")
        if int(self.density) < 2:
            raise ConfigError("grid density must be at least 2")
        if self.spacing == "logarithmic" and self.lower <= 0:
            raise ConfigError("logarithmic grid needs lower > 0")
        if self.mapping not in MAPPINGS:
            raise ConfigError(f"unknown mapping {self.mapping!r}")

    def values(self) -> np.ndarray:
        if self.spacing == "linear":
            return np.linspace(self.lower, self.upper, int(self.density))
        return np.geomspace(self.lower, self.upper, int(self.density))

    def to_alpha(self, value, n: int):
        """Map grid value(s) to alpha; zero lambda maps to ``inf``."""
        v = np.asarray(value, dtype=float)
        with np.errstate(divide="ignore"):
            if self.mapping == "identity":
                out = v.copy()
            elif self.mapping == "inv_lambda":
                out = 1.0 / v
            elif self.mapping == "inv_n_lambda":
                out = 1.0 / (n * v)
            else:
                out = 1.0 / ((n - 1) * v)
        return out if out.ndim else float(out)

    def with_range(self, lower: float, upper: float, density: int, spacing: str) -> "Grid":
        return Grid(self.parameter, spacing, lower, upper, density, self.mapping)


SIMULATION_GRIDS = {
    "bcv": Grid("lambda", "logarithmic", 1e-12, 10.0, 200, "inv_n_minus_1_lambda"),
    "bcv-vi": Grid("lambda", "logarithmic", 1e-12, 10.0, 200, "inv_n_minus_1_lambda"),
    "loocv": Grid("lambda", "linear", 1e-12, 30.0, 200, "inv_lambda"),
    "train-test": Grid("lambda", "linear", 1e-12, 5.0, 200, "inv_n_lambda"),
    "safebayes": Grid("alpha", "linear", 0.0, 1.0, 30, "identity"),
}

DATA_GRIDS = {
    "bcv": Grid("lambda", "logarithmic", 1e-12, 10.0, 200, "inv_n_minus_1_lambda"),
    "bcv-vi": Grid("lambda", "logarithmic", 1e-12, 10.0, 200, "inv_n_minus_1_lambda"),
    "loocv": Grid("lambda", "linear", 1e-12, 0.5, 200, "inv_lambda"),
    "train-test": Grid("lambda", "linear", 1e-12, 0.05, 200, "inv_n_lambda"),
    "safebayes": Grid("alpha", "linear", 0.0, 1.0, 30, "identity"),
}


def parse_grid(text: str, base: Grid) -> Grid:
    """Parse ``lo:hi:count:{lin|log}`` keeping ``base``'s parameter and mapping."""
    try:
        lo, hi, count, kind = text.split(":")
        spacing = {"lin": "linear", "log": "logarithmic"}[kind]
        return base.with_range(float(lo), float(hi), int(count), spacing)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad grid {text!r}; expected lo:hi:count:{{lin|log}}") from exc


def recode_alpha(alpha: float) -> float:
    return math.inf if alpha > CORNER_THRESHOLD else float(alpha)


class Split(NamedTuple):
    train_idx: np.ndarray
    test_idx: np.ndarray


def random_split(n: int, seed: int, fraction: float = DEFAULT_TRAIN_FRACTION) -> Split:
    if not 0 < fraction < 1:
        raise ConfigError("train fraction must lie in (0, 1)")
    n_train = int(round(fraction * n))
    if n_train < 1 or n_train >= n:
        raise EmptyFold(f"split of n={n} at {fraction} leaves an empty fold")
    perm = stream(seed, "split").permutation(n)
    return Split(np.sort(perm[:n_train]), np.sort(perm[n_train:]))


# --- leave-one-out machinery -------------------------------------------------

class _Spectral:
    """Eigendecomposition of X'X shared by every grid point."""

    def __init__(self, X, y):
        G = X.T @ X
        lam, Q = np.linalg.eigh(G)
        self.lam = np.clip(lam, 0.0, None)
        self.Z = X @ Q
        self.r = Q.T @ (X.T @ y)
        self.diag = np.einsum("ij,ij->j", X, X)

    def leverage_fit(self, c):
        """Leverages h (n, k) and fitted values (n, k) for penalties ``c`` (k,)."""
        inv = 1.0 / (self.lam[None, :] + np.asarray(c, dtype=float)[:, None])
        h = (self.Z ** 2) @ inv.T
        fit = self.Z @ (self.r[None, :] * inv).T
        return h, fit


def _as_alpha_array(alpha):
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    if not np.all(np.isfinite(a) & (a > 0)):
        raise NonPositiveAlpha(f"alpha must be finite and > 0, got {alpha}")
    return a


def _lppd_curve(d: Dataset, alphas, vi: bool) -> np.ndarray:
    if d.n < 2:
        raise DegenerateFold("leave-one-out needs n >= 2")
    a = _as_alpha_array(alphas)
    s2 = d.sigma2
    c = s2 / a
    sp = _Spectral(d.X, d.y)
    h, fit = sp.leverage_fit(c)
    one_minus_h = 1.0 - h
    resid = (d.y[:, None] - fit) / one_minus_h
    if vi:
        x2 = d.X ** 2
        fold_diag = sp.diag[None, :] - x2  # diag of X_{-i}'X_{-i}, shape (n, p)
        extra = c[None, :] * np.stack(
            [(x2 / (fold_diag + ck)).sum(axis=1) for ck in c], axis=1)
    else:
        extra = c[None, :] * h / one_minus_h
    var = s2 + extra
    logdens = -0.5 * (np.log(2 * np.pi * var) + resid ** 2 / var)
    return logdens.mean(axis=0)


def lppd_loo_curve(d: Dataset, alphas) -> np.ndarray:
    return _lppd_curve(d, alphas, vi=False)


def lppd_loo_vi_curve(d: Dataset, alphas) -> np.ndarray:
    return _lppd_curve(d, alphas, vi=True)


def lppd_loo(d: Dataset, alpha: float) -> float:
    """Mean leave-one-out log predictive density under the tempered posterior."""
    return float(_lppd_curve(d, alpha, vi=False)[0])


def lppd_loo_vi(d: Dataset, alpha: float) -> float:
    """As :func:`lppd_loo` with the mean-field posterior in each fold."""
    return float(_lppd_curve(d, alpha, vi=True)[0])


def press_curve(d: Dataset, alphas) -> np.ndarray:
    a = _as_alpha_array(alphas)
    sp = _Spectral(d.X, d.y)
    h, fit = sp.leverage_fit(1.0 / a)
    if np.any(h >= 1 - 1e-12):
        raise DegenerateLeverage("a leverage is numerically 1")
    return (((d.y[:, None] - fit) / (1.0 - h)) ** 2).mean(axis=0)


def press(d: Dataset, alpha: float) -> float:
    """Allen's PRESS with hat matrix ``X (X'X + I/alpha)^{-1} X'``."""
    return float(press_curve(d, alpha)[0])


def train_test_curve(d: Dataset, split: Split, lambdas) -> np.ndarray:
    tr, te = np.asarray(split.train_idx), np.asarray(split.test_idx)
    if tr.size == 0 or te.size == 0:
        raise EmptyFold("train and test folds must be non-empty")
    if np.intersect1d(tr, te).size:
        raise ConfigError("train and test folds overlap")
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if np.any(lam < 0):
        raise ConfigError("lambda must be >= 0")
    Xtr, ytr = d.X[tr], d.y[tr]
    G = Xtr.T @ Xtr
    w, Q = np.linalg.eigh(G)
    w = np.clip(w, 0.0, None)
    r = Q.T @ (Xtr.T @ ytr)
    denom = w[None, :] + tr.size * lam[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        coef_rot = np.where(denom > 0, r[None, :] / denom, 0.0)
    pred = (d.X[te] @ Q) @ coef_rot.T
    return ((d.y[te][:, None] - pred) ** 2).mean(axis=0)


def train_test_loss(d: Dataset, split: Split, lam: float) -> float:
    """Held-out MSE of the ridge fit ``argmin (1/n_tr)|y - Xb|^2 + lam |b|^2``."""
    return float(train_test_curve(d, split, lam)[0])


def safe_bayes_curve(d: Dataset, alphas) -> np.ndarray:
    a = np.atleast_1d(np.asarray(alphas, dtype=float))
    if np.any(~np.isfinite(a) | (a < 0) | (a > 1)):
        raise AlphaOutOfRange(f"SafeBayes alpha must lie in [0, 1], got {alphas}")
    X, y, s2 = d.X, d.y, d.sigma2
    n, p = X.shape
    outer = X[:, :, None] * X[:, None, :]
    G_prev = np.concatenate([np.zeros((1, p, p)), np.cumsum(outer, axis=0)[:-1]])
    b_prev = np.concatenate([np.zeros((1, p)), np.cumsum(X * y[:, None], axis=0)[:-1]])
    out = np.empty(a.size)
    eye = np.eye(p)
    for k, ak in enumerate(a):
        w = ak / s2
        P = eye + w * G_prev
        rhs = np.stack([X, w * b_prev], axis=2)
        sol = np.linalg.solve(P, rhs)
        var_term = np.einsum("ij,ij->i", X, sol[:, :, 0])
        mean_pred = np.einsum("ij,ij->i", X, sol[:, :, 1])
        out[k] = np.sum((y - mean_pred) ** 2 + var_term)
    return out


def safe_bayes_loss(d: Dataset, alpha: float) -> float:
    """Cumulative prequential posterior-expected squared loss.

    Observation ``i`` is scored under the tempered posterior built from
    observations ``1..i-1`` (the prior for ``i = 1``), in the given order.
    """
    return float(safe_bayes_curve(d, alpha)[0])


# --- grid search -------------------------------------------------------------

@dataclass
class TuningResult:
    method: str
    grid_values: np.ndarray
    losses: np.ndarray
    lambda_hat: float | None
    alpha_hat: float
    is_corner: bool
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "lambda_hat": self.lambda_hat,
            "alpha_hat": "inf" if math.isinf(self.alpha_hat) else self.alpha_hat,
            "is_corner": self.is_corner,
            "curve": [[float(g), float(l)] for g, l in zip(self.grid_values, self.losses)],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def loss_curve(d: Dataset, method: str, grid: Grid, seed: int = 0,
               train_fraction: float = DEFAULT_TRAIN_FRACTION) -> np.ndarray:
    values = grid.values()
    if method in ("bcv", "bcv-vi"):
        alphas = grid.to_alpha(values, d.n) if grid.parameter == "lambda" else values
        return _lppd_curve(d, alphas, vi=(method == "bcv-vi"))
    if method == "loocv":
        alphas = grid.to_alpha(values, d.n) if grid.parameter == "lambda" else values
        return press_curve(d, alphas)
    if method == "train-test":
        split = random_split(d.n, seed, train_fraction)
        if grid.parameter == "lambda":
            return train_test_curve(d, split, values)
        return train_test_curve(d, split, 1.0 / (d.n * values))
    if method == "safebayes":
        if grid.parameter != "alpha":
            raise ConfigError("SafeBayes searches over alpha directly")
        return safe_bayes_curve(d, values)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


def tune(d: Dataset, method: str, grid: Grid | None = None, seed: int = 0,
         train_fraction: float = DEFAULT_TRAIN_FRACTION) -> TuningResult:
    """Grid search for the tempering parameter.

    Ties resolve to the smallest grid value.  ``seed`` only matters for the
    train-test split.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    grid = SIMULATION_GRIDS[method] if grid is None else grid
    values = grid.values()
    losses = loss_curve(d, method, grid, seed, train_fraction)
    score = np.where(np.isfinite(losses), losses, -np.inf if method in MAXIMISED else np.inf)
    idx = int(np.argmax(score) if method in MAXIMISED else np.argmin(score))
    chosen = float(values[idx])
    raw_alpha = grid.to_alpha(chosen, d.n)
    alpha_hat = recode_alpha(raw_alpha)
    meta = {"grid": grid.__dict__.copy()}
    if method == "safebayes":
        meta["variant"] = SAFEBAYES_VARIANT
    if method == "train-test":
        meta["train_fraction"] = train_fraction
    return TuningResult(
        method=method,
        grid_values=values,
        losses=losses,
        lambda_hat=chosen if grid.parameter == "lambda" else None,
        alpha_hat=alpha_hat,
        is_corner=math.isinf(alpha_hat),
        metadata=meta,
    )
