"""Closed-form tempered posteriors for the Gaussian linear model.

With likelihood ``y | X, beta ~ N(X beta, sigma2 I)`` raised to the power
``alpha`` and a ``N(0, I)`` prior, the tempered posterior is Gaussian with
precision ``I + (alpha / sigma2) X'X``.  Its mean is the ridge estimate with
penalty ``lambda = 1 / (n alpha)`` (when ``sigma2 = 1``).  Under a flat prior
the posterior is centred at the OLS fit with covariance scaled by ``1/alpha``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.stats import norm

from .errors import (
    DataError,
    DegenerateDOF,
    IndexOutOfRange,
    NonPositiveAlpha,
    ParseError,
    SingularDesign,
)

FLAT_CONDITION_LIMIT = 1e12
PRIORS = ("unit_gaussian", "flat")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix ``X`` (n x p), response ``y`` and noise variance ``sigma2``."""

    X: np.ndarray
    y: np.ndarray
    sigma2: float = 1.0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"design must be a non-empty n x p matrix, got shape {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise DataError(f"y has {y.shape[0]} entries but X has {X.shape[0]} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("non-finite entries in dataset")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise DataError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.y[rows], self.sigma2)

    def with_sigma2(self, sigma2: float) -> "Dataset":
        return Dataset(self.X, self.y, sigma2)


@dataclass(frozen=True, eq=False)
class GaussianPosterior:
    mean: np.ndarray
    cov: np.ndarray
    alpha: float
    n: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise DataError("covariance shape does not match mean")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise SingularDesign("posterior has non-finite entries")
        cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(cov))

    @property
    def p(self) -> int:
        return self.mean.size

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
            "alpha": self.alpha,
            "n": self.n,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GaussianPosterior":
        d = json.loads(text)
        return cls(np.array(d["mean"]), np.array(d["cov"]), float(d["alpha"]), int(d["n"]))


def _check_alpha(alpha):
    if not (np.isfinite(alpha) and alpha > 0):
        raise NonPositiveAlpha(f"alpha must be finite and > 0, got {alpha}")


def _spd_solve(A, B):
    try:
        c = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularDesign("matrix is not positive definite") from exc
    return linalg.cho_solve(c, B, check_finite=False)


def _gram_condition(G):
    w = np.linalg.eigvalsh(G)
    if w[0] <= 0:
        return np.inf
    return w[-1] / w[0]


def ridge_posterior(d: Dataset, alpha: float, prior: str = "unit_gaussian") -> GaussianPosterior:
    """Tempered posterior of the regression coefficients.

    Parameters
    ----------
    d : Dataset
    alpha : float
        Tempering exponent on the likelihood, ``> 0``.
    prior : {"unit_gaussian", "flat"}
        ``N(0, I)`` prior or the improper flat prior. The flat prior needs a
        full-rank design.
    """
    _check_alpha(alpha)
    X, y, s2 = d.X, d.y, d.sigma2
    G = X.T @ X
    b = X.T @ y
    if prior == "unit_gaussian":
        # precision form I + (alpha/s2) X'X stays well conditioned for any alpha
        P = np.eye(d.p) + (alpha / s2) * G
        rhs = np.column_stack([(alpha / s2) * b, np.eye(d.p)])
        sol = _spd_solve(P, rhs)
        return GaussianPosterior(sol[:, 0], sol[:, 1:], alpha, d.n)
    if prior == "flat":
        if _gram_condition(G) > FLAT_CONDITION_LIMIT:
            raise SingularDesign("flat prior needs a full-rank design")
        sol = _spd_solve(G, np.column_stack([b, np.eye(d.p)]))
        return GaussianPosterior(sol[:, 0], (s2 / alpha) * sol[:, 1:], alpha, d.n)
    raise ValueError(f"unknown prior {prior!r}; expected one of {PRIORS}")


def vi_posterior(d: Dataset, alpha: float) -> GaussianPosterior:
    """Mean-field Gaussian approximation of the unit-Gaussian-prior posterior.

    Same mean as :func:`ridge_posterior`; the covariance is the inverse of
    the diagonal of the exact precision.
    """
    _check_alpha(alpha)
    full = ridge_posterior(d, alpha, "unit_gaussian")
    g = np.einsum("ij,ij->j", d.X, d.X)
    var = d.sigma2 / (alpha * g + d.sigma2)
    return GaussianPosterior(full.mean, np.diag(var), alpha, d.n)


def predictive_logdensity(post: GaussianPosterior, x, y: float, sigma2: float) -> float:
    """Log of the posterior predictive density of ``y`` at covariate ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    loc = float(x @ post.mean)
    var = sigma2 + float(x @ post.cov @ x)
    return float(norm.logpdf(y, loc=loc, scale=np.sqrt(var)))


def ols(d: Dataset) -> np.ndarray:
    G = d.X.T @ d.X
    if _gram_condition(G) > FLAT_CONDITION_LIMIT:
        raise SingularDesign("design is rank deficient")
    return _spd_solve(G, d.X.T @ d.y)


def estimate_sigma2(d: Dataset) -> float:
    """Unbiased residual variance of the OLS fit, ``RSS / (n - p)``."""
    if d.n <= d.p:
        raise DegenerateDOF(f"need n > p, got n={d.n}, p={d.p}")
    resid = d.y - d.X @ ols(d)
    return float(resid @ resid / (d.n - d.p))


TRANSFORMS = {
    "square": np.square,
    "log": np.log,
}


@dataclass(frozen=True)
class ModelSpec:
    """Column selection plus derived columns for one working model.

    ``transforms`` holds ``(raw_column, tag)`` pairs; each appends
    ``tag(X[:, raw_column])`` after the selected columns.  The intercept,
    when requested, is the last column.
    """

    column_subset: tuple = ()
    add_intercept: bool = False
    transforms: tuple = field(default_factory=tuple)
    name: str = ""

    def validate(self, p: int):
        cols = list(self.column_subset)
        if len(set(cols)) != len(cols):
            raise IndexOutOfRange("column indices must be unique")
        for c in cols + [c for c, _ in self.transforms]:
            if not 0 <= c < p:
                raise IndexOutOfRange(f"column {c} outside [0, {p})")
        for _, tag in self.transforms:
            if tag not in TRANSFORMS:
                raise IndexOutOfRange(f"unknown transform {tag!r}")


def identity_spec(p: int) -> ModelSpec:
    return ModelSpec(tuple(range(p)))


def apply_spec(d: Dataset, spec: ModelSpec) -> Dataset:
    spec.validate(d.p)
    blocks = [d.X[:, list(spec.column_subset)]]
    for col, tag in spec.transforms:
        blocks.append(TRANSFORMS[tag](d.X[:, [col]]))
    if spec.add_intercept:
        blocks.append(np.ones((d.n, 1)))
    return Dataset(np.hstack(blocks), d.y, d.sigma2)


def read_csv_columns(path, columns: Sequence[str] | None = None) -> dict:
    """Read a header-first CSV into a dict of float arrays (or raw strings).

    Columns that do not parse as numbers are returned as arrays of str.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [r for r in reader if r]
    except (OSError, StopIteration, UnicodeDecodeError, csv.Error) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    header = [h.strip() for h in header]
    wanted = header if columns is None else list(columns)
    missing = [c for c in wanted if c not in header]
    if missing:
        raise ParseError(f"{path}: missing columns {missing}")
    if any(len(r) != len(header) for r in rows):
        raise ParseError(f"{path}: ragged rows")
    out = {}
    for name in wanted:
        j = header.index(name)
        raw = [r[j].strip() for r in rows]
        try:
            out[name] = np.array([float(v) for v in raw])
        except ValueError:
            out[name] = np.array(raw)
    return out


def read_csv_dataset(path, response: str, covariates: Sequence[str] | None = None,
                     sigma2: float = 1.0) -> Dataset:
    cols = read_csv_columns(path)
    if response not in cols:
        raise ParseError(f"{path}: no response column {response!r}")
    names = [c for c in cols if c != response] if covariates is None else list(covariates)
    try:
        X = np.column_stack([cols[c].astype(float) for c in names])
        y = cols[response].astype(float)
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: non-numeric or missing covariate: {exc}") from exc
    return Dataset(X, y, sigma2)
