"""Sampling tempered posteriors that have no closed form.

Holds the logistic regression model, its Newton MLE with the curvature
matrix ``H_n``, a random-walk Metropolis sampler whose proposal is shaped by
``H_n``, and the experiment comparing tempered posterior means to the MLE
under shrinking tempering schedules.  A Gaussian linear target with the same
interface lets the sampler be checked against closed forms.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DataError, NoConvergence, Separation
from .linmodel import Dataset, ols, ridge_posterior
from .parallel import pmap
from .rng import stream
from .schedules import Schedule, parse_schedule

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 100
MIN_CURVATURE = 1e-10
# H_n relative to X'X/n; below this every logistic weight p(1-p) has collapsed
MIN_RELATIVE_CURVATURE = 1e-8
MAX_RETRIES = 5
FIGURE4_SCHEDULES = ("0.5n^-3/4", "0.5n^-1/2", "0.5n^-1/4")
FIGURE4_BETA = (1.0, -0.5, 0.1)


# --- models ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LogisticModel:
    """Bernoulli-logit likelihood with an independent ``N(0, prior_sd^2)`` prior."""

    X: np.ndarray
    y: np.ndarray
    prior_sd: float = 100.0

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise DataError("X and y disagree in length")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("logistic responses must be 0 or 1")
        if not self.prior_sd > 0:
            raise ConfigError("prior_sd must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def loglik(self, beta) -> float:
        eta = self.X @ beta
        return float(self.y @ eta - np.logaddexp(0.0, eta).sum())

    def grad(self, beta) -> np.ndarray:
        return self.X.T @ (self.y - expit(self.X @ beta))

    def hessian(self, beta) -> np.ndarray:
        mu = expit(self.X @ beta)
        return -(self.X * (mu * (1 - mu))[:, None]).T @ self.X

    def third_derivative(self, beta) -> np.ndarray:
        mu = expit(self.X @ beta)
        w = -mu * (1 - mu) * (1 - 2 * mu)
        return np.einsum("i,ij,ik,il->jkl", w, self.X, self.X, self.X)

    def log_prior(self, beta) -> float:
        return float(-0.5 * np.sum(np.square(beta)) / self.prior_sd ** 2)

    def laplace(self) -> "LaplaceExpansion":
        return logistic_mle(self)


@dataclass(frozen=True, eq=False)
class LinearGaussianModel:
    """Gaussian linear likelihood with a ``N(0, I)`` prior; closed-form reference target."""

    data: Dataset

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def p(self) -> int:
        return self.data.p

    def loglik(self, beta) -> float:
        r = self.data.y - self.data.X @ beta
        return float(-0.5 * (r @ r) / self.data.sigma2)

    def grad(self, beta) -> np.ndarray:
        return self.data.X.T @ (self.data.y - self.data.X @ beta) / self.data.sigma2

    def hessian(self, beta) -> np.ndarray:
        return -(self.data.X.T @ self.data.X) / self.data.sigma2

    def third_derivative(self, beta) -> np.ndarray:
        return np.zeros((self.p,) * 3)

    def log_prior(self, beta) -> float:
        return float(-0.5 * np.sum(np.square(beta)))

    def laplace(self) -> "LaplaceExpansion":
        theta = ols(self.data)
        return LaplaceExpansion(theta, -self.hessian(theta) / self.n, self)


@dataclass(eq=False)
class LaplaceExpansion:
    """MLE ``theta_hat`` and ``H_n = -(1/n) * Hessian`` of the log-likelihood there.

    The scaled third-derivative array ``S_n`` is computed on first access.
    """

    theta_hat: np.ndarray
    H_n: np.ndarray
    model: object = None
    _S_n: np.ndarray | None = field(default=None, repr=False)

    @property
    def S_n(self) -> np.ndarray:
        if self._S_n is None:
            self._S_n = self.model.third_derivative(self.theta_hat) / self.model.n
        return self._S_n


def logistic_mle(m: LogisticModel) -> LaplaceExpansion:
    """Newton-Raphson with step halving.

    Converges when the sup-norm of the per-observation score falls below
    ``1e-10``.

    Raises
    ------
    Separation
        When the curvature collapses (in absolute terms or relative to
        ``X'X / n``) or the iterates run off to infinity,
        which is what quasi- or complete separation looks like.
    NoConvergence
        After 100 iterations without meeting the tolerance.
    """
    beta = np.zeros(m.p)
    ll = m.loglik(beta)
    gram_floor = np.linalg.eigvalsh(m.X.T @ m.X / m.n)[0] * MIN_RELATIVE_CURVATURE

    def check_curvature(H):
        low = np.linalg.eigvalsh(H)[0]
        if low < MIN_CURVATURE or low < gram_floor:
            raise Separation("information matrix is numerically singular")

    for _ in range(NEWTON_MAX_ITER):
        g = m.grad(beta) / m.n
        H = -m.hessian(beta) / m.n
        check_curvature(H)
        if np.max(np.abs(g)) < NEWTON_TOL:
            return LaplaceExpansion(beta, 0.5 * (H + H.T), m)
        step = np.linalg.solve(H, g)
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = m.loglik(cand)
            if ll_new >= ll - 1e-12 * abs(ll) or t < 1e-8:
                break
            t *= 0.5
        beta, ll = cand, ll_new
        if not np.all(np.isfinite(beta)) or np.max(np.abs(beta)) > 1e6:
            raise Separation("Newton iterates diverge")
    raise NoConvergence(f"Newton did not converge in {NEWTON_MAX_ITER} iterations")


# --- sampler -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MCMCConfig:
    m_samples: int = 50_000
    burn_in: int = 5_000
    step_scale: float | None = None   # default 2.38 / sqrt(p)
    seed: int = 0

    def __post_init__(self):
        if self.m_samples < 1:
            raise ConfigError("m_samples must be >= 1")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")
        if self.step_scale is not None and self.step_scale < 0:
            raise ConfigError("step_scale must be >= 0")


@dataclass(frozen=True, eq=False)
class Chain:
    samples: np.ndarray
    acceptance_rate: float
    seed: int
    step_scale: float
    accepted: int = 0


def metropolis(logtarget: Callable, start, prop_chol, m_samples: int, burn_in: int,
               rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Gaussian random-walk Metropolis; returns kept draws and accept count.

    All proposals and uniforms are drawn up front so the chain is a pure
    function of the generator state.
    """
    start = np.asarray(start, dtype=float)
    total = burn_in + m_samples
    steps = rng.standard_normal((total, start.size)) @ np.asarray(prop_chol).T
    log_u = np.log(rng.random(total))
    out = np.empty((m_samples, start.size))
    cur, cur_lp = start.copy(), logtarget(start)
    accepted = 0
    for i in range(total):
        prop = cur + steps[i]
        lp = logtarget(prop)
        if log_u[i] < lp - cur_lp:
            cur, cur_lp = prop, lp
            if i >= burn_in:
                accepted += 1
        if i >= burn_in:
            out[i - burn_in] = cur
    return out, accepted


def rw_metropolis(model, alpha: float, cfg: MCMCConfig = MCMCConfig(),
                  laplace: LaplaceExpansion | None = None, *keys) -> Chain:
    """Sample the ``alpha``-tempered posterior of ``model``.

    Proposals are ``N(0, s^2 (alpha n)^-1 H_n^-1)`` around the current state,
    starting at the MLE.  ``keys`` extend the seed's sub-stream.
    """
    if not (np.isfinite(alpha) and alpha > 0):
        raise ConfigError(f"alpha must be finite and > 0, got {alpha}")
    le = laplace if laplace is not None else model.laplace()
    s = 2.38 / math.sqrt(model.p) if cfg.step_scale is None else float(cfg.step_scale)
    cov = np.linalg.inv(le.H_n) * s ** 2 / (alpha * model.n)
    chol = np.linalg.cholesky(0.5 * (cov + cov.T)) if s > 0 else np.zeros((model.p, model.p))

    def logtarget(beta):
        return alpha * model.loglik(beta) + model.log_prior(beta)

    draws, acc = metropolis(logtarget, le.theta_hat, chol, cfg.m_samples, cfg.burn_in,
                            stream(cfg.seed, "mcmc", *keys))
    return Chain(draws, acc / cfg.m_samples, cfg.seed, s, acc)


def posterior_mean(c: Chain) -> np.ndarray:
    if c.samples.shape[0] == 0:
        raise DataError("empty chain")
    return c.samples.mean(axis=0)


def batch_means_se(c: Chain, batches: int = 50) -> np.ndarray:
    """Monte Carlo standard error of the chain mean via non-overlapping batches."""
    m = c.samples.shape[0]
    b = min(batches, m)
    if b < 2:
        return np.full(c.samples.shape[1], np.nan)
    size = m // b
    means = c.samples[: b * size].reshape(b, size, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(b)


def laplace_expectation(le: LaplaceExpansion, q: Callable) -> float:
    """Leading-order Laplace value of ``E[q(theta)]``, i.e. ``q(theta_hat)``."""
    return float(q(le.theta_hat))


# --- experiments -------------------------------------------------------------

def simulate_logistic(n: int, beta_star, rng: np.random.Generator) -> LogisticModel:
    beta_star = np.asarray(beta_star, dtype=float)
    X = rng.standard_normal((n, beta_star.size))
    y = (rng.random(n) < expit(X @ beta_star)).astype(float)
    return LogisticModel(X, y)


def simulate_linear(n: int, beta_star, rng: np.random.Generator) -> Dataset:
    beta_star = np.asarray(beta_star, dtype=float)
    X = rng.standard_normal((n, beta_star.size))
    return Dataset(X, X @ beta_star + rng.standard_normal(n))


@dataclass(frozen=True, eq=False)
class Figure4Config:
    beta_star: tuple = FIGURE4_BETA
    n_grid: tuple = (200, 500, 1000, 2000)
    schedules: tuple = FIGURE4_SCHEDULES
    reps: int = 100
    mcmc: MCMCConfig = MCMCConfig()
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        ns = list(self.n_grid)
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_grid must be strictly increasing")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        for s in self.schedules:
            parse_schedule(s)


def _logistic_replication(task) -> list:
    cfg, n, rep = task
    for attempt in range(MAX_RETRIES + 1):
        model = simulate_logistic(n, cfg.beta_star, stream(cfg.seed, n, rep, attempt, "logistic"))
        try:
            le = logistic_mle(model)
            break
        except (Separation, NoConvergence) as exc:
            log.warning("n=%d rep=%d attempt=%d: %s; resampling", n, rep, attempt, exc)
    else:
        raise Separation(f"n={n} rep={rep}: separated data on every retry")
    rows = []
    for label in cfg.schedules:
        sched = parse_schedule(label)
        alpha = sched(n)
        chain = rw_metropolis(model, alpha, cfg.mcmc, le, n, rep, sched.label)
        mean = posterior_mean(chain)
        rows.append({
            "n": n, "schedule": sched.label, "rep": rep, "alpha": alpha,
            "attempts": attempt + 1, "acceptance_rate": chain.acceptance_rate,
            "sq_scaled_diff_mle": float(n * np.sum((mean - le.theta_hat) ** 2)),
            "sq_scaled_diff_truth": float(n * np.sum((mean - np.asarray(cfg.beta_star)) ** 2)),
        })
    return rows


def figure4_experiment(cfg: Figure4Config) -> tuple[list, list]:
    """Tempered logistic posterior means versus the MLE across ``n``.

    Data for a given ``(n, rep)`` are shared by all schedules.  Returns the
    per-replication rows and the per-``(n, schedule)`` summary with columns
    ``n, schedule, mean_sq_scaled_diff_mle, mean_sq_scaled_diff_truth, mc_se``
    (``mc_se`` is the across-replication standard error of the first mean).
    """
    tasks = [(cfg, n, rep) for n in cfg.n_grid for rep in range(cfg.reps)]
    rows = [r for chunk in pmap(_logistic_replication, tasks, cfg.threads) for r in chunk]
    return rows, summarize_threshold(rows)


def summarize_threshold(rows, key: str = "sq_scaled_diff_mle") -> list:
    out = []
    cells = sorted({(r["n"], r["schedule"]) for r in rows},
                   key=lambda c: (c[0], parse_schedule(c[1]).exponent))
    for n, label in cells:
        vals = np.array([r[key] for r in rows if r["n"] == n and r["schedule"] == label])
        row = {"n": n, "schedule": label, f"mean_{key}": float(vals.mean())}
        if "sq_scaled_diff_truth" in rows[0]:
            row["mean_sq_scaled_diff_truth"] = float(np.mean(
                [r["sq_scaled_diff_truth"] for r in rows if r["n"] == n and r["schedule"] == label]))
        row["mc_se"] = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else float("nan")
        out.append(row)
    return out


def linear_threshold_experiment(n_grid, schedules=FIGURE4_SCHEDULES, reps: int = 100,
                                beta_star=FIGURE4_BETA, seed: int = 0) -> tuple[list, list]:
    """Exact ``||sqrt(n) (posterior mean - OLS)||`` under a ``N(0, I)`` prior.

    Closed-form analogue of :func:`figure4_experiment` for the Gaussian linear
    model; no sampling is involved.
    """
    rows = []
    parsed: list[Schedule] = [parse_schedule(s) for s in schedules]
    for n in [int(v) for v in n_grid]:
        for rep in range(reps):
            d = simulate_linear(n, beta_star, stream(seed, n, rep, "linear"))
            theta = ols(d)
            for sched in parsed:
                mean = ridge_posterior(d, sched(n)).mean
                rows.append({
                    "n": n, "schedule": sched.label, "rep": rep, "alpha": sched(n),
                    "scaled_diff_mle": float(math.sqrt(n) * np.linalg.norm(mean - theta)),
                })
    return rows, summarize_threshold(rows, "scaled_diff_mle")
