"""Distances between posteriors and their limits.

Total variation, p-Wasserstein and the moment-weighted L1 statistic
``int |sqrt(s)(theta - center)|^k |pi - phi| dtheta``, plus the mixed
posterior used for the "point mass at infinity plus slowly vanishing alpha"
regime.  Monte Carlo estimators return :class:`Estimate` with a standard
error and are deterministic given their seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate, linalg, special, stats

from .errors import ConfigError, MomentUndefined, UnsupportedPair
from .rng import stream

DEFAULT_TV_SAMPLES = 100_000
QUANTILE_NODES = 10_000


class Estimate(NamedTuple):
    value: float
    se: float


# --- distribution handles ----------------------------------------------------

class Gaussian:
    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if self.cov.shape != (self.dim, self.dim):
            raise ConfigError("covariance shape does not match mean")
        self._chol = linalg.cholesky(self.cov, lower=True)

    @classmethod
    def from_posterior(cls, post) -> "Gaussian":
        return cls(post.mean, post.cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def logpdf(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return np.atleast_1d(stats.multivariate_normal(self.mean, self.cov).logpdf(x))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, rng, m):
        z = rng.standard_normal((m, self.dim))
        return self.mean + z @ self._chol.T

    # 1D helpers
    @property
    def sd(self) -> float:
        return float(np.sqrt(self.cov[0, 0]))

    def support(self):
        c, s = float(self.mean[0]), self.sd
        return c - 10 * s, c + 10 * s, [c]

    def cdf(self, x):
        return stats.norm.cdf(x, self.mean[0], self.sd)

    def ppf(self, u):
        return stats.norm.ppf(u, self.mean[0], self.sd)


class Conjugate:
    """One-dimensional handle around a :class:`ConjugatePosterior`."""

    dim = 1

    def __init__(self, post):
        self.post = post
        self._d = post.dist()

    def logpdf(self, x):
        return self._d.logpdf(np.asarray(x, dtype=float).reshape(-1))

    def pdf(self, x):
        return self._d.pdf(x)

    def sample(self, rng, m):
        return self._d.rvs(size=m, random_state=rng).reshape(-1, 1)

    def support(self):
        lo, hi = self._d.support()
        c, s = float(self._d.mean()), float(self._d.std())
        return max(lo, c - 10 * s), min(hi, c + 10 * s), [c]

    def cdf(self, x):
        return self._d.cdf(x)

    def ppf(self, u):
        return self._d.ppf(u)


class PointMass:
    def __init__(self, loc):
        self.loc = np.atleast_1d(np.asarray(loc, dtype=float))

    @property
    def dim(self) -> int:
        return self.loc.size

    def sample(self, rng, m):
        return np.tile(self.loc, (m, 1))

    def cdf(self, x):
        return (np.asarray(x) >= self.loc[0]).astype(float)

    def ppf(self, u):
        return np.full(np.shape(u), self.loc[0])


class Mixture:
    """``q * A + (1 - q) * B``."""

    def __init__(self, q, a, b):
        if not 0 <= q <= 1:
            raise ConfigError("mixture weight must lie in [0, 1]")
        if a.dim != b.dim:
            raise ConfigError("mixture components differ in dimension")
        self.q, self.a, self.b = float(q), a, b

    @property
    def dim(self) -> int:
        return self.a.dim

    def sample(self, rng, m):
        pick = rng.random(m) < self.q
        out = np.empty((m, self.dim))
        out[pick] = self.a.sample(rng, int(pick.sum()))
        out[~pick] = self.b.sample(rng, int((~pick).sum()))
        return out

    def cdf(self, x):
        return self.q * self.a.cdf(x) + (1 - self.q) * self.b.cdf(x)

    def ppf(self, u):
        return _bisect_ppf(self, u)


class Empirical:
    def __init__(self, samples):
        s = np.asarray(samples, dtype=float)
        self.samples = s.reshape(-1, 1) if s.ndim == 1 else s
        if self.samples.shape[0] == 0:
            raise ConfigError("empirical distribution needs at least one draw")

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def sample(self, rng, m):
        return self.samples[rng.integers(0, self.samples.shape[0], size=m)]

    def cdf(self, x):
        s = np.sort(self.samples[:, 0])
        return np.searchsorted(s, x, side="right") / s.size

    def ppf(self, u):
        return np.quantile(self.samples[:, 0], u, method="inverted_cdf")


def _has_density(d) -> bool:
    return isinstance(d, (Gaussian, Conjugate))


def _bisect_ppf(d, u, tol=1e-10):
    u = np.asarray(u, dtype=float)
    lo = np.full(u.shape, -1.0)
    hi = np.full(u.shape, 1.0)
    while np.any(d.cdf(lo) > u):
        lo = np.where(d.cdf(lo) > u, 2 * lo, lo)
    while np.any(d.cdf(hi) < u):
        hi = np.where(d.cdf(hi) < u, 2 * hi, hi)
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        below = d.cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return hi


# --- total variation ---------------------------------------------------------

def tv_importance(a, b, samples: int = DEFAULT_TV_SAMPLES, seed: int = 0) -> Estimate:
    """``E_a |1 - b/a| / 2`` with draws from ``a``."""
    x = a.sample(stream(seed, "tv"), samples)
    ratio = np.exp(b.logpdf(x) - a.logpdf(x))
    vals = 0.5 * np.abs(1.0 - ratio)
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(samples)))


def tv_distance(a, b, samples: int = DEFAULT_TV_SAMPLES, seed: int = 0) -> float:
    """Total variation distance ``(1/2) int |f - g|``.

    One-dimensional densities are integrated adaptively over a range covering
    10 sd of both; multivariate Gaussians use :func:`tv_importance`.
    """
    if isinstance(a, PointMass) or isinstance(b, PointMass):
        if isinstance(a, PointMass) and isinstance(b, PointMass):
            return 0.0 if np.allclose(a.loc, b.loc) else 1.0
        if _has_density(a) or _has_density(b):
            return 1.0
    if not (_has_density(a) and _has_density(b)):
        raise UnsupportedPair(f"no TV route for {type(a).__name__} vs {type(b).__name__}")
    if a.dim != b.dim:
        raise UnsupportedPair("dimension mismatch")
    if a.dim == 1:
        return _tv_1d(a, b)
    if a.dim > 3:
        raise UnsupportedPair("TV estimation is limited to p <= 3")
    return tv_importance(a, b, samples, seed).value


def _tv_1d(a, b) -> float:
    lo_a, hi_a, pa = a.support()
    lo_b, hi_b, pb = b.support()
    lo, hi = min(lo_a, lo_b), max(hi_a, hi_b)

    def f(x):
        return abs(float(a.pdf(np.array([x]))[0]) - float(b.pdf(np.array([x]))[0]))

    pts = sorted(p for p in pa + pb if lo < p < hi)
    val, _ = integrate.quad(f, lo, hi, points=pts or None, limit=500, epsabs=1e-10, epsrel=1e-6)
    return float(min(max(0.5 * val, 0.0), 1.0))


# --- Wasserstein -------------------------------------------------------------

@lru_cache(maxsize=2)
def _legendre_unit(nodes: int):
    x, w = special.roots_legendre(nodes)
    return 0.5 * (x + 1.0), 0.5 * w


def _moment_about(d, loc, p: int) -> float:
    """``E ||X - loc||^p`` for a handle ``d``."""
    if isinstance(d, PointMass):
        return float(np.linalg.norm(d.loc - loc) ** p)
    if isinstance(d, Mixture):
        return d.q * _moment_about(d.a, loc, p) + (1 - d.q) * _moment_about(d.b, loc, p)
    if isinstance(d, Empirical):
        return float(np.mean(np.linalg.norm(d.samples - loc, axis=1) ** p))
    if isinstance(d, Gaussian) and p == 2:
        return float(np.trace(d.cov) + np.sum((d.mean - loc) ** 2))
    if d.dim == 1 and _has_density(d):
        lo, hi, pts = d.support()
        c = float(loc[0])
        val, _ = integrate.quad(lambda x: abs(x - c) ** p * float(d.pdf(np.array([x]))[0]),
                                lo, hi, points=sorted({c, *pts}) if lo < c < hi else pts,
                                limit=500)
        return float(val)
    raise MomentUndefined(f"no closed form for E||X - loc||^{p} under {type(d).__name__}")


def gaussian_w2(a: Gaussian, b: Gaussian) -> float:
    """Closed-form W2 between Gaussians."""
    ra = linalg.sqrtm(a.cov)
    cross = linalg.sqrtm(ra @ b.cov @ ra)
    val = np.sum((a.mean - b.mean) ** 2) + np.trace(a.cov + b.cov - 2 * np.real(cross))
    return float(np.sqrt(max(val, 0.0)))


def wasserstein_p(a, b, p: int = 2) -> float:
    """p-Wasserstein distance for the pairs needed here.

    * point mass on either side: ``(E ||X - loc||^p)^(1/p)``
    * equal-size empirical pairs in 1D: sorted coupling
    * Gaussian pairs with ``p = 2``: closed form
    * any other 1D pair: quantile coupling with Gauss-Legendre nodes on (0, 1)
    """
    if p < 1:
        raise ConfigError("p must be >= 1")
    if a.dim != b.dim:
        raise UnsupportedPair("dimension mismatch")
    if isinstance(b, PointMass):
        return _moment_about(a, b.loc, p) ** (1.0 / p)
    if isinstance(a, PointMass):
        return _moment_about(b, a.loc, p) ** (1.0 / p)
    if isinstance(a, Empirical) and isinstance(b, Empirical):
        if a.dim != 1 or a.samples.shape[0] != b.samples.shape[0]:
            raise UnsupportedPair("empirical coupling needs equal-size 1D samples")
        diff = np.sort(a.samples[:, 0]) - np.sort(b.samples[:, 0])
        return float(np.mean(np.abs(diff) ** p) ** (1.0 / p))
    if isinstance(a, Gaussian) and isinstance(b, Gaussian) and p == 2:
        return gaussian_w2(a, b)
    if a.dim == 1:
        u, w = _legendre_unit(QUANTILE_NODES)
        diff = np.abs(np.asarray(a.ppf(u), float) - np.asarray(b.ppf(u), float))
        return float(np.sum(w * diff ** p) ** (1.0 / p))
    raise UnsupportedPair(f"no W_p route for {type(a).__name__} vs {type(b).__name__} in {a.dim}D")


# --- moment-weighted discrepancy --------------------------------------------

def moment_discrepancy(post, target, k: int, center, scale: float,
                       samples: int = DEFAULT_TV_SAMPLES, seed: int = 0) -> Estimate:
    """``int ||sqrt(scale) (theta - center)||^k |post - target| dtheta``.

    Symmetrised importance estimate: the integral is estimated once with
    draws from ``post`` and once with draws from ``target``; the two are
    averaged.  ``k = 0`` gives twice the TV distance.
    """
    if k < 0:
        raise ConfigError("k must be >= 0")
    if not (_has_density(post) and _has_density(target)):
        raise UnsupportedPair("the moment discrepancy needs two densities")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    ests = []
    for tag, src, other in (("post", post, target), ("target", target, post)):
        x = src.sample(stream(seed, "moment", tag), samples)
        w = np.linalg.norm(np.sqrt(scale) * (x - center), axis=1) ** k
        vals = w * np.abs(1.0 - np.exp(other.logpdf(x) - src.logpdf(x)))
        ests.append((vals.mean(), vals.var(ddof=1) / samples))
    value = 0.5 * (ests[0][0] + ests[1][0])
    se = 0.5 * np.sqrt(ests[0][1] + ests[1][1])
    return Estimate(float(value), float(se))


# --- mixed posteriors --------------------------------------------------------

@dataclass(frozen=True)
class MixedAlphaLaw:
    """Weight ``q`` on the slowly vanishing schedule, ``1 - q`` on the diverging one."""

    q: float
    alpha_small: object
    gamma_large: object

    def __post_init__(self):
        if not 0 <= self.q <= 1:
            raise ConfigError("q must lie in [0, 1]")


def sample_mixed(q: float, a, b, m: int, seed: int) -> Empirical:
    """Draw ``m`` points from ``q * a + (1 - q) * b``."""
    if m < 1:
        raise ConfigError("m must be >= 1")
    return Empirical(Mixture(q, a, b).sample(stream(seed, "mixed"), m))


def _optimal_map(a: Gaussian, b: Gaussian):
    ra = np.real(linalg.sqrtm(a.cov))
    ra_inv = np.linalg.inv(ra)
    M = ra_inv @ np.real(linalg.sqrtm(ra @ b.cov @ ra)) @ ra_inv
    return lambda x: b.mean + (x - a.mean) @ M.T


def coupled_mixture_cost(q: float, a: Gaussian, phi: Gaussian, b: Gaussian, loc,
                         m: int, seed: int, *keys) -> Estimate:
    """Monte Carlo cost of the component-wise coupling between two mixtures.

    Draws share the component label; ``a`` is pushed onto ``phi`` by the
    Gaussian optimal map and ``b`` is paired with the point mass at ``loc``.
    Estimates the convex bound on ``W2^2`` and therefore upper-bounds it.
    """
    rng = stream(seed, "coupling", *keys)
    pick = rng.random(m) < q
    cost = np.empty(m)
    xa = a.sample(rng, int(pick.sum()))
    cost[pick] = np.sum((xa - _optimal_map(a, phi)(xa)) ** 2, axis=1)
    xb = b.sample(rng, int((~pick).sum()))
    cost[~pick] = np.sum((xb - np.atleast_1d(loc)) ** 2, axis=1)
    return Estimate(float(cost.mean()), float(cost.std(ddof=1) / np.sqrt(m)) if m > 1 else float("nan"))


def theorem3_check(q: float, alpha_small, gamma_large, n_grid, seed: int = 0,
                   reps: int = 1, prior: str = "flat", beta_star=(0.0, -0.5, 0.1),
                   coupling_draws: int = 20_000) -> list:
    """W2 between the mixed tempered posterior and its limiting mixture.

    For each ``n`` a linear-model dataset is simulated, ``A`` is the posterior
    tempered by ``alpha_small(n)``, ``B`` the one tempered by
    ``gamma_large(n)``, ``phi`` the Gaussian ``N(ols, I sigma2 / (alpha n))``.
    Reports the convex bound ``sqrt(q W2(A, phi)^2 + (1-q) W2(B, delta_ols)^2)``,
    its two terms, and the Monte Carlo coupling estimate.
    """
    from .experiments import SimConfig, generate
    from .linmodel import ols, ridge_posterior
    from .schedules import parse_schedule

    a_sched, g_sched = parse_schedule(alpha_small), parse_schedule(gamma_large)
    rows = []
    for n in [int(v) for v in n_grid]:
        sim = SimConfig(n=n, beta_star=tuple(beta_star), misspecified=False, reps=reps,
                        master_seed=seed, p=len(beta_star),
                        working_columns=tuple(range(len(beta_star))))
        for rep in range(reps):
            d = generate(sim, rep)
            theta_hat = ols(d)
            alpha, gamma = a_sched(n), g_sched(n)
            A = Gaussian.from_posterior(ridge_posterior(d, alpha, prior))
            B = Gaussian.from_posterior(ridge_posterior(d, gamma, prior))
            phi = Gaussian(theta_hat, np.eye(d.p) * d.sigma2 / (alpha * n))
            w_a = gaussian_w2(A, phi)
            w_b = wasserstein_p(B, PointMass(theta_hat), 2)
            bound = q * w_a ** 2 + (1 - q) * w_b ** 2
            mc = coupled_mixture_cost(q, A, phi, B, theta_hat, coupling_draws,
                                      seed, n, rep)
            rows.append({
                "n": n, "rep": rep, "q": q, "alpha": alpha, "gamma": gamma,
                "w2_component": w_a, "w2_point": w_b,
                "w2_bound": float(np.sqrt(bound)),
                "w2sq_coupling": mc.value, "w2sq_coupling_se": mc.se,
            })
    return rows
