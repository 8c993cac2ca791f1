"""Conjugate exponential-family tempered posteriors and their weak limits.

Each family keeps the natural-form bookkeeping ``(xi, nu)`` of the prior
``exp(eta * xi - nu * A(eta) - psi(xi, nu))``: tempering by ``alpha`` maps
``xi -> xi + alpha * T(x)`` and ``nu -> nu + alpha * n``.  User-facing
quantities (densities, characteristic functions, samplers) live on the
conventional parameter: the rate ``lambda`` (exp-gamma), the shape ``k``
(pareto-gamma), the success probability ``p`` (bern-beta) or the mean ``mu``
(gauss-gauss).

The ``nu`` offsets for the gamma and beta families follow the published
bookkeeping (``nu = 1 - a`` and ``nu = a + b + 2``); the conventional
parameters are recovered from the increments ``nu_n - nu`` and
``xi_n - xi`` so the offsets never leak into a density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special, stats

from .errors import ConfigError, ParameterOutOfSpace, SupportViolation
from .rng import stream

# the cf integrand exp(i t p) is entire, so this many nodes plus |t| is exact to rounding
BETA_CF_NODES = 64

FAMILIES = ("exp-gamma", "pareto-gamma", "bern-beta", "gauss-gauss")
_ALIASES = {
    "ExpGamma": "exp-gamma",
    "ParetoGamma": "pareto-gamma",
    "BernBeta": "bern-beta",
    "GaussGauss": "gauss-gauss",
}


@dataclass(frozen=True)
class ConjugateFamily:
    """Likelihood/prior pair with its prior hyperparameters.

    ``a, b`` are the Gamma (shape, rate) or Beta parameters; ``mu0,
    sigma0_sq`` the Gaussian prior; ``sigma2`` the known Gaussian variance and
    ``x_m`` the known Pareto scale.
    """

    kind: str
    a: float = 1.0
    b: float = 1.0
    mu0: float = 0.0
    sigma0_sq: float = 1.0
    sigma2: float = 1.0
    x_m: float = 1.0

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in FAMILIES:
            raise ConfigError(f"unknown family {self.kind!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "kind", kind)
        for name in ("a", "b", "sigma0_sq", "sigma2", "x_m"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    # prior in natural bookkeeping
    @property
    def xi(self) -> float:
        if self.kind in ("exp-gamma", "pareto-gamma"):
            return self.b
        if self.kind == "bern-beta":
            return self.a - 1.0
        return self.mu0 / self.sigma0_sq

    @property
    def nu(self) -> float:
        if self.kind in ("exp-gamma", "pareto-gamma"):
            return 1.0 - self.a
        if self.kind == "bern-beta":
            return self.a + self.b + 2.0
        return self.sigma2 / self.sigma0_sq

    def sufficient_statistic(self, data) -> float:
        x = np.asarray(data, dtype=float).ravel()
        if self.kind == "exp-gamma":
            if np.any(x <= 0):
                raise SupportViolation("exponential data must be positive")
            return float(x.sum())
        if self.kind == "pareto-gamma":
            if np.any(x < self.x_m):
                raise SupportViolation("pareto data must be >= x_m")
            return float(np.log(x / self.x_m).sum())
        if self.kind == "bern-beta":
            if np.any((x != 0) & (x != 1)):
                raise SupportViolation("bernoulli data must be 0/1")
            return float(x.sum())
        if not np.all(np.isfinite(x)):
            raise SupportViolation("gaussian data must be finite")
        return float(x.sum() / self.sigma2)

    def prior(self) -> "ConjugatePosterior":
        return ConjugatePosterior(self, self.xi, self.nu)

    # conventional <-> natural parameter
    def natural(self, theta: float) -> float:
        if self.kind == "exp-gamma":
            return -theta
        if self.kind == "pareto-gamma":
            return -(theta + 1.0)
        if self.kind == "bern-beta":
            return float(special.logit(theta))
        return theta

    def conventional(self, eta: float) -> float:
        if self.kind == "exp-gamma":
            return -eta
        if self.kind == "pareto-gamma":
            return -eta - 1.0
        if self.kind == "bern-beta":
            return float(special.expit(eta))
        return eta

    def mean_statistic(self, eta: float) -> float:
        """``g(eta) = E[T(X_1)]`` under the natural parameter ``eta``."""
        if self.kind == "exp-gamma":
            if not eta < 0:
                raise ParameterOutOfSpace("exp-gamma needs eta < 0")
            return -1.0 / eta
        if self.kind == "pareto-gamma":
            if not eta < -1:
                raise ParameterOutOfSpace("pareto-gamma needs eta < -1")
            return -1.0 / (eta + 1.0)
        if self.kind == "bern-beta":
            if not np.isfinite(eta):
                raise ParameterOutOfSpace("bern-beta needs finite eta")
            return float(special.expit(eta))
        if not np.isfinite(eta):
            raise ParameterOutOfSpace("gauss-gauss needs finite eta")
        return eta / self.sigma2

    def fisher_information(self, theta: float) -> float:
        """Per-observation Fisher information in the conventional parameter."""
        if self.kind in ("exp-gamma", "pareto-gamma"):
            return 1.0 / theta ** 2
        if self.kind == "bern-beta":
            return 1.0 / (theta * (1.0 - theta))
        return 1.0 / self.sigma2

    def mle(self, data) -> float:
        x = np.asarray(data, dtype=float).ravel()
        if self.kind == "exp-gamma":
            return 1.0 / x.mean()
        if self.kind == "pareto-gamma":
            return x.size / np.log(x / self.x_m).sum()
        return float(x.mean())

    def sample_data(self, theta: float, n: int, rng) -> np.ndarray:
        if self.kind == "exp-gamma":
            return rng.exponential(1.0 / theta, size=n)
        if self.kind == "pareto-gamma":
            return self.x_m * (1.0 + rng.pareto(theta, size=n))
        if self.kind == "bern-beta":
            return (rng.random(n) < theta).astype(float)
        return rng.normal(theta, np.sqrt(self.sigma2), size=n)


@dataclass(frozen=True)
class ConjugatePosterior:
    family: ConjugateFamily
    xi_n: float
    nu_n: float

    def __post_init__(self):
        if self.family.kind in ("exp-gamma", "pareto-gamma"):
            shape, rate = self.params()
            ok = shape > 0 and rate > 0
        elif self.family.kind == "bern-beta":
            a, b = self.params()
            ok = a > 0 and b > 0
        else:
            ok = self.nu_n > 0
        if not ok:
            raise ParameterOutOfSpace(f"hyperparameters outside the admissible region: {self}")

    def params(self) -> tuple:
        """Conventional parameters: Gamma (shape, rate), Beta (a, b) or Normal (mean, var)."""
        f = self.family
        d_nu = self.nu_n - f.nu
        d_xi = self.xi_n - f.xi
        if f.kind in ("exp-gamma", "pareto-gamma"):
            return f.a + d_nu, self.xi_n
        if f.kind == "bern-beta":
            return f.a + d_xi, f.b + d_nu - d_xi
        return self.xi_n * f.sigma2 / self.nu_n, f.sigma2 / self.nu_n

    def dist(self):
        f = self.family
        if f.kind in ("exp-gamma", "pareto-gamma"):
            shape, rate = self.params()
            return stats.gamma(shape, scale=1.0 / rate)
        if f.kind == "bern-beta":
            return stats.beta(*self.params())
        m, v = self.params()
        return stats.norm(m, np.sqrt(v))

    def pdf(self, theta):
        return self.dist().pdf(theta)

    def logpdf(self, theta):
        return self.dist().logpdf(theta)

    def mean(self) -> float:
        return float(self.dist().mean())

    def std(self) -> float:
        return float(self.dist().std())

    def char_function(self, t):
        return char_function(self, t)


def alpha_update(f: ConjugateFamily, data, alpha: float) -> ConjugatePosterior:
    """Tempered conjugate update; ``alpha = 0`` returns the prior."""
    if not (np.isfinite(alpha) and alpha >= 0):
        raise ConfigError(f"alpha must be finite and >= 0, got {alpha}")
    x = np.asarray(data, dtype=float).ravel()
    T = f.sufficient_statistic(x)
    return ConjugatePosterior(f, alpha * T + f.xi, alpha * x.size + f.nu)


def _beta_gauss_rule(a: float, b: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for the Beta(a, b) law on [0, 1], weights summing to one.

    Golub-Welsch on the Jacobi recurrence; unlike ``roots_jacobi`` it never
    forms the total weight, which overflows once ``a + b`` passes ~1000.
    """
    al, be = b - 1.0, a - 1.0
    k = np.arange(nodes, dtype=float)
    s = 2 * k + al + be
    with np.errstate(invalid="ignore", divide="ignore"):
        diag = (be ** 2 - al ** 2) / (s * (s + 2))
    diag[0] = (be - al) / (al + be + 2)
    k, s = k[1:], s[1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        off2 = 4 * k * (k + al) * (k + be) * (k + al + be) / (s ** 2 * (s + 1) * (s - 1))
    if nodes > 1:  # (k + al + be) / (s - 1) cancels at k = 1; 0/0 when a + b = 1
        off2[0] = 4 * (1 + al) * (1 + be) / ((2 + al + be) ** 2 * (3 + al + be))
    off = np.sqrt(off2)
    x, vec = linalg.eigh_tridiagonal(diag, off)
    w = vec[0] ** 2
    return (1 + x) / 2, w / w.sum()


def char_function(post: ConjugatePosterior, t):
    """Characteristic function ``E[exp(i t theta)]`` of the conventional parameter."""
    t = np.asarray(t, dtype=float)
    kind = post.family.kind
    if kind in ("exp-gamma", "pareto-gamma"):
        shape, rate = post.params()
        return (1.0 - 1j * t / rate) ** (-shape)
    if kind == "bern-beta":
        a, b = post.params()
        theta, w = _beta_gauss_rule(a, b, BETA_CF_NODES + int(np.ceil(np.max(np.abs(t), initial=0.0))))
        return np.exp(1j * np.multiply.outer(t, theta)) @ w
    m, v = post.params()
    return np.exp(1j * m * t - 0.5 * v * t ** 2)


def limit_params(f: ConjugateFamily, alpha0: float, eta_star: float) -> tuple:
    """Hyperparameters ``(xi', nu')`` of the weak limit when ``alpha_n n -> alpha0``."""
    if not (np.isfinite(alpha0) and alpha0 >= 0):
        raise ConfigError("alpha0 must be finite and >= 0")
    g = f.mean_statistic(eta_star)
    return alpha0 * g + f.xi, alpha0 + f.nu


def limit_posterior(f: ConjugateFamily, alpha0: float, eta_star: float) -> ConjugatePosterior:
    xi, nu = limit_params(f, alpha0, eta_star)
    return ConjugatePosterior(f, xi, nu)


def support_grid(f: ConjugateFamily, post: ConjugatePosterior | None = None,
                 points: int = 2000) -> np.ndarray:
    """Evaluation grid: centre +- 10 sd of ``post`` (default the prior), clipped to the support."""
    ref = f.prior() if post is None else post
    m, s = ref.mean(), ref.std()
    lo, hi = m - 10 * s, m + 10 * s
    if f.kind in ("exp-gamma", "pareto-gamma"):
        lo = max(lo, 1e-9 * max(m, 1.0))
    elif f.kind == "bern-beta":
        lo, hi = max(lo, 1e-9), min(hi, 1 - 1e-9)
    return np.linspace(lo, hi, points)


def tempered_loglik(f: ConjugateFamily, data, theta, alpha: float):
    """``alpha * log f(data | theta)`` on a grid of conventional parameters."""
    x = np.asarray(data, dtype=float).ravel()
    theta = np.asarray(theta, dtype=float)
    if f.kind == "exp-gamma":
        ll = x.size * np.log(theta) - theta * x.sum()
    elif f.kind == "pareto-gamma":
        ll = x.size * np.log(theta) - (theta + 1.0) * np.log(x / f.x_m).sum()
    elif f.kind == "bern-beta":
        s = x.sum()
        ll = s * np.log(theta) + (x.size - s) * np.log1p(-theta)
    else:
        ll = -0.5 * ((x[:, None] - theta[None, :]) ** 2).sum(axis=0) / f.sigma2
    return alpha * ll


def prior_logpdf(f: ConjugateFamily, theta):
    return f.prior().logpdf(theta)


def _tv_to_gaussian(post: ConjugatePosterior, mean: float, var: float) -> float:
    from .metrics import Gaussian, Conjugate, tv_distance

    return tv_distance(Conjugate(post), Gaussian(np.array([mean]), np.array([[var]])))


def _schedule(name: str, alpha0: float):
    if name == "inverse-n":
        return lambda n: alpha0 / n
    if name == "inverse-sqrt-n":
        return lambda n: n ** -0.5
    raise ConfigError(f"unknown schedule {name!r}")


def bvm_failure_check(f: ConjugateFamily, alpha0: float, eta_star: float, n_grid,
                      seed: int, reps: int = 50, schedule: str = "inverse-n",
                      t_grid=None) -> list:
    """Compare tempered posteriors with their weak limit and the Gaussian BvM target.

    Returns one dict per (n, rep) with ``cf_gap`` (sup over ``t_grid`` of the
    cf difference to the limiting law, NaN unless ``schedule == 'inverse-n'``)
    and ``tv_to_gaussian`` (TV distance to ``N(mle, 1 / (alpha n I(theta*)))``).
    """
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError("n_grid must be increasing")
    t_grid = np.linspace(-5, 5, 101) if t_grid is None else np.asarray(t_grid, float)
    alpha_of = _schedule(schedule, alpha0)
    theta_star = f.conventional(eta_star)
    info = f.fisher_information(theta_star)
    limit_cf = None
    if schedule == "inverse-n":
        limit_cf = char_function(limit_posterior(f, alpha0, eta_star), t_grid)
    rows = []
    for n in n_grid:
        alpha = alpha_of(n)
        for rep in range(reps):
            data = f.sample_data(theta_star, n, stream(seed, n, rep, "conjugate"))
            post = alpha_update(f, data, alpha)
            gap = float("nan")
            if limit_cf is not None:
                gap = float(np.max(np.abs(char_function(post, t_grid) - limit_cf)))
            tv = _tv_to_gaussian(post, f.mle(data), 1.0 / (alpha * n * info))
            rows.append({"n": n, "rep": rep, "alpha": alpha, "cf_gap": gap, "tv_to_gaussian": tv})
    return rows


def summarize_bvm(rows) -> list:
    """Per-n medians of the cf gap and TV distance."""
    out = []
    for n in sorted({r["n"] for r in rows}):
        sub = [r for r in rows if r["n"] == n]
        out.append({
            "n": n,
            "cf_gap": float(np.median([r["cf_gap"] for r in sub])),
            "tv_to_gaussian": float(np.median([r["tv_to_gaussian"] for r in sub])),
        })
    return out
