"""Closed-form limit laws and the transport-equation residual checker.

For complete-graph rates q(i,j) = theta_j - |theta| 1{i==j}, the joint limit
law of (x_n, i_n) in the critical regime p_n ~ a/n is the mixture

    sum_i nu_i Dir(a theta + e_i) (x) delta_i,      nu = theta / |theta|,

whose x-marginal is exactly Dir(a theta).  Its densities phi(., i) solve the
stationary transport system

    (D - 1) phi(x,i) + sum_k x_k d_k phi(x,i) - d_i phi(x,i)
        + sum_j (nu_j / nu_i) a q(j,i) phi(x,j) = 0

on the open simplex, which is checked here pointwise.  Densities are
evaluated in log space so large a theta parameters do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln
from scipy.stats import qmc


# ---------------------------------------------------------------------------
# Dirichlet machinery


def dirichlet_logpdf(x: np.ndarray, alpha: np.ndarray) -> float:
    """Log density of Dir(alpha) at a simplex point (log-gamma arithmetic)."""
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    return float(
        gammaln(alpha.sum()) - gammaln(alpha).sum() + np.sum((alpha - 1.0) * np.log(x))
    )


def dirichlet_mean_cov(alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of Dir(alpha) by the standard formulas."""
    alpha = np.asarray(alpha, dtype=float)
    s = alpha.sum()
    mean = alpha / s
    cov = (np.diag(mean) - np.outer(mean, mean)) / (s + 1.0)
    return mean, cov


def dirichlet_second_moment(alpha: np.ndarray) -> np.ndarray:
    """E[X X^T] for Dir(alpha)."""
    mean, cov = dirichlet_mean_cov(alpha)
    return cov + np.outer(mean, mean)


@dataclass(frozen=True)
class DirichletMixtureSpec:
    """Joint law sum_i weights[i] Dir(alphas[i]) (x) delta_i."""

    theta: np.ndarray
    a: float
    weights: np.ndarray  # nu
    alphas: np.ndarray  # row i: a theta + e_i

    @property
    def dim(self) -> int:
        return self.theta.size

    def sample(self, n_samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw (x, i) pairs: label from the weights, x from its component."""
        labels = rng.choice(self.dim, size=n_samples, p=self.weights)
        xs = np.empty((n_samples, self.dim))
        for i in range(self.dim):
            mask = labels == i
            if mask.any():
                xs[mask] = rng.dirichlet(self.alphas[i], size=int(mask.sum()))
        return xs, labels

    def sample_marginal(self, n_samples: int, rng: np.random.Generator) -> np.ndarray:
        """Draw from the x-marginal Dir(a theta) directly."""
        return rng.dirichlet(self.a * self.theta, size=n_samples)

    def component_logpdf(self, x: np.ndarray, i: int) -> float:
        return dirichlet_logpdf(x, self.alphas[i])

    def marginal_logpdf(self, x: np.ndarray) -> float:
        return dirichlet_logpdf(x, self.a * self.theta)

    def mean(self) -> np.ndarray:
        return self.weights.copy()

    def cov(self) -> np.ndarray:
        """Covariance of the x-marginal; equals the Dir(a theta) covariance."""
        second = np.zeros((self.dim, self.dim))
        for i in range(self.dim):
            second += self.weights[i] * dirichlet_second_moment(self.alphas[i])
        mean = self.mean()
        return second - np.outer(mean, mean)

    def marginal_beta_params(self, k: int) -> tuple[float, float]:
        """Coordinate k of Dir(a theta) is Beta(a theta_k, a(|theta| - theta_k))."""
        ath = self.a * self.theta
        return float(ath[k]), float(ath.sum() - ath[k])


def dirichlet_mixture(theta: np.ndarray, a: float) -> DirichletMixtureSpec:
    """Limit law of (x_n, i_n) for complete-graph rates in the critical regime."""
    th = np.asarray(theta, dtype=float)
    if np.any(th <= 0) or a <= 0:
        raise ValueError("theta > 0 and a > 0 required")
    d = th.size
    nu = th / th.sum()
    alphas = a * np.tile(th, (d, 1)) + np.eye(d)
    return DirichletMixtureSpec(theta=th, a=float(a), weights=nu, alphas=alphas)


@dataclass(frozen=True)
class BetaMixtureSpec:
    """Two-state limit law on [0, 1] x {0, 1}: the D = 2 reduction.

    Component for discrete state 0 (x = mass of state 0) is
    Beta(a theta1 + 1, a theta2) with weight theta1/(theta1 + theta2), and
    symmetrically for state 1.
    """

    theta1: float
    theta2: float
    a: float

    @property
    def weights(self) -> tuple[float, float]:
        s = self.theta1 + self.theta2
        return self.theta1 / s, self.theta2 / s

    def component_params(self, i: int) -> tuple[float, float]:
        if i == 0:
            return self.a * self.theta1 + 1.0, self.a * self.theta2
        return self.a * self.theta1, self.a * self.theta2 + 1.0

    @property
    def marginal_params(self) -> tuple[float, float]:
        return self.a * self.theta1, self.a * self.theta2

    def sample(self, n_samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        labels = (rng.random(n_samples) >= self.weights[0]).astype(np.int64)
        xs = np.empty(n_samples)
        for i in (0, 1):
            mask = labels == i
            if mask.any():
                p, q = self.component_params(i)
                xs[mask] = rng.beta(p, q, size=int(mask.sum()))
        return xs, labels


def beta_mixture_d2(theta1: float, theta2: float, a: float) -> BetaMixtureSpec:
    """D = 2 limit law; consistent with dirichlet_mixture restricted to x_1."""
    if theta1 <= 0 or theta2 <= 0 or a <= 0:
        raise ValueError("positive parameters required")
    return BetaMixtureSpec(theta1=float(theta1), theta2=float(theta2), a=float(a))


# ---------------------------------------------------------------------------
# stationary density candidates and the transport system


@dataclass(frozen=True)
class PhiCandidate:
    """Density candidate phi(x, i) with analytic partial derivatives.

    grad may be None, in which case residual evaluation falls back to
    central finite differences along the ambient coordinates.
    """

    dim: int
    value: Callable[[np.ndarray, int], float]
    grad: Callable[[np.ndarray, int], np.ndarray] | None = None


def phi_complete_graph(theta: np.ndarray, a: float) -> PhiCandidate:
    """Dir(a theta + e_i) densities as the transport-system solution.

    phi(x, i) is proportional to x_i^{a theta_i} prod_{j != i} x_j^{a theta_j - 1}
    with the exact Dirichlet normalization; the gradient uses
    d_k phi = phi * exponent_k / x_k.
    """
    th = np.asarray(theta, dtype=float)
    if np.any(th <= 0) or a <= 0:
        raise ValueError("theta > 0 and a > 0 required")
    d = th.size
    alphas = a * np.tile(th, (d, 1)) + np.eye(d)
    lognorms = gammaln(alphas.sum(axis=1)) - gammaln(alphas).sum(axis=1)
    exponents = alphas - 1.0  # exponent of x_j in component i is alphas[i, j] - 1

    def value(x: np.ndarray, i: int) -> float:
        x = np.asarray(x, dtype=float)
        return math.exp(lognorms[i] + float(np.sum(exponents[i] * np.log(x))))

    def grad(x: np.ndarray, i: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return value(x, i) * exponents[i] / x

    return PhiCandidate(dim=d, value=value, grad=grad)


def _fd_grad(phi: PhiCandidate, x: np.ndarray, i: int, step: float) -> np.ndarray:
    g = np.empty(phi.dim)
    for k in range(phi.dim):
        e = np.zeros(phi.dim)
        e[k] = step
        g[k] = (phi.value(x + e, i) - phi.value(x - e, i)) / (2.0 * step)
    return g


def pde_residual(
    phi: PhiCandidate,
    q: np.ndarray,
    a: float,
    nu: np.ndarray,
    x: np.ndarray,
    i: int,
    *,
    delta: float = 1e-3,
    fd_step: float = 1e-6,
) -> float:
    """Left-hand side of the stationary transport system at (x, i).

    q may be a GeneratorMatrix or a raw zero-row-sum rate matrix (the system
    itself never needs Id + q to be stochastic).  x must be interior,
    min(x) >= delta, since candidate derivatives blow up at the boundary
    when some a theta_j < 1.
    """
    q = np.asarray(getattr(q, "q", q), dtype=float)
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    d = phi.dim
    if np.min(x) < delta:
        raise ValueError(f"x too close to the boundary: min {np.min(x):.2e} < {delta}")
    g = phi.grad(x, i) if phi.grad is not None else _fd_grad(phi, x, i, fd_step)
    res = (d - 1) * phi.value(x, i) + float(np.dot(x, g)) - g[i]
    for j in range(d):
        res += (nu[j] / nu[i]) * a * q[j, i] * phi.value(x, j)
    return float(res)


def interior_simplex_points(
    dim: int, count: int, margin: float = 0.01, seed: int = 0
) -> np.ndarray:
    """Deterministic low-discrepancy points in the open simplex.

    Halton points in the cube are mapped through the sorted-uniform-spacings
    transform, then pulled toward the barycenter so every coordinate is at
    least margin.
    """
    if not 0 < margin < 1.0 / dim:
        raise ValueError("margin must lie in (0, 1/dim)")
    sampler = qmc.Halton(d=dim - 1, scramble=True, seed=seed)
    u = sampler.random(count)
    padded = np.concatenate(
        [np.zeros((count, 1)), np.sort(u, axis=1), np.ones((count, 1))], axis=1
    )
    pts = np.diff(padded, axis=1)
    return margin + (1.0 - dim * margin) * pts


def mc_normalization(
    phi: PhiCandidate, nu: np.ndarray, n_samples: int = 200_000, seed: int = 0
) -> float:
    """Monte-Carlo estimate of sum_i nu_i integral phi(., i) over the simplex.

    Uses uniform simplex draws; the simplex volume in the (D-1) ambient
    coordinates is 1/(D-1)!.
    """
    rng = np.random.default_rng(seed)
    d = phi.dim
    pts = rng.dirichlet(np.ones(d), size=n_samples)
    pts = np.clip(pts, 1e-300, None)
    total = 0.0
    for i in range(d):
        vals = np.array([phi.value(p, i) for p in pts])
        total += nu[i] * float(np.mean(vals))
    return total / math.factorial(d - 1)


# ---------------------------------------------------------------------------
# the two-state turnover specialization


@dataclass(frozen=True)
class TurnoverSpecs:
    """Scalar limit objects for the two-state chain on [0, 1].

    gaussian_variance is the standard-regime limit variance of
    y_n(1) = sqrt(n p_n)(x_n(1) - nu_1); variance_pm is its analogue for the
    [-1, 1] normalization x* = 2x - 1, scaled by 4.  beta_mixture is the
    critical-regime limit law when a is given.
    """

    nu1: float
    gaussian_variance: float | None = None
    variance_pm: float | None = None
    beta_mixture: BetaMixtureSpec | None = None


def turnover_specs(
    theta1: float,
    theta2: float,
    *,
    a: float | None = None,
    p: float | None = None,
    upsilon: float | None = None,
) -> TurnoverSpecs:
    """Limit objects for D = 2: Gaussian variance from (p, Upsilon) and/or
    the Beta mixture from a.

    The variance follows the general covariance formula specialized to two
    states, (2/(theta1 + theta2) - p) / (1 + Upsilon) * nu1 (1 - nu1); the
    textbook (2 - p) prefactor corresponds to theta1 + theta2 = 1.
    """
    if theta1 <= 0 or theta2 <= 0:
        raise ValueError("positive rates required")
    total = theta1 + theta2
    nu1 = theta1 / total
    var = None
    var_pm = None
    if p is not None or upsilon is not None:
        if p is None or upsilon is None:
            raise ValueError("p and upsilon must be given together")
        if 1.0 + upsilon <= 0:
            raise ValueError("need 1 + Upsilon > 0")
        var = (2.0 / total - p) / (1.0 + upsilon) * nu1 * (1.0 - nu1)
        var_pm = 4.0 * var
    mix = beta_mixture_d2(theta1, theta2, a) if a is not None else None
    return TurnoverSpecs(
        nu1=nu1, gaussian_variance=var, variance_pm=var_pm, beta_mixture=mix
    )
