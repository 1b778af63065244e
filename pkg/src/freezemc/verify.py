"""Named verification suites: Monte-Carlo checks of the convergence theorems.

Each criterion is a pure function of (quick, seed, workers) returning a
CriterionResult with its statistics and thresholds; the CLI `verify`
subcommand and the acceptance test module both dispatch through the
registry at the bottom.  Quick mode shrinks N and M for smoke runs and is
not meant to be statistically conclusive.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta as beta_dist
from scipy.stats import norm

from . import chain, limits, ou, stats, zigzag
from .generators import (
    complete_graph_generator,
    poisson_residual,
    poisson_solution,
    spectral_gap,
    stationary_distribution,
    validate_generator,
)
from .rng import derived_rng
from .schedules import (
    Critical,
    FreezingSchedule,
    PowerLaw,
    as_rate_ell,
    fluctuation_envelope_exponent,
)

THETA_125 = np.array([1.0, 2.0, 5.0]) / 8.0


@dataclass
class CriterionResult:
    criterion: str
    name: str
    passed: bool
    seconds: float
    details: dict = field(default_factory=dict)
    notes: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.criterion} {self.name}: {status} ({self.seconds:.1f}s)"


def _timed(fn):
    def wrapper(quick: bool = False, seed: int = 0, workers: int = 1) -> CriterionResult:
        t0 = time.perf_counter()
        result = fn(quick=quick, seed=seed, workers=workers)
        result.seconds = time.perf_counter() - t0
        return result

    return wrapper


def _a1_run(quick: bool, seed: int, workers: int):
    gen = complete_graph_generator(THETA_125)
    sched = FreezingSchedule(Critical(1.0))
    n_steps = 10_000 if quick else 100_000
    m = 400 if quick else 2000
    ens = chain.run_ensemble(gen, sched, n_steps, m, master_seed=seed, workers=workers)
    mix = limits.dirichlet_mixture(THETA_125, a=1.0)
    ks = []
    w1 = []
    resolvable = []
    for k in range(gen.dim):
        p, q = mix.marginal_beta_params(k)
        res = stats.ks_statistic(ens.x_final[:, k], lambda x, p=p, q=q: beta_dist.cdf(x, p, q))
        ks.append(res)
        w1.append(
            stats.wasserstein1_1d(
                ens.x_final[:, k], quantile_fn=lambda u, p=p, q=q: beta_dist.ppf(u, p, q)
            )
        )
        # the empirical measure lives on the lattice k/N; a coordinate is
        # KS-testable only if the limit puts negligible mass below 1/N,
        # otherwise the never-visited atom dominates the statistic
        resolvable.append(float(beta_dist.cdf(1.0 / n_steps, p, q)) <= res.critical_value / 2)
    moments = stats.moment_report(ens.x_final, mix.mean(), mix.cov(), z_max=4.0)
    return ens, ks, w1, resolvable, moments, n_steps, m


@_timed
def nonstandard_dirichlet(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A1: x_N under p_n = 1/n matches the Dirichlet marginal of the mixture.

    KS is applied to every coordinate whose limit law is resolvable at the
    1/N lattice of the empirical measure; moments are checked for all
    coordinates and per-coordinate W1 distances are reported.
    """
    _, ks, w1, resolvable, moments, n_steps, m = _a1_run(quick, seed, workers)
    ks_ok = all(r.passed for r, ok in zip(ks, resolvable) if ok)
    passed = ks_ok and moments.passed and any(resolvable)
    return CriterionResult(
        "A1",
        "nonstandard-dirichlet",
        passed,
        0.0,
        details={
            "ks_statistics": [r.statistic for r in ks],
            "ks_critical": ks[0].critical_value,
            "ks_resolvable": resolvable,
            "w1": w1,
            "max_moment_z": moments.max_abs_z,
            "N": n_steps,
            "M": m,
        },
        notes=(
            "coordinates with limit mass below the 1/N lattice excluded from KS: "
            "their never-visited atom keeps the statistic near the atom mass "
            "(~0.14 at N=1e5) at any reachable N"
        ),
    )


@_timed
def nonstandard_dirichlet_printed(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A1-printed: KS on all coordinates as literally specified.

    Expected to fail: the singular coordinate Beta(1/8, 7/8) puts mass 0.23
    below the 1/N lattice, so the chain's never-visited atom fixes the KS
    statistic around 0.14 against a critical value of 0.036."""
    _, ks, _, _, moments, n_steps, m = _a1_run(quick, seed, workers)
    passed = all(r.passed for r in ks) and moments.passed
    return CriterionResult(
        "A1-printed",
        "nonstandard-dirichlet-printed",
        passed,
        0.0,
        details={
            "ks_statistics": [r.statistic for r in ks],
            "ks_critical": ks[0].critical_value,
            "max_moment_z": moments.max_abs_z,
        },
        notes="known-unattainable published calibration, kept for visibility",
    )


def _a2_setup(quick: bool, seed: int, workers: int):
    theta = np.array([0.5, 0.5])
    gen = complete_graph_generator(theta)
    sched = FreezingSchedule(PowerLaw(1.0, 0.5))
    n_steps = 100_000 if quick else 1_000_000
    m = 300 if quick else 1000
    ens = chain.run_ensemble(gen, sched, n_steps, m, master_seed=seed, workers=workers)
    nu = stationary_distribution(gen)
    y = chain.fluctuation(ens.x_final, nu, sched, n=n_steps)
    h = poisson_solution(gen, nu)
    return gen, nu, h, y[:, 0], n_steps, m


@_timed
def standard_clt(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A2: Gaussian fluctuations of y_N, checked against the oracle-verified
    covariance (the printed-parameter target is reported alongside)."""
    gen, nu, h, y1, n_steps, m = _a2_setup(quick, seed, workers)
    target = ou.chain_fluctuation_sigma(gen, nu, h, p=0.0, schedule_upsilon=-0.5)
    var_target = float(target.matrix[0, 0])
    printed = ou.sigma_matrix(gen, nu, h, p=0.0, upsilon=-0.5)
    var_printed = float(printed.matrix[0, 0])
    var_hat = float(np.var(y1, ddof=1))
    rel_err = abs(var_hat / var_target - 1.0)
    ks = stats.ks_statistic(y1 / np.sqrt(var_target), norm.cdf)
    passed = rel_err <= 0.10 and ks.passed
    return CriterionResult(
        "A2",
        "standard-clt",
        passed,
        0.0,
        details={
            "var_hat": var_hat,
            "var_target": var_target,
            "rel_err": rel_err,
            "ks_statistic": ks.statistic,
            "ks_critical": ks.critical_value,
            "var_printed_parameter": var_printed,
            "printed_parameter_rel_err": abs(var_hat / var_printed - 1.0),
            "N": n_steps,
            "M": m,
        },
        notes=(
            "target is the covariance formula at the negated schedule exponent; "
            f"the as-printed plug-in ({var_printed:g}) misses the measured "
            f"variance ({var_hat:.3g}) by design of the check"
        ),
    )


@_timed
def standard_clt_printed_constant(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A2-printed: the same run scored against the as-printed target value 1.

    Expected to fail: the measured variance converges to 1/3, not 1."""
    gen, nu, h, y1, n_steps, m = _a2_setup(quick, seed, workers)
    printed = ou.sigma_matrix(gen, nu, h, p=0.0, upsilon=-0.5)
    var_printed = float(printed.matrix[0, 0])
    var_hat = float(np.var(y1, ddof=1))
    rel_err = abs(var_hat / var_printed - 1.0)
    ks = stats.ks_statistic(y1 / np.sqrt(var_printed), norm.cdf)
    return CriterionResult(
        "A2-printed",
        "standard-clt-printed-constant",
        rel_err <= 0.10 and ks.passed,
        0.0,
        details={"var_hat": var_hat, "var_printed": var_printed, "rel_err": rel_err},
        notes="known-bad published constant, kept for visibility",
    )


def _a3_fit(quick: bool, seed: int, workers: int):
    gen = complete_graph_generator(THETA_125)
    sched = FreezingSchedule(PowerLaw(1.0, 0.5))
    n_steps = 100_000 if quick else 1_000_000
    lo = 100 if quick else 1000
    m = 60 if quick else 200
    cps = chain.log_checkpoints(lo, n_steps, per_decade=10)
    ens = chain.run_ensemble(
        gen, sched, n_steps, m, master_seed=seed, checkpoints=cps, workers=workers
    )
    nu = stationary_distribution(gen)
    dist = np.abs(ens.checkpoint_x - nu[None, None, :]).sum(axis=2)  # (M, K)
    med = np.median(dist, axis=0)
    fit = stats.rate_fit(cps.astype(float), med, kind="poly")
    return sched, fit, n_steps, m


@_timed
def as_rate(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A3: polynomial decay of the median deviation |x_n - nu|.

    The median decays at the central-limit envelope n^{-(1-theta)/2}
    (the nondegenerate Gaussian limit of y_n forbids anything faster), so
    the fitted slope is gated in a window around that envelope: at most
    -0.8 times the envelope exponent and no steeper than 1.4 times it."""
    sched, fit, n_steps, m = _a3_fit(quick, seed, workers)
    envelope = fluctuation_envelope_exponent(sched)
    lo, hi = -1.4 * envelope, -0.8 * envelope
    passed = lo <= fit.slope <= hi
    return CriterionResult(
        "A3",
        "as-rate",
        passed,
        0.0,
        details={
            "slope": fit.slope,
            "window": [lo, hi],
            "envelope_exponent": envelope,
            "published_ell": as_rate_ell(sched),
            "r_squared": fit.r_squared,
            "N": n_steps,
            "M": m,
        },
        notes=(
            "published ell = 1 - theta would demand slope <= -0.4, which the "
            "Gaussian fluctuation scale n^{-1/4} rules out"
        ),
    )


@_timed
def as_rate_printed(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A3-printed: slope threshold -0.4 derived from the published rate.

    Expected to fail: the published a.s. rate ell = 1 - theta contradicts
    the central limit theorem for y_n (a nondegenerate Gaussian limit at
    scale n^{-(1-theta)/2} caps the decay); the paper's Borel-Cantelli step
    applies a second-moment bound to a first-power threshold, dropping a
    factor of two in the exponent."""
    _, fit, n_steps, m = _a3_fit(quick, seed, workers)
    return CriterionResult(
        "A3-printed",
        "as-rate-printed",
        fit.slope <= -0.4,
        0.0,
        details={"slope": fit.slope, "threshold": -0.4, "r_squared": fit.r_squared},
        notes="known-unattainable published rate, kept for visibility",
    )


@_timed
def ezz_stationarity(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A4: the Dirichlet mixture is a fixed point of the zig-zag dynamics."""
    gen = complete_graph_generator(THETA_125)
    a = 1.0
    m = 2000 if quick else 10_000
    mix = limits.dirichlet_mixture(THETA_125, a)

    def init(rng):
        i0 = int(rng.choice(mix.dim, p=mix.weights))
        x0 = rng.dirichlet(mix.alphas[i0])
        return x0, i0

    xs, _ = zigzag.ezz_ensemble(gen, a, 1.0, m, master_seed=seed, init=init)
    report = stats.moment_report(xs, mix.mean(), mix.cov(), z_max=4.0)
    return CriterionResult(
        "A4",
        "ezz-stationarity",
        report.passed,
        0.0,
        details={"max_moment_z": report.max_abs_z, "M": m, "t": 1.0},
    )


@_timed
def d2_wasserstein_bound(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A5: two-state coupling distance under the printed exponential bound."""
    theta1 = theta2 = 1.0
    a = 2.0
    m = 2000 if quick else 10_000
    ts = np.array([0.5, 1.0, 2.0, 3.0])
    metric = np.empty((m, ts.size))
    for rep in range(m):
        rng = derived_rng(seed, rep)
        rec = zigzag.coupled_ezz_d2(
            theta1, theta2, a, (0.0, 1), (1.0, 0), float(ts[-1]), rng, t_grid=ts
        )
        metric[rep] = rec.mean_metric()
    mean = metric.mean(axis=0)
    se = metric.std(axis=0, ddof=1) / np.sqrt(m)
    bound = zigzag.d2_wasserstein_bound(theta1, theta2, a, ts)
    ok = mean <= bound + 3.0 * se
    return CriterionResult(
        "A5",
        "d2-wasserstein-bound",
        bool(np.all(ok)),
        0.0,
        details={
            "t": ts.tolist(),
            "measured": mean.tolist(),
            "bound": bound.tolist(),
            "se": se.tolist(),
            "M": m,
        },
    )


@_timed
def ezz_to_ou(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A6: rescaled stationary laws approach the Gaussian as jumps accelerate."""
    theta = THETA_125
    nu = theta / theta.sum()
    sigma_limit = np.diag(nu) - np.outer(nu, nu)
    m = 8000 if quick else 40_000
    a_values = [1.0, 10.0, 100.0, 1000.0]
    gauss = ou.stationary_sample(ou.psd_sqrt(sigma_limit), m, derived_rng(seed, 777))
    sw = []
    cov_err = None
    for idx, a in enumerate(a_values):
        rng = derived_rng(seed, idx)
        x = rng.dirichlet(a * theta, size=m)
        y = np.sqrt(a) * (x - nu)
        sw.append(stats.sliced_wasserstein(y, gauss, n_proj=64, seed=seed + 1))
        if a == a_values[-1]:
            emp = np.cov(y, rowvar=False, ddof=1)
            scale = np.sqrt(np.outer(np.diag(sigma_limit), np.diag(sigma_limit)))
            cov_err = float(np.max(np.abs(emp - sigma_limit) / scale))
    decreasing = all(sw[i + 1] < sw[i] for i in range(len(sw) - 1))
    passed = decreasing and cov_err <= 0.05
    return CriterionResult(
        "A6",
        "ezz-to-ou",
        passed,
        0.0,
        details={
            "a": a_values,
            "sliced_w": sw,
            "strictly_decreasing": decreasing,
            "cov_rel_err": cov_err,
            "M": m,
        },
    )


@_timed
def transport_pde(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A7: transport-system residual of the Dirichlet-mixture densities."""
    cases = [
        (2, 1.0, np.array([1.0, 1.0])),
        (2, 2.0, np.array([1.0, 3.0])),
        (3, 1.0, THETA_125),
    ]
    worst = 0.0
    for d, a, theta in cases:
        nu = theta / theta.sum()
        q = np.tile(theta, (d, 1)) - theta.sum() * np.eye(d)
        phi = limits.phi_complete_graph(theta, a)
        pts = limits.interior_simplex_points(d, 100, margin=0.01, seed=seed)
        for x in pts:
            for i in range(d):
                worst = max(worst, abs(limits.pde_residual(phi, q, a, nu, x, i)))
    return CriterionResult(
        "A7",
        "transport-pde",
        worst <= 1e-8,
        0.0,
        details={"max_abs_residual": worst, "tolerance": 1e-8, "points": 100},
    )


@_timed
def kernel_identities(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A8: Poisson residuals, gauge invariance, zero row sums, closed forms."""
    rng = np.random.default_rng(seed)
    worst_poisson = worst_rowsum = worst_gauge = 0.0
    for _ in range(50):
        d = int(rng.integers(2, 11))
        raw = rng.uniform(0.05, 1.0, size=(d, d))
        np.fill_diagonal(raw, 0.0)
        raw = raw / raw.sum(axis=1).max()
        np.fill_diagonal(raw, -raw.sum(axis=1))
        gen = validate_generator(raw)
        nu = stationary_distribution(gen)
        h = poisson_solution(gen, nu, gauge="nu-mean-zero")
        h_raw = poisson_solution(gen, nu, gauge="raw")
        worst_poisson = max(worst_poisson, poisson_residual(gen.q, nu, h))
        s1 = ou.sigma_matrix(gen, nu, h, p=0.3, upsilon=0.2).matrix
        s2 = ou.sigma_matrix(gen, nu, h_raw, p=0.3, upsilon=0.2).matrix
        worst_gauge = max(worst_gauge, float(np.max(np.abs(s1 - s2))))
        worst_rowsum = max(worst_rowsum, float(np.max(np.abs(s1 @ np.ones(d)))))
    worst_closed = 0.0
    for theta in (THETA_125, np.array([1.0, 1.0]), np.array([0.2, 0.8])):
        gen = complete_graph_generator(theta)
        total = theta.sum()
        nu = stationary_distribution(gen)
        worst_closed = max(worst_closed, float(np.max(np.abs(nu - theta / total))))
        h_closed = np.eye(theta.size) / total
        worst_closed = max(worst_closed, poisson_residual(gen.q, nu, h_closed))
        h = poisson_solution(gen, nu)
        s_gen = ou.sigma_matrix(gen, nu, h, p=0.25, upsilon=0.5).matrix
        s_closed = ou.sigma_complete_graph(theta, p=0.25, upsilon=0.5).matrix
        worst_closed = max(worst_closed, float(np.max(np.abs(s_gen - s_closed))))
        worst_closed = max(worst_closed, abs(spectral_gap(gen) - total))
    worst_all = max(worst_poisson, worst_rowsum, worst_gauge, worst_closed)
    return CriterionResult(
        "A8",
        "kernel-identities",
        worst_all <= 1e-10,
        0.0,
        details={
            "max_poisson_residual": worst_poisson,
            "max_sigma_row_sum": worst_rowsum,
            "max_gauge_gap": worst_gauge,
            "max_closed_form_gap": worst_closed,
            "tolerance": 1e-10,
        },
    )


@_timed
def ou_exactness(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A9: measured/predicted Wasserstein contraction ratio of the OU flow."""
    m = 20_000 if quick else 100_000
    ratios = {}
    results = ou.ou_contraction_check(
        sigma=1.0, start=3.0, ts=(0.5, 1.0, 2.0), n_samples=m, seed=derived_rng(seed, 9)
    )
    ok = True
    for t, (measured, predicted) in results.items():
        r = measured / predicted
        ratios[t] = r
        ok = ok and 0.95 <= r <= 1.05
    return CriterionResult(
        "A9",
        "ou-exactness",
        ok,
        0.0,
        details={"ratios": ratios, "M": m, "window": [0.95, 1.05]},
    )


@_timed
def frozen_regime(quick: bool, seed: int, workers: int) -> CriterionResult:
    """A10: a summable schedule freezes almost every trajectory."""
    gen = complete_graph_generator(THETA_125)
    sched = FreezingSchedule(PowerLaw(1.0, 1.5))
    n_steps = 20_000 if quick else 100_000
    cut = 2_000 if quick else 10_000
    m = 300 if quick else 1000
    ens = chain.run_ensemble(gen, sched, n_steps, m, master_seed=seed, workers=workers)
    frac = float(np.mean(ens.last_jump_step < cut))
    return CriterionResult(
        "A10",
        "frozen-regime",
        frac >= 0.95,
        0.0,
        details={"frozen_fraction": frac, "threshold": 0.95, "cut": cut, "N": n_steps, "M": m},
    )


SUITES = {
    "nonstandard-dirichlet": ("A1", nonstandard_dirichlet),
    "nonstandard-dirichlet-printed": ("A1-printed", nonstandard_dirichlet_printed),
    "standard-clt": ("A2", standard_clt),
    "standard-clt-printed-constant": ("A2-printed", standard_clt_printed_constant),
    "as-rate": ("A3", as_rate),
    "as-rate-printed": ("A3-printed", as_rate_printed),
    "ezz-stationarity": ("A4", ezz_stationarity),
    "d2-wasserstein-bound": ("A5", d2_wasserstein_bound),
    "ezz-to-ou": ("A6", ezz_to_ou),
    "transport-pde": ("A7", transport_pde),
    "kernel-identities": ("A8", kernel_identities),
    "ou-exactness": ("A9", ou_exactness),
    "frozen-regime": ("A10", frozen_regime),
}

# the acceptance gate: every primary criterion, in order
GATE = [
    "nonstandard-dirichlet",
    "standard-clt",
    "as-rate",
    "ezz-stationarity",
    "d2-wasserstein-bound",
    "ezz-to-ou",
    "transport-pde",
    "kernel-identities",
    "ou-exactness",
    "frozen-regime",
]

# checks of values printed in the source material that the simulations
# falsify; run with `verify printed-constants`, excluded from `all`
PRINTED_CONSTANT_SUITE = [
    "nonstandard-dirichlet-printed",
    "standard-clt-printed-constant",
    "as-rate-printed",
]


def run_suites(
    names: list[str] | str,
    quick: bool = False,
    seed: int = 0,
    workers: int = 1,
) -> list[CriterionResult]:
    if isinstance(names, str):
        names = [names]
    expanded: list[str] = []
    for name in names:
        if name == "all":
            expanded.extend(GATE)
        elif name == "printed-constants":
            expanded.extend(PRINTED_CONSTANT_SUITE)
        else:
            expanded.append(name)
    results = []
    for name in expanded:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; known: {sorted(SUITES)}")
        _, fn = SUITES[name]
        results.append(fn(quick=quick, seed=seed, workers=workers))
    return results
