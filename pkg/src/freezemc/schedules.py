"""Freezing schedules p_n, remainders r_n(i,j), regimes and rate functionals.

The chain's transition probabilities at step n scale with a non-increasing
sequence p_n in (0, 1] whose divergent sum guarantees the chain keeps moving.
The decay speed decides the limit behavior:

- p_n ~ a/n           non-standard regime, (x_n, i_n) converges to the
                      stationary law of the exponential zig-zag process;
- p_n >> 1/n          standard regime, x_n -> nu with Gaussian fluctuations
                      y_n = sqrt(n p_n) (x_n - nu);
- sum p_n < infinity  frozen regime, the chain eventually stops moving.

Rates are expressed through the functional

    lambda(gamma, eps) = -limsup_n  log(gamma_n v eps_n) / sum_{k<=n} gamma_k

with gamma_n = 1/n throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Union

import numpy as np

from .errors import (
    RemainderBoundError,
    ScheduleError,
    UnstableEstimateError,
    UnsupportedRegimeError,
)


# ---------------------------------------------------------------------------
# schedule kinds


@dataclass(frozen=True)
class PowerLaw:
    """p_n = a n^{-theta}."""

    a: float
    theta: float

    def __post_init__(self):
        if self.a <= 0 or self.theta <= 0:
            raise ScheduleError("PowerLaw needs a > 0 and theta > 0")


@dataclass(frozen=True)
class Critical:
    """p_n = a / n."""

    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise ScheduleError("Critical needs a > 0")


@dataclass(frozen=True)
class LogPower:
    """p_n = log(n)^zeta / n for n >= 2."""

    zeta: float

    def __post_init__(self):
        if self.zeta < 1:
            raise ScheduleError("LogPower needs zeta >= 1")


@dataclass(frozen=True)
class ConstantPlus:
    """p_n = p + c n^{-decay}, decreasing to the constant p in (0, 1]."""

    p: float
    c: float = 0.0
    decay: float = 1.0

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ScheduleError("ConstantPlus needs p in (0, 1]")
        if self.c < 0 or self.decay <= 0:
            raise ScheduleError("ConstantPlus needs c >= 0 and decay > 0")
        if self.p >= 1.0 and self.c > 0:
            raise ScheduleError("p = 1 with a positive decay term exceeds 1")


@dataclass(frozen=True)
class Tabulated:
    """Explicit table of values p_1, p_2, ...; undefined beyond the table."""

    values: tuple[float, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size < 2:
            raise ScheduleError("Tabulated needs at least two values")
        if np.any(v <= 0) or np.any(v > 1):
            raise ScheduleError("Tabulated values must lie in (0, 1]")
        if np.any(np.diff(v) > 1e-12):
            raise ScheduleError("Tabulated values must be non-increasing")


ScheduleKind = Union[PowerLaw, Critical, LogPower, ConstantPlus, Tabulated]


# ---------------------------------------------------------------------------
# remainders


@dataclass(frozen=True)
class RemainderSpec:
    """Perturbation r_n(i,j) of the base rates, with declared bound A n^{-theta_r}.

    Models:
      "zero"    r identically 0;
      "power"   r_n(i,j) = coeff[i,j] n^{-theta_r} (scalar coeff fills all
                off-diagonal pairs);
      "custom"  fn(n, dim) -> (dim, dim) matrix, vectorized caller side.

    Every evaluation is checked against the bound |r_n(i,j)| <= A n^{-theta_r};
    a violation aborts the run since the rate theorems assume the bound.
    """

    A: float = 1.0
    theta_r: float = 1.0
    model: str = "zero"
    coeff: object = None
    fn: Callable[[int, int], np.ndarray] | None = None

    def __post_init__(self):
        if self.A < 1:
            raise ScheduleError("remainder bound needs A >= 1")
        if not 0 < self.theta_r <= 1:
            raise ScheduleError("remainder bound needs theta_r in (0, 1]")
        if self.model not in ("zero", "power", "custom"):
            raise ScheduleError(f"unknown remainder model {self.model!r}")
        if self.model == "custom" and self.fn is None:
            raise ScheduleError("custom remainder needs fn")

    @property
    def is_zero(self) -> bool:
        return self.model == "zero"

    def matrix(self, n: int, dim: int) -> np.ndarray:
        """r_n as a (dim, dim) matrix with zero diagonal, bound-checked."""
        if self.model == "zero":
            return np.zeros((dim, dim))
        if self.model == "power":
            c = np.asarray(self.coeff if self.coeff is not None else 0.0, dtype=float)
            if c.ndim == 0:
                m = np.full((dim, dim), float(c))
            else:
                m = np.array(c, dtype=float)
                if m.shape != (dim, dim):
                    raise ScheduleError(f"coeff shape {m.shape} != ({dim}, {dim})")
            m = m * float(n) ** (-self.theta_r)
        else:
            m = np.asarray(self.fn(n, dim), dtype=float)
        np.fill_diagonal(m, 0.0)
        cap = self.A * float(n) ** (-self.theta_r)
        if np.max(np.abs(m)) > cap + 1e-12:
            raise RemainderBoundError(
                f"|r_{n}| = {np.max(np.abs(m)):.3e} exceeds A n^-theta_r = {cap:.3e}"
            )
        return m

    def row_abs_sum_bound(self, dim: int) -> float:
        """Coefficient of the n^{-theta_r} bound on R_n = sup_i sum_j |r_n(i,j)|."""
        return (dim - 1) * self.A


ZERO_REMAINDER = RemainderSpec()


# ---------------------------------------------------------------------------
# the schedule object


@dataclass(frozen=True)
class FreezingSchedule:
    kind: ScheduleKind
    remainder: RemainderSpec = field(default_factory=lambda: ZERO_REMAINDER)

    @property
    def n_min(self) -> int:
        """First index at which the schedule is emitted (p_n <= 1 from there on)."""
        k = self.kind
        if isinstance(k, PowerLaw):
            return max(1, math.ceil(k.a ** (1.0 / k.theta) - 1e-12))
        if isinstance(k, Critical):
            return max(1, math.ceil(k.a - 1e-12))
        if isinstance(k, LogPower):
            return 2
        if isinstance(k, ConstantPlus):
            if k.c == 0 or k.p + k.c <= 1.0:
                return 1
            return max(1, math.ceil((k.c / (1.0 - k.p)) ** (1.0 / k.decay) - 1e-12))
        return 1

    @property
    def limit_p(self) -> float:
        k = self.kind
        if isinstance(k, ConstantPlus):
            return k.p
        if isinstance(k, Tabulated):
            return float(k.values[-1])
        return 0.0

    @property
    def diverges(self) -> bool:
        """Whether sum p_n = +infinity (frozen otherwise)."""
        k = self.kind
        if isinstance(k, PowerLaw):
            return k.theta <= 1.0
        if isinstance(k, (Critical, LogPower, ConstantPlus)):
            return True
        return False  # finite table: undecidable, treated as data


def p_at(s: FreezingSchedule, n) -> np.ndarray | float:
    """Schedule value p_n; accepts a scalar or an integer array n >= n_min."""
    arr = np.asarray(n)
    if np.any(arr < s.n_min):
        raise ScheduleError(f"n < n_min = {s.n_min} for {s.kind}")
    nf = arr.astype(float)
    k = s.kind
    if isinstance(k, PowerLaw):
        out = k.a * nf ** (-k.theta)
    elif isinstance(k, Critical):
        out = k.a / nf
    elif isinstance(k, LogPower):
        out = np.log(nf) ** k.zeta / nf
    elif isinstance(k, ConstantPlus):
        out = k.p + k.c * nf ** (-k.decay)
    else:
        idx = arr - 1
        if np.any(idx >= len(k.values)):
            raise ScheduleError(f"n beyond the table of length {len(k.values)}")
        out = np.asarray(k.values, dtype=float)[idx]
    return out if arr.ndim else float(out)


def gamma_alpha(n: int, s: FreezingSchedule) -> tuple[float, float]:
    """The two scaling rates (gamma_n, alpha_n) = (1/n, sqrt(n p_n))."""
    gamma = 1.0 / n
    alpha = math.sqrt(n * p_at(s, n))
    return gamma, alpha


# ---------------------------------------------------------------------------
# regimes


class Regime(Enum):
    NON_STANDARD = "non-standard"
    STANDARD = "standard"
    FROZEN = "frozen"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    upsilon: float | None = None
    a: float | None = None
    notes: str = ""


def upsilon(s: FreezingSchedule, mode: str = "analytic") -> float:
    """Second-order exponent in p_{n+1}/p_n = 1 + Upsilon/n + o(1/n).

    Analytic per kind: PowerLaw theta -> -theta (so Critical -> -1),
    LogPower -> -1, ConstantPlus -> 0.  Tabulated schedules are fit
    numerically over the tail of n (p_{n+1}/p_n - 1); numeric mode applies
    the same fit to any kind.
    """
    if mode == "analytic":
        k = s.kind
        if isinstance(k, PowerLaw):
            return -k.theta
        if isinstance(k, Critical):
            return -1.0
        if isinstance(k, LogPower):
            return -1.0
        if isinstance(k, ConstantPlus):
            return 0.0
        return _upsilon_numeric_tabulated(k)
    if mode == "numeric":
        return _upsilon_numeric(s)
    raise ValueError(f"unknown mode {mode!r}")


def _upsilon_numeric(s: FreezingSchedule, n_lo: int = 100_000, n_points: int = 64) -> float:
    ns = np.unique(np.geomspace(max(n_lo, s.n_min), 10 * n_lo, n_points).astype(np.int64))
    p0 = p_at(s, ns)
    p1 = p_at(s, ns + 1)
    est = ns * (p1 / p0 - 1.0)
    if np.max(est) - np.min(est) > 0.05 * max(1.0, abs(float(np.median(est)))):
        raise UnstableEstimateError("Upsilon fit did not stabilize over the tail")
    return float(np.median(est))


def _upsilon_numeric_tabulated(k: Tabulated) -> float:
    v = np.asarray(k.values, dtype=float)
    m = v.size
    ns = np.arange(max(1, m // 2), m)  # tail half, indices with a successor
    est = ns * (v[ns] / v[ns - 1] - 1.0)
    if est.size < 3:
        raise UnsupportedRegimeError("table too short for an Upsilon fit")
    spread = float(np.max(est) - np.min(est))
    if spread > 0.2 * max(1.0, abs(float(np.median(est)))):
        raise UnsupportedRegimeError("no stable Upsilon for this table")
    return float(np.median(est))


def classify(s: FreezingSchedule) -> RegimeReport:
    """Total classification of a schedule into its fluctuation regime."""
    k = s.kind
    if isinstance(k, PowerLaw):
        if k.theta < 1.0:
            return RegimeReport(Regime.STANDARD, upsilon=-k.theta)
        if k.theta == 1.0:
            return RegimeReport(Regime.NON_STANDARD, upsilon=-1.0, a=k.a)
        return RegimeReport(Regime.FROZEN, notes="sum p_n < infinity")
    if isinstance(k, Critical):
        return RegimeReport(Regime.NON_STANDARD, upsilon=-1.0, a=k.a)
    if isinstance(k, LogPower):
        return RegimeReport(
            Regime.STANDARD,
            upsilon=-1.0,
            notes="1 + Upsilon = 0: Gaussian fluctuation covariance undefined",
        )
    if isinstance(k, ConstantPlus):
        return RegimeReport(Regime.STANDARD, upsilon=0.0)
    return _classify_tabulated(k)


def _classify_tabulated(k: Tabulated) -> RegimeReport:
    """Heuristic classification from the tail of the table.

    Looks at n p_n over the tail: converging to a positive constant is the
    critical scaling, growing means slower-than-1/n decay (standard), and
    shrinking means faster-than-1/n decay, which is either frozen (tail
    log-log slope below -1) or an in-between scaling like 1/(n log n) that
    none of the limit theorems covers.
    """
    v = np.asarray(k.values, dtype=float)
    m = v.size
    if m < 8:
        return RegimeReport(Regime.UNSUPPORTED, notes="table too short to classify")
    ns = np.arange(1, m + 1, dtype=float)
    tail = slice(m // 2, m)
    npn = ns[tail] * v[tail]
    rel_var = float((np.max(npn) - np.min(npn)) / np.max(npn))
    if rel_var < 0.05:
        a = float(np.median(npn))
        return RegimeReport(Regime.NON_STANDARD, upsilon=-1.0, a=a)
    if npn[-1] > npn[0]:
        try:
            ups = _upsilon_numeric_tabulated(k)
        except UnsupportedRegimeError:
            return RegimeReport(Regime.UNSUPPORTED, notes="unstable tail ratios")
        return RegimeReport(Regime.STANDARD, upsilon=ups)
    # n p_n shrinks: frozen if it vanishes at a genuine power of n, but a
    # slowly varying decay (the 1/(n log n) family) is outside every theorem
    slope = np.polyfit(np.log(ns[tail]), np.log(npn), 1)[0]
    if slope < -0.25:
        return RegimeReport(Regime.FROZEN, notes=f"n p_n tail slope {slope:.3f}")
    return RegimeReport(
        Regime.UNSUPPORTED,
        notes="decays faster than 1/n but slower than any power beyond it; not covered",
    )


# ---------------------------------------------------------------------------
# rate functionals


def _as_sequence(desc) -> Callable[[np.ndarray], np.ndarray]:
    """Coerce a sequence descriptor to a vectorized evaluator over n.

    Accepts a callable n -> values, a tuple ("power", c, beta) for c n^{-beta},
    or None / 0 for the identically-zero sequence.
    """
    if desc is None or (np.isscalar(desc) and desc == 0):
        return lambda n: np.zeros_like(np.asarray(n, dtype=float))
    if callable(desc):
        return lambda n: np.asarray(desc(np.asarray(n)), dtype=float)
    if isinstance(desc, tuple) and len(desc) == 3 and desc[0] == "power":
        _, c, beta = desc
        return lambda n: float(c) * np.asarray(n, dtype=float) ** (-float(beta))
    raise ValueError(f"cannot interpret sequence descriptor {desc!r}")


def _is_zero_desc(desc) -> bool:
    if desc is None or (np.isscalar(desc) and desc == 0):
        return True
    if isinstance(desc, tuple) and len(desc) == 3 and desc[0] == "power":
        return float(desc[1]) == 0.0
    return False


def lambda_rate(
    gamma=("power", 1.0, 1.0),
    eps=None,
    *,
    mode: str = "auto",
    n_max: int = 10_000_000,
) -> float:
    """Rate functional lambda(gamma, eps); +infinity for the zero sequence eps.

    The analytic shortcut applies to gamma_n = 1/n and a power-law eps,
    where lambda(1/n, c n^{-beta}) = min(beta, 1).  The numeric mode
    evaluates the ratio at dyadic checkpoints up to n_max and reports the
    max over the last half of checkpoints as the limsup estimate; an
    estimate whose last-half spread stays large raises UnstableEstimateError.
    """
    if _is_zero_desc(eps):
        return math.inf
    gamma_is_harmonic = (
        isinstance(gamma, tuple)
        and len(gamma) == 3
        and gamma[0] == "power"
        and float(gamma[1]) == 1.0
        and float(gamma[2]) == 1.0
    )
    eps_is_power = isinstance(eps, tuple) and len(eps) == 3 and eps[0] == "power"
    if mode in ("auto", "analytic") and gamma_is_harmonic and eps_is_power:
        return min(float(eps[2]), 1.0)
    if mode == "analytic":
        raise ValueError("analytic mode needs gamma = 1/n and a power-law eps")
    return _lambda_numeric(_as_sequence(gamma), _as_sequence(eps), n_max)


def _lambda_numeric(gamma_fn, eps_fn, n_max: int) -> float:
    marks = 2 ** np.arange(4, int(math.log2(n_max)) + 1, dtype=np.int64)
    marks = marks[marks <= n_max]
    # accumulate sum of gamma up to each dyadic mark in vectorized blocks
    sums = np.empty(marks.size)
    total = 0.0
    lo = 1
    for idx, hi in enumerate(marks):
        block = np.arange(lo, hi + 1, dtype=np.int64)
        total += float(np.sum(gamma_fn(block)))
        sums[idx] = total
        lo = int(hi) + 1
    top = np.maximum(gamma_fn(marks), eps_fn(marks))
    if np.any(top <= 0):
        raise ValueError("gamma v eps must be positive at the checkpoints")
    ratios = -np.log(top) / sums
    half = ratios[ratios.size // 2 :]
    spread = float(np.max(half) - np.min(half))
    if spread > 0.25 * max(1.0, float(np.max(np.abs(half)))):
        raise UnstableEstimateError(
            f"limsup estimate did not stabilize (spread {spread:.3f} at n_max={n_max})"
        )
    # the raw ratios carry an O(1/sum gamma) deficit (Euler-Mascheroni term
    # for gamma = 1/n); extrapolate linearly in 1/sum over the last half
    coeffs = np.polyfit(1.0 / sums[ratios.size // 2 :], half, 1)
    return float(coeffs[1])


def as_rate_ell(s: FreezingSchedule, dim: int | None = None) -> float:
    """Almost-sure polynomial rate ell = lambda(gamma, gamma/p) ^ lambda(gamma, R).

    Per-kind analytic values for the first term: PowerLaw theta gives
    1 - theta.  For LogPower the published value is 1 for zeta > 1 and no
    positive rate for zeta = 1; the printed rate functional evaluates to 0
    on gamma/p there, so the published value is special-cased.  With a zero
    remainder the second term is +infinity by convention; a power-bounded
    remainder contributes min(theta_r, 1).
    """
    rep = classify(s)
    if rep.regime is not Regime.STANDARD:
        raise UnsupportedRegimeError(f"a.s. rate needs the standard regime, got {rep.regime}")
    k = s.kind
    if isinstance(k, PowerLaw):
        lam1 = 1.0 - k.theta
    elif isinstance(k, LogPower):
        lam1 = 1.0 if k.zeta > 1.0 else 0.0
    elif isinstance(k, ConstantPlus):
        lam1 = 1.0
    else:
        gamma = ("power", 1.0, 1.0)
        eps = lambda n: (1.0 / np.asarray(n, dtype=float)) / p_at(s, np.asarray(n))
        lam1 = _lambda_numeric(_as_sequence(gamma), _as_sequence(eps), len(k.values))
    if s.remainder.is_zero:
        lam2 = math.inf
    else:
        lam2 = min(s.remainder.theta_r, 1.0)
    return min(lam1, lam2)


def fluctuation_envelope_exponent(s: FreezingSchedule) -> float:
    """Exponent e of the typical deviation scale |x_n - nu| ~ n^{-e}.

    The central-limit scale is 1/alpha_n = sqrt(gamma_n/p_n), so the
    envelope exponent is lambda(gamma, gamma/p)/2, capped by the remainder
    bias lambda(gamma, R).  This is what desk-scale medians actually decay
    at; the published a.s. rate ell (as_rate_ell) quotes the uncapped
    lambda(gamma, gamma/p), which overstates the rate by a factor of two
    and is contradicted by the nondegenerate Gaussian limit of y_n.
    """
    rep = classify(s)
    if rep.regime is not Regime.STANDARD:
        raise UnsupportedRegimeError(
            f"envelope exponent needs the standard regime, got {rep.regime}"
        )
    k = s.kind
    if isinstance(k, PowerLaw):
        lam1 = 1.0 - k.theta
    elif isinstance(k, LogPower):
        lam1 = 0.0
    elif isinstance(k, ConstantPlus):
        lam1 = 1.0
    else:
        gamma = ("power", 1.0, 1.0)
        eps = lambda n: (1.0 / np.asarray(n, dtype=float)) / p_at(s, np.asarray(n))
        lam1 = _lambda_numeric(_as_sequence(gamma), _as_sequence(eps), len(k.values))
    lam2 = math.inf if s.remainder.is_zero else min(s.remainder.theta_r, 1.0)
    return min(lam1 / 2.0, lam2)


def nonstandard_rate_bound(A: float, theta_r: float, a: float, rho: float) -> float:
    """Supremum of valid polynomial exponents in the non-standard regime.

    u_max = theta_r / (A + theta_r (1 + 1/(a rho))), rho the spectral gap
    of the generator q.
    """
    if A < 1:
        raise ValueError("A >= 1 required")
    if not 0 < theta_r <= 1:
        raise ValueError("theta_r in (0, 1] required")
    if a <= 0 or rho <= 0:
        raise ValueError("a > 0 and rho > 0 required")
    return theta_r / (A + theta_r * (1.0 + 1.0 / (a * rho)))


# ---------------------------------------------------------------------------
# config parsing


def schedule_from_dict(spec: dict) -> FreezingSchedule:
    """Build a schedule from a config dict.

    Example: {"kind": "power_law", "a": 1.0, "theta": 0.5,
              "remainder": {"A": 1.0, "theta_r": 1.0, "model": "zero"}}
    """
    kind_name = spec.get("kind")
    if kind_name == "power_law":
        kind = PowerLaw(a=float(spec["a"]), theta=float(spec["theta"]))
    elif kind_name == "critical":
        kind = Critical(a=float(spec["a"]))
    elif kind_name == "log_power":
        kind = LogPower(zeta=float(spec["zeta"]))
    elif kind_name == "constant_plus":
        kind = ConstantPlus(
            p=float(spec["p"]),
            c=float(spec.get("c", 0.0)),
            decay=float(spec.get("decay", 1.0)),
        )
    elif kind_name == "tabulated":
        kind = Tabulated(values=tuple(float(v) for v in spec["values"]))
    else:
        raise ScheduleError(f"unknown schedule kind {kind_name!r}")
    rem = spec.get("remainder")
    if rem is None:
        remainder = ZERO_REMAINDER
    else:
        remainder = RemainderSpec(
            A=float(rem.get("A", 1.0)),
            theta_r=float(rem.get("theta_r", 1.0)),
            model=rem.get("model", "zero"),
            coeff=np.asarray(rem["coeff"], dtype=float) if "coeff" in rem else None,
        )
    return FreezingSchedule(kind=kind, remainder=remainder)
