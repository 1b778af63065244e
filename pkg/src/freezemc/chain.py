"""Exact simulation of the freezing chain and its empirical measure.

The chain (i_n) moves at step n with probability row

    P(i_{n+1} = j | i_n = i) = p_n (q(i,j) + r_n(i,j))     for j != i,

staying put with the complementary mass.  Tracked quantities are the visit
frequencies x_n = counts / n on the simplex and the rescaled fluctuations
y_n = sqrt(n p_n) (x_n - nu).

Two equivalent-in-law engines are provided:

- "jump": run-length sampling.  Between state changes the chain is constant,
  so the next change index is drawn directly by inverting the cumulative
  per-step jump hazard (precomputed once per configuration).  Cost scales
  with the number of jumps (roughly sum_n p_n), not with n_steps, which is
  what makes 10^6-step ensembles affordable.
- "step": literal per-step inverse-CDF sampling, used as a cross-check
  oracle and for dense recordings.

Determinism: each replicate's stream is derived from (master_seed, index),
so ensembles are reproducible bit-for-bit regardless of worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidRowError, ScheduleError
from .generators import GeneratorMatrix
from .rng import derived_rng
from .schedules import FreezingSchedule, p_at

_ROW_TOL = 1e-12


@dataclass(frozen=True)
class ChainState:
    """Chain position and streaming accumulators after n steps."""

    n: int
    i: int
    counts: np.ndarray  # int64 visit counts, sum == n

    @property
    def x(self) -> np.ndarray:
        """Empirical measure counts / n, exactly on the simplex."""
        return self.counts / self.n

    def check(self) -> None:
        assert self.counts.sum() == self.n
        assert self.counts[self.i] >= 1


@dataclass
class ChainResult:
    state: ChainState
    last_jump_step: int  # last k with i_{k+1} != i_k, 0 if the chain never moved
    n_jumps: int
    schedule_offset: int
    checkpoint_n: np.ndarray | None = None
    checkpoint_i: np.ndarray | None = None
    checkpoint_counts: np.ndarray | None = None
    states: np.ndarray | None = None  # full record i_1..i_N when requested

    @property
    def checkpoint_x(self) -> np.ndarray | None:
        if self.checkpoint_counts is None:
            return None
        return self.checkpoint_counts / self.checkpoint_n[:, None]


@dataclass
class ChainEnsemble:
    """Replicated end states, stacked by replicate index."""

    master_seed: int
    schedule_offset: int
    x_final: np.ndarray  # (M, D)
    i_final: np.ndarray  # (M,)
    counts_final: np.ndarray  # (M, D) int64
    last_jump_step: np.ndarray  # (M,)
    n_jumps: np.ndarray  # (M,)
    n_steps: int
    checkpoint_n: np.ndarray | None = None  # (K,)
    checkpoint_i: np.ndarray | None = None  # (M, K)
    checkpoint_x: np.ndarray | None = None  # (M, K, D)

    @property
    def n_replicates(self) -> int:
        return self.x_final.shape[0]


# ---------------------------------------------------------------------------
# transition rows


def transition_row(
    gen: GeneratorMatrix, s: FreezingSchedule, n: int, i: int
) -> np.ndarray:
    """Probability row of the step n -> n+1 transition out of state i."""
    d = gen.dim
    p = p_at(s, n)
    r = s.remainder.matrix(n, d)
    off = p * (gen.off_diagonal(i) + r[i])
    stay = 1.0 - off.sum()
    if np.any(off < -_ROW_TOL) or stay < -_ROW_TOL:
        raise InvalidRowError(
            f"transition row out of state {i} invalid at n={n}",
            n=n,
            suggested_n0=first_valid_index(gen, s),
        )
    row = np.clip(off, 0.0, 1.0)
    row[i] = max(stay, 0.0)
    return row


def first_valid_index(
    gen: GeneratorMatrix, s: FreezingSchedule, n_hi: int = 10_000_000
) -> int | None:
    """Smallest schedule index from which all transition rows are valid.

    Scans in vectorized chunks up to n_hi; returns None when no valid tail
    is found in range.
    """
    d = gen.dim
    lo = s.n_min
    last_bad = lo - 1
    found_any = False
    chunk = 65536
    n = lo
    while n <= n_hi:
        hi = min(n + chunk - 1, n_hi)
        ms = np.arange(n, hi + 1, dtype=np.int64)
        bad = _invalid_mask(gen, s, ms)
        if bad.any():
            last_bad = int(ms[bad][-1])
            found_any = True
        elif found_any or n > lo:
            break
        else:
            # fully valid from the start
            return lo
        n = hi + 1
    if last_bad >= n_hi:
        return None
    return last_bad + 1


def _invalid_mask(gen: GeneratorMatrix, s: FreezingSchedule, ms: np.ndarray) -> np.ndarray:
    """Boolean mask over schedule indices ms where some row is invalid."""
    d = gen.dim
    p = np.asarray(p_at(s, ms), dtype=float)
    c = gen.jump_rates
    rem = s.remainder
    if rem.is_zero:
        total = p[None, :] * c[:, None]
        return np.any(total > 1.0 + _ROW_TOL, axis=0)
    bad = np.zeros(ms.size, dtype=bool)
    qoff = gen.q.copy()
    np.fill_diagonal(qoff, 0.0)
    for idx, m in enumerate(ms):
        r = rem.matrix(int(m), d)
        ent = qoff + r
        np.fill_diagonal(ent, 0.0)
        total = p[idx] * ent.sum(axis=1)
        if np.any(ent < -_ROW_TOL) or np.any(total > 1.0 + _ROW_TOL):
            bad[idx] = True
    return bad


# ---------------------------------------------------------------------------
# streaming empirical-measure updates


def empirical_update(state: ChainState, next_i: int) -> ChainState:
    """Advance the visit counts by one step; x follows the exact recursion.

    Integer counting is drift-free: x_{n+1} = (n/(n+1)) x_n + e_j / (n+1)
    holds to machine precision by construction.
    """
    counts = state.counts.copy()
    counts[next_i] += 1
    return ChainState(n=state.n + 1, i=int(next_i), counts=counts)


def fluctuation(state_or_x, nu: np.ndarray, s: FreezingSchedule, n: int | None = None,
                offset: int = 0) -> np.ndarray:
    """Rescaled deviation y_n = sqrt(n p_n) (x_n - nu); sums to zero."""
    if isinstance(state_or_x, ChainState):
        x = state_or_x.x
        n = state_or_x.n
    else:
        x = np.asarray(state_or_x, dtype=float)
        if n is None:
            raise ValueError("n required when passing a bare vector")
    alpha = np.sqrt(n * np.asarray(p_at(s, np.asarray(n) + offset), dtype=float))
    return np.asarray(alpha)[..., None] * (x - nu) if np.ndim(n) else alpha * (x - nu)


def weighted_occupation(states: np.ndarray, weights: np.ndarray, dim: int) -> np.ndarray:
    """Weighted empirical measures x_n = sum_k w_k e_{i_k} / sum_k w_k, all n."""
    states = np.asarray(states)
    w = np.asarray(weights, dtype=float)
    if w.shape != states.shape or np.any(w <= 0):
        raise ValueError("weights must be positive and aligned with states")
    onehot = (states[:, None] == np.arange(dim)[None, :]).astype(float)
    num = np.cumsum(onehot * w[:, None], axis=0)
    return num / np.cumsum(w)[:, None]


# ---------------------------------------------------------------------------
# interpolation onto continuous time


@dataclass(frozen=True)
class InterpolatedPath:
    """Piecewise-constant path t -> (x_n, i_n) on the clock tau_n = H_n.

    Right-continuous with left limits; defined on [tau_1, tau_N].
    """

    tau: np.ndarray  # (N,) harmonic numbers
    x: np.ndarray  # (N, D)
    i: np.ndarray  # (N,)

    def index_at(self, t: float) -> int:
        """m(t) = sup{k : tau_k <= t}, 1-based."""
        if t < self.tau[0]:
            raise ValueError(f"t={t} precedes tau_1={self.tau[0]}")
        if t > self.tau[-1]:
            raise ValueError(f"t={t} beyond tau_N={self.tau[-1]}")
        return int(np.searchsorted(self.tau, t, side="right"))

    def value_at(self, t: float) -> tuple[np.ndarray, int]:
        n = self.index_at(t)
        return self.x[n - 1], int(self.i[n - 1])


def interpolate(states: np.ndarray, dim: int) -> InterpolatedPath:
    """Build the interpolated path from a dense record i_1..i_N."""
    states = np.asarray(states)
    n = states.size
    onehot = (states[:, None] == np.arange(dim)[None, :]).astype(np.int64)
    counts = np.cumsum(onehot, axis=0)
    steps = np.arange(1, n + 1, dtype=float)
    x = counts / steps[:, None]
    tau = np.cumsum(1.0 / steps)
    return InterpolatedPath(tau=tau, x=x, i=states.copy())


# ---------------------------------------------------------------------------
# jump-skipping engine


@dataclass
class _JumpTables:
    cum_hazard: np.ndarray  # (D, N-1), cumulative -log(1 - jump prob)
    target_cdf: list[np.ndarray] | None  # per-state cdf when remainder-free
    offset: int
    n_steps: int


def _prepare_jump_tables(
    gen: GeneratorMatrix, s: FreezingSchedule, n_steps: int, offset: int
) -> _JumpTables:
    d = gen.dim
    ktr = n_steps - 1
    if ktr == 0:
        return _JumpTables(np.zeros((d, 0)), None, offset, n_steps)
    ms = np.arange(1, ktr + 1, dtype=np.int64) + offset
    bad = _invalid_mask(gen, s, ms)
    if bad.any():
        first_bad = int(ms[bad][0])
        last_bad = int(ms[bad][-1])
        suggestion = last_bad + 1 if not bad[-1] else first_valid_index(gen, s)
        raise InvalidRowError(
            f"invalid transition rows at schedule indices starting n={first_bad}; "
            f"shift the schedule offset to {suggestion}",
            n=first_bad,
            suggested_n0=suggestion,
        )
    p = np.asarray(p_at(s, ms), dtype=float)
    c = gen.jump_rates
    rem = s.remainder
    if rem.is_zero:
        total = p[None, :] * c[:, None]
        cdfs = []
        for i in range(d):
            cdfs.append(np.cumsum(gen.off_diagonal(i)))
    else:
        rowsums = np.empty((d, ms.size))
        for idx, m in enumerate(ms):
            rowsums[:, idx] = rem.matrix(int(m), d).sum(axis=1)
        total = p[None, :] * (c[:, None] + rowsums)
        cdfs = None
    total = np.clip(total, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        hazard = -np.log1p(-total)
    return _JumpTables(np.cumsum(hazard, axis=1), cdfs, offset, n_steps)


def _draw_initial(init, d: int, rng: np.random.Generator) -> int:
    if isinstance(init, (int, np.integer)):
        if not 0 <= int(init) < d:
            raise ValueError(f"initial state {init} outside 0..{d - 1}")
        return int(init)
    if isinstance(init, str):
        if init == "uniform":
            return int(rng.integers(d))
        raise ValueError(f"unknown init {init!r}")
    law = np.asarray(init, dtype=float)
    if law.shape != (d,) or np.any(law < 0) or abs(law.sum() - 1) > 1e-9:
        raise ValueError("init law must be a probability vector of length D")
    return int(np.searchsorted(np.cumsum(law), rng.random(), side="right"))


def _run_jump(
    gen: GeneratorMatrix,
    s: FreezingSchedule,
    tables: _JumpTables,
    rng: np.random.Generator,
    init,
    checkpoints: np.ndarray | None,
    record_full: bool,
) -> ChainResult:
    d = gen.dim
    n_steps = tables.n_steps
    ktr = n_steps - 1
    counts = np.zeros(d, dtype=np.int64)
    state = _draw_initial(init, d, rng)
    cps = checkpoints if checkpoints is not None else np.empty(0, dtype=np.int64)
    cp_counts = np.zeros((cps.size, d), dtype=np.int64)
    cp_states = np.zeros(cps.size, dtype=np.int64)
    record = np.zeros(n_steps, dtype=np.int64) if record_full else None
    n_cur = 1
    cp_idx = 0
    last_jump = 0
    n_jumps = 0
    while True:
        cum = tables.cum_hazard[state]
        base = cum[n_cur - 2] if n_cur >= 2 else 0.0
        py = int(np.searchsorted(cum, base + rng.standard_exponential(), side="right"))
        if py >= ktr:
            jump_k = None
            run_end = n_steps
        else:
            jump_k = py + 1
            run_end = jump_k
        while cp_idx < cps.size and cps[cp_idx] <= run_end:
            cp = int(cps[cp_idx])
            cp_counts[cp_idx] = counts
            cp_counts[cp_idx, state] += cp - n_cur + 1
            cp_states[cp_idx] = state
            cp_idx += 1
        counts[state] += run_end - n_cur + 1
        if record is not None:
            record[n_cur - 1 : run_end] = state
        if jump_k is None:
            break
        if tables.target_cdf is not None:
            cdf = tables.target_cdf[state]
        else:
            m = jump_k + tables.offset
            w = gen.off_diagonal(state) + s.remainder.matrix(m, d)[state]
            cdf = np.cumsum(w)
        state = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        last_jump = jump_k
        n_jumps += 1
        n_cur = jump_k + 1
    final = ChainState(n=n_steps, i=state, counts=counts)
    return ChainResult(
        state=final,
        last_jump_step=last_jump,
        n_jumps=n_jumps,
        schedule_offset=tables.offset,
        checkpoint_n=cps if cps.size else None,
        checkpoint_i=cp_states if cps.size else None,
        checkpoint_counts=cp_counts if cps.size else None,
        states=record,
    )


def _run_step(
    gen: GeneratorMatrix,
    s: FreezingSchedule,
    n_steps: int,
    offset: int,
    rng: np.random.Generator,
    init,
    checkpoints: np.ndarray | None,
    record_full: bool,
) -> ChainResult:
    d = gen.dim
    counts = np.zeros(d, dtype=np.int64)
    state = _draw_initial(init, d, rng)
    counts[state] = 1
    cps = checkpoints if checkpoints is not None else np.empty(0, dtype=np.int64)
    cp_counts = np.zeros((cps.size, d), dtype=np.int64)
    cp_states = np.zeros(cps.size, dtype=np.int64)
    record = np.zeros(n_steps, dtype=np.int64) if record_full else None
    if record is not None:
        record[0] = state
    cp_idx = 0
    last_jump = 0
    n_jumps = 0
    while cp_idx < cps.size and cps[cp_idx] == 1:
        cp_counts[cp_idx] = counts
        cp_states[cp_idx] = state
        cp_idx += 1
    if n_steps > 1:
        ms = np.arange(1, n_steps, dtype=np.int64) + offset
        bad = _invalid_mask(gen, s, ms)
        if bad.any():
            first_bad = int(ms[bad][0])
            raise InvalidRowError(
                f"invalid transition row at schedule index n={first_bad}",
                n=first_bad,
                suggested_n0=first_valid_index(gen, s),
            )
        p = np.asarray(p_at(s, ms), dtype=float)
    rem_zero = s.remainder.is_zero
    c = gen.jump_rates
    cdfs = [np.cumsum(gen.off_diagonal(i)) for i in range(d)]
    uniforms = rng.random(n_steps - 1)
    for k in range(1, n_steps):
        if rem_zero:
            jump_p = p[k - 1] * c[state]
            cdf = cdfs[state]
            total = c[state]
        else:
            r = s.remainder.matrix(k + offset, d)
            w = gen.off_diagonal(state) + r[state]
            total = w.sum()
            jump_p = p[k - 1] * total
            cdf = np.cumsum(w)
        u = uniforms[k - 1]
        if u < jump_p:
            # conditional u / jump_p is uniform again: inverse CDF on targets
            state = int(np.searchsorted(cdf, (u / jump_p) * total, side="right"))
            last_jump = k
            n_jumps += 1
        counts[state] += 1
        if record is not None:
            record[k] = state
        while cp_idx < cps.size and cps[cp_idx] == k + 1:
            cp_counts[cp_idx] = counts
            cp_states[cp_idx] = state
            cp_idx += 1
    final = ChainState(n=n_steps, i=state, counts=counts)
    return ChainResult(
        state=final,
        last_jump_step=last_jump,
        n_jumps=n_jumps,
        schedule_offset=offset,
        checkpoint_n=cps if cps.size else None,
        checkpoint_i=cp_states if cps.size else None,
        checkpoint_counts=cp_counts if cps.size else None,
        states=record,
    )


def _resolve_offset(s: FreezingSchedule, offset) -> int:
    base = s.n_min - 1
    if offset is None:
        return base
    off = int(offset)
    if off < base:
        raise ScheduleError(f"offset {off} below n_min - 1 = {base}")
    return off


def _normalize_checkpoints(checkpoints, n_steps: int) -> np.ndarray | None:
    if checkpoints is None:
        return None
    cps = np.unique(np.asarray(checkpoints, dtype=np.int64))
    if cps.size == 0:
        return None
    if cps[0] < 1 or cps[-1] > n_steps:
        raise ValueError(f"checkpoints must lie in [1, {n_steps}]")
    return cps


def simulate_chain(
    gen: GeneratorMatrix,
    s: FreezingSchedule,
    n_steps: int,
    *,
    seed: int | np.random.Generator,
    init="uniform",
    offset: int | None = None,
    checkpoints=None,
    record_full: bool = False,
    engine: str = "jump",
) -> ChainResult:
    """Simulate one trajectory of n_steps steps; exact in law, seed-deterministic.

    The schedule index of the step k -> k+1 transition is k + offset, with
    offset defaulting to n_min - 1 so the schedule starts at its first
    emitted value.  Invalid early rows raise InvalidRowError with the first
    usable offset.
    """
    if n_steps < 1:
        raise ValueError("n_steps >= 1 required")
    off = _resolve_offset(s, offset)
    cps = _normalize_checkpoints(checkpoints, n_steps)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if engine == "jump":
        tables = _prepare_jump_tables(gen, s, n_steps, off)
        return _run_jump(gen, s, tables, rng, init, cps, record_full)
    if engine == "step":
        return _run_step(gen, s, n_steps, off, rng, init, cps, record_full)
    raise ValueError(f"unknown engine {engine!r}")


# ---------------------------------------------------------------------------
# ensembles


def log_checkpoints(lo: int, hi: int, per_decade: int = 10) -> np.ndarray:
    """Log-spaced integer checkpoint grid, about per_decade points per decade."""
    if not 1 <= lo <= hi:
        raise ValueError("need 1 <= lo <= hi")
    count = max(2, int(round(per_decade * np.log10(hi / lo))) + 1)
    return np.unique(np.round(np.geomspace(lo, hi, count)).astype(np.int64))


def _run_block(args) -> list[ChainResult]:
    (gen, s, n_steps, master_seed, indices, init, cps, record_full, engine, off) = args
    out = []
    if engine == "jump":
        tables = _prepare_jump_tables(gen, s, n_steps, off)
        for idx in indices:
            rng = derived_rng(master_seed, idx)
            out.append(_run_jump(gen, s, tables, rng, init, cps, record_full))
    else:
        for idx in indices:
            rng = derived_rng(master_seed, idx)
            out.append(_run_step(gen, s, n_steps, off, rng, init, cps, record_full))
    return out


def run_ensemble(
    gen: GeneratorMatrix,
    s: FreezingSchedule,
    n_steps: int,
    n_replicates: int,
    *,
    master_seed: int,
    init="uniform",
    checkpoints=None,
    offset: int | None = None,
    engine: str = "jump",
    workers: int = 1,
) -> ChainEnsemble:
    """Run n_replicates independent trajectories with derived seeds.

    Replicate index r uses the stream derived from (master_seed, r), so the
    output is identical for any worker count or execution order.
    """
    off = _resolve_offset(s, offset)
    cps = _normalize_checkpoints(checkpoints, n_steps)
    indices = list(range(n_replicates))
    if workers <= 1 or n_replicates < 4:
        results = _run_block((gen, s, n_steps, master_seed, indices, init, cps, False, engine, off))
    else:
        blocks = np.array_split(indices, min(workers, n_replicates))
        args = [
            (gen, s, n_steps, master_seed, list(b), init, cps, False, engine, off)
            for b in blocks
            if len(b)
        ]
        results = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_run_block, args):
                results.extend(chunk)
    d = gen.dim
    m = n_replicates
    ens = ChainEnsemble(
        master_seed=master_seed,
        schedule_offset=off,
        x_final=np.stack([r.state.x for r in results]),
        i_final=np.array([r.state.i for r in results], dtype=np.int64),
        counts_final=np.stack([r.state.counts for r in results]),
        last_jump_step=np.array([r.last_jump_step for r in results], dtype=np.int64),
        n_jumps=np.array([r.n_jumps for r in results], dtype=np.int64),
        n_steps=n_steps,
    )
    if cps is not None:
        ens.checkpoint_n = cps
        ens.checkpoint_i = np.stack([r.checkpoint_i for r in results])
        ens.checkpoint_x = np.stack([r.checkpoint_x for r in results])
    return ens
