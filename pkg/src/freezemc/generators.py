"""Generator matrices of finite-state Markov chains and derived linear algebra.

A valid generator q is a D x D real matrix with nonnegative off-diagonal
entries, zero row sums and diagonal entries >= -1 (so Id + q is a stochastic
matrix).  From it we compute the stationary law nu (nu^T q = 0), the spectral
gap, and the solution h of the coordinatewise Poisson equation

    sum_{j != i} q(i,j) (h[k,j] - h[k,i]) = nu[k] - 1{i == k},

which is the building block of the fluctuation covariance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    DecomposableError,
    NegativeOffDiagonalError,
    NotIrreducibleError,
    RowSumNotZeroError,
    RowSumOutOfRangeError,
    SingularBeyondNullSpaceError,
)

ROW_SUM_TOL = 1e-12
RESIDUAL_TOL = 1e-10


class Connectivity(Enum):
    IRREDUCIBLE = "irreducible"
    INDECOMPOSABLE = "indecomposable"
    DECOMPOSABLE = "decomposable"


@dataclass(frozen=True)
class GeneratorMatrix:
    """Validated generator with exact zero row sums.

    Immutable after construction; safe to share across workers.
    """

    q: np.ndarray
    connectivity: Connectivity
    recurrent_states: frozenset[int] = field(default_factory=frozenset)

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    @property
    def jump_rates(self) -> np.ndarray:
        """Total rate out of each state, -q(i,i)."""
        return -np.diag(self.q)

    def off_diagonal(self, i: int) -> np.ndarray:
        """Row i with the diagonal zeroed."""
        row = self.q[i].copy()
        row[i] = 0.0
        return row


def _classify(q: np.ndarray) -> tuple[Connectivity, frozenset[int]]:
    """Reachability analysis on the digraph of strictly positive rates.

    Recurrent classes are the strongly connected components without outgoing
    edges in the condensation.
    """
    d = q.shape[0]
    adj = (q > 0.0).astype(np.int8)
    np.fill_diagonal(adj, 0)
    n_comp, labels = connected_components(csr_matrix(adj), directed=True, connection="strong")
    if n_comp == 1:
        return Connectivity.IRREDUCIBLE, frozenset(range(d))
    # component c is recurrent iff no edge leaves it
    has_exit = np.zeros(n_comp, dtype=bool)
    rows, cols = np.nonzero(adj)
    exits = labels[rows] != labels[cols]
    for c in labels[rows[exits]]:
        has_exit[c] = True
    recurrent = [c for c in range(n_comp) if not has_exit[c]]
    if len(recurrent) > 1:
        return Connectivity.DECOMPOSABLE, frozenset(np.flatnonzero(np.isin(labels, recurrent)))
    states = frozenset(int(s) for s in np.flatnonzero(labels == recurrent[0]))
    return Connectivity.INDECOMPOSABLE, states


def validate_generator(raw: np.ndarray) -> GeneratorMatrix:
    """Validate a raw rate matrix and normalize its diagonal exactly.

    Raises NegativeOffDiagonalError, RowSumNotZeroError (rows off by more
    than 1e-12), RowSumOutOfRangeError (some q(i,i) < -1) or
    DecomposableError (more than one recurrent class).
    """
    q = np.array(raw, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise RowSumNotZeroError(f"expected a square matrix, got shape {q.shape}")
    d = q.shape[0]
    if d < 2:
        raise RowSumNotZeroError(f"need at least 2 states, got {d}")
    off = q.copy()
    np.fill_diagonal(off, 0.0)
    if np.any(off < 0.0):
        i, j = np.argwhere(off < 0.0)[0]
        raise NegativeOffDiagonalError(f"q[{i},{j}] = {q[i, j]} < 0")
    row_sums = q.sum(axis=1)
    if np.any(np.abs(row_sums) > ROW_SUM_TOL):
        i = int(np.argmax(np.abs(row_sums)))
        raise RowSumNotZeroError(f"row {i} sums to {row_sums[i]:.3e}, expected 0")
    # store diagonal exactly as minus the off-diagonal sum
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    if np.any(np.diag(q) < -1.0 - ROW_SUM_TOL):
        i = int(np.argmin(np.diag(q)))
        raise RowSumOutOfRangeError(
            f"q[{i},{i}] = {q[i, i]:.6g} < -1, Id + q is not a stochastic matrix"
        )
    connectivity, rec = _classify(q)
    if connectivity is Connectivity.DECOMPOSABLE:
        raise DecomposableError("generator has more than one recurrent class")
    q.setflags(write=False)
    return GeneratorMatrix(q=q, connectivity=connectivity, recurrent_states=rec)


def complete_graph_generator(theta: np.ndarray) -> GeneratorMatrix:
    """Generator q(i,j) = theta[j] - |theta| 1{i==j} of the complete graph.

    Requires theta > 0 componentwise and |theta| - theta[i] <= 1 for every i
    (otherwise Id + q leaves [0, 1]; rescale theta and the jump rate a
    jointly, the dynamics only depend on the product a * theta).
    """
    th = np.asarray(theta, dtype=float)
    if th.ndim != 1 or th.size < 2:
        raise ValueError("theta must be a vector of length >= 2")
    if np.any(th <= 0.0):
        raise ValueError("theta must be strictly positive")
    total = th.sum()
    if np.any(total - th > 1.0 + ROW_SUM_TOL):
        i = int(np.argmin(th))
        raise RowSumOutOfRangeError(
            f"|theta| - theta[{i}] = {total - th[i]:.6g} > 1; rescale theta"
        )
    q = np.tile(th, (th.size, 1))
    np.fill_diagonal(q, th - total)
    q.setflags(write=False)
    return GeneratorMatrix(
        q=q,
        connectivity=Connectivity.IRREDUCIBLE,
        recurrent_states=frozenset(range(th.size)),
    )


def stationary_distribution(gen: GeneratorMatrix) -> np.ndarray:
    """Unique probability vector nu with nu^T q = 0.

    Defined for irreducible and indecomposable generators (for the latter nu
    is supported on the recurrent class).
    """
    q = gen.q
    d = gen.dim
    m = np.vstack([q.T, np.ones(d)])
    b = np.zeros(d + 1)
    b[-1] = 1.0
    nu, *_ = np.linalg.lstsq(m, b, rcond=None)
    nu = np.where(np.abs(nu) < 1e-13, 0.0, nu)
    if np.any(nu < 0.0):
        raise SingularBeyondNullSpaceError(f"stationary solve produced negatives: {nu}")
    nu = nu / nu.sum()
    resid = float(np.max(np.abs(nu @ q)))
    if resid > RESIDUAL_TOL:
        raise SingularBeyondNullSpaceError(f"nu^T q residual {resid:.3e} > {RESIDUAL_TOL}")
    return nu


def poisson_solution(
    gen: GeneratorMatrix,
    nu: np.ndarray | None = None,
    gauge: str = "nu-mean-zero",
) -> np.ndarray:
    """Solve q g_k = nu[k] 1 - e_k for every coordinate k; returns h[k, i] = g_k[i].

    The system has rank D-1 with null space spanned by constant vectors, and
    is solvable because nu^T (nu[k] 1 - e_k) = 0.  Gauges:

    - "nu-mean-zero": augmented least squares [q; nu^T] g_k = [b_k; 0], which
      pins sum_i nu[i] h[k,i] = 0;
    - "raw": minimum-norm least-squares solution (an arbitrary but
      deterministic representative).

    Any quantity built from differences h[k,j] - h[k,i] is gauge-invariant.
    """
    if gen.connectivity is not Connectivity.IRREDUCIBLE:
        raise NotIrreducibleError("poisson_solution requires an irreducible generator")
    if nu is None:
        nu = stationary_distribution(gen)
    q = gen.q
    d = gen.dim
    b = np.tile(nu, (d, 1)) - np.eye(d)  # column k is nu[k] 1 - e_k
    if gauge == "nu-mean-zero":
        m = np.vstack([q, nu])
        rhs = np.vstack([b, np.zeros(d)])
        sol, _, rank, _ = np.linalg.lstsq(m, rhs, rcond=None)
        if rank < d:
            raise SingularBeyondNullSpaceError(f"augmented Poisson system has rank {rank} < {d}")
    elif gauge == "raw":
        sol, _, rank, _ = np.linalg.lstsq(q, b, rcond=None)
        if rank < d - 1:
            raise SingularBeyondNullSpaceError(f"Poisson system has rank {rank} < {d - 1}")
    else:
        raise ValueError(f"unknown gauge {gauge!r}")
    h = sol.T
    resid = float(np.max(np.abs(q @ sol - b)))
    if resid > RESIDUAL_TOL:
        raise SingularBeyondNullSpaceError(f"Poisson residual {resid:.3e} > {RESIDUAL_TOL}")
    return h


def poisson_residual(q: np.ndarray, nu: np.ndarray, h: np.ndarray) -> float:
    """Max-norm residual of the defining equation for a candidate h."""
    q = np.asarray(getattr(q, "q", q), dtype=float)
    d = q.shape[0]
    b = np.tile(np.asarray(nu), (d, 1)) - np.eye(d)
    return float(np.max(np.abs(q @ np.asarray(h).T - b)))


def spectral_gap(gen: GeneratorMatrix) -> float:
    """Gap rho = min{-Re(lambda) : lambda eigenvalue of q, lambda != 0} > 0."""
    if gen.connectivity is not Connectivity.IRREDUCIBLE:
        raise NotIrreducibleError("spectral_gap requires an irreducible generator")
    lam = np.linalg.eigvals(gen.q)
    scale = max(1.0, float(np.max(np.abs(lam))))
    nonzero = lam[np.abs(lam) > 1e-9 * scale]
    if nonzero.size != gen.dim - 1:
        raise SingularBeyondNullSpaceError(
            f"expected a simple zero eigenvalue, got {gen.dim - nonzero.size} near-zero ones"
        )
    rho = float(np.min(-nonzero.real))
    if rho <= 0.0:
        raise SingularBeyondNullSpaceError(f"nonpositive spectral gap {rho:.3e}")
    return rho


def spectral_gap_stochastic(gen: GeneratorMatrix) -> float:
    """Gap of the stochastic matrix Id + q: 1 - max|lambda| over lambda != 1.

    Exposed alongside the continuous-time gap because rate statements use
    either normalization depending on context; rate formulas in this package
    take the continuous-time spectral_gap(q).
    """
    if gen.connectivity is not Connectivity.IRREDUCIBLE:
        raise NotIrreducibleError("spectral_gap_stochastic requires an irreducible generator")
    lam = np.linalg.eigvals(np.eye(gen.dim) + gen.q)
    idx = np.argmin(np.abs(lam - 1.0))
    rest = np.delete(lam, idx)
    return float(1.0 - np.max(np.abs(rest)))


def generator_from_dict(spec: dict) -> GeneratorMatrix:
    """Build a generator from {"dim": D, "q": [[...]]} or {"complete_graph_theta": [...]}."""
    if "complete_graph_theta" in spec:
        return complete_graph_generator(np.asarray(spec["complete_graph_theta"], dtype=float))
    if "q" in spec:
        q = np.asarray(spec["q"], dtype=float)
        if "dim" in spec and int(spec["dim"]) != q.shape[0]:
            raise ValueError(f"dim {spec['dim']} does not match matrix shape {q.shape}")
        return validate_generator(q)
    raise ValueError("generator spec needs 'q' or 'complete_graph_theta'")


def generator_from_json(path: str | Path) -> GeneratorMatrix:
    """Read a generator from a JSON file with the schema of generator_from_dict."""
    with open(path, encoding="utf-8") as fh:
        return generator_from_dict(json.load(fh))
