"""Sparse-PCA solvers: the restarted truncated power method in its full-sample
and sample-split variants, the three combinatorial baselines it is measured
against, the gap-index computation, and the deflation wrapper.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ConstructionError, DeflationError, ParameterError
from .models import (
    CovOperator,
    Dataset,
    DataCov,
    DenseCov,
    ProjectedCov,
    batch_covariances,
    sample_covariance,
)

# Above this dimension the solver keeps covariance products matrix-free
# instead of materialising a d x d matrix.
DENSE_DIM_LIMIT = 4096


@dataclass
class CandidateVector:
    """A unit vector with explicit support and the sparsity budget it obeys."""

    values: np.ndarray
    support: np.ndarray
    budget: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.support = np.asarray(self.support, dtype=np.intp)
        nrm = float(np.linalg.norm(self.values))
        if abs(nrm - 1.0) > 1e-10:
            raise ParameterError(f"candidate norm {nrm} is not 1 within 1e-10")
        actual = np.flatnonzero(self.values)
        if not np.array_equal(actual, self.support):
            raise ParameterError("support does not match the nonzero index set")
        if actual.size > self.budget:
            raise ParameterError(f"{actual.size} nonzeros exceed budget {self.budget}")

    @classmethod
    def unit(cls, values, budget):
        values = np.asarray(values, dtype=np.float64)
        nrm = float(np.linalg.norm(values))
        if nrm == 0.0:
            raise ParameterError("cannot normalise the zero vector")
        values = values / nrm
        return cls(values=values, support=np.flatnonzero(values), budget=int(budget))

    @property
    def dim(self):
        return self.values.shape[0]


@dataclass
class RtpmConfig:
    """Knobs of the restarted truncated power method.

    ``mode='disjoint'`` splits the sample into ``T`` fresh batches, one per
    iteration; ``mode='full'`` reuses the full-sample covariance every
    iteration.  ``tol=0`` disables early stopping.  ``restarts`` is either
    ``'all'`` (every standard basis vector) or an explicit index list.
    """

    r: int
    T: int
    mode: str = "full"
    restarts: object = "all"
    tol: float = 0.0
    matvec: str = "auto"

    def __post_init__(self):
        if self.r < 1:
            raise ParameterError("truncation level r must be >= 1")
        if self.T < 1:
            raise ParameterError("iteration count T must be >= 1")
        if self.mode not in ("full", "disjoint"):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.matvec not in ("auto", "dense", "matfree"):
            raise ParameterError(f"unknown matvec policy {self.matvec!r}")

    def restart_indices(self, d):
        if isinstance(self.restarts, str):
            if self.restarts == "all":
                return np.arange(d, dtype=np.intp)
            raise ParameterError(f"unknown restart set {self.restarts!r}")
        idx = np.asarray(list(self.restarts), dtype=np.intp)
        if idx.size == 0:
            raise ParameterError("restart set is empty")
        if idx.min() < 0 or idx.max() >= d:
            raise ParameterError("restart index out of range")
        return idx


@dataclass
class RtpmReport:
    """The selected candidate plus per-restart bookkeeping."""

    candidate: CandidateVector
    restart_index: int
    rayleigh: float
    iterations_used: int
    degenerate: bool
    rayleigh_all: np.ndarray = field(repr=False, default=None)


def rtpm_iterate(op, u, r):
    """One truncated power step ``top_r(op u) / |top_r(op u)|``.

    A zero product leaves ``u`` unchanged (degenerate input); ``r`` beyond the
    dimension disables truncation.  Returns ``(candidate, degenerate)``.
    """
    values = u.values if isinstance(u, CandidateVector) else np.asarray(u, dtype=np.float64)
    y = op.apply(values)
    eff_r = min(int(r), op.dim)
    if eff_r < 1:
        raise ParameterError("truncation level must be >= 1")
    y = linalg.top_r(y, eff_r)
    nrm = float(np.linalg.norm(y))
    if nrm == 0.0:
        return CandidateVector.unit(values, max(int(r), 1)), True
    return CandidateVector.unit(y / nrm, eff_r), False


def _maybe_dense(op, policy):
    if policy == "matfree":
        return op
    if policy == "dense" or op.dim <= DENSE_DIM_LIMIT:
        return op if isinstance(op, DenseCov) else DenseCov(op.to_dense())
    return op


def _resolve_operators(X, cfg):
    """(per-iteration operators, selection operator) for a dataset."""
    if isinstance(X, CovOperator):
        if cfg.mode != "full":
            raise ParameterError("a pre-built covariance operator has no sample "
                                 "batches; disjoint mode needs a Dataset")
        op = _maybe_dense(X, cfg.matvec)
        return [op] * cfg.T, op
    if not isinstance(X, Dataset):
        X = Dataset(rows=np.asarray(X))
    select_op = _maybe_dense(DataCov(X.rows), cfg.matvec)
    if cfg.mode == "full":
        return [select_op] * cfg.T, select_op
    ops = [_maybe_dense(b, cfg.matvec) for b in batch_covariances(X, cfg.T)]
    return ops, select_op


def _iterate_block(op, W, r, frozen):
    """One truncated power step applied columnwise; frozen or degenerate
    columns keep their previous value."""
    d = W.shape[0]
    live = np.flatnonzero(~frozen)
    if live.size == 0:
        return W, np.zeros(W.shape[1], dtype=bool)
    Y = op.apply_matrix(W[:, live])
    Y = linalg.truncate_columns(Y, min(r, d))
    nrm = np.linalg.norm(Y, axis=0)
    dead = nrm == 0.0
    nrm[dead] = 1.0
    Y = Y / nrm
    Y[:, dead] = W[:, live][:, dead]
    out = W.copy()
    out[:, live] = Y
    degenerate = np.zeros(W.shape[1], dtype=bool)
    degenerate[live[dead]] = True
    return out, degenerate


def _run_restarts(ops, d, cfg, restarts):
    m = restarts.size
    W = np.zeros((d, m))
    W[restarts, np.arange(m)] = 1.0
    frozen = np.zeros(m, dtype=bool)
    degenerate = np.zeros(m, dtype=bool)
    iters = np.zeros(m, dtype=np.intp)
    for t in range(cfg.T):
        if frozen.all():
            break
        prev = W
        W, degen_t = _iterate_block(ops[t], W, cfg.r, frozen)
        degenerate |= degen_t
        iters[~frozen] += 1
        if cfg.tol > 0.0:
            moved = np.linalg.norm(W - prev, axis=0)
            frozen |= moved <= cfg.tol
    return W, iters, degenerate


def _select(W, select_op, restarts):
    ray = np.einsum("ij,ij->j", W, select_op.apply_matrix(W))
    j = int(np.argmax(ray))  # first max: ties go to the smaller restart index
    return j, ray


def rtpm_with_report(X, cfg):
    """Restarted truncated power method returning full bookkeeping."""
    if isinstance(X, Dataset) and cfg.mode == "disjoint" and X.n < cfg.T:
        raise ParameterError(f"disjoint mode needs n >= T, got n={X.n}, T={cfg.T}")
    ops, select_op = _resolve_operators(X, cfg)
    d = select_op.dim
    restarts = cfg.restart_indices(d)
    W, iters, degenerate = _run_restarts(ops, d, cfg, restarts)
    j, ray = _select(W, select_op, restarts)
    cand = CandidateVector.unit(W[:, j], min(cfg.r, d))
    return RtpmReport(
        candidate=cand,
        restart_index=int(restarts[j]),
        rayleigh=float(ray[j]),
        iterations_used=int(iters[j]),
        degenerate=bool(degenerate[j]),
        rayleigh_all=ray,
    )


def rtpm(X, cfg):
    """Restarted truncated power method; returns the selected candidate."""
    return rtpm_with_report(X, cfg).candidate


def rtpm_trajectory(X, cfg, checkpoints):
    """Run RTPM once and snapshot the selected candidate at each iteration
    count in ``checkpoints``.

    Returns ``[(t, cumulative_solver_seconds, CandidateVector), ...]``.  The
    clock covers iteration work only; snapshot evaluation is excluded.
    """
    checkpoints = sorted(set(int(t) for t in checkpoints))
    if any(t < 1 for t in checkpoints):
        raise ParameterError("checkpoints must be >= 1")
    if not checkpoints:
        return []
    total_T = max(checkpoints)
    run_cfg = RtpmConfig(r=cfg.r, T=total_T, mode=cfg.mode, restarts=cfg.restarts,
                         tol=0.0, matvec=cfg.matvec)
    if isinstance(X, Dataset) and run_cfg.mode == "disjoint" and X.n < total_T:
        raise ParameterError(f"disjoint mode needs n >= T, got n={X.n}, T={total_T}")
    ops, select_op = _resolve_operators(X, run_cfg)
    d = select_op.dim
    restarts = run_cfg.restart_indices(d)
    m = restarts.size
    W = np.zeros((d, m))
    W[restarts, np.arange(m)] = 1.0
    frozen = np.zeros(m, dtype=bool)
    out = []
    elapsed = 0.0
    for t in range(total_T):
        tic = time.perf_counter()
        W, _ = _iterate_block(ops[t], W, run_cfg.r, frozen)
        elapsed += time.perf_counter() - tic
        if (t + 1) in checkpoints:
            j, _ = _select(W, select_op, restarts)
            cand = CandidateVector.unit(W[:, j], min(run_cfg.r, d))
            out.append((t + 1, elapsed, cand))
    return out


# ---------------------------------------------------------------------------
# combinatorial baselines


def _top_indices(scores, s):
    """Indices of the s largest scores, ties toward the smaller index."""
    return np.sort(np.argsort(-scores, kind="stable")[:s])


def _embedded_top_eigvec(cov, S, budget):
    sub = linalg.restrict(cov, S)
    pair = linalg.eig_top_m(sub, 1)[0]
    out = np.zeros(cov.shape[0])
    out[np.asarray(sorted(S), dtype=np.intp)] = pair.vector
    # already unit from the eigensolver; avoid renormalisation noise
    return CandidateVector(values=out, support=np.flatnonzero(out), budget=budget)


def diag_thresh(cov, s):
    """Support = the s largest diagonal entries, then a local eigenvector."""
    cov = linalg.ensure_sym(cov)
    if not 1 <= s <= cov.shape[0]:
        raise ParameterError(f"s={s} outside [1, {cov.shape[0]}]")
    S = _top_indices(np.diag(cov).copy(), s)
    return _embedded_top_eigvec(cov, S, s)


def cov_thresh(cov, tau, s=None):
    """Top eigenvector of the entrywise-thresholded covariance.

    ``s`` is accepted for harness uniformity but the algorithm ignores it.
    """
    cov = linalg.ensure_sym(cov)
    thr = linalg.threshold_entries(cov, tau)
    if not thr.any():
        raise ConstructionError(f"thresholding at tau={tau} left the zero matrix")
    pair = linalg.eig_top_m(thr, 1)[0]
    return CandidateVector(values=pair.vector, support=np.flatnonzero(pair.vector),
                           budget=cov.shape[0])


def greedy_corr(cov, s, i_star):
    """Support = the s rows most squared-covariance-correlated with row
    ``i_star``, then a local eigenvector."""
    cov = linalg.ensure_sym(cov)
    d = cov.shape[0]
    if not 1 <= s <= d:
        raise ParameterError(f"s={s} outside [1, {d}]")
    if not 0 <= i_star < d:
        raise ParameterError(f"seed index {i_star} outside [0, {d})")
    scores = np.abs(cov @ cov[:, i_star])  # |(Sigma^2)_{i*, j}| as row inner products
    G = _top_indices(scores, s)
    return _embedded_top_eigvec(cov, G, s)


def top_s_project(u, s):
    """Keep the s largest-magnitude entries and renormalise."""
    if s < 1:
        raise ParameterError("s must be >= 1")
    values = u.values if isinstance(u, CandidateVector) else np.asarray(u, dtype=np.float64)
    kept = linalg.top_r(values, min(int(s), values.shape[0]))
    return CandidateVector.unit(kept, int(s))


def find_gap_index(eigenvalues, k, beta):
    """Smallest ``p`` in 1..k with ``lambda_{p+1} / lambda_p <= 1 - beta/k``.

    The returned ``p`` is the dimension of a well-separated leading
    eigenspace and satisfies ``lambda_p / lambda_1 >= 1 - beta``.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.size < k + 1:
        raise ParameterError(f"need at least k+1={k + 1} eigenvalues, got {lam.size}")
    if k < 1:
        raise ParameterError("k must be >= 1")
    if not beta > 0:
        raise ParameterError("beta must be positive")
    head = lam[: k + 1]
    if (np.diff(head) > 0).any() or head[-1] <= 0:
        raise ParameterError("eigenvalues must be non-increasing and positive through k+1")
    cut = 1.0 - beta / k
    for i in range(1, k + 1):
        if head[i] / head[i - 1] <= cut:
            return i
    raise ConstructionError(
        f"no index p in [1, {k}] with lambda ratio <= {cut}: eigengap promise violated"
    )


# ---------------------------------------------------------------------------
# deflation


def kspca_deflate(source, k, oracle, orth_tol=1e-8):
    """Extract ``k`` components by repeatedly deflating and calling a 1-sparse
    PCA oracle.

    ``source`` may be a symmetric matrix, a :class:`CovOperator`, or a
    :class:`Dataset`.  Dense matrices are deflated as ``P Sigma P``; datasets
    are deflated by projecting samples ``x -> P x``; operators by composing
    the projection around the product.  The oracle output is re-projected
    onto the current span and renormalised to control numerical drift.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if isinstance(source, Dataset):
        kind, payload, d = "data", source.rows, source.d
    elif isinstance(source, CovOperator):
        kind, payload, d = "op", source, source.dim
    else:
        kind, payload, d = "dense", linalg.ensure_sym(source), np.asarray(source).shape[0]
    U = np.zeros((d, 0))
    for i in range(k):
        if kind == "dense":
            P = np.eye(d) - U @ U.T
            deflated = DenseCov(linalg.symmetrize(P @ payload @ P))
        elif kind == "data":
            rows = payload - (payload @ U) @ U.T if U.shape[1] else payload
            deflated = Dataset(rows=rows)
        else:
            deflated = ProjectedCov(payload, U) if U.shape[1] else payload
        cand = oracle(deflated)
        u = cand.values if isinstance(cand, CandidateVector) else np.asarray(cand, dtype=np.float64)
        w = u - U @ (U.T @ u) if U.shape[1] else u.copy()
        nrm = float(np.linalg.norm(w))
        if nrm < orth_tol:
            raise DeflationError(
                f"round {i}: oracle output lies in the learned span (residual {nrm:.2e})",
                residual=nrm,
            )
        U = np.column_stack([U, w / nrm])
    return U
