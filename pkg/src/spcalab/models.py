"""Covariance models, Gaussian sampling, and covariance-product operators.

Sampling is counter-based: row ``i`` of a dataset is produced by a Philox
stream keyed by ``(seed, i)``, so per-sample streams are order-independent,
sample-size grids are nested prefixes of one another, and generation can be
chunked or parallelised with bit-exact reproducibility.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import FormatError, ParameterError

PSD_SLACK = 1e-10
DATASET_MAGIC = b"SPCA"


# ---------------------------------------------------------------------------
# seeded generation


def _philox_rows(seed, n_rows, d, row_offset=0):
    """``n_rows`` standard-normal rows; row ``i`` comes from Philox key
    ``(seed, row_offset + i)`` with a zero counter."""
    seed = int(seed) % (1 << 64)
    bg = np.random.Philox(key=[seed, 0])
    gen = np.random.Generator(bg)
    template = bg.state
    out = np.empty((n_rows, d))
    for i in range(n_rows):
        template["state"]["key"][1] = (row_offset + i) % (1 << 64)
        template["state"]["counter"][:] = 0
        bg.state = template
        out[i] = gen.standard_normal(d)
    return out


class SqrtForm:
    """A symmetric square root ``S`` of a covariance, applied to row blocks.

    Either dense, or structured as ``diag(g) + U A U^T`` which keeps
    sampling at O(n d m) for the planted families instead of O(n d^2).
    """

    def __init__(self, dense=None, diag=None, U=None, A=None):
        if dense is not None:
            self.dense = np.asarray(dense, dtype=np.float64)
            self.diag = self.U = self.A = None
            self.dim = self.dense.shape[0]
        else:
            self.dense = None
            self.diag = np.asarray(diag, dtype=np.float64)
            self.U = np.asarray(U, dtype=np.float64) if U is not None else None
            self.A = np.asarray(A, dtype=np.float64) if A is not None else None
            self.dim = self.diag.shape[0]

    def apply_rows(self, Z):
        """Rows of ``Z @ S`` (S symmetric)."""
        if self.dense is not None:
            return Z @ self.dense
        out = Z * self.diag
        if self.U is not None:
            out = out + (Z @ self.U) @ (self.A @ self.U.T)
        return out


def sqrt_form_of(sigma, slack=PSD_SLACK):
    """Dense symmetric PSD square root, rejecting eigenvalues below ``-slack``."""
    sigma = linalg.ensure_sym(sigma)
    vals, vecs = np.linalg.eigh(sigma)
    if vals[0] < -slack:
        raise ParameterError(
            f"covariance is indefinite: min eigenvalue {vals[0]:.3e} < -{slack:.0e}"
        )
    vals = np.clip(vals, 0.0, None)
    dense = linalg.symmetrize((vecs * np.sqrt(vals)) @ vecs.T)
    return SqrtForm(dense=dense)


# ---------------------------------------------------------------------------
# datasets


@dataclass
class Dataset:
    """An ``n x d`` sample matrix together with the seed that generated it."""

    rows: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape[0] < 1 or self.rows.shape[1] < 1:
            raise ParameterError(f"dataset must be n x d with n, d >= 1, got {self.rows.shape}")
        if not np.isfinite(self.rows).all():
            raise ParameterError("dataset contains non-finite values")

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]

    def save(self, path):
        """Little-endian binary: magic 'SPCA', u32 n, u32 d, u64 seed, rows."""
        with open(path, "wb") as fh:
            fh.write(DATASET_MAGIC)
            fh.write(struct.pack("<IIQ", self.n, self.d, int(self.seed) % (1 << 64)))
            fh.write(self.rows.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != DATASET_MAGIC:
                raise FormatError(f"bad magic {magic!r}, expected {DATASET_MAGIC!r}")
            header = fh.read(16)
            if len(header) != 16:
                raise FormatError("truncated dataset header")
            n, d, seed = struct.unpack("<IIQ", header)
            body = fh.read(8 * n * d)
            if len(body) != 8 * n * d:
                raise FormatError("truncated dataset body")
            rows = np.frombuffer(body, dtype="<f8").reshape(n, d).copy()
        return cls(rows=rows, seed=seed)


def sample_gaussian(sigma, n, seed, sqrt=None):
    """``n`` i.i.d. N(0, sigma) rows via the symmetric square root of sigma.

    Bit-exact for a fixed seed; rows are independent counter-based streams.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if sqrt is None:
        sqrt = sqrt_form_of(sigma)
    Z = _philox_rows(seed, n, sqrt.dim)
    return Dataset(rows=sqrt.apply_rows(Z), seed=int(seed))


def sample_covariance(X):
    """``(1/n) sum x_i x_i^T`` (models are mean-zero: no centering)."""
    rows = X.rows if isinstance(X, Dataset) else np.asarray(X, dtype=np.float64)
    n = rows.shape[0]
    return linalg.symmetrize(rows.T @ rows / n)


def streamed_gram(sigma_sqrt, seed, lo, hi, chunk=8192):
    """Unnormalised Gram matrix of dataset rows ``lo .. hi`` (exclusive)
    without materialising them; rows match ``sample_gaussian`` bit-exactly
    thanks to the per-row counter streams."""
    d = sigma_sqrt.dim
    gram = np.zeros((d, d))
    done = lo
    while done < hi:
        m = min(chunk, hi - done)
        block = sigma_sqrt.apply_rows(_philox_rows(seed, m, d, row_offset=done))
        gram += block.T @ block
        done += m
    return gram


def streamed_sample_covariance(sigma_sqrt, n, seed, chunk=8192):
    """Sample covariance of ``sample_gaussian`` rows without materialising
    the dataset; used by the harness for large-n sweeps."""
    return linalg.symmetrize(streamed_gram(sigma_sqrt, seed, 0, n, chunk=chunk) / n)


# ---------------------------------------------------------------------------
# covariance operators


class CovOperator:
    """Abstract provider of products with a (possibly implicit) covariance."""

    dim: int

    def apply(self, u):
        raise NotImplementedError

    def apply_matrix(self, W):
        W = np.asarray(W, dtype=np.float64)
        out = np.empty_like(W)
        for j in range(W.shape[1]):
            out[:, j] = self.apply(W[:, j])
        return out

    def to_dense(self):
        raise NotImplementedError

    def _check_dim(self, u):
        u = np.asarray(u, dtype=np.float64)
        if u.shape[0] != self.dim:
            raise ParameterError(f"dimension mismatch: operator dim {self.dim}, vector {u.shape[0]}")
        return u


class DenseCov(CovOperator):
    def __init__(self, M):
        self.M = linalg.ensure_sym(M)
        self.dim = self.M.shape[0]

    def apply(self, u):
        return self.M @ self._check_dim(u)

    def apply_matrix(self, W):
        return self.M @ np.asarray(W, dtype=np.float64)

    def to_dense(self):
        return self.M


class DataCov(CovOperator):
    """``(1/B) X_batch^T X_batch`` applied as two matrix-vector products.

    Sparse iterates use only the touched columns in the first product.
    """

    def __init__(self, rows, lo=0, hi=None):
        rows = rows.rows if isinstance(rows, Dataset) else np.asarray(rows, dtype=np.float64)
        hi = rows.shape[0] if hi is None else hi
        if not (0 <= lo < hi <= rows.shape[0]):
            raise ParameterError(f"bad batch range [{lo}, {hi}) for n={rows.shape[0]}")
        self.batch = rows[lo:hi]
        self.B = hi - lo
        self.dim = rows.shape[1]
        self._dense = None

    def apply(self, u):
        u = self._check_dim(u)
        nz = np.flatnonzero(u)
        if nz.size == 0:
            return np.zeros(self.dim)
        if nz.size <= self.dim // 4:
            t = self.batch[:, nz] @ u[nz]
        else:
            t = self.batch @ u
        return (self.batch.T @ t) / self.B

    def apply_matrix(self, W):
        W = np.asarray(W, dtype=np.float64)
        return (self.batch.T @ (self.batch @ W)) / self.B

    def to_dense(self):
        if self._dense is None:
            self._dense = linalg.symmetrize(self.batch.T @ self.batch / self.B)
        return self._dense


class CenteredCov(CovOperator):
    """``(1/n) sum (x_i - mu)(x_i - mu)^T`` without densifying ``x - mu``.

    Accepts a dense array or a scipy CSR matrix; the product expands to
    ``X^T (X u) / n - mu (mu . u)``.
    """

    def __init__(self, rows, mu=None):
        self.sparse = sp.issparse(rows)
        self.rows = rows.tocsr() if self.sparse else np.asarray(rows, dtype=np.float64)
        self.n = self.rows.shape[0]
        self.dim = self.rows.shape[1]
        if mu is None:
            mu = np.asarray(self.rows.mean(axis=0)).ravel()
        self.mu = np.asarray(mu, dtype=np.float64)

    def apply(self, u):
        u = self._check_dim(u)
        t = self.rows @ u
        return np.asarray(self.rows.T @ t).ravel() / self.n - self.mu * float(self.mu @ u)

    def apply_matrix(self, W):
        W = np.asarray(W, dtype=np.float64)
        t = self.rows @ W
        return np.asarray(self.rows.T @ t) / self.n - np.outer(self.mu, self.mu @ W)

    def to_dense(self):
        X = self.rows.toarray() if self.sparse else self.rows
        return linalg.symmetrize(X.T @ X / self.n - np.outer(self.mu, self.mu))


class ProjectedCov(CovOperator):
    """``P C P`` for ``P = I - U U^T``; the deflated covariance product."""

    def __init__(self, inner, U):
        self.inner = inner
        self.U = np.asarray(U, dtype=np.float64)
        self.dim = inner.dim

    def _project(self, u):
        return u - self.U @ (self.U.T @ u)

    def apply(self, u):
        u = self._check_dim(u)
        return self._project(self.inner.apply(self._project(u)))

    def apply_matrix(self, W):
        W = np.asarray(W, dtype=np.float64)
        PW = W - self.U @ (self.U.T @ W)
        out = self.inner.apply_matrix(PW)
        return out - self.U @ (self.U.T @ out)

    def to_dense(self):
        M = self.inner.to_dense()
        P = np.eye(self.dim) - self.U @ self.U.T
        return linalg.symmetrize(P @ M @ P)


def cov_apply(op, u):
    """Covariance-vector product through whichever backing ``op`` has."""
    return op.apply(np.asarray(u, dtype=np.float64))


def batch_covariances(X, T):
    """``T`` data-backed operators over disjoint contiguous batches of
    ``B = floor(n / T)`` samples; the ``n - BT`` leftover samples are unused."""
    if not isinstance(X, Dataset):
        X = Dataset(rows=np.asarray(X))
    if T < 1:
        raise ParameterError("T must be >= 1")
    B = X.n // T
    if B < 1:
        raise ParameterError(f"n={X.n} < T={T}: empty batches")
    return [DataCov(X.rows, lo=t * B, hi=(t + 1) * B) for t in range(T)]


# ---------------------------------------------------------------------------
# planted instances


@dataclass
class PlantedInstance:
    """A population covariance with its planted sparse component(s)."""

    sigma: np.ndarray
    v_true: np.ndarray
    s: int
    gamma: float
    label: str = "planted"
    sqrt: SqrtForm | None = field(default=None, repr=False)

    def __post_init__(self):
        self.sigma = linalg.ensure_sym(self.sigma)
        self.v_true = np.asarray(self.v_true, dtype=np.float64)
        V = self.v_true.reshape(self.sigma.shape[0], -1)
        union = np.flatnonzero(np.abs(V).max(axis=1))
        if union.size > self.s:
            raise ParameterError(
                f"planted support size {union.size} exceeds sparsity budget {self.s}"
            )
        for j in range(V.shape[1]):
            v = V[:, j]
            lam = float(v @ (self.sigma @ v))
            res = float(np.linalg.norm(self.sigma @ v - lam * v))
            if res > 1e-8 * max(1.0, abs(lam)):
                raise ParameterError(f"planted column {j} is not an eigenvector (residual {res:.2e})")

    @property
    def d(self):
        return self.sigma.shape[0]

    def sample(self, n, seed):
        sqrt = self.sqrt if self.sqrt is not None else sqrt_form_of(self.sigma)
        return sample_gaussian(self.sigma, n, seed, sqrt=sqrt)


def _planted_vector(d, s, support=None, seed=None):
    if not 1 <= s <= d:
        raise ParameterError(f"sparsity s={s} outside [1, {d}]")
    if support is not None:
        support = np.asarray(sorted(set(int(i) for i in support)), dtype=np.intp)
        if support.size != s:
            raise ParameterError(f"support has {support.size} indices, expected s={s}")
        if support[0] < 0 or support[-1] >= d:
            raise ParameterError("support index out of range")
    if seed is not None:
        rng = np.random.Generator(np.random.Philox(key=[int(seed) % (1 << 64), 0]))
        if support is None:
            support = np.sort(rng.choice(d, size=s, replace=False))
        signs = np.where(rng.random(s) < 0.5, -1.0, 1.0)
    else:
        if support is None:
            support = np.arange(s)
        signs = np.ones(s)
    v = np.zeros(d)
    v[support] = signs / np.sqrt(s)
    return v


def build_spiked_general(d, s, gamma, support=None, seed=None):
    """``Sigma = (1 - gamma)(I - v v^T) + v v^T`` with an s-sparse unit v."""
    if not 0 < gamma < 1:
        raise ParameterError(f"gamma={gamma} outside (0, 1)")
    v = _planted_vector(d, s, support=support, seed=seed)
    sigma = linalg.symmetrize((1.0 - gamma) * np.eye(d) + gamma * np.outer(v, v))
    root = np.sqrt(1.0 - gamma)
    sqrt = SqrtForm(diag=np.full(d, root), U=v.reshape(d, 1), A=np.array([[1.0 - root]]))
    return PlantedInstance(sigma=sigma, v_true=v, s=s, gamma=gamma, label="spiked", sqrt=sqrt)


def build_spiked_identity(d, s, support=None, seed=None):
    """The fixed-gap spiked model: eigenvalues {1 once, 0.9 elsewhere}."""
    return build_spiked_general(d, s, 0.1, support=support, seed=seed)
