"""Adversarial covariance constructions and their certificate checks.

Each constructor returns a :class:`CounterexampleInstance` whose
``certificates`` record every inequality the construction promises, with the
measured value next to the required bound.  Constructions are pure functions
of (parameters, seed).
"""

from __future__ import annotations

import struct
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ConstructionError, FormatError, ParameterError
from .models import PlantedInstance, SqrtForm

INSTANCE_MAGIC = b"SPCX"
PSD_TOL = 1e-10


@dataclass(frozen=True)
class Certificate:
    """A measured scalar against the bound its lemma promises."""

    name: str
    measured: float
    bound: float
    sense: str  # 'le' or 'ge'

    @property
    def passed(self):
        if self.sense == "le":
            return self.measured <= self.bound
        return self.measured >= self.bound

    def describe(self):
        op = "<=" if self.sense == "le" else ">="
        status = "ok" if self.passed else "FAIL"
        return f"{self.name}: {self.measured:.6e} {op} {self.bound:.6e} [{status}]"


@dataclass
class CounterexampleInstance:
    instance: PlantedInstance
    family: str
    params: dict
    certificates: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def sigma(self):
        return self.instance.sigma

    @property
    def v_true(self):
        return self.instance.v_true

    def failed_certificates(self):
        return [c for c in self.certificates.values() if not c.passed]


def _cert(store, name, measured, bound, sense):
    store[name] = Certificate(name, float(measured), float(bound), sense)


def _require_certificates(store, family):
    failed = [c.name for c in store.values() if not c.passed]
    if failed:
        raise ConstructionError(f"{family}: certificate(s) failed: {', '.join(failed)}")


# ---------------------------------------------------------------------------
# regular graphs


@dataclass
class RegularGraph:
    u: int
    r_deg: int
    adjacency: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=np.float64)
        if not np.array_equal(A, A.T) or np.diag(A).any():
            raise ConstructionError("adjacency must be symmetric with a hollow diagonal")
        if not np.array_equal(np.unique(A), np.array([0.0, 1.0])) and A.any():
            raise ConstructionError("adjacency entries must be 0/1")
        if not (A.sum(axis=1) == self.r_deg).all():
            raise ConstructionError(f"graph is not {self.r_deg}-regular")
        self.adjacency = A


def _pairing_attempt(u, deg, rng):
    """One pass of the pairing model: shuffle stubs, pair them up, requeue
    pairs that would create self-loops or multi-edges; None on a dead end."""
    edges = set()
    stubs = list(range(u)) * deg
    while stubs:
        arr = np.asarray(stubs, dtype=np.intp)
        rng.shuffle(arr)
        stubs_iter = iter(arr.tolist())
        leftover = defaultdict(int)
        for s1, s2 in zip(stubs_iter, stubs_iter):
            if s1 > s2:
                s1, s2 = s2, s1
            if s1 != s2 and (s1, s2) not in edges:
                edges.add((s1, s2))
            else:
                leftover[s1] += 1
                leftover[s2] += 1
        if not leftover:
            return edges
        nodes = sorted(leftover)
        if not any(
            (a, b) not in edges for i, a in enumerate(nodes) for b in nodes[i + 1 :]
        ):
            return None  # no suitable pair remains
        stubs = [node for node, c in leftover.items() for _ in range(c)]
    return edges


def random_regular_graph(u, r_deg, seed, spectral_bound=None, restart_cap=1000,
                         resample_cap=50):
    """Random ``r_deg``-regular simple graph on ``u`` vertices by the pairing
    model, restarting on unavoidable multi-edges or self-loops.

    With ``spectral_bound`` set, graphs are resampled until
    ``max_{i>=2} |lambda_i(A)| <= spectral_bound``.
    """
    if (u * r_deg) % 2 != 0:
        raise ParameterError(f"u*r_deg = {u * r_deg} must be even")
    if not 0 < r_deg < u:
        raise ParameterError(f"degree {r_deg} must satisfy 0 < r_deg < u={u}")
    for salt in range(resample_cap):
        rng = np.random.Generator(np.random.Philox(key=[int(seed) % (1 << 64), salt]))
        edges = None
        restarts = 0
        while edges is None:
            restarts += 1
            if restarts > restart_cap:
                raise ConstructionError(
                    f"pairing model exceeded the restart cap ({restart_cap})"
                )
            edges = _pairing_attempt(u, r_deg, rng)
        A = np.zeros((u, u))
        rows = np.fromiter((e[0] for e in edges), dtype=np.intp, count=len(edges))
        cols = np.fromiter((e[1] for e in edges), dtype=np.intp, count=len(edges))
        A[rows, cols] = 1.0
        A[cols, rows] = 1.0
        graph = RegularGraph(u=u, r_deg=r_deg, adjacency=A)
        if spectral_bound is None:
            return graph
        lo, second, _ = linalg.spectrum_edges(A)
        if max(abs(lo), abs(second)) <= spectral_bound:
            return graph
    raise ConstructionError(
        f"no graph met the spectral bound {spectral_bound} in {resample_cap} resamples"
    )


# ---------------------------------------------------------------------------
# covariance thresholding counterexample


def build_covthresh_instance(s, u, tau, seed, enforce_sampled_bounds=True):
    """Two-block covariance that covariance thresholding provably mis-ranks.

    Block S carries the planted ``v = 1_s / sqrt(s)``; block U hides an
    expander whose thresholded operator norm overtakes the signal.

    The default parameter window ``4s + 8/tau <= u <= 1/(144 tau^2)`` is the
    one under which the sampled-data failure argument goes through; it forces
    ``u`` into the ten-thousands.  With ``enforce_sampled_bounds=False`` only
    population-level feasibility is demanded and the construction is gated by
    its certificates instead (instances are flagged ``population-bounds``).
    """
    if not tau > 0:
        raise ParameterError("tau must be positive")
    if s < 1:
        raise ParameterError("s must be >= 1")
    flags = []
    if enforce_sampled_bounds:
        lower = 4 * s + 8.0 / tau
        upper = 1.0 / (144.0 * tau * tau)
        if u < lower:
            raise ParameterError(
                f"precondition violated: 4s + 8/tau = {lower:.6g} <= u (got u={u})"
            )
        if u > upper:
            raise ParameterError(
                f"precondition violated: u <= 1/(144 tau^2) = {upper:.6g} (got u={u})"
            )
    else:
        if u < 4 * s + 4:
            raise ParameterError(f"u={u} too small against s={s}")
        flags.append("population-bounds")

    r_deg = int(np.floor((u - 1) / 4.0 + 0.5))
    if (u * r_deg) % 2 != 0:
        r_deg += 1  # keep the pairing model feasible; p is recorded as realised
    p = r_deg / (u - 1.0)

    graph = random_regular_graph(u, r_deg, seed, spectral_bound=3.0 * np.sqrt(r_deg))
    A = graph.adjacency
    H = A - p * (np.ones((u, u)) - np.eye(u))

    d = s + u
    v = np.zeros(d)
    v[:s] = 1.0 / np.sqrt(s)
    sigma = np.zeros((d, d))
    sigma[:s, :s] = 0.5 * (np.eye(s) + np.outer(v[:s], v[:s]))
    sigma[s:, s:] = 0.5 * (np.eye(u) + 3.0 * tau * H)
    sigma = linalg.symmetrize(sigma)

    certs = {}
    _cert(certs, "h_rowsum", np.linalg.norm(H @ np.ones(u)), 1e-10, "le")
    _cert(certs, "h_opnorm", linalg.opnorm(linalg.symmetrize(H)), 2.0 * np.sqrt(u), "le")
    a_lo, a_second, a_top = linalg.spectrum_edges(A)
    _cert(certs, "a_top_eigenvalue", abs(a_top - r_deg), 1e-8, "le")
    _cert(certs, "a_second_eigenvalue", max(abs(a_lo), abs(a_second)),
          3.0 * np.sqrt(r_deg), "le")
    u_lo, _, u_hi = linalg.spectrum_edges(linalg.symmetrize(sigma[s:, s:]))
    _cert(certs, "u_block_eig_min", u_lo, 0.25, "ge")
    _cert(certs, "u_block_eig_max", u_hi, 0.75, "le")
    sig_lo, sig_second, sig_top = linalg.spectrum_edges(sigma)
    _cert(certs, "psd_min_eigenvalue", sig_lo, -PSD_TOL, "ge")
    _cert(certs, "eig_ratio", sig_top / sig_second, 4.0 / 3.0, "ge")

    # off-diagonal U-block entries against the realised-p values and the
    # nominal p = 1/4 values (the gap between the two is pure degree rounding)
    hi = 1.5 * tau * (1.0 - p)
    lo = -1.5 * tau * p
    expected = np.where(A > 0, hi, lo)
    np.fill_diagonal(expected, 0.0)
    actual = sigma[s:, s:].copy()
    np.fill_diagonal(actual, 0.0)
    _cert(certs, "offdiag_values_realized", np.abs(actual - expected).max(), 1e-12, "le")
    nominal = np.where(A > 0, 9.0 * tau / 8.0, -3.0 * tau / 8.0)
    np.fill_diagonal(nominal, 0.0)
    rounding = 1.5 * tau * abs(p - 0.25) + 1e-12
    _cert(certs, "offdiag_values_nominal", np.abs(actual - nominal).max(), rounding, "le")

    thr = linalg.threshold_entries(sigma, tau)
    thr_u = linalg.opnorm(linalg.symmetrize(thr[s:, s:]))
    thr_s = linalg.opnorm(linalg.symmetrize(thr[:s, :s]))
    _cert(certs, "thresholded_u_opnorm", thr_u, 0.25 + tau * r_deg, "ge")
    _cert(certs, "thresholded_s_opnorm", thr_s, 1.5 + s * tau, "le")
    # the lemma's conclusion at population level: thresholding flips the
    # leading block from S to U
    _cert(certs, "thresholded_flip", thr_u - thr_s, 1e-12, "ge")
    _require_certificates(certs, "covthresh")

    gamma = 1.0 - sig_second / sig_top
    inst = PlantedInstance(sigma=sigma, v_true=v, s=s, gamma=gamma, label="covthresh")
    params = {"s": float(s), "u": float(u), "tau": float(tau), "seed": float(seed),
              "r_deg": float(r_deg), "p_realized": float(p)}
    return CounterexampleInstance(instance=inst, family="covthresh", params=params,
                                  certificates=certs, flags=flags)


# ---------------------------------------------------------------------------
# greedy correlation counterexample


def build_greedycorr_instance(s, lam1=1.0, lam2=0.9, d=None):
    """Planted vector whose squared-covariance row correlations all point at
    decoy coordinates.

    The core construction lives on ``2s - 1`` coordinates; a larger ``d``
    pads the remainder with isotropic variance ``lam2`` (the embedding used
    by the sweep experiments).
    """
    if s < 2:
        raise ParameterError("s must be >= 2")
    if not 0 < lam2 < lam1:
        raise ParameterError("need 0 < lam2 < lam1")
    core = 2 * s - 1
    d = core if d is None else int(d)
    if d < core:
        raise ParameterError(f"d={d} smaller than the core dimension {core}")

    basis = linalg.good_ortho_basis(s)
    v = np.zeros(d)
    v[:s] = basis[:, 0]
    U = np.zeros((d, s - 1))
    for r in range(1, s):
        U[:s, r - 1] = basis[:, r] / np.sqrt(2.0)
        U[s + r - 1, r - 1] = 1.0 / np.sqrt(2.0)

    sigma = lam1 * np.outer(v, v) + lam2 * (U @ U.T)
    if d > core:
        pad = np.arange(core, d)
        sigma[pad, pad] += lam2
    sigma = linalg.symmetrize(sigma)

    certs = {}
    frame = np.column_stack([v, U])
    gram = frame.T @ frame
    _cert(certs, "gram_identity", np.abs(gram - np.eye(s)).max(), 1e-10, "le")
    vals = np.sort(np.linalg.eigvalsh(sigma))
    expected = np.sort(np.concatenate([
        [lam1], np.full(s - 1 + (d - core), lam2), np.zeros(s - 1)]))
    _cert(certs, "eigenvalues", np.abs(vals - expected).max(), 1e-8, "le")
    _cert(certs, "psd_min_eigenvalue", vals[0], -PSD_TOL, "ge")

    sq_row = sigma @ sigma[:, 0]
    true_max = np.abs(sq_row[1:s]).max()
    decoy_min = np.abs(sq_row[s:core]).min()
    _cert(certs, "true_support_corr", true_max, (lam1**2 - lam2**2 / 2.0) / s + 1e-12, "le")
    _cert(certs, "decoy_corr", decoy_min, lam2**2 / (2.0 * np.sqrt(s)) - 1e-12, "ge")
    if lam1 == 1.0 and lam2 == 0.9:
        _cert(certs, "true_support_corr_lemma", true_max, 1.0 / s, "le")
        _cert(certs, "decoy_corr_lemma", decoy_min, 0.4 / np.sqrt(s), "ge")
    _require_certificates(certs, "greedycorr")

    # structured square root: dense on the core block, sqrt(lam2) outside
    w, Vc = np.linalg.eigh(sigma[:core, :core])
    w = np.clip(w, 0.0, None)
    A_core = linalg.symmetrize((Vc * np.sqrt(w)) @ Vc.T)
    g = np.concatenate([np.zeros(core), np.full(d - core, np.sqrt(lam2))])
    embed = np.zeros((d, core))
    embed[:core] = np.eye(core)
    sqrt = SqrtForm(diag=g, U=embed, A=A_core)

    inst = PlantedInstance(sigma=sigma, v_true=v, s=s, gamma=1.0 - lam2 / lam1,
                           label="greedycorr", sqrt=sqrt)
    params = {"s": float(s), "lam1": float(lam1), "lam2": float(lam2), "d": float(d)}
    return CounterexampleInstance(instance=inst, family="greedycorr", params=params,
                                  certificates=certs)


# ---------------------------------------------------------------------------
# diagonal thresholding stress instance (reconstruction)


def build_diagthresh_instance(d, s, lam1, lam2, lam3, lam4):
    """Configurable instance whose top-s sample variances exclude supp(v).

    This is a good-faith reconstruction gated by its own certificate (the
    decoy diagonal must strictly dominate every on-support diagonal); it is
    never claimed to match the externally cited construction, and every
    instance is flagged ``reconstruction``.
    """
    if not (lam1 > lam2 >= lam3 >= lam4 > 0):
        raise ParameterError("need lam1 > lam2 >= lam3 >= lam4 > 0")
    if d < 3 * s:
        raise ParameterError(f"need d >= 3s = {3 * s} to place decoy groups, got d={d}")
    margin = lam2 - lam1 / s
    if margin <= 0:
        raise ConstructionError(
            f"certificate non-positive: min decoy diag - max support diag = {margin:.6g};"
            " these parameters cannot fool diagonal thresholding"
        )
    v = np.zeros(d)
    v[:s] = 1.0 / np.sqrt(s)
    diag = np.concatenate([
        np.zeros(s),
        np.full(s, lam2),
        np.full(s, lam3),
        np.full(d - 3 * s, lam4),
    ])
    sigma = linalg.symmetrize(np.diag(diag) + lam1 * np.outer(v, v))

    certs = {}
    _cert(certs, "decoy_margin", margin, 0.0, "ge")
    vals = np.linalg.eigvalsh(sigma)
    _cert(certs, "psd_min_eigenvalue", vals[0], -PSD_TOL, "ge")
    _cert(certs, "top_eigenvalue", abs(vals[-1] - lam1), 1e-8, "le")
    _require_certificates(certs, "diagthresh")

    flags = ["reconstruction"]
    if linalg.eig_multiplicity_flag(linalg.restrict(sigma, np.arange(s, 2 * s))):
        flags.append("eig-multiplicity")

    sqrt = SqrtForm(diag=np.sqrt(diag), U=v.reshape(d, 1), A=np.array([[np.sqrt(lam1)]]))
    inst = PlantedInstance(sigma=sigma, v_true=v, s=s, gamma=1.0 - lam2 / lam1,
                           label="diagthresh", sqrt=sqrt)
    params = {"d": float(d), "s": float(s), "lam1": float(lam1), "lam2": float(lam2),
              "lam3": float(lam3), "lam4": float(lam4)}
    return CounterexampleInstance(instance=inst, family="diagthresh", params=params,
                                  certificates=certs, flags=flags)


# ---------------------------------------------------------------------------
# deflation barrier


def build_deflation_barrier(d, delta, gamma):
    """The rank-3 covariance whose deflation by a 3-sparse, well-aligned
    direction produces a fully dense residual top eigenvector.

    Returns ``(instance, u, C)`` where ``u`` is the deflation direction and
    ``C`` the 2x2 compression of the deflated matrix on its invariant plane.
    """
    if d < 4:
        raise ParameterError("d must be >= 4")
    if not (0 < delta < 1 and 0 < gamma < 1):
        raise ParameterError("delta and gamma must lie in (0, 1)")
    e = np.eye(d)
    v1 = (e[0] + e[1]) / np.sqrt(2.0)
    v2 = (e[0] - e[1]) / np.sqrt(2.0)
    q = e[3:].sum(axis=0) / np.sqrt(d - 3.0)
    w = (e[2] + q) / np.sqrt(2.0)
    sigma = linalg.symmetrize(
        (1.0 / delta) * np.outer(v1, v1) + np.outer(v2, v2) + (1.0 - gamma) * np.outer(w, w)
    )
    u = np.sqrt(1.0 - delta) * v1 + np.sqrt(delta) * e[2]
    C = np.array([
        [1.0 + (1.0 - gamma) * (1.0 - delta) / 2.0, -(1.0 - gamma) * np.sqrt(1.0 - delta) / 2.0],
        [-(1.0 - gamma) * np.sqrt(1.0 - delta) / 2.0, (1.0 - gamma) / 2.0],
    ])

    certs = {}
    _cert(certs, "u_overlap", abs(float(u @ v1) ** 2 - (1.0 - delta)), 1e-12, "le")
    vals = np.sort(np.linalg.eigvalsh(sigma))
    expected = np.sort(np.concatenate([[1.0 / delta, 1.0, 1.0 - gamma], np.zeros(d - 3)]))
    _cert(certs, "eigenvalues", np.abs(vals - expected).max(), 1e-8, "le")
    _cert(certs, "psd_min_eigenvalue", vals[0], -PSD_TOL, "ge")
    _require_certificates(certs, "barrier")

    inst = PlantedInstance(sigma=sigma, v_true=np.column_stack([v1, v2]), s=2,
                           gamma=gamma, label="barrier")
    params = {"d": float(d), "delta": float(delta), "gamma": float(gamma)}
    ce = CounterexampleInstance(instance=inst, family="barrier", params=params,
                                certificates=certs)
    return ce, u, C


@dataclass
class BarrierReport:
    nnz: int
    eigenvalue: float
    lam1_C: float
    checks: dict

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def failed(self):
        return [c.name for c in self.checks.values() if not c.passed]

    def describe(self):
        lines = [f"deflation barrier: nnz = {self.nnz}, eigenvalue = {self.eigenvalue:.12g}"]
        lines += [c.describe() for c in self.checks.values()]
        return "\n".join(lines)


def verify_barrier(inst, u, C, coord_tol=1e-8):
    """Check the dense-eigenvector claims on a built barrier instance."""
    sigma = inst.sigma
    d = sigma.shape[0]
    u = linalg.as_vector(u, d)
    P = linalg.symmetrize(np.eye(d) - np.outer(u, u))
    M = linalg.symmetrize(P @ sigma @ P)
    pair = linalg.eig_top_m(M, 1)[0]
    v2 = inst.v_true[:, 1]
    lam_C = float(np.linalg.eigvalsh(linalg.symmetrize(C))[-1])
    checks = {}
    _cert(checks, "dense_support_min_coord", np.abs(pair.vector).min(), coord_tol, "ge")
    _cert(checks, "eigenvalue_above_one", pair.value, 1.0, "ge")
    _cert(checks, "eigenvalue_matches_compression", abs(pair.value - lam_C), 1e-10, "le")
    _cert(checks, "v2_fixed_point", np.linalg.norm(M @ v2 - v2), 1e-10, "le")
    nnz = int((np.abs(pair.vector) > coord_tol).sum())
    return BarrierReport(nnz=nnz, eigenvalue=pair.value, lam1_C=lam_C, checks=checks)


# ---------------------------------------------------------------------------
# serialization: magic 'SPCX', family, params, dense sigma (little-endian)


def write_spcx(path, family, params, sigma):
    sigma = np.asarray(sigma, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(INSTANCE_MAGIC)
        fam = family.encode("utf-8")
        fh.write(struct.pack("<I", len(fam)))
        fh.write(fam)
        items = sorted(params.items())
        fh.write(struct.pack("<I", len(items)))
        for key, value in items:
            kb = key.encode("utf-8")
            fh.write(struct.pack("<I", len(kb)))
            fh.write(kb)
            fh.write(struct.pack("<d", float(value)))
        fh.write(struct.pack("<I", sigma.shape[0]))
        fh.write(sigma.astype("<f8").tobytes(order="C"))


def save_instance(ce, path):
    write_spcx(path, ce.family, ce.params, ce.sigma)


def load_instance(path):
    """Read back ``(family, params, sigma)`` from the SPCX format."""
    with open(path, "rb") as fh:
        if fh.read(4) != INSTANCE_MAGIC:
            raise FormatError("bad magic, expected SPCX")
        (fam_len,) = struct.unpack("<I", fh.read(4))
        family = fh.read(fam_len).decode("utf-8")
        (n_params,) = struct.unpack("<I", fh.read(4))
        params = {}
        for _ in range(n_params):
            (klen,) = struct.unpack("<I", fh.read(4))
            key = fh.read(klen).decode("utf-8")
            (value,) = struct.unpack("<d", fh.read(8))
            params[key] = value
        (d,) = struct.unpack("<I", fh.read(4))
        body = fh.read(8 * d * d)
        if len(body) != 8 * d * d:
            raise FormatError("truncated SPCX body")
        sigma = np.frombuffer(body, dtype="<f8").reshape(d, d).copy()
    return family, params, sigma


_BUILDERS = {
    "covthresh": build_covthresh_instance,
    "greedycorr": build_greedycorr_instance,
    "diagthresh": build_diagthresh_instance,
}


def build_family(family, **params):
    """Dispatch a counterexample family by name."""
    if family == "barrier":
        return build_deflation_barrier(**params)
    try:
        builder = _BUILDERS[family]
    except KeyError:
        raise ParameterError(f"unknown counterexample family {family!r}") from None
    return builder(**params)
