"""Experiment harness: scaling sweeps, runtime-accuracy trajectories,
counterexample sweeps, and the full-vs-disjoint ablation.

Every sweep point is an independent job keyed by (parameter point, seed);
jobs may run concurrently but records are collected in a deterministic order
and BLAS is pinned to one thread inside each job, so the output never depends
on ``--threads``.  Wall-clock timing is off by default (``timing=wall`` opts
in) which keeps records byte-reproducible.
"""

from __future__ import annotations

import hashlib
import itertools
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from threadpoolctl import threadpool_limits

from . import linalg
from .counterexamples import (
    build_covthresh_instance,
    build_diagthresh_instance,
    build_greedycorr_instance,
)
from .errors import ParameterError
from .models import DenseCov, build_spiked_general, sqrt_form_of, streamed_gram
from .records import ExperimentRecord
from .solvers import (
    RtpmConfig,
    cov_thresh,
    diag_thresh,
    greedy_corr,
    rtpm_trajectory,
    rtpm_with_report,
)

COUNTEREXAMPLE_FAMILIES = ("covthresh", "greedycorr", "diagthresh")
ABOVE_GRID = "above-grid"


def mix_seed(*parts):
    """Deterministic 63-bit seed derived from heterogeneous parts."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def run_jobs(jobs, threads):
    """Run zero-arg jobs, preserving order; BLAS pinned inside every job."""

    def pinned(job):
        with threadpool_limits(limits=1):
            return job()

    if threads <= 1:
        return [pinned(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(pinned, job) for job in jobs]
        return [f.result() for f in futures]


class _Clock:
    """Measures wall time only when the config opts in."""

    def __init__(self, enabled):
        self.enabled = enabled

    def time_ms(self, fn):
        if not self.enabled:
            return fn(), 0.0
        tic = time.perf_counter()
        out = fn()
        return out, (time.perf_counter() - tic) * 1e3


def _timing_enabled(cfg):
    mode = cfg.get("timing", "off")
    if mode not in ("off", "wall"):
        raise ParameterError(f"timing must be 'off' or 'wall', got {mode!r}")
    return mode == "wall"


def _seeds(cfg):
    seeds = cfg.get_list("seed")
    if not seeds:
        raise ParameterError("config must list at least one seed")
    return seeds


# ---------------------------------------------------------------------------
# instance construction from config-style parameters


def make_instance(family, d=None, s=None, gamma=None, instance_seed=0, u=None,
                  tau=None, lam1=None, lam2=None, lam3=None, lam4=None):
    """Build the planted instance a sweep point refers to.

    Returns ``(PlantedInstance, extra_flags)``.
    """
    if family == "spiked":
        if d is None or s is None:
            raise ParameterError("spiked family needs d and s")
        gamma = 0.1 if gamma is None else gamma
        inst = build_spiked_general(d, s, gamma, seed=instance_seed)
        return inst, ()
    if family == "greedycorr":
        if s is None:
            raise ParameterError("greedycorr family needs s")
        lam1 = 1.0 if lam1 is None else lam1
        if lam2 is None:
            lam2 = (1.0 - gamma) * lam1 if gamma is not None else 0.9
        ce = build_greedycorr_instance(s, lam1=lam1, lam2=lam2, d=d)
        return ce.instance, tuple(ce.flags)
    if family == "diagthresh":
        if d is None or s is None:
            raise ParameterError("diagthresh family needs d and s")
        lam1 = 1.0 if lam1 is None else lam1
        lam2 = 0.5 if lam2 is None else lam2
        lam3 = lam2 / 2.1 if lam3 is None else lam3
        lam4 = lam2 / 2.2 if lam4 is None else lam4
        ce = build_diagthresh_instance(d, s, lam1, lam2, lam3, lam4)
        return ce.instance, tuple(ce.flags)
    if family == "covthresh":
        if s is None or u is None or tau is None:
            raise ParameterError("covthresh family needs s, u, and tau")
        ce = build_covthresh_instance(s, u, tau, seed=instance_seed,
                                      enforce_sampled_bounds=False)
        return ce.instance, tuple(ce.flags)
    raise ParameterError(f"unknown instance family {family!r}")


def _heuristic(family, cov, s, tau=None, i_star=0):
    if family == "diagthresh":
        return diag_thresh(cov, s)
    if family == "covthresh":
        return cov_thresh(cov, tau)
    if family == "greedycorr":
        return greedy_corr(cov, s, i_star)
    raise ParameterError(f"no targeted heuristic for family {family!r}")


_HEURISTIC_NAMES = {"diagthresh": "diag_thresh", "covthresh": "cov_thresh",
                    "greedycorr": "greedy_corr"}


# ---------------------------------------------------------------------------
# scaling-law sweeps


def run_scaling(cfg, threads=1):
    """n_scale sweep: smallest grid n at which RTPM reaches the target error.

    Varies whichever of s / gamma / delta the config lists; RTPM runs in full
    mode with the defaults r = 10 s and T = 100 unless overridden.  Emits one
    ``sin2`` record per (point, seed, n) actually run plus one ``n_scale``
    record per (point, seed) whose ``n`` column carries the found sample size
    (flag ``above-grid`` when the grid is exhausted).
    """
    family = cfg.get("family", "spiked")
    if family not in ("spiked", "greedycorr"):
        raise ParameterError(f"scaling sweep supports spiked/greedycorr, got {family!r}")
    d = cfg.require("d")
    n_grid = cfg.n_values()
    if not n_grid or sorted(n_grid) != n_grid or len(set(n_grid)) != len(n_grid):
        raise ParameterError("n grid must be strictly increasing")
    seeds = _seeds(cfg)
    s_list = cfg.get_list("s")
    if not s_list:
        raise ParameterError("scaling sweep needs at least one s")
    gamma_list = cfg.get_list("gamma", [0.1])
    delta_list = cfg.get_list("delta", [0.1])
    T = cfg.get("T", 100)
    r_override = cfg.get("r")
    timing = _timing_enabled(cfg)

    points = list(itertools.product(s_list, gamma_list, delta_list))

    def job(point, seed):
        s, gamma, delta = point
        r = r_override if r_override is not None else 10 * s
        inst_seed = mix_seed("scaling", family, d, s, gamma, seed)
        inst, flags = make_instance(family, d=d, s=s, gamma=gamma,
                                    instance_seed=inst_seed)
        sqrt = inst.sqrt if inst.sqrt is not None else sqrt_form_of(inst.sigma)
        clock = _Clock(timing)
        cfg_rtpm = RtpmConfig(r=min(r, d), T=T, mode="full")
        recs = []
        row_seed = mix_seed(inst_seed, "rows")
        gram = np.zeros((d, d))
        done = 0
        found = None
        for n in n_grid:
            gram = gram + streamed_gram(sqrt, row_seed, done, n)
            done = n
            cov = DenseCov(linalg.symmetrize(gram / n))
            report, ms = clock.time_ms(lambda: rtpm_with_report(cov, cfg_rtpm))
            err = linalg.sin2_angle(report.candidate.values, inst.v_true)
            recs.append(ExperimentRecord(
                algorithm="rtpm", family=family, d=d, s=s, gamma=gamma, delta=delta,
                n=n, seed=seed, mode="full", r=cfg_rtpm.r, T=T, metric="sin2",
                value=err, wall_ms=ms, iterations_used=report.iterations_used,
                flags=flags))
            if err <= delta:
                found = (n, err)
                break
        if found is None:
            recs.append(ExperimentRecord(
                algorithm="rtpm", family=family, d=d, s=s, gamma=gamma, delta=delta,
                n=n_grid[-1], seed=seed, mode="full", r=cfg_rtpm.r, T=T,
                metric="n_scale", value=recs[-1].value, iterations_used=T,
                flags=flags + (ABOVE_GRID,)))
        else:
            recs.append(ExperimentRecord(
                algorithm="rtpm", family=family, d=d, s=s, gamma=gamma, delta=delta,
                n=found[0], seed=seed, mode="full", r=cfg_rtpm.r, T=T,
                metric="n_scale", value=found[1], iterations_used=T, flags=flags))
        return recs

    jobs = [
        (lambda point=point, seed=seed: job(point, seed))
        for point in points for seed in seeds
    ]
    out = []
    for chunk in run_jobs(jobs, threads):
        out.extend(chunk)
    return out


def nscale_table(records):
    """Median/min/max n_scale over seeds per parameter point.

    Above-grid sentinels enter the statistics as +inf.
    """
    groups = {}
    for rec in records:
        if rec.metric != "n_scale":
            continue
        key = (rec.family, rec.d, rec.s, rec.gamma, rec.delta)
        n = float("inf") if ABOVE_GRID in rec.flags else float(rec.n)
        groups.setdefault(key, []).append(n)
    table = {}
    for key, values in groups.items():
        arr = sorted(values)
        table[key] = {
            "median": float(np.median(arr)),
            "min": arr[0],
            "max": arr[-1],
            "seeds": len(arr),
        }
    return table


# ---------------------------------------------------------------------------
# runtime-accuracy trajectories


def run_runtime_accuracy(cfg, threads=1):
    """Correlation-squared versus cumulative solver runtime.

    Tunable methods (RTPM) emit one point per iteration checkpoint in the
    config's T list; one-shot baselines emit a single point each.
    """
    family = cfg.get("family", "spiked")
    d = cfg.require("d")
    s = cfg.require("s")
    n = cfg.require("n")
    gamma = cfg.get("gamma")
    algorithms = cfg.get_list("algorithm", ["rtpm"])
    checkpoints = [t for t in cfg.get_list("T", [50]) if t >= 1]
    r = cfg.get("r", s)
    tau = cfg.get("tau")
    i_star = cfg.get("i_star", 0)
    seeds = _seeds(cfg)
    timing = _timing_enabled(cfg)

    def job(seed):
        inst_seed = mix_seed("runtime", family, d, s, gamma, seed)
        inst, flags = make_instance(family, d=d, s=s, gamma=gamma,
                                    instance_seed=inst_seed,
                                    u=cfg.get("u"), tau=tau,
                                    lam1=cfg.get("lam1"), lam2=cfg.get("lam2"),
                                    lam3=cfg.get("lam3"), lam4=cfg.get("lam4"))
        ds = inst.sample(n, mix_seed(inst_seed, "rows"))
        cov = linalg.symmetrize(ds.rows.T @ ds.rows / n)
        clock = _Clock(timing)
        recs = []
        common = dict(family=family, d=inst.d, s=s, gamma=gamma, n=n, seed=seed)
        for alg in algorithms:
            if alg == "rtpm":
                if not checkpoints:
                    recs.append(ExperimentRecord(
                        algorithm="rtpm", metric="correlation2", value=0.0,
                        mode="full", r=r, T=0, flags=("empty-trajectory",), **common))
                    continue
                traj = rtpm_trajectory(ds, RtpmConfig(r=min(r, inst.d), T=max(checkpoints)),
                                       checkpoints)
                for t, elapsed, cand in traj:
                    err = linalg.sin2_angle(cand.values, inst.v_true)
                    recs.append(ExperimentRecord(
                        algorithm="rtpm", metric="correlation2", value=1.0 - err,
                        mode="full", r=min(r, inst.d), T=t,
                        wall_ms=elapsed * 1e3 if timing else 0.0,
                        iterations_used=t, flags=flags, **common))
            elif alg in _HEURISTIC_NAMES.values():
                fam = {v: k for k, v in _HEURISTIC_NAMES.items()}[alg]
                cand, ms = clock.time_ms(
                    lambda fam=fam: _heuristic(fam, cov, s, tau=tau, i_star=i_star))
                err = linalg.sin2_angle(cand.values, inst.v_true)
                recs.append(ExperimentRecord(
                    algorithm=alg, metric="correlation2", value=1.0 - err,
                    mode="", wall_ms=ms, flags=flags, **common))
            else:
                raise ParameterError(f"unknown algorithm {alg!r}")
        return recs

    out = []
    for chunk in run_jobs([lambda seed=seed: job(seed) for seed in seeds], threads):
        out.extend(chunk)
    return out


# ---------------------------------------------------------------------------
# counterexample sweeps


def run_counterexample_sweep(cfg, threads=1):
    """Targeted heuristic versus RTPM across the sample-size grid.

    ``population=1`` adds deterministic n=0 rows evaluated on the population
    covariance itself.
    """
    family = cfg.require("family")
    if family not in COUNTEREXAMPLE_FAMILIES:
        raise ParameterError(f"family must be one of {COUNTEREXAMPLE_FAMILIES}, got {family!r}")
    s = cfg.require("s")
    d = cfg.get("d")
    gamma = cfg.get("gamma")
    tau = cfg.get("tau")
    i_star = cfg.get("i_star", 0)
    seeds = _seeds(cfg)
    n_grid = cfg.n_values() or []
    include_population = bool(cfg.get("population", 0))
    if not n_grid and not include_population:
        raise ParameterError("counterexample sweep needs an n grid or population=1")
    T = cfg.get("T", 40)
    timing = _timing_enabled(cfg)

    def build(instance_seed):
        return make_instance(family, d=d, s=s, gamma=gamma, instance_seed=instance_seed,
                             u=cfg.get("u"), tau=tau, lam1=cfg.get("lam1"),
                             lam2=cfg.get("lam2"), lam3=cfg.get("lam3"),
                             lam4=cfg.get("lam4"))

    def rtpm_cfg(dim):
        r = cfg.get("r", 2 * s)
        return RtpmConfig(r=min(r, dim), T=T, mode=cfg.get("mode", "full"))

    def offline_job():
        inst, flags = build(mix_seed("cx", family, s, "population"))
        cov = inst.sigma
        recs = []
        cand = _heuristic(family, cov, s, tau=tau, i_star=i_star)
        recs.append(ExperimentRecord(
            algorithm=_HEURISTIC_NAMES[family], family=family, d=inst.d, s=s,
            gamma=gamma, n=0, mode="", metric="sin2",
            value=linalg.sin2_angle(cand.values, inst.v_true),
            flags=flags + ("population",)))
        rc = rtpm_cfg(inst.d)
        rep = rtpm_with_report(DenseCov(cov), rc)
        recs.append(ExperimentRecord(
            algorithm="rtpm", family=family, d=inst.d, s=s, gamma=gamma, n=0,
            mode=rc.mode, r=rc.r, T=rc.T, metric="sin2",
            value=linalg.sin2_angle(rep.candidate.values, inst.v_true),
            iterations_used=rep.iterations_used, flags=flags + ("population",)))
        return recs

    def sampled_job(n, seed):
        inst_seed = mix_seed("cx", family, s, seed)
        inst, flags = build(inst_seed)
        ds = inst.sample(n, mix_seed(inst_seed, "rows", n))
        cov = linalg.symmetrize(ds.rows.T @ ds.rows / n)
        clock = _Clock(timing)
        recs = []
        cand, ms = clock.time_ms(lambda: _heuristic(family, cov, s, tau=tau, i_star=i_star))
        recs.append(ExperimentRecord(
            algorithm=_HEURISTIC_NAMES[family], family=family, d=inst.d, s=s,
            gamma=gamma, n=n, seed=seed, mode="", metric="sin2",
            value=linalg.sin2_angle(cand.values, inst.v_true), wall_ms=ms, flags=flags))
        rc = rtpm_cfg(inst.d)
        rep, ms = clock.time_ms(lambda: rtpm_with_report(ds, rc))
        recs.append(ExperimentRecord(
            algorithm="rtpm", family=family, d=inst.d, s=s, gamma=gamma, n=n,
            seed=seed, mode=rc.mode, r=rc.r, T=rc.T, metric="sin2",
            value=linalg.sin2_angle(rep.candidate.values, inst.v_true), wall_ms=ms,
            iterations_used=rep.iterations_used, flags=flags))
        return recs

    jobs = []
    if include_population:
        jobs.append(offline_job)
    jobs += [lambda n=n, seed=seed: sampled_job(n, seed) for n in n_grid for seed in seeds]
    out = []
    for chunk in run_jobs(jobs, threads):
        out.extend(chunk)
    return out


# ---------------------------------------------------------------------------
# full-vs-disjoint ablation


def run_ablation(cfg, threads=1):
    """Identical RTPM in full and disjoint modes across an iteration grid."""
    family = cfg.get("family", "greedycorr")
    d = cfg.require("d")
    s = cfg.require("s")
    n = cfg.require("n")
    gamma = cfg.get("gamma")
    T_list = cfg.get_list("T")
    if not T_list:
        raise ParameterError("ablation needs a T list")
    if n < max(T_list):
        raise ParameterError(f"n={n} smaller than max T={max(T_list)}")
    r = cfg.get("r", 5 * s)
    seeds = _seeds(cfg)
    timing = _timing_enabled(cfg)

    def job(seed):
        inst_seed = mix_seed("ablate", family, d, s, gamma, seed)
        inst, flags = make_instance(family, d=d, s=s, gamma=gamma,
                                    instance_seed=inst_seed,
                                    lam1=cfg.get("lam1"), lam2=cfg.get("lam2"))
        ds = inst.sample(n, mix_seed(inst_seed, "rows"))
        clock = _Clock(timing)
        recs = []
        for T in T_list:
            B = n // T
            for mode in ("full", "disjoint"):
                rc = RtpmConfig(r=min(r, inst.d), T=T, mode=mode)
                rep, ms = clock.time_ms(lambda rc=rc: rtpm_with_report(ds, rc))
                mode_flags = flags if mode == "full" else flags + (f"samples-used={B * T}",)
                recs.append(ExperimentRecord(
                    algorithm="rtpm", family=family, d=inst.d, s=s, gamma=gamma,
                    n=n, seed=seed, mode=mode, r=rc.r, T=T, metric="sin2",
                    value=linalg.sin2_angle(rep.candidate.values, inst.v_true),
                    wall_ms=ms, iterations_used=rep.iterations_used, flags=mode_flags))
        return recs

    out = []
    for chunk in run_jobs([lambda seed=seed: job(seed) for seed in seeds], threads):
        out.extend(chunk)
    return out
