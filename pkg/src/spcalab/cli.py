"""Command-line entry point.

Subcommands: ``gen`` (instances/datasets), ``run`` (runtime-accuracy
trajectories), ``sweep`` (scaling or counterexample sweeps), ``ablate``
(full-vs-disjoint), ``text`` (bag-of-words pipeline), ``verify``
(counterexample certificate suites).

Exit codes: 0 success, 1 parameter error, 2 numerical or construction error,
3 I/O or format error.  Every run writes ``records.csv``, ``manifest.txt``
(a re-runnable resolved config), and ``summary.json`` under the output
directory.  ``--threads`` (or ``SPCA_THREADS``) never changes output values.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import counterexamples as cx
from . import harness, linalg, solvers, textdata
from .config import Config
from .errors import (
    ConstructionError,
    FormatError,
    NumericalError,
    ParameterError,
    SpcaError,
)
from .records import write_records


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def _build_parser():
    parser = _Parser(prog="spca", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="flat key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (last occurrence wins)")
        p.add_argument("--seed", type=int, default=None,
                       help="shorthand for --set seed=<N>")
        p.add_argument("--out", default="spca-out", help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: SPCA_THREADS or hardware count)")

    for name in ("gen", "run", "sweep", "ablate", "text"):
        common(sub.add_parser(name))

    ver = sub.add_parser("verify")
    common(ver, needs_config=False)
    ver.add_argument("--family", default="all",
                     choices=["all", "barrier", "covthresh", "greedycorr", "diagthresh"])
    ver.add_argument("--d", type=int, default=None)
    ver.add_argument("--s", type=int, default=None)
    ver.add_argument("--u", type=int, default=None)
    ver.add_argument("--tau", type=float, default=None)
    ver.add_argument("--delta", type=float, default=None)
    ver.add_argument("--gamma", type=float, default=None)
    return parser


def _threads(args):
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("SPCA_THREADS")
        n = int(env) if env else (os.cpu_count() or 1)
    if n < 1:
        raise ParameterError("--threads must be >= 1")
    return n


def _load_config(args):
    cfg = Config.from_file(args.config)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return cfg.apply_overrides(overrides)


def _finalize(outdir, subcommand, cfg, records, totals=None, report=None):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_records(outdir / "records.csv", records)
    (outdir / "manifest.txt").write_text(cfg.manifest_text(), encoding="utf-8")
    summary = {
        "subcommand": subcommand,
        "config_hash": cfg.content_hash(),
        "totals": dict(totals or {}, records=len(records)),
    }
    (outdir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if report is not None:
        (outdir / "report.txt").write_text(report + "\n", encoding="utf-8")
    return summary


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_gen(cfg, outdir, threads):
    family = cfg.require("family")
    seed = cfg.get("seed", 0)
    if family == "spiked":
        inst, _ = harness.make_instance(
            "spiked", d=cfg.require("d"), s=cfg.require("s"),
            gamma=cfg.get("gamma"), instance_seed=seed)
        params = {"d": float(inst.d), "s": float(inst.s), "gamma": float(inst.gamma),
                  "seed": float(seed)}
        cx.write_spcx(Path(outdir) / "instance.spcx", "spiked", params, inst.sigma)
    elif family in harness.COUNTEREXAMPLE_FAMILIES or family == "barrier":
        if family == "barrier":
            ce, _, _ = cx.build_deflation_barrier(
                cfg.require("d"), cfg.require("delta"), cfg.require("gamma"))
        elif family == "covthresh":
            ce = cx.build_covthresh_instance(
                cfg.require("s"), cfg.require("u"), cfg.require("tau"), seed=seed,
                enforce_sampled_bounds=not bool(cfg.get("population", 0)))
        elif family == "greedycorr":
            ce = cx.build_greedycorr_instance(
                cfg.require("s"), lam1=cfg.get("lam1", 1.0),
                lam2=cfg.get("lam2", 0.9), d=cfg.get("d"))
        else:
            ce = cx.build_diagthresh_instance(
                cfg.require("d"), cfg.require("s"), cfg.get("lam1", 1.0),
                cfg.get("lam2", 0.5), cfg.get("lam3", 0.5 / 2.1),
                cfg.get("lam4", 0.5 / 2.2))
        cx.save_instance(ce, Path(outdir) / "instance.spcx")
        inst = ce.instance
    else:
        raise ParameterError(f"unknown family {family!r}")
    totals = {"d": inst.d, "family": family}
    if cfg.has("n"):
        ds = inst.sample(cfg.require("n"), seed)
        ds.save(Path(outdir) / "dataset.spca")
        totals["n"] = ds.n
    return [], totals, None


def _cmd_verify(args, outdir):
    raw = {"family": args.family}
    defaults = {
        "barrier": {"d": 50, "delta": 0.1, "gamma": 0.2},
        "covthresh": {"s": 4, "u": 625, "tau": 0.0032, "seed": 1},
        "greedycorr": {"s": 16},
        "diagthresh": {"d": 1000, "s": 8},
    }
    for key in ("d", "s", "u", "tau", "delta", "gamma", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = str(value)

    def value(family, key):
        return float(raw[key]) if key in raw else defaults[family].get(key)

    families = [args.family] if args.family != "all" else list(defaults)
    lines, failures = [], []
    for family in families:
        if family == "barrier":
            ce, u, C = cx.build_deflation_barrier(int(value(family, "d")),
                                                  value(family, "delta"),
                                                  value(family, "gamma"))
            report = cx.verify_barrier(ce, u, C)
            lines.append(report.describe())
            checks = list(ce.certificates.values()) + list(report.checks.values())
        elif family == "covthresh":
            ce = cx.build_covthresh_instance(
                int(value(family, "s")), int(value(family, "u")), value(family, "tau"),
                seed=int(value(family, "seed") or 1), enforce_sampled_bounds=False)
            cand = solvers.cov_thresh(ce.sigma, value(family, "tau"))
            fooled = linalg.sin2_angle(cand.values, ce.v_true)
            s = int(value(family, "s"))
            lines.append(f"covthresh: population cov_thresh sin2 = {fooled:.12g}, "
                         f"S-block mass = {np.abs(cand.values[:s]).max():.3e}")
            checks = list(ce.certificates.values())
            checks.append(cx.Certificate("population_fooled_sin2", fooled, 1.0, "ge"))
        elif family == "greedycorr":
            s = int(value(family, "s"))
            ce = cx.build_greedycorr_instance(s)
            cand = solvers.greedy_corr(ce.sigma, s, 0)
            fooled = linalg.sin2_angle(cand.values, ce.v_true)
            lines.append(f"greedycorr: population greedy_corr sin2 = {fooled:.12g}")
            checks = list(ce.certificates.values())
            checks.append(cx.Certificate("population_fooled_sin2", fooled, 1.0 - 1.0 / s, "ge"))
        else:
            ce = cx.build_diagthresh_instance(int(value(family, "d")),
                                              int(value(family, "s")),
                                              1.0, 0.5, 0.5 / 2.1, 0.5 / 2.2)
            cand = solvers.diag_thresh(ce.sigma, int(value(family, "s")))
            fooled = linalg.sin2_angle(cand.values, ce.v_true)
            lines.append(f"diagthresh: population diag_thresh sin2 = {fooled:.12g} "
                         f"(flags: {', '.join(ce.flags)})")
            checks = list(ce.certificates.values())
            checks.append(cx.Certificate("population_fooled_sin2", fooled, 1.0, "ge"))
        lines.extend("  " + c.describe() for c in checks)
        failures.extend(f"{family}:{c.name}" for c in checks if not c.passed)

    report = "\n".join(lines)
    cfg = Config(raw)
    totals = {"families": len(families), "failed_certificates": failures}
    _finalize(outdir, "verify", cfg, [], totals, report=report)
    print(report)
    if failures:
        raise ConstructionError("certificate(s) failed: " + ", ".join(failures))
    return 0


def _cmd_text(cfg, outdir, threads):
    corpus = textdata.load_bagofwords(
        cfg.require("docword"), cfg.require("vocab"),
        cfg.require("n_docs"), cfg.require("vocab_size"))
    result = textdata.text_pipeline(
        corpus, k=cfg.get("k", 4), r=cfg.get("r", 50), T=cfg.get("T", 50),
        restart_budget=cfg.get("restart_budget", 200))
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(out / "components.npz", components=result.components,
             restarts=result.restarts)
    with open(out / "topwords.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("component,rank,word,weight\n")
        for j, words in enumerate(result.top_words):
            comp = result.components[:, j]
            order = np.argsort(-np.abs(comp), kind="stable")[: len(words)]
            for rank, (word, idx) in enumerate(zip(words, order), start=1):
                fh.write(f"{j + 1},{rank},{word},{float(comp[int(idx)])!r}\n")
    report = "\n".join(
        f"component {j + 1}: " + ", ".join(words)
        for j, words in enumerate(result.top_words)
    )
    totals = {"k": len(result.top_words), "top_words": result.top_words,
              "vocab_size": corpus.vocab_size, "n_docs": corpus.n_docs}
    return [], totals, report


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        outdir = Path(args.out)
        if args.subcommand == "verify":
            return _cmd_verify(args, outdir)
        threads = _threads(args)
        cfg = _load_config(args)
        if args.subcommand == "gen":
            outdir.mkdir(parents=True, exist_ok=True)
            records, totals, report = _cmd_gen(cfg, outdir, threads)
        elif args.subcommand == "run":
            records = harness.run_runtime_accuracy(cfg, threads=threads)
            totals, report = {}, None
        elif args.subcommand == "sweep":
            kind = cfg.require("sweep")
            if kind == "scaling":
                records = harness.run_scaling(cfg, threads=threads)
                totals = {"n_scale": {
                    " ".join(map(str, key)): stats
                    for key, stats in sorted(harness.nscale_table(records).items(),
                                             key=lambda kv: str(kv[0]))
                }}
                report = None
            elif kind == "counterexample":
                records = harness.run_counterexample_sweep(cfg, threads=threads)
                totals, report = {}, None
            else:
                raise ParameterError(f"sweep must be 'scaling' or 'counterexample', got {kind!r}")
        elif args.subcommand == "ablate":
            records = harness.run_ablation(cfg, threads=threads)
            totals, report = {}, None
        elif args.subcommand == "text":
            records, totals, report = _cmd_text(cfg, outdir, threads)
        else:  # pragma: no cover
            raise ParameterError(f"unknown subcommand {args.subcommand!r}")
        _finalize(outdir, args.subcommand, cfg, records, totals, report=report)
        return 0
    except ParameterError as exc:
        print(f"spca: parameter error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, ConstructionError) as exc:
        print(f"spca: {exc}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as exc:
        print(f"spca: i/o error: {exc}", file=sys.stderr)
        return 3
    except SpcaError as exc:  # pragma: no cover
        print(f"spca: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
