"""Render paper-style figures from harness CSV output.

Invoked as ``spca-render --spec figure.cfg`` where the spec is a flat
key=value file:

    kind=runtime | counterexample | scaling | ablation | topwords
    input=path.csv[,path2.csv]
    output=figure.png
    fit=none | poly2 | poly3 | power-1 | power-2 | powerfree
    x=s | gamma | delta          (scaling only; default: the varying column)
    algorithm=... family=...     (optional row filters)
    vector=1                     (also write an SVG next to the PNG)

Each render writes one raster image plus a ``<output>.fit.txt`` sidecar with
the fitted coefficients and R^2.  Rendering is read-only over its inputs and
the sidecar numbers are deterministic for identical inputs.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fits import fit_from_name

KINDS = ("runtime", "counterexample", "scaling", "ablation", "topwords")

CSV_COLUMNS = [
    "algorithm", "family", "d", "s", "k", "gamma", "delta", "n", "seed",
    "mode", "r", "T", "metric", "value", "wall_ms", "iterations_used", "flags",
]


class SpecError(ValueError):
    pass


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str
    fit: str = "none"
    x: str | None = None
    filters: dict = field(default_factory=dict)
    vector: bool = False

    @classmethod
    def from_file(cls, path):
        raw = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise SpecError(f"expected key=value in spec, got {stripped!r}")
            key, _, value = stripped.partition("=")
            raw[key.strip()] = value.strip()
        kind = raw.pop("kind", None)
        if kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {kind!r}")
        inputs = [p for p in raw.pop("input", "").split(",") if p]
        if not inputs:
            raise SpecError("spec needs input=<csv path>[,more]")
        output = raw.pop("output", None)
        if not output:
            raise SpecError("spec needs output=<image path>")
        fit = raw.pop("fit", "none")
        x = raw.pop("x", None)
        vector = raw.pop("vector", "0") not in ("0", "", "false")
        filters = {k: v for k, v in raw.items() if k in ("algorithm", "family", "mode", "metric")}
        unknown = set(raw) - set(filters)
        if unknown:
            raise SpecError(f"unknown spec key(s): {', '.join(sorted(unknown))}")
        return cls(kind=kind, inputs=inputs, output=output, fit=fit, x=x,
                   filters=filters, vector=vector)


def _read_rows(paths):
    rows = []
    for path in paths:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            rows.extend(reader)
    return rows


def _apply_filters(rows, filters):
    out = rows
    for key, value in filters.items():
        out = [r for r in out if r.get(key) == value]
    return out


def _require_rows(rows, what):
    if not rows:
        raise SpecError(f"no rows left after filtering for {what}")
    return rows


def _fnum(row, key):
    text = row.get(key, "")
    return float(text) if text not in ("", None) else None


def _median_band(pairs):
    """pairs: list of (x, value) -> sorted xs with (median, min, max)."""
    groups = {}
    for x, v in pairs:
        groups.setdefault(x, []).append(v)
    xs = sorted(groups)
    med = [float(np.median(groups[x])) for x in xs]
    lo = [min(groups[x]) for x in xs]
    hi = [max(groups[x]) for x in xs]
    return xs, med, lo, hi


def _render_runtime(rows, ax):
    rows = _require_rows([r for r in rows if r["metric"] == "correlation2"],
                         "metric=correlation2 (runtime)")
    use_wall = any(_fnum(r, "wall_ms") for r in rows)
    for alg in sorted({r["algorithm"] for r in rows}):
        sub = [r for r in rows if r["algorithm"] == alg]
        tunable = [r for r in sub if r.get("T")]
        if len({r["T"] for r in tunable}) > 1:
            key = "wall_ms" if use_wall else "T"
            pairs = [(_fnum(r, key) or 0.0, float(r["value"])) for r in tunable]
            xs, med, lo, hi = _median_band(pairs)
            ax.plot(xs, med, marker="o", label=alg)
            ax.fill_between(xs, lo, hi, alpha=0.2)
        else:
            xs = [_fnum(r, "wall_ms") or 0.0 for r in sub]
            ys = [float(r["value"]) for r in sub]
            ax.scatter(xs, ys, label=alg, marker="x")
    ax.set_xlabel("cumulative wall time (ms)" if use_wall else "iterations")
    ax.set_ylabel("correlation$^2$")
    ax.legend()
    return None


def _render_counterexample(rows, ax):
    rows = _require_rows([r for r in rows if r["metric"] == "sin2"],
                         "metric=sin2 (counterexample)")
    for alg in sorted({r["algorithm"] for r in rows}):
        sub = [r for r in rows if r["algorithm"] == alg]
        sampled = [r for r in sub if "population" not in r["flags"]]
        if sampled:
            pairs = [(int(r["n"]), float(r["value"])) for r in sampled]
            xs, med, lo, hi = _median_band(pairs)
            ax.plot(xs, med, marker="o", label=alg)
            ax.fill_between(xs, lo, hi, alpha=0.2)
        population = [r for r in sub if "population" in r["flags"]]
        for r in population:
            ax.axhline(float(r["value"]), linestyle="--", alpha=0.6,
                       label=f"{alg} (population)")
    ax.set_xscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("sin$^2$ error")
    ax.legend(fontsize=7)
    return None


def _scaling_series(rows, x_key):
    pairs = []
    skipped = 0
    for r in rows:
        if "above-grid" in r["flags"]:
            skipped += 1
            continue
        pairs.append((float(r[x_key]), int(r["n"])))
    return pairs, skipped


def _render_scaling(rows, ax, spec):
    rows = _require_rows([r for r in rows if r["metric"] == "n_scale"],
                         "metric=n_scale (scaling)")
    x_key = spec.x
    if x_key is None:
        for cand in ("s", "gamma", "delta"):
            if len({r[cand] for r in rows}) > 1:
                x_key = cand
                break
        else:
            x_key = "s"
    if x_key not in ("s", "gamma", "delta"):
        raise SpecError(f"scaling x-axis must be s, gamma, or delta, got {x_key!r}")
    pairs, skipped = _scaling_series(rows, x_key)
    _require_rows(pairs, f"finite n_scale rows over x={x_key}")
    xs, med, lo, hi = _median_band(pairs)
    ax.plot(xs, med, marker="o", label="median $n_{scale}$")
    ax.fill_between(xs, lo, hi, alpha=0.2, label="min-max over seeds")
    fit = fit_from_name(spec.fit, np.array(xs), np.array(med))
    if fit is not None and not fit.degenerate:
        grid = np.linspace(min(xs), max(xs), 200)
        if fit.kind == "poly":
            deg = fit.coefficients["degree"]
            coeffs = [fit.coefficients[f"c{deg - i}"] for i in range(deg + 1)]
            ax.plot(grid, np.polyval(coeffs, grid), linestyle=":",
                    label=f"poly{deg} fit")
        else:
            a, b = fit.coefficients["a"], fit.coefficients["b"]
            safe = grid[grid > 0]
            ax.plot(safe, a * safe**b, linestyle=":", label=f"power fit b={b:.2f}")
    ax.set_xlabel(x_key)
    ax.set_ylabel("$n_{scale}$")
    ax.legend()
    notes = [f"skipped {skipped} above-grid row(s)"] if skipped else []
    return fit, notes


def _render_ablation(rows, ax):
    rows = _require_rows([r for r in rows if r["metric"] == "sin2"],
                         "metric=sin2 (ablation)")
    for mode in sorted({r["mode"] for r in rows if r["mode"]}):
        sub = [r for r in rows if r["mode"] == mode]
        pairs = [(int(r["T"]), float(r["value"])) for r in sub]
        xs, med, lo, hi = _median_band(pairs)
        ax.plot(xs, med, marker="o", label=f"RTPM-{mode}")
        ax.fill_between(xs, lo, hi, alpha=0.2)
    ax.set_xlabel("iterations T")
    ax.set_ylabel("sin$^2$ error")
    ax.legend()
    return None


def _render_topwords(paths, fig):
    rows = []
    for path in paths:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows.extend(csv.DictReader(fh))
    if not rows or not {"component", "rank", "word", "weight"} <= set(rows[0]):
        raise SpecError("topwords input must have columns component,rank,word,weight")
    comps = sorted({int(r["component"]) for r in rows})
    axes = fig.subplots(1, len(comps), squeeze=False)[0]
    for ax, comp in zip(axes, comps):
        sub = sorted((r for r in rows if int(r["component"]) == comp),
                     key=lambda r: int(r["rank"]))
        words = [r["word"] for r in sub]
        weights = [abs(float(r["weight"])) for r in sub]
        ax.barh(range(len(words))[::-1], weights)
        ax.set_yticks(range(len(words))[::-1])
        ax.set_yticklabels(words, fontsize=7)
        ax.set_title(f"component {comp}", fontsize=9)
    return None


def render(spec):
    """Render one figure; returns the fit report text."""
    report_lines = [f"kind={spec.kind}", f"inputs={','.join(spec.inputs)}"]
    fig = plt.figure(figsize=(7, 4.5))
    fit = None
    notes = []
    if spec.kind == "topwords":
        _render_topwords(spec.inputs, fig)
    else:
        rows = _apply_filters(_read_rows(spec.inputs), spec.filters)
        what = ", ".join(f"{k}={v}" for k, v in spec.filters.items()) or "no filters"
        rows = _require_rows(rows, what)
        ax = fig.add_subplot(111)
        if spec.kind == "runtime":
            _render_runtime(rows, ax)
        elif spec.kind == "counterexample":
            _render_counterexample(rows, ax)
        elif spec.kind == "scaling":
            fit, notes = _render_scaling(rows, ax, spec)
        elif spec.kind == "ablation":
            _render_ablation(rows, ax)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    if spec.vector:
        fig.savefig(out.with_suffix(".svg"))
    plt.close(fig)
    if fit is not None:
        report_lines.append(fit.describe())
    report_lines.extend(notes)
    report = "\n".join(report_lines)
    Path(str(out) + ".fit.txt").write_text(report + "\n", encoding="utf-8")
    return report


def main(argv=None):
    parser = argparse.ArgumentParser(prog="spca-render", description=__doc__)
    parser.add_argument("--spec", required=True, nargs="+",
                        help="figure spec file(s), one figure each")
    args = parser.parse_args(argv)
    try:
        for spec_path in args.spec:
            report = render(FigureSpec.from_file(spec_path))
            print(report)
    except SpecError as exc:
        print(f"spca-render: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"spca-render: i/o error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
