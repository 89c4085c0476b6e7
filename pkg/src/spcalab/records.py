"""Experiment records and the harness CSV schema.

One record is one solver evaluation.  The column order is fixed; re-running a
config with the same seeds must reproduce the file byte for byte (wall_ms is
only populated when a config opts into wall-clock timing).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .errors import FormatError, ParameterError

CSV_COLUMNS = [
    "algorithm", "family", "d", "s", "k", "gamma", "delta", "n", "seed",
    "mode", "r", "T", "metric", "value", "wall_ms", "iterations_used", "flags",
]

VALID_METRICS = ("sin2", "correlation2", "n_scale")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


@dataclass
class ExperimentRecord:
    algorithm: str
    family: str
    d: int
    s: int | None = None
    k: int | None = None
    gamma: float | None = None
    delta: float | None = None
    n: int | None = None
    seed: int | None = None
    mode: str = ""
    r: int | None = None
    T: int | None = None
    metric: str = "sin2"
    value: float = 0.0
    wall_ms: float = 0.0
    iterations_used: int | None = None
    flags: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.metric not in VALID_METRICS:
            raise ParameterError(f"unknown metric {self.metric!r}")
        if self.metric != "n_scale" and not 0.0 <= self.value <= 1.0:
            raise ParameterError(f"metric value {self.value} outside [0, 1]")
        if self.wall_ms < 0:
            raise ParameterError("wall_ms must be nonnegative")
        if any("," in f or ";" in f for f in self.flags):
            raise ParameterError("flags must not contain ',' or ';'")

    def row(self):
        return [
            self.algorithm, self.family, _fmt(self.d), _fmt(self.s), _fmt(self.k),
            _fmt(self.gamma), _fmt(self.delta), _fmt(self.n), _fmt(self.seed),
            self.mode, _fmt(self.r), _fmt(self.T), self.metric, _fmt(self.value),
            _fmt(self.wall_ms), _fmt(self.iterations_used), ";".join(self.flags),
        ]


def records_to_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def write_records(path, records):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records))


def _parse_opt(text, cast):
    return None if text == "" else cast(text)


def read_records(path):
    """Parse a harness CSV back into :class:`ExperimentRecord` rows."""
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_COLUMNS:
            raise FormatError(f"unexpected CSV header {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_COLUMNS):
                raise FormatError("wrong column count", line=lineno)
            (alg, family, d, s, k, gamma, delta, n, seed, mode, r, T,
             metric, value, wall_ms, iters, flags) = row
            out.append(ExperimentRecord(
                algorithm=alg, family=family, d=int(d),
                s=_parse_opt(s, int), k=_parse_opt(k, int),
                gamma=_parse_opt(gamma, float), delta=_parse_opt(delta, float),
                n=_parse_opt(n, int), seed=_parse_opt(seed, int), mode=mode,
                r=_parse_opt(r, int), T=_parse_opt(T, int), metric=metric,
                value=float(value), wall_ms=float(wall_ms),
                iterations_used=_parse_opt(iters, int),
                flags=tuple(f for f in flags.split(";") if f),
            ))
    return out
