"""Flat key-value experiment configs.

Format: one ``key=value`` per line, ``#`` comments, blank lines ignored.
Keys are the CSV schema columns plus a documented set of instance and
harness keys.  Values may be scalars, comma lists, or geometric grids
``lo:hi:x<factor>`` (inclusive of ``lo``, stepping by the factor while
``<= hi``).  The last occurrence of a key wins, and a manifest written from
a resolved config is itself a valid config.
"""

from __future__ import annotations

import hashlib

from .errors import FormatError, ParameterError

# every key a config may mention, with its element type
KNOWN_KEYS = {
    # CSV-schema keys
    "algorithm": str, "family": str, "d": int, "s": int, "k": int,
    "gamma": float, "delta": float, "n": int, "seed": int, "mode": str,
    "r": int, "T": int, "metric": str,
    # sample-size grid (geometric lo:hi:x<factor> or comma list)
    "n_grid": int,
    # instance parameters beyond the schema columns
    "u": int, "tau": float, "lam1": float, "lam2": float, "lam3": float,
    "lam4": float, "i_star": int,
    # harness controls
    "sweep": str, "timing": str, "population": int, "restart_budget": int,
    # text pipeline inputs
    "docword": str, "vocab": str, "n_docs": int, "vocab_size": int,
}


def parse_grid(text, cast):
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3 or not parts[2].startswith("x"):
            raise ParameterError(f"bad grid syntax {text!r}, expected lo:hi:x<factor>")
        lo, hi = cast(parts[0]), cast(parts[1])
        factor = float(parts[2][1:])
        if lo <= 0 or hi < lo or factor <= 1:
            raise ParameterError(f"bad grid bounds in {text!r}")
        out = []
        x = float(lo)
        while x <= hi + 1e-9:
            out.append(cast(round(x)))
            x *= factor
        return out
    return [cast(tok) for tok in text.split(",") if tok != ""]


class Config:
    """A resolved configuration: typed values plus provenance for manifests."""

    def __init__(self, raw):
        self._raw = dict(raw)
        unknown = sorted(set(self._raw) - set(KNOWN_KEYS))
        if unknown:
            raise ParameterError(f"unknown config key(s): {', '.join(unknown)}")

    @classmethod
    def from_text(cls, text):
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise FormatError(f"expected key=value, got {stripped!r}", line=lineno)
            key, _, value = stripped.partition("=")
            raw[key.strip()] = value.strip()  # last occurrence wins
        return cls(raw)

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def apply_overrides(self, overrides):
        """``key=value`` strings applied after the file; last wins."""
        raw = dict(self._raw)
        for item in overrides:
            if "=" not in item:
                raise ParameterError(f"override {item!r} is not key=value")
            key, _, value = item.partition("=")
            raw[key.strip()] = value.strip()
        return Config(raw)

    # -- typed access ------------------------------------------------------

    def has(self, key):
        return key in self._raw

    def get(self, key, default=None):
        if key not in KNOWN_KEYS:
            raise ParameterError(f"unknown config key {key!r}")
        if key not in self._raw:
            return default
        cast = KNOWN_KEYS[key]
        text = self._raw[key]
        try:
            return cast(text)
        except ValueError:
            raise ParameterError(f"config key {key}={text!r} is not a valid {cast.__name__}")

    def get_list(self, key, default=None):
        """Value as a list; supports comma lists and (for ``n``) grids."""
        if key not in KNOWN_KEYS:
            raise ParameterError(f"unknown config key {key!r}")
        if key not in self._raw:
            return list(default) if default is not None else None
        cast = KNOWN_KEYS[key]
        try:
            return parse_grid(self._raw[key], cast)
        except ValueError:
            raise ParameterError(f"config key {key}={self._raw[key]!r} has a bad element")

    def require(self, key):
        if key not in self._raw:
            raise ParameterError(f"missing required config key {key!r}")
        return self.get(key)

    def n_values(self):
        """The sample-size axis: ``n_grid`` if present, else ``n``."""
        if "n_grid" in self._raw:
            return self.get_list("n_grid")
        return self.get_list("n")

    # -- serialization -----------------------------------------------------

    def manifest_text(self):
        lines = ["# resolved configuration (re-runnable as a config file)"]
        lines += [f"{k}={self._raw[k]}" for k in sorted(self._raw)]
        return "\n".join(lines) + "\n"

    def content_hash(self):
        canon = "\n".join(f"{k}={self._raw[k]}" for k in sorted(self._raw))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def as_dict(self):
        return dict(self._raw)
