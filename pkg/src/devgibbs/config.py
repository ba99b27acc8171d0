"""Experiment configuration: a sectioned key = value text format.

Keys before any [section] header belong to the experiment block, or to
the selected kind's block when they are kind-specific (which makes the
minimal flat files work).  Unknown keys and malformed values are hard
errors carrying the line number.  The seed is mandatory: runs must never
default to wall-clock entropy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError

KINDS = ("deviation", "tail", "entropy", "gibbs", "spec", "contraction",
         "distortion", "bounds")

# value kinds: int, float, str, bool, int_list, float_list, num_or_word
_SCHEMA = {
    "experiment": {
        "family": "str",
        "kind": "str",
        "seed": "int",
        "samples": "int",
        "workers": "int",
        "out": "str",
    },
    "map": {"a": "float", "alpha": "float", "d": "int"},
    "hyperbolic": {"sigma": "float", "delta": "float", "b": "float",
                   "n_max": "int"},
    "deviation": {
        "g": "str", "c": "float", "direction": "str", "n": "int_list",
        "window": "int_list", "t_grid": "float_list", "fe_n": "int",
        "fe_samples": "int", "tail_rate": "num_or_word", "g_file": "str",
        "sampler_file": "str",
    },
    "tail": {"window": "int_list"},
    "entropy": {"n_grid": "int_list", "eps_grid": "float_list",
                "mass_deficit": "float", "method": "str"},
    "gibbs": {"eps": "float", "n_grid": "int_list", "points": "int",
              "beta": "float", "delta_n_grid": "int_list",
              "delta_samples": "int"},
    "spec": {"eps_grid": "float_list", "n_grid": "int_list",
             "base_points": "int", "probes": "int", "cap": "int"},
    "contraction": {"instances": "int", "pairs": "int",
                    "delta1": "num_or_word", "depth_lo": "int",
                    "depth_hi": "int"},
    "distortion": {"instances": "int", "pairs": "int",
                   "delta1": "num_or_word", "depth_lo": "int",
                   "depth_hi": "int"},
    "check": {
        "rate_target": "float", "rate_tol": "float",
        "require_upper_ok": "bool", "require_lower_ok": "bool",
        "legendre_target": "float", "legendre_tol": "float",
        "kind_expected": "str", "slope_max": "float",
        "exponent_target": "float", "exponent_tol": "float",
        "entropy_target": "float", "entropy_rel_tol": "float",
        "subexp_max": "float", "delta_max": "float", "delta_min": "float",
        "headline_max": "float", "pass_min": "float", "ratio_max": "float",
        "exactness_target": "int",
    },
}

_EXPERIMENT_KEYS = set(_SCHEMA["experiment"])


def _parse_scalar(raw: str, want: str, line: int):
    raw = raw.strip()
    try:
        if want == "int":
            v = float(raw)
            if not v == int(v):
                raise ValueError
            return int(v)
        if want == "float":
            return float(raw)
        if want == "bool":
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError
        if want == "num_or_word":
            if raw in ("auto", "neg_inf", "measure", "none"):
                return raw
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {want}", line=line)


def _parse_value(raw: str, want: str, line: int):
    raw = raw.strip()
    if want.endswith("_list"):
        inner = raw[1:-1] if raw.startswith("[") and raw.endswith("]") else raw
        parts = [p for p in (s.strip() for s in inner.split(",")) if p]
        if not parts:
            raise ConfigError("empty list value", line=line)
        base = want[:-5]
        return [_parse_scalar(p, base, line) for p in parts]
    return _parse_scalar(raw, want, line)


@dataclass
class ExperimentConfig:
    family: str
    kind: str
    seed: int
    samples: Optional[int]
    workers: int
    out: str
    map_params: dict
    sections: dict
    raw_text: str

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})


def parse_config(text: str) -> ExperimentConfig:
    sections: dict = {}
    current: Optional[str] = None
    pending_kind_keys = []  # (line, key, raw) seen before [section] headers

    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#") or stripped.startswith(";"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            if name not in _SCHEMA:
                raise ConfigError(f"unknown section [{name}]", line=lineno)
            current = name
            sections.setdefault(name, {})
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected key = value, got {stripped!r}",
                              line=lineno)
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if current is None:
            if key in _EXPERIMENT_KEYS:
                val = _parse_value(raw, _SCHEMA["experiment"][key], lineno)
                sections.setdefault("experiment", {})[key] = val
            else:
                pending_kind_keys.append((lineno, key, raw))
            continue
        if key not in _SCHEMA[current]:
            raise ConfigError(f"unknown key {key!r} in section [{current}]",
                              line=lineno)
        sections.setdefault(current, {})[key] = _parse_value(
            raw, _SCHEMA[current][key], lineno)

    exp = sections.get("experiment", {})
    kind = exp.get("kind", "deviation")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")

    kind_section = "deviation" if kind == "bounds" else kind
    for lineno, key, raw in pending_kind_keys:
        if key in _SCHEMA.get("map", {}):
            sections.setdefault("map", {})[key] = _parse_value(
                raw, _SCHEMA["map"][key], lineno)
        elif key in _SCHEMA.get(kind_section, {}):
            sections.setdefault(kind_section, {})[key] = _parse_value(
                raw, _SCHEMA[kind_section][key], lineno)
        else:
            raise ConfigError(f"unknown key {key!r}", line=lineno)

    if "family" not in exp:
        raise ConfigError("missing required key 'family'")
    if "seed" not in exp:
        raise ConfigError("missing required key 'seed' (runs must be seeded)")

    samples = exp.get("samples")
    if kind in ("deviation", "bounds"):
        if samples is None:
            raise ConfigError("missing required key 'samples'")
        if samples < 1000:
            raise ConfigError(
                f"samples={samples} below the minimum of 1000")
        dev = sections.get("deviation", {})
        for req in ("g", "c", "n"):
            if req not in dev:
                raise ConfigError(f"missing required deviation key {req!r}")
        grid = dev["n"]
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("deviation n grid must be strictly increasing")
    if samples is not None and samples < 1:
        raise ConfigError("samples must be positive")

    workers = exp.get("workers", 1)
    if workers < 1:
        raise ConfigError("workers must be >= 1")

    return ExperimentConfig(
        family=exp["family"],
        kind=kind,
        seed=exp["seed"],
        samples=samples,
        workers=workers,
        out=exp.get("out", "out"),
        map_params=sections.get("map", {}),
        sections=sections,
        raw_text=text,
    )
