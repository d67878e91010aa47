"""Experiment configuration: dotted ``key = value`` text (a TOML subset) or JSON.

Example::

    grid.nx = 8
    grid.ny = 8
    time.nt = 64
    materials.sigma = 0.0
    initial_state.preset = "gaussian"
    initial_state.width = 0.25
    checks.cost_identity = 1e-8

Every key is validated when the file is read; unknown keys are rejected.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "DEFAULTS"]


class ConfigError(ValueError):
    """Invalid configuration; ``field`` and ``line`` locate the problem when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field = field
        self.line = line


def _int(lo=None, hi=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise TypeError("expected an integer")
        if lo is not None and v < lo or hi is not None and v > hi:
            raise ValueError(f"must lie in [{lo}, {hi if hi is not None else 'inf'}]")
        return v
    return check


def _float(lo=None, hi=None, open_lo=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise TypeError("expected a number")
        v = float(v)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        if lo is not None and (v < lo or open_lo and v == lo):
            raise ValueError(f"must be {'>' if open_lo else '>='} {lo}")
        if hi is not None and v > hi:
            raise ValueError(f"must be <= {hi}")
        return v
    return check


def _choice(*options):
    def check(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(map(repr, options))}")
        return v
    return check


def _point(v):
    if not isinstance(v, list) or len(v) != 2:
        raise TypeError("expected a list of two numbers")
    return [_float(0.0, 1.0)(c) for c in v]


def _int_list(lo=0, increasing=False):
    def check(v):
        if not isinstance(v, list):
            raise TypeError("expected a list of integers")
        out = [_int(lo)(c) for c in v]
        if increasing and any(b <= a for a, b in zip(out, out[1:])):
            raise ValueError("must be strictly increasing")
        return out
    return check


def _fractions(v):
    if not isinstance(v, list):
        raise TypeError("expected a list of numbers")
    return [_float(0.0, 1.0)(c) for c in v]


def _formats(v):
    if not isinstance(v, list) or not v:
        raise TypeError("expected a non-empty list")
    return [_choice("json", "csv")(c) for c in v]


def _str(v):
    if not isinstance(v, str) or not v:
        raise TypeError("expected a non-empty string")
    return v


# dotted key -> (default, validator)
DEFAULTS: dict[str, tuple[Any, Callable]] = {
    "grid.nx": (8, _int(4, 256)),
    "grid.ny": (8, _int(4, 256)),
    "grid.kappa": (1.0, _float(0.0, open_lo=True)),
    "time.T": (1.0, _float(0.0, open_lo=True)),
    "time.nt": (64, _int(2, 100_000)),
    "materials.eps": (1.0, _float(0.0, open_lo=True)),
    "materials.eps_kind": ("const", _choice("const", "gaussian-bump")),
    "materials.eps_bump_amplitude": (0.5, _float(0.0)),
    "materials.eps_bump_center": ([0.5, 0.5], _point),
    "materials.eps_bump_width": (0.2, _float(0.0, open_lo=True)),
    "materials.mu": (1.0, _float(0.0, open_lo=True)),
    "materials.sigma": (0.0, _float(0.0)),
    "problem.alpha": (1.0, _float(0.0, open_lo=True)),
    "problem.s_index": (0, _int(0)),
    "problem.terminal_weight": ("identity", _choice("identity", "resolvent")),
    "problem.terminal_n": (8, _int(1)),
    "initial_state.preset": ("gaussian", _choice("gaussian", "boundary-silent", "random", "zero")),
    "initial_state.center": ([0.5, 0.5], _point),
    "initial_state.width": (0.25, _float(0.0, open_lo=True)),
    "initial_state.amplitude": (1.0, _float()),
    "initial_state.seed": (0, _int(0, 2**64 - 1)),
    "solver.cg_tol": (1e-10, _float(0.0, 0.5, open_lo=True)),
    "solver.cg_max_iter": (0, _int(0)),
    "study.n_list": ([1, 2, 4, 8, 16, 32, 64], _int_list(1, increasing=True)),
    "study.probes": (3, _int(1, 64)),
    "study.sample_steps": ([], _int_list(0)),
    "study.splits": (3, _int(1, 64)),
    "study.samples": (4, _int(1, 1024)),
    "study.power_steps": (10, _int(0, 1000)),
    "study.grids": ([], _int_list(4, increasing=True)),
    "study.nt_list": ([32, 64, 128], _int_list(2, increasing=True)),
    "study.dre_nt_list": ([64, 128], _int_list(2, increasing=True)),
    "study.quadrature": ("trapezoid", _choice("trapezoid", "midpoint")),
    "study.riccati_times": ([0.0, 0.5], _fractions),
    "output.dir": ("mxlqr-out", _str),
    "output.formats": (["json", "csv"], _formats),
}

_CHECK_PREFIX = "checks."


def _flatten(tree: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, key + "."))
        else:
            flat[key] = v
    return flat


def _key_lines(text: str) -> dict:
    """Best-effort map from dotted key to the line that sets it."""
    lines, header = {}, ""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.fullmatch(r"\[\s*([\w.\-]+)\s*\]", line)
        if m:
            header = m.group(1) + "."
            continue
        m = re.match(r"([\w.\-\"]+)\s*=", line)
        if m:
            lines[header + m.group(1).replace('"', "")] = no
    return lines


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated settings, stored flat under dotted keys."""

    values: dict = field(default_factory=lambda: {k: v[0] for k, v in DEFAULTS.items()})
    checks: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    def section(self, name: str) -> dict:
        pre = name + "."
        return {k[len(pre):]: v for k, v in self.values.items() if k.startswith(pre)}

    def to_dict(self) -> dict:
        tree: dict = {}
        for k, v in sorted(self.values.items()):
            sec, key = k.split(".", 1)
            tree.setdefault(sec, {})[key] = v
        if self.checks:
            tree["checks"] = dict(sorted(self.checks.items()))
        return tree

    def replace(self, **updates) -> "ExperimentConfig":
        """Copy with dotted-key overrides, e.g. ``replace(**{"time.nt": 32})``."""
        return parse_mapping({**self.to_dict_flat(), **updates})

    def to_dict_flat(self) -> dict:
        flat = dict(self.values)
        flat.update({_CHECK_PREFIX + k: v for k, v in self.checks.items()})
        return flat


def parse_mapping(flat: dict, lines: dict | None = None) -> ExperimentConfig:
    lines = lines or {}
    values = {k: v[0] for k, v in DEFAULTS.items()}
    checks = {}
    for key, raw in flat.items():
        if key.startswith(_CHECK_PREFIX):
            name = key[len(_CHECK_PREFIX):]
            try:
                checks[name] = _float(0.0)(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc), key, lines.get(key)) from None
            continue
        if key not in DEFAULTS:
            raise ConfigError("unknown key", key, lines.get(key))
        try:
            values[key] = DEFAULTS[key][1](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), key, lines.get(key)) from None
    if values["problem.s_index"] >= values["time.nt"]:
        raise ConfigError("must be smaller than time.nt", "problem.s_index",
                          lines.get("problem.s_index"))
    if not values["study.dre_nt_list"]:
        raise ConfigError("needs at least one entry", "study.dre_nt_list",
                          lines.get("study.dre_nt_list"))
    bad = [k for k in values["study.sample_steps"] if k >= values["time.nt"]]
    if bad:
        raise ConfigError(f"steps {bad} not below time.nt", "study.sample_steps",
                          lines.get("study.sample_steps"))
    return ExperimentConfig(values, checks)


def parse_config(text: str, fmt: str = "text") -> ExperimentConfig:
    """Parse configuration text; ``fmt`` is ``"text"`` (dotted keys) or ``"json"``."""
    if fmt == "json":
        try:
            tree = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, line=exc.lineno) from None
        if not isinstance(tree, dict):
            raise ConfigError("top level must be an object")
        return parse_mapping(_flatten(tree))
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(exc)) from None
    return parse_mapping(_flatten(tree), _key_lines(text))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, "json" if path.suffix.lower() == ".json" else "text")
