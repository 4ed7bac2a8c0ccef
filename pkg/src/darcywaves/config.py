"""Run configuration: JSON schema, parsing, and construction of solver
objects.

One config file per run; the only CLI overrides are --output-dir and --seed.
phi is given as a finite cosine-mode table so it is mean-zero by
construction and reproducible bit-for-bit.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass

import jsonschema

from .errors import MissingFile, SchemaViolation
from .evolution import SchemeConfig
from .fluid import (CraigSulem, FiniteDepth, FlatSymbol, FluidConfig,
                    InfiniteDepth, MappedElliptic)
from .spectral import PeriodicGrid, SurfaceField

EXPERIMENT_KINDS = ("dn-check", "tw-solve", "evolve", "stability", "props")

_MODE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["k", "amplitude"],
    "properties": {
        "k": {"type": "array", "items": {"type": "integer"},
              "minItems": 1, "maxItems": 2},
        "amplitude": {"type": "number"},
        "phase": {"type": "number"},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["problem", "experiment"],
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["depth"],
            "properties": {
                "phi_modes": {"type": "array", "items": _MODE_SCHEMA},
                "gamma": {"type": "number"},
                "depth": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["finite", "infinite"]},
                        "b": {"type": "number", "exclusiveMinimum": 0},
                        "truncation_depth": {"type": "number",
                                             "exclusiveMinimum": 0},
                    },
                },
                "separation_margin": {"type": "number",
                                      "exclusiveMinimum": 0},
                "d": {"enum": [1, 2]},
                "n": {"type": "integer", "minimum": 8},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "backend": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["flat", "craig_sulem",
                                          "mapped_elliptic"]},
                        "order": {"type": "integer", "minimum": 0,
                                  "maximum": 8},
                        "vertical_points": {"type": "integer", "minimum": 16},
                        "solver_tol": {"type": "number", "minimum": 1e-14,
                                       "maximum": 1e-6},
                    },
                },
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "delta": {"type": ["number", "null"]},
                "max_iter": {"type": "integer", "minimum": 1},
                "s": {"type": "number"},
            },
        },
        "evolution": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "scheme": {"enum": ["imex1", "imex2", "eps_viscosity"]},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "t_final": {"type": "number", "minimum": 0},
                "record_every": {"type": "integer", "minimum": 1},
                "dealias": {"enum": ["2/3", "none"]},
                "eps": {"type": ["number", "null"]},
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(EXPERIMENT_KINDS)},
                "seed": {"type": "integer", "minimum": 0},
                "output_dir": {"type": "string"},
                "options": {"type": "object"},
            },
        },
    },
}

DEFAULTS = {
    "problem": {"phi_modes": [], "gamma": 0.0, "d": 1, "n": 128},
    "solver": {"backend": {"kind": "mapped_elliptic"}, "tol": 1e-11,
               "delta": None, "max_iter": 80, "s": 3.0},
    "evolution": {"scheme": "imex2", "dt": 1e-2, "t_final": 1.0,
                  "record_every": 1, "dealias": "2/3", "eps": None},
    "experiment": {"seed": 0, "output_dir": "out", "options": {}},
}


@dataclass
class RunConfig:
    """Validated, normalized run configuration."""

    raw: dict
    path: str | None = None

    @property
    def problem(self):
        return self.raw["problem"]

    @property
    def solver(self):
        return self.raw["solver"]

    @property
    def evolution(self):
        return self.raw["evolution"]

    @property
    def experiment(self):
        return self.raw["experiment"]

    # -- solver-object construction ------------------------------------------

    def grid(self):
        return PeriodicGrid(d=self.problem["d"], n=self.problem["n"])

    def fluid_config(self):
        dep = self.problem["depth"]
        if dep["kind"] == "finite":
            depth = FiniteDepth(b=float(dep["b"]))
        else:
            depth = InfiniteDepth(
                truncation_depth=float(dep.get("truncation_depth", 12.0)))
        return FluidConfig(depth=depth, d=self.problem["d"],
                           separation_margin=self.problem.get(
                               "separation_margin"))

    def phi(self):
        modes = {}
        for m in self.problem["phi_modes"]:
            k = tuple(m["k"])
            key = k[0] if len(k) == 1 else k
            modes[key] = (m["amplitude"], m.get("phase", 0.0))
        grid = self.grid()
        if not modes:
            return SurfaceField.zero(grid)
        return SurfaceField.from_modes(grid, modes)

    def backend(self):
        spec = self.solver["backend"]
        kind = spec["kind"]
        if kind == "flat":
            return FlatSymbol()
        if kind == "craig_sulem":
            return CraigSulem(order=spec.get("order", 4))
        return MappedElliptic(
            vertical_points=spec.get("vertical_points", 64),
            solver_tol=spec.get("solver_tol", 1e-12))

    def scheme(self):
        ev = self.evolution
        return SchemeConfig(dt=ev["dt"], scheme=ev["scheme"],
                            eps=ev.get("eps"),
                            dealias_rule=None if ev["dealias"] == "none"
                            else ev["dealias"],
                            monitor_s=self.solver["s"])


def _merge_defaults(raw):
    out = copy.deepcopy(raw)
    for block, defaults in DEFAULTS.items():
        out.setdefault(block, {})
        for key, val in defaults.items():
            out[block].setdefault(key, copy.deepcopy(val))
    return out


def validate_config(raw):
    """All schema violations at once, as (json path, message) pairs."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    violations = []
    for err in sorted(validator.iter_errors(raw), key=lambda e: list(e.path)):
        parts = [str(p) for p in err.absolute_path]
        if err.validator == "required":
            # point at the missing key itself, e.g. problem/depth
            missing = err.message.split("'")[1]
            parts.append(missing)
        path = "/".join(parts) or "<root>"
        violations.append((path, err.message))
    # cross-field requirements the schema language cannot express
    prob = raw.get("problem", {})
    dep = prob.get("depth")
    if isinstance(dep, dict):
        if dep.get("kind") == "finite" and "b" not in dep:
            violations.append(("problem/depth/b",
                               "finite depth requires 'b'"))
    n = prob.get("n")
    if isinstance(n, int) and (n < 8 or n & (n - 1)):
        violations.append(("problem/n", "n must be a power of two >= 8"))
    for i, m in enumerate(prob.get("phi_modes", []) or []):
        k = m.get("k") if isinstance(m, dict) else None
        if isinstance(k, list) and all(kj == 0 for kj in k):
            violations.append((f"problem/phi_modes/{i}/k",
                               "k = 0 not allowed (phi is mean-zero)"))
    if violations:
        raise SchemaViolation(violations)


def parse_config(path):
    """Load, validate, and normalize a config file.

    Unknown keys are rejected; defaults are filled so that emit(parse(c))
    is the canonical form of c.
    """
    if not os.path.exists(path):
        raise MissingFile(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as err:
            raise SchemaViolation([("<root>", f"invalid JSON: {err}")])
    validate_config(raw)
    return RunConfig(raw=_merge_defaults(raw), path=path)


def emit_config(config: RunConfig):
    """Canonical JSON text of the normalized config."""
    return json.dumps(config.raw, indent=1, sort_keys=True) + "\n"
