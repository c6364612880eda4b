"""Experiment configuration: JSON schema, parsing and the built-in scenarios."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import jsonschema

from . import catalog
from .analytics import AgeGrid, MeetScenario, MergeScenario, QuadratureConfig
from .flow import ChainState
from .rates import A4Grid, RateMatrix

_label = {"type": ["integer", "number"]}
_rate = {
    "type": "object",
    "required": ["family", "params"],
    "properties": {
        "family": {"enum": ["constant", "saturating", "piecewise"]},
        "params": {"type": "object"},
    },
    "allOf": [
        {
            "if": {"properties": {"family": {"enum": ["constant", "saturating"]}}},
            "then": {
                "properties": {
                    "params": {
                        "type": "object",
                        "required": ["c"],
                        "properties": {"c": {"type": "number", "minimum": 0}},
                        "additionalProperties": False,
                    }
                }
            },
        },
        {
            "if": {"properties": {"family": {"const": "piecewise"}}},
            "then": {
                "properties": {
                    "params": {
                        "type": "object",
                        "required": ["breakpoints", "values", "tail"],
                        "properties": {
                            "breakpoints": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                            "values": {"type": "array", "items": {"type": "number", "minimum": 0}},
                            "tail": {"type": "number", "minimum": 0},
                        },
                        "additionalProperties": False,
                    }
                }
            },
        },
    ],
}

RATE_MATRIX_SCHEMA = {
    "type": "object",
    "required": ["states", "rates"],
    "properties": {
        "states": {"type": "array", "items": _label, "minItems": 1, "uniqueItems": True},
        "rates": {
            "type": "object",
            "propertyNames": {"pattern": r"^\s*-?[0-9.eE+-]+\s*->\s*-?[0-9.eE+-]+\s*$"},
            "additionalProperties": _rate,
        },
        "order": {"type": "array", "items": {"type": "string"}},
    },
    "additionalProperties": False,
}

_chain = {
    "type": "object",
    "required": ["x"],
    "properties": {"x": _label, "y": {"type": "number", "minimum": 0}},
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["rate_matrix"],
    "properties": {
        "rate_matrix": RATE_MATRIX_SCHEMA,
        "meet_scenarios": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["i", "j"],
                "properties": {
                    "i": _label,
                    "j": _label,
                    "y1": {"type": "number", "minimum": 0},
                    "y2": {"type": "number", "minimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "merge_scenarios": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["k", "y"],
                "properties": {"k": _label, "y": {"type": "number", "minimum": 0}},
                "additionalProperties": False,
            },
        },
        "quadrature": {
            "type": "object",
            "properties": {
                "rel_tol": {"type": "number", "exclusiveMinimum": 0},
                "abs_tol": {"type": "number", "exclusiveMinimum": 0},
                "tail_eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "max_subdivisions": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "a4_grid": {
            "type": "object",
            "properties": {
                "n_y1": {"type": "integer", "minimum": 1},
                "n_y2": {"type": "integer", "minimum": 1},
                "n_y": {"type": "integer", "minimum": 1},
                "y_max": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "age_grid": {
            "type": "object",
            "properties": {"n": {"type": "integer", "minimum": 1}, "y_max": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
        "mc": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 100},
                "seed": {"type": "integer", "minimum": 0},
                "max_transitions": {"type": "integer", "minimum": 1},
                "merge_cap": {"type": "integer", "minimum": 1},
                "r_max": {"type": "integer", "minimum": 1},
                "tail_n": {"type": "integer", "minimum": 1},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "jobs": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "simulate": {
            "type": "object",
            "properties": {
                "init1": _chain,
                "init2": _chain,
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "script": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["t", "v"],
                        "properties": {"t": {"type": "number", "exclusiveMinimum": 0}, "v": {"type": "number"}},
                        "additionalProperties": False,
                    },
                },
            },
            "additionalProperties": False,
        },
        "outputs": {
            "type": "object",
            "properties": {"dir": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


@dataclass
class MCConfig:
    n: int = 100_000
    seed: int = 20240101
    max_transitions: int = 1_000_000
    merge_cap: int = 10_000
    r_max: int = 2
    tail_n: int = 5
    sigma: float = 3.0
    level: float = 0.95
    jobs: int = 1


@dataclass
class SimulateConfig:
    init1: dict = field(default_factory=lambda: {"x": None, "y": 0.0})
    init2: dict | None = None
    horizon: float = 10.0
    script: list | None = None


@dataclass
class ExperimentConfig:
    rate_matrix: dict
    meet_scenarios: list = field(default_factory=list)
    merge_scenarios: list = field(default_factory=list)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    a4_grid: A4Grid = field(default_factory=A4Grid)
    age_grid: AgeGrid = field(default_factory=AgeGrid)
    mc: MCConfig = field(default_factory=MCConfig)
    simulate: SimulateConfig | None = None
    outputs: dict = field(default_factory=dict)
    matrix: RateMatrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            self.matrix = RateMatrix.from_dict(self.rate_matrix)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"rate_matrix: {exc}") from exc
        states = set(self.matrix.states)
        for n, sc in enumerate(self.meet_scenarios):
            if sc.i not in states or sc.j not in states:
                raise ConfigError(f"meet_scenarios[{n}]: unknown state in {asdict(sc)}")
        for n, sc in enumerate(self.merge_scenarios):
            if sc.k not in states:
                raise ConfigError(f"merge_scenarios[{n}]: unknown state {sc.k}")
        if self.simulate is not None:
            for key in ("init1", "init2"):
                init = getattr(self.simulate, key)
                if init is not None and init.get("x") not in states:
                    raise ConfigError(f"simulate.{key}.x: unknown state {init.get('x')!r}")

    def chain(self, key) -> ChainState | None:
        d = getattr(self.simulate, key)
        return None if d is None else ChainState(d["x"], float(d.get("y", 0.0)))

    def to_dict(self) -> dict:
        d = {
            "rate_matrix": self.rate_matrix,
            "meet_scenarios": [asdict(s) for s in self.meet_scenarios],
            "merge_scenarios": [asdict(s) for s in self.merge_scenarios],
            "quadrature": asdict(self.quadrature),
            "a4_grid": asdict(self.a4_grid),
            "age_grid": asdict(self.age_grid),
            "mc": asdict(self.mc),
            "outputs": dict(self.outputs),
        }
        if self.simulate is not None:
            sim = {k: v for k, v in asdict(self.simulate).items() if v is not None}
            d["simulate"] = sim
        return d


def _format_error(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{where}: {err.message}"


def parse_config(doc: dict) -> ExperimentConfig:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(_format_error(e) for e in errors))
    try:
        meet = [MeetScenario(s["i"], s["j"], float(s.get("y1", 0.0)), float(s.get("y2", 0.0)))
                for s in doc.get("meet_scenarios", [])]
        merge = [MergeScenario(s["k"], float(s["y"])) for s in doc.get("merge_scenarios", [])]
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    sim = doc.get("simulate")
    return ExperimentConfig(
        rate_matrix=doc["rate_matrix"],
        meet_scenarios=meet,
        merge_scenarios=merge,
        quadrature=QuadratureConfig(**doc.get("quadrature", {})),
        a4_grid=A4Grid(**doc.get("a4_grid", {})),
        age_grid=AgeGrid(**doc.get("age_grid", {})),
        mc=MCConfig(**doc.get("mc", {})),
        simulate=SimulateConfig(**sim) if sim is not None else None,
        outputs=doc.get("outputs", {}),
    )


def load_config(path_or_text: str, *, is_text: bool = False) -> ExperimentConfig:
    try:
        if is_text:
            doc = json.loads(path_or_text)
        else:
            with open(path_or_text) as fh:
                doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(doc)


def counterexample_config() -> dict:
    """Two-state saturating chain, scripted two-point noise, inits (1, 0) and (2, 1)."""
    return {
        "rate_matrix": catalog.saturating_two_state().to_dict(),
        "meet_scenarios": [{"i": 1, "j": 2, "y1": 0.0, "y2": 1.0}],
        "merge_scenarios": [{"k": 1, "y": y} for y in (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e4)],
        "simulate": {
            "init1": {"x": 1, "y": 0.0},
            "init2": {"x": 2, "y": 1.0},
            "horizon": 1.5,
            "script": [{"t": 1.0, "v": 1.5}, {"t": 1.5, "v": 0.5}],
        },
        "mc": {"n": 20_000},
    }


def builtin_config(name: str) -> dict:
    if name not in catalog.MATRICES:
        raise ConfigError(f"unknown built-in matrix {name!r}; choose from {sorted(catalog.MATRICES)}")
    m = catalog.MATRICES[name]()
    s = list(m.states)
    return {
        "rate_matrix": m.to_dict(),
        "meet_scenarios": [{"i": s[0], "j": s[1], "y1": 0.0, "y2": 0.0}],
        "merge_scenarios": [{"k": s[0], "y": y} for y in (0.0, 1.0, 10.0)],
        "simulate": {"init1": {"x": s[0], "y": 0.0}, "init2": {"x": s[1], "y": 0.0}, "horizon": 10.0},
        "mc": {"n": 20_000},
    }
