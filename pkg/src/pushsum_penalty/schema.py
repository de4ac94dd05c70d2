"""JSON schemas for run configs and for every JSON artifact the CLI writes."""

from __future__ import annotations

import jsonschema

__all__ = ["SCHEMA_VERSION", "CONFIG_SCHEMA", "FINAL_SCHEMA", "ORACLE_SCHEMA", "CHECK_SCHEMA", "validate"]

SCHEMA_VERSION = 1

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"type": "array", "items": _num}
_edge = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2}

_term = {
    "type": "object",
    "oneOf": [
        {
            "properties": {"kind": {"const": "power"}, "scale": _pos, "exponent": _num},
            "required": ["kind", "scale", "exponent"],
            "additionalProperties": False,
        },
        {
            "properties": {"kind": {"const": "constant"}, "value": {"type": "number", "minimum": 0}},
            "required": ["kind", "value"],
            "additionalProperties": False,
        },
    ],
}

_generator = {
    "type": "object",
    "properties": {k: _num for k in ("a", "b", "c", "l", "p_min", "p_max")},
    "required": ["a", "b", "c", "l", "p_min", "p_max"],
    "additionalProperties": False,
}

_demand = {
    "type": "object",
    "properties": {k: _num for k in ("omega", "alpha", "K", "p_min", "p_max")},
    "required": ["omega", "alpha", "K", "p_min", "p_max"],
    "additionalProperties": False,
}


def _kind(name: str, props: dict, required=()) -> dict:
    return {
        "if": {"properties": {"kind": {"const": name}}, "required": ["kind"]},
        "then": {
            "properties": dict({"kind": {"const": name}}, **props),
            "required": ["kind", *required],
            "additionalProperties": False,
        },
    }


_problem = {
    "type": "object",
    "properties": {"kind": {"enum": ["averaging", "quadratic", "toy", "energy"]}},
    "required": ["kind"],
    "allOf": [
        _kind("averaging", {"dim": {"type": "integer", "minimum": 1}}),
        _kind("quadratic", {"centers": {"type": "array", "items": _vec, "minItems": 1}}, ["centers"]),
        _kind("toy", {"lower": _num}),
        _kind(
            "energy",
            {
                "generators": {"type": "array", "items": _generator, "minItems": 1},
                "demands": {"type": "array", "items": _demand, "minItems": 1},
            },
            ["generators", "demands"],
        ),
    ],
}

_schedule = {
    "type": "object",
    "properties": {
        "family": {"enum": ["power_law", "custom"]},
        "b": _num,
        "a_scale": _pos,
        "r_scale": {"type": "number", "minimum": 1},
        "a": _term,
        "r": _term,
        "allow_uncertified": {"type": "boolean"},
        "horizon": {"type": "integer", "minimum": 1000},
    },
    "required": ["family"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"family": {"const": "power_law"}}}, "then": {"required": ["b"]}},
        {"if": {"properties": {"family": {"const": "custom"}}}, "then": {"required": ["a", "r"]}},
    ],
}

_x0 = {
    "oneOf": [
        {"type": "null"},
        {"type": "array", "items": _vec},
        {
            "type": "object",
            "properties": {"uniform": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
            "required": ["uniform"],
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "pushsum run config",
    "type": "object",
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "graph": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "graphs": {"type": "array", "items": {"type": "array", "items": _edge}, "minItems": 1},
                "selector": {"type": "string"},
                "claimed_B": {"type": ["integer", "null"], "minimum": 1},
                "probe_horizon": {"type": "integer", "minimum": 1},
            },
            "required": ["n", "graphs"],
            "additionalProperties": False,
        },
        "schedule": _schedule,
        "problem": _problem,
        "run": {
            "type": "object",
            "properties": {
                "max_rounds": {"type": "integer", "minimum": 0},
                "record_every": {"type": "integer", "minimum": 1},
                "stop_tolerance": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "x0": _x0,
                "trace": {"type": "boolean"},
                "literal_4d": {"type": "boolean"},
                "timing": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "oracle": {
            "type": "object",
            "properties": {
                "rounds": {"type": "integer", "minimum": 0},
                "grid": {"type": "integer", "minimum": 3},
                "refine": {"type": "integer", "minimum": 0},
                "r": {"type": "number", "minimum": 1},
                "box": {"type": "array", "items": _vec, "minItems": 2, "maxItems": 2},
                "path_r": {"type": "array", "items": {"type": "number", "minimum": 1}},
                "kkt_tol": _pos,
            },
            "additionalProperties": False,
        },
    },
    "required": ["version", "graph", "schedule", "problem"],
    "additionalProperties": False,
}

FINAL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "rounds": {"type": "integer"},
        "stopped_early": {"type": "boolean"},
        "z_bar": _vec,
        "x_bar": _vec,
        "z": {"type": "array", "items": _vec},
        "y": _vec,
        "disagreement": _num,
        "mean_penalty": _num,
        "objective": _num,
    },
    "required": ["version", "rounds", "z_bar", "z", "disagreement", "mean_penalty", "objective"],
    "additionalProperties": False,
}

_point_block = {
    "type": ["object", "null"],
    "properties": {"point": _vec, "objective": _num, "penalty": _num},
    "required": ["point", "objective"],
}

ORACLE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "problem": {"type": "string"},
        "point": _vec,
        "objective": _num,
        "slacks": {"type": "object", "additionalProperties": _num},
        "brute_force": _point_block,
        "centralized": _point_block,
        "analytic": _point_block,
        "kkt": {"type": ["object", "null"]},
        "multipliers": {"type": ["object", "null"]},
        "prop2": {"type": ["boolean", "null"]},
        "path": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"r": _num, "minimizer": _vec, "value": _num, "objective": _num, "iterations": {"type": "integer"}},
                "required": ["r", "minimizer", "value", "objective"],
            },
        },
    },
    "required": ["version", "problem", "point", "objective", "slacks"],
    "additionalProperties": False,
}

CHECK_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "passed": {"type": "boolean"},
        "graph": {"type": "object"},
        "schedule": {"type": "object"},
        "energy": {"type": ["object", "null"]},
    },
    "required": ["version", "passed", "graph", "schedule"],
    "additionalProperties": False,
}


def validate(doc, schema: dict, what: str = "document") -> None:
    """Raise ``ValueError`` naming the offending path on the first schema violation."""
    v = jsonschema.Draft202012Validator(schema)
    err = jsonschema.exceptions.best_match(v.iter_errors(doc))
    if err is not None:
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ValueError(f"{what}: {where}: {err.message}")
