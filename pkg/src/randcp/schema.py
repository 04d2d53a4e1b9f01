"""JSON Schemas of the documents written by the command-line tool."""

from __future__ import annotations

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_OPT_INT = {"type": ["integer", "null"]}
_VERSION = {"const": SCHEMA_VERSION}

DETECT_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "parametric detection report",
    "type": "object",
    "required": [
        "schema_version",
        "stat",
        "stat_root",
        "k_hat",
        "lambda_hat",
        "delta_hat_sq",
        "reject",
        "alpha",
        "critical_value",
        "ci_low",
        "ci_high",
        "n",
        "model",
        "method",
    ],
    "properties": {
        "schema_version": _VERSION,
        "stat": {"type": "number", "minimum": 0},
        "stat_root": {"type": "number", "minimum": 0},
        "k_hat": _INT,
        "lambda_hat": _NUM,
        "delta_hat_sq": {"type": "number", "minimum": 0},
        "reject": {"type": "boolean"},
        "alpha": _NUM,
        "critical_value": _NUM,
        "ci_low": _OPT_INT,
        "ci_high": _OPT_INT,
        "n": _INT,
        "model": {"type": "string"},
        "method": {"enum": ["gumbel", "bridge", "fixed"]},
    },
}

NONPARAM_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "non-parametric volatility test report",
    "type": "object",
    "required": ["schema_version", "method", "vstar", "vn", "k_n", "u_n", "m_n", "reject", "alpha", "critical_value", "n"],
    "properties": {
        "schema_version": _VERSION,
        "method": {"const": "nonparam"},
        "vstar": {"type": "number", "minimum": 0},
        "vn": _NUM,
        "k_n": _INT,
        "u_n": _NUM,
        "m_n": _INT,
        "reject": {"type": "boolean"},
        "alpha": _NUM,
        "critical_value": _NUM,
        "n": _INT,
    },
}

CI_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "change location interval",
    "type": "object",
    "required": ["schema_version", "k_hat", "ci_low", "ci_high", "delta_hat_sq", "alpha", "xi_low", "xi_high", "argmax_samples", "n"],
    "properties": {
        "schema_version": _VERSION,
        "k_hat": _INT,
        "ci_low": _INT,
        "ci_high": _INT,
        "delta_hat_sq": {"type": "number", "exclusiveMinimum": 0},
        "alpha": _NUM,
        "xi_low": _NUM,
        "xi_high": _NUM,
        "argmax_samples": _INT,
        "n": _INT,
    },
}

CRITVALS_TABLE = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "critical value table",
    "type": "object",
    "required": ["schema_version", "method", "rows"],
    "properties": {
        "schema_version": _VERSION,
        "method": {"enum": ["gumbel", "bridge"]},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["alpha", "d", "n", "critical_value"],
                "properties": {"alpha": _NUM, "d": _INT, "n": _INT, "critical_value": _NUM},
            },
        },
    },
}

_QUANTILES = {"type": "object", "additionalProperties": _NUM}

DIST_SUMMARY = {
    "type": "object",
    "required": ["count", "mean", "std", "min", "max", "quantiles"],
    "properties": {
        "count": _INT,
        "mean": _NUM,
        "std": _NUM,
        "min": _NUM,
        "max": _NUM,
        "quantiles": _QUANTILES,
    },
}

ARGMAX_DIST = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "argmax sample summary",
    "type": "object",
    "required": ["schema_version", "replications", "seed", "T", "h", "drift", "summary"],
    "properties": {
        "schema_version": _VERSION,
        "replications": _INT,
        "seed": _INT,
        "T": _NUM,
        "h": _NUM,
        "drift": _NUM,
        "summary": DIST_SUMMARY,
    },
}

REPLICATE_SUMMARY = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "replication run summary",
    "type": "object",
    "required": ["schema_version", "figure", "seed", "replications", "experiments", "files"],
    "properties": {
        "schema_version": _VERSION,
        "figure": {"type": ["string", "null"]},
        "seed": _INT,
        "replications": _INT,
        "experiments": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["spec", "replications", "skip_count", "metrics"],
                "properties": {
                    "spec": {"type": "object"},
                    "replications": _INT,
                    "skip_count": _INT,
                    "metrics": {"type": "object", "additionalProperties": DIST_SUMMARY},
                },
            },
        },
        "files": {"type": "array", "items": {"type": "string"}},
    },
}

SIM_SIDECAR = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "simulated dataset sidecar",
    "type": "object",
    "required": ["schema_version", "kind", "k_star", "lambda_star", "n", "config"],
    "properties": {
        "schema_version": _VERSION,
        "kind": {"enum": ["amoc-normal", "ito"]},
        "k_star": _INT,
        "lambda_star": _NUM,
        "n": _INT,
        "config": {"type": "object"},
    },
}
