"""Report records, their JSON schemas and atomic file output.

JSON files carry ``schema_version`` and ``kind`` and are written with sorted
keys, so equal inputs give byte-identical files. The per-R CSV has the fixed
column order ``R, lhs, rhs, ratio, lhs_converged, rhs_converged``; the plot
file has two whitespace-separated columns ``log(R) log(ratio)``.
"""

import csv
import io
import json
import math
import os
import tempfile

import jsonschema

SCHEMA_VERSION = 1
CSV_COLUMNS = ("R", "lhs", "rhs", "ratio", "lhs_converged", "rhs_converged")

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
_HEADER = {
    "schema_version": {"const": SCHEMA_VERSION},
}

BUILD_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "family", "n", "R", "C", "m", "term_count",
                 "min_spacing", "l2_norm", "log10_l2_norm", "hs_norms"],
    "properties": {
        **_HEADER,
        "kind": {"const": "build"},
        "job": {"type": "string"},
        "family": {"type": "string"},
        "n": {"type": "integer"},
        "R": _NUM,
        "C": _NUM,
        "m": {"type": ["integer", "null"]},
        "seed": {"type": "integer"},
        "term_count": {"type": "integer", "minimum": 0},
        "min_spacing": _NUM_OR_NULL,
        "l2_norm": _NUM,
        "log10_l2_norm": _NUM,
        "hs_norms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["s", "value", "log10_value"],
                "properties": {"s": _NUM, "value": _NUM, "log10_value": _NUM},
            },
        },
    },
}

_RECORD = {
    "type": "object",
    "required": list(CSV_COLUMNS) + ["log10_lhs", "log10_rhs", "log10_ratio", "term_count"],
    "properties": {
        "R": _NUM, "lhs": _NUM, "rhs": _NUM, "ratio": _NUM,
        "log10_lhs": _NUM, "log10_rhs": _NUM, "log10_ratio": _NUM,
        "lhs_converged": {"type": "boolean"}, "rhs_converged": {"type": "boolean"},
        "lhs_refined": _NUM_OR_NULL, "rhs_refined": _NUM_OR_NULL,
        "term_count": {"type": "integer"},
    },
}

_EXP = {"anyOf": [_NUM, {"const": "inf"}]}

SCAN_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "job", "required", "family", "n", "m", "p", "q",
                 "alpha", "s", "region_policy", "records", "fitted_slope", "predicted_slope",
                 "slope_stderr", "verdict", "converged"],
    "properties": {
        **_HEADER,
        "kind": {"const": "scan"},
        "job": {"type": "string"},
        "required": {"type": "boolean"},
        "family": {"type": "string"},
        "n": {"type": "integer"},
        "m": {"type": ["integer", "null"]},
        "p": _EXP, "q": _EXP, "alpha": _NUM, "s": _NUM,
        "region_policy": {"type": "string"},
        "records": {"type": "array", "minItems": 3, "items": _RECORD},
        "fitted_slope": _NUM, "predicted_slope": _NUM, "slope_stderr": _NUM,
        "verdict": {"enum": ["blow-up-consistent", "bounded-consistent", "inconclusive"]},
        "converged": {"type": "boolean"},
    },
}

CHECK_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "checks", "failures", "warnings"],
    "properties": {
        **_HEADER,
        "kind": {"const": "check"},
        "fault": {"type": ["string", "null"]},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "residual", "tol", "passed", "expected", "actual"],
                "properties": {
                    "name": {"type": "string"},
                    "residual": _NUM, "tol": _NUM,
                    "passed": {"type": "boolean"},
                    "expected": {}, "actual": {},
                },
            },
        },
        "failures": {"type": "integer", "minimum": 0},
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
}

SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "status", "conclusion", "rows", "required_inconclusive"],
    "properties": {
        **_HEADER,
        "kind": {"const": "summary"},
        "status": {"enum": ["pass", "partial", "fail"]},
        "conclusion": {"type": "string"},
        "required_inconclusive": {"type": "array", "items": {"type": "string"}},
        "rows": {"type": "array", "items": {"type": "object"}},
    },
}

SCHEMAS = {"build": BUILD_SCHEMA, "scan": SCAN_SCHEMA, "check": CHECK_SCHEMA, "summary": SUMMARY_SCHEMA}


def validate(doc):
    """Validate a report dict against the schema named by its ``kind``."""
    jsonschema.validate(doc, SCHEMAS[doc["kind"]])


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def log10(v):
    return math.log10(v) if v > 0 else -math.inf


def atomic_write(path, text):
    """Write via a temp file in the target directory and rename into place."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(doc):
    validate(doc)
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, doc):
    atomic_write(path, dumps(doc))


def scan_document(report, job="", required=False):
    records = []
    for r in report.records:
        records.append({
            "R": r.R, "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio,
            "log10_lhs": log10(r.lhs), "log10_rhs": log10(r.rhs), "log10_ratio": log10(r.ratio),
            "lhs_converged": bool(r.lhs_converged), "rhs_converged": bool(r.rhs_converged),
            "lhs_refined": r.lhs_refined, "rhs_refined": r.rhs_refined,
            "term_count": int(r.term_count),
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "scan",
        "job": job,
        "required": bool(required),
        "family": report.family,
        "n": report.n,
        "m": report.m,
        "p": _jsonable(report.p),
        "q": _jsonable(report.q),
        "alpha": report.alpha,
        "s": report.s,
        "region_policy": report.region_policy,
        "records": records,
        "fitted_slope": round(report.fitted_slope, 4),
        "predicted_slope": round(report.predicted_slope, 4),
        "slope_stderr": round(report.slope_stderr, 4),
        "verdict": report.verdict,
        "converged": bool(report.converged),
    }


def scan_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report.records:
        writer.writerow([repr(r.R), repr(r.lhs), repr(r.rhs), repr(r.ratio),
                         str(bool(r.lhs_converged)).lower(), str(bool(r.rhs_converged)).lower()])
    return buf.getvalue()


def plot_data(report):
    lines = ["# log(R) log(ratio)"]
    for r in report.records:
        lines.append(f"{math.log(r.R):.12g} {math.log(r.ratio):.12g}")
    return "\n".join(lines) + "\n"


def terms_csv(w):
    """One term per line: center and modulation coordinates, then width."""
    d = w.signature.dim
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"c{i}" for i in range(d)] + [f"xi{i}" for i in range(d)] + ["width"])
    for c, m in zip(w.centers, w.modulations):
        writer.writerow([repr(float(v)) for v in c] + [repr(float(v)) for v in m] + [repr(float(w.width))])
    return buf.getvalue()


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    validate(doc)
    return doc


def from_jsonable(v):
    return math.inf if v == "inf" else v
