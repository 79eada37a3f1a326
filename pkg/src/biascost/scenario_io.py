"""Scenario documents in, reports out.

Scenario files are UTF-8 JSON documents with a ``schema_version`` of ``"1"``.
Unknown keys are rejected at every level and every numeric constraint of the
domain types is re-checked on load.  Reports are written as JSON or CSV with
floats rendered to 17 significant digits so they reload bit-for-bit.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import sys
from enum import Enum
from typing import IO, Any, Iterable

import numpy as np

from .analysis import FrontierPoint, WelfareLossReport
from .economics import GradientCheckReport
from .model import (
    CostParams,
    EvaluationReport,
    FunctionalForms,
    GroupParams,
    Scenario,
    ScenarioError,
    SolverSettings,
)
from .solver import OracleResult, SolutionReport

__all__ = [
    "ParseError",
    "SCHEMA_VERSION",
    "VersionError",
    "dumps_scenario",
    "load_scenario",
    "loads_scenario",
    "render_report",
    "report_to_document",
    "scenario_from_document",
    "scenario_to_document",
    "write_report",
]

SCHEMA_VERSION = "1"
GROUP_HEADER = ("group", "ra", "rt", "bias_b", "health", "utility")
FRONTIER_HEADER = ("disparity_cap", "objective", "realized_disparity")
GRADCHECK_HEADER = ("group", "d_analytic", "d_numeric", "a_analytic", "a_numeric")

_TOP_KEYS = {"schema_version", "groups", "forms", "costs", "budget", "lambda", "solver"}
_GROUP_REQUIRED = ("name", "population", "eir", "severity", "rt_star")
_GROUP_OPTIONAL = ("d_baseline", "a_baseline", "weight")
_FORM_KEYS = tuple(f.name for f in dataclasses.fields(FunctionalForms))
_COST_KEYS = tuple(f.name for f in dataclasses.fields(CostParams))
_SOLVER_KEYS = tuple(f.name for f in dataclasses.fields(SolverSettings))
_BUDGET_KEYS = ("ra_total", "ra_star_total")


class ParseError(ScenarioError):
    """The input is not a well-formed scenario document."""


class VersionError(ScenarioError):
    """The document declares a schema version this package cannot read."""


# --- loading -----------------------------------------------------------------------


def _no_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ParseError(f"duplicate key {key!r}")
        out[key] = value
    return out


def _reject_constant(token):
    raise ParseError(f"non-finite number {token} is not allowed")


def _object(value, where: str, allowed: Iterable[str], required: Iterable[str] = ()) -> dict:
    if not isinstance(value, dict):
        raise ParseError(f"{where}: expected an object, got {type(value).__name__}")
    allowed = set(allowed)
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise ParseError(f"{where}: unknown key(s) {unknown}; allowed {sorted(allowed)}")
    missing = [k for k in required if k not in value]
    if missing:
        raise ParseError(f"{where}: missing required key(s) {missing}")
    return value


def scenario_from_document(doc: Any) -> Scenario:
    """Build a validated ``Scenario`` from an already-parsed document."""
    doc = _object(doc, "document", _TOP_KEYS, ("schema_version", "groups", "budget"))
    version = doc["schema_version"]
    if version != SCHEMA_VERSION:
        raise VersionError(
            f"schema_version: unsupported version {version!r}, expected {SCHEMA_VERSION!r}")

    raw_groups = doc["groups"]
    if not isinstance(raw_groups, list):
        raise ParseError("groups: expected an array")
    groups = []
    for k, g in enumerate(raw_groups):
        g = _object(g, f"groups[{k}]", _GROUP_REQUIRED + _GROUP_OPTIONAL, _GROUP_REQUIRED)
        groups.append(GroupParams(**g))

    forms = FunctionalForms(**_object(doc.get("forms", {}), "forms", _FORM_KEYS))
    costs = CostParams(**_object(doc.get("costs", {}), "costs", _COST_KEYS))
    budget = _object(doc["budget"], "budget", _BUDGET_KEYS, ("ra_total",))
    solver = SolverSettings(**_object(doc.get("solver", {}), "solver", _SOLVER_KEYS))
    return Scenario(
        groups=tuple(groups),
        forms=forms,
        costs=costs,
        ra_total=budget["ra_total"],
        ra_star_total=budget.get("ra_star_total"),
        lam=doc.get("lambda", 0.0),
        solver=solver,
    )


def loads_scenario(text: str | bytes) -> Scenario:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"scenario is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicates, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed scenario document: {exc}") from None
    return scenario_from_document(doc)


def load_scenario(source: str | os.PathLike | IO) -> Scenario:
    """Load a scenario from a path or from an open text/binary stream."""
    if hasattr(source, "read"):
        return loads_scenario(source.read())
    with open(source, "rb") as fh:
        return loads_scenario(fh.read())


# --- rendering ---------------------------------------------------------------------


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _json_scalar(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format_float(x) if math.isfinite(x) else "null"
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps_json(obj, level: int = 0) -> str:
    """JSON text with two-space indentation and 17-significant-digit floats.

    Non-finite floats become ``null``.
    """
    pad = "  " * (level + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps_json(v, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * level + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_json_scalar(v) for v in obj) + "]"
        items = [pad + dumps_json(v, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + "  " * level + "]"
    return _json_scalar(obj)


def scenario_to_document(scenario: Scenario) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "groups": [dataclasses.asdict(g) for g in scenario.groups],
        "forms": {
            "theta": list(scenario.forms.theta),
            "beta": scenario.forms.beta,
            "kappa": scenario.forms.kappa,
            "rho": scenario.forms.rho,
            "h_variant": scenario.forms.h_variant.value,
        },
        "costs": dataclasses.asdict(scenario.costs),
        "budget": {"ra_total": scenario.ra_total, "ra_star_total": scenario.ra_star_total},
        "lambda": scenario.lam,
        "solver": dataclasses.asdict(scenario.solver),
    }


def dumps_scenario(scenario: Scenario) -> str:
    return dumps_json(scenario_to_document(scenario)) + "\n"


def _plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


_KINDS = (
    (EvaluationReport, "evaluation"),
    (SolutionReport, "solution"),
    (WelfareLossReport, "welfare_loss"),
    (OracleResult, "oracle"),
    (GradientCheckReport, "gradcheck"),
)


def _is_frontier(report) -> bool:
    return isinstance(report, (list, tuple)) and all(isinstance(p, FrontierPoint) for p in report)


def report_to_document(report) -> dict:
    if _is_frontier(report):
        return {"kind": "frontier", "points": [_plain(p) for p in report]}
    for cls, kind in _KINDS:
        if isinstance(report, cls):
            return {"kind": kind, **_plain(report)}
    raise TypeError(f"unsupported report type {type(report).__name__}")


def _group_rows(report) -> list[list[str]]:
    if isinstance(report, SolutionReport):
        report = report.evaluation
    elif isinstance(report, OracleResult):
        if report.evaluation is None:
            return []
        report = report.evaluation
    if isinstance(report, EvaluationReport):
        return [[g.group] + [format_float(getattr(g, k)) for k in GROUP_HEADER[1:]]
                for g in report.per_group]
    if isinstance(report, WelfareLossReport):
        return [[g.group] + [format_float(v) for v in
                             (g.delta_ra, g.delta_rt, g.delta_bias_b, g.delta_h, g.delta_u)]
                for g in report.per_group]
    raise TypeError(f"unsupported report type {type(report).__name__}")


def _csv_rows(report) -> tuple[tuple[str, ...], list[list[str]]]:
    if _is_frontier(report):
        rows = [["inf" if p.disparity_cap is None else format_float(p.disparity_cap),
                 format_float(p.objective), format_float(p.realized_disparity)] for p in report]
        return FRONTIER_HEADER, rows
    if isinstance(report, GradientCheckReport):
        rows = [[report.groups[k]] + [format_float(v) for v in
                              (report.analytic_d[k], report.numeric_d[k],
                               report.analytic_a[k], report.numeric_a[k])]
                for k in range(len(report.analytic_d))]
        return GRADCHECK_HEADER, rows
    return GROUP_HEADER, _group_rows(report)


def render_report(report, fmt: str = "json") -> str:
    """Render a report as text in ``fmt`` (``"json"`` or ``"csv"``)."""
    if fmt == "json":
        return dumps_json(report_to_document(report)) + "\n"
    if fmt == "csv":
        header, rows = _csv_rows(report)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    raise ValueError(f"format: expected 'json' or 'csv', got {fmt!r}")


def write_report(report, fmt: str = "json",
                 destination: str | os.PathLike | IO | None = None) -> None:
    """Write ``report`` to a path, an open text stream, or stdout when ``destination`` is None."""
    text = render_report(report, fmt)
    if destination is None:
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
