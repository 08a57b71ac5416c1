"""Deterministic rendering of experiment reports and Wilcoxon matrices.

Three formats are supported:

``table``
    Fixed-width accuracy matrix: rows are (train, test) pairs, columns are
    methods, cells are percentages at one decimal and the best cell(s) of
    each row carry a trailing ``*``. Sweeps get one matrix per noise
    fraction; cross-validation runs add a per-fold listing.
``delimited``
    Comma-separated summary rows
    ``kind,train,test,fraction,method,mean_accuracy,stderr,trials``, ready
    for plotting.
``structured``
    A JSON document holding the provenance header and every report with its
    per-trial records.

Every format starts with a provenance header (artifact version, seeds,
datasets and method parameters) and contains no timestamps, so identical
inputs always render to identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import replace
from itertools import permutations
from typing import Mapping, Sequence

from dmtree import __version__
from dmtree.experiment import ExperimentReport
from dmtree.stats import PairedAccuracies, WilcoxonResult, wilcoxon_signed_rank

FORMATS = ("table", "delimited", "structured")
REPORT_SCHEMA = "dmtree-report"
REPORT_SCHEMA_VERSION = 1
# means closer than this count as tied for best-in-row
TIE_TOLERANCE = 1e-12


class ReportError(ValueError):
    pass


def percent(acc: float) -> str:
    """Accuracy as a percentage string with one decimal, e.g. ``"95.7"``."""
    return f"{100.0 * acc:.1f}"


def _check(reports: Sequence[ExperimentReport]) -> str:
    if not reports:
        raise ReportError("no reports to render")
    kinds = {r.kind for r in reports}
    if len(kinds) != 1:
        raise ReportError(f"cannot render mixed report kinds together: {sorted(kinds)}")
    return kinds.pop()


def _unique(items):
    return list(dict.fromkeys(items))


def provenance(reports: Sequence[ExperimentReport]) -> dict:
    return {
        "artifact_version": __version__,
        "kind": reports[0].kind,
        "seeds": _unique(r.seed for r in reports),
        "datasets": _unique(n for r in reports for n in (r.train_name, r.test_name)),
        "methods": {r.method_label: r.method for r in reports},
        "normalization": _unique(r.normalization for r in reports),
        "sigma_source": _unique(r.sigma_source for r in reports if r.sigma_source is not None),
        "trials": _unique(len(r.trials) for r in reports),
    }


def _header_lines(reports, comment: str) -> list[str]:
    p = provenance(reports)
    lines = [f"{comment} dmtree {p['artifact_version']} report kind={p['kind']}"]
    lines.append(f"{comment} seeds: {', '.join(str(s) for s in p['seeds'])}")
    lines.append(f"{comment} datasets: {', '.join(p['datasets'])}")
    for label, desc in p["methods"].items():
        lines.append(f"{comment} method {label}: {desc}")
    for note in p["normalization"]:
        lines.append(f"{comment} normalization: {note}")
    if p["sigma_source"]:
        lines.append(f"{comment} noise sigma from: {', '.join(p['sigma_source'])} set")
    for r in reports:
        for w in r.warnings:
            lines.append(f"{comment} warning ({r.method_label}, {r.train_name}): {w}")
    return lines


def _matrix(reports: Sequence[ExperimentReport]) -> list[str]:
    methods = _unique(r.method_label for r in reports)
    rows = _unique((r.train_name, r.test_name) for r in reports)
    cell = {(r.train_name, r.test_name, r.method_label): r.mean_accuracy for r in reports}
    head = ["training", "test", *methods]
    body = []
    for train, test in rows:
        vals = [cell.get((train, test, m)) for m in methods]
        best = max(v for v in vals if v is not None)
        texts = []
        for v in vals:
            if v is None:
                texts.append("-")
            else:
                texts.append(percent(v) + ("*" if best - v <= TIE_TOLERANCE else ""))
        body.append([train, test, *texts])
    if len(rows) > 1:
        avg = []
        for m in methods:
            vs = [cell[(a, b, m)] for a, b in rows if (a, b, m) in cell]
            avg.append(percent(sum(vs) / len(vs)))
        body.append(["average", "", *avg])
    widths = [max(len(str(x)) for x in col) for col in zip(head, *body)]
    out = ["  ".join(str(x).ljust(w) for x, w in zip(head, widths)).rstrip()]
    out.append("  ".join("-" * w for w in widths))
    out.extend("  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip() for row in body)
    return out


def _render_table(reports: Sequence[ExperimentReport], kind: str) -> str:
    lines = _header_lines(reports, "#")
    if kind == "sweep":
        for frac in _unique(r.fraction for r in reports):
            lines.append("")
            lines.append(f"noise fraction {frac:g}")
            lines.extend(_matrix([r for r in reports if r.fraction == frac]))
    else:
        lines.append("")
        lines.extend(_matrix(reports))
    if kind == "cv":
        for r in reports:
            lines.append("")
            lines.append(f"{r.method_label} on {r.train_name}: per-fold accuracy")
            lines.extend(f"  fold {t.trial_index}: {percent(t.accuracy)}" for t in r.trials)
            lines.append(f"  mean: {percent(r.mean_accuracy)}")
    if kind == "cross_lab" and any(r.fraction is not None for r in reports):
        lines.append("")
        lines.append("clean test accuracy (no added noise)")
        lines.extend(_matrix([_clean_copy(r) for r in reports]))
    return "\n".join(lines) + "\n"


def _clean_copy(r: ExperimentReport) -> ExperimentReport:
    return replace(r, mean_accuracy=r.clean_accuracy)


def _render_delimited(reports: Sequence[ExperimentReport]) -> str:
    buf = io.StringIO()
    buf.write("\n".join(_header_lines(reports, "#")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "train", "test", "fraction", "method", "mean_accuracy", "stderr", "trials"])
    for r in reports:
        frac = "" if r.fraction is None else f"{r.fraction:g}"
        w.writerow([r.kind, r.train_name, r.test_name, frac, r.method_label, repr(r.mean_accuracy), repr(r.stderr), len(r.trials)])
    return buf.getvalue()


def _render_structured(reports: Sequence[ExperimentReport]) -> str:
    doc = {
        "schema": REPORT_SCHEMA,
        "schema_version": REPORT_SCHEMA_VERSION,
        "provenance": provenance(reports),
        "reports": [r.to_dict() for r in reports],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_report(reports: Sequence[ExperimentReport], format: str = "table") -> str:
    """Render ``reports`` in one of :data:`FORMATS`.

    Raises
    ------
    ReportError
        On an empty list, mixed report kinds or an unknown format.
    """
    kind = _check(reports)
    if format == "table":
        return _render_table(reports, kind)
    if format == "delimited":
        return _render_delimited(reports)
    if format == "structured":
        return _render_structured(reports)
    raise ReportError(f"unknown format {format!r}; choose from {FORMATS}")


def pairwise_wilcoxon(columns: Mapping[str, Sequence[float]]) -> dict[tuple[str, str], WilcoxonResult | None]:
    """One-sided test for every ordered pair ``(row, column)`` of methods,
    alternative "row method is more accurate". Pairs whose differences are
    all zero map to ``None``."""
    names = list(columns)
    lengths = {len(v) for v in columns.values()}
    if len(lengths) != 1:
        raise ReportError("every method column needs the same number of conditions")
    out = {}
    for a, b in permutations(names, 2):
        pairs = list(zip(columns[a], columns[b]))
        try:
            out[(a, b)] = wilcoxon_signed_rank(PairedAccuracies((a, b), pairs))
        except ValueError as exc:
            if "zero" not in str(exc):
                raise
            out[(a, b)] = None
    return out


def render_wilcoxon(columns: Mapping[str, Sequence[float]], format: str = "table", alpha: float = 0.05) -> str:
    """p-value matrix: the row method is tested as more accurate than the
    column method. In ``table`` format, p-values at or below ``alpha`` carry
    a trailing ``*``; undefined tests show ``n/a``."""
    if len(columns) < 2:
        raise ReportError("at least two method columns are required")
    results = pairwise_wilcoxon(columns)
    names = list(columns)
    if format == "structured":
        doc = {
            "schema": "dmtree-wilcoxon",
            "schema_version": 1,
            "artifact_version": __version__,
            "alternative": "row method more accurate than column method",
            "zero_differences": "dropped",
            "ties": "average ranks",
            "tests": [
                {"row": a, "column": b, **({"p_one_sided": None} if res is None else {
                    "p_one_sided": res.p_one_sided,
                    "n_effective": res.n_effective,
                    "w_plus": res.w_plus,
                    "w_minus": res.w_minus,
                    "method": res.method,
                    "zeros_dropped": res.zeros_dropped,
                })}
                for (a, b), res in results.items()
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def cell(a, b):
        if a == b:
            return "-"
        res = results[(a, b)]
        if res is None:
            return "n/a"
        return f"{res.p_one_sided:.3f}" + ("*" if format == "table" and res.p_one_sided <= alpha else "")

    if format == "delimited":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p_value", *names])
        for a in names:
            w.writerow([a, *(cell(a, b) for b in names)])
        return buf.getvalue()
    if format != "table":
        raise ReportError(f"unknown format {format!r}; choose from {FORMATS}")
    head = ["p-value", *names]
    body = [[a, *(cell(a, b) for b in names)] for a in names]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    lines = [
        f"# dmtree {__version__} one-sided Wilcoxon signed-rank test; row method more accurate than column method",
        "# zero differences dropped, tied magnitudes share average ranks; * marks p <= " + f"{alpha:g}",
        "  ".join(x.ljust(w) for x, w in zip(head, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(x.ljust(w) for x, w in zip(row, widths)).rstrip() for row in body)
    return "\n".join(lines) + "\n"


def method_columns(reports: Sequence[ExperimentReport]) -> dict[str, list[float]]:
    """Mean accuracies per method over the shared (train, test, fraction)
    conditions, in first-appearance order; conditions missing for any
    method are dropped so columns stay paired."""
    _check(reports)
    methods = _unique(r.method_label for r in reports)
    conds = _unique((r.train_name, r.test_name, r.fraction) for r in reports)
    cell = {(r.train_name, r.test_name, r.fraction, r.method_label): r.mean_accuracy for r in reports}
    shared = [c for c in conds if all((*c, m) in cell for m in methods)]
    return {m: [cell[(*c, m)] for c in shared] for m in methods}
