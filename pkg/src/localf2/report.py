"""Report documents and their JSON / Markdown / CSV renderings.

Every document carries the three reporting items for a focal effect: the
exact p-value, interval estimates of the coefficients, and the local effect
size, each either filled in or explicitly marked "not applicable".
p-values are written in scientific notation at full precision; threshold
inequalities are rejected by the renderer itself.
"""

from __future__ import annotations

import hashlib
import json
from typing import Iterable, Optional

from . import __version__
from .effectsize import EffectSizeReport
from .resampling import BootstrapInterval, StabilitySummary

NOT_APPLICABLE = "not applicable"
SCHEMA = "localf2.report/1"
_FORBIDDEN = ("p <", "p >")


def format_p(p: float) -> str:
    """17 significant digits in scientific notation; round-trips exactly."""
    return f"{p:.16e}"


def data_digest(raw: bytes) -> str:
    return "sha256:" + hashlib.sha256(raw).hexdigest()


def _unique(items: Iterable[str]) -> list[str]:
    seen, out = set(), []
    for w in items:
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def metadata(command: str, seed: Optional[int], digest: Optional[str], timestamp: Optional[str]) -> dict:
    return {
        "tool": "localf2",
        "version": __version__,
        "command": command,
        "seed": seed,
        "timestamp": timestamp,
        "data_digest": digest,
    }


def effect_size_body(report: EffectSizeReport) -> dict:
    body = {
        "r2_A": report.r2_A,
        "r2_AB": report.r2_AB,
        "f2_global": report.f2_global,
        "f2_local": report.f2_local,
        "label": report.label,
        "F": report.F_stat,
        "p": format_p(report.p_exact) if report.p_exact is not None else NOT_APPLICABLE,
        "df": list(report.df),
        "n": report.n,
        "q": report.q,
        "p_AB": report.p_AB,
        "interval_level": report.interval_level,
        "intervals": (
            [{"name": c.name, "low": c.low, "high": c.high} for c in report.coefficient_intervals]
            if report.coefficient_intervals is not None
            else NOT_APPLICABLE
        ),
    }
    if report.adj_r2:
        body["adj_r2"] = dict(report.adj_r2)
    if report.ci_f2_local is not None:
        body["ci_f2_local"] = list(report.ci_f2_local)
    if report.definition_tag is not None:
        body["pseudo_r2_definition"] = report.definition_tag
    body.update(report.extras)
    return body


def document(variant: str, kind: str, meta: dict, body: dict, checklist: dict, warnings: Iterable[str]) -> dict:
    return {
        "schema": SCHEMA,
        "variant": variant,
        "kind": kind,
        "metadata": meta,
        "checklist": checklist,
        "body": body,
        "warnings": _unique(warnings),
    }


def effect_size_document(report: EffectSizeReport, meta: dict, extra_warnings=()) -> dict:
    body = effect_size_body(report)
    checklist = {
        "exact_p": body["p"],
        "coefficient_intervals": "reported" if report.coefficient_intervals is not None else NOT_APPLICABLE,
        "local_effect_size": report.f2_local,
    }
    return document(report.variant, "effect_size", meta, body, checklist, [*report.warnings, *extra_warnings])


def bootstrap_document(ci: BootstrapInterval, meta: dict, spec_info: dict) -> dict:
    body = {
        "f2_local": ci.estimate,
        "ci_f2_local": [ci.low, ci.high],
        "level": ci.level,
        "replicates": ci.replicates,
        "skipped": ci.skipped,
        "method": "case bootstrap, percentile interval",
        **spec_info,
    }
    checklist = {
        "exact_p": NOT_APPLICABLE,
        "coefficient_intervals": NOT_APPLICABLE,
        "local_effect_size": ci.estimate,
    }
    warnings = [f"{ci.skipped} degenerate bootstrap replicate(s) skipped"] if ci.skipped else []
    return document("ols", "bootstrap", meta, body, checklist, warnings)


def stability_document(summary: StabilitySummary, meta: dict) -> dict:
    body = {
        "rho2_A": summary.rho2_A,
        "rho2_AB": summary.rho2_AB,
        "f2_population": summary.f2_population,
        "rows": [r._asdict() for r in summary.rows],
    }
    checklist = {k: NOT_APPLICABLE for k in ("exact_p", "coefficient_intervals", "local_effect_size")}
    return document("ols", "stability", meta, body, checklist, summary.warnings)


def _check(text: str) -> str:
    for bad in _FORBIDDEN:
        if bad in text:
            raise AssertionError(f"refusing to emit threshold language {bad!r}")
    return text


def render_json(doc: dict) -> str:
    return _check(json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return NOT_APPLICABLE
    return str(v).replace("|", "\\|")


def render_markdown(doc: dict) -> str:
    body = doc["body"]
    lines = [f"# Effect-size report ({doc['variant']}, {doc['kind']})", ""]
    lines += ["## Reporting checklist", ""]
    lines += ["| item | value |", "|---|---|"]
    lines.append(f"| (1) exact p-value | {_cell(doc['checklist']['exact_p'])} |")
    lines.append(f"| (2) coefficient intervals | {_cell(doc['checklist']['coefficient_intervals'])} |")
    lines.append(f"| (3) local effect size f2_local | {_cell(doc['checklist']['local_effect_size'])} |")
    lines.append("")

    if doc["kind"] == "stability":
        lines += ["## Sampling behaviour", ""]
        lines += ["| estimator | n | mean | sd | bias | population_value | reps |", "|---|---|---|---|---|---|---|"]
        for r in body["rows"]:
            lines.append("| " + " | ".join(_cell(r[k]) for k in ("estimator", "n", "mean", "sd", "bias", "population_value", "reps")) + " |")
    else:
        lines += ["## Summary", "", "| quantity | value |", "|---|---|"]
        for key, value in body.items():
            if key in ("intervals", "rows") or isinstance(value, (dict, list)):
                continue
            lines.append(f"| {key} | {_cell(value)} |")
        if "ci_f2_local" in body:
            lo, hi = body["ci_f2_local"]
            lines.append(f"| ci_f2_local | [{_cell(lo)}, {_cell(hi)}] |")
        for key in ("adj_r2", "sigma2_u", "sigma2_e"):
            if isinstance(body.get(key), dict):
                for k, v in body[key].items():
                    lines.append(f"| {key}.{k} | {_cell(v)} |")
        if isinstance(body.get("intervals"), list):
            lines += ["", f"## Coefficient intervals ({_cell(body['interval_level'])} level)", ""]
            lines += ["| coefficient | low | high |", "|---|---|---|"]
            for c in body["intervals"]:
                lines.append(f"| {_cell(c['name'])} | {_cell(c['low'])} | {_cell(c['high'])} |")
    lines.append("")
    if doc["warnings"]:
        lines += ["## Warnings", ""]
        lines += [f"- {w}" for w in doc["warnings"]]
        lines.append("")
    meta = doc["metadata"]
    lines += ["## Metadata", ""]
    lines += [f"- {k}: {_cell(v)}" for k, v in meta.items()]
    return _check("\n".join(lines) + "\n")


def render_csv(summary: StabilitySummary) -> str:
    return _check(summary.to_csv())
