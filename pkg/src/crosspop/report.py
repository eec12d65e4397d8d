"""Human-readable summaries, machine-readable results, and forest plots."""

import pathlib

import numpy as np

from .api import ResultDocument
from .errors import ValidationError

TITLES = {
    "ate-internal": "AVERAGE TREATMENT EFFECT ESTIMATES IN INTERNAL POPULATIONS",
    "ate-external": "AVERAGE TREATMENT EFFECT ESTIMATES IN AN EXTERNAL POPULATION",
    "ste-internal": "SUBGROUP TREATMENT EFFECT ESTIMATES IN INTERNAL POPULATIONS",
    "ste-external": "SUBGROUP TREATMENT EFFECT ESTIMATES IN AN EXTERNAL POPULATION",
}

SECTIONS = (
    ("diff", "Treatment effect (mean difference) estimates:"),
    ("arm0", "Potential outcome mean estimates under A = 0:"),
    ("arm1", "Potential outcome mean estimates under A = 1:"),
)

# fixed geometry for the forest plot; all sizes in SVG user units
FOREST_GEOM = {
    "width": 760,
    "row_height": 26,
    "margin_left": 150,
    "margin_right": 250,
    "margin_top": 58,
    "margin_bottom": 46,
    "square": 7,
    "font_size": 12,
}


def format_summary(result: ResultDocument) -> str:
    """Fixed-width 4-decimal tables in the order: effects, A=0 means, A=1
    means, then the learner libraries used per nuisance model."""
    out = [TITLES[result.analysis], ""]
    for quantity, heading in SECTIONS:
        out.append(heading)
        out.append("-" * len(heading))
        out.extend(_format_table(result, result.tables[quantity]))
        out.append("")
        out.append("")
    out.append("Learner libraries used:")
    out.append("-" * len("Learner libraries used:"))
    models = result.metadata["models"]
    out.append(f"Outcome model: {models['outcome']}")
    out.append(f"Treatment model: {models['treatment']}")
    out.append(f"Source model: {models['source']}")
    if models.get("external"):
        out.append(f"External model: {models['external']}")
    out.append("")
    return "\n".join(out)


def _format_table(result: ResultDocument, rows) -> list:
    internal = result.analysis.endswith("internal")
    subgroup = result.analysis.startswith("ste")
    headers = []
    if internal:
        headers.append("Source")
    if subgroup:
        headers.append("Subgroup")
    headers += ["Estimate", "SE", "Lower 95%", "Upper 95%"]
    has_scb = subgroup
    if has_scb:
        headers += ["SCB lower", "SCB upper"]

    cells = []
    last_source = None
    for row in rows:
        line = []
        if internal:
            label = row.target.source or ""
            line.append("" if label == last_source else label)
            last_source = label
        if subgroup:
            line.append(row.target.subgroup or "")
        line += [f"{row.estimate:.4f}", f"{row.se:.4f}",
                 f"{row.ci_lower:.4f}", f"{row.ci_upper:.4f}"]
        if has_scb:
            line += [f"{row.scb_lower:.4f}", f"{row.scb_upper:.4f}"]
        cells.append(line)

    widths = [max(len(h), max((len(c[i]) for c in cells), default=0))
              for i, h in enumerate(headers)]
    lines = [" ".join(h.rjust(w) for h, w in zip(headers, widths))]
    for line in cells:
        lines.append(" ".join(v.rjust(w) for v, w in zip(line, widths)))
    return [" " + ln for ln in lines]


def _json_render(obj, indent=0) -> str:
    """JSON writer with %.17g floats (exact round-trip) and sorted keys."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k in sorted(obj):
            items.append(f'{pad}  "{_escape(str(k))}": {_json_render(obj[k], indent + 1)}')
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_json_render(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (float, np.floating)):
        if np.isnan(obj):
            return "null"
        return f"{float(obj):.17g}"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return f'"{_escape(str(obj))}"'


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _row_record(row) -> dict:
    return {
        "target": row.target.source if row.target.population == "internal" else "external",
        "subgroup": row.target.subgroup,
        "estimate": row.estimate,
        "se": row.se,
        "ci_lower": row.ci_lower,
        "ci_upper": row.ci_upper,
        "scb_lower": row.scb_lower,
        "scb_upper": row.scb_upper,
    }


def result_json(result: ResultDocument) -> str:
    doc = {
        "analysis": result.analysis,
        "metadata": result.metadata,
        "tables": {
            "df_A0": [_row_record(r) for r in result.tables["arm0"]],
            "df_A1": [_row_record(r) for r in result.tables["arm1"]],
            "df_dif": [_row_record(r) for r in result.tables["diff"]],
        },
    }
    return _json_render(doc) + "\n"


CSV_HEADER = "target,subgroup,estimate,se,ci_lower,ci_upper,scb_lower,scb_upper"


def _table_csv(rows) -> str:
    lines = [CSV_HEADER]
    for row in rows:
        rec = _row_record(row)
        lines.append(",".join([
            rec["target"] or "",
            rec["subgroup"] or "",
            f"{rec['estimate']:.17g}",
            f"{rec['se']:.17g}",
            f"{rec['ci_lower']:.17g}",
            f"{rec['ci_upper']:.17g}",
            "" if rec["scb_lower"] is None else f"{rec['scb_lower']:.17g}",
            "" if rec["scb_upper"] is None else f"{rec['scb_upper']:.17g}",
        ]))
    return "\n".join(lines) + "\n"


def serialize_results(result: ResultDocument, out_dir, stem="results",
                      forest_svg=False, use_scb=False) -> dict:
    """Write the JSON document, the three CSV tables, the summary text, and
    (optionally) the forest plot.  Timings go to a sidecar so the main JSON is
    byte-identical across runs."""
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    paths["json"] = out_dir / f"{stem}.json"
    paths["json"].write_text(result_json(result), encoding="utf-8")

    for name, key in (("df_A0", "arm0"), ("df_A1", "arm1"), ("df_dif", "diff")):
        paths[name] = out_dir / f"{stem}_{name}.csv"
        paths[name].write_text(_table_csv(result.tables[key]), encoding="utf-8")

    paths["summary"] = out_dir / f"{stem}_summary.txt"
    paths["summary"].write_text(format_summary(result), encoding="utf-8")

    if forest_svg:
        paths["forest"] = out_dir / f"{stem}_forest.svg"
        paths["forest"].write_bytes(emit_forest_svg(result, use_scb=use_scb))

    if result.timings:
        paths["timings"] = out_dir / f"{stem}_timings.json"
        paths["timings"].write_text(_json_render(result.timings) + "\n", encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}


def _nice_ticks(lo, hi, n=5):
    span = hi - lo
    if span <= 0:
        span = max(abs(hi), 1.0)
        lo, hi = lo - span / 2, hi + span / 2
    raw = span / max(n - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if step >= raw:
            break
    first = np.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def emit_forest_svg(result: ResultDocument, use_scb=False, sort=None, dims=None) -> bytes:
    """Standalone SVG forest plot of the effect estimates (internal targets).

    One row per target: a square at the estimate, whiskers at the CI (or SCB
    when `use_scb`), and a numeric annotation column.  Rendering is pure
    string building, deterministic for fixed input and options.
    """
    if not result.analysis.endswith("internal"):
        raise ValidationError("forest plot defined for internal targets")
    rows = list(result.tables["diff"])
    if use_scb and rows and rows[0].scb_lower is None:
        raise ValidationError("use_scb requires simultaneous bands (subgroup analyses)")
    if sort == "estimate":
        rows.sort(key=lambda r: -r.estimate)

    geom = dict(FOREST_GEOM)
    if dims:
        geom.update(dims)
    width = geom["width"]
    rh = geom["row_height"]
    height = geom["margin_top"] + rh * len(rows) + geom["margin_bottom"]
    x0 = geom["margin_left"]
    x1 = width - geom["margin_right"]

    los = [r.scb_lower if use_scb else r.ci_lower for r in rows]
    his = [r.scb_upper if use_scb else r.ci_upper for r in rows]
    lo, hi = min(los), max(his)
    pad = 0.06 * (hi - lo if hi > lo else 1.0)
    lo, hi = lo - pad, hi + pad

    def sx(v):
        return x0 + (v - lo) / (hi - lo) * (x1 - x0)

    fs = geom["font_size"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" '
        f'font-family="Helvetica, Arial, sans-serif" font-size="{fs}">',
        f'<text x="{x0:.2f}" y="{geom["margin_top"] - 34}" font-weight="bold">'
        f"{_escape_xml(TITLES[result.analysis].title())}</text>",
    ]
    band_name = "SCB" if use_scb else "95% CI"
    parts.append(
        f'<text x="{x1 + 14:.2f}" y="{geom["margin_top"] - 12}">'
        f"Estimate [{band_name}]</text>"
    )

    axis_y = geom["margin_top"] + rh * len(rows) + 8
    parts.append(
        f'<line x1="{x0:.2f}" y1="{axis_y:.2f}" x2="{x1:.2f}" y2="{axis_y:.2f}" '
        f'stroke="black" stroke-width="1"/>'
    )
    for t in _nice_ticks(lo, hi):
        parts.append(
            f'<line x1="{sx(t):.2f}" y1="{axis_y:.2f}" x2="{sx(t):.2f}" '
            f'y2="{axis_y + 5:.2f}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{sx(t):.2f}" y="{axis_y + 18:.2f}" text-anchor="middle">{t:g}</text>'
        )
    if lo < 0.0 < hi:
        parts.append(
            f'<line x1="{sx(0):.2f}" y1="{geom["margin_top"] - 6:.2f}" '
            f'x2="{sx(0):.2f}" y2="{axis_y:.2f}" stroke="#888888" '
            f'stroke-width="1" stroke-dasharray="4 3"/>'
        )

    last_source = None
    for i, row in enumerate(rows):
        cy = geom["margin_top"] + rh * i + rh / 2
        label_parts = []
        src = row.target.source or ""
        if src and src != last_source:
            label_parts.append(src)
        last_source = src
        if row.target.subgroup:
            label_parts.append(row.target.subgroup)
        label = " / ".join(label_parts) if label_parts else src
        parts.append(
            f'<text x="{x0 - 10:.2f}" y="{cy + fs / 3:.2f}" text-anchor="end">'
            f"{_escape_xml(label)}</text>"
        )
        wl, wh = (row.scb_lower, row.scb_upper) if use_scb else (row.ci_lower, row.ci_upper)
        parts.append(
            f'<line x1="{sx(wl):.2f}" y1="{cy:.2f}" x2="{sx(wh):.2f}" y2="{cy:.2f}" '
            f'stroke="black" stroke-width="1.2"/>'
        )
        for wv in (wl, wh):
            parts.append(
                f'<line x1="{sx(wv):.2f}" y1="{cy - 4:.2f}" x2="{sx(wv):.2f}" '
                f'y2="{cy + 4:.2f}" stroke="black" stroke-width="1.2"/>'
            )
        s = geom["square"]
        parts.append(
            f'<rect x="{sx(row.estimate) - s / 2:.2f}" y="{cy - s / 2:.2f}" '
            f'width="{s}" height="{s}" fill="#2b4c7e"/>'
        )
        parts.append(
            f'<text x="{x1 + 14:.2f}" y="{cy + fs / 3:.2f}">'
            f"{row.estimate:.4f} [{wl:.4f}, {wh:.4f}]</text>"
        )

    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")


def _escape_xml(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
