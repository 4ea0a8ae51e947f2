"""Plain-text rendering of a metrics report as four aligned tables."""

from __future__ import annotations

from .evaluate import MetricsReport

# canonical row order: analysts, mean analyst, syntheses, baselines
_PRIORITY = {"mean-analyst": 50, "bayes-synth": 60, "convex-synth": 61,
             "aic": 80, "bic": 81}


def _method_order(report: MetricsReport) -> list[str]:
    analysts = report.meta.get("analysts", [])
    seen, out = set(), []
    for r in report.rows:
        if r.method not in seen:
            seen.add(r.method)
            out.append(r.method)
    def key(name):
        if name in analysts:
            return (0, analysts.index(name))
        return (1, _PRIORITY.get(name, 99))
    return sorted(out, key=key)


def _grid(report: MetricsReport):
    splits = sorted({r.test_split for r in report.rows})
    protocols = [p for p in ("once", "ten") if any(r.protocol == p for r in report.rows)]
    return splits, protocols


def _fmt(value, nd=2, width=9) -> str:
    if value is None:
        return "--".rjust(width)
    return f"{value:.{nd}f}".rjust(width)


def _cell(report, method, split, protocol, attr, nd=2, width=9) -> str:
    rows = report.select(method=method, test_split=split, protocol=protocol)
    if not rows:
        return "--".rjust(width)
    return _fmt(getattr(rows[0], attr), nd, width)


_PROTO_LABEL = {"once": "ONCE", "ten": "10/10"}


def _metric_table(report: MetricsReport, title: str, attr: str, nd: int = 2,
                  total: bool = False) -> str:
    splits, protocols = _grid(report)
    width = 9
    lines = [title, ""]
    header1 = " " * 16
    header2 = "METHOD".ljust(16)
    for s in splits:
        block = f"TEST SPLIT {s}".center(width * len(protocols))
        header1 += " " + block
        for p in protocols:
            header2 += " " + _PROTO_LABEL[p].rjust(width)
    if total:
        header1 += " " + "TOTAL".center(width * len(protocols))
        for p in protocols:
            header2 += " " + _PROTO_LABEL[p].rjust(width)
    lines += [header1, header2, "-" * len(header2)]
    for method in _method_order(report):
        line = method.upper().ljust(16)
        totals = {p: 0.0 for p in protocols}
        complete = {p: True for p in protocols}
        for s in splits:
            for p in protocols:
                line += " " + _cell(report, method, s, p, attr, nd, width)
                rows = report.select(method=method, test_split=s, protocol=p)
                v = getattr(rows[0], attr) if rows else None
                if v is None:
                    complete[p] = False
                else:
                    totals[p] += v
        if total:
            for p in protocols:
                line += " " + (_fmt(totals[p], nd, width) if complete[p] else "--".rjust(width))
        lines.append(line)
    return "\n".join(lines)


def _calibration_table(report: MetricsReport) -> str:
    splits, protocols = _grid(report)
    protocol = "once" if "once" in protocols else protocols[0]
    width = 8
    lines = [
        "CALIBRATION OF THE PREDICTIVE DISTRIBUTION (LOG SCALE, "
        + _PROTO_LABEL[protocol] + ")",
        "",
    ]
    header1 = " " * 16
    header2 = "METHOD".ljust(16)
    for s in splits:
        header1 += " " + f"TEST SPLIT {s}".center(width * 3 + 2)
        for lab in ("VAR", "MSE", "%CVG"):
            header2 += " " + lab.rjust(width)
    header1 += " " + "AVERAGE".center(width * 4 + 3)
    for lab in ("VAR", "MSE", "%CVG", "MSE/VAR"):
        header2 += " " + lab.rjust(width)
    lines += [header1, header2, "-" * len(header2)]
    for method in _method_order(report):
        cells = []
        acc = {"avg_pred_var": [], "mse_log_per_case": [], "coverage_pct": []}
        for s in splits:
            rows = report.select(method=method, test_split=s, protocol=protocol)
            row = rows[0] if rows else None
            if row is None or row.avg_pred_var is None:
                cells += ["--".rjust(width)] * 3
                continue
            cells += [_fmt(row.avg_pred_var, 3, width), _fmt(row.mse_log_per_case, 3, width),
                      _fmt(row.coverage_pct, 2, width)]
            acc["avg_pred_var"].append(row.avg_pred_var)
            acc["mse_log_per_case"].append(row.mse_log_per_case)
            acc["coverage_pct"].append(row.coverage_pct)
        if not acc["avg_pred_var"]:
            continue
        n = len(acc["avg_pred_var"])
        var_avg = sum(acc["avg_pred_var"]) / n
        mse_avg = sum(acc["mse_log_per_case"]) / n
        cvg_avg = sum(acc["coverage_pct"]) / n
        cells += [_fmt(var_avg, 3, width), _fmt(mse_avg, 3, width), _fmt(cvg_avg, 2, width),
                  _fmt(mse_avg / var_avg if var_avg else None, 3, width)]
        lines.append(method.upper().ljust(16) + " " + " ".join(cells))
    return "\n".join(lines)


def render_tables(report: MetricsReport) -> str:
    """The four standard tables as one text block."""
    has_ozone_scale = any(r.mse_ozone is not None for r in report.rows)
    parts = [_metric_table(report, "SUM OF SQUARED ERRORS, LOG SCALE", "sse_log")]
    if has_ozone_scale:
        parts.append(_metric_table(report, "MEAN SQUARED ERROR, ORIGINAL SCALE", "mse_ozone"))
        parts.append(_metric_table(
            report,
            "EXCEEDANCE CLASSIFICATION ERRORS (THRESHOLD 8)",
            "classification_errors", nd=1, total=True))
    parts.append(_calibration_table(report))
    return "\n\n\n".join(parts) + "\n"
