"""CSV/JSON output and aligned text tables for the Monte Carlo studies."""

import csv
import io
import json
import math

from .experiments import COMPONENTS, METHODS

TABLE1_COLUMNS = ("c_pi", "component", "mean", "skewness", "kurtosis", "quantile_95", "n_samples")
TABLE2_COLUMNS = ("c_pi", "c_fv", "component", "method", "level", "rate", "mc_stderr")
VARIANCE_COLUMNS = ("c_pi", "component", "empirical_var", "mean_sigma_hat", "theoretical",
                    "finite_target", "ratio_to_sigma_hat", "n_reps")


def _num(x):
    # shortest repr that round-trips: byte-stable for identical floats
    return repr(float(x)) if isinstance(x, float) else str(x)


def _csv_text(columns, records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([_num(v) for v in rec])
    return buf.getvalue()


def table1_csv(rows):
    return _csv_text(TABLE1_COLUMNS, [
        (r.c_pi, r.component, r.summary.mean, r.summary.skewness, r.summary.kurtosis,
         r.summary.right_quantile_5pct, r.summary.n_samples) for r in rows
    ])


def table2_csv(table):
    return _csv_text(TABLE2_COLUMNS, [
        (r.c_pi, r.c_fv, r.component, r.method, r.level, r.rate, r.mc_stderr) for r in table.rows
    ])


def variance_csv(rows):
    return _csv_text(VARIANCE_COLUMNS, [
        (r.c_pi, r.component, r.empirical_var, r.mean_sigma_hat, r.theoretical,
         r.finite_target, r.ratio_to_sigma_hat, r.n_reps) for r in rows
    ])


def xi_csv(sample):
    return _csv_text(("unit", "xi_linear", "xi_quadratic"), [
        (i, float(a), float(b)) for i, (a, b) in enumerate(zip(sample.xi_linear, sample.xi_quadratic))
    ])


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def report_json(command, config, results, extra=None):
    """JSON report embedding the resolved config (also as parseable text)."""
    payload = {
        "command": command,
        "master_seed": config.master_seed if config is not None else None,
        "config": config.as_dict() if config is not None else None,
        "config_text": config.to_config_text() if config is not None else None,
        "results": results,
    }
    if extra:
        payload.update(extra)
    return json.dumps(_clean(payload), indent=2, sort_keys=False) + "\n"


def _fmt(x):
    return f"{x:.6g}"


def _align(header_rows, body):
    rows = header_rows + body
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
    rule = "-" * len(lines[0])
    head = lines[: len(header_rows)]
    return "\n".join([rule, *head, rule, *lines[len(header_rows):], rule])


def render_table1(rows, n_units=None, n_periods=None):
    by_cpi = {}
    for r in rows:
        by_cpi.setdefault(r.c_pi, {})[r.component] = r.summary
    header = [
        ["", "linear", "", "", "", "quadratic", "", "", ""],
        ["c_pi", "mean", "skew", "kurt", "quant", "mean", "skew", "kurt", "quant"],
    ]
    body = []
    for c_pi, comps in by_cpi.items():
        line = [_fmt(c_pi)]
        for comp in COMPONENTS:
            s = comps[comp]
            line += [_fmt(s.mean), _fmt(s.skewness), _fmt(s.kurtosis), _fmt(s.right_quantile_5pct)]
        body.append(line)
    title = "Finite-sample distribution of the normalized aggregate"
    if n_units is not None:
        title += f" (N={n_units}, T={n_periods})"
    return title + "\n" + _align(header, body)


def render_table2(table):
    levels = sorted({r.level for r in table.rows})
    c_fvs = list(dict.fromkeys(r.c_fv for r in table.rows))
    c_pis = list(dict.fromkeys(r.c_pi for r in table.rows))
    cells = {(r.c_pi, r.c_fv, r.component, r.method, r.level): r.rate for r in table.rows}
    top = [""]
    mid = [""]
    low = ["c_pi"]
    for comp in COMPONENTS:
        for level in levels:
            for m, method in enumerate(METHODS):
                top.append(comp if (level == levels[0] and m == 0) else "")
                mid.append(f"{level:g}" if m == 0 else "")
                low.append(method.value)
    out = ["Rejection rates (two-sided tests)"]
    for c_fv in c_fvs:
        body = []
        for c_pi in c_pis:
            line = [_fmt(c_pi)]
            for comp in COMPONENTS:
                for level in levels:
                    for method in METHODS:
                        line.append(_fmt(cells[(c_pi, c_fv, comp, method.value, level)]))
            body.append(line)
        kind = "size" if c_fv == 0 else "power"
        out.append(f"\n{kind}: c_fv = {c_fv:g}")
        out.append(_align([top, mid, low], body))
    return "\n".join(out)


def render_variance(rows):
    header = [["c_pi", "component", "emp_var", "mean_sigma_hat", "theory", "finite_N", "emp/sigma_hat"]]
    body = [[_fmt(r.c_pi), r.component, _fmt(r.empirical_var), _fmt(r.mean_sigma_hat),
             _fmt(r.theoretical), _fmt(r.finite_target), _fmt(r.ratio_to_sigma_hat)] for r in rows]
    return "Variance of the aggregate: simulation vs theory vs plug-in estimator\n" + _align(header, body)
