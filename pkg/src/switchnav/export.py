"""CSV export and re-import of traces and Monte Carlo metrics.

Floats are written with 12 significant digits.  Trace files carry one row
per tick; estimate columns exist for every sensor that was active at some
tick and are left blank while that sensor is inactive.
"""

import csv

import numpy as np

METRICS_HEADER = ["t", "mu", "tau", "epsilon"]


def fmt(v):
    return f"{v:.12g}"


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def export_metrics_csv(result, path):
    rows = ([str(int(t)), fmt(m), fmt(a), fmt(e)]
            for t, m, a, e in zip(result.t, result.mu, result.tau, result.epsilon))
    _write(path, METRICS_HEADER, rows)


def trace_header(trace):
    n, p = trace.x.shape[1], trace.u.shape[1]
    cols = ["t", "task"] + [f"x_{k + 1}" for k in range(n)] + [f"u_{k + 1}" for k in range(p)]
    cols += ["f", "he_bar", "hc_bar", "dwell"]
    for sid in trace_sensors(trace):
        cols += [f"xhat_{sid}_{k + 1}" for k in range(n)]
    return cols


def trace_sensors(trace):
    ever = ~np.all(np.isnan(trace.estimates[:, :, 0]), axis=0)
    return [sid for sid, on in zip(trace.sensor_ids, ever) if on]


def export_trace_csv(trace, path):
    cols = [trace.sensor_ids.index(s) for s in trace_sensors(trace)]

    def rows():
        for k in range(trace.ticks):
            row = [str(int(trace.t[k])), str(int(trace.task[k]))]
            row += [fmt(v) for v in trace.x[k]] + [fmt(v) for v in trace.u[k]]
            row += [fmt(trace.f[k]), fmt(trace.he_bar[k]), fmt(trace.hc_bar[k]), str(int(trace.dwell[k]))]
            for c in cols:
                est = trace.estimates[k, c]
                row += ["" if np.isnan(v) else fmt(v) for v in est]
            yield row

    _write(path, trace_header(trace), rows())


def export_csv(obj, path):
    """Write a Monte Carlo result or an episode trace, whichever ``obj`` is."""
    if hasattr(obj, "epsilon"):
        export_metrics_csv(obj, path)
    else:
        export_trace_csv(obj, path)


def read_csv(path):
    """Column name -> float array; blank cells become NaN."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) if v != "" else np.nan for v in row] for row in body]).reshape(len(body), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}
