"""Figure rendering from long-format experiment CSVs.

The input schema is the one produced by the ``cfnoma`` command line tool:
``experiment,precoder,scheme,sic,M,L,N,K,users,alpha,drop,seed,metric,value``.
Aggregation happens here, from raw per-drop rows, so figures can be
cross-checked against the CSV's own aggregate rows.  Rendering is
deterministic: fixed style, no timestamps in the output metadata.
"""

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

REQUIRED_COLUMNS = ("experiment", "precoder", "scheme", "sic", "M", "L", "N",
                    "K", "users", "alpha", "drop", "seed", "metric", "value")

AGGREGATE_DROP = "mean"

KIND_METRIC = {"sweep": "sum_rate", "cdf": "per_cluster_rate",
               "error": "rel_error"}


class SchemaError(ValueError):
    """The CSV does not carry a required column."""

    def __init__(self, column):
        super().__init__(f"missing column {column!r} in the input CSV")
        self.column = column


class NoDataError(ValueError):
    """The selection matched no usable rows."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure: which CSVs, which kind, how to group the series."""

    inputs: tuple
    kind: str  # sweep | cdf | error
    out: str
    group_keys: tuple = ("precoder", "scheme", "sic")
    title: str = ""


def read_rows(paths) -> list:
    """Load and pool rows from one or more schema-conforming CSVs."""
    rows = []
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for column in REQUIRED_COLUMNS:
                if column not in header:
                    raise SchemaError(column)
            rows.extend(reader)
    return rows


def _check_group_keys(group_keys):
    for key in group_keys:
        if key not in REQUIRED_COLUMNS:
            raise SchemaError(key)


def data_rows(rows, metric, group_keys=()):
    """Raw rows for one metric: skips aggregates and empty values."""
    _check_group_keys(group_keys)
    out = [r for r in rows
           if r["metric"] == metric and r["drop"] != AGGREGATE_DROP
           and r["value"] not in ("", None)]
    if not out:
        raise NoDataError(f"no rows with metric {metric!r}")
    return out


def _group_label(row, group_keys):
    return tuple(row[key] for key in group_keys)


def _grouped_means(rows, group_keys, x_column):
    """Per-group (x, mean value) series with x sorted ascending."""
    buckets = {}
    for row in rows:
        key = _group_label(row, group_keys)
        x = float(row[x_column])
        buckets.setdefault(key, {}).setdefault(x, []).append(float(row["value"]))
    series = {}
    for key, per_x in sorted(buckets.items()):
        xs = np.array(sorted(per_x))
        ys = np.array([np.mean(per_x[x]) for x in xs])
        series[key] = (xs, ys)
    return series


def series_for_sweep(rows, group_keys=("precoder", "scheme", "sic")):
    return _grouped_means(data_rows(rows, "sum_rate", group_keys),
                          group_keys, "users")


def series_for_error(rows, group_keys=("precoder",)):
    return _grouped_means(data_rows(rows, "rel_error", group_keys),
                          group_keys, "L")


def empirical_cdf(values):
    """Step-function CDF support points; y is nondecreasing in [0, 1]."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise NoDataError("empty sample for a distribution curve")
    y = np.arange(1, x.size + 1) / x.size
    return x, y


def cdf_series(rows, group_keys=("precoder", "scheme", "sic")):
    selected = data_rows(rows, "per_cluster_rate", group_keys)
    buckets = {}
    for row in selected:
        buckets.setdefault(_group_label(row, group_keys), []).append(
            float(row["value"]))
    return {key: empirical_cdf(vals) for key, vals in sorted(buckets.items())}


_STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.35,
    "grid.linestyle": ":",
    "lines.linewidth": 1.6,
    "legend.fontsize": 8,
    "svg.hashsalt": "cfnoma-figures",
}

_MARKERS = ("o", "s", "^", "v", "D", "x", "*", "P")


def _plot_series(ax, series, xlabel, ylabel):
    for idx, (key, (xs, ys)) in enumerate(series.items()):
        ax.plot(xs, ys, marker=_MARKERS[idx % len(_MARKERS)],
                markersize=4, label=" / ".join(key))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if series:
        ax.legend()


def render(spec: FigureSpec) -> str:
    """Render one figure to ``spec.out``; returns the output path."""
    if spec.kind not in KIND_METRIC:
        raise ValueError(f"unknown figure kind {spec.kind!r}")
    rows = read_rows(spec.inputs)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        try:
            if spec.kind == "sweep":
                _plot_series(ax, series_for_sweep(rows, spec.group_keys),
                             "number of users", "sum rate [bits/s/Hz]")
            elif spec.kind == "cdf":
                series = cdf_series(rows, spec.group_keys)
                for idx, (key, (xs, ys)) in enumerate(series.items()):
                    ax.step(xs, ys, where="post", label=" / ".join(key))
                ax.set_xlabel("per-cluster rate [bits/s/Hz]")
                ax.set_ylabel("cumulative probability")
                ax.set_ylim(0.0, 1.0)
                ax.legend()
            else:
                _plot_series(ax, series_for_error(rows, spec.group_keys),
                             "antennas per AP", "relative sum-rate error")
            if spec.title:
                ax.set_title(spec.title)
            fig.savefig(spec.out, metadata=_clean_metadata(spec.out))
        finally:
            plt.close(fig)
    return spec.out


def _clean_metadata(out_path):
    # PNG normally records the renderer version; suppress it so repeated runs
    # produce identical bytes
    if out_path.lower().endswith(".png"):
        return {"Software": None}
    if out_path.lower().endswith(".svg"):
        return {"Date": None}
    return None
