"""Harmonization evaluation battery.

Compares harmonized matrices against target-site matrices for the same
subjects: edge-level accuracy (MAE, binary MAE, Pearson correlation),
topology preservation (nodal-metric and eigenvalue MAEs), and individuality
retention (fingerprinting accuracy and identifiability difference), plus
the unharmonized lower bound, the test-retest upper bound, and a min-max
normalized comparison table.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import ConnectivityMatrix, vectorize_upper
from .errors import DimensionMismatch, EmptyInput
from . import metrics as gm

EDGE_METRICS = ("MAE", "BMAE", "PC")
TOPOLOGY_METRICS = ("NS", "CC", "CLC", "LE", "EV")
ERROR_METRICS = ("MAE", "BMAE", "EV", "NS", "CC", "CLC", "LE")  # lower is better
ALL_METRICS = EDGE_METRICS + TOPOLOGY_METRICS + ("FA", "ID")


@dataclass
class MetricReport:
    """Per-method metric values; mean/std pairs for per-subject metrics."""

    method: str
    means: dict[str, float] = field(default_factory=dict)
    stds: dict[str, float] = field(default_factory=dict)


def _check_pair(pred: list[ConnectivityMatrix], target: list[ConnectivityMatrix]) -> None:
    if not pred or not target:
        raise EmptyInput("empty matrix list")
    if len(pred) != len(target):
        raise DimensionMismatch(f"{len(pred)} predictions vs {len(target)} targets")
    n = pred[0].n
    if any(m.n != n for m in pred + target):
        raise DimensionMismatch("node counts differ across matrices")


def _vectors(matrices: list[ConnectivityMatrix]) -> np.ndarray:
    return np.stack([vectorize_upper(m).values for m in matrices])


def edge_metrics(pred: list[ConnectivityMatrix],
                 target: list[ConnectivityMatrix]) -> dict[str, tuple[float, float]]:
    """Per-subject MAE, binary MAE and Pearson correlation of edge vectors,
    aggregated as (mean, population std)."""
    _check_pair(pred, target)
    pv, tv = _vectors(pred), _vectors(target)
    mae = np.abs(pv - tv).mean(axis=1)
    bmae = ((pv > 0) != (tv > 0)).mean(axis=1)
    pc = np.zeros(len(pred))
    for i in range(len(pred)):
        if pv[i].std() == 0 or tv[i].std() == 0:
            warnings.warn("constant edge vector: Pearson correlation set to 0")
            pc[i] = 0.0
        else:
            pc[i] = np.corrcoef(pv[i], tv[i])[0, 1]
    return {
        "MAE": (float(mae.mean()), float(mae.std())),
        "BMAE": (float(bmae.mean()), float(bmae.std())),
        "PC": (float(pc.mean()), float(pc.std())),
    }


def topology_metrics(pred: list[ConnectivityMatrix],
                     target: list[ConnectivityMatrix]) -> dict[str, tuple[float, float]]:
    """Per-subject mean absolute nodal-score differences (NS, CC, CLC, LE)
    and sorted-eigenvalue MAE (EV), aggregated as (mean, population std)."""
    _check_pair(pred, target)
    fns = {
        "NS": gm.nodal_strength,
        "CC": gm.closeness_centrality,
        "CLC": gm.clustering_coefficient,
        "LE": gm.local_efficiency,
    }
    per_subject: dict[str, list[float]] = {name: [] for name in TOPOLOGY_METRICS}
    for p, t in zip(pred, target):
        for name, fn in fns.items():
            per_subject[name].append(float(np.abs(fn(p).values - fn(t).values).mean()))
        ev_p = gm.symmetric_eigenvalues(p.values.astype(float)).eigenvalues
        ev_t = gm.symmetric_eigenvalues(t.values.astype(float)).eigenvalues
        per_subject["EV"].append(float(np.abs(ev_p - ev_t).mean()))
    return {name: (float(np.mean(v)), float(np.std(v))) for name, v in per_subject.items()}


def pairwise_distances(pred: list[ConnectivityMatrix],
                       target: list[ConnectivityMatrix]) -> np.ndarray:
    """Entry (i, j): mean absolute difference of upper-triangle vectors
    between harmonized subject i and target subject j."""
    _check_pair(pred, target)
    pv, tv = _vectors(pred), _vectors(target)
    return np.abs(pv[:, None, :] - tv[None, :, :]).mean(axis=2)


def fingerprint_accuracy(p: np.ndarray) -> float:
    """Fraction of rows whose diagonal entry is the strict row minimum."""
    p = np.asarray(p)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {p.shape}")
    hits = 0
    for i in range(p.shape[0]):
        off = np.delete(p[i], i)
        if off.size == 0 or p[i, i] < off.min():
            hits += 1
    return hits / p.shape[0]


def identifiability_difference(p: np.ndarray) -> float:
    """Mean off-diagonal (inter-subject) minus mean diagonal (intra-subject) distance."""
    p = np.asarray(p)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {p.shape}")
    n = p.shape[0]
    diag = np.diagonal(p)
    if n == 1:
        return 0.0
    off = (p.sum() - diag.sum()) / (n * n - n)
    return float(off - diag.mean())


def evaluate_method(method: str, pred: list[ConnectivityMatrix],
                    target: list[ConnectivityMatrix]) -> MetricReport:
    """Full metric battery for one method against its targets."""
    report = MetricReport(method=method)
    for name, (mean, std) in {**edge_metrics(pred, target), **topology_metrics(pred, target)}.items():
        report.means[name] = mean
        report.stds[name] = std
    p = pairwise_distances(pred, target)
    report.means["FA"] = fingerprint_accuracy(p)
    report.means["ID"] = identifiability_difference(p)
    return report


def compute_bounds(lowest_raw: list[ConnectivityMatrix],
                   highest: list[ConnectivityMatrix],
                   retest: list[ConnectivityMatrix] | None = None,
                   highest_for_retest: list[ConnectivityMatrix] | None = None,
                   ) -> tuple[MetricReport, MetricReport | None]:
    """Lower bound: unharmonized lowest-quality vs highest-quality matrices.
    Upper bound: highest-quality test vs retest matrices for the retest
    subjects (pass highest_for_retest when retest covers a subset)."""
    lower = evaluate_method("lower_bound", lowest_raw, highest)
    upper = None
    if retest is not None:
        reference = highest_for_retest if highest_for_retest is not None else highest
        upper = evaluate_method("upper_bound", reference, retest)
    return lower, upper


def report_table_csv(reports: list[MetricReport]) -> str:
    """Rows = methods, columns = metric mean/std pairs, as CSV."""
    cols = []
    for name in ALL_METRICS:
        cols.append(f"{name}_mean")
        if name not in ("FA", "ID"):
            cols.append(f"{name}_std")
    lines = ["method," + ",".join(cols)]
    for rep in reports:
        row = [rep.method]
        for name in ALL_METRICS:
            row.append(f"{rep.means.get(name, float('nan')):.10g}")
            if name not in ("FA", "ID"):
                row.append(f"{rep.stds.get(name, float('nan')):.10g}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def normalized_report(reports: list[MetricReport]) -> str:
    """Min-max normalize each metric across methods to [0, 1]; error-type
    metrics are inverted so higher is always better. Ties across all methods
    emit 0.5 with a degenerate flag column. Returned as CSV."""
    if len(reports) < 2:
        raise EmptyInput("need at least 2 methods to normalize")
    lines = ["method," + ",".join(ALL_METRICS) + ",degenerate_metrics"]
    values = {name: np.array([rep.means.get(name, np.nan) for rep in reports]) for name in ALL_METRICS}
    normalized = {}
    degenerate = []
    for name, vals in values.items():
        if np.all(np.isnan(vals)):
            normalized[name] = np.full(len(reports), 0.5)
            degenerate.append(name)
            continue
        lo, hi = np.nanmin(vals), np.nanmax(vals)
        if hi - lo == 0:
            normalized[name] = np.full(len(reports), 0.5)
            degenerate.append(name)
            continue
        norm = (vals - lo) / (hi - lo)
        if name in ERROR_METRICS:
            norm = 1.0 - norm
        normalized[name] = norm
    flag = ";".join(degenerate)
    for i, rep in enumerate(reports):
        row = [rep.method] + [f"{normalized[name][i]:.10g}" for name in ALL_METRICS] + [flag]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
