"""Per-edge linear harmonization with acquisition-parameter covariates.

Each upper-triangle edge is modeled independently as

    s = b0 + b1*X_r + b2*X_b + b3*X_r*X_b + noise

fit by ordinary least squares across all (subject, site) observations.
Harmonization applies the additive covariate adjustment between source and
target sites, then clamps negatives to zero and rounds to integers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EdgeVector, SiteDescriptor, edge_count
from .errors import DimensionMismatch, RankDeficientDesign, TooFewObservations


@dataclass(frozen=True)
class LinearEdgeModel:
    """Fitted coefficients [b0, b1, b2, b3] per edge plus residual variances."""

    n_nodes: int
    coefficients: np.ndarray  # (D, 4)
    residual_variance: np.ndarray  # (D,)

    def __post_init__(self):
        d = edge_count(self.n_nodes)
        if self.coefficients.shape != (d, 4):
            raise DimensionMismatch(
                f"coefficients must be ({d}, 4) for n={self.n_nodes}, got {self.coefficients.shape}"
            )
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("non-finite coefficients")

    @property
    def d(self) -> int:
        return self.coefficients.shape[0]


def fit_lr(cohort: list[tuple[EdgeVector, SiteDescriptor]]) -> LinearEdgeModel:
    """OLS fit of the per-edge acquisition model over all observations."""
    if len(cohort) < 4:
        raise TooFewObservations(f"need >= 4 observations, got {len(cohort)}")
    n = cohort[0][0].n
    if any(v.n != n for v, _ in cohort):
        raise DimensionMismatch("edge vectors disagree on node count")
    design = np.stack([site.covariates() for _, site in cohort])  # (obs, 4)
    rank = np.linalg.matrix_rank(design)
    if rank < 4:
        raise RankDeficientDesign(rank)
    y = np.stack([v.values for v, _ in cohort])  # (obs, D)
    q, r = np.linalg.qr(design)
    beta = np.linalg.solve(r, q.T @ y)  # (4, D)
    residuals = y - design @ beta
    dof = max(len(cohort) - 4, 1)
    resvar = (residuals**2).sum(axis=0) / dof
    return LinearEdgeModel(n_nodes=n, coefficients=beta.T.copy(), residual_variance=resvar)


def coefficient_standard_errors(model: LinearEdgeModel, sites: list[SiteDescriptor]) -> np.ndarray:
    """Analytic OLS standard errors (D, 4) for the design realized by `sites`,
    one observation per listed site (repeat entries for repeated observations)."""
    design = np.stack([s.covariates() for s in sites])
    xtx_inv = np.linalg.inv(design.T @ design)
    return np.sqrt(np.outer(model.residual_variance, np.diagonal(xtx_inv)))


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round half away from zero (ties at .5 go up for nonnegative values)."""
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def lr_harmonize(
    v: EdgeVector, source: SiteDescriptor, target: SiteDescriptor, model: LinearEdgeModel
) -> EdgeVector:
    """Shift an edge vector from the source to the target acquisition protocol."""
    if v.d != model.d:
        raise DimensionMismatch(f"edge vector length {v.d} != model D {model.d}")
    b = model.coefficients
    adjusted = (
        v.values
        + b[:, 1] * (target.resolution - source.resolution)
        + b[:, 2] * (target.b_value - source.b_value)
        + b[:, 3] * (target.resolution * target.b_value - source.resolution * source.b_value)
    )
    return EdgeVector(n=v.n, values=round_half_away(np.maximum(adjusted, 0.0)))


def model_to_csv(model: LinearEdgeModel) -> str:
    lines = ["edge_index,beta0,beta1,beta2,beta3,residual_variance"]
    for e in range(model.d):
        b = model.coefficients[e]
        lines.append(
            f"{e},{float(b[0])!r},{float(b[1])!r},{float(b[2])!r},{float(b[3])!r},"
            f"{float(model.residual_variance[e])!r}"
        )
    return "\n".join(lines) + "\n"


def model_from_csv(text: str, n_nodes: int) -> LinearEdgeModel:
    rows = [line for line in text.splitlines()[1:] if line.strip()]
    coeff = np.zeros((len(rows), 4))
    resvar = np.zeros(len(rows))
    for line in rows:
        parts = line.split(",")
        e = int(parts[0])
        coeff[e] = [float(x) for x in parts[1:5]]
        resvar[e] = float(parts[5])
    return LinearEdgeModel(n_nodes=n_nodes, coefficients=coeff, residual_variance=resvar)
