"""Weighted brain-network metrics and shared spectral primitives.

Metric conventions follow the weighted brain-connectivity-toolbox lineage:
edge lengths for path-based metrics are reciprocal weights, the clustering
coefficient is the Onnela geometric-mean form with weights normalized by the
network maximum, and local efficiency is computed on neighborhood-induced
subgraphs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import dijkstra
from scipy.sparse import csr_matrix

from .core import ConnectivityMatrix
from .errors import NoConvergence, NotSymmetric


@dataclass(frozen=True)
class NodalProfile:
    metric_id: str
    values: np.ndarray


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues ascending; eigenvectors as orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def nodal_strength(m: ConnectivityMatrix) -> NodalProfile:
    """NS(i) = sum of incident edge weights."""
    return NodalProfile("NS", m.values.sum(axis=1).astype(np.float64))


def _length_graph(weights: np.ndarray) -> csr_matrix:
    with np.errstate(divide="ignore"):
        lengths = np.where(weights > 0, 1.0 / np.where(weights > 0, weights, 1.0), 0.0)
    return csr_matrix(lengths)


def shortest_path_distances(m: ConnectivityMatrix) -> np.ndarray:
    """All-pairs Dijkstra on edge lengths 1/weight; unreachable pairs are +inf."""
    return dijkstra(_length_graph(m.values.astype(np.float64)), directed=False)


def closeness_centrality(m: ConnectivityMatrix) -> NodalProfile:
    """CC(i) = (#reachable others) / (sum of distances to them); 0 if isolated."""
    dist = shortest_path_distances(m)
    n = m.n
    values = np.zeros(n)
    for i in range(n):
        d = np.delete(dist[i], i)
        reachable = np.isfinite(d)
        if reachable.any():
            values[i] = reachable.sum() / d[reachable].sum()
    return NodalProfile("CC", values)


def clustering_coefficient(m: ConnectivityMatrix) -> NodalProfile:
    """Onnela clustering: geometric-mean triangle intensity, weights / max weight."""
    w = m.values.astype(np.float64)
    n = m.n
    wmax = w.max()
    if wmax == 0:
        return NodalProfile("CLC", np.zeros(n))
    cbrt = np.cbrt(w / wmax)
    # trace(cbrt^3)_ii = 2 * sum over triangles through i of the cube-rooted product
    tri = np.diagonal(cbrt @ cbrt @ cbrt)
    k = (w > 0).sum(axis=1)
    values = np.zeros(n)
    mask = k >= 2
    values[mask] = tri[mask] / (k[mask] * (k[mask] - 1))
    return NodalProfile("CLC", values)


def local_efficiency(m: ConnectivityMatrix) -> NodalProfile:
    """Weighted local efficiency on neighborhood-induced subgraphs.

    LE(i) = (1/(k_i(k_i-1))) * sum over ordered neighbor pairs (j, h) of
    (w'_ij * w'_ih / d'_jh(G_i))^(1/3), with w' = w / max(w), path lengths
    1/w' inside the subgraph induced by the neighbors of i, and unreachable
    pairs contributing zero.
    """
    w = m.values.astype(np.float64)
    n = m.n
    wmax = w.max()
    values = np.zeros(n)
    if wmax == 0:
        return NodalProfile("LE", values)
    wn = w / wmax
    for i in range(n):
        nbrs = np.flatnonzero(wn[i] > 0)
        k = nbrs.size
        if k < 2:
            continue
        sub = wn[np.ix_(nbrs, nbrs)]
        dist = dijkstra(_length_graph(sub), directed=False)
        wi = wn[i, nbrs]
        acc = 0.0
        for a in range(k):
            for b in range(k):
                if a == b or not np.isfinite(dist[a, b]):
                    continue
                acc += np.cbrt(wi[a] * wi[b] / dist[a, b])
        values[i] = acc / (k * (k - 1))
    return NodalProfile("LE", values)


def symmetric_eigenvalues(a: np.ndarray, max_sweeps: int = 100) -> EigenDecomposition:
    """Cyclic Jacobi eigensolver for dense symmetric matrices.

    Sweeps rotate out each off-diagonal element in turn until the largest
    off-diagonal magnitude drops below 1e-12 * ||A||_F.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {a.shape}")
    if np.max(np.abs(a - a.T)) > 1e-10:
        raise NotSymmetric("matrix is not symmetric within 1e-10")
    n = a.shape[0]
    work = (a + a.T) / 2.0
    vecs = np.eye(n)
    norm = np.linalg.norm(work)
    tol = 1e-12 * norm if norm > 0 else 0.0

    def max_offdiag(x):
        if n < 2:
            return 0.0
        off = np.abs(x - np.diag(np.diagonal(x)))
        return off.max()

    sweeps = 0
    while max_offdiag(work) > tol:
        if sweeps >= max_sweeps:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if abs(apq) <= tol:
                    continue
                app, aqq = work[p, p], work[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * work[:, p] - s * work[:, q]
                rot_q = s * work[:, p] + c * work[:, q]
                work[:, p], work[:, q] = rot_p, rot_q
                rot_p = c * work[p, :] - s * work[q, :]
                rot_q = s * work[p, :] + c * work[q, :]
                work[p, :], work[q, :] = rot_p, rot_q
                rot_p = c * vecs[:, p] - s * vecs[:, q]
                rot_q = s * vecs[:, p] + c * vecs[:, q]
                vecs[:, p], vecs[:, q] = rot_p, rot_q
        sweeps += 1
    eigenvalues = np.diagonal(work).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return EigenDecomposition(eigenvalues=eigenvalues[order], eigenvectors=vecs[:, order])


def normalized_laplacian(m: ConnectivityMatrix) -> np.ndarray:
    """L = I - D^{-1/2} A D^{-1/2}; isolated nodes keep an identity row."""
    a = m.values.astype(np.float64)
    deg = a.sum(axis=1)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    lap = np.eye(m.n) - (inv_sqrt[:, None] * a) * inv_sqrt[None, :]
    # an isolated node has a zero A row, so I - 0 already leaves the identity row
    return lap
