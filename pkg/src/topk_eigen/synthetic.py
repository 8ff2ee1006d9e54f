"""Seeded synthetic inputs: random sparse symmetric matrices, graphs, tridiagonals."""
from __future__ import annotations

import numpy as np

from .lanczos import TridiagonalK
from .sparse import CooMatrix


def _upper_pairs(n: int, count: int, rng, p=None):
    """Unique (i, j) pairs with i < j, sampled with replacement then deduplicated."""
    if p is None:
        i = rng.integers(0, n, count)
        j = rng.integers(0, n, count)
    else:
        i = rng.choice(n, count, p=p)
        j = rng.choice(n, count, p=p)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    keep = lo != hi
    key = np.unique(lo[keep] * n + hi[keep])
    return key // n, key % n


def random_sparse_symmetric(n: int, density: float, seed: int = 0, diagonal: bool = True) -> CooMatrix:
    """Symmetric matrix with about ``density * n**2`` uniform(-1, 1) non-zeros."""
    rng = np.random.default_rng(seed)
    target = max(1, int(round(density * n * n / 2)))
    r, c = _upper_pairs(n, target, rng)
    v = rng.uniform(-1.0, 1.0, len(r))
    rows, cols, vals = [r, c], [c, r], [v, v]
    if diagonal:
        d = rng.uniform(-1.0, 1.0, n)
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        vals.append(d)
    return CooMatrix.from_arrays(n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


def random_graph(n: int, avg_degree: float, kind: str = "er", seed: int = 0, exponent: float = 2.5) -> CooMatrix:
    """Unweighted undirected graph adjacency without self loops.

    ``kind="er"`` samples edges uniformly; ``kind="powerlaw"`` uses Chung-Lu
    style endpoint weights ``w_i ~ (i + 1) ** (-1 / (exponent - 1))``.
    """
    rng = np.random.default_rng(seed)
    count = max(1, int(round(n * avg_degree / 2)))
    if kind == "er":
        p = None
    elif kind == "powerlaw":
        w = (np.arange(n) + 1.0) ** (-1.0 / (exponent - 1.0))
        p = w / w.sum()
    else:
        raise ValueError(f"unknown graph kind {kind!r}")
    r, c = _upper_pairs(n, count, rng, p)
    ones = np.ones(len(r))
    return CooMatrix.from_arrays(n, np.concatenate([r, c]), np.concatenate([c, r]),
                                 np.concatenate([ones, ones]), check_symmetric=False)


def random_coo(n: int, nnz: int, seed: int = 0) -> CooMatrix:
    """Unsymmetric random COO matrix for SpMV throughput runs."""
    rng = np.random.default_rng(seed)
    key = np.unique(rng.integers(0, n * n, nnz, dtype=np.int64))
    return CooMatrix(n, key // n, key % n, rng.uniform(-1.0, 1.0, len(key)))


def random_tridiagonal(k: int, seed: int = 0) -> TridiagonalK:
    rng = np.random.default_rng(seed)
    return TridiagonalK(rng.uniform(-1.0, 1.0, k), rng.uniform(0.0, 1.0, k - 1))
