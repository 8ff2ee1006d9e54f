"""Dense reference eigensolver (classical cyclic Jacobi) used by tests and ``verify``."""
from __future__ import annotations

import numpy as np
from numba import njit

MAX_ORACLE_N = 2048


@njit(cache=True)
def _cyclic_jacobi(a, tol, max_sweeps):
    n = a.shape[0]
    vt = np.eye(n)  # rows are eigenvectors
    fro2 = 0.0
    for i in range(n):
        for j in range(n):
            fro2 += a[i, j] * a[i, j]
    # entries below this cannot push off(A) above tol * ||A||_F, so skip them
    skip = tol * np.sqrt(fro2) / max(n, 1)
    sweeps = 0
    for sweep in range(max_sweeps):
        off2 = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off2 += a[i, j] * a[i, j]
        if off2 <= tol * tol * fro2:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rows p and q are contiguous; columns follow by symmetry
                for k in range(n):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                for k in range(n):
                    a[k, p] = a[p, k]
                    a[k, q] = a[q, k]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vp = vt[p, k]
                    vq = vt[q, k]
                    vt[p, k] = c * vp - s * vq
                    vt[q, k] = s * vp + c * vq
    return a, vt, sweeps


def sort_by_magnitude(values: np.ndarray) -> np.ndarray:
    """Order indices by descending |lambda|, then descending lambda, then index."""
    idx = np.arange(len(values))
    return np.lexsort((idx, -values, -np.abs(values)))


def dense_oracle(a, method: str = "jacobi", tol: float = 1e-15, max_sweeps: int = 100):
    """All eigenpairs of a dense symmetric matrix, sorted by descending |lambda|.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors as columns.
    ``method="lapack"`` uses ``numpy.linalg.eigh`` as an independent cross-check.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("oracle needs a square matrix")
    n = a.shape[0]
    if n > MAX_ORACLE_N:
        raise ValueError(f"oracle infeasible: n={n} exceeds {MAX_ORACLE_N}")
    scale = max(np.abs(a).max(), 1e-300)
    if np.abs(a - a.T).max() > 1e-12 * scale:
        raise ValueError("oracle needs a symmetric matrix")
    a = 0.5 * (a + a.T)
    if method == "jacobi":
        d, vt, _ = _cyclic_jacobi(a, tol, max_sweeps)
        vals, vecs = np.diag(d).copy(), vt.T.copy()
    elif method == "lapack":
        vals, vecs = np.linalg.eigh(a)
    else:
        raise ValueError(f"unknown oracle method {method!r}")
    order = sort_by_magnitude(vals)
    return vals[order], vecs[:, order]
