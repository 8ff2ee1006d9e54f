"""End-to-end Top-K pipeline: normalize, Lanczos, systolic Jacobi, map back."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .fixed import parse_arith
from .jacobi import JacobiResult, TrigMode, jacobi_eigen
from .lanczos import LanczosBasis, LanczosReport, ReorthPolicy, lanczos
from .oracle import MAX_ORACLE_N, sort_by_magnitude
from .sparse import CooMatrix, frobenius_normalize, partition

MAX_K = 64
MAX_NCV = 256


def default_ncv(n: int, k: int) -> int:
    """Krylov dimension used when none is given: 4k, at least 16, at most 256 and n."""
    return min(n, max(k, min(max(4 * k, 16), MAX_NCV)))


@dataclass(frozen=True)
class SolverConfig:
    policy: str = "full"
    arith: str = "f64"
    trig: str = "exact"
    num_cus: int = 5
    seed: int | None = None
    tol: float | None = None
    ncv: int | None = None
    max_sweeps: int | None = None
    threads: int = 1
    balance: str = "rows"

    @classmethod
    def precise(cls, **kw) -> SolverConfig:
        return cls(**kw)

    @classmethod
    def fidelity(cls, **kw) -> SolverConfig:
        base = dict(policy="every_two", arith="fixed:30", trig="taylor3", num_cus=5)
        base.update(kw)
        return cls(**base)

    def with_(self, **kw) -> SolverConfig:
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # n x k, one unit eigenvector per column
    k_requested: int
    ncv: int
    scale: float
    lanczos_report: LanczosReport
    jacobi: JacobiResult
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def k_effective(self) -> int:
        return len(self.eigenvalues)


@dataclass
class AccuracyReport:
    mean_orthogonality_degrees: float
    min_orthogonality_degrees: float
    mean_residual: float
    max_residual: float
    per_pair_residuals: np.ndarray

    def as_dict(self) -> dict:
        d = asdict(self)
        d["per_pair_residuals"] = [float(x) for x in self.per_pair_residuals]
        return d


def _sign_fix(q: np.ndarray) -> np.ndarray:
    for j in range(q.shape[1]):
        col = q[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if len(nz) and col[nz[0]] < 0:
            q[:, j] = -col
    return q


def top_k_eigen(m: CooMatrix, k: int, config: SolverConfig | None = None, **overrides) -> EigenDecomposition:
    """Top-k eigenpairs of a sparse symmetric matrix by descending |lambda|.

    Eigenvalues are on the scale of ``m``; eigenvectors are unit columns with
    their first non-negligible component positive.
    """
    cfg = (config or SolverConfig()).with_(**overrides) if overrides else (config or SolverConfig())
    if not 1 <= k <= min(m.n, MAX_K):
        raise ValueError(f"k must be in [1, {min(m.n, MAX_K)}], got {k}")
    ncv = cfg.ncv if cfg.ncv is not None else default_ncv(m.n, k)
    if not k <= ncv <= m.n:
        raise ValueError(f"ncv must be in [{k}, {m.n}], got {ncv}")
    if not m.is_symmetric():
        raise ValueError("matrix is not symmetric")
    arith = parse_arith(cfg.arith)
    trig = TrigMode(cfg.trig)
    timings = {}

    t0 = time.perf_counter()
    nm = m if m.normalized else frobenius_normalize(m)
    parts = partition(nm, min(cfg.num_cus, nm.n), cfg.balance)
    t1 = time.perf_counter()
    tri, basis, rep = lanczos(nm, ncv, policy=ReorthPolicy.parse(cfg.policy), arith=arith,
                              seed=cfg.seed, threads=cfg.threads, parts=parts)
    t2 = time.perf_counter()
    jr = jacobi_eigen(tri, trig, cfg.tol, cfg.max_sweeps)
    t3 = time.perf_counter()
    vals, vecs = select_and_map(jr, basis, k)
    t4 = time.perf_counter()
    timings.update(normalize=t1 - t0, lanczos=t2 - t1, spmv=list(rep.spmv_seconds),
                   jacobi=t3 - t2, map_back=t4 - t3)

    warnings = []
    if not jr.converged:
        warnings.append(f"jacobi did not converge in {jr.sweeps} sweeps")
    if len(vals) < k:
        warnings.append(f"lanczos breakdown: only {len(vals)} of {k} eigenpairs available")
    return EigenDecomposition(vals * nm.scale, vecs, k, ncv, nm.scale, rep, jr, timings, warnings)


def select_and_map(jr: JacobiResult, basis: LanczosBasis, k: int):
    """Pick the k largest-|lambda| Ritz pairs and map them through the basis."""
    order = sort_by_magnitude(jr.eigenvalues)[:k]
    vals = jr.eigenvalues[order]
    q = basis.vectors.T @ jr.eigenvectors[:, order]
    q /= np.linalg.norm(q, axis=0)
    return vals, _sign_fix(q)


def accuracy_report(m: CooMatrix, d: EigenDecomposition, normalized: bool = False) -> AccuracyReport:
    """Residuals ||M q - lambda q|| and pairwise angles between eigenvectors.

    With ``normalized=True`` residuals are measured on ``M / ||M||_F`` (and
    eigenvalues divided by the same norm), the scale the solver works in.
    """
    q, lam = d.eigenvectors, d.eigenvalues
    if q.shape[0] != m.n:
        raise ValueError(f"dimension mismatch: matrix is {m.n}x{m.n}, eigenvectors have length {q.shape[0]}")
    if normalized:
        norm = m.frobenius_norm
        lam = lam / norm
    else:
        norm = 1.0
    res = np.array([np.linalg.norm(m.matvec(q[:, j]) / norm - lam[j] * q[:, j]) for j in range(q.shape[1])])
    k = q.shape[1]
    if k > 1:
        g = np.abs(q.T @ q)
        iu = np.triu_indices(k, 1)
        ang = np.degrees(np.arccos(np.clip(g[iu], 0.0, 1.0)))
        mean_ang, min_ang = float(ang.mean()), float(ang.min())
    else:
        mean_ang = min_ang = 90.0
    return AccuracyReport(mean_ang, min_ang, float(res.mean()), float(res.max()), res)


def reconstruct_topk(d: EigenDecomposition) -> np.ndarray:
    """Dense sum of lambda_i q_i q_i^T."""
    n = d.eigenvectors.shape[0]
    if n > MAX_ORACLE_N:
        raise ValueError(f"dense reconstruction infeasible for n={n}")
    q = d.eigenvectors
    return (q * d.eigenvalues) @ q.T


def reconstruct_from_factors(basis: LanczosBasis, x: np.ndarray, lam: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """(V X) diag(lam) (V X)^T from the Lanczos basis and Jacobi eigenvectors."""
    vx = basis.vectors.T @ x
    return scale * (vx * lam) @ vx.T
