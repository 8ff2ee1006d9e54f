"""Lanczos tridiagonalization with selectable reorthogonalization and arithmetic."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .fixed import FloatMode, parse_arith
from .sparse import CooMatrix, partition
from .spmv import spmv_raw


class ReorthPolicy(str, Enum):
    NONE = "none"
    EVERY_TWO = "every_two"
    FULL = "full"

    @classmethod
    def parse(cls, s) -> ReorthPolicy:
        if isinstance(s, cls):
            return s
        key = str(s).strip().lower().replace("-", "_")
        return cls({"every2": "every_two", "everytwo": "every_two"}.get(key, key))

    def active(self, i: int) -> bool:
        """Whether to reorthogonalize on 1-based iteration ``i``."""
        if self is ReorthPolicy.FULL:
            return True
        if self is ReorthPolicy.EVERY_TWO:
            return i % 2 == 0
        return False


@dataclass(frozen=True, eq=False)
class TridiagonalK:
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.float64).ravel()
        b = np.asarray(self.beta, dtype=np.float64).ravel()
        if len(a) < 1 or len(b) != len(a) - 1:
            raise ValueError("need K >= 1 diagonal and K-1 off-diagonal values")
        if np.any(b < 0):
            raise ValueError("off-diagonal values must be non-negative")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def k(self) -> int:
        return len(self.alpha)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.alpha) + np.diag(self.beta, 1) + np.diag(self.beta, -1)


@dataclass(frozen=True, eq=False)
class LanczosBasis:
    """Row ``i`` of ``vectors`` is the Lanczos vector v_{i+1} (float64)."""
    vectors: np.ndarray

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    def gram(self) -> np.ndarray:
        return self.vectors @ self.vectors.T


@dataclass
class LanczosReport:
    policy: ReorthPolicy
    arith: str
    breakdown_at: int | None = None
    restarts: int = 0
    saturations: int = 0
    iterations: int = 0
    spmv_seconds: list = field(default_factory=list)


def initial_vector(n: int, seed: int | None = None) -> np.ndarray:
    """Constant unit vector by default; uniform(-1, 1) normalized when seeded."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if seed is None:
        v = np.ones(n)
    else:
        v = np.random.default_rng(seed).uniform(-1.0, 1.0, n)
    return v / np.linalg.norm(v)


def reorthogonalize(w, basis, arith=None):
    """One modified Gram-Schmidt pass of ``w`` against each basis vector in order."""
    arith = arith or FloatMode()
    w = np.array(w, copy=True)
    for v in basis:
        w = arith.sub_scaled(w, arith.dot(w, v), v)
    return w


def lanczos(m: CooMatrix, k: int, v1=None, policy=ReorthPolicy.FULL, arith=None,
            num_cus: int = 1, seed: int | None = None, threads: int = 1, parts=None):
    """Run ``k`` Lanczos iterations on a Frobenius-normalized symmetric matrix.

    Each iteration: ``w = M v_i``; ``w -= beta_{i-1} v_{i-1}``;
    ``alpha_i = w . v_i``; ``w -= alpha_i v_i``; reorthogonalize per policy;
    ``beta_i = ||w||``; ``v_{i+1} = w / beta_i``.

    Returns ``(TridiagonalK, LanczosBasis, LanczosReport)``. On breakdown
    (``beta_i`` below the mode's tolerance) a random vector orthogonalized
    against the basis replaces ``w`` and ``beta_i`` is recorded as 0. If that
    vector collapses too, the run stops with the pairs computed so far.
    """
    policy = ReorthPolicy.parse(policy)
    if isinstance(arith, str):
        arith = parse_arith(arith)
    arith = arith or FloatMode()
    n = m.n
    if not m.normalized:
        raise ValueError("lanczos expects a Frobenius-normalized matrix")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if v1 is None:
        v1 = initial_vector(n, seed)
    v1 = np.asarray(v1, dtype=np.float64)
    if v1.shape != (n,):
        raise ValueError(f"v1 must have length {n}")
    if abs(np.linalg.norm(v1) - 1.0) > 1e-6:
        raise ValueError("v1 must have unit norm")
    if parts is None:
        parts = partition(m, num_cus)

    report = LanczosReport(policy=policy, arith=arith.name)
    sat0 = arith.saturations
    rng = np.random.default_rng(seed if seed is not None else 0x5EED)
    tol = arith.breakdown_tol

    basis = np.empty((k, n), dtype=np.int64 if arith.is_fixed else arith.dtype)
    basis[0] = arith.encode(v1)
    alpha, beta = [], []
    prev_beta = None
    for i in range(1, k + 1):
        v = basis[i - 1]
        t0 = time.perf_counter()
        w = spmv_raw(parts, v, arith, threads)
        report.spmv_seconds.append(time.perf_counter() - t0)
        if i > 1 and prev_beta:
            w = arith.sub_scaled(w, arith.scalar(prev_beta), basis[i - 2])
        a = arith.dot(w, v)
        alpha.append(arith.to_float(a))
        w = arith.sub_scaled(w, a, v)
        if policy.active(i):
            w = reorthogonalize(w, basis[:i], arith)
        report.iterations = i
        if i == k:
            break
        b = arith.norm(w)
        if b <= tol:
            if report.breakdown_at is None:
                report.breakdown_at = i + 1
            r = arith.encode(rng.uniform(-1.0, 1.0, n) / np.sqrt(n))
            r = reorthogonalize(r, basis[:i], arith)
            rn = arith.norm(r)
            if rn <= tol:
                break
            report.restarts += 1
            basis[i] = arith.divide(r, rn)
            b = 0.0
        else:
            basis[i] = arith.divide(w, b)
        beta.append(b)
        prev_beta = b

    kk = len(alpha)
    report.saturations = arith.saturations - sat0
    t = TridiagonalK(np.array(alpha), np.array(beta[:kk - 1]))
    vecs = np.ascontiguousarray(arith.decode(basis[:kk]))
    return t, LanczosBasis(vecs), report
