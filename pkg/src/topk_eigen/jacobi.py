"""Systolic-array Jacobi eigensolver for small symmetric (tridiagonal) matrices.

The K x K matrix is held as a (K/2) x (K/2) grid of 2x2 blocks, one per
processor. Each step the diagonal processors compute a rotation that
annihilates their off-diagonal entry, the rotations propagate along rows and
columns, every block is updated as ``R_i B_ij R_j^T``, eigenvector blocks as
``E_ij R_j^T``, and a row/column interchange brings fresh index pairs onto the
diagonal. K-1 steps visit every index pair once (one sweep).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .lanczos import TridiagonalK


class TrigMode(str, Enum):
    EXACT = "exact"
    TAYLOR3 = "taylor3"


class Block2x2(NamedTuple):
    """One processor's state: [[a, b], [c, d]]."""
    a: float
    b: float
    c: float
    d: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @classmethod
    def from_array(cls, x) -> Block2x2:
        x = np.asarray(x, dtype=np.float64)
        return cls(float(x[0, 0]), float(x[0, 1]), float(x[1, 0]), float(x[1, 1]))


class RotationPair(NamedTuple):
    c: float
    s: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.c, self.s], [-self.s, self.c]])


IDENTITY_ROTATION = RotationPair(1.0, 0.0)


# -- trigonometry -------------------------------------------------------------

_SQRT3 = math.sqrt(3.0)
_TAN_PI_12 = 2.0 - _SQRT3


def _atan_series(u):
    u2 = u * u
    return u * (1.0 - u2 * (1.0 / 3.0 - u2 / 5.0))


def taylor_arctan(t):
    """Series arctan with two range reductions (|t| > 1, then t > tan(pi/12))."""
    t = np.asarray(t, dtype=np.float64)
    sign = np.sign(t)
    a = np.abs(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        big = a > 1.0
        a = np.where(big, 1.0 / a, a)
        shift = a > _TAN_PI_12
        u = np.where(shift, (a * _SQRT3 - 1.0) / (_SQRT3 + a), a)
    r = _atan_series(u) + np.where(shift, math.pi / 6, 0.0)
    r = np.where(big, math.pi / 2 - r, r)
    return sign * r


def taylor_sin(x):
    x = np.asarray(x, dtype=np.float64)
    x2 = x * x
    return x * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0))


def taylor_cos(x):
    x = np.asarray(x, dtype=np.float64)
    x2 = x * x
    return 1.0 - x2 / 2.0 * (1.0 - x2 / 12.0)


def rotation_angles(a, b, d, trig=TrigMode.EXACT):
    """theta = 1/2 arctan(2b / (a - d)) in [-pi/4, pi/4], vectorized."""
    a, b, d = (np.asarray(v, dtype=np.float64) for v in (a, b, d))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = 2.0 * b / (a - d)
    atan = np.arctan if TrigMode(trig) is TrigMode.EXACT else taylor_arctan
    theta = 0.5 * atan(t)
    # b == 0 (including a == d) means nothing to annihilate
    return np.where(b == 0.0, 0.0, theta)


def rotation_cs(theta, trig=TrigMode.EXACT):
    if TrigMode(trig) is TrigMode.EXACT:
        return np.cos(theta), np.sin(theta)
    c, s = taylor_cos(theta), taylor_sin(theta)
    r = 1.0 / np.sqrt(c * c + s * s)
    return c * r, s * r


def compute_rotation(a: float, b: float, d: float, trig=TrigMode.EXACT) -> RotationPair:
    for v in (a, b, d):
        if not math.isfinite(v):
            raise ValueError("rotation inputs must be finite")
    c, s = rotation_cs(rotation_angles(a, b, d, trig), trig)
    return RotationPair(float(c), float(s))


# -- single-processor operations ----------------------------------------------

def rotate_offdiagonal(block: Block2x2, row_rot: RotationPair, col_rot: RotationPair) -> Block2x2:
    """R(theta_i) B R(theta_j)^T."""
    return Block2x2.from_array(row_rot.matrix() @ block.as_array() @ col_rot.matrix().T)


def rotate_diagonal(block: Block2x2, r: RotationPair) -> Block2x2:
    """R B R^T; with the block's own exact rotation the result is diagonal."""
    return rotate_offdiagonal(block, r, r)


def rotate_eigenvector(block: Block2x2, col_rot: RotationPair) -> Block2x2:
    return Block2x2.from_array(block.as_array() @ col_rot.matrix().T)


# -- grid ---------------------------------------------------------------------

def _to_blocks(a: np.ndarray) -> np.ndarray:
    h = a.shape[0] // 2
    return np.ascontiguousarray(a.reshape(h, 2, h, 2).transpose(0, 2, 1, 3))


def _from_blocks(x: np.ndarray) -> np.ndarray:
    h = x.shape[0]
    return x.transpose(0, 2, 1, 3).reshape(2 * h, 2 * h)


def _rotate_rows(x, c, s):
    # x[i, :, 0, :], x[i, :, 1, :] <- R_i applied on the left
    c = c[:, None, None]
    s = s[:, None, None]
    r0, r1 = x[:, :, 0, :].copy(), x[:, :, 1, :].copy()
    x[:, :, 0, :] = c * r0 + s * r1
    x[:, :, 1, :] = c * r1 - s * r0


def _rotate_cols(x, c, s):
    # right-multiplication by R_j^T
    c = c[None, :, None]
    s = s[None, :, None]
    k0, k1 = x[:, :, :, 0].copy(), x[:, :, :, 1].copy()
    x[:, :, :, 0] = c * k0 + s * k1
    x[:, :, :, 1] = c * k1 - s * k0


def _shift_columns(x):
    """Column interchange in place, walking slots in reverse with one carry.

    Slot L_j is the left column of block column j, R_j the right one. Contents
    move along the cycle R_0 -> L_1 -> ... -> L_{h-1} -> R_{h-1} -> ... -> R_0
    while L_0 stays put.
    """
    h = x.shape[1]
    if h < 2:
        return
    carry = x[:, h - 1, :, 0].copy()
    # L_j <- L_{j-1} for j = h-1 down to 2; numpy resolves the overlap as the
    # reverse walk would
    x[:, 2:h, :, 0] = x[:, 1:h - 1, :, 0]
    x[:, 1, :, 0] = x[:, 0, :, 1]
    x[:, 0:h - 1, :, 1] = x[:, 1:h, :, 1]
    x[:, h - 1, :, 1] = carry


@dataclass
class SystolicGrid:
    """Processor grid holding matrix blocks and eigenvector blocks.

    Invariant: ``A0 = W A W^T`` where ``A0`` is the embedded input, ``A`` the
    reassembled ``blocks`` and ``W`` the reassembled ``eig_blocks``.
    """

    blocks: np.ndarray
    eig_blocks: np.ndarray
    sweep_count: int = 0
    step_count: int = 0

    @classmethod
    def from_matrix(cls, a) -> SystolicGrid:
        a = np.array(a, dtype=np.float64)
        k = a.shape[0]
        if a.ndim != 2 or a.shape[1] != k or k % 2:
            raise ValueError("grid needs a square matrix of even dimension")
        return cls(_to_blocks(a), _to_blocks(np.eye(k)))

    @property
    def half(self) -> int:
        return self.blocks.shape[0]

    @property
    def size(self) -> int:
        return 2 * self.half

    def matrix(self) -> np.ndarray:
        return _from_blocks(self.blocks)

    def eigvec_matrix(self) -> np.ndarray:
        return _from_blocks(self.eig_blocks)

    def off_norm(self) -> float:
        sq = self.blocks * self.blocks
        idx = np.arange(self.half)
        sq[idx, idx, 0, 0] = 0.0
        sq[idx, idx, 1, 1] = 0.0
        return float(np.sqrt(sq.sum()))

    def rotations(self, trig=TrigMode.EXACT):
        idx = np.arange(self.half)
        diag = self.blocks[idx, idx]
        theta = rotation_angles(diag[:, 0, 0], diag[:, 0, 1], diag[:, 1, 1], trig)
        return rotation_cs(theta, trig)

    def rotate(self, trig=TrigMode.EXACT):
        """Rotation phases: diagonal, then off-diagonal, then eigenvector blocks."""
        c, s = self.rotations(trig)
        _rotate_rows(self.blocks, c, s)
        _rotate_cols(self.blocks, c, s)
        _rotate_cols(self.eig_blocks, c, s)
        return c, s

    def step(self, trig=TrigMode.EXACT):
        self.rotate(trig)
        interchange(self)
        self.step_count += 1


def interchange(grid: SystolicGrid) -> SystolicGrid:
    """Apply the row/column interchange ``A <- P A P^T``, ``W <- W P^T``."""
    _shift_columns(grid.blocks)
    _shift_columns(grid.blocks.transpose(1, 0, 3, 2))
    _shift_columns(grid.eig_blocks)
    return grid


def interchange_permutation(k: int) -> np.ndarray:
    """perm[i] = position that index i moves to under one interchange."""
    if k % 2 or k < 2:
        raise ValueError("K must be even and >= 2")
    h = k // 2
    labels = np.arange(k, dtype=np.float64).reshape(1, h, 1, 2).repeat(h, axis=0).repeat(2, axis=2)
    _shift_columns(labels)
    moved = labels[0, :, 0, :].reshape(k).astype(np.int64)
    perm = np.empty(k, dtype=np.int64)
    perm[moved] = np.arange(k)
    return perm


# -- driver -------------------------------------------------------------------

@dataclass
class JacobiResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    converged: bool
    steps: int
    sweeps: int
    off_history: list = field(default_factory=list)

    @property
    def sweep_off_history(self) -> list:
        """off(T) at sweep boundaries (every K-1 steps), starting with the input."""
        k = len(self.eigenvalues) + (len(self.eigenvalues) % 2)
        per = max(k - 1, 1)
        hist = self.off_history[::per]
        if (len(self.off_history) - 1) % per:
            hist = hist + [self.off_history[-1]]
        return hist


def default_tol(trig) -> float:
    return 1e-10 if TrigMode(trig) is TrigMode.EXACT else 1e-6


def default_max_sweeps(k: int) -> int:
    return 30 * math.ceil(math.log2(max(k, 1))) + 10


def jacobi_eigen(t, trig=TrigMode.EXACT, tol: float | None = None, max_sweeps: int | None = None) -> JacobiResult:
    """Eigen-decompose a tridiagonal (or any small symmetric) matrix.

    ``t`` is a :class:`TridiagonalK` or a dense symmetric array. Eigenvalues are
    returned unsorted together with the columns of the accumulated rotations.
    """
    trig = TrigMode(trig)
    a = t.to_dense() if isinstance(t, TridiagonalK) else np.array(t, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError("expected a non-empty square matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix must be finite")
    tol = default_tol(trig) if tol is None else tol
    if tol <= 0:
        raise ValueError("tol must be positive")
    k = a.shape[0]
    max_sweeps = default_max_sweeps(k) if max_sweeps is None else max_sweeps
    padded = k % 2 == 1
    if padded:
        a = np.pad(a, ((0, 1), (0, 1)))
    grid = SystolicGrid.from_matrix(a)
    size = grid.size
    per_sweep = max(size - 1, 1)
    target = tol * float(np.linalg.norm(a))
    off = grid.off_norm()
    history = [off]
    converged = off <= target
    max_steps = max_sweeps * per_sweep
    while not converged and grid.step_count < max_steps:
        grid.step(trig)
        off = grid.off_norm()
        history.append(off)
        converged = off <= target
    grid.sweep_count = math.ceil(grid.step_count / per_sweep)

    vals = np.diag(grid.matrix()).copy()
    vecs = grid.eigvec_matrix().copy()
    if padded:
        drop = int(np.argmax(np.abs(vecs[k, :])))
        keep = np.array([j for j in range(size) if j != drop])
        vals, vecs = vals[keep], vecs[:k, keep]
    return JacobiResult(vals, vecs, converged, grid.step_count, grid.sweep_count, history)
