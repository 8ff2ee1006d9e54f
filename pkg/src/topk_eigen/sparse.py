"""COO storage, Matrix Market I/O, Frobenius normalization and CU partitioning."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

PACKET_SIZE = 5


class MatrixFormatError(ValueError):
    """Malformed, non-square, asymmetric or out-of-range matrix input."""


class CooEntry(NamedTuple):
    row: int
    col: int
    value: float


@dataclass(frozen=True)
class CooPacket:
    """Up to PACKET_SIZE entries read together by a CU's fetch unit."""

    entries: tuple[CooEntry, ...]

    def __post_init__(self):
        if not 1 <= len(self.entries) <= PACKET_SIZE:
            raise ValueError(f"packet must hold 1..{PACKET_SIZE} entries, got {len(self.entries)}")

    @property
    def count(self) -> int:
        return len(self.entries)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CooMatrix:
    """Square sparse matrix in sorted, duplicate-free coordinate format.

    ``scale`` is the factor that maps stored values back to the matrix the
    user loaded (``original = scale * stored``); it stays 1.0 until
    :func:`frobenius_normalize` is applied.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    normalized: bool = False
    scale: float = 1.0

    def __post_init__(self):
        for name in ("rows", "cols", "vals"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @classmethod
    def from_arrays(cls, n, rows, cols, vals, *, check_symmetric=True, symmetrize=False) -> CooMatrix:
        """Sort, sum duplicates and validate raw 0-based triplets."""
        n = int(n)
        if n < 1:
            raise MatrixFormatError("matrix dimension must be >= 1")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (len(rows) == len(cols) == len(vals)):
            raise MatrixFormatError("rows, cols and vals must have equal length")
        if len(rows) and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
            raise MatrixFormatError(f"entry index out of range for a {n}x{n} matrix")
        if not np.all(np.isfinite(vals)):
            raise MatrixFormatError("matrix values must be finite")
        if symmetrize:
            rows, cols = np.concatenate([rows, cols]), np.concatenate([cols, rows])
            vals = np.concatenate([vals, vals]) * 0.5
        rows, cols, vals = _sum_duplicates(n, rows, cols, vals)
        m = cls(n, rows, cols, vals)
        if check_symmetric and not m.is_symmetric():
            raise MatrixFormatError("matrix is not symmetric (pass symmetrize=True to average it with its transpose)")
        return m

    @classmethod
    def from_dense(cls, a, **kwargs) -> CooMatrix:
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise MatrixFormatError("dense input must be square")
        r, c = np.nonzero(a)
        return cls.from_arrays(a.shape[0], r, c, a[r, c], **kwargs)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    @property
    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.dot(self.vals, self.vals)))

    def entries(self) -> Iterator[CooEntry]:
        for r, c, v in zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()):
            yield CooEntry(r, c, v)

    def is_symmetric(self) -> bool:
        # explicit zeros without a mirrored partner still count as symmetric
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        v = np.concatenate([self.vals, -self.vals])
        _, _, diff = _sum_duplicates(self.n, r, c, v)
        return bool(np.all(diff == 0.0))

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.rows, self.cols] = self.vals
        return a

    def matvec(self, x) -> np.ndarray:
        """Plain float64 product, used for metrics (not the CU dataflow)."""
        x = np.asarray(x, dtype=np.float64)
        return np.bincount(self.rows, weights=self.vals * x[self.cols], minlength=self.n)

    def scaled(self, c: float) -> CooMatrix:
        return CooMatrix(self.n, self.rows, self.cols, self.vals * c)

    @cached_property
    def row_offsets(self) -> np.ndarray:
        return np.searchsorted(self.rows, np.arange(self.n + 1))


def _sum_duplicates(n, rows, cols, vals):
    key = rows * n + cols
    order = np.argsort(key, kind="stable")
    key, vals = key[order], vals[order]
    if len(key) == 0:
        return rows[:0], cols[:0], vals
    starts = np.flatnonzero(np.concatenate([[True], key[1:] != key[:-1]]))
    if len(starts) != len(key):
        vals = np.add.reduceat(vals, starts)
        key = key[starts]
    return key // n, key % n, vals


# -- Matrix Market ----------------------------------------------------------

def load_matrix_market(path, symmetrize: bool = False) -> CooMatrix:
    """Read a coordinate Matrix Market file into a validated CooMatrix.

    Supports ``real``, ``integer`` and ``pattern`` fields with ``general`` or
    ``symmetric`` storage. Symmetric files are expanded to full storage,
    pattern entries become 1.0 and duplicates are summed.
    """
    path = Path(path)
    with path.open("r") as fh:
        header = fh.readline()
        parts = header.strip().split()
        if len(parts) != 5 or parts[0].lower() != "%%matrixmarket":
            raise MatrixFormatError(f"{path}: missing %%MatrixMarket header")
        obj, fmt, fld, sym = (p.lower() for p in parts[1:])
        if obj != "matrix" or fmt != "coordinate":
            raise MatrixFormatError(f"{path}: only 'matrix coordinate' files are supported")
        if fld not in ("real", "integer", "pattern"):
            raise MatrixFormatError(f"{path}: unsupported field '{fld}'")
        if sym not in ("general", "symmetric"):
            raise MatrixFormatError(f"{path}: unsupported symmetry '{sym}'")

        line = fh.readline()
        while line and (not line.strip() or line.lstrip().startswith("%")):
            line = fh.readline()
        try:
            nrows, ncols, nnz = (int(t) for t in line.split())
        except ValueError:
            raise MatrixFormatError(f"{path}: bad size line {line!r}") from None
        if nrows != ncols:
            raise MatrixFormatError(f"{path}: matrix is {nrows}x{ncols}, expected square")

        ncol_expected = 2 if fld == "pattern" else 3
        try:
            body = np.loadtxt(fh, comments="%", ndmin=2, dtype=np.float64)
        except ValueError as exc:
            raise MatrixFormatError(f"{path}: malformed entry ({exc})") from None

    if nnz == 0:
        body = np.zeros((0, ncol_expected))
    if body.shape != (nnz, ncol_expected):
        raise MatrixFormatError(f"{path}: expected {nnz} entries with {ncol_expected} fields, got {body.shape}")
    idx = body[:, :2]
    if np.any(idx != np.round(idx)):
        raise MatrixFormatError(f"{path}: non-integer index")
    rows = idx[:, 0].astype(np.int64) - 1
    cols = idx[:, 1].astype(np.int64) - 1
    vals = np.ones(nnz) if fld == "pattern" else body[:, 2].copy()
    if nnz and (rows.min() < 0 or cols.min() < 0 or rows.max() >= nrows or cols.max() >= nrows):
        raise MatrixFormatError(f"{path}: entry index out of range for a {nrows}x{nrows} matrix")

    if sym == "symmetric":
        off = rows != cols
        rows, cols = np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]])
        vals = np.concatenate([vals, vals[off]])
    return CooMatrix.from_arrays(nrows, rows, cols, vals, symmetrize=symmetrize)


def save_matrix_market(path, m: CooMatrix, symmetric: bool = False, comment: str | None = None) -> None:
    """Write ``m`` as a real coordinate file (lower triangle only if ``symmetric``)."""
    rows, cols, vals = m.rows, m.cols, m.vals
    if symmetric:
        keep = rows >= cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    with Path(path).open("w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {'symmetric' if symmetric else 'general'}\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{m.n} {m.n} {len(vals)}\n")
        np.savetxt(fh, np.column_stack([rows + 1, cols + 1, vals]), fmt=["%d", "%d", "%.17g"])


# -- normalization ----------------------------------------------------------

def frobenius_normalize(m: CooMatrix) -> CooMatrix:
    """Divide every value by ||M||_F so all entries fall inside (-1, 1).

    Eigenvalues of the result are those of ``m`` divided by the norm, which is
    folded into ``scale`` so callers can map them back.
    """
    norm = m.frobenius_norm
    if m.nnz == 0 or norm == 0.0:
        raise ValueError("cannot normalize an all-zero matrix")
    return CooMatrix(m.n, m.rows, m.cols, m.vals / norm, normalized=True, scale=m.scale * norm)


# -- partitioning -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RowPartition:
    """Contiguous row range owned by one SpMV compute unit.

    Entries are the matrix rows ``[row_begin, row_end)`` in sorted order;
    ``packet_offsets`` cut them greedily into packets of at most 5 entries.
    """

    cu_id: int
    row_begin: int
    row_end: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    packet_offsets: np.ndarray = field(repr=False)
    n: int = 0
    _plans: dict = field(default_factory=dict, repr=False)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    @property
    def num_rows(self) -> int:
        return self.row_end - self.row_begin

    @property
    def packets(self) -> list[CooPacket]:
        out = []
        off = self.packet_offsets.tolist()
        r, c, v = self.rows.tolist(), self.cols.tolist(), self.vals.tolist()
        for lo, hi in zip(off[:-1], off[1:]):
            out.append(CooPacket(tuple(CooEntry(r[i], c[i], v[i]) for i in range(lo, hi))))
        return out

    @cached_property
    def local_rows(self) -> np.ndarray:
        return self.rows - self.row_begin

    @cached_property
    def packet_ids(self) -> np.ndarray:
        return np.arange(self.nnz) // PACKET_SIZE


def _packet_offsets(nnz: int) -> np.ndarray:
    return np.append(np.arange(0, nnz, PACKET_SIZE), nnz).astype(np.int64)


def row_ranges(n: int, num_cus: int) -> list[tuple[int, int]]:
    """Equal-rows split: the first ``n % num_cus`` ranges get one extra row."""
    base, extra = divmod(n, num_cus)
    bounds = [0]
    for cu in range(num_cus):
        bounds.append(bounds[-1] + base + (1 if cu < extra else 0))
    return list(zip(bounds[:-1], bounds[1:]))


def _nnz_balanced_ranges(m: CooMatrix, num_cus: int) -> list[tuple[int, int]]:
    offsets = m.row_offsets
    targets = np.arange(1, num_cus) * (m.nnz / num_cus)
    cuts = np.searchsorted(offsets, targets, side="left")
    bounds = [0]
    for cu, cut in enumerate(cuts, start=1):
        # every CU keeps at least one row
        lo = bounds[-1] + 1
        hi = m.n - (num_cus - cu)
        bounds.append(int(min(max(cut, lo), hi)))
    bounds.append(m.n)
    return list(zip(bounds[:-1], bounds[1:]))


def partition(m: CooMatrix, num_cus: int, balance: str = "rows") -> list[RowPartition]:
    """Split ``m`` into ``num_cus`` row ranges and packetize each one.

    ``balance="rows"`` gives every CU the same number of rows (differing by
    at most one). ``balance="nnz"`` is an opt-in mode that cuts at row
    boundaries closest to an even share of non-zeros.
    """
    if not 1 <= num_cus <= m.n:
        raise ValueError(f"num_cus must be in [1, {m.n}], got {num_cus}")
    if balance == "rows":
        ranges = row_ranges(m.n, num_cus)
    elif balance == "nnz":
        ranges = _nnz_balanced_ranges(m, num_cus)
    else:
        raise ValueError(f"unknown balance mode {balance!r}")
    offsets = m.row_offsets
    parts = []
    for cu, (lo, hi) in enumerate(ranges):
        a, b = int(offsets[lo]), int(offsets[hi])
        parts.append(RowPartition(
            cu_id=cu, row_begin=lo, row_end=hi,
            rows=_frozen(m.rows[a:b]), cols=_frozen(m.cols[a:b]), vals=_frozen(m.vals[a:b]),
            packet_offsets=_packet_offsets(b - a), n=m.n,
        ))
    return parts
