"""Streaming SpMV over packetized row partitions.

Each compute unit (CU) walks its packets in order: fetch the entries, gather
``x[col]``, multiply, aggregate same-row products, then accumulate into the
per-row result. A merge step concatenates the row-disjoint partial results.

Vectors are passed in the storage format of the arithmetic mode: float arrays
for :class:`FloatMode`, raw int64 Q-format arrays for :class:`FixedMode`.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fixed import FixedMode, FloatMode, rne_shift
from .sparse import CooMatrix, RowPartition, partition

THREADS_ENV = "TOPK_EIGEN_THREADS"


@dataclass(frozen=True, eq=False)
class PartialResult:
    cu_id: int
    row_begin: int
    row_end: int
    values: np.ndarray


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# -- fixed-point accumulation -------------------------------------------------

def _saturating_segment_sums(values: np.ndarray, starts: np.ndarray, lo: int, hi: int):
    """Sum contiguous segments left to right with saturation after every add.

    Returns ``(sums, saturation_events)``. Integer addition is associative, so
    segments whose running sums never leave ``[lo, hi]`` are summed with a
    single cumulative sum; only segments that do overflow are replayed
    sequentially.
    """
    if len(values) == 0:
        return np.zeros(0, dtype=np.int64), 0
    cs = np.cumsum(values)
    ends = np.append(starts[1:], len(values))
    base = np.where(starts > 0, cs[starts - 1], 0)
    seg_of = np.repeat(np.arange(len(starts)), ends - starts)
    prefix = cs - base[seg_of]
    sums = cs[ends - 1] - base
    bad = (prefix > hi) | (prefix < lo)
    if not bad.any():
        return sums, 0
    events = 0
    for s in np.unique(seg_of[bad]).tolist():
        acc = 0
        for v in values[starts[s]:ends[s]].tolist():
            acc += v
            if acc > hi:
                acc, events = hi, events + 1
            elif acc < lo:
                acc, events = lo, events + 1
        sums[s] = acc
    return sums, events


def _fixed_plan(p: RowPartition, arith: FixedMode):
    key = ("fixed", arith.q)
    plan = p._plans.get(key)
    if plan is None:
        vals_raw = arith.encode(p.vals)
        lr, pk = p.local_rows, p.packet_ids
        if p.nnz:
            brk = np.concatenate([[True], (lr[1:] != lr[:-1]) | (pk[1:] != pk[:-1])])
        else:
            brk = np.zeros(0, dtype=bool)
        seg_starts = np.flatnonzero(brk)
        seg_rows = lr[seg_starts]
        if len(seg_rows):
            row_brk = np.concatenate([[True], seg_rows[1:] != seg_rows[:-1]])
        else:
            row_brk = np.zeros(0, dtype=bool)
        row_starts = np.flatnonzero(row_brk)
        plan = (vals_raw, seg_starts, row_starts, seg_rows[row_starts])
        p._plans[key] = plan
    return plan


def _spmv_cu_fixed(p: RowPartition, x: np.ndarray, arith: FixedMode) -> np.ndarray:
    q = arith.q
    vals_raw, seg_starts, row_starts, out_rows = _fixed_plan(p, arith)
    prod = arith._clip(rne_shift(vals_raw * x[p.cols], q.frac_bits))
    # aggregation unit: same-row products inside one packet
    packet_sums, ev1 = _saturating_segment_sums(prod, seg_starts, q.min_raw, q.max_raw)
    # row accumulator: packet aggregates in packet order
    row_sums, ev2 = _saturating_segment_sums(packet_sums, row_starts, q.min_raw, q.max_raw)
    arith.saturations += ev1 + ev2
    out = np.zeros(p.num_rows, dtype=np.int64)
    out[out_rows] = row_sums
    return out


def _spmv_cu_float(p: RowPartition, x: np.ndarray, arith: FloatMode) -> np.ndarray:
    dt = arith.dtype
    prod = p.vals.astype(dt, copy=False) * x[p.cols]
    # Products are folded into the row accumulator strictly in packet order,
    # so each row sees the same sequence of additions for any CU count.
    if dt == np.float64:
        return np.bincount(p.local_rows, weights=prod, minlength=p.num_rows)
    out = np.zeros(p.num_rows, dtype=dt)
    np.add.at(out, p.local_rows, prod)
    return out


def spmv_cu(p: RowPartition, x, arith=None) -> PartialResult:
    """Run one compute unit over its partition.

    ``x`` must be in the storage format of ``arith`` (default float64).
    """
    arith = arith or FloatMode()
    x = np.asarray(x)
    if p.n and x.shape != (p.n,):
        raise ValueError(f"dimension mismatch: partition of a {p.n}x{p.n} matrix, vector of shape {x.shape}")
    if arith.is_fixed:
        values = _spmv_cu_fixed(p, x.astype(np.int64, copy=False), arith)
    else:
        values = _spmv_cu_float(p, x.astype(arith.dtype, copy=False), arith)
    return PartialResult(p.cu_id, p.row_begin, p.row_end, values)


def merge(partials, n: int | None = None) -> np.ndarray:
    """Concatenate row-disjoint partial results into one dense vector."""
    parts = sorted(partials, key=lambda r: r.row_begin)
    if not parts:
        raise ValueError("no partial results to merge")
    expected = 0
    for r in parts:
        if r.row_begin != expected:
            kind = "overlapping" if r.row_begin < expected else "incomplete"
            raise ValueError(f"{kind} coverage at row {min(r.row_begin, expected)}")
        if len(r.values) != r.row_end - r.row_begin:
            raise ValueError(f"partial result of CU {r.cu_id} has wrong length")
        expected = r.row_end
    if n is not None and expected != n:
        raise ValueError(f"incomplete coverage: rows [{expected}, {n}) missing")
    return np.concatenate([r.values for r in parts])


def spmv_raw(parts, x, arith=None, threads: int = 1) -> np.ndarray:
    """SpMV over pre-built partitions, in and out of storage format."""
    arith = arith or FloatMode()
    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(parts))) as pool:
            partials = list(pool.map(lambda p: spmv_cu(p, x, arith), parts))
    else:
        partials = [spmv_cu(p, x, arith) for p in parts]
    return merge(partials, parts[0].n or None)


def spmv(m, x, num_cus: int = 1, arith=None, threads: int = 1) -> np.ndarray:
    """Multiply a matrix (or its partitions) by a real vector.

    Accepts a :class:`CooMatrix` (partitioned here into ``num_cus`` CUs) or a
    list of :class:`RowPartition`. ``x`` is real-valued and is quantized when
    ``arith`` is fixed-point; the result is always returned as float64.
    """
    arith = arith or FloatMode()
    parts = partition(m, num_cus) if isinstance(m, CooMatrix) else list(m)
    n = parts[0].n
    x = np.asarray(x, dtype=np.float64)
    if n and x.shape != (n,):
        raise ValueError(f"dimension mismatch: matrix is {n}x{n}, vector has shape {x.shape}")
    return arith.decode(spmv_raw(parts, arith.encode(x), arith, threads))
