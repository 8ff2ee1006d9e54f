"""Signed fixed-point (Q-format) arithmetic and the arithmetic modes used by Lanczos.

Raw fixed-point values are plain integers (``int`` or ``np.int64``) holding
``round(x * 2**f)``. The format has one sign bit, one integer bit and ``f``
fractional bits, so the representable range is ``[-2, 2 - 2**-f]``.
All rounding is round-half-to-even; overflow saturates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QFormat:
    frac_bits: int = 30

    def __post_init__(self):
        if not 1 <= self.frac_bits <= 30:
            raise ValueError(f"frac_bits must be in [1, 30], got {self.frac_bits}")

    @property
    def total_bits(self) -> int:
        return self.frac_bits + 2

    @property
    def max_raw(self) -> int:
        return (1 << (self.frac_bits + 1)) - 1

    @property
    def min_raw(self) -> int:
        return -(1 << (self.frac_bits + 1))

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def max_value(self) -> float:
        return self.max_raw * self.resolution


def _rne_shift_int(p: int, f: int) -> int:
    """Round-half-even of p / 2**f for a Python int."""
    q = p >> f
    r = p - (q << f)
    half = 1 << (f - 1)
    if r > half or (r == half and q & 1):
        q += 1
    return q


def rne_shift(p: np.ndarray, f: int) -> np.ndarray:
    """Vectorized round-half-even of p / 2**f for int64 arrays."""
    q = p >> f
    r = p & ((1 << f) - 1)
    half = 1 << (f - 1)
    up = (r > half) | ((r == half) & ((q & 1) == 1))
    return q + up


def _saturate_int(x: int, q: QFormat) -> int:
    return max(q.min_raw, min(q.max_raw, x))


def to_fixed(x: float, q: QFormat) -> int:
    """Quantize a real number to raw Q-format (round-half-even, saturating)."""
    if math.isnan(x):
        raise ValueError("cannot quantize NaN")
    scaled = x * (1 << q.frac_bits)
    if scaled >= q.max_raw:
        return q.max_raw
    if scaled <= q.min_raw:
        return q.min_raw
    return int(round(scaled))  # Python round() is half-even


def from_fixed(raw, q: QFormat):
    return raw * q.resolution if np.ndim(raw) == 0 else np.asarray(raw, dtype=np.float64) * q.resolution


def fixed_mul(a: int, b: int, q: QFormat) -> int:
    return _saturate_int(_rne_shift_int(int(a) * int(b), q.frac_bits), q)


def fixed_add(a: int, b: int, q: QFormat) -> int:
    return _saturate_int(int(a) + int(b), q)


def _wide_sum_of_products(x: np.ndarray, y: np.ndarray, f: int) -> int:
    # products fit in int64 (|x|,|y| <= 2**31); split each into high/low
    # halves so the sums cannot overflow, then recombine exactly.
    p = x.astype(np.int64) * y.astype(np.int64)
    hi = p >> f
    lo = p & ((1 << f) - 1)
    return (int(hi.sum()) << f) + int(lo.sum())


def dot_fixed(x, y, q: QFormat) -> int:
    """Dot product of raw vectors with a wide accumulator and a single final rounding."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch")
    acc = _wide_sum_of_products(x, y, q.frac_bits)
    return _saturate_int(_rne_shift_int(acc, q.frac_bits), q)


# -- arithmetic modes ---------------------------------------------------------

class FloatMode:
    """IEEE arithmetic in float32 or float64; vectors are plain float arrays."""

    is_fixed = False

    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        if self.dtype not in (np.float32, np.float64):
            raise ValueError(f"unsupported float dtype {dtype}")
        self.breakdown_tol = 1e-12 if self.dtype == np.float64 else 1e-6

    @property
    def name(self) -> str:
        return "f64" if self.dtype == np.float64 else "f32"

    @property
    def saturations(self) -> int:
        return 0

    def __repr__(self):
        return f"FloatMode({self.name})"

    def __eq__(self, other):
        return isinstance(other, FloatMode) and other.dtype == self.dtype

    def __hash__(self):
        return hash(self.name)

    def encode(self, x) -> np.ndarray:
        return np.asarray(x, dtype=self.dtype)

    def decode(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64)

    def scalar(self, a: float):
        return self.dtype.type(a)

    def to_float(self, a) -> float:
        return float(a)

    def zeros(self, n: int) -> np.ndarray:
        return np.zeros(n, dtype=self.dtype)

    def dot(self, x, y):
        return np.dot(x, y)

    def norm(self, x) -> float:
        return float(np.sqrt(np.dot(x, x)))

    def sub_scaled(self, w, a, v) -> np.ndarray:
        return w - self.dtype.type(a) * v

    def divide(self, x, beta: float) -> np.ndarray:
        return (x / self.dtype.type(beta)).astype(self.dtype, copy=False)


@dataclass(eq=False)
class FixedMode:
    """Q-format arithmetic on raw int64 vectors, counting saturation events."""

    q: QFormat = field(default_factory=QFormat)
    saturations: int = 0

    is_fixed = True

    def __post_init__(self):
        self.breakdown_tol = 2.0 ** (-self.q.frac_bits + 4)

    @property
    def name(self) -> str:
        return f"fixed:{self.q.frac_bits}"

    def __repr__(self):
        return f"FixedMode({self.name})"

    def __eq__(self, other):
        return isinstance(other, FixedMode) and other.q == self.q

    def __hash__(self):
        return hash(self.name)

    def _clip(self, raw: np.ndarray) -> np.ndarray:
        lo, hi = self.q.min_raw, self.q.max_raw
        bad = (raw > hi) | (raw < lo)
        nbad = int(np.count_nonzero(bad))
        if nbad:
            self.saturations += nbad
            raw = np.clip(raw, lo, hi)
        return raw

    def _clip_int(self, x: int) -> int:
        y = _saturate_int(x, self.q)
        if y != x:
            self.saturations += 1
        return y

    def encode(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("cannot quantize non-finite values")
        scaled = np.rint(x * float(1 << self.q.frac_bits))
        lo, hi = self.q.min_raw, self.q.max_raw
        nbad = int(np.count_nonzero((scaled > hi) | (scaled < lo)))
        if nbad:
            self.saturations += nbad
            scaled = np.clip(scaled, lo, hi)
        return scaled.astype(np.int64)

    def decode(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.q.resolution

    def scalar(self, a: float) -> int:
        raw = to_fixed(a, self.q)
        if abs(a) * (1 << self.q.frac_bits) > self.q.max_raw + 0.5:
            self.saturations += 1
        return raw

    def to_float(self, a) -> float:
        return int(a) * self.q.resolution

    def zeros(self, n: int) -> np.ndarray:
        return np.zeros(n, dtype=np.int64)

    def mul(self, a, b) -> np.ndarray:
        """Elementwise product, rounded back to Q-format and saturated."""
        p = np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)
        return self._clip(rne_shift(p, self.q.frac_bits))

    def add(self, a, b) -> np.ndarray:
        return self._clip(np.asarray(a, dtype=np.int64) + np.asarray(b, dtype=np.int64))

    def sub(self, a, b) -> np.ndarray:
        return self._clip(np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64))

    def dot(self, x, y) -> int:
        acc = _wide_sum_of_products(x, y, self.q.frac_bits)
        return self._clip_int(_rne_shift_int(acc, self.q.frac_bits))

    def norm(self, x) -> float:
        # exact sum of squares, square root taken in floating point
        acc = _wide_sum_of_products(x, x, self.q.frac_bits)
        return math.sqrt(acc) * self.q.resolution

    def sub_scaled(self, w, a, v) -> np.ndarray:
        return self.sub(w, self.mul(np.int64(a), v))

    def divide(self, x, beta: float) -> np.ndarray:
        return self.encode(self.decode(x) / beta)


ArithMode = FloatMode | FixedMode


def parse_arith(spec: str) -> FloatMode | FixedMode:
    """Parse ``f32``, ``f64`` or ``fixed[:F]`` into an arithmetic mode."""
    s = spec.strip().lower()
    if s in ("f64", "float64"):
        return FloatMode(np.float64)
    if s in ("f32", "float32"):
        return FloatMode(np.float32)
    if s == "fixed":
        return FixedMode(QFormat())
    if s.startswith("fixed:"):
        try:
            f = int(s.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad fixed-point spec {spec!r}") from None
        return FixedMode(QFormat(f))
    raise ValueError(f"unknown arithmetic mode {spec!r} (expected f32, f64 or fixed:F)")
