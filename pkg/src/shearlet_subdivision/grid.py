"""Dense windows of sequences on Z^2 and the upsample-then-filter kernel."""

import dataclasses
import functools
from collections.abc import Iterator
from typing import Final, Self

import numpy as np

from shearlet_subdivision import core, dyadic, lattice
from shearlet_subdivision.symbol import LaurentPoly

Fraction = dyadic.Fraction
Index = tuple[int, int]

_INT64_BOUND: Final = 1 << 62


@dataclasses.dataclass(frozen=True, eq=False)
class Grid:
  """Window of a finitely supported sequence on Z^2.

  ``values[i, j]`` is the entry at ``origin + (i, j)``. Exact grids store
  Python ints (object dtype) standing for ``values / 2**log2den``; float
  grids store float64 and keep ``log2den`` at 0.
  """

  values: np.ndarray
  origin: Index = (0, 0)
  log2den: int = 0

  def __post_init__(self) -> None:
    if self.values.ndim != 2:
      raise core.ShapeMismatchError(
        f"Grids are two dimensional, got shape {self.values.shape}",
      )
    if self.values.dtype != object and self.log2den:
      raise ValueError("Float grids carry no denominator.")

  @classmethod
  def zeros(cls, shape: Index, origin: Index = (0, 0), *, exact: bool = True) -> Self:
    if exact:
      return cls(dyadic.int_array(shape), origin)
    return cls(np.zeros(shape, dtype=np.float64), origin)

  @classmethod
  def delta(cls, at: Index = (0, 0), *, exact: bool = True) -> Self:
    grid = cls.zeros((1, 1), at, exact=exact)
    grid.values[0, 0] = 1
    return grid

  @classmethod
  def from_fractions(
    cls, values: np.ndarray | list[list[Fraction | int]], origin: Index = (0, 0)
  ) -> Self:
    arr = np.asarray(values, dtype=object)
    if arr.ndim != 2:
      raise core.ShapeMismatchError(f"Expected a 2-D array, got shape {arr.shape}")
    flat = [Fraction(v) for v in arr.ravel()]
    k = dyadic.common_log2den(flat)
    nums = dyadic.int_array((len(flat),))
    nums[:] = dyadic.to_numerators(flat, k)
    values, k = dyadic.strip_twos(nums.reshape(arr.shape), k)
    return cls(values, tuple(origin), k)

  @classmethod
  def from_floats(cls, values: np.ndarray, origin: Index = (0, 0)) -> Self:
    return cls(np.asarray(values, dtype=np.float64), tuple(origin))

  @classmethod
  def from_poly(cls, poly: LaurentPoly, *, exact: bool = True) -> Self:
    (lo1, lo2), (hi1, hi2) = poly.box()
    grid = cls.zeros((hi1 - lo1 + 1, hi2 - lo2 + 1), (lo1, lo2), exact=exact)
    if not poly:
      return grid
    if not exact:
      for (i, j), v in poly.terms.items():
        grid.values[i - lo1, j - lo2] = float(v)
      return grid
    k = poly.max_log2den()
    for (i, j), v in poly.terms.items():
      grid.values[i - lo1, j - lo2] = (v * (1 << k)).numerator
    return dataclasses.replace(grid, log2den=k)

  @property
  def exact(self) -> bool:
    return self.values.dtype == object

  @property
  def shape(self) -> Index:
    return self.values.shape

  def box(self) -> tuple[Index, Index]:
    """Inclusive (low, high) lattice corners of the window."""
    o1, o2 = self.origin
    return (o1, o2), (o1 + self.shape[0] - 1, o2 + self.shape[1] - 1)

  def indices(self) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.indices(self.shape)
    return i + self.origin[0], j + self.origin[1]

  def value(self, alpha: Index) -> Fraction | float:
    i, j = alpha[0] - self.origin[0], alpha[1] - self.origin[1]
    if not (0 <= i < self.shape[0] and 0 <= j < self.shape[1]):
      return Fraction(0) if self.exact else 0.0
    v = self.values[i, j]
    return Fraction(v, 1 << self.log2den) if self.exact else float(v)

  def items(self) -> Iterator[tuple[Index, Fraction | float]]:
    """Nonzero entries in row-major order."""
    for i, j in zip(*np.nonzero(self.values), strict=True):
      alpha = (int(i) + self.origin[0], int(j) + self.origin[1])
      yield alpha, self.value(alpha)

  def to_poly(self) -> LaurentPoly:
    if not self.exact:
      raise ValueError("Only exact grids convert to Laurent polynomials.")
    return LaurentPoly(dict(self.items()))

  def fractions(self) -> np.ndarray:
    if not self.exact:
      return self.values.astype(object)
    den = 1 << self.log2den
    out = np.empty(self.shape, dtype=object)
    out[...] = np.frompyfunc(lambda v: Fraction(v, den), 1, 1)(self.values)
    return out

  def to_float(self) -> "Grid":
    if not self.exact:
      return self
    # float(int) rounds correctly and the power-of-two scaling is exact.
    values = np.ldexp(self.values.astype(np.float64), -self.log2den)
    return Grid(values, self.origin)

  def normalized(self) -> "Grid":
    if not self.exact:
      return self
    values, k = dyadic.strip_twos(self.values, self.log2den)
    return Grid(values, self.origin, k)

  def with_log2den(self, k: int) -> "Grid":
    return Grid(dyadic.rescale(self.values, self.log2den, k), self.origin, k)

  def window(self, origin: Index, shape: Index) -> "Grid":
    """Crops or zero-pads to the given window."""
    out = Grid.zeros(shape, origin, exact=self.exact)
    lo1 = max(origin[0], self.origin[0])
    lo2 = max(origin[1], self.origin[1])
    hi1 = min(origin[0] + shape[0], self.origin[0] + self.shape[0])
    hi2 = min(origin[1] + shape[1], self.origin[1] + self.shape[1])
    if lo1 < hi1 and lo2 < hi2:
      dst = (
        slice(lo1 - origin[0], hi1 - origin[0]),
        slice(lo2 - origin[1], hi2 - origin[1]),
      )
      src = (
        slice(lo1 - self.origin[0], hi1 - self.origin[0]),
        slice(lo2 - self.origin[1], hi2 - self.origin[1]),
      )
      out.values[dst] = self.values[src]
    return dataclasses.replace(out, log2den=self.log2den)

  def trimmed(self) -> "Grid":
    """Smallest window holding every nonzero entry."""
    rows, cols = np.nonzero(self.values)
    if rows.size == 0:
      return Grid.zeros((0, 0), self.origin, exact=self.exact)
    origin = (self.origin[0] + int(rows.min()), self.origin[1] + int(cols.min()))
    shape = (int(rows.max() - rows.min()) + 1, int(cols.max() - cols.min()) + 1)
    return self.window(origin, shape).normalized()

  def _aligned(self, other: "Grid") -> tuple["Grid", "Grid"]:
    if self.exact != other.exact:
      return self.to_float(), other.to_float()
    if not self.exact:
      return self, other
    k = max(self.log2den, other.log2den)
    return self.with_log2den(k), other.with_log2den(k)

  def _union_frame(self, other: "Grid") -> tuple[Index, Index]:
    if 0 in self.shape:
      return other.origin, other.shape
    if 0 in other.shape:
      return self.origin, self.shape
    (a_lo, a_hi), (b_lo, b_hi) = self.box(), other.box()
    lo = (min(a_lo[0], b_lo[0]), min(a_lo[1], b_lo[1]))
    hi = (max(a_hi[0], b_hi[0]), max(a_hi[1], b_hi[1]))
    return lo, (hi[0] - lo[0] + 1, hi[1] - lo[1] + 1)

  def __add__(self, other: "Grid") -> "Grid":
    a, b = self._aligned(other)
    origin, shape = a._union_frame(b)
    a, b = a.window(origin, shape), b.window(origin, shape)
    return Grid(a.values + b.values, origin, a.log2den).normalized()

  def __neg__(self) -> "Grid":
    return Grid(-self.values, self.origin, self.log2den)

  def __sub__(self, other: "Grid") -> "Grid":
    return self + (-other)

  def scaled(self, factor: Fraction | int) -> "Grid":
    factor = Fraction(factor)
    if not self.exact:
      return Grid(self.values * float(factor), self.origin)
    k = dyadic.log2_denominator(factor)
    return Grid(
      self.values * (factor * (1 << k)).numerator, self.origin, self.log2den + k
    ).normalized()

  def shifted(self, offset: Index) -> "Grid":
    return Grid(
      self.values,
      (self.origin[0] + offset[0], self.origin[1] + offset[1]),
      self.log2den,
    )

  def max_abs(self) -> Fraction | float:
    if self.values.size == 0:
      return Fraction(0) if self.exact else 0.0
    top = np.abs(self.values).max()
    return Fraction(int(top), 1 << self.log2den) if self.exact else float(top)

  def is_zero(self) -> bool:
    return not np.any(self.values)

  def same_as(self, other: "Grid") -> bool:
    """Value equality on Z^2, independent of window and denominator."""
    a, b = self._aligned(other)
    origin, shape = a._union_frame(b)
    return bool(
      np.array_equal(a.window(origin, shape).values, b.window(origin, shape).values)
    )


@dataclasses.dataclass(frozen=True)
class Taps:
  """Mask taps prepared for the kernel: offsets, numerators, shared denominator."""

  offsets: tuple[Index, ...]
  weights: tuple[int | float, ...]
  log2den: int
  box: tuple[Index, Index]
  exact: bool


@functools.lru_cache(maxsize=256)
def taps_of(mask: LaurentPoly, exact: bool = True) -> Taps:
  offsets = tuple(alpha for alpha, _ in mask.items())
  values = [v for _, v in mask.items()]
  if exact:
    k = dyadic.common_log2den(values)
    weights: tuple[int | float, ...] = tuple(dyadic.to_numerators(values, k))
  else:
    k = 0
    weights = tuple(float(v) for v in values)
  return Taps(offsets, weights, k, mask.box(), exact)


def _image_box(grid: Grid, w: lattice.Mat2) -> tuple[Index, Index]:
  (lo1, lo2), (hi1, hi2) = grid.box()
  corners = [w.apply(x, y) for x in (lo1, hi1) for y in (lo2, hi2)]
  xs = [int(x) for x, _ in corners]
  ys = [int(y) for _, y in corners]
  return (min(xs), min(ys)), (max(xs), max(ys))


def _lattice_view(
  out: np.ndarray, start: Index, w: lattice.Mat2, shape: Index
) -> np.ndarray:
  """Writable view v[i, j] = out[start + W (i, j)] of a C-contiguous array.

  Every addressed position must lie inside ``out``.
  """
  (a, b), (c, d) = w.int_entries()
  s0, s1 = out.strides
  flat = out.reshape(-1)
  return np.lib.stride_tricks.as_strided(
    flat[start[0] * out.shape[1] + start[1] :],
    shape=shape,
    strides=(a * s0 + c * s1, b * s0 + d * s1),
  )


def _machine_ints(grid: Grid, taps: Taps) -> np.ndarray | None:
  """Exact numerators as int64 when no output sum can overflow, else None."""
  if not (grid.exact and taps.exact):
    return None
  top = int(np.max(np.abs(grid.values)))
  if top * sum(abs(int(v)) for v in taps.weights) >= _INT64_BOUND:
    return None
  return grid.values.astype(np.int64)


def upsample_filter(
  grid: Grid,
  taps: Taps,
  w: lattice.Mat2,
  boundary: core.Boundary,
) -> Grid:
  """Computes (S c)(alpha) = sum_beta a(alpha - W beta) c(beta)."""
  if taps.exact and not grid.exact:
    raise ValueError("Exact taps need an exact grid.")
  if grid.exact and not taps.exact:
    grid = grid.to_float()
  if 0 in grid.shape or not taps.offsets:
    if isinstance(boundary, core.PeriodicBoundary):
      origin, shape = boundary.refine_frame(((0, 0), (0, 0)), ((0, 0), (0, 0)), w)
      return Grid.zeros(shape, origin, exact=grid.exact)
    return Grid.zeros((0, 0), grid.origin, exact=grid.exact)
  origin, shape = boundary.refine_frame(_image_box(grid, w), taps.box, w)
  values = _machine_ints(grid, taps)
  if values is None:
    values = grid.values
    out = Grid.zeros(shape, origin, exact=grid.exact).values
  else:
    out = np.zeros(shape, dtype=np.int64)
  if isinstance(boundary, core.ZeroBoundary):
    # Without wrapping, each tap adds the input to a strided sublattice of out.
    b1, b2 = (int(v) for v in w.apply(int(grid.origin[0]), int(grid.origin[1])))
    for (mu1, mu2), weight in zip(taps.offsets, taps.weights, strict=True):
      start = (b1 + mu1 - origin[0], b2 + mu2 - origin[1])
      view = _lattice_view(out, start, w, grid.shape)
      view += weight * values
  else:
    x, y = w.apply_int(*grid.indices())
    x = x - origin[0]
    y = y - origin[1]
    for (mu1, mu2), weight in zip(taps.offsets, taps.weights, strict=True):
      i, j = boundary.wrap(x + mu1, y + mu2, shape)
      # Distinct inputs land on distinct outputs for a fixed tap.
      out[i, j] += weight * values
  log2den = grid.log2den + taps.log2den
  if out.dtype == np.int64:
    out, log2den = dyadic.strip_twos(out, log2den)
    return Grid(out.astype(object), origin, log2den)
  return Grid(out, origin, log2den).normalized()


def subsample(
  grid: Grid, w: lattice.Mat2, boundary: core.Boundary, offset: Index = (0, 0)
) -> Grid:
  """Returns alpha -> c(W alpha + offset) on the coarse period."""
  coarse = boundary.coarsened(w)
  if not isinstance(coarse, core.PeriodicBoundary):
    raise core.PeriodMismatchError("Subsampling needs periodic data.")
  i, j = np.indices(coarse.periods)
  x, y = w.apply_int(i, j)
  x, y = boundary.wrap(x + offset[0], y + offset[1], grid.shape)
  return Grid(grid.values[x, y], (0, 0), grid.log2den).normalized()


def scatter(
  coarse: Grid,
  into: Grid,
  w: lattice.Mat2,
  boundary: core.Boundary,
  offset: Index = (0, 0),
) -> Grid:
  """Writes coarse(alpha) to position W alpha + offset of a periodic copy of into."""
  a, b = into._aligned(coarse)
  i, j = np.indices(b.shape)
  x, y = w.apply_int(i, j)
  x, y = boundary.wrap(x + offset[0], y + offset[1], a.shape)
  values = a.values.copy()
  values[x, y] = b.values
  return Grid(values, a.origin, a.log2den).normalized()
