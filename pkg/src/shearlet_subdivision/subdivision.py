import dataclasses
import logging
import math
from collections.abc import Sequence
from typing import NamedTuple, Self

import numpy as np

from shearlet_subdivision import core, dyadic, grid, lattice
from shearlet_subdivision.grid import Grid
from shearlet_subdivision.lattice import EpsWord
from shearlet_subdivision.masks import MaskPair
from shearlet_subdivision.symbol import LaurentPoly

logger = logging.getLogger(__name__)

Fraction = dyadic.Fraction


@dataclasses.dataclass(frozen=True, eq=False)
class SampledField:
  """Data on the grid W_eps^-1 Z^2: index alpha sits at location W_eps^-1 alpha."""

  grid: Grid
  eps: EpsWord = EpsWord()
  boundary: core.Boundary = core.ZeroBoundary()

  def __post_init__(self) -> None:
    self.boundary.check_frame(self.grid.origin, self.grid.shape)

  @classmethod
  def from_values(
    cls,
    values: Sequence[Sequence[Fraction | int]] | np.ndarray,
    origin: tuple[int, int] = (0, 0),
    eps: EpsWord = EpsWord(),
    boundary: core.Boundary = core.ZeroBoundary(),
  ) -> Self:
    return cls(Grid.from_fractions(values, origin), eps, boundary)

  @classmethod
  def delta(cls, *, exact: bool = True) -> Self:
    return cls(Grid.delta(exact=exact))

  @classmethod
  def constant(
    cls, value: Fraction | int, periods: tuple[int, int]
  ) -> Self:
    values = np.full(periods, Fraction(value), dtype=object)
    return cls.from_values(values, boundary=core.PeriodicBoundary(periods))

  @property
  def values(self) -> np.ndarray:
    return self.grid.values

  @property
  def origin(self) -> tuple[int, int]:
    return self.grid.origin

  @property
  def shape(self) -> tuple[int, int]:
    return self.grid.shape

  @property
  def exact(self) -> bool:
    return self.grid.exact

  def value(self, alpha: tuple[int, int]) -> Fraction | float:
    if isinstance(self.boundary, core.PeriodicBoundary):
      p1, p2 = self.boundary.periods
      alpha = (alpha[0] % p1, alpha[1] % p2)
    return self.grid.value(alpha)

  def location(self, alpha: tuple[int, int]) -> tuple[Fraction, Fraction]:
    return lattice.dilation_matrix(self.eps).inverse().apply(*alpha)

  def to_float(self) -> "SampledField":
    return dataclasses.replace(self, grid=self.grid.to_float())

  def with_grid(self, new_grid: Grid) -> "SampledField":
    return dataclasses.replace(self, grid=new_grid)

  def same_values(self, other: "SampledField") -> bool:
    return self.boundary == other.boundary and self.grid.same_as(other.grid)


def apply_mask(
  mask: LaurentPoly,
  w: lattice.Mat2,
  data: Grid,
  boundary: core.Boundary = core.ZeroBoundary(),
) -> Grid:
  """Computes sum_beta mask(. - W beta) data(beta) for any dilation W."""
  return grid.upsample_filter(data, grid.taps_of(mask, data.exact), w, boundary)


def step(a: LaurentPoly, eta: int, c: SampledField) -> SampledField:
  w = lattice.GENERATORS[eta]
  refined = apply_mask(a, w, c.grid, c.boundary)
  return SampledField(refined, c.eps.append(eta), c.boundary.refined(w))


def run(pair: MaskPair, eps: EpsWord, c: SampledField) -> SampledField:
  """Applies S_{eps_1} first and S_{eps_n} last."""
  for eta in eps:
    c = step(pair.mask(eta), eta, c)
  logger.debug("Ran word %s, result shape %s", eps, c.shape)
  return c


def iterated_mask(pair: MaskPair, eps: EpsWord, *, exact: bool = True) -> Grid:
  """The mask a_eps of S_eps = S_{eps_n} ... S_{eps_1}, as a dense grid."""
  return run(pair, eps, SampledField.delta(exact=exact)).grid.trimmed()


def limit_samples(pair: MaskPair, eps: EpsWord, *, exact: bool = True) -> SampledField:
  """Cascade samples of the limit function f_eps on W_eps^-1 Z^2."""
  return SampledField(iterated_mask(pair, eps, exact=exact), eps)


def superpose(coefs: Grid, mask: Grid, w: lattice.Mat2) -> Grid:
  """Computes sum_alpha coefs(alpha) mask(. - W alpha) with a dense mask.

  Loops over the nonzero coefficients, so it suits short coefficient lists
  against large masks.
  """
  exact = coefs.exact and mask.exact
  if not exact:
    coefs, mask = coefs.to_float(), mask.to_float()
  entries = list(coefs.items())
  if not entries or 0 in mask.shape:
    return Grid.zeros((0, 0), exact=exact)
  offsets = [tuple(int(v) for v in w.apply(*alpha)) for alpha, _ in entries]
  if exact:
    k = dyadic.common_log2den(v for _, v in entries)
    weights: list[int | float] = dyadic.to_numerators((v for _, v in entries), k)
  else:
    k = 0
    weights = [float(v) for _, v in entries]
  lo = (min(o[0] for o in offsets), min(o[1] for o in offsets))
  hi = (max(o[0] for o in offsets), max(o[1] for o in offsets))
  origin = (lo[0] + mask.origin[0], lo[1] + mask.origin[1])
  shape = (
    hi[0] - lo[0] + mask.shape[0],
    hi[1] - lo[1] + mask.shape[1],
  )
  out = Grid.zeros(shape, origin, exact=exact).values
  for (o1, o2), weight in zip(offsets, weights, strict=True):
    i, j = o1 - lo[0], o2 - lo[1]
    out[i : i + mask.shape[0], j : j + mask.shape[1]] += weight * mask.values
  return Grid(out, origin, mask.log2den + k).normalized()


def interpolation_consistent(coarse: SampledField, fine: SampledField) -> bool:
  """True iff fine(W alpha) = coarse(alpha) on the coarse window.

  W is the dilation of the steps that lead from coarse.eps to fine.eps.
  """
  n = len(coarse.eps)
  if len(fine.eps) < n or fine.eps.project(n) != coarse.eps:
    raise ValueError(f"Word {fine.eps} does not extend {coarse.eps}")
  w = lattice.dilation_matrix(EpsWord(fine.eps.bits[n:]))
  x, y = w.apply_int(*coarse.grid.indices())
  expected = coarse.grid.fractions()
  for (i, j), value in np.ndenumerate(expected):
    if fine.value((int(x[i, j]), int(y[i, j]))) != value:
      return False
  return True


class Window(NamedTuple):
  origin: tuple[int, int]
  shape: tuple[int, int]


def _interior(mask: LaurentPoly, w: lattice.Mat2, window: Window) -> np.ndarray:
  """Outputs whose every contributing input lies inside the window."""
  ones = np.ones(window.shape, dtype=object)
  covered = apply_mask(
    LaurentPoly(dict.fromkeys(mask.terms, 1)),
    w,
    Grid(ones, window.origin),
  )
  (a, _), (_, d) = w.int_entries()
  offsets = np.array(list(mask.terms), dtype=np.int64)
  tap_cosets = lattice.coset_index(offsets[:, 0], offsets[:, 1], w)
  per_coset = np.bincount(tap_cosets, minlength=a * d)
  full = per_coset[lattice.coset_index(*covered.indices(), w)]
  counts = covered.values.astype(np.int64) if covered.exact else covered.values
  valid = (counts == full) & (full > 0)
  x, y = covered.indices()
  seen = np.unique(lattice.coset_index(x[valid], y[valid], w))
  if len(seen) < a * d:
    raise core.WindowTooSmallError(
      f"Window {window} reaches only cosets {seen.tolist()} of {a * d} for {w}",
    )
  return valid


def _monomials(k: int) -> list[tuple[int, int]]:
  return [(e1, d - e1) for d in range(k + 1) for e1 in range(d, -1, -1)]


def _solve(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
  n = len(matrix)
  rows = [[*row, b] for row, b in zip(matrix, rhs, strict=True)]
  for col in range(n):
    pivot = next((r for r in range(col, n) if rows[r][col] != 0), None)
    if pivot is None:
      raise ValueError("Interpolation points are not unisolvent.")
    rows[col], rows[pivot] = rows[pivot], rows[col]
    for r in range(n):
      if r != col and rows[r][col] != 0:
        factor = rows[r][col] / rows[col][col]
        rows[r] = [x - factor * y for x, y in zip(rows[r], rows[col], strict=True)]
  return [rows[i][n] / rows[i][i] for i in range(n)]


def _reproduces_polynomial(
  out: Grid, valid: np.ndarray, w: lattice.Mat2, k: int
) -> bool:
  """Checks that out agrees with one polynomial of degree <= k on valid.

  The polynomial is fitted on a principal lattice x0 + {(i, j): i + j <= k}
  of the coarse grid and then compared at every valid output in integer
  arithmetic: with W = [[a, b], [0, d]] and D = a d, the location of alpha
  is (X1, X2) / D where X1 = d alpha_1 - b alpha_2 and X2 = a alpha_2.
  """
  (a, b), (_, d) = w.int_entries()
  den = a * d
  steps = [(i, j) for i in range(k + 1) for j in range(k + 1 - i)]
  shifts = [(a * i + b * j, d * j) for i, j in steps]
  base = None
  for i0, j0 in zip(*np.nonzero(valid), strict=True):
    if all(
      0 <= i0 + s1 < valid.shape[0]
      and 0 <= j0 + s2 < valid.shape[1]
      and valid[i0 + s1, j0 + s2]
      for s1, s2 in shifts
    ):
      base = (int(i0), int(j0))
      break
  if base is None:
    raise core.WindowTooSmallError(
      f"No interpolation stencil of degree {k} fits the window interior",
    )
  monomials = _monomials(k)
  x0 = w.inverse().apply(base[0] + out.origin[0], base[1] + out.origin[1])
  matrix = [
    [(x0[0] + i) ** e1 * (x0[1] + j) ** e2 for e1, e2 in monomials]
    for i, j in steps
  ]
  rhs = [
    out.value((base[0] + out.origin[0] + s1, base[1] + out.origin[1] + s2))
    for s1, s2 in shifts
  ]
  coefs = _solve(matrix, rhs)

  scale = math.lcm(*(c.denominator for c in coefs))
  rows, cols = np.nonzero(valid)
  alpha1 = (rows + out.origin[0]).astype(object)
  alpha2 = (cols + out.origin[1]).astype(object)
  x1 = d * alpha1 - b * alpha2
  x2 = a * alpha2
  fitted = np.zeros(rows.shape, dtype=object)
  for c, (e1, e2) in zip(coefs, monomials, strict=True):
    weight = (c * scale).numerator * den ** (k - e1 - e2)
    fitted = fitted + weight * x1**e1 * x2**e2
  # out = nums / 2^K must equal fitted / (scale D^k).
  lhs = out.values[rows, cols] * (scale * den**k)
  return bool(np.array_equal(lhs, fitted * (1 << out.log2den)))


def check_poly_reproduction(
  pair: MaskPair, k: int, window: Window | None = None
) -> bool:
  """True iff both steps map sampled polynomials of degree <= k to polynomials.

  The default window leaves a margin of the mask radius around a region big
  enough for the degree-k fitting stencil.
  """
  if k < 0:
    raise ValueError(f"Degree must be nonnegative, got {k}")
  if window is None:
    side = 2 * pair.radius + 4 * (k + 1)
    window = Window((-side // 2, -side // 2), (side, side))
  x, y = np.indices(window.shape)
  x = (x + window.origin[0]).astype(object)
  y = (y + window.origin[1]).astype(object)
  for eta in (0, 1):
    a = pair.mask(eta)
    w = lattice.GENERATORS[eta]
    valid = _interior(a, w, window)
    for e1, e2 in _monomials(k):
      out = apply_mask(a, w, Grid(x**e1 * y**e2, window.origin))
      if not _reproduces_polynomial(out, valid, w, k):
        logger.debug("Step %d fails on monomial x^%d y^%d", eta, e1, e2)
        return False
  return True


def refinement_identity_holds(pair: MaskPair, eps: EpsWord) -> bool:
  """a_eps = sum_alpha a_{eps_1}(alpha) a_tail(. - W_tail alpha) exactly."""
  if len(eps) == 0:
    raise ValueError("The refinement identity needs a nonempty word.")
  head = Grid.from_poly(pair.mask(eps.bits[0]))
  tail = EpsWord(eps.bits[1:])
  combined = superpose(head, iterated_mask(pair, tail), lattice.dilation_matrix(tail))
  return combined.same_as(iterated_mask(pair, eps))

