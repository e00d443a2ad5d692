"""Convergence certificates from difference schemes.

A pair (a0, a1) whose symbols lie in the quotient ideal has matrix masks
(B0, B1) with grad S_a = S_B grad. The scheme converges iff the joint
spectral radius of (B0, B1) restricted to difference sequences is below one.
Upper bounds come from the l-infinity operator norm of S_B over all words of
a given length; lower estimates come from probing S_B with differences.
"""

import dataclasses
import enum
import json
import logging
from collections.abc import Sequence
from typing import Any, Final, Self

import numpy as np

from shearlet_subdivision import core, dyadic, grid, lattice, symbol
from shearlet_subdivision.grid import Grid
from shearlet_subdivision.lattice import EpsWord
from shearlet_subdivision.masks import MaskPair
from shearlet_subdivision.symbol import LaurentPoly, MatrixMask

logger = logging.getLogger(__name__)

Fraction = dyadic.Fraction
Number = Fraction | float

MAX_DEPTH: Final = 8
SAMPLE_SIZE: Final = 4
SAMPLE_RANGE: Final = 8


class Verdict(enum.StrEnum):
  CONVERGES = "converges"
  NOT_CONTRACTIVE = "not_contractive"
  INCONCLUSIVE = "inconclusive"
  REJECTED = "rejected"


@dataclasses.dataclass(frozen=True, eq=False)
class MatrixGrid:
  """Dense matrix-valued sequence; entries[i][j] is one scalar grid."""

  entries: tuple[tuple[Grid, ...], ...]

  @classmethod
  def from_mask(cls, b: MatrixMask, *, exact: bool = True) -> Self:
    return cls(
      tuple(tuple(Grid.from_poly(e, exact=exact) for e in row) for row in b.entries),
    )

  @classmethod
  def column(cls, grids: Sequence[Grid]) -> Self:
    return cls(tuple((g,) for g in grids))

  @property
  def shape(self) -> tuple[int, int]:
    return len(self.entries), len(self.entries[0])

  @property
  def exact(self) -> bool:
    return all(g.exact for row in self.entries for g in row)

  def __getitem__(self, index: tuple[int, int]) -> Grid:
    i, j = index
    return self.entries[i][j]

  def to_mask(self) -> MatrixMask:
    return MatrixMask(tuple(tuple(g.to_poly() for g in row) for row in self.entries))

  def max_abs(self) -> Number:
    return max(g.max_abs() for row in self.entries for g in row)

  def same_as(self, other: "MatrixGrid") -> bool:
    return self.shape == other.shape and all(
      a.same_as(b)
      for ra, rb in zip(self.entries, other.entries, strict=True)
      for a, b in zip(ra, rb, strict=True)
    )


def _as_matrix_grid(b: "MatrixMask | MatrixGrid", *, exact: bool = True) -> MatrixGrid:
  return b if isinstance(b, MatrixGrid) else MatrixGrid.from_mask(b, exact=exact)


@dataclasses.dataclass(frozen=True)
class _PreparedStep:
  taps: tuple[tuple[grid.Taps, ...], ...]
  w: lattice.Mat2

  @classmethod
  def of(cls, b: MatrixMask, eta: int, *, exact: bool) -> Self:
    return cls(
      tuple(tuple(grid.taps_of(e, exact) for e in row) for row in b.entries),
      lattice.GENERATORS[eta],
    )

  def __call__(self, d: MatrixGrid) -> MatrixGrid:
    """out[i][j] = sum_t S_{B[i][t]} d[t][j], i.e. S_B applied per column."""
    if len(self.taps[0]) != d.shape[0]:
      raise core.ShapeMismatchError(
        f"Cannot apply a {len(self.taps)}x{len(self.taps[0])} matrix mask to "
        f"{d.shape[0]}-vectors",
      )
    boundary = core.ZeroBoundary()
    rows = []
    for taps_row in self.taps:
      row = []
      for j in range(d.shape[1]):
        acc = Grid.zeros((0, 0), exact=d.exact)
        for t, taps in enumerate(taps_row):
          if taps.offsets:
            acc = acc + grid.upsample_filter(d[t, j], taps, self.w, boundary)
        row.append(acc)
      rows.append(tuple(row))
    return MatrixGrid(tuple(rows))


def matrix_step(b: MatrixMask, eta: int, d: MatrixMask) -> MatrixMask:
  """(S_B d)(alpha) = sum_beta B(alpha - W beta) d(beta), symbolically B*(z) d*(z^W)."""
  return b @ d.substitute(lattice.GENERATORS[eta])


def apply_matrix_word(
  b0: MatrixMask, b1: MatrixMask, eps: EpsWord, d: MatrixGrid
) -> MatrixGrid:
  """S^B_eps d with S^B_{eps_1} applied first."""
  steps = {
    0: _PreparedStep.of(b0, 0, exact=d.exact),
    1: _PreparedStep.of(b1, 1, exact=d.exact),
  }
  for eta in eps:
    d = steps[eta](d)
  return d


def iterated_matrix_mask(
  b0: MatrixMask, b1: MatrixMask, eps: EpsWord, *, exact: bool = True
) -> MatrixGrid:
  """B_eps(alpha) = sum_beta B_{eps_n}(alpha - W_{eps_n} beta) B_{eps'}(beta)."""
  identity = MatrixGrid.from_mask(MatrixMask.identity(), exact=exact)
  return apply_matrix_word(b0, b1, eps, identity)


def _accumulate_cosets(
  g: Grid, w: lattice.Mat2, count: int, log2den: int
) -> np.ndarray:
  cosets = lattice.coset_index(*g.indices(), w).ravel()
  weights = np.abs(g.values).ravel()
  if not g.exact:
    return np.bincount(cosets, weights=weights, minlength=count)
  acc = dyadic.int_array((count,))
  np.add.at(acc, cosets, weights * (1 << (log2den - g.log2den)))
  return acc


def operator_norm_bound(b: "MatrixMask | MatrixGrid", eps: EpsWord) -> Number:
  """Max over cosets and rows of sum_j sum_alpha |B_ij(gamma + W_eps alpha)|."""
  b = _as_matrix_grid(b)
  w = lattice.dilation_matrix(eps)
  (a, _), (_, d) = w.int_entries()
  cosets = a * d
  cells = [g for row in b.entries for g in row if g.values.size]
  log2den = max((g.log2den for g in cells), default=0)
  best: Any = 0
  for row in b.entries:
    total: Any = 0
    for g in row:
      if g.values.size:
        total = total + _accumulate_cosets(g, w, cosets, log2den)
    if isinstance(total, np.ndarray):
      best = max(best, total.max())
  if b.exact:
    return Fraction(int(best), 1 << log2den)
  return float(best)


@dataclasses.dataclass(frozen=True)
class DepthBound:
  depth: int
  norm_bound: Number
  sample_ratio: Number
  upper: float
  lower: float
  worst_word: EpsWord

  def to_dict(self) -> dict[str, Any]:
    return {
      "depth": self.depth,
      "norm_bound": format_number(self.norm_bound),
      "sample_ratio": format_number(self.sample_ratio),
      "upper": repr(self.upper),
      "lower": repr(self.lower),
      "worst_word": str(self.worst_word),
    }


@dataclasses.dataclass(frozen=True)
class RadiusEstimate:
  depth: int
  upper: float
  lower: float
  verdict: Verdict
  per_depth: tuple[DepthBound, ...]

  def to_dict(self) -> dict[str, Any]:
    return {
      "depth": self.depth,
      "upper": repr(self.upper),
      "lower": repr(self.lower),
      "verdict": str(self.verdict),
      "per_depth": [d.to_dict() for d in self.per_depth],
    }


def format_number(x: Number) -> str:
  if isinstance(x, Fraction):
    return dyadic.format_dyadic(x) if dyadic.is_dyadic(x) else str(x)
  return repr(float(x))


def _root(x: Number, n: int) -> float:
  value = float(x)
  return 0.0 if value == 0 else value ** (1 / n)


def sample_sequences(count: int = 5, seed: int = 0) -> list[LaurentPoly]:
  """Scalar sequences c whose differences feed S_B: delta and random c."""
  rng = np.random.default_rng(seed)
  samples = [symbol.ONE]
  for _ in range(count):
    values = rng.integers(
      -SAMPLE_RANGE, SAMPLE_RANGE + 1, size=(SAMPLE_SIZE, SAMPLE_SIZE)
    )
    samples.append(
      LaurentPoly(
        {(i, j): int(v) for (i, j), v in np.ndenumerate(values)},
      ),
    )
  return samples


def _verdict(norms: list[Number], lowers: list[float]) -> Verdict:
  if any(norm < 1 for norm in norms):
    return Verdict.CONVERGES
  tail = lowers[-3:]
  if tail[-1] > 1 and all(x <= y for x, y in zip(tail, tail[1:], strict=False)):
    return Verdict.NOT_CONTRACTIVE
  return Verdict.INCONCLUSIVE


def jsr_estimate(  # noqa: PLR0913
  b0: MatrixMask,
  b1: MatrixMask,
  max_depth: int,
  *,
  exact: bool = True,
  samples: int = 5,
  seed: int = 0,
  stop_when_certified: bool = False,
) -> RadiusEstimate:
  """Brackets the restricted joint spectral radius of (B0, B1).

  Depth n walks every word of length n depth first, carrying the iterated
  matrix mask and the images of the sample differences along the current
  path, so memory stays at one path. With ``stop_when_certified`` the
  search ends at the first depth whose norm bound is below one.
  """
  if not 1 <= max_depth <= MAX_DEPTH:
    raise ValueError(f"max_depth must lie in [1, {MAX_DEPTH}], got {max_depth}")
  steps = {
    0: _PreparedStep.of(b0, 0, exact=exact),
    1: _PreparedStep.of(b1, 1, exact=exact),
  }
  sample_data = []
  for c in sample_sequences(samples, seed):
    d = MatrixGrid.from_mask(symbol.difference(c), exact=exact)
    norm = d.max_abs()
    if norm:
      sample_data.append((d, norm))
  identity = MatrixGrid.from_mask(MatrixMask.identity(), exact=exact)
  zero: Number = Fraction(0) if exact else 0.0

  def bound_at(n: int) -> DepthBound:
    norm: Number = zero
    ratio: Number = zero
    worst = EpsWord()

    def visit(word: EpsWord, mask: MatrixGrid, images: list[MatrixGrid]) -> None:
      nonlocal norm, ratio, worst
      if len(word) < n:
        for eta in (0, 1):
          visit(word.append(eta), steps[eta](mask), [steps[eta](x) for x in images])
        return
      bound = operator_norm_bound(mask, word)
      if not worst.bits or bound > norm:
        norm, worst = bound, word
      for image, (_, size) in zip(images, sample_data, strict=True):
        ratio = max(ratio, image.max_abs() / size)

    visit(EpsWord(), identity, [d for d, _ in sample_data])
    return DepthBound(n, norm, ratio, _root(norm, n), _root(ratio, n), worst)

  per_depth: list[DepthBound] = []
  for n in range(1, max_depth + 1):
    per_depth.append(bound_at(n))
    logger.debug(
      "Depth %d: upper %.6g lower %.6g", n, per_depth[-1].upper, per_depth[-1].lower
    )
    if stop_when_certified and per_depth[-1].norm_bound < 1:
      break

  best = min(per_depth, key=lambda d: d.upper)
  # Per-depth lower values are sample growth rates, not bounds on the radius;
  # the summary keeps them below the certified upper value.
  lower = min(max(d.lower for d in per_depth), best.upper)
  verdict = _verdict(
    [d.norm_bound for d in per_depth], [d.lower for d in per_depth]
  )
  return RadiusEstimate(best.depth, best.upper, lower, verdict, tuple(per_depth))


@dataclasses.dataclass(frozen=True)
class ConvergenceReport:
  name: str
  verdict: Verdict
  estimate: RadiusEstimate | None
  diagnostics: tuple[tuple[str, Any], ...] = ()

  def to_dict(self) -> dict[str, Any]:
    out: dict[str, Any] = {"name": self.name, "verdict": str(self.verdict)}
    if self.estimate is not None:
      out |= self.estimate.to_dict()
    out["diagnostics"] = dict(self.diagnostics)
    return out

  def to_json(self) -> str:
    return json.dumps(self.to_dict(), indent=2)


def representation_pair(pair: MaskPair) -> tuple[MatrixMask, MatrixMask]:
  return (
    symbol.representation_mask(pair.a0, 0),
    symbol.representation_mask(pair.a1, 1),
  )


def zero_matrix_pair() -> tuple[MatrixMask, MatrixMask]:
  return MatrixMask.zeros(), MatrixMask.zeros()


def convergence_verdict(
  pair: MaskPair, max_depth: int, *, exact: bool = True
) -> ConvergenceReport:
  """Sum-rule gate, then the radius search up to the first certified depth."""
  sums = {f"a{eta}": symbol.coset_sums(pair.mask(eta), eta) for eta in (0, 1)}
  failing = {name: s for name, s in sums.items() if any(v != 1 for v in s)}
  if failing:
    logger.debug("Sum rule fails for %s", sorted(failing))
    return ConvergenceReport(
      pair.name,
      Verdict.REJECTED,
      None,
      tuple(
        (f"coset_sums_{name}", [format_number(v) for v in s])
        for name, s in failing.items()
      ),
    )
  b0, b1 = representation_pair(pair)
  estimate = jsr_estimate(b0, b1, max_depth, exact=exact, stop_when_certified=True)
  diagnostics: tuple[tuple[str, Any], ...] = (("sum_rule", "ok"),)
  if estimate.verdict == Verdict.NOT_CONTRACTIVE:
    diagnostics += (
      ("note", "sample growth only; divergence of the radius is not proven"),
    )
  return ConvergenceReport(pair.name, estimate.verdict, estimate, diagnostics)
