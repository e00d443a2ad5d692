import dataclasses
import math
import pathlib
from collections.abc import Iterator, Mapping
from typing import Self

from shearlet_subdivision import core, dyadic, lattice, symbol
from shearlet_subdivision.symbol import LaurentPoly

Fraction = dyadic.Fraction


@dataclasses.dataclass(frozen=True)
class Mask1D:
  """Finitely supported univariate mask, stored as sorted (m, b(m)) pairs."""

  coefficients: tuple[tuple[int, Fraction], ...]
  name: str = ""

  @classmethod
  def from_mapping(cls, values: Mapping[int, Fraction | int], name: str = "") -> Self:
    coefficients = tuple(
      (int(m), Fraction(v)) for m, v in sorted(values.items()) if Fraction(v)
    )
    return cls(coefficients, name)

  def __getitem__(self, m: int) -> Fraction:
    return dict(self.coefficients).get(m, Fraction(0))

  def items(self) -> Iterator[tuple[int, Fraction]]:
    return iter(self.coefficients)

  def __len__(self) -> int:
    return len(self.coefficients)

  def support(self) -> tuple[int, int]:
    if not self.coefficients:
      return (0, 0)
    return self.coefficients[0][0], self.coefficients[-1][0]

  def total(self) -> Fraction:
    return sum((v for _, v in self.coefficients), Fraction(0))

  @property
  def is_interpolatory(self) -> bool:
    """b(2m) = delta_{m,0}."""
    return self[0] == 1 and all(
      v == 0 for m, v in self.coefficients if m % 2 == 0 and m
    )


def dd_mask() -> Mask1D:
  """The four-point Deslauriers-Dubuc mask."""
  return Mask1D.from_mapping(
    {
      -3: Fraction(-1, 16),
      -1: Fraction(9, 16),
      0: 1,
      1: Fraction(9, 16),
      3: Fraction(-1, 16),
    },
    name="dd",
  )


def bspline_mask(m: int) -> Mask1D:
  if m < 1:
    raise ValueError(f"B-spline order must be at least 1, got {m}")
  return Mask1D.from_mapping(
    {k: Fraction(math.comb(m, k), 2 ** (m - 1)) for k in range(m + 1)},
    name=f"bspline:{m}",
  )


def double_step(b: Mask1D) -> Mask1D:
  """b~(m) = sum_k b(k) b(m - 2k): one more dyadic refinement of b by itself."""
  acc: dict[int, Fraction] = {}
  for k, bk in b.items():
    for j, bj in b.items():
      acc[j + 2 * k] = acc.get(j + 2 * k, Fraction(0)) + bk * bj
  return Mask1D.from_mapping(acc, name=f"double({b.name})" if b.name else "")


def tensor(bx: Mask1D, by: Mask1D) -> LaurentPoly:
  return LaurentPoly(
    {(m1, m2): v1 * v2 for m1, v1 in bx.items() for m2, v2 in by.items()},
  )


def shear_reindex(a: LaurentPoly, k: int = 1) -> LaurentPoly:
  """Returns alpha -> a(U^k alpha)."""
  return a.reindex(lattice.U**k)


def scaled(a: LaurentPoly, factor: Fraction | int) -> LaurentPoly:
  return a * Fraction(factor)


def check_interpolatory(a: LaurentPoly) -> bool:
  """True iff a(0) = 1 and a vanishes on W0 Z^2 minus the origin."""
  if a[(0, 0)] != 1:
    return False
  return all(
    v == 0 or (i, j) == (0, 0)
    for (i, j), v in a.terms.items()
    if i % 4 == 0 and j % 2 == 0
  )


@dataclasses.dataclass(frozen=True)
class MaskPair:
  a0: LaurentPoly
  a1: LaurentPoly
  name: str = ""
  interpolatory_inputs: bool = False

  def mask(self, eta: int) -> LaurentPoly:
    if eta == 0:
      return self.a0
    if eta == 1:
      return self.a1
    raise ValueError(f"Step must be 0 or 1, got {eta}")

  @property
  def box(self) -> tuple[tuple[int, int], tuple[int, int]]:
    (a_lo, a_hi), (b_lo, b_hi) = self.a0.box(), self.a1.box()
    return (
      (min(a_lo[0], b_lo[0]), min(a_lo[1], b_lo[1])),
      (max(a_hi[0], b_hi[0]), max(a_hi[1], b_hi[1])),
    )

  @property
  def radius(self) -> int:
    (lo1, lo2), (hi1, hi2) = self.box
    return max(abs(lo1), abs(lo2), abs(hi1), abs(hi2))

  @property
  def is_interpolatory(self) -> bool:
    return check_interpolatory(self.a0) and check_interpolatory(self.a1)

  def scaled(self, factor: Fraction | int) -> "MaskPair":
    return MaskPair(
      scaled(self.a0, factor),
      scaled(self.a1, factor),
      name=f"{self.name}*{factor}",
    )

  def save(self, directory: str | pathlib.Path) -> tuple[pathlib.Path, pathlib.Path]:
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = (directory / "a0.json", directory / "a1.json")
    for eta, path in enumerate(paths):
      name = f"{self.name}/a{eta}" if self.name else f"a{eta}"
      path.write_text(symbol.mask_to_json(self.mask(eta), name))
    return paths

  @classmethod
  def load(cls, a0_path: str | pathlib.Path, a1_path: str | pathlib.Path) -> Self:
    name0, a0 = symbol.mask_from_json(pathlib.Path(a0_path).read_text())
    _, a1 = symbol.mask_from_json(pathlib.Path(a1_path).read_text())
    return cls(a0, a1, name=name0.rsplit("/", 1)[0])


def make_pair(b1: Mask1D, b2: Mask1D) -> MaskPair:
  a0 = tensor(double_step(b1), b2)
  name = b1.name if b1.name == b2.name else f"{b1.name},{b2.name}"
  return MaskPair(
    a0,
    shear_reindex(a0, 1),
    name=name,
    interpolatory_inputs=b1.is_interpolatory and b2.is_interpolatory,
  )


def mask1d_from_name(name: str) -> Mask1D:
  name = name.strip()
  if name == "dd":
    return dd_mask()
  kind, _, order = name.partition(":")
  if kind == "bspline":
    try:
      return bspline_mask(int(order))
    except ValueError as e:
      raise core.MaskFormatError(f"Bad B-spline order in {name!r}") from e
  raise core.MaskFormatError(f"Unknown mask name: {name!r}")


def pair_from_name(name: str) -> MaskPair:
  """Builds a pair from "dd", "bspline:2" or "dd,bspline:3" (x then y mask)."""
  parts = [p for p in name.split(",") if p.strip()]
  if len(parts) == 1:
    parts *= 2
  if len(parts) != 2:
    raise core.MaskFormatError(f"Expected one or two mask names, got {name!r}")
  return make_pair(mask1d_from_name(parts[0]), mask1d_from_name(parts[1]))
