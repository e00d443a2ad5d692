"""Exact 2x2 matrix algebra for the shearlet dilations and direction planning.

Words are read left to right as the order in which steps are applied, so the
dilation of a word is ``W_{eps_n} ... W_{eps_1}``.
"""

import dataclasses
import fractions
import functools
import itertools
import logging
import math
import re
from collections.abc import Iterator, Sequence
from typing import Final, Self

import numpy as np

from shearlet_subdivision import core

logger = logging.getLogger(__name__)

Fraction = fractions.Fraction

INFINITY: Final = math.inf
# Extended nonnegative slopes: exact rationals, plus math.inf for vertical.
Slope = Fraction | float

_WORD_RE = re.compile(r"[01]*")


@dataclasses.dataclass(frozen=True)
class EpsWord:
  """A finite 0/1 word selecting one branch of the subdivision tree."""

  bits: tuple[int, ...] = ()

  def __post_init__(self) -> None:
    if any(b not in (0, 1) for b in self.bits):
      raise ValueError(f"Word bits must be 0 or 1, got {self.bits}")

  @classmethod
  def parse(cls, text: str) -> Self:
    text = text.strip()
    if not _WORD_RE.fullmatch(text):
      raise ValueError(f"Not a 0/1 word: {text!r}")
    return cls(tuple(int(ch) for ch in text))

  @classmethod
  def zeros(cls, k: int) -> Self:
    return cls((0,) * k)

  @classmethod
  def ones(cls, k: int) -> Self:
    return cls((1,) * k)

  @classmethod
  def from_binary_value(cls, value: int, n: int) -> Self:
    if not 0 <= value < 2**n:
      raise ValueError(f"{value} does not fit in a word of length {n}")
    return cls(tuple((value >> j) & 1 for j in range(n)))

  @classmethod
  def all_words(cls, n: int) -> Iterator[Self]:
    for bits in itertools.product((0, 1), repeat=n):
      yield cls(bits)

  def __len__(self) -> int:
    return len(self.bits)

  def __iter__(self) -> Iterator[int]:
    return iter(self.bits)

  def __str__(self) -> str:
    return "".join(str(b) for b in self.bits)

  def __add__(self, other: "EpsWord") -> "EpsWord":
    return EpsWord(self.bits + other.bits)

  def append(self, eta: int) -> "EpsWord":
    return EpsWord((*self.bits, eta))

  def reverse(self) -> "EpsWord":
    return EpsWord(self.bits[::-1])

  def project(self, k: int) -> "EpsWord":
    if not 0 <= k <= len(self.bits):
      raise ValueError(f"Cannot project a word of length {len(self)} to {k}")
    return EpsWord(self.bits[:k])

  @property
  def parent(self) -> "EpsWord":
    if not self.bits:
      raise ValueError("The empty word has no parent.")
    return EpsWord(self.bits[:-1])

  @property
  def last(self) -> int:
    if not self.bits:
      raise ValueError("The empty word has no last step.")
    return self.bits[-1]

  @property
  def binary_value(self) -> int:
    return sum(b << j for j, b in enumerate(self.bits))

  @property
  def dyadic_value(self) -> Fraction:
    return sum(
      (Fraction(b, 2 ** (j + 1)) for j, b in enumerate(self.bits)),
      Fraction(0),
    )


def binary_value(eps: EpsWord) -> int:
  return eps.binary_value


def dyadic_value(eps: EpsWord) -> Fraction:
  return eps.dyadic_value


@dataclasses.dataclass(frozen=True)
class Mat2:
  """Exact rational matrix [[a, b], [c, d]]."""

  a: Fraction
  b: Fraction
  c: Fraction
  d: Fraction

  @classmethod
  def of(cls, rows: Sequence[Sequence[int | Fraction]]) -> Self:
    (a, b), (c, d) = rows
    return cls(Fraction(a), Fraction(b), Fraction(c), Fraction(d))

  def rows(self) -> tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]:
    return ((self.a, self.b), (self.c, self.d))

  def __str__(self) -> str:
    return "[[{}, {}], [{}, {}]]".format(*(str(x) for x in self._flat()))

  def _flat(self) -> tuple[Fraction, ...]:
    return (self.a, self.b, self.c, self.d)

  def __matmul__(self, other: "Mat2") -> "Mat2":
    return Mat2(
      self.a * other.a + self.b * other.c,
      self.a * other.b + self.b * other.d,
      self.c * other.a + self.d * other.c,
      self.c * other.b + self.d * other.d,
    )

  def __pow__(self, k: int) -> "Mat2":
    base = self if k >= 0 else self.inverse()
    result = IDENTITY
    k = abs(k)
    while k:
      if k & 1:
        result = result @ base
      base = base @ base
      k >>= 1
    return result

  @property
  def det(self) -> Fraction:
    return self.a * self.d - self.b * self.c

  def inverse(self) -> "Mat2":
    det = self.det
    if det == 0:
      raise ValueError(f"Singular matrix {self}")
    return Mat2(self.d / det, -self.b / det, -self.c / det, self.a / det)

  def apply(
    self, x: int | Fraction, y: int | Fraction
  ) -> tuple[Fraction, Fraction]:
    return (self.a * x + self.b * y, self.c * x + self.d * y)

  @property
  def is_integer(self) -> bool:
    return all(v.denominator == 1 for v in self._flat())

  @property
  def is_unimodular(self) -> bool:
    return self.is_integer and abs(self.det) == 1

  def int_entries(self) -> tuple[tuple[int, int], tuple[int, int]]:
    if not self.is_integer:
      raise ValueError(f"Matrix {self} has non-integer entries")
    return ((int(self.a), int(self.b)), (int(self.c), int(self.d)))

  def apply_int(
    self, x: np.ndarray, y: np.ndarray
  ) -> tuple[np.ndarray, np.ndarray]:
    (a, b), (c, d) = self.int_entries()
    return a * x + b * y, c * x + d * y

  def columns_as_exponents(self) -> tuple[tuple[int, int], tuple[int, int]]:
    """Exponents of z^{W e_1} and z^{W e_2}."""
    (a, b), (c, d) = self.int_entries()
    return (a, c), (b, d)


IDENTITY: Final = Mat2.of([[1, 0], [0, 1]])
W0: Final = Mat2.of([[4, 0], [0, 2]])
W1: Final = Mat2.of([[4, -4], [0, 2]])
U: Final = Mat2.of([[1, -2], [0, 1]])
V: Final = Mat2.of([[1, -1], [0, 1]])
GENERATORS: Final = {0: W0, 1: W1}


def shear_refinement_matrix(k: int) -> Mat2:
  return Mat2.of([[Fraction(1, 4), Fraction(k, 2)], [0, Fraction(1, 2)]])


M0: Final = shear_refinement_matrix(0)
M1: Final = shear_refinement_matrix(1)


@functools.lru_cache(maxsize=4096)
def dilation_matrix(eps: EpsWord) -> Mat2:
  result = IDENTITY
  for eta in eps:
    result = GENERATORS[eta] @ result
  return result


def dilation_closed_form(eps: EpsWord) -> Mat2:
  n = len(eps)
  return Mat2.of([[4**n, -(4**n) * 2 * eps.dyadic_value], [0, 2**n]])


def shear_factors(eps: EpsWord) -> tuple[Mat2, Mat2]:
  """Returns (U_eps, V_eps) with W_eps = U_eps W0^n = W0^n V_eps."""
  n = len(eps)
  shift = 2 * eps.dyadic_value
  return (
    Mat2.of([[1, -(2**n) * shift], [0, 1]]),
    Mat2.of([[1, -shift], [0, 1]]),
  )


def refinement_matrix(eps: EpsWord) -> Mat2:
  result = IDENTITY
  for eta in eps:
    result = shear_refinement_matrix(eta) @ result
  return result


def refinement_closed_form(eps: EpsWord) -> Mat2:
  n = len(eps)
  scale = Fraction(1, 4**n)
  return Mat2.of([[scale, scale * 2 * eps.binary_value], [0, Fraction(1, 2**n)]])


def check_lattice_refinement(k: int, j: int = 0, radius: int = 32) -> bool:
  """Checks that M_k maps 4^-j Z x 2^-j Z onto 4^-(j+1) Z x 2^-(j+1) Z.

  Both directions are checked on the window [-radius, radius]^2 of lattice
  indices: images of coarse points are fine points, and fine points have
  coarse preimages.
  """
  m = shear_refinement_matrix(k)
  m_inv = m.inverse()
  coarse = (Fraction(1, 4) ** j, Fraction(1, 2) ** j)
  fine = (coarse[0] / 4, coarse[1] / 2)
  window = range(-radius, radius + 1)
  for n1, n2 in itertools.product(window, window):
    x, y = m.apply(n1 * coarse[0], n2 * coarse[1])
    if (x / fine[0]).denominator != 1 or (y / fine[1]).denominator != 1:
      return False
    x, y = m_inv.apply(n1 * fine[0], n2 * fine[1])
    if (x / coarse[0]).denominator != 1 or (y / coarse[1]).denominator != 1:
      return False
  return True


def _as_slope(s: Slope | int) -> Slope:
  if isinstance(s, float) and math.isinf(s):
    if s < 0:
      raise ValueError("Slopes must be nonnegative.")
    return INFINITY
  s = Fraction(s)
  if s < 0:
    raise ValueError(f"Slopes must be nonnegative, got {s}")
  return s


def slope_after(s: Slope | int, eps: EpsWord) -> Slope:
  """Slope of the line with slope s after applying M_eps."""
  s = _as_slope(s)
  n = len(eps)
  k = eps.binary_value
  if s == 0:
    return Fraction(0)
  if s == INFINITY:
    if k == 0:
      return INFINITY
    return Fraction(2**n, 2 * k)
  return Fraction(2**n) / (1 / s + 2 * k)


def format_slope(s: Slope) -> str:
  return "inf" if s == INFINITY else str(s)


def parse_slope(text: str) -> Slope:
  text = text.strip().lower()
  if text in ("inf", "infinity", "oo"):
    return INFINITY
  try:
    return _as_slope(Fraction(text))
  except (ValueError, ZeroDivisionError) as e:
    raise ValueError(f"Not a slope: {text!r}") from e


def _max_word_length(target: Slope, delta: Fraction) -> int:
  n_max = math.ceil(math.log2(8 / delta)) + 4
  if target != INFINITY and target > 1:
    n_max += 2 * math.ceil(math.log2(target))
  return n_max


def _candidates(source: Slope, target: Slope, n: int) -> list[int]:
  if target == INFINITY:
    return [0]
  ideal = Fraction(2 ** (n - 1)) / target
  if source != INFINITY:
    ideal -= Fraction(1, 2) / source
  lo = math.floor(ideal)
  return sorted({min(max(k, 0), 2**n - 1) for k in (lo, lo + 1)})


def _within(slope: Slope, target: Slope, delta: Fraction) -> bool:
  if target == INFINITY:
    return slope == INFINITY or slope > 1 / delta
  return slope != INFINITY and abs(slope - target) < delta


def plan_direction(
  source: Slope | int, target: Slope | int, delta: Fraction | float | str
) -> EpsWord:
  """Finds a word that turns slope ``source`` into ``target`` up to delta."""
  source = _as_slope(source)
  target = _as_slope(target)
  delta = Fraction(delta)
  if delta <= 0:
    raise ValueError(f"delta must be positive, got {delta}")
  if source == 0:
    raise ValueError("Horizontal lines keep slope zero under every word.")
  if target < Fraction(1, 2):
    raise core.UnreachableDirectionError(
      f"Target slope {format_slope(target)} is below 1/2",
    )
  n_max = _max_word_length(target, delta)
  for n in range(1, n_max + 1):
    for k in _candidates(source, target, n):
      eps = EpsWord.from_binary_value(k, n)
      if _within(slope_after(source, eps), target, delta):
        logger.debug("Planned %s -> %s with word %s", source, target, eps)
        return eps
  raise core.UnreachableDirectionError(
    f"No word of length <= {n_max} reaches slope {format_slope(target)} "
    f"within {delta}",
  )


def coset_representatives(eps: EpsWord) -> list[tuple[int, int]]:
  """Canonical representatives of Z^2 / W_{r(eps)} Z^2.

  Every W_eps is upper triangular with diagonal (4^n, 2^n), so the box
  [0, 4^n) x [0, 2^n) is a complete residue system for all words of length n.
  """
  n = len(eps)
  return [(x, y) for x in range(4**n) for y in range(2**n)]


def coset_index(x: np.ndarray, y: np.ndarray, w: Mat2) -> np.ndarray:
  """Index of the canonical residue of (x, y) modulo W Z^2.

  W must be integer upper triangular with positive diagonal (a, d); the
  residue (r1, r2) in [0, a) x [0, d) is numbered r1 * d + r2.
  """
  (a, b), (c, d) = w.int_entries()
  if c != 0 or a <= 0 or d <= 0:
    raise ValueError(f"Expected an upper triangular dilation, got {w}")
  x = np.asarray(x, dtype=np.int64)
  y = np.asarray(y, dtype=np.int64)
  yq = np.floor_divide(y, d)
  r2 = y - d * yq
  r1 = np.mod(x - b * yq, a)
  return r1 * d + r2


def is_congruent(p: tuple[int, int], q: tuple[int, int], w: Mat2) -> bool:
  x, y = w.inverse().apply(p[0] - q[0], p[1] - q[1])
  return x.denominator == 1 and y.denominator == 1
