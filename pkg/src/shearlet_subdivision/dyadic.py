"""Exact dyadic rationals n / 2^k and their Gaussian extension.

Dyadic values are plain ``fractions.Fraction`` instances whose denominator is
a power of two. Dense arrays store integer numerators over one shared power
of two (see ``grid.Grid``); the helpers here convert between the two views.
"""

import dataclasses
import fractions
import re
from collections.abc import Iterable
from typing import Final, Self

import numpy as np

from shearlet_subdivision import core

Fraction = fractions.Fraction
Dyadic = Fraction

_DYADIC_RE: Final = re.compile(r"\s*([+-]?\d+)\s*(?:/\s*2\^(\d+))?\s*")


def is_dyadic(x: Fraction | int) -> bool:
  den = Fraction(x).denominator
  return den & (den - 1) == 0


def log2_denominator(x: Fraction | int) -> int:
  den = Fraction(x).denominator
  if den & (den - 1):
    raise core.MaskFormatError(f"{x} is not a dyadic rational")
  return den.bit_length() - 1


def dyadic(num: int, log2den: int = 0) -> Fraction:
  if log2den < 0:
    raise ValueError(f"log2den must be nonnegative, got {log2den}")
  return Fraction(num, 1 << log2den)


def format_dyadic(x: Fraction | int) -> str:
  x = Fraction(x)
  k = log2_denominator(x)
  if k == 0:
    return str(x.numerator)
  return f"{x.numerator}/2^{k}"


def parse_dyadic(text: str) -> Fraction:
  """Parses "n", "n/2^k" or any exact decimal/fraction with dyadic value."""
  match = _DYADIC_RE.fullmatch(text)
  if match:
    return dyadic(int(match.group(1)), int(match.group(2) or 0))
  try:
    value = Fraction(text.strip())
  except (ValueError, ZeroDivisionError) as e:
    raise core.FieldFormatError(f"Not a dyadic number: {text!r}") from e
  if not is_dyadic(value):
    raise core.FieldFormatError(f"{text!r} is not a dyadic rational")
  return value


def common_log2den(values: Iterable[Fraction | int]) -> int:
  return max((log2_denominator(v) for v in values), default=0)


def to_numerators(values: Iterable[Fraction | int], log2den: int) -> list[int]:
  scale = 1 << log2den
  nums = []
  for v in values:
    scaled = Fraction(v) * scale
    if scaled.denominator != 1:
      raise ValueError(f"{v} does not fit the denominator 2^{log2den}")
    nums.append(scaled.numerator)
  return nums


def strip_twos(nums: np.ndarray, log2den: int) -> tuple[np.ndarray, int]:
  """Cancels common factors of two between integer numerators and 2^log2den."""
  if log2den == 0 or nums.size == 0:
    return nums, log2den
  acc = int(np.bitwise_or.reduce(nums, axis=None))
  if acc == 0:
    return nums, 0
  shift = min((acc & -acc).bit_length() - 1, log2den)
  if shift == 0:
    return nums, log2den
  return nums >> shift, log2den - shift


def rescale(nums: np.ndarray, log2den: int, target: int) -> np.ndarray:
  if target < log2den:
    raise ValueError(f"Cannot lower the denominator from 2^{log2den} to 2^{target}")
  if target == log2den:
    return nums
  return nums * (1 << (target - log2den))


def int_array(shape: tuple[int, ...]) -> np.ndarray:
  """Zero array of Python ints (object dtype) for exact accumulation."""
  out = np.empty(shape, dtype=object)
  out.fill(0)
  return out


def as_int_array(values: np.ndarray) -> np.ndarray:
  flat = [int(v) for v in np.ravel(values)]
  out = int_array((len(flat),))
  out[:] = flat
  return out.reshape(np.shape(values))


@dataclasses.dataclass(frozen=True)
class GaussianDyadic:
  """re + i*im with exact dyadic parts."""

  re: Fraction = Fraction(0)
  im: Fraction = Fraction(0)

  @classmethod
  def of(cls, re: Fraction | int, im: Fraction | int = 0) -> Self:
    return cls(Fraction(re), Fraction(im))

  def __add__(self, other: "GaussianDyadic") -> "GaussianDyadic":
    return GaussianDyadic(self.re + other.re, self.im + other.im)

  def __sub__(self, other: "GaussianDyadic") -> "GaussianDyadic":
    return GaussianDyadic(self.re - other.re, self.im - other.im)

  def __neg__(self) -> "GaussianDyadic":
    return GaussianDyadic(-self.re, -self.im)

  def __mul__(self, other: "GaussianDyadic | Fraction | int") -> "GaussianDyadic":
    if not isinstance(other, GaussianDyadic):
      return GaussianDyadic(self.re * other, self.im * other)
    return GaussianDyadic(
      self.re * other.re - self.im * other.im,
      self.re * other.im + self.im * other.re,
    )

  __rmul__ = __mul__

  def times_i(self, power: int = 1) -> "GaussianDyadic":
    result = self
    for _ in range(power % 4):
      result = GaussianDyadic(-result.im, result.re)
    return result

  def is_zero(self) -> bool:
    return self.re == 0 and self.im == 0

  def __str__(self) -> str:
    if self.im == 0:
      return str(self.re)
    return f"{self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i"
