"""Laurent polynomials over dyadic rationals and the quotient-ideal algebra.

The quotient ideal I = <z^W - 1> : <z - 1> is the same for both shearlet
dilations and has the H-basis

  g1 = z1^4 - 1,  g2 = (z1^3 + z1^2 + z1 + 1)(z2 + 1),  g3 = z2^2 - 1.

A symbol lies in I iff its sums over the eight cosets of 4Z x 2Z agree; the
sum rule of order zero asks in addition that they all equal one.
"""

import dataclasses
import json
import logging
from collections.abc import Iterable, Iterator, Mapping
from typing import Any, Final, NamedTuple, Self

import numpy as np
from sympy.polys.domains import QQ
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyElement, ring

from shearlet_subdivision import core, dyadic, lattice

logger = logging.getLogger(__name__)

Fraction = dyadic.Fraction
Exponent = tuple[int, int]


class LaurentPoly:
  """Finitely supported map Z^2 -> dyadic rationals, read as a symbol.

  Instances are immutable and hashable; zero coefficients are never stored.
  """

  __slots__ = ("_hash", "_terms")

  def __init__(self, terms: Mapping[Exponent, Fraction | int] | None = None) -> None:
    cleaned: dict[Exponent, Fraction] = {}
    for (i, j), value in (terms or {}).items():
      value = Fraction(value)
      if value:
        cleaned[(int(i), int(j))] = value
    self._terms = cleaned
    self._hash: int | None = None

  @classmethod
  def from_terms(cls, items: Iterable[tuple[Exponent, Fraction | int]]) -> Self:
    acc: dict[Exponent, Fraction] = {}
    for alpha, value in items:
      acc[alpha] = acc.get(alpha, Fraction(0)) + Fraction(value)
    return cls(acc)

  @classmethod
  def monomial(cls, i: int, j: int, coef: Fraction | int = 1) -> Self:
    return cls({(i, j): coef})

  @classmethod
  def constant(cls, coef: Fraction | int) -> Self:
    return cls({(0, 0): coef})

  @property
  def terms(self) -> Mapping[Exponent, Fraction]:
    return self._terms

  def items(self) -> Iterator[tuple[Exponent, Fraction]]:
    return iter(sorted(self._terms.items()))

  def __getitem__(self, alpha: Exponent) -> Fraction:
    return self._terms.get(alpha, Fraction(0))

  def __len__(self) -> int:
    return len(self._terms)

  def __bool__(self) -> bool:
    return bool(self._terms)

  def __eq__(self, other: object) -> bool:
    if isinstance(other, LaurentPoly):
      return self._terms == other._terms
    if isinstance(other, int | Fraction):
      return self == LaurentPoly.constant(other)
    return NotImplemented

  def __hash__(self) -> int:
    if self._hash is None:
      self._hash = hash(frozenset(self._terms.items()))
    return self._hash

  def __add__(self, other: "LaurentPoly | Fraction | int") -> "LaurentPoly":
    other = _as_poly(other)
    acc = dict(self._terms)
    for alpha, value in other._terms.items():
      acc[alpha] = acc.get(alpha, Fraction(0)) + value
    return LaurentPoly(acc)

  __radd__ = __add__

  def __neg__(self) -> "LaurentPoly":
    return LaurentPoly({alpha: -v for alpha, v in self._terms.items()})

  def __sub__(self, other: "LaurentPoly | Fraction | int") -> "LaurentPoly":
    return self + (-_as_poly(other))

  def __rsub__(self, other: "LaurentPoly | Fraction | int") -> "LaurentPoly":
    return _as_poly(other) - self

  def __mul__(self, other: "LaurentPoly | Fraction | int") -> "LaurentPoly":
    if not isinstance(other, LaurentPoly):
      return LaurentPoly({alpha: v * other for alpha, v in self._terms.items()})
    acc: dict[Exponent, Fraction] = {}
    for (i1, j1), v1 in self._terms.items():
      for (i2, j2), v2 in other._terms.items():
        key = (i1 + i2, j1 + j2)
        acc[key] = acc.get(key, Fraction(0)) + v1 * v2
    return LaurentPoly(acc)

  __rmul__ = __mul__

  def shift(self, i: int, j: int) -> "LaurentPoly":
    """Multiplies by the monomial z1^i z2^j."""
    return LaurentPoly({(a + i, b + j): v for (a, b), v in self._terms.items()})

  def substitute(self, w: lattice.Mat2) -> "LaurentPoly":
    """Returns f(z^W), the upsampled sequence supported on W Z^2."""
    (a, b), (c, d) = w.int_entries()
    return LaurentPoly(
      {(a * i + b * j, c * i + d * j): v for (i, j), v in self._terms.items()},
    )

  def reindex(self, m: lattice.Mat2) -> "LaurentPoly":
    """Returns g with g(alpha) = f(M alpha) for unimodular M."""
    if not m.is_unimodular:
      raise ValueError(f"Reindexing needs a unimodular matrix, got {m}")
    (a, b), (c, d) = m.inverse().int_entries()
    return LaurentPoly(
      {(a * i + b * j, c * i + d * j): v for (i, j), v in self._terms.items()},
    )

  def box(self) -> tuple[Exponent, Exponent]:
    """Inclusive (low, high) corners of the support."""
    if not self._terms:
      return (0, 0), (0, 0)
    xs = [i for i, _ in self._terms]
    ys = [j for _, j in self._terms]
    return (min(xs), min(ys)), (max(xs), max(ys))

  def coefficient_sum(self) -> Fraction:
    return sum(self._terms.values(), Fraction(0))

  def max_log2den(self) -> int:
    return dyadic.common_log2den(self._terms.values())

  def __repr__(self) -> str:
    return f"LaurentPoly({self})"

  def __str__(self) -> str:
    if not self._terms:
      return "0"
    parts = []
    for (i, j), v in self.items():
      factors = [f"z1^{i}" if i != 1 else "z1"] if i else []
      factors += [f"z2^{j}" if j != 1 else "z2"] if j else []
      parts.append("*".join([str(v), *factors]) if factors else str(v))
    return " + ".join(parts)


def _as_poly(value: "LaurentPoly | Fraction | int") -> LaurentPoly:
  return value if isinstance(value, LaurentPoly) else LaurentPoly.constant(value)


ZERO: Final = LaurentPoly()
ONE: Final = LaurentPoly.constant(1)
Z1: Final = LaurentPoly.monomial(1, 0)
Z2: Final = LaurentPoly.monomial(0, 1)
S_Z1: Final = ONE + Z1 + Z1 * Z1 + Z1 * Z1 * Z1
G1: Final = LaurentPoly({(4, 0): 1, (0, 0): -1})
G2: Final = S_Z1 * (Z2 + 1)
G3: Final = LaurentPoly({(0, 2): 1, (0, 0): -1})
QUOTIENT_MONOMIALS: Final = ((0, 0), (1, 0), (2, 0), (3, 0), (0, 1), (1, 1), (2, 1))


def poly_multiply(f: LaurentPoly, g: LaurentPoly) -> LaurentPoly:
  return f * g


def evaluate_at_root(f: LaurentPoly, eta: Exponent) -> dyadic.GaussianDyadic:
  """Exact value of f at (i^-eta1, (-1)^eta2)."""
  eta1, eta2 = eta
  if not (0 <= eta1 < 4 and 0 <= eta2 < 2):
    raise ValueError(f"Evaluation point index out of range: {eta}")
  by_power = [Fraction(0)] * 4
  for (i, j), v in f.terms.items():
    power = (-eta1 * i) % 4
    sign = -1 if (eta2 * j) % 2 else 1
    by_power[power] += sign * v
  result = dyadic.GaussianDyadic()
  for power, total in enumerate(by_power):
    result = result + dyadic.GaussianDyadic.of(total).times_i(power)
  return result


def coset_sums(a: LaurentPoly, eta: int) -> list[Fraction]:
  """Sums of a over the eight cosets of Z^2 / W_eta Z^2."""
  w = lattice.GENERATORS[eta]
  sums = [Fraction(0)] * 8
  if not a:
    return sums
  xs, ys = zip(*a.terms, strict=True)
  cosets = lattice.coset_index(np.array(xs), np.array(ys), w)
  for k, v in zip(cosets.tolist(), a.terms.values(), strict=True):
    sums[k] += v
  return sums


def sum_rule_by_evaluation(a: LaurentPoly) -> bool:
  for eta in lattice.coset_representatives(lattice.EpsWord((0,))):
    value = evaluate_at_root(a, eta)
    expected = dyadic.GaussianDyadic.of(8 if eta == (0, 0) else 0)
    if value != expected:
      return False
  return True


def sum_rule_check(a: LaurentPoly, eta: int) -> bool:
  return all(s == 1 for s in coset_sums(a, eta))


class HBasisReduction(NamedTuple):
  p: LaurentPoly
  q: LaurentPoly
  r: LaurentPoly
  remainder: LaurentPoly


def recompose(
  p: LaurentPoly, q: LaurentPoly, r: LaurentPoly, remainder: LaurentPoly
) -> LaurentPoly:
  return p * G1 + q * G2 + r * G3 + remainder


def _lattice_shift(f: LaurentPoly) -> tuple[int, int]:
  """Smallest (4a, 2b) with a, b >= 0 making z^(4a, 2b) f a polynomial."""
  (lo1, lo2), _ = f.box()
  a = -(lo1 // 4) if lo1 < 0 else 0
  b = -(lo2 // 2) if lo2 < 0 else 0
  return 4 * a, 2 * b


def _geometric(step: Exponent, count: int) -> LaurentPoly:
  return LaurentPoly({(step[0] * t, step[1] * t): 1 for t in range(count)})


# Polynomial ring for the divisions inside hbasis_reduce.
_RING, _R_Z1, _R_Z2 = ring("z1,z2", QQ, grlex)
_R_S: Final = 1 + _R_Z1 + _R_Z1**2 + _R_Z1**3
_R_G1: Final = _R_Z1**4 - 1
_R_G3: Final = _R_Z2**2 - 1


def _to_ring(f: LaurentPoly) -> PolyElement:
  """f as a ring element; f must have no negative exponents."""
  return _RING.from_dict(
    {alpha: QQ(v.numerator, v.denominator) for alpha, v in f.items()},
  )


def _from_ring(p: PolyElement) -> LaurentPoly:
  return LaurentPoly(
    {
      alpha: Fraction(int(c.numerator), int(c.denominator))
      for alpha, c in p.terms()
    },
  )


def _z2_part(p: PolyElement, j: int) -> PolyElement:
  """Coefficient of z2^j in p, as a polynomial in z1."""
  return _RING.from_dict({(i, 0): c for (i, jj), c in p.terms() if jj == j})


def hbasis_reduce(f: LaurentPoly) -> HBasisReduction:
  """Reduces f modulo the H-basis (g1, g2, g3).

  Returns cofactors and a remainder on the seven quotient monomials with
  f = p g1 + q g2 + r g3 + remainder. The shift making f a polynomial is a
  power of z1^4 z2^2, which is congruent to 1 modulo I; undoing it adds
  multiples of g1 and g3 to the cofactors and leaves the remainder alone.
  Each division below has a unique quotient and remainder.
  """
  if not f:
    return HBasisReduction(ZERO, ZERO, ZERO, ZERO)
  s1, s2 = _lattice_shift(f)
  shifted = _to_ring(f.shift(s1, s2))

  # z2-degree below 2: shifted = r g3 + u0 + u1 z2.
  r_ring, work = shifted.div(_R_G3)
  u0, u1 = _z2_part(work, 0), _z2_part(work, 1)
  # u1 z2 = q s (z2 + 1) + rho z2 - q s with u1 = q s + rho.
  q_ring, rho = u1.div(_R_S)
  # The z2-free part u0 - q s reduces modulo z1^4 - 1.
  p_ring, free = (u0 - q_ring * _R_S).div(_R_G1)

  remainder = _from_ring(free + rho * _R_Z2)
  p = _from_ring(p_ring).shift(-s1, -s2)
  q = _from_ring(q_ring).shift(-s1, -s2)
  r = _from_ring(r_ring).shift(-s1, -s2)

  # z^-s - 1 = -z1^-s1 (z1^s1 - 1) - z^-s (z2^s2 - 1), a combination of g1 and g3.
  if remainder and (s1 or s2):
    if s1:
      p = p - _geometric((4, 0), s1 // 4).shift(-s1, 0) * remainder
    if s2:
      r = r - _geometric((0, 2), s2 // 2).shift(-s1, -s2) * remainder
  logger.debug("H-basis reduction left %d remainder terms", len(remainder))
  return HBasisReduction(p, q, r, remainder)


@dataclasses.dataclass(frozen=True)
class MatrixMask:
  """Matrix whose entries are Laurent polynomials (a matrix-valued mask)."""

  entries: tuple[tuple[LaurentPoly, ...], ...]

  def __post_init__(self) -> None:
    widths = {len(row) for row in self.entries}
    if len(widths) != 1:
      raise core.ShapeMismatchError("Matrix mask rows must have equal length.")

  @classmethod
  def of(cls, rows: Iterable[Iterable[LaurentPoly | Fraction | int]]) -> Self:
    return cls(tuple(tuple(_as_poly(e) for e in row) for row in rows))

  @classmethod
  def identity(cls, scale: Fraction | int = 1) -> Self:
    return cls.of([[scale, 0], [0, scale]])

  @classmethod
  def zeros(cls, rows: int = 2, cols: int = 2) -> Self:
    return cls.of([[0] * cols for _ in range(rows)])

  @property
  def shape(self) -> tuple[int, int]:
    return len(self.entries), len(self.entries[0])

  def __getitem__(self, index: tuple[int, int]) -> LaurentPoly:
    i, j = index
    return self.entries[i][j]

  def __add__(self, other: "MatrixMask") -> "MatrixMask":
    self._check_same_shape(other)
    return MatrixMask(
      tuple(
        tuple(x + y for x, y in zip(r1, r2, strict=True))
        for r1, r2 in zip(self.entries, other.entries, strict=True)
      ),
    )

  def __sub__(self, other: "MatrixMask") -> "MatrixMask":
    self._check_same_shape(other)
    return MatrixMask(
      tuple(
        tuple(x - y for x, y in zip(r1, r2, strict=True))
        for r1, r2 in zip(self.entries, other.entries, strict=True)
      ),
    )

  def __matmul__(self, other: "MatrixMask") -> "MatrixMask":
    n, k = self.shape
    k2, m = other.shape
    if k != k2:
      raise core.ShapeMismatchError(
        f"Cannot multiply {self.shape} by {other.shape} matrix masks",
      )
    return MatrixMask(
      tuple(
        tuple(
          sum((self[i, t] * other[t, j] for t in range(k)), ZERO) for j in range(m)
        )
        for i in range(n)
      ),
    )

  def _check_same_shape(self, other: "MatrixMask") -> None:
    if self.shape != other.shape:
      raise core.ShapeMismatchError(
        f"Matrix mask shapes differ: {self.shape} vs {other.shape}",
      )

  def substitute(self, w: lattice.Mat2) -> "MatrixMask":
    return MatrixMask(
      tuple(tuple(e.substitute(w) for e in row) for row in self.entries),
    )

  def at(self, alpha: Exponent) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(e[alpha] for e in row) for row in self.entries)

  def support(self) -> set[Exponent]:
    return {alpha for row in self.entries for e in row for alpha in e.terms}

  def is_zero(self) -> bool:
    return not any(e for row in self.entries for e in row)

  def check_representation(self, a: LaurentPoly, eta: int) -> bool:
    """True iff [z - 1] a*(z) = B*(z) [z^W - 1] holds exactly."""
    return gradient_symbol() @ MatrixMask.of([[a]]) == self @ dilated_gradient_symbol(
      lattice.GENERATORS[eta],
    )


def gradient_symbol() -> MatrixMask:
  return MatrixMask.of([[Z1 - 1], [Z2 - 1]])


def dilated_gradient_symbol(w: lattice.Mat2) -> MatrixMask:
  (c1, c2) = w.columns_as_exponents()
  return MatrixMask.of(
    [[LaurentPoly.monomial(*c1) - 1], [LaurentPoly.monomial(*c2) - 1]],
  )


def difference(c: LaurentPoly) -> MatrixMask:
  """Backward differences (c(. - e1) - c, c(. - e2) - c) as a 2x1 mask."""
  return MatrixMask.of([[(Z1 - 1) * c], [(Z2 - 1) * c]])


def _w0_representation(red: HBasisReduction) -> MatrixMask:
  p, q, r, _ = red
  return MatrixMask.of(
    [
      [(Z1 - 1) * p + (Z2 + 1) * q, (Z1 - 1) * r],
      [(Z2 - 1) * p, S_Z1 * q + (Z2 - 1) * r],
    ],
  )


# [z^W1 - 1] = T [z^W0 - 1]; this is T^-1.
_W1_TRANSFORM_INV: Final = MatrixMask.of([[1, 0], [1, LaurentPoly.monomial(4, 0)]])


def representation_mask(a: LaurentPoly, eta: int) -> MatrixMask:
  """Matrix mask B with [z - 1] a*(z) = B*(z) [z^{W_eta} - 1]."""
  red = hbasis_reduce(a)
  if red.remainder:
    raise core.NotInIdealError(
      f"Symbol is not in the quotient ideal; remainder {red.remainder}",
    )
  b = _w0_representation(red)
  if eta == 1:
    b = b @ _W1_TRANSFORM_INV
  elif eta != 0:
    raise ValueError(f"Step must be 0 or 1, got {eta}")
  if not b.check_representation(a, eta):
    raise RuntimeError(f"Representation identity failed for step {eta}")
  return b


def mask_to_dict(a: LaurentPoly, name: str = "") -> dict[str, Any]:
  entries = []
  for (i, j), v in a.items():
    k = dyadic.log2_denominator(v)
    entries.append({"i": i, "j": j, "num": v.numerator, "log2den": k})
  return {"name": name, "entries": entries}


def mask_to_json(a: LaurentPoly, name: str = "") -> str:
  return json.dumps(mask_to_dict(a, name), indent=2)


def mask_from_dict(data: Mapping[str, Any]) -> tuple[str, LaurentPoly]:
  try:
    name = str(data.get("name", ""))
    entries = data["entries"]
    terms: dict[Exponent, Fraction] = {}
    for entry in entries:
      alpha = (int(entry["i"]), int(entry["j"]))
      log2den = int(entry["log2den"])
      if log2den < 0:
        raise core.MaskFormatError(f"Negative log2den at {alpha}")
      if alpha in terms:
        raise core.MaskFormatError(f"Duplicate mask entry at {alpha}")
      terms[alpha] = dyadic.dyadic(int(entry["num"]), log2den)
  except (KeyError, TypeError, AttributeError) as e:
    raise core.MaskFormatError(f"Malformed mask JSON: {e}") from e
  return name, LaurentPoly(terms)


def mask_from_json(text: str) -> tuple[str, LaurentPoly]:
  try:
    data = json.loads(text)
  except json.JSONDecodeError as e:
    raise core.MaskFormatError(f"Mask file is not JSON: {e}") from e
  if not isinstance(data, dict):
    raise core.MaskFormatError("Mask JSON must be an object.")
  return mask_from_dict(data)
