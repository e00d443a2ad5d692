import itertools

import numpy as np
import pytest

from shearlet_subdivision import core, lattice
from shearlet_subdivision.lattice import EpsWord, Fraction, Mat2


def all_words(max_len: int) -> list[EpsWord]:
  return [w for n in range(1, max_len + 1) for w in EpsWord.all_words(n)]


def test_parse_word() -> None:
  assert EpsWord.parse("0110").bits == (0, 1, 1, 0)
  assert EpsWord.parse("") == EpsWord()
  assert str(EpsWord.parse("01000")) == "01000"
  with pytest.raises(ValueError, match="Not a 0/1 word"):
    EpsWord.parse("012")


def test_word_helpers() -> None:
  eps = EpsWord.parse("0111")
  assert eps.reverse() == EpsWord.parse("1110")
  assert eps.project(2) == EpsWord.parse("01")
  assert eps.parent == EpsWord.parse("011")
  assert eps.last == 1
  assert eps.append(0) == EpsWord.parse("01110")
  assert EpsWord.zeros(3) + EpsWord.ones(2) == EpsWord.parse("00011")
  assert len(list(EpsWord.all_words(4))) == 16
  with pytest.raises(ValueError, match="no parent"):
    _ = EpsWord().parent


@pytest.mark.parametrize(
  ("word", "binary", "dyadic"),
  [
    ("1", 1, Fraction(1, 2)),
    ("01", 2, Fraction(1, 4)),
    ("110", 3, Fraction(3, 4)),
    ("0001", 8, Fraction(1, 16)),
  ],
)
def test_binary_and_dyadic_values(word: str, binary: int, dyadic: Fraction) -> None:
  eps = EpsWord.parse(word)
  assert lattice.binary_value(eps) == binary
  assert lattice.dyadic_value(eps) == dyadic
  assert EpsWord.from_binary_value(binary, len(eps)) == eps


def test_generator_relations() -> None:
  assert lattice.U @ lattice.W0 == lattice.W1
  assert lattice.W0 @ lattice.V == lattice.W1
  assert lattice.U.is_unimodular
  assert lattice.V.is_unimodular
  assert lattice.M0 == lattice.W0.inverse()
  assert lattice.M1 == lattice.W1.inverse()


def test_matrix_power() -> None:
  assert lattice.U**0 == lattice.IDENTITY
  assert lattice.U**3 == Mat2.of([[1, -6], [0, 1]])
  assert lattice.U**-2 == Mat2.of([[1, 4], [0, 1]])
  assert (lattice.W0**2).det == 64


def test_closed_forms_up_to_length_ten() -> None:
  for eps in all_words(10):
    assert lattice.dilation_matrix(eps) == lattice.dilation_closed_form(eps)
    assert lattice.refinement_matrix(eps) == lattice.refinement_closed_form(eps)


@pytest.mark.parametrize("word", ["0", "1", "01", "110", "01000", "1011001"])
def test_refinement_is_inverse_of_reversed_dilation(word: str) -> None:
  eps = EpsWord.parse(word)
  assert lattice.refinement_matrix(eps) == (
    lattice.dilation_matrix(eps.reverse()).inverse()
  )


@pytest.mark.parametrize("word", ["0", "1", "01", "110", "0111", "10101"])
def test_shear_factors(word: str) -> None:
  eps = EpsWord.parse(word)
  n = len(eps)
  u_eps, v_eps = lattice.shear_factors(eps)
  w0n = lattice.W0**n
  assert u_eps @ w0n == lattice.dilation_matrix(eps)
  assert w0n @ v_eps == lattice.dilation_matrix(eps)
  assert u_eps == v_eps ** (2**n)


@pytest.mark.parametrize("k", [-2, -1, 0, 1, 2])
def test_lattice_refinement(k: int) -> None:
  assert lattice.check_lattice_refinement(k)
  assert lattice.check_lattice_refinement(k, j=1, radius=8)


def test_coset_representatives() -> None:
  reps = lattice.coset_representatives(EpsWord.parse("01"))
  assert len(reps) == 64
  assert len(set(reps)) == 64
  w = lattice.dilation_matrix(EpsWord.parse("01"))
  assert abs(w.det) == 64
  for p, q in itertools.combinations(reps[:12], 2):
    assert not lattice.is_congruent(p, q, w)


@pytest.mark.parametrize("word", ["0", "1", "10", "011"])
def test_coset_index_matches_congruence(word: str) -> None:
  w = lattice.dilation_matrix(EpsWord.parse(word))
  reps = lattice.coset_representatives(EpsWord.parse(word))
  rng = np.random.default_rng(3)
  points = rng.integers(-40, 40, size=(50, 2))
  index = lattice.coset_index(points[:, 0], points[:, 1], w)
  for (x, y), k in zip(points.tolist(), index.tolist(), strict=True):
    assert lattice.is_congruent((x, y), reps[k], w)


def test_coset_index_small_cases() -> None:
  x = np.array([5, 0, -1, -4])
  y = np.array([3, 0, 0, 2])
  assert lattice.coset_index(x, y, lattice.W0).tolist() == [3, 0, 6, 0]
  assert lattice.coset_index(x, y, lattice.W1).tolist() == [3, 0, 6, 0]


@pytest.mark.parametrize(
  ("source", "word", "expected"),
  [
    (lattice.INFINITY, "000", lattice.INFINITY),
    (lattice.INFINITY, "1", Fraction(1)),
    (lattice.INFINITY, "01", Fraction(1)),
    (lattice.INFINITY, "11", Fraction(2, 3)),
    (Fraction(1), "0", Fraction(2)),
    (Fraction(0), "101", Fraction(0)),
  ],
)
def test_slope_after(source: lattice.Slope, word: str, expected: lattice.Slope) -> None:
  assert lattice.slope_after(source, EpsWord.parse(word)) == expected


def test_parse_slope() -> None:
  assert lattice.parse_slope("inf") == lattice.INFINITY
  assert lattice.parse_slope("3/4") == Fraction(3, 4)
  assert lattice.format_slope(lattice.INFINITY) == "inf"
  with pytest.raises(ValueError, match="Not a slope"):
    lattice.parse_slope("-1")


@pytest.mark.parametrize(
  "target",
  [
    Fraction(1, 2),
    Fraction(3, 4),
    Fraction(1),
    Fraction(2),
    Fraction(5),
    Fraction(10),
    lattice.INFINITY,
  ],
)
def test_plan_direction_from_vertical(target: lattice.Slope) -> None:
  delta = Fraction(1, 1000)
  eps = lattice.plan_direction(lattice.INFINITY, target, delta)
  reached = lattice.slope_after(lattice.INFINITY, eps)
  if target == lattice.INFINITY:
    assert reached == lattice.INFINITY
  else:
    assert abs(reached - target) < delta


def test_plan_direction_exact_hit() -> None:
  eps = lattice.plan_direction(lattice.INFINITY, Fraction(1), Fraction(1, 1000))
  assert lattice.slope_after(lattice.INFINITY, eps) == 1


@pytest.mark.parametrize(
  ("target", "delta", "word"),
  [
    (Fraction(1), Fraction(1, 10), "1"),
    (Fraction(2), Fraction(1, 10**6), "10"),
  ],
)
def test_plan_direction_shortest_words(
  target: Fraction, delta: Fraction, word: str
) -> None:
  eps = lattice.plan_direction(lattice.INFINITY, target, delta)
  assert eps == EpsWord.parse(word)
  assert lattice.slope_after(lattice.INFINITY, eps) == target


def test_plan_direction_errors() -> None:
  with pytest.raises(core.UnreachableDirectionError):
    lattice.plan_direction(lattice.INFINITY, Fraction(1, 4), Fraction(1, 1000))
  with pytest.raises(ValueError, match="Horizontal"):
    lattice.plan_direction(0, Fraction(1), Fraction(1, 1000))
  with pytest.raises(ValueError, match="delta"):
    lattice.plan_direction(lattice.INFINITY, Fraction(1), 0)
