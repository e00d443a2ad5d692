import json
import time

import numpy as np
import pytest

from shearlet_subdivision import convergence, lattice, masks, subdivision, symbol
from shearlet_subdivision.convergence import MatrixGrid, Verdict
from shearlet_subdivision.grid import Grid
from shearlet_subdivision.lattice import EpsWord
from shearlet_subdivision.subdivision import SampledField
from shearlet_subdivision.symbol import Fraction, LaurentPoly, MatrixMask


def small_poly(rng: np.random.Generator) -> LaurentPoly:
  values = rng.integers(-4, 5, size=(3, 2))
  return LaurentPoly(
    {(i, j): Fraction(int(v), 2) for (i, j), v in np.ndenumerate(values)},
  )


def scaled_identity_pair(scale: Fraction | int) -> tuple[MatrixMask, MatrixMask]:
  return MatrixMask.identity(scale), MatrixMask.identity(scale)


@pytest.fixture(scope="module")
def dd_matrices() -> tuple[MatrixMask, MatrixMask]:
  return convergence.representation_pair(masks.pair_from_name("dd"))


@pytest.mark.parametrize("eta", [0, 1])
def test_matrix_step_of_gradient(
  dd_pair: masks.MaskPair, dd_matrices: tuple[MatrixMask, MatrixMask], eta: int
) -> None:
  b = dd_matrices[eta]
  lhs = convergence.matrix_step(b, eta, symbol.gradient_symbol())
  rhs = symbol.gradient_symbol() @ MatrixMask.of([[dd_pair.mask(eta)]])
  assert lhs == rhs


def test_matrix_step_with_identity() -> None:
  d = symbol.difference(symbol.Z1 + symbol.Z2)
  assert convergence.matrix_step(MatrixMask.identity(), 0, d) == d.substitute(
    lattice.W0,
  )


@pytest.mark.parametrize("eta", [0, 1])
def test_iterated_matrix_mask_of_one_step(
  dd_matrices: tuple[MatrixMask, MatrixMask], eta: int
) -> None:
  b0, b1 = dd_matrices
  out = convergence.iterated_matrix_mask(b0, b1, EpsWord((eta,)))
  assert out.to_mask() == dd_matrices[eta]
  assert convergence.iterated_matrix_mask(b0, b1, EpsWord()).to_mask() == (
    MatrixMask.identity()
  )


@pytest.mark.parametrize("eps", ["0", "1", "01", "10", "11", "001", "110"])
def test_prepared_steps_match_symbols(
  dd_matrices: tuple[MatrixMask, MatrixMask], eps: str
) -> None:
  b0, b1 = dd_matrices
  d = symbol.difference(symbol.Z1 * symbol.Z2 + 1)
  expected = d
  for eta in EpsWord.parse(eps):
    expected = convergence.matrix_step(dd_matrices[eta], eta, expected)
  out = convergence.apply_matrix_word(
    b0, b1, EpsWord.parse(eps), MatrixGrid.from_mask(d)
  )
  assert out.to_mask() == expected


@pytest.mark.parametrize("n", [1, 2, 3])
def test_differences_intertwine(
  dd_pair: masks.MaskPair,
  dd_matrices: tuple[MatrixMask, MatrixMask],
  rng: np.random.Generator,
  n: int,
) -> None:
  b0, b1 = dd_matrices
  for eps in EpsWord.all_words(n):
    c = small_poly(rng)
    fine = subdivision.run(dd_pair, eps, SampledField(Grid.from_poly(c)))
    lhs = MatrixGrid.from_mask(symbol.difference(fine.grid.to_poly()))
    rhs = convergence.apply_matrix_word(
      b0, b1, eps, MatrixGrid.from_mask(symbol.difference(c))
    )
    assert lhs.same_as(rhs)


def test_operator_norm_bound() -> None:
  half = MatrixMask.identity(Fraction(1, 2))
  assert convergence.operator_norm_bound(half, EpsWord.parse("0")) == Fraction(1, 2)
  b = MatrixMask.of(
    [[LaurentPoly({(0, 0): 1, (4, 0): Fraction(-1, 2), (1, 0): Fraction(1, 4)})]],
  )
  assert convergence.operator_norm_bound(b, EpsWord.parse("0")) == Fraction(3, 2)
  # (4, 0) and (0, 0) are also congruent modulo W1.
  assert convergence.operator_norm_bound(b, EpsWord.parse("1")) == Fraction(3, 2)
  as_float = MatrixGrid.from_mask(b, exact=False)
  assert convergence.operator_norm_bound(as_float, EpsWord.parse("0")) == 1.5
  assert convergence.operator_norm_bound(MatrixMask.zeros(), EpsWord.parse("0")) == 0


def test_operator_norm_sums_a_row() -> None:
  b = MatrixMask.of([[Fraction(1, 2), Fraction(-1, 4)], [0, Fraction(1, 8)]])
  assert convergence.operator_norm_bound(b, EpsWord.parse("1")) == Fraction(3, 4)


@pytest.mark.parametrize(("first", "second"), [("0", "1"), ("1", "0"), ("01", "1")])
def test_norm_bounds_are_submultiplicative(
  dd_matrices: tuple[MatrixMask, MatrixMask], first: str, second: str
) -> None:
  b0, b1 = dd_matrices

  def norm(word: EpsWord) -> Fraction:
    bound = convergence.operator_norm_bound(
      convergence.iterated_matrix_mask(b0, b1, word), word
    )
    assert isinstance(bound, Fraction)
    return bound

  e1, e2 = EpsWord.parse(first), EpsWord.parse(second)
  assert norm(e1 + e2) <= norm(e1) * norm(e2)


def test_sample_sequences() -> None:
  samples = convergence.sample_sequences(5, seed=7)
  assert len(samples) == 6
  assert samples[0] == symbol.ONE
  assert samples == convergence.sample_sequences(5, seed=7)
  for p in samples[1:]:
    assert all(abs(v) <= convergence.SAMPLE_RANGE for _, v in p.items())
    assert p.box()[1][0] < convergence.SAMPLE_SIZE


def test_jsr_of_zero_pair() -> None:
  b0, b1 = convergence.zero_matrix_pair()
  est = convergence.jsr_estimate(b0, b1, 3)
  assert est.verdict == Verdict.CONVERGES
  assert est.upper == 0.0
  assert est.lower == 0.0
  assert [d.depth for d in est.per_depth] == [1, 2, 3]


def test_jsr_of_contractive_pair() -> None:
  b0, b1 = scaled_identity_pair(Fraction(1, 2))
  est = convergence.jsr_estimate(b0, b1, 2)
  assert est.verdict == Verdict.CONVERGES
  assert est.upper == 0.5
  assert est.lower == 0.5
  assert est.depth == 1
  assert est.per_depth[1].norm_bound == Fraction(1, 4)


def test_jsr_of_identity_pair() -> None:
  b0, b1 = scaled_identity_pair(1)
  est = convergence.jsr_estimate(b0, b1, 3)
  assert est.verdict == Verdict.INCONCLUSIVE
  assert est.upper == 1.0
  assert est.lower == 1.0


def test_jsr_of_expanding_pair() -> None:
  b0, b1 = scaled_identity_pair(2)
  est = convergence.jsr_estimate(b0, b1, 2)
  assert est.verdict == Verdict.NOT_CONTRACTIVE
  assert est.upper == 2.0
  assert est.lower == 2.0
  assert est.per_depth[1].sample_ratio == 4


def test_jsr_tracks_worst_word() -> None:
  b0 = MatrixMask.identity(Fraction(1, 2))
  b1 = MatrixMask.identity(Fraction(1, 4))
  est = convergence.jsr_estimate(b0, b1, 2)
  assert est.per_depth[0].worst_word == EpsWord.parse("0")
  assert est.per_depth[1].worst_word == EpsWord.parse("00")
  assert est.per_depth[1].norm_bound == Fraction(1, 4)


@pytest.mark.parametrize("max_depth", [0, convergence.MAX_DEPTH + 1])
def test_jsr_depth_range(max_depth: int) -> None:
  b0, b1 = convergence.zero_matrix_pair()
  with pytest.raises(ValueError, match="max_depth"):
    convergence.jsr_estimate(b0, b1, max_depth)


def test_exact_and_float_agree(dd_matrices: tuple[MatrixMask, MatrixMask]) -> None:
  b0, b1 = dd_matrices
  exact = convergence.jsr_estimate(b0, b1, 2)
  floating = convergence.jsr_estimate(b0, b1, 2, exact=False)
  for e, f in zip(exact.per_depth, floating.per_depth, strict=True):
    assert float(e.norm_bound) == pytest.approx(f.norm_bound)
    assert e.upper == pytest.approx(f.upper)
    assert e.lower == pytest.approx(f.lower)
  assert exact.verdict == floating.verdict


def test_dd_verdict(dd_pair: masks.MaskPair) -> None:
  report = convergence.convergence_verdict(dd_pair, 2, exact=False)
  assert report.verdict != Verdict.REJECTED
  assert report.name == "dd"
  assert dict(report.diagnostics)["sum_rule"] == "ok"
  assert report.estimate is not None
  assert report.estimate.lower <= report.estimate.upper
  assert len(report.estimate.per_depth) == 2


def test_dd_pair_converges(dd_pair: masks.MaskPair) -> None:
  start = time.perf_counter()
  report = convergence.convergence_verdict(dd_pair, 6, exact=False)
  assert time.perf_counter() - start < 60
  assert report.verdict == Verdict.CONVERGES
  est = report.estimate
  assert est is not None
  # The norm bound first drops below one at depth 4.
  assert [d.depth for d in est.per_depth] == [1, 2, 3, 4]
  assert est.depth == 4
  assert [d.upper for d in est.per_depth[:3]] == pytest.approx(
    [5.08, 1.70, 1.16], abs=0.01
  )
  assert est.upper == pytest.approx(0.963, abs=1e-3)
  assert est.per_depth[3].norm_bound < 1
  assert est.lower <= est.upper


def test_jsr_stops_when_certified() -> None:
  b0, b1 = scaled_identity_pair(Fraction(1, 2))
  est = convergence.jsr_estimate(b0, b1, 3, stop_when_certified=True)
  assert [d.depth for d in est.per_depth] == [1]
  assert est.verdict == Verdict.CONVERGES
  b0, b1 = scaled_identity_pair(1)
  est = convergence.jsr_estimate(b0, b1, 3, stop_when_certified=True)
  assert len(est.per_depth) == 3


def test_scaled_pair_is_rejected(dd_pair: masks.MaskPair) -> None:
  report = convergence.convergence_verdict(dd_pair.scaled(2), 3)
  assert report.verdict == Verdict.REJECTED
  assert report.estimate is None
  assert dict(report.diagnostics) == {
    "coset_sums_a0": ["2"] * 8,
    "coset_sums_a1": ["2"] * 8,
  }
  data = json.loads(report.to_json())
  assert data["verdict"] == "rejected"
  assert "upper" not in data


def test_report_json() -> None:
  b0, b1 = scaled_identity_pair(Fraction(1, 2))
  est = convergence.jsr_estimate(b0, b1, 2)
  report = convergence.ConvergenceReport("half", est.verdict, est)
  data = json.loads(report.to_json())
  assert data["name"] == "half"
  assert data["verdict"] == "converges"
  assert data["depth"] == 1
  assert data["upper"] == "0.5"
  assert data["diagnostics"] == {}
  assert data["per_depth"][1] == {
    "depth": 2,
    "norm_bound": "1/2^2",
    "sample_ratio": "1/2^2",
    "upper": "0.5",
    "lower": "0.5",
    "worst_word": "00",
  }
