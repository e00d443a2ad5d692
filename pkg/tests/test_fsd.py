import json
import pathlib

import numpy as np
import pytest

from shearlet_subdivision import core, fsd, lattice, masks
from shearlet_subdivision.grid import Fraction, Grid
from shearlet_subdivision.lattice import EpsWord
from shearlet_subdivision.subdivision import SampledField


def random_periodic(rng: np.random.Generator, side: int) -> SampledField:
  nums = rng.integers(-64, 65, size=(side, side))
  return SampledField.from_values(
    [[Fraction(int(v), 16) for v in row] for row in nums],
    boundary=core.PeriodicBoundary(periods=(side, side)),
  )


def periodic_delta(side: int) -> SampledField:
  values = np.zeros((side, side), dtype=object)
  values[0, 0] = 1
  return SampledField.from_values(
    values, boundary=core.PeriodicBoundary(periods=(side, side))
  )


def test_gammas() -> None:
  assert len(fsd.GAMMAS) == 7
  assert (0, 0) not in fsd.GAMMAS
  assert set(fsd.GAMMAS) | {(0, 0)} == {(x, y) for x in range(4) for y in range(2)}


@pytest.mark.parametrize("eta", [0, 1])
def test_constants_have_no_details(dd_pair: masks.MaskPair, eta: int) -> None:
  c = SampledField.constant(Fraction(3, 4), (16, 16))
  child, details = fsd.analyze_step(c, eta, dd_pair)
  assert child.same_values(SampledField.constant(Fraction(3, 4), (4, 8)))
  assert all(d.is_zero() for d in details.values())


def test_constants_have_no_details_at_any_depth(dd_pair: masks.MaskPair) -> None:
  c = SampledField.constant(5, (64, 64))
  tree = fsd.decompose(c, 3, dd_pair)
  assert len(tree.details) == 14 * 7
  assert all(d.is_zero() for d in tree.details.values())


@pytest.mark.parametrize("eta", [0, 1])
def test_delta_details_are_the_mask(dd_pair: masks.MaskPair, eta: int) -> None:
  side = 64
  child, details = fsd.analyze_step(periodic_delta(side), eta, dd_pair, debug=True)
  assert child.value((0, 0)) == 1
  assert child.grid.max_abs() == 1
  a = dd_pair.mask(eta)
  w = lattice.GENERATORS[eta]
  for gamma, detail in details.items():
    for beta in np.ndindex(*detail.shape):
      x, y = (int(v) for v in w.apply(*beta))
      x, y = (x + gamma[0]) % side, (y + gamma[1]) % side
      alpha = (x - side if x >= side // 2 else x, y - side if y >= side // 2 else y)
      assert detail.value(beta) == -a[alpha]


@pytest.mark.parametrize("eta", [0, 1])
def test_synthesis_inverts_analysis(
  dd_pair: masks.MaskPair, rng: np.random.Generator, eta: int
) -> None:
  c = random_periodic(rng, 16)
  child, details = fsd.analyze_step(c, eta, dd_pair)
  assert child.shape == (4, 8)
  assert all(d.shape == (4, 8) for d in details.values())
  assert fsd.synthesize_step(child, details, eta, dd_pair).same_values(c)


def test_synthesize_checks_details(
  dd_pair: masks.MaskPair, rng: np.random.Generator
) -> None:
  child, details = fsd.analyze_step(random_periodic(rng, 16), 0, dd_pair)
  missing = {g: d for g, d in details.items() if g != (3, 1)}
  with pytest.raises(core.ShapeMismatchError):
    fsd.synthesize_step(child, missing, 0, dd_pair)
  wrong = dict(details) | {(3, 1): Grid.zeros((2, 2))}
  with pytest.raises(core.ShapeMismatchError):
    fsd.synthesize_step(child, wrong, 0, dd_pair)


def test_decompose_full_tree(
  dd_pair: masks.MaskPair, rng: np.random.Generator
) -> None:
  c = random_periodic(rng, 16)
  tree = fsd.decompose(c, 2, dd_pair)
  assert tree.branches is None
  assert tree.dims == (16, 16)
  assert tree.pair_name == "dd"
  assert [str(e) for e in tree.leaves] == ["00", "01", "10", "11"]
  assert [str(e) for e in tree.edges] == ["0", "1", "00", "01", "10", "11"]
  assert len(tree.details) == 42
  assert set(tree.scaling) == set(tree.leaves)
  assert tree.scaling[EpsWord.parse("01")].shape == (1, 4)
  for node, field in tree.scaling.items():
    assert field.eps == node


def test_node_words_extend_the_input_word(
  dd_pair: masks.MaskPair, rng: np.random.Generator
) -> None:
  base = random_periodic(rng, 16)
  c = SampledField(base.grid, EpsWord.parse("1"), base.boundary)
  child, details = fsd.analyze_step(c, 0, dd_pair)
  assert child.eps == EpsWord.parse("10")
  assert fsd.synthesize_step(child, details, 0, dd_pair).eps == c.eps
  tree = fsd.decompose(c, 2, dd_pair, keep_interior=True)
  for node, field in tree.scaling.items():
    assert field.eps == EpsWord((*c.eps.bits, *node.bits))
  out = fsd.reconstruct(tree, EpsWord.parse("01"), dd_pair)
  assert out.eps == c.eps
  assert out.same_values(c)


def test_decompose_keeps_interior(
  dd_pair: masks.MaskPair, rng: np.random.Generator
) -> None:
  c = random_periodic(rng, 16)
  tree = fsd.decompose(c, 2, dd_pair, keep_interior=True)
  assert len(tree.scaling) == 7
  assert tree.scaling[EpsWord()].same_values(c)
  child, _ = fsd.analyze_step(c, 1, dd_pair)
  assert tree.scaling[EpsWord.parse("1")].same_values(child)


def test_decompose_single_path(
  dd_pair: masks.MaskPair, rng: np.random.Generator
) -> None:
  c = random_periodic(rng, 16)
  path = EpsWord.parse("10")
  tree = fsd.decompose(c, 2, dd_pair, path)
  assert tree.branches == path
  assert tree.leaves == [path]
  assert len(tree.details) == 14
  assert fsd.reconstruct(tree, path, dd_pair).same_values(c)
  with pytest.raises(core.MissingNodeError):
    fsd.reconstruct(tree, EpsWord.parse("00"), dd_pair)
  with pytest.raises(core.MissingNodeError):
    fsd.node_scaling(tree, EpsWord.parse("0"), dd_pair)


@pytest.mark.parametrize("seed", range(10))
def test_perfect_reconstruction_on_every_path(
  dd_pair: masks.MaskPair, seed: int
) -> None:
  c = random_periodic(np.random.default_rng(seed), 64)
  tree = fsd.decompose(c, 3, dd_pair)
  assert len(tree.leaves) == 8
  for leaf in tree.leaves:
    out = fsd.reconstruct(tree, leaf, dd_pair)
    assert out.same_values(c)
    assert out.eps == c.eps


def test_depth_one_paths_agree(
  dd_pair: masks.MaskPair, rng: np.random.Generator
) -> None:
  c = random_periodic(rng, 16)
  tree = fsd.decompose(c, 1, dd_pair)
  left = fsd.reconstruct(tree, EpsWord.parse("0"), dd_pair)
  right = fsd.reconstruct(tree, EpsWord.parse("1"), dd_pair)
  assert left.same_values(right)
  assert left.same_values(c)


def test_decomposition_is_linear(
  dd_pair: masks.MaskPair, rng: np.random.Generator
) -> None:
  c1, c2 = random_periodic(rng, 16), random_periodic(rng, 16)
  total = c1.with_grid(c1.grid + c2.grid)
  t1, t2, t = (fsd.decompose(x, 2, dd_pair) for x in (c1, c2, total))
  for key, detail in t.details.items():
    assert detail.same_as(t1.details[key] + t2.details[key])
  for node, field in t.scaling.items():
    assert field.grid.same_as(t1.scaling[node].grid + t2.scaling[node].grid)


def test_partial_reconstruction(
  dd_pair: masks.MaskPair, rng: np.random.Generator
) -> None:
  c = random_periodic(rng, 16)
  tree = fsd.decompose(c, 2, dd_pair)
  child, _ = fsd.analyze_step(c, 0, dd_pair)
  node = EpsWord.parse("0")
  partial = fsd.reconstruct(tree, EpsWord.parse("01"), dd_pair, target=node)
  assert partial.same_values(child)
  assert fsd.node_scaling(tree, node, dd_pair).same_values(child)
  assert fsd.node_scaling(tree, EpsWord(), dd_pair).same_values(c)
  with pytest.raises(ValueError, match="not an ancestor"):
    fsd.reconstruct(tree, EpsWord.parse("01"), dd_pair, target=EpsWord.parse("1"))


def test_missing_nodes(
  dd_pair: masks.MaskPair, rng: np.random.Generator
) -> None:
  tree = fsd.decompose(random_periodic(rng, 16), 2, dd_pair)
  with pytest.raises(core.MissingNodeError, match="111"):
    tree.edge_details(EpsWord.parse("111"))
  with pytest.raises(KeyError):
    fsd.reconstruct(tree, EpsWord.parse("0"), dd_pair)


def test_decompose_checks_shear_periods_up_front(
  dd_pair: masks.MaskPair, rng: np.random.Generator
) -> None:
  nums = rng.integers(-8, 9, size=(64, 16))
  c = SampledField.from_values(
    [[int(v) for v in row] for row in nums],
    boundary=core.PeriodicBoundary(periods=(64, 16)),
  )
  with pytest.raises(
    core.PeriodMismatchError, match="depth 2; the shear step at level 1"
  ):
    fsd.decompose(c, 2, dd_pair)
  with pytest.raises(core.PeriodMismatchError, match="level 1"):
    fsd.decompose(c, 2, dd_pair, EpsWord.parse("10"))
  for word in ["00", "01"]:
    path = EpsWord.parse(word)
    tree = fsd.decompose(c, 2, dd_pair, path)
    assert fsd.reconstruct(tree, path, dd_pair).same_values(c)


def test_decompose_errors(
  dd_pair: masks.MaskPair, rng: np.random.Generator
) -> None:
  c = random_periodic(rng, 16)
  with pytest.raises(core.PeriodMismatchError, match="divisible by 64"):
    fsd.decompose(c, 3, dd_pair)
  with pytest.raises(core.PeriodMismatchError, match="periodic"):
    fsd.decompose(SampledField(c.grid), 1, dd_pair)
  with pytest.raises(ValueError, match="length 2"):
    fsd.decompose(c, 2, dd_pair, EpsWord.parse("0"))
  with pytest.raises(ValueError, match="nonnegative"):
    fsd.decompose(c, -1, dd_pair)
  with pytest.raises(core.NotInterpolatoryError):
    fsd.decompose(c, 1, masks.pair_from_name("bspline:2"))


def test_detail_energy_map(dd_pair: masks.MaskPair) -> None:
  tree = fsd.decompose(periodic_delta(64), 1, dd_pair)
  node = EpsWord.parse("0")
  energy = fsd.detail_energy_map(tree, node)
  assert energy.shape == (16, 32)
  details = tree.edge_details(node)
  assert energy.max() == max(float(d.max_abs()) for d in details.values())
  assert energy[0, 0] == max(abs(float(dd_pair.a0[g])) for g in fsd.GAMMAS)
  assert (energy >= 0).all()


def test_pad_to_period() -> None:
  field = SampledField.from_values(np.arange(15).reshape(3, 5).tolist(), origin=(-1, 2))
  padded = fsd.pad_to_period(field, 1)
  assert padded.shape == (8, 8)
  assert padded.boundary == core.PeriodicBoundary(periods=(8, 8))
  assert padded.value((0, 1)) == 1
  assert padded.value((2, 4)) == 14
  assert padded.value((7, 7)) == 0
  assert fsd.pad_to_period(field, 0).shape == (5, 5)
  assert fsd.pad_to_period(SampledField.from_values([[1]]), 2).shape == (16, 16)


def test_save_and_load(
  dd_pair: masks.MaskPair, rng: np.random.Generator, tmp_path: pathlib.Path
) -> None:
  c = random_periodic(rng, 16)
  tree = fsd.decompose(c, 2, dd_pair)
  manifest = fsd.save_tree(tree, tmp_path / "tree")
  assert manifest.name == fsd.MANIFEST_NAME
  data = json.loads(manifest.read_text())
  assert data["type"] == "shearlet_tree"
  assert data["branches"] == "full"
  assert data["boundary"] == {"periods": [16, 16], "type": "periodic"}
  assert "c_01.csv" in data["files"]
  assert "d_01_3-1.csv" in data["files"]
  assert len(data["files"]) == 4 + 42

  loaded = fsd.load_tree(tmp_path / "tree")
  assert loaded.depth == 2
  assert loaded.dims == (16, 16)
  assert loaded.branches is None
  assert loaded.leaves == tree.leaves
  assert loaded.pair_name == "dd"
  for key, detail in tree.details.items():
    assert loaded.details[key].same_as(detail)
  for leaf in loaded.leaves:
    assert fsd.reconstruct(loaded, leaf, dd_pair).same_values(c)


def test_save_and_load_path(
  dd_pair: masks.MaskPair, rng: np.random.Generator, tmp_path: pathlib.Path
) -> None:
  tree = fsd.decompose(random_periodic(rng, 16), 1, dd_pair, EpsWord.parse("1"))
  fsd.save_tree(tree, tmp_path)
  assert fsd.load_tree(tmp_path).branches == EpsWord.parse("1")


def test_load_detects_tampering(
  dd_pair: masks.MaskPair, rng: np.random.Generator, tmp_path: pathlib.Path
) -> None:
  tree = fsd.decompose(random_periodic(rng, 16), 1, dd_pair)
  fsd.save_tree(tree, tmp_path)
  path = tmp_path / fsd.detail_file_name(EpsWord.parse("0"), (1, 0))
  path.write_text(path.read_text() + "\n")
  with pytest.raises(core.FieldFormatError, match="Digest mismatch"):
    fsd.load_tree(tmp_path)
