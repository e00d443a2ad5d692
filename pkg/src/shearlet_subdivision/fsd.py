"""Fast shearlet decomposition over the binary tree of shear directions.

Each edge (eps, eta) of the tree splits the scaling array c_eps into the
subsampled child c_{eps eta} = c_eps(W_eta .) and seven detail arrays, one
per nonzero coset gamma of W_eta Z^2, holding the prediction error
c_eps - S_eta c_{eps eta} on that coset. For an interpolatory pair the error
on the zero coset vanishes, so it is never stored, and one synthesis step
undoes one analysis step exactly.

A child carries the word of its parent plus the step digit eta, so a node
of a tree built from a field with word w is labelled w followed by its key
in ``ShearletTree.scaling``.
"""

import dataclasses
import logging
import pathlib
import re
from collections.abc import Mapping
from typing import Any, Final, Self

import blake3
import numpy as np

from shearlet_subdivision import core, fieldio, lattice
from shearlet_subdivision import grid as grid_lib
from shearlet_subdivision.grid import Grid
from shearlet_subdivision.lattice import EpsWord
from shearlet_subdivision.masks import MaskPair
from shearlet_subdivision.subdivision import SampledField, apply_mask

logger = logging.getLogger(__name__)

Gamma = tuple[int, int]
Details = Mapping[Gamma, Grid]

# Nonzero residues of Z^2 / W_eta Z^2 for both steps.
GAMMAS: Final[tuple[Gamma, ...]] = tuple(
  (x, y) for x in range(4) for y in range(2) if (x, y) != (0, 0)
)

MANIFEST_NAME: Final = "manifest.json"
_SCALING_RE: Final = re.compile(r"c_([01]*)\.csv")
_DETAIL_RE: Final = re.compile(r"d_([01]+)_(\d+)-(\d+)\.csv")


def _periodic(c: SampledField) -> core.PeriodicBoundary:
  if not isinstance(c.boundary, core.PeriodicBoundary):
    raise core.PeriodMismatchError(
      "Decomposition needs a periodic field; use pad_to_period first.",
    )
  return c.boundary


def _require_interpolatory(pair: MaskPair) -> None:
  if not pair.is_interpolatory:
    raise core.NotInterpolatoryError(
      f"Mask pair {pair.name or '<unnamed>'} is not interpolatory",
    )


def analyze_step(
  c: SampledField, eta: int, pair: MaskPair, *, debug: bool = False
) -> tuple[SampledField, dict[Gamma, Grid]]:
  """Returns c(W_eta .) and the prediction errors on the seven nonzero cosets.

  With ``debug`` the error on the zero coset is computed as well and must
  vanish.
  """
  _require_interpolatory(pair)
  boundary = _periodic(c)
  w = lattice.GENERATORS[eta]
  coarse = boundary.coarsened(w)
  child = SampledField(
    grid_lib.subsample(c.grid, w, boundary), c.eps.append(eta), coarse
  )
  prediction = apply_mask(pair.mask(eta), w, child.grid, coarse)
  residual = c.grid - prediction
  if debug:
    zero_coset = grid_lib.subsample(residual, w, boundary)
    if not zero_coset.is_zero():
      raise core.NotInterpolatoryError(
        f"Prediction error on the zero coset of step {eta} is "
        f"{zero_coset.max_abs()} in magnitude",
      )
  details = {
    gamma: grid_lib.subsample(residual, w, boundary, gamma) for gamma in GAMMAS
  }
  return child, details


def synthesize_step(
  child: SampledField, details: Details, eta: int, pair: MaskPair
) -> SampledField:
  """Inverse of analyze_step: S_eta child corrected on the nonzero cosets.

  The result drops the last digit of the child word.
  """
  coarse = _periodic(child)
  if set(details) != set(GAMMAS):
    raise core.ShapeMismatchError(
      f"Expected details for cosets {GAMMAS}, got {sorted(details)}",
    )
  for gamma, detail in details.items():
    if detail.shape != child.shape or detail.origin != (0, 0):
      raise core.ShapeMismatchError(
        f"Detail {gamma} has shape {detail.shape} at {detail.origin}, "
        f"scaling array has shape {child.shape}",
      )
  w = lattice.GENERATORS[eta]
  fine = coarse.refined(w)
  out = apply_mask(pair.mask(eta), w, child.grid, coarse)
  correction = Grid.zeros(fine.periods, exact=out.exact)
  for gamma, detail in details.items():
    correction = grid_lib.scatter(detail, correction, w, fine, gamma)
  out = grid_lib.scatter(child.grid, out + correction, w, fine)
  return SampledField(out, child.eps.parent if child.eps else child.eps, fine)


@dataclasses.dataclass(frozen=True)
class ShearletTree:
  """Scaling and detail arrays of a decomposition.

  ``branches`` is None for the full tree, otherwise the single decomposed
  root-to-leaf word. Scaling arrays are stored for leaves, and for every
  node when ``keep_interior`` is set.
  """

  depth: int
  dims: tuple[int, int]
  boundary: core.PeriodicBoundary
  branches: EpsWord | None
  scaling: Mapping[EpsWord, SampledField]
  details: Mapping[tuple[EpsWord, Gamma], Grid]
  keep_interior: bool = False
  pair_name: str = ""

  @property
  def edges(self) -> list[EpsWord]:
    return sorted({node for node, _ in self.details}, key=lambda e: (len(e), e.bits))

  @property
  def leaves(self) -> list[EpsWord]:
    return sorted(
      (e for e in self.scaling if len(e) == self.depth), key=lambda e: e.bits
    )

  def edge_details(self, node: EpsWord) -> dict[Gamma, Grid]:
    try:
      return {gamma: self.details[node, gamma] for gamma in GAMMAS}
    except KeyError as e:
      raise core.MissingNodeError(f"No detail arrays stored for node {node}") from e


def _check_depth(
  boundary: core.PeriodicBoundary, depth: int, path: EpsWord | None = None
) -> None:
  if depth < 0:
    raise ValueError(f"Depth must be nonnegative, got {depth}")
  p1, p2 = boundary.periods
  scale = 4**depth
  if p1 % scale or p2 % scale:
    raise core.PeriodMismatchError(
      f"Field of shape {boundary.periods} cannot be decomposed to depth {depth}; "
      f"both periods must be divisible by {scale}",
    )
  for level in range(depth):
    if path is not None and path.bits[level] == 0:
      continue
    # The shear step at this level needs P1 | 2 P2 on the level's periods.
    if (2 * (p2 // 2**level)) % (p1 // 4**level):
      raise core.PeriodMismatchError(
        f"Field of shape {boundary.periods} cannot be decomposed to depth "
        f"{depth}; the shear step at level {level + 1} needs the first period "
        f"to divide twice the second",
      )


def decompose(
  c: SampledField,
  depth: int,
  pair: MaskPair,
  path: EpsWord | None = None,
  *,
  keep_interior: bool = False,
) -> ShearletTree:
  """Analyses c along every edge of the full tree, or along one path."""
  _require_interpolatory(pair)
  boundary = _periodic(c)
  if path is not None and len(path) != depth:
    raise ValueError(f"Path {path} does not have length {depth}")
  _check_depth(boundary, depth, path)

  scaling: dict[EpsWord, SampledField] = {}
  details: dict[tuple[EpsWord, Gamma], Grid] = {}
  frontier = {EpsWord(): c}
  for level in range(depth):
    etas = (0, 1) if path is None else (path.bits[level],)
    next_frontier = {}
    for node, parent in frontier.items():
      if keep_interior:
        scaling[node] = parent
      for eta in etas:
        child_node = node.append(eta)
        child, edge = analyze_step(parent, eta, pair)
        logger.debug("Analysed edge %s into shape %s", child_node, child.shape)
        next_frontier[child_node] = child
        for gamma, detail in edge.items():
          details[child_node, gamma] = detail
    frontier = next_frontier
  scaling.update(frontier)
  return ShearletTree(
    depth=depth,
    dims=c.shape,
    boundary=boundary,
    branches=path,
    scaling=scaling,
    details=details,
    keep_interior=keep_interior,
    pair_name=pair.name,
  )


def reconstruct(
  tree: ShearletTree,
  path: EpsWord,
  pair: MaskPair,
  *,
  target: EpsWord = EpsWord(),
) -> SampledField:
  """Synthesises from the scaling array at ``path`` up to the node ``target``."""
  if len(target) > len(path) or path.project(len(target)) != target:
    raise ValueError(f"Node {target} is not an ancestor of {path}")
  if path not in tree.scaling:
    raise core.MissingNodeError(f"No scaling array stored for node {path}")
  c = tree.scaling[path]
  for n in range(len(path), len(target), -1):
    node = path.project(n)
    c = synthesize_step(c, tree.edge_details(node), node.last, pair)
  return c


def node_scaling(tree: ShearletTree, eps: EpsWord, pair: MaskPair) -> SampledField:
  """c_eps, stored or re-synthesised from the nearest stored descendant."""
  if eps in tree.scaling:
    return tree.scaling[eps]
  below = [
    node
    for node in tree.scaling
    if len(node) > len(eps) and node.project(len(eps)) == eps
  ]
  if not below:
    raise core.MissingNodeError(f"No stored scaling array below node {eps}")
  start = min(below, key=lambda e: (len(e), e.bits))
  return reconstruct(tree, start, pair, target=eps)


def detail_energy_map(tree: ShearletTree, node: EpsWord) -> np.ndarray:
  """Largest absolute detail over the seven cosets, per coarse position."""
  maps = [np.abs(d.to_float().values) for d in tree.edge_details(node).values()]
  return np.maximum.reduce(maps)


def pad_to_period(field: SampledField, depth: int) -> SampledField:
  """Zero-extends a field to a square period divisible by 4^depth.

  The stored window moves to the origin; the padded field is periodic.
  """
  scale = 4**depth
  side = scale * max(1, -(-max(field.shape) // scale))
  padded = field.grid.window(field.origin, (side, side))
  return SampledField(
    Grid(padded.values, (0, 0), padded.log2den),
    field.eps,
    core.PeriodicBoundary(periods=(side, side)),
  )


def _digest(path: pathlib.Path) -> str:
  return blake3.blake3(path.read_bytes()).hexdigest()


@dataclasses.dataclass(frozen=True)
class TreeManifest(core.Config):
  depth: int
  dims: tuple[int, int]
  boundary: core.PeriodicBoundary
  branches: str
  keep_interior: bool
  pair: str
  files: tuple[tuple[str, str], ...]

  @classmethod
  def _get_type(cls) -> str:
    return "shearlet_tree"

  def to_dict(self) -> dict[str, Any]:
    return dataclasses.asdict(self) | {
      "type": self._get_type(),
      "boundary": self.boundary.to_dict(),
      "files": dict(self.files),
    }

  @classmethod
  def from_json(cls, config_dict: dict[str, Any]) -> Self:
    boundary = core.config_from_dict(config_dict["boundary"])
    if not isinstance(boundary, core.PeriodicBoundary):
      raise core.FieldFormatError(f"Tree boundary must be periodic, got {boundary}")
    d1, d2 = config_dict["dims"]
    return cls(
      depth=int(config_dict["depth"]),
      dims=(int(d1), int(d2)),
      boundary=boundary,
      branches=str(config_dict["branches"]),
      keep_interior=bool(config_dict["keep_interior"]),
      pair=str(config_dict.get("pair", "")),
      files=tuple(sorted(config_dict["files"].items())),
    )


def scaling_file_name(node: EpsWord) -> str:
  return f"c_{node}.csv"


def detail_file_name(node: EpsWord, gamma: Gamma) -> str:
  return f"d_{node}_{gamma[0]}-{gamma[1]}.csv"


def save_tree(tree: ShearletTree, directory: str | pathlib.Path) -> pathlib.Path:
  """Writes every array as a field CSV plus a manifest; returns the manifest."""
  directory = pathlib.Path(directory)
  directory.mkdir(parents=True, exist_ok=True)
  written = []
  for node, field in sorted(tree.scaling.items(), key=lambda kv: kv[0].bits):
    written.append(fieldio.write_csv(field, directory / scaling_file_name(node)))
  for (node, gamma), detail in sorted(
    tree.details.items(), key=lambda kv: (kv[0][0].bits, kv[0][1])
  ):
    field = SampledField(
      detail, node, core.PeriodicBoundary(periods=detail.shape)
    )
    written.append(fieldio.write_csv(field, directory / detail_file_name(node, gamma)))
  manifest = TreeManifest(
    depth=tree.depth,
    dims=tree.dims,
    boundary=tree.boundary,
    branches="full" if tree.branches is None else str(tree.branches),
    keep_interior=tree.keep_interior,
    pair=tree.pair_name,
    files=tuple((path.name, _digest(path)) for path in written),
  )
  manifest_path = directory / MANIFEST_NAME
  manifest_path.write_text(manifest.to_json())
  return manifest_path


def load_tree(directory: str | pathlib.Path) -> ShearletTree:
  directory = pathlib.Path(directory)
  manifest = core.config_from_json((directory / MANIFEST_NAME).read_text())
  if not isinstance(manifest, TreeManifest):
    raise core.FieldFormatError(f"{directory} does not hold a shearlet tree")
  scaling: dict[EpsWord, SampledField] = {}
  details: dict[tuple[EpsWord, Gamma], Grid] = {}
  for name, digest in manifest.files:
    path = directory / name
    if _digest(path) != digest:
      raise core.FieldFormatError(f"Digest mismatch for {path}")
    field = fieldio.read_csv(path)
    if match := _SCALING_RE.fullmatch(name):
      scaling[EpsWord.parse(match.group(1))] = field
    elif match := _DETAIL_RE.fullmatch(name):
      gamma = (int(match.group(2)), int(match.group(3)))
      details[EpsWord.parse(match.group(1)), gamma] = field.grid
    else:
      raise core.FieldFormatError(f"Unexpected file {name} in {directory}")
  return ShearletTree(
    depth=manifest.depth,
    dims=manifest.dims,
    boundary=manifest.boundary,
    branches=None
    if manifest.branches == "full"
    else EpsWord.parse(manifest.branches),
    scaling=scaling,
    details=details,
    keep_interior=manifest.keep_interior,
    pair_name=manifest.pair,
  )
