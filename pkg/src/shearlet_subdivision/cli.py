import functools
import json
import logging
import pathlib
from collections.abc import Callable
from typing import Any, Final, NoReturn, TypeVar

import click
import numpy as np

from shearlet_subdivision import (
  convergence,
  core,
  dyadic,
  fieldio,
  fsd,
  lattice,
  masks,
  subdivision,
  symbol,
)
from shearlet_subdivision.lattice import EpsWord
from shearlet_subdivision.masks import MaskPair
from shearlet_subdivision.subdivision import SampledField

logger = logging.getLogger(__name__)

EXIT_USAGE: Final = 2
EXIT_VALIDATION: Final = 3
EXIT_DATA: Final = 4

FIGURE_WORDS: Final = ("00000", "00010", "01000", "01111")

_EXIT_CODES: Final[tuple[tuple[type[Exception], int], ...]] = (
  (core.PeriodMismatchError, EXIT_DATA),
  (core.ShapeMismatchError, EXIT_DATA),
  (core.MissingNodeError, EXIT_DATA),
  (core.NotInIdealError, EXIT_VALIDATION),
  (core.NotInterpolatoryError, EXIT_VALIDATION),
  (core.WindowTooSmallError, EXIT_VALIDATION),
  (core.UnreachableDirectionError, EXIT_VALIDATION),
  (ValueError, EXIT_USAGE),
  (OSError, EXIT_USAGE),
)

F = TypeVar("F", bound=Callable[..., Any])


def _exit_on_error(func: F) -> F:
  """Reports domain errors on stderr and exits with the matching code."""

  @functools.wraps(func)
  def wrapper(*args: Any, **kwargs: Any) -> Any:
    try:
      return func(*args, **kwargs)
    except (ValueError, OSError) as e:
      code = next(c for kind, c in _EXIT_CODES if isinstance(e, kind))
      click.echo(f"Error: {e}", err=True)
      raise click.exceptions.Exit(code) from e

  return wrapper  # type: ignore[return-value]


def _fail(message: str) -> NoReturn:
  click.echo(message, err=True)
  raise click.exceptions.Exit(EXIT_VALIDATION)


def _load_pair(name: str, mask_dir: str | None) -> MaskPair:
  if mask_dir is not None:
    directory = pathlib.Path(mask_dir)
    return MaskPair.load(directory / "a0.json", directory / "a1.json")
  return masks.pair_from_name(name)


def _tree_pair(
  tree: fsd.ShearletTree, pair: str | None, mask_dir: str | None
) -> MaskPair:
  """The pair recorded in the tree; --pair or --mask-dir must agree with it."""
  if pair is None and mask_dir is None:
    try:
      return masks.pair_from_name(tree.pair_name or "dd")
    except core.MaskFormatError as e:
      raise core.MaskFormatError(
        f"Tree pair {tree.pair_name!r} cannot be rebuilt by name; pass --mask-dir",
      ) from e
  chosen = _load_pair(pair or "dd", mask_dir)
  if tree.pair_name and chosen.name != tree.pair_name:
    raise ValueError(
      f"Tree was decomposed with pair {tree.pair_name!r}, not {chosen.name!r}",
    )
  return chosen


def _write_field(field: SampledField, out: str, fmt: str) -> pathlib.Path:
  if fmt == "pgm":
    return fieldio.write_pgm(field, out)
  return fieldio.write_csv(field, out)


def _with_boundary(field: SampledField, boundary: str | None) -> SampledField:
  if boundary is None:
    return field
  return SampledField(field.grid, field.eps, core.boundary_from_header(boundary))


pair_option = click.option(
  "--pair",
  default="dd",
  show_default=True,
  help='Mask pair: "dd", "bspline:<m>" or "<x mask>,<y mask>".',
)
mask_dir_option = click.option(
  "--mask-dir",
  type=click.Path(exists=True, file_okay=False),
  default=None,
  help="Directory holding a0.json and a1.json; overrides --pair.",
)
float_option = click.option(
  "--float",
  "use_float",
  is_flag=True,
  default=False,
  help="Compute in float64 instead of exact dyadic arithmetic.",
)
format_option = click.option(
  "--format",
  "fmt",
  type=click.Choice(["csv", "pgm"]),
  default="csv",
  show_default=True,
)


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more detail.")
def main(verbose: int) -> None:
  level = logging.WARNING
  if verbose == 1:
    level = logging.INFO
  elif verbose > 1:
    level = logging.DEBUG
  logging.basicConfig(level=level)


@main.group()
def mask() -> None:
  """Build and check refinement masks."""


@mask.command()
@pair_option
@click.option("--shear", type=int, default=0, help="Reindex both masks by U^k.")
@click.option("--scale", type=str, default="1", help="Multiply both masks by this.")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@_exit_on_error
def build(pair: str, shear: int, scale: str, out_dir: str) -> None:
  """Write a0.json and a1.json for a named mask pair."""
  built = masks.pair_from_name(pair)
  if shear:
    built = MaskPair(
      masks.shear_reindex(built.a0, shear),
      masks.shear_reindex(built.a1, shear),
      name=f"{built.name}@U^{shear}",
    )
  factor = dyadic.parse_dyadic(scale)
  if factor != 1:
    built = built.scaled(factor)
  for path in built.save(out_dir):
    click.echo(str(path))


@mask.command()
@click.argument("mask_file", type=click.Path(exists=True, dir_okay=False))
@_exit_on_error
def check(mask_file: str) -> None:
  """Report sum rule, interpolation and H-basis cofactors of a mask."""
  name, a = symbol.mask_from_json(pathlib.Path(mask_file).read_text())
  # Both steps share the coset lattice 4Z x 2Z.
  sum_rule = symbol.sum_rule_check(a, 0)
  interpolatory = masks.check_interpolatory(a)
  click.echo(
    f"sum_rule: {'ok' if sum_rule else 'fail'}, "
    f"interpolatory: {'ok' if interpolatory else 'fail'}",
  )
  red = symbol.hbasis_reduce(a)
  click.echo(f"p: {red.p}")
  click.echo(f"q: {red.q}")
  click.echo(f"r: {red.r}")
  click.echo(f"remainder: {red.remainder}")
  if not sum_rule:
    sums = ", ".join(dyadic.format_dyadic(s) for s in symbol.coset_sums(a, 0))
    _fail(f"{name or mask_file}: coset sums {sums}")


@main.command()
@pair_option
@mask_dir_option
@click.option("--eps", "eps_text", required=True, help="Word of steps, e.g. 01000.")
@click.option(
  "--input",
  "source",
  required=True,
  help=f"Field CSV path or fixture name ({', '.join(fieldio.FIXTURES)}).",
)
@click.option("--boundary", default=None, help='"zero" or "periodic:P1,P2".')
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@format_option
@float_option
@_exit_on_error
def refine(  # noqa: PLR0913
  pair: str,
  mask_dir: str | None,
  eps_text: str,
  source: str,
  boundary: str | None,
  out: str,
  fmt: str,
  use_float: bool,
) -> None:
  """Run the subdivision word on a field."""
  masks_pair = _load_pair(pair, mask_dir)
  eps = EpsWord.parse(eps_text)
  field = _with_boundary(fieldio.load_field(source), boundary)
  if use_float:
    field = field.to_float()
  result = subdivision.run(masks_pair, eps, field)
  click.echo(str(_write_field(result, out, fmt)))


@main.command()
@pair_option
@mask_dir_option
@click.option("--scale", type=str, default="1", help="Multiply both masks by this.")
@click.option("--max-depth", type=int, default=6, show_default=True)
@float_option
@_exit_on_error
def converge(
  pair: str, mask_dir: str | None, scale: str, max_depth: int, use_float: bool
) -> None:
  """Certify convergence through the difference scheme.

  "--pair zero" analyses the zero difference scheme B0 = B1 = 0.
  """
  if pair == "zero" and mask_dir is None:
    estimate = convergence.jsr_estimate(
      *convergence.zero_matrix_pair(), max_depth, exact=not use_float
    )
    report = convergence.ConvergenceReport("zero", estimate.verdict, estimate)
  else:
    masks_pair = _load_pair(pair, mask_dir)
    factor = dyadic.parse_dyadic(scale)
    if factor != 1:
      masks_pair = masks_pair.scaled(factor)
    report = convergence.convergence_verdict(
      masks_pair, max_depth, exact=not use_float
    )
  click.echo(report.to_json())
  if report.verdict == convergence.Verdict.REJECTED:
    _fail("Sum rule fails; the scheme cannot converge.")


@main.command()
@click.option("--source-slope", default="inf", show_default=True)
@click.option("--target", required=True)
@click.option("--delta", default="1/1000", show_default=True)
@_exit_on_error
def plan(source_slope: str, target: str, delta: str) -> None:
  """Find a word turning one slope into another."""
  source = lattice.parse_slope(source_slope)
  try:
    tolerance = lattice.Fraction(delta)
  except ZeroDivisionError as e:
    raise ValueError(f"Not a tolerance: {delta!r}") from e
  eps = lattice.plan_direction(source, lattice.parse_slope(target), tolerance)
  reached = lattice.slope_after(source, eps)
  logger.info("Reached slope %s", lattice.format_slope(reached))
  click.echo(str(eps))


def _random_field(size: int, seed: int) -> SampledField:
  rng = np.random.default_rng(seed)
  values = rng.integers(-256, 257, size=(size, size))
  return SampledField.from_values(
    [[dyadic.dyadic(int(v), 4) for v in row] for row in values],
    boundary=core.PeriodicBoundary(periods=(size, size)),
  )


def _decomposition_input(
  source: str | None, random_size: int, seed: int, depth: int, pad: bool
) -> SampledField:
  field = (
    fieldio.load_field(source)
    if source is not None
    else _random_field(random_size, seed)
  )
  if pad:
    field = fsd.pad_to_period(field, depth)
  return field


input_options = [
  click.option(
    "--input",
    "source",
    default=None,
    help="Field CSV path or fixture name; a random field when omitted.",
  ),
  click.option("--random-size", type=int, default=64, show_default=True),
  click.option("--seed", type=int, default=0, show_default=True),
  click.option("--pad", is_flag=True, default=False, help="Zero-pad to a period."),
]


def with_input_options(func: F) -> F:
  for option in reversed(input_options):
    func = option(func)
  return func


@main.command()
@pair_option
@mask_dir_option
@with_input_options
@click.option("--depth", type=int, required=True)
@click.option("--tree-dir", type=click.Path(file_okay=False), required=True)
@click.option("--path", "path_text", default=None, help="Decompose one branch only.")
@click.option("--keep-interior", is_flag=True, default=False)
@_exit_on_error
def decompose(  # noqa: PLR0913
  pair: str,
  mask_dir: str | None,
  source: str | None,
  random_size: int,
  seed: int,
  pad: bool,
  depth: int,
  tree_dir: str,
  path_text: str | None,
  keep_interior: bool,
) -> None:
  """Decompose a periodic field into a shearlet tree directory."""
  field = _decomposition_input(source, random_size, seed, depth, pad)
  path = None if path_text is None else EpsWord.parse(path_text)
  tree = fsd.decompose(
    field, depth, _load_pair(pair, mask_dir), path, keep_interior=keep_interior
  )
  click.echo(str(fsd.save_tree(tree, tree_dir)))


@main.command()
@click.option(
  "--pair",
  default=None,
  help="Mask pair name; must match the pair recorded in the tree manifest.",
)
@mask_dir_option
@click.option(
  "--tree-dir", type=click.Path(exists=True, file_okay=False), required=True
)
@click.option("--path", "path_text", required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@format_option
@_exit_on_error
def reconstruct(  # noqa: PLR0913
  pair: str | None,
  mask_dir: str | None,
  tree_dir: str,
  path_text: str,
  out: str,
  fmt: str,
) -> None:
  """Rebuild the input along a path, or the scaling array at a shorter path."""
  tree = fsd.load_tree(tree_dir)
  path = EpsWord.parse(path_text)
  masks_pair = _tree_pair(tree, pair, mask_dir)
  if len(path) == tree.depth:
    field = fsd.reconstruct(tree, path, masks_pair)
  else:
    field = fsd.node_scaling(tree, path, masks_pair)
  click.echo(str(_write_field(field, out, fmt)))


@main.command()
@pair_option
@with_input_options
@click.option("--depth", type=int, required=True)
@_exit_on_error
def roundtrip(  # noqa: PLR0913
  pair: str,
  source: str | None,
  random_size: int,
  seed: int,
  pad: bool,
  depth: int,
) -> None:
  """Decompose and reconstruct along every path; report the largest error."""
  field = _decomposition_input(source, random_size, seed, depth, pad)
  masks_pair = masks.pair_from_name(pair)
  tree = fsd.decompose(field, depth, masks_pair)
  errors = [
    (fsd.reconstruct(tree, leaf, masks_pair).grid - field.grid).max_abs()
    for leaf in tree.leaves
  ]
  worst = max(errors)
  click.echo(
    json.dumps(
      {
        "paths": len(errors),
        "max_error": convergence.format_number(worst),
      },
      indent=2,
    ),
  )
  if worst != 0:
    _fail("Reconstruction is not exact.")


@main.command()
@pair_option
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option(
  "--word",
  "words",
  multiple=True,
  help=f"Refinement word; repeatable. Defaults to {', '.join(FIGURE_WORDS)}.",
)
@float_option
@click.option(
  "--csv", "with_csv", is_flag=True, default=False, help="Also write CSV files."
)
@_exit_on_error
def figures(
  pair: str,
  out_dir: str,
  words: tuple[str, ...],
  use_float: bool,
  with_csv: bool,
) -> None:
  """Refine the C1, C2 and delta fixtures along the figure words."""
  masks_pair = masks.pair_from_name(pair)
  directory = pathlib.Path(out_dir)
  directory.mkdir(parents=True, exist_ok=True)
  failures = []
  for name in fieldio.FIXTURES:
    field = fieldio.load_fixture(name)
    if use_float:
      field = field.to_float()
    for word in words or FIGURE_WORDS:
      result = subdivision.run(masks_pair, EpsWord.parse(word), field)
      if with_csv:
        fieldio.write_csv(result, directory / f"{name}_{word}.csv")
      fieldio.write_pgm(result, directory / f"{name}_{word}.pgm")
      consistent = subdivision.interpolation_consistent(field, result)
      click.echo(f"{name} {word}: {'ok' if consistent else 'inconsistent'}")
      if not consistent:
        failures.append(f"{name}_{word}")
  if failures:
    _fail(f"Interpolation fails for {', '.join(failures)}")


if __name__ == "__main__":
  main()
