"""Field CSV and PGM formats, and the bundled C1, C2 and delta fixtures.

CSV rows run along the first lattice axis: row r holds the entries at
alpha = origin + (r, j). PGM images put the second axis upwards, so image
row 0 is the largest alpha_2.
"""

import importlib.resources
import pathlib
import re
from collections.abc import Callable
from typing import Final

import numpy as np

from shearlet_subdivision import core, dyadic
from shearlet_subdivision.grid import Grid
from shearlet_subdivision.lattice import EpsWord
from shearlet_subdivision.subdivision import SampledField

FIXTURES: Final = ("c1", "c2", "delta")

_HEADER_RE: Final = re.compile(r"#\s*(.*)")
_AFFINE_RE: Final = re.compile(r"#\s*affine lo=(\S+) hi=(\S+)")


def _dyadic_formatter(log2den: int) -> Callable[[int], str]:
  def fmt(n: int) -> str:
    if n == 0 or log2den == 0:
      return str(n)
    k = log2den - min((n & -n).bit_length() - 1, log2den)
    if k == 0:
      return str(n >> log2den)
    return f"{n >> (log2den - k)}/2^{k}"

  return fmt


def field_to_csv(field: SampledField) -> str:
  rows, cols = field.shape
  header = (
    f"# eps={field.eps} origin={field.origin[0]},{field.origin[1]} "
    f"rows={rows} cols={cols} boundary={field.boundary.to_header()}"
  )
  if not field.exact:
    header += " dtype=float64"
  fmt = _dyadic_formatter(field.grid.log2den) if field.exact else repr
  lines = [header]
  lines.extend(",".join(map(fmt, row)) for row in field.values.tolist())
  return "\n".join(lines) + "\n"


def _parse_header(line: str) -> dict[str, str]:
  match = _HEADER_RE.fullmatch(line.strip())
  if not match:
    raise core.FieldFormatError(f"Missing field header, got {line!r}")
  fields = {}
  for token in match.group(1).split():
    key, sep, value = token.partition("=")
    if not sep:
      raise core.FieldFormatError(f"Malformed header token {token!r}")
    fields[key] = value
  missing = {"eps", "origin", "rows", "cols", "boundary"} - fields.keys()
  if missing:
    raise core.FieldFormatError(f"Field header lacks {sorted(missing)}")
  return fields


def field_from_csv(text: str) -> SampledField:
  lines = [line for line in text.splitlines() if line.strip()]
  if not lines:
    raise core.FieldFormatError("Empty field file.")
  header = _parse_header(lines[0])
  try:
    eps = EpsWord.parse(header["eps"])
    o1, o2 = (int(v) for v in header["origin"].split(","))
    rows, cols = int(header["rows"]), int(header["cols"])
  except ValueError as e:
    raise core.FieldFormatError(f"Malformed field header: {lines[0]!r}") from e
  boundary = core.boundary_from_header(header["boundary"])
  body = [line.split(",") for line in lines[1:]]
  if len(body) != rows or any(len(row) != cols for row in body):
    raise core.FieldFormatError(
      f"Header announces {rows}x{cols} values, body has {len(body)} rows",
    )
  if header.get("dtype") == "float64":
    try:
      values = np.array([[float(v) for v in row] for row in body], dtype=np.float64)
    except ValueError as e:
      raise core.FieldFormatError(f"Malformed float value: {e}") from e
    grid = Grid.from_floats(values.reshape(rows, cols), (o1, o2))
  else:
    parsed = [[dyadic.parse_dyadic(v) for v in row] for row in body]
    grid = Grid.from_fractions(
      np.array(parsed, dtype=object).reshape(rows, cols), (o1, o2)
    )
  return SampledField(grid, eps, boundary)


def write_csv(field: SampledField, path: str | pathlib.Path) -> pathlib.Path:
  path = pathlib.Path(path)
  path.write_text(field_to_csv(field))
  return path


def read_csv(path: str | pathlib.Path) -> SampledField:
  return field_from_csv(pathlib.Path(path).read_text())


def to_pgm(field: SampledField) -> bytes:
  """8-bit grayscale image; the affine value scaling is kept in a comment."""
  values = field.grid.to_float().values
  if values.size == 0:
    raise core.ShapeMismatchError("Cannot render an empty field.")
  image = values.T[::-1, :]
  lo, hi = float(values.min()), float(values.max())
  if hi == lo:
    pixels = np.full(image.shape, 128, dtype=np.uint8)
  else:
    pixels = np.rint((image - lo) / (hi - lo) * 255).astype(np.uint8)
  height, width = pixels.shape
  header = f"P5\n# affine lo={lo!r} hi={hi!r}\n{width} {height}\n255\n"
  return header.encode("ascii") + pixels.tobytes()


def write_pgm(field: SampledField, path: str | pathlib.Path) -> pathlib.Path:
  path = pathlib.Path(path)
  path.write_bytes(to_pgm(field))
  return path


def read_pgm(path: str | pathlib.Path) -> tuple[np.ndarray, float, float]:
  """Returns (pixels, lo, hi) of a PGM written by write_pgm."""
  data = pathlib.Path(path).read_bytes()
  parts = data.split(b"\n", 4)
  if len(parts) != 5 or parts[0] != b"P5":
    raise core.FieldFormatError(f"{path} is not a binary PGM file")
  match = _AFFINE_RE.fullmatch(parts[1].decode("ascii"))
  if not match:
    raise core.FieldFormatError(f"{path} lacks the affine scaling comment")
  width, height = (int(v) for v in parts[2].split())
  pixels = np.frombuffer(parts[4], dtype=np.uint8).reshape(height, width)
  return pixels, float(match.group(1)), float(match.group(2))


def load_fixture(name: str) -> SampledField:
  if name not in FIXTURES:
    raise core.FieldFormatError(
      f"Unknown fixture {name!r}; expected one of {', '.join(FIXTURES)}",
    )
  resource = importlib.resources.files("shearlet_subdivision") / "fixtures"
  return field_from_csv((resource / f"{name}.csv").read_text())


def load_field(source: str) -> SampledField:
  """Loads a bundled fixture by name or a field CSV by path."""
  if source in FIXTURES:
    return load_fixture(source)
  return read_csv(source)
