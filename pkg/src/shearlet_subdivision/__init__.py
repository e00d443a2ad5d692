from shearlet_subdivision import (
  convergence,
  core,
  dyadic,
  fieldio,
  fsd,
  grid,
  lattice,
  masks,
  subdivision,
  symbol,
)

__all__ = [
  "convergence",
  "core",
  "dyadic",
  "fieldio",
  "fsd",
  "grid",
  "lattice",
  "masks",
  "subdivision",
  "symbol",
]
