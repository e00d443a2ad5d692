import abc
import dataclasses
import json
from typing import TYPE_CHECKING, Any, ClassVar, Self

if TYPE_CHECKING:
  from shearlet_subdivision.lattice import Mat2


class SubdivisionError(ValueError):
  """Base class for errors raised by shearlet_subdivision."""


class PeriodMismatchError(SubdivisionError):
  pass


class NotInIdealError(SubdivisionError):
  pass


class WindowTooSmallError(SubdivisionError):
  pass


class ShapeMismatchError(SubdivisionError):
  pass


class NotInterpolatoryError(SubdivisionError):
  pass


class UnreachableDirectionError(SubdivisionError):
  pass


class MaskFormatError(SubdivisionError):
  pass


class FieldFormatError(SubdivisionError):
  pass


class MissingNodeError(SubdivisionError, KeyError):
  def __str__(self) -> str:
    return str(self.args[0]) if self.args else ""


@dataclasses.dataclass(frozen=True)
class Config(abc.ABC):
  _registry: ClassVar[dict[str, type["Config"]]] = {}

  def __init_subclass__(cls, **kwargs: dict[str, Any]) -> None:
    super().__init_subclass__(**kwargs)
    # Only register concrete subclasses. An abstract class will have a
    # non-empty __abstractmethods__ set.
    if not getattr(cls, "__abstractmethods__", set()):
      type_name = cls._get_type()
      if type_name in Config._registry:
        raise ValueError(f"Duplicate config type: {type_name}")
      Config._registry[type_name] = cls

  @classmethod
  def get_config_class(cls, config_type: str) -> type["Config"]:
    config_class = cls._registry.get(config_type)
    if config_class is None:
      raise ValueError(f"Unknown config type: {config_type}")
    return config_class

  def to_dict(self) -> dict[str, Any]:
    return dataclasses.asdict(self) | {"type": self._get_type()}

  def to_json(self) -> str:
    return json.dumps(self.to_dict(), indent=4)

  @classmethod
  @abc.abstractmethod
  def _get_type(cls) -> str: ...

  @classmethod
  @abc.abstractmethod
  def from_json(cls, config_dict: dict[str, Any]) -> Self: ...


def config_from_dict(data: dict[str, Any]) -> Config:
  data = dict(data)
  config_type = data.pop("type", None)
  if config_type is None:
    raise ValueError("Config JSON must contain a 'type' field.")

  config_class = Config.get_config_class(config_type)
  return config_class.from_json(data)


def config_from_json(json_string: str) -> Config:
  return config_from_dict(json.loads(json_string))


Frame = tuple[tuple[int, int], tuple[int, int]]


@dataclasses.dataclass(frozen=True)
class Boundary(Config):
  """How a field is extended beyond the window it stores."""

  @abc.abstractmethod
  def to_header(self) -> str: ...

  @abc.abstractmethod
  def check_frame(self, origin: tuple[int, int], shape: tuple[int, int]) -> None: ...

  @abc.abstractmethod
  def refine_frame(
    self,
    image_box: Frame,
    tap_box: Frame,
    w: "Mat2",
  ) -> tuple[tuple[int, int], tuple[int, int]]:
    """Returns (origin, shape) of the window holding the refined field.

    ``image_box`` and ``tap_box`` are inclusive (low, high) corners of the
    upsampled input positions and of the mask support.
    """
    ...

  @abc.abstractmethod
  def wrap(self, i: Any, j: Any, shape: tuple[int, int]) -> tuple[Any, Any]: ...

  @abc.abstractmethod
  def refined(self, w: "Mat2") -> "Boundary": ...

  @abc.abstractmethod
  def coarsened(self, w: "Mat2") -> "Boundary": ...


@dataclasses.dataclass(frozen=True)
class ZeroBoundary(Boundary):
  @classmethod
  def _get_type(cls) -> str:
    return "zero"

  @classmethod
  def from_json(cls, config_dict: dict[str, Any]) -> Self:
    del config_dict
    return cls()

  def to_header(self) -> str:
    return "zero"

  def check_frame(self, origin: tuple[int, int], shape: tuple[int, int]) -> None:
    del origin, shape

  def refine_frame(
    self,
    image_box: Frame,
    tap_box: Frame,
    w: "Mat2",
  ) -> tuple[tuple[int, int], tuple[int, int]]:
    del w
    (ilo1, ilo2), (ihi1, ihi2) = image_box
    (tlo1, tlo2), (thi1, thi2) = tap_box
    origin = (ilo1 + tlo1, ilo2 + tlo2)
    shape = (ihi1 + thi1 - origin[0] + 1, ihi2 + thi2 - origin[1] + 1)
    return origin, shape

  def wrap(self, i: Any, j: Any, shape: tuple[int, int]) -> tuple[Any, Any]:
    del shape
    return i, j

  def refined(self, w: "Mat2") -> "Boundary":
    del w
    return self

  def coarsened(self, w: "Mat2") -> "Boundary":
    raise PeriodMismatchError(
      "Subsampling needs a periodic field; pad it to a period first.",
    )


@dataclasses.dataclass(frozen=True)
class PeriodicBoundary(Boundary):
  """Periodic extension with period lattice P1 Z x P2 Z, stored from origin 0."""

  periods: tuple[int, int]

  def __post_init__(self) -> None:
    p1, p2 = self.periods
    if p1 <= 0 or p2 <= 0:
      raise PeriodMismatchError(f"Periods must be positive, got {self.periods}")

  @classmethod
  def _get_type(cls) -> str:
    return "periodic"

  @classmethod
  def from_json(cls, config_dict: dict[str, Any]) -> Self:
    p1, p2 = config_dict["periods"]
    return cls(periods=(int(p1), int(p2)))

  def to_header(self) -> str:
    return f"periodic:{self.periods[0]},{self.periods[1]}"

  def check_frame(self, origin: tuple[int, int], shape: tuple[int, int]) -> None:
    if tuple(origin) != (0, 0) or tuple(shape) != self.periods:
      raise PeriodMismatchError(
        f"Periodic field must cover one period from the origin, got origin "
        f"{origin} and shape {shape} for periods {self.periods}",
      )

  def refine_frame(
    self,
    image_box: Frame,
    tap_box: Frame,
    w: "Mat2",
  ) -> tuple[tuple[int, int], tuple[int, int]]:
    del image_box, tap_box
    return (0, 0), self.refined(w).periods

  def wrap(self, i: Any, j: Any, shape: tuple[int, int]) -> tuple[Any, Any]:
    return i % shape[0], j % shape[1]

  def refined(self, w: "Mat2") -> "PeriodicBoundary":
    (w11, w12), (w21, w22) = w.int_entries()
    p1, p2 = self.periods
    if w21 != 0 or w11 <= 0 or w22 <= 0:
      raise PeriodMismatchError(f"Unsupported dilation for periodic data: {w}")
    # W (0, P2) = (w12 P2, w22 P2) must lie in the rectangular output lattice.
    if (w12 * p2) % (w11 * p1) != 0:
      raise PeriodMismatchError(
        f"Periods {self.periods} are not compatible with the shear of {w}",
      )
    return PeriodicBoundary(periods=(w11 * p1, w22 * p2))

  def coarsened(self, w: "Mat2") -> "PeriodicBoundary":
    (w11, w12), (w21, w22) = w.int_entries()
    p1, p2 = self.periods
    if w21 != 0 or w11 <= 0 or w22 <= 0 or p1 % w11 or p2 % w22:
      raise PeriodMismatchError(
        f"Periods {self.periods} are not divisible by the dilation {w}",
      )
    if (w12 * (p2 // w22)) % p1 != 0:
      raise PeriodMismatchError(
        f"Periods {self.periods} are not compatible with the shear of {w}",
      )
    return PeriodicBoundary(periods=(p1 // w11, p2 // w22))


def boundary_from_header(text: str) -> Boundary:
  text = text.strip()
  if text == "zero":
    return ZeroBoundary()
  kind, _, rest = text.partition(":")
  if kind != "periodic" or not rest:
    raise FieldFormatError(f"Unknown boundary: {text!r}")
  try:
    p1, p2 = (int(x) for x in rest.split(","))
  except ValueError as e:
    raise FieldFormatError(f"Malformed periodic boundary: {text!r}") from e
  return PeriodicBoundary(periods=(p1, p2))
