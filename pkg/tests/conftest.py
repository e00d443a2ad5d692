import numpy as np
import pytest

from shearlet_subdivision import masks


@pytest.fixture(scope="session")
def dd_pair() -> masks.MaskPair:
  return masks.pair_from_name("dd")


@pytest.fixture
def rng() -> np.random.Generator:
  return np.random.default_rng(20240611)
