"""Shared fixtures for the insram_mcmc test suite."""

from collections.abc import Callable, Sequence

import numpy as np
import numpy.typing as npt
import pytest

from insram_mcmc.gmm import GmmModel


class ScriptedRandomSource:
    """Random source that replays fixed uniform and normal draws."""

    def __init__(
        self,
        uniforms: Sequence[float] = (),
        normals: Sequence[float] = (),
        bit_value: int = 1,
    ) -> None:
        self.uniforms = list(uniforms)
        self.normals = list(normals)
        self.bit_value = bit_value
        self.lognormal_calls = 0

    def uniform(self, size: int) -> npt.NDArray[np.float64]:
        draws, self.uniforms = self.uniforms[:size], self.uniforms[size:]
        return np.asarray(draws, dtype=np.float64)

    def normal(self, size: int) -> npt.NDArray[np.float64]:
        draws, self.normals = self.normals[:size], self.normals[size:]
        return np.asarray(draws, dtype=np.float64)

    def lognormal(
        self, mean: float, sigma: float, size: int
    ) -> npt.NDArray[np.float64]:
        self.lognormal_calls += 1
        return np.ones(size)

    def bits(self, shape: tuple[int, ...], p: float) -> npt.NDArray[np.uint8]:
        return np.full(shape, self.bit_value, dtype=np.uint8)


@pytest.fixture
def gmm_t() -> GmmModel:
    """The two-mixture test target: means (1, -1) and (-1, 1), unit sigma."""
    return GmmModel(
        weights=[0.5, 0.5],
        means=[[1.0, -1.0], [-1.0, 1.0]],
        stddevs=[[1.0, 1.0], [1.0, 1.0]],
    )


@pytest.fixture
def scripted_source() -> Callable[..., ScriptedRandomSource]:
    """Factory for random sources with scripted draws."""
    return ScriptedRandomSource
