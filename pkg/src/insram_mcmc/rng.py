# src/insram_mcmc/rng.py
import logging
from typing import Protocol

import numpy as np
import numpy.typing as npt

logger = logging.getLogger(__name__)

# Generator.random() yields multiples of 2**-53; this is the smallest positive one.
SMALLEST_UNIFORM = 2.0**-53


class RandomSource(Protocol):
    """Random draws consumed by the chain and the datapath model."""

    def uniform(self, size: int) -> npt.NDArray[np.float64]:
        """Draws on the open interval (0, 1)."""
        ...

    def normal(self, size: int) -> npt.NDArray[np.float64]: ...

    def lognormal(
        self, mean: float, sigma: float, size: int
    ) -> npt.NDArray[np.float64]: ...

    def bits(self, shape: tuple[int, ...], p: float) -> npt.NDArray[np.uint8]:
        """Independent Bernoulli(p) bits."""
        ...


class IdealRandomSource:
    """Software random source backed by a numpy Generator."""

    def __init__(self, seed: int | np.random.Generator) -> None:
        if isinstance(seed, np.random.Generator):
            self.generator = seed
        else:
            self.generator = np.random.default_rng(seed)
            logger.debug("IdealRandomSource seeded with %d", seed)

    def uniform(self, size: int) -> npt.NDArray[np.float64]:
        draws = self.generator.random(size)
        # u = 0 would make ln(u) infinite in the acceptance test
        return np.where(draws == 0.0, SMALLEST_UNIFORM, draws)

    def normal(self, size: int) -> npt.NDArray[np.float64]:
        return self.generator.standard_normal(size)

    def lognormal(
        self, mean: float, sigma: float, size: int
    ) -> npt.NDArray[np.float64]:
        return self.generator.lognormal(mean, sigma, size)

    def bits(self, shape: tuple[int, ...], p: float) -> npt.NDArray[np.uint8]:
        return (self.generator.random(shape) < p).astype(np.uint8)
