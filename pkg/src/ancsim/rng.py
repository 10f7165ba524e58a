"""Deterministic random streams and Wiener-process increments.

Every run of the simulator owns one stream derived from (master_seed,
run_index).  Draws are produced by a fixed, documented pipeline so that
golden files stay portable:

* bit source: Philox4x64-10 counter-based generator, keyed by
  ``numpy.random.SeedSequence(master_seed, spawn_key=(run_index,))``;
* uniforms: ``((word >> 11) + 0.5) * 2**-53`` from raw 64-bit words,
  strictly inside (0, 1);
* normals: inverse normal CDF (``scipy.special.ndtri``) of those uniforms.

No numpy ``Generator`` methods are used for the draws themselves, so the
stream does not depend on numpy's distribution implementations.
"""

from dataclasses import dataclass

import numpy as np
from numpy.random import Philox, SeedSequence
from scipy.special import ndtri

__all__ = ["NormalStream", "WienerPath", "derive_stream", "wiener_increments"]

_U64_TO_UNIT = 2.0 ** -53


@dataclass
class WienerPath:
    """Increments of an r-dimensional standard Wiener process on a fixed grid.

    Each entry of ``increments`` (shape ``(steps, dim)``) is distributed
    Normal(0, dt), independent across steps and coordinates.
    """

    dim: int
    dt: float
    increments: np.ndarray


class NormalStream:
    """A seedable stream of uniform/normal variates backed by Philox."""

    def __init__(self, seed_seq: SeedSequence):
        self._bitgen = Philox(seed_seq)

    def _raw(self, count: int) -> np.ndarray:
        return self._bitgen.random_raw(count)

    def uniform(self, count: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Uniform draws on (low, high), endpoints excluded."""
        u = ((self._raw(count) >> np.uint64(11)) + 0.5) * _U64_TO_UNIT
        return low + (high - low) * u

    def normal(self, count: int) -> np.ndarray:
        """Standard normal draws via inverse-CDF of Philox uniforms."""
        return ndtri(self.uniform(count))


def derive_stream(master_seed: int, run_index: int) -> NormalStream:
    """Deterministic per-run stream; same (seed, index) yields identical draws."""
    return NormalStream(SeedSequence(master_seed, spawn_key=(run_index,)))


def wiener_increments(stream: NormalStream, r: int, steps: int, dt: float) -> WienerPath:
    """Draw ``steps`` increments of an r-dimensional Wiener process.

    Entries are i.i.d. Normal(0, dt).  Raises ValueError for dt <= 0 or r < 1.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if r < 1:
        raise ValueError(f"noise dimension must be >= 1, got {r}")
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    z = stream.normal(steps * r).reshape(steps, r)
    return WienerPath(dim=r, dt=dt, increments=z * np.sqrt(dt))
