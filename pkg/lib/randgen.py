"""Seeded sampling of random matrices (D1-D4) and sparse supports.

Every random draw goes through a numpy ``Generator`` over the counter-based
Philox bit generator, keyed by a seed from :func:`derive_seed`. Normal
variates come from the Box-Muller transform applied to pairs of uniforms
(cosine branch first, then sine branch), so a stream depends only on its key.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class SamplingError(ValueError):
    """Raised for invalid sampling arguments."""


class DistributionKind(str, Enum):
    D1 = "D1"  # Normal(0, 1)
    D2 = "D2"  # Normal(100, 1)
    D3 = "D3"  # Uniform(0, 100)
    D4 = "D4"  # column means ~ Uniform(0, 100), entries Normal(mean, 1)


@dataclass(frozen=True)
class DistributionSpec:
    kind: DistributionKind

    @classmethod
    def parse(cls, name: Union[str, "DistributionSpec"]) -> "DistributionSpec":
        if isinstance(name, DistributionSpec):
            return name
        try:
            return cls(DistributionKind(str(name).strip().upper()))
        except ValueError:
            raise SamplingError(f"unknown distribution {name!r}; expected one of D1, D2, D3, D4")

    @property
    def name(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class SeedSpec:
    base_seed: int
    path: Tuple[int, ...] = field(default_factory=tuple)

    def child(self, *path: int) -> "SeedSpec":
        return SeedSpec(self.base_seed, self.path + tuple(int(p) for p in path))

    @property
    def value(self) -> int:
        return derive_seed(self.base_seed, *self.path)


def _splitmix64(value: int) -> int:
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, *path: int) -> int:
    """Mix ``base`` and ``path`` into a 64-bit seed.

    The SplitMix64 finalizer is applied to the base, then once per path
    element after xor-ing the element in. Each step is a bijection, so two
    paths of equal length sharing a prefix never collide on their next
    element, and the result depends on element order.
    """
    state = _splitmix64(int(base) & MASK64)
    for element in path:
        state = _splitmix64(state ^ (int(element) & MASK64))
    return state


def check_unique_seeds(seeds: Iterable[int]) -> None:
    seen = set()
    for seed in seeds:
        if seed in seen:
            raise SamplingError(f"derived seed collision on {seed:#018x}")
        seen.add(seed)


def make_rng(seed: Union[int, SeedSpec]) -> np.random.Generator:
    key = seed.value if isinstance(seed, SeedSpec) else int(seed) & MASK64
    return np.random.Generator(np.random.Philox(key=key))


def normal_variates(rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` standard normals with the Box-Muller transform."""
    pairs = (size + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1], keeps log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:size]


def sample_matrix(spec: Union[str, DistributionSpec], m: int, n: int, seed: Union[int, SeedSpec]) -> np.ndarray:
    """Draw an ``m x n`` matrix with i.i.d. columns from ``spec``.

    For D4 the n column means are drawn first, then each column's entries.
    """
    spec = DistributionSpec.parse(spec)
    if m < 1 or n < 1:
        raise SamplingError(f"matrix dimensions must be positive, got {m}x{n}")
    rng = make_rng(seed)
    kind = spec.kind

    if kind is DistributionKind.D1:
        return normal_variates(rng, m * n).reshape(m, n)
    if kind is DistributionKind.D2:
        return 100.0 + normal_variates(rng, m * n).reshape(m, n)
    if kind is DistributionKind.D3:
        return 100.0 * rng.random((m, n))

    means = 100.0 * rng.random(n)
    columns = normal_variates(rng, m * n).reshape(n, m)
    return (columns + means[:, None]).T.copy()


def sample_support(n: int, k: int, seed: Union[int, SeedSpec]) -> Tuple[int, ...]:
    """Uniform size-k subset of range(n) by a partial Fisher-Yates shuffle."""
    if not (1 <= k <= n):
        raise SamplingError(f"sparsity k must satisfy 1 <= k <= n, got k={k}, n={n}")
    rng = make_rng(seed)
    order = np.arange(n)
    for i in range(k):
        j = i + int(rng.integers(n - i))
        order[i], order[j] = order[j], order[i]
    return tuple(sorted(int(j) for j in order[:k]))

