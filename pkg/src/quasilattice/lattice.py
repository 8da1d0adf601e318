"""Cube partition of R^d, finite cube-union regions, occupancy maps and the
dilute/dense indicators."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np


@dataclass(frozen=True)
class CubeGrid:
    """Partition of R^d into half-open cubes of edge ``a`` centered at a*Z^d."""

    a: float
    d: int

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("edge length must be positive")
        if self.d < 1:
            raise ValueError("dimension must be a positive integer")


def cube_of(grid: CubeGrid, x) -> tuple:
    """Index of the cube containing x.

    Binning is floor(x/a + 1/2) per axis, lower edge inclusive and upper
    edge exclusive.  No epsilon adjustment: this is the single source of
    truth for seam points.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return tuple(int(v) for v in np.floor(x / grid.a + 0.5))


def cubes_of(grid: CubeGrid, points: np.ndarray) -> np.ndarray:
    """Vectorized cube_of for an (n, d) point array; returns (n, d) ints."""
    return np.floor(points / grid.a + 0.5).astype(np.int64)


@dataclass(frozen=True)
class Region:
    """A finite union of whole cubes, stored as a sorted index set."""

    grid: CubeGrid
    cubes: tuple

    def __post_init__(self):
        object.__setattr__(self, "cubes", tuple(sorted(set(self.cubes))))
        for c in self.cubes:
            if len(c) != self.grid.d:
                raise ValueError("cube index arity does not match dimension")

    @classmethod
    def box(cls, grid: CubeGrid, shape) -> "Region":
        """Axis-aligned block of cubes with indices 0..shape[i]-1 per axis."""
        if len(shape) != grid.d:
            raise ValueError("box shape arity does not match dimension")
        idx = itertools.product(*(range(int(n)) for n in shape))
        return cls(grid, tuple(idx))

    @property
    def n_cubes(self) -> int:
        return len(self.cubes)

    @property
    def volume(self) -> float:
        return self.n_cubes * self.grid.a ** self.grid.d

    def contains_point(self, x) -> bool:
        return cube_of(self.grid, x) in set(self.cubes)

    def cube_centers(self) -> np.ndarray:
        return np.asarray(self.cubes, dtype=float).reshape(-1, self.grid.d) \
            * self.grid.a

    def cube_lower_corners(self) -> np.ndarray:
        return (np.asarray(self.cubes, dtype=float).reshape(-1, self.grid.d)
                - 0.5) * self.grid.a


def as_points(gamma) -> np.ndarray:
    """Normalize a configuration to an (n, d) float array."""
    pts = np.asarray(gamma, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, 1 if pts.ndim < 2 else pts.shape[-1])
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    return pts


def occupancy(grid: CubeGrid, gamma) -> dict:
    """Point count per cube; keys are cube-index tuples."""
    pts = as_points(gamma)
    counts: dict = {}
    if len(pts) == 0:
        return counts
    for row in cubes_of(grid, pts):
        key = tuple(int(v) for v in row)
        counts[key] = counts.get(key, 0) + 1
    return counts


def chi_minus(grid: CubeGrid, region: Region, gamma) -> int:
    """1 iff no cube of the region holds more than one point of gamma."""
    occ = occupancy(grid, gamma)
    region_set = set(region.cubes)
    for key, n in occ.items():
        if n > 1 and key in region_set:
            return 0
    return 1


def chi_plus_cube(grid: CubeGrid, cube: tuple, gamma) -> int:
    """1 iff the given cube holds at least two points of gamma."""
    return int(occupancy(grid, gamma).get(cube, 0) >= 2)


def classify(grid: CubeGrid, region: Region, gamma) -> str:
    """'dilute' (all occupied cubes hold one point), 'dense' (all hold >= 2)
    or 'mixed'."""
    pts = as_points(gamma)
    region_set = set(region.cubes)
    occ = occupancy(grid, pts)
    for key in occ:
        if key not in region_set:
            raise ValueError(f"point in cube {key} lies outside the region")
    if not occ:
        return "dilute"
    counts = list(occ.values())
    if all(n <= 1 for n in counts):
        return "dilute"
    if all(n >= 2 for n in counts):
        return "dense"
    return "mixed"


def cube_subsets(region: Region, k: int) -> Iterator[tuple]:
    """All k-subsets of the region's cubes, in deterministic sorted order."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return itertools.combinations(region.cubes, k)


def uniform_points_in_region(region: Region, n: int, rng) -> np.ndarray:
    """n points uniform on the region (uniform cube, then uniform offset)."""
    d, a = region.grid.d, region.grid.a
    corners = region.cube_lower_corners()
    which = rng.integers(0, len(corners), size=n)
    return corners[which] + rng.random((n, d)) * a


def uniform_points_in_cubes(grid: CubeGrid, cubes, rng) -> np.ndarray:
    """One uniform point inside each listed cube."""
    a = grid.a
    corners = (np.asarray(cubes, dtype=float).reshape(-1, grid.d) - 0.5) * a
    return corners + rng.random(corners.shape) * a
