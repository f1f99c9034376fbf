"""Synthetic voxelized test clouds.

Solid shapes are the occupied boundary voxels of a filled body: a voxel is
kept when it is inside the body and at least one of its 6-neighbours is not.
"""

from __future__ import annotations

import numpy as np

from .geometry import VoxelCloud


def _grid(depth: int):
    n = 1 << depth
    ax = np.arange(n, dtype=np.float64) + 0.5
    return n, np.meshgrid(ax, ax, ax, indexing="ij")


def _boundary(inside: np.ndarray, depth: int) -> VoxelCloud:
    padded = np.pad(inside, 1, constant_values=False)
    interior = padded[1:-1, 1:-1, 1:-1].copy()
    for axis in range(3):
        for step in (-1, 1):
            interior &= np.roll(padded, step, axis=axis)[1:-1, 1:-1, 1:-1]
    shell = inside & ~interior
    return VoxelCloud(np.argwhere(shell), depth=depth)


def sphere(depth: int = 7, radius: float | None = None) -> VoxelCloud:
    n, (x, y, z) = _grid(depth)
    c = n / 2
    r = radius if radius is not None else 0.42 * n
    return _boundary((x - c) ** 2 + (y - c) ** 2 + (z - c) ** 2 <= r * r, depth)


def cube_shell(depth: int = 7, margin: int | None = None) -> VoxelCloud:
    n = 1 << depth
    m = margin if margin is not None else n // 8
    inside = np.zeros((n, n, n), dtype=bool)
    inside[m:n - m, m:n - m, m:n - m] = True
    return _boundary(inside, depth)


def torus(depth: int = 7, major: float | None = None, minor: float | None = None) -> VoxelCloud:
    n, (x, y, z) = _grid(depth)
    c = n / 2
    big = major if major is not None else 0.28 * n
    small = minor if minor is not None else 0.12 * n
    ring = np.sqrt((x - c) ** 2 + (y - c) ** 2) - big
    return _boundary(ring ** 2 + (z - c) ** 2 <= small * small, depth)


def filled_cube(side: int, origin: int = 0, depth: int | None = None) -> VoxelCloud:
    ax = np.arange(origin, origin + side)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    return VoxelCloud(g, depth=depth)


def lattice(count: int, spacing: int, origin: int = 0) -> VoxelCloud:
    """``count**3`` points on a regular lattice with the given spacing."""
    return VoxelCloud(filled_cube(count).points * spacing + origin)


def random_cloud(rng: np.random.Generator, n: int, depth: int) -> VoxelCloud:
    return VoxelCloud(rng.integers(0, 1 << depth, size=(n, 3)), depth=depth)


SHAPES = {"sphere": sphere, "cube": cube_shell, "torus": torus}
