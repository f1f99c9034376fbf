"""Voxel clouds and the exact rational transforms between resolutions.

Every scale operation works on integers only. A coordinate ``v`` maps to
``round((v - t) / s)`` with ties rounded up, which for ``s = num/den`` is
``floor((2*(v - t)*den + num) / (2*num))``.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

MAX_DEPTH = 24
# 3 * 21 bits fit a signed 64-bit key
_PACK_BITS = 21

Triple = Tuple[int, int, int]
ScaleLike = Union[Fraction, int, str]


class GeometryError(ValueError):
    pass


def as_scale(s: ScaleLike) -> Fraction:
    """Parse ``"4/3"``, ``2`` or a Fraction into a reduced Fraction."""
    try:
        frac = Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise GeometryError(f"invalid scale factor {s!r}") from exc
    if frac <= 0:
        raise GeometryError(f"scale factor must be positive, got {frac}")
    return frac


def _check_downscale(s: Fraction) -> Fraction:
    s = as_scale(s)
    if s <= 1:
        raise GeometryError(f"scale factor must be > 1, got {s}")
    return s


def depth_for(max_coord: int) -> int:
    """Smallest bit depth d >= 1 with max_coord < 2**d."""
    return max(1, int(max_coord).bit_length())


def _pack(points: np.ndarray) -> np.ndarray:
    p = points.astype(np.int64, copy=False)
    return (p[:, 0] << (2 * _PACK_BITS)) | (p[:, 1] << _PACK_BITS) | p[:, 2]


class VoxelCloud:
    """An immutable, deduplicated set of integer voxel coordinates.

    Points are stored as an ``(N, 3)`` int64 array in lexicographic order,
    so two clouds holding the same set compare equal and iterate the same.
    """

    __slots__ = ("_points", "_depth", "_keys", "_set")

    def __init__(self, points: Union[np.ndarray, Iterable[Sequence[int]]] = (), depth: int | None = None):
        arr = np.asarray(points if not isinstance(points, (set, frozenset)) else list(points))
        if arr.size == 0:
            arr = np.zeros((0, 3), dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise GeometryError(f"expected an (N, 3) array of coordinates, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.round(arr)):
                raise GeometryError("voxel coordinates must be integers")
        arr = arr.astype(np.int64)

        if len(arr) and arr.min() < 0:
            raise GeometryError("voxel coordinates must be non-negative")
        max_coord = int(arr.max()) if len(arr) else 0
        if depth is None:
            depth = depth_for(max_coord)
        if not 0 < depth <= MAX_DEPTH:
            raise GeometryError(f"depth must lie in [1, {MAX_DEPTH}], got {depth}")
        if max_coord >= 1 << depth:
            raise GeometryError(f"coordinate {max_coord} does not fit in {depth} bits")

        self._depth = int(depth)
        self._set = None
        if depth <= _PACK_BITS:
            keys = np.unique(_pack(arr))
            self._keys = keys
            mask = (1 << _PACK_BITS) - 1
            arr = np.stack([keys >> (2 * _PACK_BITS), (keys >> _PACK_BITS) & mask, keys & mask], axis=1)
        else:
            self._keys = None
            if len(arr):
                arr = np.unique(arr, axis=0)
        arr.flags.writeable = False
        self._points = arr

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def depth(self) -> int:
        return self._depth

    @property
    def peak(self) -> int:
        return (1 << self._depth) - 1

    def __len__(self) -> int:
        return len(self._points)

    def __iter__(self):
        return (tuple(int(c) for c in p) for p in self._points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VoxelCloud):
            return NotImplemented
        return np.array_equal(self._points, other._points)

    def __hash__(self) -> int:
        return hash(self._points.tobytes())

    def __repr__(self) -> str:
        return f"VoxelCloud({len(self)} points, depth={self._depth})"

    def __contains__(self, v: Sequence[int]) -> bool:
        return bool(self.contains(np.asarray(v, dtype=np.int64).reshape(1, 3))[0])

    def contains(self, queries: np.ndarray) -> np.ndarray:
        """Vectorized membership test for an ``(M, 3)`` array of coordinates."""
        q = np.asarray(queries, dtype=np.int64).reshape(-1, 3)
        if self._keys is not None:
            inside = np.all((q >= 0) & (q < (1 << _PACK_BITS)), axis=1)
            out = np.zeros(len(q), dtype=bool)
            if len(self._keys) == 0 or not inside.any():
                return out
            keys = _pack(q[inside])
            idx = np.searchsorted(self._keys, keys)
            idx[idx == len(self._keys)] = 0
            out[inside] = self._keys[idx] == keys
            return out
        if self._set is None:
            self._set = set(map(tuple, self._points.tolist()))
        return np.fromiter((tuple(r) in self._set for r in q.tolist()), dtype=bool, count=len(q))

    def as_set(self) -> set:
        return set(map(tuple, self._points.tolist()))


def from_points(points: np.ndarray, max_depth: int = MAX_DEPTH) -> VoxelCloud:
    """Build a cloud with the depth inferred from its largest coordinate."""
    points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    if len(points) and int(points.max()) >= 1 << max_depth:
        raise GeometryError(f"coordinates overflow the {max_depth}-bit depth cap")
    return VoxelCloud(points)


def translation_of(cloud: VoxelCloud) -> Triple:
    if len(cloud) == 0:
        raise GeometryError("translation of an empty cloud is undefined")
    return tuple(int(c) for c in cloud.points.min(axis=0))


def shift(cloud: VoxelCloud, d: Sequence[int]) -> VoxelCloud:
    return from_points(cloud.points + np.asarray(d, dtype=np.int64))


def downscale_points(points: np.ndarray, s: ScaleLike, t: Sequence[int] = (0, 0, 0)) -> np.ndarray:
    """Map each row ``v`` to ``round((v - t) / s)`` without deduplication."""
    s = _check_downscale(s)
    u = np.asarray(points, dtype=np.int64) - np.asarray(t, dtype=np.int64)
    return (2 * u * s.denominator + s.numerator) // (2 * s.numerator)


def downscale(cloud: VoxelCloud, s: ScaleLike, t: Sequence[int] | None = None) -> VoxelCloud:
    if t is None:
        t = translation_of(cloud) if len(cloud) else (0, 0, 0)
    if len(cloud) and np.any(cloud.points.min(axis=0) < np.asarray(t)):
        raise GeometryError(f"translation {tuple(t)} exceeds the cloud minimum")
    return from_points(downscale_points(cloud.points, s, t))


def child_bounds(p: np.ndarray, s: ScaleLike, t: Sequence[int] = (0, 0, 0)) -> Tuple[np.ndarray, np.ndarray]:
    """Per-axis half-open ranges ``[lo, hi)`` of the preimage of parents ``p``.

    ``u`` maps to ``p`` iff ``num*(2p - 1) <= 2*u*den < num*(2p + 1)``.
    """
    s = _check_downscale(s)
    p = np.asarray(p, dtype=np.int64)
    num, den = s.numerator, s.denominator
    # ceil(a / b) == -((-a) // b)
    lo = -((-num * (2 * p - 1)) // (2 * den))
    hi = -((-num * (2 * p + 1)) // (2 * den))
    t = np.asarray(t, dtype=np.int64)
    return lo + t, hi + t


def children_of(p: Sequence[int], s: ScaleLike, t: Sequence[int] = (0, 0, 0)) -> list:
    """All integer coordinates whose downscaled image is exactly ``p``."""
    lo, hi = child_bounds(np.asarray(p).reshape(3), s, t)
    xs, ys, zs = (range(int(a), int(b)) for a, b in zip(lo, hi))
    return [(x, y, z) for x in xs for y in ys for z in zs]


def upscale_nni_points(points: np.ndarray, s: ScaleLike, t: Sequence[int] = (0, 0, 0)) -> np.ndarray:
    s = _check_downscale(s)
    p = np.asarray(points, dtype=np.int64)
    return (2 * p * s.numerator + s.denominator) // (2 * s.denominator) + np.asarray(t, dtype=np.int64)


def upscale_nni(cloud: VoxelCloud, s: ScaleLike, t: Sequence[int] = (0, 0, 0)) -> VoxelCloud:
    """Nearest-neighbour interpolation: ``round(s * p) + t`` per point."""
    return from_points(upscale_nni_points(cloud.points, s, t))


def integer_upscale(cloud: VoxelCloud, k: int) -> VoxelCloud:
    k = int(k)
    if k < 1 or k & (k - 1):
        raise GeometryError(f"upscale factor must be a power of two, got {k}")
    return from_points(cloud.points * k)
