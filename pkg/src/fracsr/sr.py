"""Self-supervised fractional super-resolution of voxel clouds.

The occupancy LUT is trained on the input itself: the cloud is downscaled
once more by the same factor, and for every coarse voxel the 26-neighbour
occupancy code is paired with which of its children exist in the input.
Prediction walks the input, looks up each voxel's code and occupies the
children the LUT marks as majority-occupied. Nearest-neighbour upscaling
is always merged in so no parent is left without a child.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .geometry import (
    GeometryError,
    ScaleLike,
    VoxelCloud,
    _check_downscale,
    child_bounds,
    downscale,
    from_points,
    integer_upscale,
    translation_of,
    upscale_nni_points,
)

NEIGHBOR_OFFSETS = np.array(
    [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)], dtype=np.int64
)
# bit i of a code is the neighbour at NEIGHBOR_OFFSETS[i]; itertools.product
# enumerates (dx+1)*9 + (dy+1)*3 + (dz+1) with the centre (13) dropped.
SLOT_OFFSETS = np.array(list(itertools.product((0, 1), repeat=3)), dtype=np.int64)
FULL_CODE = (1 << 26) - 1
MAX_S_PRIME = 2048


class ScaleMismatch(GeometryError):
    pass


def neighbor_bit(offset: Sequence[int]) -> int:
    dx, dy, dz = offset
    i = (dx + 1) * 9 + (dy + 1) * 3 + (dz + 1)
    if i == 13:
        raise ValueError("the centre voxel has no neighbour bit")
    return i - 1 if i > 13 else i


def neighborhood_codes(cloud: VoxelCloud, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    codes = np.zeros(len(points), dtype=np.int64)
    for bit, off in enumerate(NEIGHBOR_OFFSETS):
        codes |= cloud.contains(points + off).astype(np.int64) << bit
    return codes


def neighborhood_code(cloud: VoxelCloud, v: Sequence[int]) -> int:
    return int(neighborhood_codes(cloud, np.asarray(v).reshape(1, 3))[0])


def valid_children(parents: np.ndarray, s: Fraction, t: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Candidate child coordinates ``(P, 8, 3)`` and their validity mask ``(P, 8)``.

    Slot ``(ox, oy, oz)`` is the child at the componentwise minimum of the
    preimage plus the offset. It is valid if it lies inside the preimage and
    not below ``t`` (no voxel of the source frame can sit there).
    """
    lo, hi = child_bounds(parents, s, t)
    cand = lo[:, None, :] + SLOT_OFFSETS[None, :, :]
    valid = np.all((cand < hi[:, None, :]) & (cand >= np.asarray(t, dtype=np.int64)), axis=2)
    return cand, valid


@dataclass(frozen=True)
class OccupancyLut:
    """Per-code, per-slot (occupied, total) counters for one scale factor.

    ``codes`` is sorted; ``occupied`` and ``total`` are ``(K, 8)`` arrays
    aligned with it, slots indexed ``ox*4 + oy*2 + oz``.
    """

    scale: Fraction
    codes: np.ndarray
    occupied: np.ndarray
    total: np.ndarray

    def __len__(self) -> int:
        return len(self.codes)

    def entry(self, code: int) -> np.ndarray | None:
        """``(8, 2)`` array of (occupied, total) for ``code``, or None if unseen."""
        i = np.searchsorted(self.codes, code)
        if i < len(self.codes) and self.codes[i] == code:
            return np.stack([self.occupied[i], self.total[i]], axis=1)
        return None

    @property
    def entries(self) -> Dict[int, np.ndarray]:
        return {int(c): np.stack([o, t], axis=1) for c, o, t in zip(self.codes, self.occupied, self.total)}

    def predict(self, codes: np.ndarray) -> np.ndarray:
        """Majority decision ``(M, 8)``: occupied iff total > 0 and 2*occupied >= total."""
        codes = np.asarray(codes, dtype=np.int64)
        out = np.zeros((len(codes), 8), dtype=bool)
        if len(self.codes) == 0 or len(codes) == 0:
            return out
        idx = np.searchsorted(self.codes, codes)
        idx[idx == len(self.codes)] = 0
        seen = self.codes[idx] == codes
        occ, tot = self.occupied[idx[seen]], self.total[idx[seen]]
        out[seen] = (tot > 0) & (2 * occ >= tot)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["code", "slot", "occupied", "total"])
        for c, occ, tot in zip(self.codes, self.occupied, self.total):
            for slot in range(8):
                if tot[slot]:
                    w.writerow([int(c), slot, int(occ[slot]), int(tot[slot])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, scale: ScaleLike) -> "OccupancyLut":
        rows = list(csv.DictReader(io.StringIO(text)))
        acc: Dict[int, np.ndarray] = {}
        for r in rows:
            counters = acc.setdefault(int(r["code"]), np.zeros((8, 2), dtype=np.int64))
            counters[int(r["slot"])] = (int(r["occupied"]), int(r["total"]))
        codes = np.array(sorted(acc), dtype=np.int64)
        stacked = np.array([acc[c] for c in codes], dtype=np.int64).reshape(-1, 8, 2)
        return cls(Fraction(scale), codes, stacked[:, :, 0], stacked[:, :, 1])


def build_lut(v_d: VoxelCloud, s: ScaleLike) -> OccupancyLut:
    s = _check_downscale(s)
    if s > 2:
        raise GeometryError(f"a single SR stage needs 1 < s <= 2, got {s}")
    if len(v_d) == 0:
        raise GeometryError("cannot train a LUT on an empty cloud")
    t = translation_of(v_d)
    v_dd = downscale(v_d, s, t)
    parents = v_dd.points
    codes = neighborhood_codes(v_dd, parents)
    cand, valid = valid_children(parents, s, t)
    hit = v_d.contains(cand.reshape(-1, 3)).reshape(valid.shape) & valid

    uniq, inverse = np.unique(codes, return_inverse=True)
    occupied = np.zeros((len(uniq), 8), dtype=np.int64)
    total = np.zeros((len(uniq), 8), dtype=np.int64)
    np.add.at(occupied, inverse, hit.astype(np.int64))
    np.add.at(total, inverse, valid.astype(np.int64))
    return OccupancyLut(s, uniq, occupied, total)


def apply_sr(v_d: VoxelCloud, s: ScaleLike, t: Sequence[int], lut: OccupancyLut) -> VoxelCloud:
    s = _check_downscale(s)
    if lut.scale != s:
        raise ScaleMismatch(f"LUT trained for s={lut.scale} applied with s={s}")
    if len(v_d) == 0:
        return VoxelCloud()
    parents = v_d.points
    cand, valid = valid_children(parents, s, t)
    keep = valid & lut.predict(neighborhood_codes(v_d, parents))
    predicted = cand[keep]
    return from_points(np.concatenate([predicted, upscale_nni_points(parents, s, t)]))


def factorize_scale(s: ScaleLike) -> List[Fraction]:
    """Split ``s`` into factors of 2 followed by one residue in (1, 2]."""
    s = _check_downscale(s)
    factors = []
    while s > 2:
        factors.append(Fraction(2))
        s /= 2
    factors.append(s)
    return factors


def super_resolve(v_d: VoxelCloud, s: ScaleLike, t: Sequence[int] = (0, 0, 0)) -> VoxelCloud:
    """Upscale ``v_d`` by ``s``, chaining SR stages when ``s > 2``.

    Only the last stage applies the translation ``t``.
    """
    factors = factorize_scale(s)
    current = v_d
    for i, f in enumerate(factors):
        if len(current) == 0:
            break
        stage_t = t if i == len(factors) - 1 else (0, 0, 0)
        current = apply_sr(current, f, stage_t, build_lut(current, f))
    return current


def choose_s_prime(v: VoxelCloud, keep_ratio: float = 0.95, max_s_prime: int = MAX_S_PRIME) -> int:
    """Largest power of two ``s'`` whose downscale keeps ``keep_ratio`` of the points."""
    if len(v) == 0:
        raise GeometryError("cannot choose s' for an empty cloud")
    t = translation_of(v)
    best = 1
    k = 2
    while k <= max_s_prime:
        if len(downscale(v, k, t)) >= keep_ratio * len(v):
            best = k
        k *= 2
    return best


def _check_s_prime(s_prime: int) -> int:
    s_prime = int(s_prime)
    if s_prime < 1 or s_prime & (s_prime - 1):
        raise GeometryError(f"s' must be a power of two, got {s_prime}")
    return s_prime


def densify(v: VoxelCloud, s_prime: int) -> Tuple[VoxelCloud, Tuple[int, int, int]]:
    """Pre-coding downscale by ``s'``; returns the dense cloud and its offset."""
    s_prime = _check_s_prime(s_prime)
    if s_prime == 1:
        return v, (0, 0, 0)
    t0 = translation_of(v)
    return downscale(v, s_prime, t0), t0


def restore(v: VoxelCloud, s_prime: int, offset: Sequence[int]) -> VoxelCloud:
    """Undo :func:`densify`: integer upscale by ``s'`` and shift back."""
    up = integer_upscale(v, _check_s_prime(s_prime))
    if any(offset):
        up = from_points(up.points + np.asarray(offset, dtype=np.int64))
    return up


def dus_super_resolve(
    v: VoxelCloud,
    s: ScaleLike,
    s_prime: int,
    decoded: VoxelCloud | None = None,
) -> VoxelCloud:
    """Down-up-scaling wrapper around :func:`super_resolve` for sparse clouds.

    Without ``decoded`` the codec is simulated by an exact downscale of the
    densified cloud; otherwise ``decoded`` must be the codec output for it.
    """
    s = _check_downscale(s)
    dense, t0 = densify(v, s_prime)
    t1 = translation_of(dense)
    v_d = downscale(dense, s, t1) if decoded is None else decoded
    return restore(super_resolve(v_d, s, t1), s_prime, t0)
