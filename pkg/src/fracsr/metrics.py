"""D1 (point-to-point) geometry PSNR, RD curves and Bjontegaard delta rate."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, List, TextIO, Union

import numpy as np
from scipy import interpolate
from scipy.spatial import cKDTree

from .geometry import VoxelCloud

REPORT_FIELDS = ["cloud", "condition", "rate_bpp", "d1_psnr_db", "points_in", "points_out"]
RD_FIELDS = ["label", "rate_bpp", "d1_psnr_db"]


class MetricError(ValueError):
    pass


class BdRateWarning(UserWarning):
    """BD-rate computed with the piecewise-cubic fallback (fewer than 4 points)."""


def nearest_sq_distances(a: VoxelCloud, b: VoxelCloud) -> np.ndarray:
    """Exact integer squared distance from each point of ``a`` to its nearest in ``b``."""
    if len(a) == 0 or len(b) == 0:
        raise MetricError("nearest-neighbour distance needs two non-empty clouds")
    _, idx = cKDTree(b.points).query(a.points, k=1)
    diff = a.points - b.points[idx]
    return np.einsum("ij,ij->i", diff, diff)


def directional_mse(a: VoxelCloud, b: VoxelCloud) -> float:
    d2 = nearest_sq_distances(a, b)
    # integer sum is exact and independent of evaluation order
    return int(d2.sum(dtype=np.int64)) / len(d2)


def d1_psnr(a: VoxelCloud, b: VoxelCloud, peak: int | None = None, factor: float = 3.0) -> float:
    """Symmetric D1 PSNR in dB, ``10*log10(factor * peak**2 / mse)``.

    ``mse`` is the larger of the two directional errors; ``peak`` defaults
    to ``2**depth - 1`` of ``a``. Identical geometry gives ``inf``.
    """
    if peak is None:
        peak = a.peak
    if peak <= 0:
        raise MetricError(f"peak must be positive, got {peak}")
    mse = max(directional_mse(a, b), directional_mse(b, a))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(factor * peak * peak / mse)


@dataclass(frozen=True)
class RdPoint:
    rate: float
    quality: float

    def __post_init__(self):
        if not self.rate > 0:
            raise MetricError(f"rate must be positive, got {self.rate}")
        if math.isnan(self.quality) or self.quality == -math.inf:
            raise MetricError(f"invalid quality {self.quality}")


@dataclass
class RdCurve:
    points: List[RdPoint]
    label: str = ""

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.rate)
        rates = [p.rate for p in self.points]
        if any(r1 >= r2 for r1, r2 in zip(rates, rates[1:])):
            raise MetricError(f"duplicate rates in curve {self.label!r}")

    @classmethod
    def from_arrays(cls, rates: Iterable[float], qualities: Iterable[float], label: str = "") -> "RdCurve":
        return cls([RdPoint(float(r), float(q)) for r, q in zip(rates, qualities)], label)

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    @property
    def qualities(self) -> np.ndarray:
        return np.array([p.quality for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


def _log_rate_fit(curve: RdCurve, samples: np.ndarray, cubic: bool) -> np.ndarray:
    q, lr = curve.qualities, np.log10(curve.rates)
    if cubic:
        return np.polyval(np.polyfit(q, lr, 3), samples)
    order = np.argsort(q)
    return interpolate.pchip_interpolate(q[order], lr[order], samples)


def bd_rate(anchor: RdCurve, test: RdCurve, samples: int = 1000) -> float:
    """Average rate difference of ``test`` against ``anchor``, in percent.

    log10(rate) is fitted as a cubic in quality for both curves and the gap
    is averaged over the common quality range with the trapezoidal rule.
    Negative values mean ``test`` needs less rate for the same quality.
    Curves with 2 or 3 points fall back to PCHIP and emit a BdRateWarning.
    """
    for c in (anchor, test):
        if len(c) < 2:
            raise MetricError(f"curve {c.label!r} needs at least 2 points, has {len(c)}")
        if not np.all(np.isfinite(c.qualities)):
            raise MetricError(f"curve {c.label!r} has non-finite quality values")
        if len(np.unique(c.qualities)) != len(c):
            raise MetricError(f"curve {c.label!r} has repeated quality values")
    cubic = len(anchor) >= 4 and len(test) >= 4
    if not cubic:
        warnings.warn("fewer than 4 RD points, using piecewise-cubic interpolation", BdRateWarning, stacklevel=2)

    lo = max(anchor.qualities.min(), test.qualities.min())
    hi = min(anchor.qualities.max(), test.qualities.max())
    if not hi > lo:
        raise MetricError("the curves have no overlapping quality range")

    grid = np.linspace(lo, hi, samples)
    gap = _log_rate_fit(test, grid, cubic) - _log_rate_fit(anchor, grid, cubic)
    mean_gap = np.trapezoid(gap, grid) / (hi - lo)
    return float((10.0 ** mean_gap - 1.0) * 100.0)


def _float(value: str, what: str, lineno: int) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise MetricError(f"line {lineno}: bad {what} {value!r}") from exc


def load_rd_csv(source: Union[str, TextIO]) -> List[RdCurve]:
    """Group CSV rows into RD curves, one per label, sorted by rate.

    Accepts the ``label,rate_bpp,d1_psnr_db`` format and the pipeline report
    format, whose curves are labelled ``cloud/condition``. Report rows with
    an empty rate are skipped.
    """
    text = source if isinstance(source, str) else source.read()
    reader = csv.DictReader(io.StringIO(text))
    fields = reader.fieldnames or []
    if "label" in fields:
        label_of = lambda row: row["label"]
    elif {"cloud", "condition"} <= set(fields):
        label_of = lambda row: f"{row['cloud']}/{row['condition']}"
    else:
        raise MetricError(f"unrecognized RD CSV header {fields}")
    if not {"rate_bpp", "d1_psnr_db"} <= set(fields):
        raise MetricError("RD CSV needs rate_bpp and d1_psnr_db columns")

    grouped: Dict[str, List[RdPoint]] = {}
    for lineno, row in enumerate(reader, start=2):
        if None in row or any(v is None for v in row.values()):
            raise MetricError(f"line {lineno}: wrong number of fields")
        label = label_of(row)
        if row["rate_bpp"].strip() == "" and "label" not in fields:
            continue
        rate = _float(row["rate_bpp"], "rate", lineno)
        quality = _float(row["d1_psnr_db"], "quality", lineno)
        grouped.setdefault(label, []).append(RdPoint(rate, quality))
    return [RdCurve(points, label) for label, points in grouped.items()]


def dump_rd_csv(curves: Iterable[RdCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RD_FIELDS)
    for c in curves:
        for p in c.points:
            w.writerow([c.label, repr(p.rate), repr(p.quality)])
    return buf.getvalue()
