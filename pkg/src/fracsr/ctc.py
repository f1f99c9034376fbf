"""G-PCC common test condition rate points (lossy geometry)."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Union

from .geometry import GeometryError

# positionQuantizationScale per geometry precision and rate id
POSITION_QUANTIZATION_SCALE = {
    10: {6: Fraction(15, 16), 5: Fraction(7, 8), 4: Fraction(3, 4), 3: Fraction(1, 2), 2: Fraction(1, 4), 1: Fraction(1, 8)},
    11: {6: Fraction(7, 8), 5: Fraction(3, 4), 4: Fraction(1, 2), 3: Fraction(1, 4), 2: Fraction(1, 8), 1: Fraction(1, 16)},
}


@dataclass(frozen=True)
class CtcRatePoint:
    precision: int
    rate_id: int
    pqs: Fraction

    @property
    def scale(self) -> Fraction:
        return 1 / self.pqs

    @property
    def label(self) -> str:
        return f"R{self.rate_id}"


def _rate_number(rate_id: Union[int, str]) -> int:
    text = str(rate_id).strip().upper()
    if text.startswith("R"):
        text = text[1:]
    if not text.isdigit():
        raise GeometryError(f"invalid rate id {rate_id!r}")
    return int(text)


def ctc_rate_point(precision: int, rate_id: Union[int, str]) -> CtcRatePoint:
    precision = int(precision)
    rid = _rate_number(rate_id)
    try:
        pqs = POSITION_QUANTIZATION_SCALE[precision][rid]
    except KeyError:
        raise GeometryError(f"no CTC rate point for precision {precision}, R{rid}") from None
    return CtcRatePoint(precision, rid, pqs)


def ctc_scale(precision: int, rate_id: Union[int, str]) -> Fraction:
    return ctc_rate_point(precision, rate_id).scale


def parse_ctc(spec: str) -> List[CtcRatePoint]:
    """Parse ``"10:R4"``, ``"11:R1,11:R2"`` or ``"10:all"`` (R1..R6 in order)."""
    points = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        prec, sep, rid = item.partition(":")
        if not sep or not prec.strip().isdigit():
            raise GeometryError(f"CTC rate point must look like PREC:RID, got {item!r}")
        if rid.strip().lower() == "all":
            points.extend(ctc_rate_point(int(prec), r) for r in range(1, 7))
        else:
            points.append(ctc_rate_point(int(prec), rid))
    if not points:
        raise GeometryError("empty CTC rate point list")
    return points
