import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from fracsr.geometry import VoxelCloud
from fracsr.metrics import (
    BdRateWarning,
    MetricError,
    RdCurve,
    RdPoint,
    bd_rate,
    d1_psnr,
    directional_mse,
    dump_rd_csv,
    load_rd_csv,
)

A_RATES = [0.05, 0.11, 0.24, 0.52, 1.1, 2.3]
A_PSNR = [58.1, 61.0, 64.2, 67.9, 71.3, 74.0]


def curve(rates, psnr, label=""):
    return RdCurve.from_arrays(rates, psnr, label)


def bd_rate_analytic(anchor, test):
    """Exact integral of the fitted cubics, for comparison with the sampled rule."""
    lo = max(min(anchor.qualities), min(test.qualities))
    hi = min(max(anchor.qualities), max(test.qualities))
    pa = np.polyint(np.polyfit(anchor.qualities, np.log10(anchor.rates), 3))
    pt = np.polyint(np.polyfit(test.qualities, np.log10(test.rates), 3))
    diff = (np.polyval(pt, hi) - np.polyval(pt, lo) - np.polyval(pa, hi) + np.polyval(pa, lo)) / (hi - lo)
    return (10 ** diff - 1) * 100


def test_directional_mse_examples():
    a = VoxelCloud([(0, 0, 0)])
    assert directional_mse(a, a) == 0
    assert directional_mse(a, VoxelCloud([(1, 0, 0)])) == 1.0
    assert directional_mse(VoxelCloud([(0, 0, 0), (2, 0, 0)]), a) == 2.0


def test_directional_mse_empty():
    with pytest.raises(MetricError):
        directional_mse(VoxelCloud(), VoxelCloud([(0, 0, 0)]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.integers(1, 300), st.integers(0, 2**32 - 1))
def test_directional_mse_matches_brute_force(na, nb, seed):
    rng = np.random.default_rng(seed)
    a = VoxelCloud(rng.integers(0, 64, size=(na, 3)))
    b = VoxelCloud(rng.integers(0, 64, size=(nb, 3)))
    assert directional_mse(a, b) == float(oracles.directional_mse(a.points, b.points))


def test_d1_psnr_closed_form():
    a, b = VoxelCloud([(0, 0, 0)]), VoxelCloud([(1, 0, 0)])
    assert d1_psnr(a, b, 1023) == pytest.approx(10 * math.log10(3 * 1023**2), abs=1e-12)
    assert d1_psnr(a, b, 1023) == pytest.approx(64.97, abs=0.01)
    assert d1_psnr(a, a, 1023) == math.inf


def test_d1_psnr_default_peak_and_factor():
    a = VoxelCloud([(0, 0, 0), (1023, 0, 0)])
    b = VoxelCloud([(1, 0, 0), (1023, 0, 0)])
    assert a.peak == 1023
    assert d1_psnr(a, b) == d1_psnr(a, b, 1023)
    assert d1_psnr(a, b, 1023, factor=1.0) == pytest.approx(d1_psnr(a, b, 1023) - 10 * math.log10(3))
    with pytest.raises(MetricError):
        d1_psnr(a, b, 0)


def test_d1_psnr_symmetric(rng):
    for _ in range(10):
        a = VoxelCloud(rng.integers(0, 100, size=(rng.integers(1, 200), 3)))
        b = VoxelCloud(rng.integers(0, 100, size=(rng.integers(1, 200), 3)))
        assert d1_psnr(a, b, 127) == d1_psnr(b, a, 127)


def test_d1_psnr_monotone_when_point_moves_away():
    a = VoxelCloud([(10, 10, 10), (20, 10, 10), (30, 10, 10)])
    previous = math.inf
    for dz in range(1, 8):
        b = VoxelCloud([(10, 10, 10), (20, 10, 10), (30, 10, 10 + dz)])
        psnr = d1_psnr(a, b, 255)
        assert psnr <= previous
        previous = psnr


def test_rd_point_and_curve_validation():
    with pytest.raises(MetricError):
        RdPoint(0.0, 30.0)
    with pytest.raises(MetricError):
        RdPoint(1.0, float("nan"))
    assert RdPoint(1.0, math.inf).quality == math.inf
    with pytest.raises(MetricError):
        curve([1.0, 1.0], [30, 31])
    c = curve([2.0, 1.0], [31, 30])
    assert c.rates.tolist() == [1.0, 2.0]


def test_bd_rate_identical_is_zero():
    a = curve(A_RATES, A_PSNR)
    assert abs(bd_rate(a, a)) < 1e-6


def test_bd_rate_constant_shift():
    a = curve(A_RATES, A_PSNR)
    b = curve([r * 1.10 for r in A_RATES], A_PSNR)
    assert bd_rate(a, b) == pytest.approx(10.0, abs=0.01)
    assert bd_rate(b, a) == pytest.approx(100 / 1.1 - 100, abs=0.01)


def test_bd_rate_matches_analytic_integral():
    a = curve(A_RATES, A_PSNR)
    b = curve([0.04, 0.1, 0.2, 0.45, 0.9], [58.9, 62.2, 65.0, 69.1, 72.2])
    assert bd_rate(a, b) == pytest.approx(bd_rate_analytic(a, b), abs=1e-3)


def test_bd_rate_log_gap_is_antisymmetric():
    a = curve(A_RATES, A_PSNR)
    b = curve([0.04, 0.1, 0.2, 0.45, 0.9], [58.9, 62.2, 65.0, 69.1, 72.2])
    forward, backward = bd_rate(a, b), bd_rate(b, a)
    assert math.log10(1 + forward / 100) == pytest.approx(-math.log10(1 + backward / 100), abs=1e-12)


@pytest.mark.parametrize("gain", [0.95, 0.97, 1.03, 1.06])
def test_bd_rate_nearly_antisymmetric_on_smooth_curves(gain):
    q = np.linspace(55, 75, 6)
    a = curve(0.01 * 1.6 ** (q - 55), q)
    b = curve(0.01 * 1.6 ** (q - 55) * gain * (1 + 0.01 * np.sin(q)), q)
    assert abs(bd_rate(a, b) + bd_rate(b, a)) < 0.5


def test_bd_rate_order_and_label_invariant():
    a = curve(A_RATES, A_PSNR, "anchor")
    b = curve([0.04, 0.1, 0.2, 0.45, 0.9], [58.9, 62.2, 65.0, 69.1, 72.2], "x")
    b2 = curve([0.9, 0.2, 0.04, 0.45, 0.1], [72.2, 65.0, 58.9, 69.1, 62.2], "renamed")
    assert bd_rate(a, b) == bd_rate(a, b2)


def test_bd_rate_fallback_warns():
    a = curve([0.1, 0.3, 0.9], [60, 65, 70])
    b = curve([0.11, 0.33, 0.99], [60, 65, 70])
    with pytest.warns(BdRateWarning):
        assert bd_rate(a, b) == pytest.approx(10.0, abs=0.01)


def test_bd_rate_errors():
    a = curve(A_RATES, A_PSNR)
    with pytest.raises(MetricError):
        bd_rate(a, curve([1, 2, 3, 4], [10, 11, 12, 13]))
    with pytest.raises(MetricError):
        bd_rate(a, curve([1.0], [60.0]))
    with pytest.raises(MetricError):
        bd_rate(a, curve([1, 2, 3, 4], [60, 61, 62, math.inf]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        bd_rate(a, a)


def test_load_rd_csv_single_and_interleaved():
    text = "label,rate_bpp,d1_psnr_db\nA,0.4,66\nB,0.1,60\nA,0.1,61\nB,0.2,62\nA,0.2,63\nA,0.8,70\n"
    curves = {c.label: c for c in load_rd_csv(io.StringIO(text))}
    assert set(curves) == {"A", "B"}
    assert curves["A"].rates.tolist() == [0.1, 0.2, 0.4, 0.8]
    assert curves["A"].qualities.tolist() == [61, 63, 66, 70]
    assert len(curves["B"]) == 2


def test_load_rd_csv_errors():
    with pytest.raises(MetricError):
        load_rd_csv("foo,bar\n1,2\n")
    with pytest.raises(MetricError):
        load_rd_csv("label,rate_bpp,d1_psnr_db\nA,x,3\n")
    with pytest.raises(MetricError):
        load_rd_csv("label,rate_bpp,d1_psnr_db\nA,1\n")
    with pytest.raises(MetricError):
        load_rd_csv("label,rate_bpp,d1_psnr_db\nA,1,30\nA,1,31\n")


def test_load_rd_csv_accepts_report_rows():
    text = ("cloud,condition,rate_bpp,d1_psnr_db,points_in,points_out\n"
            "c,nni,0.1,50,10,10\nc,frac-sr,0.1,51,10,20\nc,nni,,52,10,10\n")
    curves = {c.label: c for c in load_rd_csv(text)}
    assert set(curves) == {"c/nni", "c/frac-sr"}
    assert len(curves["c/nni"]) == 1


def test_rd_csv_round_trip():
    curves = [curve(A_RATES, A_PSNR, "a"), curve([0.5, 1.5], [60.0, math.inf], "b")]
    back = load_rd_csv(dump_rd_csv(curves))
    assert [c.label for c in back] == ["a", "b"]
    assert back[0].points == curves[0].points
    assert back[1].points == curves[1].points
