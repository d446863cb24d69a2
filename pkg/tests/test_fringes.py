import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noonsim.fringes import (
    AliasingError,
    FringeData,
    FringeDataError,
    FringeFit,
    HarmonicDecomposition,
    check_grid,
    fit_fringe,
    fourier_decompose,
    subtract_background,
)


def grid(n=60):
    return np.arange(n) * (2 * math.pi / n)


@given(
    st.floats(1, 100),
    st.floats(0, 1),
    st.floats(-math.pi, math.pi),
    st.sampled_from([1, 2, 3]),
)
@settings(max_examples=60, deadline=None)
def test_noiseless_fit_recovers_parameters(a, v, delta, k):
    phi = grid()
    data = FringeData.from_mean(phi, a * (1 + v * np.cos(k * phi + delta)))
    f = fit_fringe(data, k)
    assert f.visibility == pytest.approx(v, abs=1e-10)
    assert f.residual < 1e-9 * a
    if v > 1e-6:
        assert math.cos(f.delta - delta) == pytest.approx(1, abs=1e-8)


def test_fit_reports_errors():
    phi = grid()
    f = fit_fringe(FringeData.from_mean(phi, 100 * (1 + 0.5 * np.cos(3 * phi))), 3)
    # sigma^2 = mean: Var(A) = sum(mean) / n^2 = 100 / 60
    assert f.offset_err == pytest.approx(math.sqrt(100 / 60))
    assert f.visibility_err > 0
    assert f.flags == ()


def test_fit_flags():
    phi = grid()
    f = fit_fringe(FringeData.from_mean(phi, np.zeros(60)), 1)
    assert "nonpositive_offset" in f.flags
    over = FringeData(phi, np.ones(60), np.ones(60), 1 + 2 * np.cos(phi))
    assert "visibility_above_one" in fit_fringe(over, 1).flags


def test_fit_rejects_bad_harmonic():
    with pytest.raises(FringeDataError):
        fit_fringe(FringeData.from_mean(grid(), np.ones(60)), 0)


def test_fit_round_trip():
    f = fit_fringe(FringeData.from_mean(grid(), 5 + np.cos(grid())), 1)
    assert FringeFit.from_dict(f.to_dict()) == f


@pytest.mark.parametrize("n,k", [(6, 3), (4, 2), (2, 1)])
def test_aliasing(n, k):
    with pytest.raises(AliasingError):
        check_grid(grid(n), [k])


def test_partial_period_rejected():
    with pytest.raises(AliasingError):
        check_grid(np.linspace(0, math.pi, 30), [1])


def test_nonuniform_rejected():
    phi = grid()
    phi[5] += 0.01
    with pytest.raises(AliasingError):
        check_grid(phi, [1])


def test_decomposition_recovers_components():
    phi = grid()
    y = 22 + 23 * np.cos(2 * phi + 0.3) + 4 * np.cos(phi - 1.0) + 0.5 * np.cos(3 * phi)
    d = fourier_decompose(phi, y)
    assert d.amplitude(0) == pytest.approx(22)
    assert d.amplitude(2) == pytest.approx(23)
    assert d.phase(2) == pytest.approx(0.3)
    assert d.amplitude(1) == pytest.approx(4)
    assert d.phase(1) == pytest.approx(-1.0)
    np.testing.assert_allclose(d.evaluate(phi), y, atol=1e-10)
    assert HarmonicDecomposition.from_dict(d.to_dict()) == d


def test_decomposition_addition_is_linear():
    phi = grid()
    y1, y2 = 3 + np.cos(phi), 1 + np.sin(phi) + 2 * np.cos(2 * phi)
    total = fourier_decompose(phi, y1) + fourier_decompose(phi, y2)
    np.testing.assert_allclose(total.evaluate(phi), y1 + y2, atol=1e-12)


def test_csv_round_trip_sampled_ints():
    phi = grid(7)
    d = FringeData(phi, np.full(7, 3.3), np.full(7, 1.8), np.arange(7))
    back = FringeData.from_csv(d.to_csv())
    assert back.sampled.dtype == np.int64
    np.testing.assert_array_equal(back.phi, phi)
    np.testing.assert_array_equal(back.sampled, d.sampled)
    assert back.to_csv() == d.to_csv()


def test_csv_errors():
    with pytest.raises(FringeDataError):
        FringeData.from_csv("phi_rad,mean\n0,1\n")
    with pytest.raises(FringeDataError):
        FringeData.from_csv("phi_rad,mean,sampled,sigma\n0,1,2,1\n1,1,,1\n")


def test_shape_mismatch():
    with pytest.raises(FringeDataError):
        FringeData(grid(5), np.ones(4), np.ones(5))


def test_subtract_background():
    phi = grid(8)
    total = FringeData(phi, np.full(8, 10.0), np.full(8, 3.0), np.full(8, 12))
    bg = FringeData(phi, np.full(8, 4.0), np.full(8, 4.0))
    out = subtract_background(total, bg)
    np.testing.assert_allclose(out.counts, 8.0)
    np.testing.assert_allclose(out.sigma, 5.0)
    assert out.metadata["background_subtracted"]
    with pytest.raises(FringeDataError):
        subtract_background(total, FringeData(grid(4), np.ones(4), np.ones(4)))
